use super::*;
use crate::error::Error;

fn t2(rows: usize, cols: usize, data: &[f64]) -> Tensor {
    Tensor::new(vec![rows, cols], data.to_vec()).unwrap()
}

#[test]
fn construction_checks_extents() {
    assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
    assert!(Tensor::new(vec![2, 0], vec![]).is_err());
}

// ── matmul ──────────────────────────────────────────────────────────────

#[test]
fn matmul_identity_is_noop() {
    let mut tape = Tape::new();
    let eye = tape.constant(&[2, 2], &[1.0, 0.0, 0.0, 1.0]).unwrap();
    let a = tape.constant(&[2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let c = tape.matmul(eye, a).unwrap();
    assert_eq!(tape.data(c), &[1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn matmul_matches_hand_product() {
    // [[1,2],[3,4]] x [[5,6],[7,8]] worked out by hand:
    // [1*5+2*7, 1*6+2*8; 3*5+4*7, 3*6+4*8]
    let mut tape = Tape::new();
    let a = tape.constant(&[2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let b = tape.constant(&[2, 2], &[5.0, 6.0, 7.0, 8.0]).unwrap();
    let c = tape.matmul(a, b).unwrap();
    assert_eq!(tape.data(c), &[19.0, 22.0, 43.0, 50.0]);
}

#[test]
fn matmul_inner_dim_mismatch_names_both_shapes() {
    let mut tape = Tape::new();
    let a = tape.constant(&[2, 3], &[0.0; 6]).unwrap();
    let b = tape.constant(&[2, 2], &[0.0; 4]).unwrap();
    match tape.matmul(a, b) {
        Err(Error::ShapeMismatch { lhs, rhs, .. }) => {
            assert_eq!(lhs, vec![2, 3]);
            assert_eq!(rhs, vec![2, 2]);
        }
        other => panic!("expected shape mismatch, got {other:?}"),
    }
}

// ── softmax ─────────────────────────────────────────────────────────────

#[test]
fn softmax_symmetric_input() {
    let mut tape = Tape::new();
    let x = tape.constant(&[2], &[0.0, 0.0]).unwrap();
    let y = tape.softmax(x, 0).unwrap();
    assert!((tape.data(y)[0] - 0.5).abs() < 1e-15);
    assert!((tape.data(y)[1] - 0.5).abs() < 1e-15);
}

#[test]
fn softmax_direct_evaluation() {
    // exp(0)/(exp(0)+exp(ln 3)) = 1/4, exp(ln 3)/(1+3) = 3/4
    let mut tape = Tape::new();
    let x = tape.constant(&[2], &[0.0, 3.0f64.ln()]).unwrap();
    let y = tape.softmax(x, 0).unwrap();
    assert!((tape.data(y)[0] - 0.25).abs() < 1e-12);
    assert!((tape.data(y)[1] - 0.75).abs() < 1e-12);
}

#[test]
fn softmax_shift_invariance() {
    let vals = [0.3, -1.2, 2.5, 0.0];
    let shifted: Vec<f64> = vals.iter().map(|v| v + 123.456).collect();
    let mut tape = Tape::new();
    let a = tape.constant(&[4], &vals).unwrap();
    let b = tape.constant(&[4], &shifted).unwrap();
    let ya = tape.softmax(a, 0).unwrap();
    let yb = tape.softmax(b, 0).unwrap();
    for (u, v) in tape.data(ya).iter().zip(tape.data(yb)) {
        assert!((u - v).abs() < 1e-12);
    }
}

#[test]
fn softmax_invalid_axis_errors() {
    let mut tape = Tape::new();
    let x = tape.constant(&[2, 2], &[0.0; 4]).unwrap();
    assert!(matches!(tape.softmax(x, 2), Err(Error::InvalidAxis { .. })));
}

#[test]
fn softmax_axis0_of_matrix_normalizes_columns() {
    let mut tape = Tape::new();
    let x = tape.constant(&[2, 3], &[1.0, 0.0, -2.0, 1.0, 3.0, 0.5]).unwrap();
    let y = tape.softmax(x, 0).unwrap();
    let d = tape.data(y);
    for j in 0..3 {
        assert!((d[j] + d[3 + j] - 1.0).abs() < 1e-12);
    }
}

// ── conv3 ───────────────────────────────────────────────────────────────

#[test]
fn conv3_all_ones_sums_region() {
    let mut tape = Tape::new();
    let vol = tape.constant(&[1, 2, 2, 2], &[1.0; 8]).unwrap();
    let ker = tape.constant(&[1, 1, 2, 2, 2], &[1.0; 8]).unwrap();
    let out = tape.conv3(vol, ker, 1).unwrap();
    assert_eq!(tape.shape(out), &[1, 1, 1, 1]);
    assert_eq!(tape.data(out), &[8.0]);
}

#[test]
fn conv3_zero_volume_gives_zero() {
    let mut tape = Tape::new();
    let vol = tape.constant(&[1, 4, 4, 4], &[0.0; 64]).unwrap();
    let ker = tape.constant(&[2, 1, 3, 3, 3], &[0.7; 54]).unwrap();
    let out = tape.conv3(vol, ker, 1).unwrap();
    assert!(tape.data(out).iter().all(|&v| v == 0.0));
}

#[test]
fn conv3_kernel_larger_than_input_errors() {
    let mut tape = Tape::new();
    let vol = tape.constant(&[1, 2, 2, 2], &[0.0; 8]).unwrap();
    let ker = tape.constant(&[1, 1, 3, 3, 3], &[0.0; 27]).unwrap();
    assert!(tape.conv3(vol, ker, 1).is_err());
}

#[test]
fn conv3_output_extents() {
    let mut tape = Tape::new();
    let vol = tape.constant(&[1, 9, 7, 5], &[0.0; 315]).unwrap();
    let ker = tape.constant(&[3, 1, 3, 3, 3], &[0.0; 81]).unwrap();
    let out = tape.conv3(vol, ker, 2).unwrap();
    // floor((in - k)/stride) + 1
    assert_eq!(tape.shape(out), &[3, 4, 3, 2]);
}

#[test]
fn conv3_linearity() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let v1: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v2: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ker: Vec<f64> = (0..27).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (a, b) = (1.7, -0.9);

    let run = |vol: &[f64]| -> Vec<f64> {
        let mut tape = Tape::new();
        let v = tape.constant(&[1, 4, 4, 4], vol).unwrap();
        let k = tape.constant(&[1, 1, 3, 3, 3], &ker).unwrap();
        let o = tape.conv3(v, k, 1).unwrap();
        tape.data(o).to_vec()
    };
    let combo: Vec<f64> = v1.iter().zip(&v2).map(|(x, y)| a * x + b * y).collect();
    let lhs = run(&combo);
    let r1 = run(&v1);
    let r2 = run(&v2);
    for i in 0..lhs.len() {
        assert!((lhs[i] - (a * r1[i] + b * r2[i])).abs() < 1e-9);
    }
}

// ── upsample ────────────────────────────────────────────────────────────

#[test]
fn upsample_factor_one_is_identity() {
    let mut tape = Tape::new();
    let x = tape.constant(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let y = tape.upsample_nearest2(x, 1).unwrap();
    assert_eq!(tape.data(y), &[1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn upsample_replicates_cells() {
    let mut tape = Tape::new();
    let x = tape.constant(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let y = tape.upsample_nearest2(x, 2).unwrap();
    assert_eq!(tape.shape(y), &[1, 4, 4]);
    #[rustfmt::skip]
    let expect = [
        1.0, 1.0, 2.0, 2.0,
        1.0, 1.0, 2.0, 2.0,
        3.0, 3.0, 4.0, 4.0,
        3.0, 3.0, 4.0, 4.0,
    ];
    assert_eq!(tape.data(y), &expect);
}

#[test]
fn upsample_mass_scaling() {
    let mut tape = Tape::new();
    let x = tape.constant(&[2, 2, 3], &[0.5, -1.0, 2.0, 3.0, 0.0, 1.0, -2.0, 4.0, 0.25, 1.0, 1.0, 1.0]).unwrap();
    let y = tape.upsample_nearest2(x, 3).unwrap();
    let sx: f64 = tape.data(x).iter().sum();
    let sy: f64 = tape.data(y).iter().sum();
    assert!((sy - 9.0 * sx).abs() < 1e-9);
}

#[test]
fn upsample_factor_zero_errors() {
    let mut tape = Tape::new();
    let x = tape.constant(&[1, 2, 2], &[0.0; 4]).unwrap();
    assert!(tape.upsample_nearest2(x, 0).is_err());
}

// ── backward ────────────────────────────────────────────────────────────

#[test]
fn backward_sum_of_squares_gives_2x() {
    let vals = [1.0, -2.0, 3.5, 0.0];
    let mut tape = Tape::new();
    let x = tape.param(&[4], &vals).unwrap();
    let sq = tape.mul(x, x).unwrap();
    let loss = tape.sum_all(sq).unwrap();
    tape.backward(loss).unwrap();
    let g = tape.grad(x).unwrap();
    for (gv, v) in g.iter().zip(&vals) {
        assert!((gv - 2.0 * v).abs() < 1e-12);
    }
}

#[test]
fn backward_matmul_chain_matches_finite_differences() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let b_data: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let c_data: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x0 = t2(2, 3, &(0..6).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());

    let err = check_grad_vs_fd(
        |tape, x| {
            let b = tape.constant(&[3, 4], &b_data)?;
            let c = tape.constant(&[4, 2], &c_data)?;
            let xb = tape.matmul(x, b)?;
            let xbc = tape.matmul(xb, c)?;
            tape.sum_all(xbc)
        },
        &x0,
        DEFAULT_FD_STEP,
    )
    .unwrap();
    assert!(err < 1e-4, "matmul chain grad err {err}");
}

#[test]
fn detached_tensor_gets_no_grad() {
    let mut tape = Tape::new();
    let x = tape.param(&[2], &[1.0, 2.0]).unwrap();
    let c = tape.constant(&[2], &[3.0, 4.0]).unwrap();
    let y = tape.mul(x, c).unwrap();
    let loss = tape.sum_all(y).unwrap();
    tape.backward(loss).unwrap();
    assert!(tape.grad(x).is_some());
    assert!(tape.grad(c).is_none());
}

#[test]
fn second_backward_without_rerecording_errors() {
    let mut tape = Tape::new();
    let x = tape.param(&[2], &[1.0, 2.0]).unwrap();
    let loss = tape.sum_all(x).unwrap();
    tape.backward(loss).unwrap();
    assert!(matches!(tape.backward(loss), Err(Error::Tape(_))));
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let mut tape = Tape::new();
    let x = tape.param(&[2], &[1.0, 2.0]).unwrap();
    assert!(matches!(tape.backward(x), Err(Error::Tape(_))));
}

// ── finite differences ──────────────────────────────────────────────────

#[test]
fn finite_diff_of_sum_is_all_ones() {
    let x = t2(2, 2, &[0.3, -0.7, 1.1, 9.0]);
    let g = finite_diff_gradient(|p| Ok(p.data().iter().sum()), &x, DEFAULT_FD_STEP).unwrap();
    for v in g.data() {
        assert!((v - 1.0).abs() < 1e-6);
    }
}

#[test]
fn finite_diff_of_sum_squares() {
    let x = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
    let g = finite_diff_gradient(|p| Ok(p.data().iter().map(|v| v * v).sum()), &x, DEFAULT_FD_STEP).unwrap();
    assert!((g.data()[0] - 2.0).abs() < 1e-6);
    assert!((g.data()[1] - 4.0).abs() < 1e-6);
}

#[test]
fn finite_diff_rejects_non_finite_evaluations() {
    let x = Tensor::new(vec![1], vec![0.0]).unwrap();
    let r = finite_diff_gradient(|p| Ok(1.0 / p.data()[0]), &x, 1e-5);
    // 1/x is finite at ±h, so force a NaN instead
    assert!(r.is_ok());
    let r = finite_diff_gradient(|_| Ok(f64::NAN), &x, 1e-5);
    assert!(r.is_err());
}

#[test]
fn backward_agrees_with_finite_diff_on_random_composites() {
    use rand::{Rng, SeedableRng};
    // three-op composites: affine -> relu -> softmax -> weighted sum
    for seed in 0..10u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let probe: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x0 = t2(2, 3, &probe);
        let err = check_grad_vs_fd(
            |tape, x| {
                let wm = tape.constant(&[3, 3], &w)?;
                let h = tape.matmul(x, wm)?;
                let r = tape.relu(h)?;
                let s = tape.softmax(r, 1)?;
                let sq = tape.mul(s, s)?;
                tape.sum_all(sq)
            },
            &x0,
            DEFAULT_FD_STEP,
        )
        .unwrap();
        assert!(err < 1e-4, "seed {seed}: composite grad err {err}");
    }
}

// ── misc op contracts ───────────────────────────────────────────────────

#[test]
fn softpool_constant_region_is_identity() {
    let mut tape = Tape::new();
    // 2x2 grid, one channel, all c
    let x = tape.constant(&[4, 1], &[3.25; 4]).unwrap();
    let y = tape.softpool2d(x, 2, 2, 2, 2).unwrap();
    assert_eq!(tape.shape(y), &[1, 1]);
    assert!((tape.data(y)[0] - 3.25).abs() < 1e-12);
}

#[test]
fn softpool_direct_formula() {
    // region [0, ln 3]: weights 1/4 and 3/4 -> 0.75 ln 3
    let v = kernels::softpool_region(&[0.0, 3.0f64.ln()]);
    assert!((v - 0.75 * 3.0f64.ln()).abs() < 1e-12);
    // same value through the tape op, padding the region into a 2x2 grid
    // whose other pooling entries sit in a second channel
    let mut tape = Tape::new();
    let x = tape
        .constant(&[4, 1], &[0.0, 3.0f64.ln(), 0.0, 3.0f64.ln()])
        .unwrap();
    let y = tape.softpool2d(x, 2, 2, 2, 2).unwrap();
    let expect = kernels::softpool_region(&[0.0, 3.0f64.ln(), 0.0, 3.0f64.ln()]);
    assert!((tape.data(y)[0] - expect).abs() < 1e-12);
}

#[test]
fn softpool_untileable_grid_is_config_error() {
    let mut tape = Tape::new();
    let x = tape.constant(&[15, 1], &[0.0; 15]).unwrap();
    assert!(matches!(tape.softpool2d(x, 3, 5, 2, 2), Err(Error::Config(_))));
}

#[test]
fn masked_logsumexp_empty_row_errors() {
    let mut tape = Tape::new();
    let x = tape.constant(&[1, 3], &[1.0, 2.0, 3.0]).unwrap();
    assert!(tape.masked_logsumexp_rows(x, &[false, false, false]).is_err());
}

#[test]
fn rows_l2_normalize_zero_row_errors() {
    let mut tape = Tape::new();
    let x = tape.constant(&[2, 2], &[1.0, 1.0, 0.0, 0.0]).unwrap();
    assert!(tape.rows_l2_normalize(x).is_err());
}

#[test]
fn embedding_rejects_out_of_vocab() {
    let mut tape = Tape::new();
    let table = tape.constant(&[3, 2], &[0.0; 6]).unwrap();
    assert!(tape.embedding(table, &[0, 3]).is_err());
}
