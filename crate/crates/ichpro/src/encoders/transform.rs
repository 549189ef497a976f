//! TRT and VRT: lift the two modality representations onto one `[c, h, w]`
//! grid.
//!
//! TRT multiplies the token matrix by its own transpose (a Gram matrix of
//! token embeddings), flattens, and maps through a fully connected layer.
//! VRT maps the pooled vision feature to a seed grid and applies four 2x
//! nearest-neighbour upsamplings, which fixes h and w to multiples of 16.

use super::{TextRep, UnifiedRep, UnifiedShape, VisionRep};
use crate::error::{Error, Result};
use crate::params::{ParamBlock, ParamSet};
use crate::tensor::{Tape, TensorId};
use rand_chacha::ChaCha8Rng;

pub const VRT_UPSAMPLE_STAGES: usize = 4;
const VRT_FACTOR: usize = 1 << VRT_UPSAMPLE_STAGES; // 16

#[derive(Debug, Clone)]
pub struct TrtParams {
    pub seq_len: usize,
    pub unified: UnifiedShape,
    pub weight: ParamBlock, // [seq_len^2, c*h*w]
    pub bias: ParamBlock,   // [c*h*w]
}

impl TrtParams {
    pub fn init(rng: &mut ChaCha8Rng, seq_len: usize, unified: UnifiedShape) -> Self {
        let gram = seq_len * seq_len;
        let out = unified.c * unified.h * unified.w;
        TrtParams {
            seq_len,
            unified,
            weight: ParamBlock::xavier(rng, &[gram, out], gram, out),
            bias: ParamBlock::zeros(&[out]),
        }
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundTrt> {
        Ok(BoundTrt {
            seq_len: self.seq_len,
            unified: self.unified,
            weight: self.weight.bind(tape)?,
            bias: self.bias.bind(tape)?,
        })
    }
}

impl ParamSet for TrtParams {
    fn for_each_block(&mut self, f: &mut dyn FnMut(&str, &mut ParamBlock)) {
        f("trt.weight", &mut self.weight);
        f("trt.bias", &mut self.bias);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundTrt {
    pub seq_len: usize,
    pub unified: UnifiedShape,
    pub weight: TensorId,
    pub bias: TensorId,
}

/// `[s_t, d_t]` token matrix -> Gram `[s_t, s_t]` -> FC -> `[c, h, w]`.
pub fn trt_transform(tape: &mut Tape, rep: TextRep, trt: &BoundTrt) -> Result<UnifiedRep> {
    let s = tape.shape(rep.0)[0];
    if s != trt.seq_len {
        return Err(Error::config(format!(
            "trt: sequence length {s} != configured {}",
            trt.seq_len
        )));
    }
    let gram = tape.matmul_nt(rep.0, rep.0)?;
    if !tape.tensor(gram).all_finite() {
        return Err(Error::NonFinite("trt gram matrix"));
    }
    let flat = tape.reshape(gram, &[1, s * s])?;
    let fc = tape.matmul(flat, trt.weight)?;
    let biased = tape.add_row_broadcast(fc, trt.bias)?;
    if !tape.tensor(biased).all_finite() {
        return Err(Error::NonFinite("trt output"));
    }
    let (c, h, w) = (trt.unified.c, trt.unified.h, trt.unified.w);
    let grid = tape.reshape(biased, &[c, h, w])?;
    Ok(UnifiedRep { id: grid, c, h, w })
}

#[derive(Debug, Clone)]
pub struct VrtParams {
    pub feature_dim: usize,
    pub unified: UnifiedShape,
    pub weight: ParamBlock, // [feature_dim, c*(h/16)*(w/16)]
    pub bias: ParamBlock,
}

impl VrtParams {
    pub fn init(rng: &mut ChaCha8Rng, feature_dim: usize, unified: UnifiedShape) -> Result<Self> {
        if unified.h % VRT_FACTOR != 0 || unified.w % VRT_FACTOR != 0 {
            return Err(Error::config(format!(
                "vrt: unified extents {}x{} must be divisible by {VRT_FACTOR}",
                unified.h, unified.w
            )));
        }
        let seed = unified.c * (unified.h / VRT_FACTOR) * (unified.w / VRT_FACTOR);
        Ok(VrtParams {
            feature_dim,
            unified,
            weight: ParamBlock::xavier(rng, &[feature_dim, seed], feature_dim, seed),
            bias: ParamBlock::zeros(&[seed]),
        })
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundVrt> {
        Ok(BoundVrt {
            feature_dim: self.feature_dim,
            unified: self.unified,
            weight: self.weight.bind(tape)?,
            bias: self.bias.bind(tape)?,
        })
    }
}

impl ParamSet for VrtParams {
    fn for_each_block(&mut self, f: &mut dyn FnMut(&str, &mut ParamBlock)) {
        f("vrt.weight", &mut self.weight);
        f("vrt.bias", &mut self.bias);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundVrt {
    pub feature_dim: usize,
    pub unified: UnifiedShape,
    pub weight: TensorId,
    pub bias: TensorId,
}

/// `[1, d_v]` -> FC seed grid -> four 2x upsamplings -> `[c, h, w]`.
pub fn vrt_transform(tape: &mut Tape, rep: VisionRep, vrt: &BoundVrt) -> Result<UnifiedRep> {
    let d = tape.shape(rep.0)[1];
    if d != vrt.feature_dim {
        return Err(Error::config(format!(
            "vrt: feature dim {d} != configured {}",
            vrt.feature_dim
        )));
    }
    let (c, h, w) = (vrt.unified.c, vrt.unified.h, vrt.unified.w);
    let fc = tape.matmul(rep.0, vrt.weight)?;
    let biased = tape.add_row_broadcast(fc, vrt.bias)?;
    let mut grid = tape.reshape(biased, &[c, h / VRT_FACTOR, w / VRT_FACTOR])?;
    for _ in 0..VRT_UPSAMPLE_STAGES {
        grid = tape.upsample_nearest2(grid, 2)?;
    }
    Ok(UnifiedRep { id: grid, c, h, w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::SeedableRng;

    #[test]
    fn trt_zero_input_zero_bias_gives_zero_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shape = UnifiedShape::default();
        let params = TrtParams::init(&mut rng, 4, shape); // bias is zero-init
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape).unwrap();
        let rep = TextRep(tape.constant(&[4, 6], &vec![0.0; 24]).unwrap());
        let out = trt_transform(&mut tape, rep, &bound).unwrap();
        assert!(tape.data(out.id).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn trt_orthonormal_rows_reduce_to_identity_gram() {
        // rows of f_t orthonormal -> gram == I -> output == FC(flatten(I))
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let shape = UnifiedShape { c: 2, h: 16, w: 16 };
        let params = TrtParams::init(&mut rng, 3, shape);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape).unwrap();
        #[rustfmt::skip]
        let ortho = [
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
        ];
        let rep = TextRep(tape.constant(&[3, 4], &ortho).unwrap());
        let out = trt_transform(&mut tape, rep, &bound).unwrap();

        // independent evaluation: eye(3) flattened through the same affine map
        let eye = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let w = &params.weight.data;
        let cols = 2 * 16 * 16;
        let expect: Vec<f64> = (0..cols)
            .map(|j| (0..9).map(|i| eye[i] * w[i * cols + j]).sum::<f64>() + params.bias.data[j])
            .collect();
        let got = tape.data(out.id);
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn trt_gram_permutation_symmetry() {
        // permuting token rows permutes gram rows and columns identically
        let data: Vec<f64> = (0..12).map(|i| (i as f64) * 0.37 - 1.1).collect();
        let perm = [2usize, 0, 1];
        let gram_of = |rows: &[f64]| {
            let mut tape = Tape::new();
            let a = tape.constant(&[3, 4], rows).unwrap();
            let g = tape.matmul_nt(a, a).unwrap();
            tape.data(g).to_vec()
        };
        let base = gram_of(&data);
        let permuted: Vec<f64> = perm
            .iter()
            .flat_map(|&r| data[r * 4..(r + 1) * 4].to_vec())
            .collect();
        let gp = gram_of(&permuted);
        for i in 0..3 {
            for j in 0..3 {
                assert!((gp[i * 3 + j] - base[perm[i] * 3 + perm[j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trt_rejects_non_finite_intermediate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = TrtParams::init(&mut rng, 2, UnifiedShape { c: 1, h: 16, w: 16 });
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape).unwrap();
        // a huge row makes the gram overflow to infinity
        let t = Tensor::new(vec![2, 2], vec![1e200, 1e200, 1.0, 1.0]).unwrap();
        let rep = TextRep(tape.leaf(t));
        assert!(matches!(
            trt_transform(&mut tape, rep, &bound),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn vrt_zero_input_gives_zero_grid_and_right_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shape = UnifiedShape::default();
        let params = VrtParams::init(&mut rng, 16, shape).unwrap();
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape).unwrap();
        let rep = VisionRep(tape.constant(&[1, 16], &vec![0.0; 16]).unwrap());
        let out = vrt_transform(&mut tape, rep, &bound).unwrap();
        assert_eq!(tape.shape(out.id), &[8, 16, 16]);
        assert!(tape.data(out.id).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vrt_output_blocks_are_constant_16x16() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = UnifiedShape { c: 3, h: 32, w: 32 }; // 2x2 seed
        let params = VrtParams::init(&mut rng, 5, shape).unwrap();
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape).unwrap();
        let rep = VisionRep(tape.constant(&[1, 5], &[0.3, -0.7, 1.2, 0.0, 2.0]).unwrap());
        let out = vrt_transform(&mut tape, rep, &bound).unwrap();
        let d = tape.data(out.id);
        for c in 0..3 {
            for by in 0..2 {
                for bx in 0..2 {
                    let v0 = d[(c * 32 + by * 16) * 32 + bx * 16];
                    for y in 0..16 {
                        for x in 0..16 {
                            let v = d[(c * 32 + by * 16 + y) * 32 + bx * 16 + x];
                            assert_eq!(v, v0, "block ({by},{bx}) not constant");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn vrt_requires_divisible_extents() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bad = UnifiedShape { c: 2, h: 24, w: 16 };
        assert!(VrtParams::init(&mut rng, 8, bad).is_err());
    }
}
