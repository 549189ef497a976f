//! Cross-modal attention fusion block.
//!
//! Both unified grids are flattened to position-major `[s, c]` matrices.
//! An entry FC halves the channel count of each branch (giving x for
//! vision, y for text), per-position linear maps produce the Q/K/V feature
//! spaces, and two matching-degree maps are formed:
//!
//!   s_ij = (w_q1 x_i)^T (w_k2 y_j),   beta over the vision index i,
//!   t_ij = (w_q2 y_i)^T (w_k1 x_j),   rho  over the text index i,
//!
//! i.e. every attention distribution normalizes over the positions it
//! attends to. o_x = beta-weighted V1(x) and o_y = rho-weighted V2(y) are
//! SoftPooled together with x and y, branch sums pass linear maps, a
//! channel-axis softmax is applied to each, and the gated results
//! concat(gamma1 * o_v, gamma2 * o_w) form f_cmf.

use crate::encoders::UnifiedRep;
use crate::error::{Error, Result};
use crate::params::{ParamBlock, ParamSet};
use crate::tensor::{Tape, TensorId};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct CmafParams {
    pub in_channels: usize,
    pub half: usize, // entry FC output = qkv dim = d_v
    pub entry_v_w: ParamBlock,
    pub entry_v_b: ParamBlock,
    pub entry_t_w: ParamBlock,
    pub entry_t_b: ParamBlock,
    pub wq1: ParamBlock,
    pub wk1: ParamBlock,
    pub wv1: ParamBlock,
    pub wq2: ParamBlock,
    pub wk2: ParamBlock,
    pub wv2: ParamBlock,
    pub post_v_w: ParamBlock,
    pub post_v_b: ParamBlock,
    pub post_t_w: ParamBlock,
    pub post_t_b: ParamBlock,
    pub gamma1: ParamBlock,
    pub gamma2: ParamBlock,
}

impl CmafParams {
    /// `in_channels` must be even: the entry FC halves it.
    pub fn init(rng: &mut ChaCha8Rng, in_channels: usize) -> Result<Self> {
        if in_channels % 2 != 0 || in_channels == 0 {
            return Err(Error::config(format!(
                "cmaf: in_channels {in_channels} must be positive and even"
            )));
        }
        let half = in_channels / 2;
        let lin = |rng: &mut ChaCha8Rng| ParamBlock::xavier(rng, &[half, half], half, half);
        Ok(CmafParams {
            in_channels,
            half,
            entry_v_w: ParamBlock::xavier(rng, &[in_channels, half], in_channels, half),
            entry_v_b: ParamBlock::zeros(&[half]),
            entry_t_w: ParamBlock::xavier(rng, &[in_channels, half], in_channels, half),
            entry_t_b: ParamBlock::zeros(&[half]),
            wq1: lin(rng),
            wk1: lin(rng),
            wv1: lin(rng),
            wq2: lin(rng),
            wk2: lin(rng),
            wv2: lin(rng),
            post_v_w: lin(rng),
            post_v_b: ParamBlock::zeros(&[half]),
            post_t_w: lin(rng),
            post_t_b: ParamBlock::zeros(&[half]),
            // zero would null the whole block output since nothing bypasses
            // the gate
            gamma1: ParamBlock::scalar(1.0),
            gamma2: ParamBlock::scalar(1.0),
        })
    }

    /// Channel count of f_cmf.
    pub fn out_channels(&self) -> usize {
        2 * self.half
    }

    /// Mirror the vision-branch parameters into the text branch; used by
    /// the swap-symmetry tests.
    pub fn tie_branches(&mut self) {
        self.entry_t_w = self.entry_v_w.clone();
        self.entry_t_b = self.entry_v_b.clone();
        self.wq2 = self.wq1.clone();
        self.wk2 = self.wk1.clone();
        self.wv2 = self.wv1.clone();
        self.post_t_w = self.post_v_w.clone();
        self.post_t_b = self.post_v_b.clone();
        self.gamma2 = self.gamma1.clone();
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundCmaf> {
        Ok(BoundCmaf {
            in_channels: self.in_channels,
            half: self.half,
            entry_v_w: self.entry_v_w.bind(tape)?,
            entry_v_b: self.entry_v_b.bind(tape)?,
            entry_t_w: self.entry_t_w.bind(tape)?,
            entry_t_b: self.entry_t_b.bind(tape)?,
            wq1: self.wq1.bind(tape)?,
            wk1: self.wk1.bind(tape)?,
            wv1: self.wv1.bind(tape)?,
            wq2: self.wq2.bind(tape)?,
            wk2: self.wk2.bind(tape)?,
            wv2: self.wv2.bind(tape)?,
            post_v_w: self.post_v_w.bind(tape)?,
            post_v_b: self.post_v_b.bind(tape)?,
            post_t_w: self.post_t_w.bind(tape)?,
            post_t_b: self.post_t_b.bind(tape)?,
            gamma1: self.gamma1.bind(tape)?,
            gamma2: self.gamma2.bind(tape)?,
        })
    }
}

impl ParamSet for CmafParams {
    fn for_each_block(&mut self, f: &mut dyn FnMut(&str, &mut ParamBlock)) {
        f("cmaf.entry_v_w", &mut self.entry_v_w);
        f("cmaf.entry_v_b", &mut self.entry_v_b);
        f("cmaf.entry_t_w", &mut self.entry_t_w);
        f("cmaf.entry_t_b", &mut self.entry_t_b);
        f("cmaf.wq1", &mut self.wq1);
        f("cmaf.wk1", &mut self.wk1);
        f("cmaf.wv1", &mut self.wv1);
        f("cmaf.wq2", &mut self.wq2);
        f("cmaf.wk2", &mut self.wk2);
        f("cmaf.wv2", &mut self.wv2);
        f("cmaf.post_v_w", &mut self.post_v_w);
        f("cmaf.post_v_b", &mut self.post_v_b);
        f("cmaf.post_t_w", &mut self.post_t_w);
        f("cmaf.post_t_b", &mut self.post_t_b);
        f("cmaf.gamma1", &mut self.gamma1);
        f("cmaf.gamma2", &mut self.gamma2);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundCmaf {
    pub in_channels: usize,
    pub half: usize,
    pub entry_v_w: TensorId,
    pub entry_v_b: TensorId,
    pub entry_t_w: TensorId,
    pub entry_t_b: TensorId,
    pub wq1: TensorId,
    pub wk1: TensorId,
    pub wv1: TensorId,
    pub wq2: TensorId,
    pub wk2: TensorId,
    pub wv2: TensorId,
    pub post_v_w: TensorId,
    pub post_v_b: TensorId,
    pub post_t_w: TensorId,
    pub post_t_b: TensorId,
    pub gamma1: TensorId,
    pub gamma2: TensorId,
}

/// Matching-degree maps in source-major storage: entry (i, j) of
/// `beta_src_major` is beta_{j,i}, so each COLUMN is one attention
/// distribution and sums to 1. Same layout for rho with text as source.
#[derive(Debug, Clone, Copy)]
pub struct MatchingDegrees {
    pub beta_src_major: TensorId,
    pub rho_src_major: TensorId,
    pub positions: usize,
}

/// Plain-data export of attention maps in output-major `[j, i]` layout.
#[derive(Debug, Clone)]
pub struct AttentionMaps {
    pub positions: usize,
    pub beta: Vec<f64>,              // [j * s + i]
    pub rho: Vec<f64>,               // [j * s + i]
    pub mhsaf_heads: Vec<Vec<f64>>,  // one [s' * s'] row-stochastic map per head
}

/// Compute beta and rho from the entry-FC outputs x (vision) and y (text),
/// both `[s, half]`.
pub fn matching_degrees(
    tape: &mut Tape,
    x: TensorId,
    y: TensorId,
    cmaf: &BoundCmaf,
) -> Result<MatchingDegrees> {
    let (sx, dx) = (tape.shape(x)[0], tape.shape(x)[1]);
    let (sy, dy) = (tape.shape(y)[0], tape.shape(y)[1]);
    if sx != sy || dx != dy {
        return Err(Error::ShapeMismatch {
            context: "matching_degrees branch shapes",
            lhs: tape.shape(x).to_vec(),
            rhs: tape.shape(y).to_vec(),
        });
    }
    if dx != cmaf.half {
        return Err(Error::ShapeMismatch {
            context: "matching_degrees channel dim",
            lhs: vec![dx],
            rhs: vec![cmaf.half],
        });
    }
    let qx = tape.matmul(x, cmaf.wq1)?;
    let kx = tape.matmul(x, cmaf.wk1)?;
    let qy = tape.matmul(y, cmaf.wq2)?;
    let ky = tape.matmul(y, cmaf.wk2)?;
    // s_raw[i, j] = (q1 x_i) . (k2 y_j); beta normalizes over i (axis 0)
    let s_raw = tape.matmul_nt(qx, ky)?;
    let beta = tape.softmax(s_raw, 0)?;
    // t_raw[i, j] = (q2 y_i) . (k1 x_j); rho normalizes over i (axis 0)
    let t_raw = tape.matmul_nt(qy, kx)?;
    let rho = tape.softmax(t_raw, 0)?;
    Ok(MatchingDegrees { beta_src_major: beta, rho_src_major: rho, positions: sx })
}

#[derive(Debug, Clone)]
pub struct CmafOutput {
    /// f_cmf: `[s/4, 2*half]`.
    pub fused: TensorId,
    pub grid_h: usize,
    pub grid_w: usize,
    pub degrees: MatchingDegrees,
}

/// Full CMAF block over a (vision, text) pair of unified grids.
pub fn cmaf_forward(
    tape: &mut Tape,
    v_tilde: UnifiedRep,
    t_tilde: UnifiedRep,
    cmaf: &BoundCmaf,
) -> Result<CmafOutput> {
    if (v_tilde.c, v_tilde.h, v_tilde.w) != (t_tilde.c, t_tilde.h, t_tilde.w) {
        return Err(Error::ShapeMismatch {
            context: "cmaf unified inputs",
            lhs: vec![v_tilde.c, v_tilde.h, v_tilde.w],
            rhs: vec![t_tilde.c, t_tilde.h, t_tilde.w],
        });
    }
    if v_tilde.c != cmaf.in_channels {
        return Err(Error::config(format!(
            "cmaf: input channels {} != configured {}",
            v_tilde.c, cmaf.in_channels
        )));
    }
    let (c, h, w) = (v_tilde.c, v_tilde.h, v_tilde.w);
    let s = h * w;

    // channel-major grid -> position-major rows
    let vm = tape.reshape(v_tilde.id, &[c, s])?;
    let v_pos = tape.transpose(vm)?;
    let tm = tape.reshape(t_tilde.id, &[c, s])?;
    let t_pos = tape.transpose(tm)?;

    // entry FC halves the channel dim
    let xw = tape.matmul(v_pos, cmaf.entry_v_w)?;
    let x = tape.add_row_broadcast(xw, cmaf.entry_v_b)?;
    let yw = tape.matmul(t_pos, cmaf.entry_t_w)?;
    let y = tape.add_row_broadcast(yw, cmaf.entry_t_b)?;

    let degrees = matching_degrees(tape, x, y, cmaf)?;

    let vx = tape.matmul(x, cmaf.wv1)?;
    let vy = tape.matmul(y, cmaf.wv2)?;
    // o_x[j] = sum_i beta_{j,i} V1(x)_i; source-major storage makes this a
    // transposed product
    let o_x = tape.matmul_tn(degrees.beta_src_major, vx)?;
    let o_y = tape.matmul_tn(degrees.rho_src_major, vy)?;

    let po_x = tape.softpool2d(o_x, h, w, 2, 2)?;
    let po_y = tape.softpool2d(o_y, h, w, 2, 2)?;
    let px = tape.softpool2d(x, h, w, 2, 2)?;
    let py = tape.softpool2d(y, h, w, 2, 2)?;

    let branch_v = tape.add(po_x, px)?;
    let branch_t = tape.add(po_y, py)?;
    let ov_w = tape.matmul(branch_v, cmaf.post_v_w)?;
    let o_v = tape.add_row_broadcast(ov_w, cmaf.post_v_b)?;
    let ow_w = tape.matmul(branch_t, cmaf.post_t_w)?;
    let o_w = tape.add_row_broadcast(ow_w, cmaf.post_t_b)?;

    // channel-axis softmax, then the learnable gates
    let sv = tape.softmax(o_v, 1)?;
    let sw = tape.softmax(o_w, 1)?;
    let gv = tape.scalar_mul(cmaf.gamma1, sv)?;
    let gw = tape.scalar_mul(cmaf.gamma2, sw)?;
    let fused = tape.concat_cols(gv, gw)?;

    Ok(CmafOutput { fused, grid_h: h / 2, grid_w: w / 2, degrees })
}

impl MatchingDegrees {
    /// Copy both maps out of the tape into output-major `[j, i]` layout.
    pub fn export(&self, tape: &Tape) -> AttentionMaps {
        let s = self.positions;
        let b = tape.data(self.beta_src_major);
        let r = tape.data(self.rho_src_major);
        let mut beta = vec![0.0; s * s];
        let mut rho = vec![0.0; s * s];
        for i in 0..s {
            for j in 0..s {
                beta[j * s + i] = b[i * s + j];
                rho[j * s + i] = r[i * s + j];
            }
        }
        AttentionMaps { positions: s, beta, rho, mhsaf_heads: Vec::new() }
    }
}
