//! Multi-head self-attention fusion block: h heads of scaled dot-product
//! self-attention, head concat, output projection, residual addition.
//! Projections are bias-free, so a single-position input reduces to
//! proj(V(f)) + f.

use crate::error::{Error, Result};
use crate::params::{ParamBlock, ParamSet};
use crate::tensor::{Tape, TensorId};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct MhsafParams {
    pub channels: usize,
    pub heads: usize,
    pub wq: ParamBlock,
    pub wk: ParamBlock,
    pub wv: ParamBlock,
    pub wo: ParamBlock,
}

impl MhsafParams {
    pub fn init(rng: &mut ChaCha8Rng, channels: usize, heads: usize) -> Result<Self> {
        if heads == 0 || channels % heads != 0 {
            return Err(Error::config(format!(
                "mhsaf: channels {channels} not divisible into {heads} heads"
            )));
        }
        let lin = |rng: &mut ChaCha8Rng| ParamBlock::xavier(rng, &[channels, channels], channels, channels);
        Ok(MhsafParams {
            channels,
            heads,
            wq: lin(rng),
            wk: lin(rng),
            wv: lin(rng),
            wo: lin(rng),
        })
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundMhsaf> {
        Ok(BoundMhsaf {
            channels: self.channels,
            heads: self.heads,
            wq: self.wq.bind(tape)?,
            wk: self.wk.bind(tape)?,
            wv: self.wv.bind(tape)?,
            wo: self.wo.bind(tape)?,
        })
    }
}

impl ParamSet for MhsafParams {
    fn for_each_block(&mut self, f: &mut dyn FnMut(&str, &mut ParamBlock)) {
        f("mhsaf.wq", &mut self.wq);
        f("mhsaf.wk", &mut self.wk);
        f("mhsaf.wv", &mut self.wv);
        f("mhsaf.wo", &mut self.wo);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundMhsaf {
    pub channels: usize,
    pub heads: usize,
    pub wq: TensorId,
    pub wk: TensorId,
    pub wv: TensorId,
    pub wo: TensorId,
}

#[derive(Debug, Clone)]
pub struct MhsafOutput {
    /// Same shape as the input: `[s, channels]`.
    pub out: TensorId,
    /// Row-stochastic attention map per head, `[s, s]` each.
    pub head_weights: Vec<TensorId>,
}

/// Self-attention over `f: [s, channels]`, shape preserving.
pub fn mhsaf_forward(tape: &mut Tape, f: TensorId, mhsaf: &BoundMhsaf) -> Result<MhsafOutput> {
    let shape = tape.shape(f).to_vec();
    if shape.len() != 2 || shape[1] != mhsaf.channels {
        return Err(Error::ShapeMismatch {
            context: "mhsaf input",
            lhs: shape,
            rhs: vec![0, mhsaf.channels],
        });
    }
    let dh = mhsaf.channels / mhsaf.heads;
    let q = tape.matmul(f, mhsaf.wq)?;
    let k = tape.matmul(f, mhsaf.wk)?;
    let v = tape.matmul(f, mhsaf.wv)?;

    let mut head_weights = Vec::with_capacity(mhsaf.heads);
    let mut concat: Option<TensorId> = None;
    for hd in 0..mhsaf.heads {
        let qh = tape.slice_cols(q, hd * dh, dh)?;
        let kh = tape.slice_cols(k, hd * dh, dh)?;
        let vh = tape.slice_cols(v, hd * dh, dh)?;
        let scores = tape.matmul_nt(qh, kh)?;
        let scaled = tape.scale(scores, 1.0 / (dh as f64).sqrt())?;
        let weights = tape.softmax(scaled, 1)?;
        head_weights.push(weights);
        let o = tape.matmul(weights, vh)?;
        concat = Some(match concat {
            None => o,
            Some(prev) => tape.concat_cols(prev, o)?,
        });
    }
    let proj = tape.matmul(concat.expect("at least one head"), mhsaf.wo)?;
    let out = tape.add(f, proj)?;
    Ok(MhsafOutput { out, head_weights })
}
