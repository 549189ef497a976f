//! Toy text encoder: embedding lookup + learned positional embedding + one
//! self-attention layer. Padded positions are zeroed before and after the
//! attention layer and never attended to.

use super::{TextRep, TextSequence};
use crate::error::{Error, Result};
use crate::params::{ParamBlock, ParamSet};
use crate::tensor::{Tape, TensorId};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct TextEncoderParams {
    pub vocab_size: usize,
    pub max_len: usize,
    pub dim: usize,
    pub embedding: ParamBlock, // [vocab, dim]
    pub positional: ParamBlock, // [max_len, dim]
    pub wq: ParamBlock,
    pub wk: ParamBlock,
    pub wv: ParamBlock,
    pub wo: ParamBlock,
}

impl TextEncoderParams {
    pub fn init(rng: &mut ChaCha8Rng, vocab_size: usize, max_len: usize, dim: usize) -> Self {
        TextEncoderParams {
            vocab_size,
            max_len,
            dim,
            embedding: ParamBlock::xavier(rng, &[vocab_size, dim], vocab_size, dim),
            positional: ParamBlock::xavier(rng, &[max_len, dim], max_len, dim),
            wq: ParamBlock::xavier(rng, &[dim, dim], dim, dim),
            wk: ParamBlock::xavier(rng, &[dim, dim], dim, dim),
            wv: ParamBlock::xavier(rng, &[dim, dim], dim, dim),
            wo: ParamBlock::xavier(rng, &[dim, dim], dim, dim),
        }
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundTextEncoder> {
        Ok(BoundTextEncoder {
            vocab_size: self.vocab_size,
            max_len: self.max_len,
            dim: self.dim,
            embedding: self.embedding.bind(tape)?,
            positional: self.positional.bind(tape)?,
            wq: self.wq.bind(tape)?,
            wk: self.wk.bind(tape)?,
            wv: self.wv.bind(tape)?,
            wo: self.wo.bind(tape)?,
        })
    }
}

impl ParamSet for TextEncoderParams {
    fn for_each_block(&mut self, f: &mut dyn FnMut(&str, &mut ParamBlock)) {
        f("text.embedding", &mut self.embedding);
        f("text.positional", &mut self.positional);
        f("text.wq", &mut self.wq);
        f("text.wk", &mut self.wk);
        f("text.wv", &mut self.wv);
        f("text.wo", &mut self.wo);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundTextEncoder {
    pub vocab_size: usize,
    pub max_len: usize,
    pub dim: usize,
    pub embedding: TensorId,
    pub positional: TensorId,
    pub wq: TensorId,
    pub wk: TensorId,
    pub wv: TensorId,
    pub wo: TensorId,
}

/// Token embeddings -> `[s_t, dim]`. Deterministic given params.
pub fn encode_text(tape: &mut Tape, seq: &TextSequence, enc: &BoundTextEncoder) -> Result<TextRep> {
    if seq.is_empty() {
        return Err(Error::domain("encode_text: empty sequence"));
    }
    if seq.vocab_size != enc.vocab_size {
        return Err(Error::config(format!(
            "sequence vocab {} != encoder vocab {}",
            seq.vocab_size, enc.vocab_size
        )));
    }
    let s = seq.len();
    if s > enc.max_len {
        return Err(Error::config(format!(
            "sequence length {s} exceeds positional table {}",
            enc.max_len
        )));
    }
    let emb = tape.embedding(enc.embedding, &seq.token_ids)?;
    let positions: Vec<usize> = (0..s).collect();
    let pos = tape.embedding(enc.positional, &positions)?;
    let summed = tape.add(emb, pos)?;

    // zero out padded rows so they contribute nothing downstream
    let row_keep: Vec<f64> = seq
        .pad_mask
        .iter()
        .flat_map(|&p| std::iter::repeat(if p { 0.0 } else { 1.0 }).take(enc.dim))
        .collect();
    let h = tape.mul_const(summed, &row_keep)?;

    // single-head self-attention over the non-pad positions
    let q = tape.matmul(h, enc.wq)?;
    let k = tape.matmul(h, enc.wk)?;
    let v = tape.matmul(h, enc.wv)?;
    let scores = tape.matmul_nt(q, k)?;
    let scaled = tape.scale(scores, 1.0 / (enc.dim as f64).sqrt())?;
    // every query row may look at any non-pad key
    let mut att_mask = vec![false; s * s];
    for i in 0..s {
        for j in 0..s {
            att_mask[i * s + j] = !seq.pad_mask[j];
        }
    }
    let weights = tape.masked_softmax_rows(scaled, &att_mask)?;
    let att = tape.matmul(weights, v)?;
    let proj = tape.matmul(att, enc.wo)?;
    let res = tape.add(h, proj)?;
    let out = tape.mul_const(res, &row_keep)?;
    Ok(TextRep(out))
}

/// Mean over non-pad rows -> `[1, dim]`; used by the pairwise losses.
/// An all-pad sequence pools to the zero vector.
pub fn pooled_text_rep(tape: &mut Tape, rep: TextRep, seq: &TextSequence) -> Result<TensorId> {
    let keep: Vec<bool> = seq.pad_mask.iter().map(|&p| !p).collect();
    if keep.iter().any(|&k| k) {
        tape.masked_mean_rows(rep.0, &keep)
    } else {
        let dim = tape.shape(rep.0)[1];
        tape.constant(&[1, dim], &vec![0.0; dim])
    }
}
