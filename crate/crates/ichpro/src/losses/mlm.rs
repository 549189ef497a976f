//! Masked language modeling loss: obscure a fraction of the non-pad
//! tokens, ask the model to predict the originals, take the mean
//! cross-entropy over the masked positions only.

use crate::encoders::TextSequence;
use crate::error::{Error, Result};
use crate::tensor::{Tape, TensorId};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

/// Anything that can score each position of a (masked) sequence over the
/// vocabulary.
pub trait MaskedTokenModel {
    fn vocab_size(&self) -> usize;
    fn mask_token(&self) -> usize;
    /// Per-position logits `[s, vocab]`.
    fn prediction_logits(&self, tape: &mut Tape, seq: &TextSequence) -> Result<TensorId>;
}

#[derive(Debug, Clone)]
pub struct MlmOutput {
    pub loss: TensorId,
    /// Which positions were masked, ascending.
    pub masked_positions: Vec<usize>,
}

pub fn mlm_loss(
    tape: &mut Tape,
    seq: &TextSequence,
    mask_rate: f64,
    model: &impl MaskedTokenModel,
    rng: &mut ChaCha8Rng,
) -> Result<MlmOutput> {
    if !(mask_rate > 0.0 && mask_rate <= 1.0) {
        return Err(Error::config(format!("mlm: mask rate {mask_rate} outside (0, 1]")));
    }
    let maskable: Vec<usize> = (0..seq.len()).filter(|&i| !seq.pad_mask[i]).collect();
    if maskable.is_empty() {
        return Err(Error::domain("mlm: sequence has no maskable tokens"));
    }
    let k = ((mask_rate * maskable.len() as f64).ceil() as usize).max(1).min(maskable.len());
    let mut candidates = maskable;
    candidates.shuffle(rng);
    let mut positions: Vec<usize> = candidates.into_iter().take(k).collect();
    positions.sort_unstable();

    let mut masked = seq.clone();
    for &p in &positions {
        masked.token_ids[p] = model.mask_token();
    }
    let logits = model.prediction_logits(tape, &masked)?;
    let shape = tape.shape(logits);
    if shape.len() != 2 || shape[0] != seq.len() || shape[1] != seq.vocab_size {
        return Err(Error::ShapeMismatch {
            context: "mlm prediction logits",
            lhs: shape.to_vec(),
            rhs: vec![seq.len(), seq.vocab_size],
        });
    }

    let gathered = tape.gather_rows(logits, &positions)?;
    let lp = tape.log_softmax(gathered, 1)?;
    let targets: Vec<usize> = positions.iter().map(|&p| seq.token_ids[p]).collect();
    let picked = tape.pick_per_row(lp, &targets)?;
    let mean = tape.mean_all(picked)?;
    let loss = tape.scale(mean, -1.0)?;
    Ok(MlmOutput { loss, masked_positions: positions })
}
