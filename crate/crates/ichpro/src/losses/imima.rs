//! Intra-modality and inter-modality alignment loss.
//!
//! Four directional terms (t2t, v2v, t2v, v2t). Each averages, over
//! anchors, -log[ d(a, pos) / (d(a, pos) + sum_neg d(a, neg)) ] with
//! d(a, b) = exp(a.b) on L2-normalized representations, which equals
//! logsumexp over {pos} + negatives minus the positive similarity.
//!
//! Inter-modal positives are the same-index cross-modal pair; intra-modal
//! positives are other same-identity samples in the same modality, chosen
//! by a pluggable strategy.

use super::PairBatch;
use crate::error::{Error, Result};
use crate::tensor::{Tape, TensorId};

/// How an anchor picks its intra-modal positive(s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntraPositiveStrategy {
    /// The cyclically next same-identity index; one pair per anchor.
    #[default]
    NextSameIdentity,
    /// Average the loss over every same-identity partner.
    MeanAllSameIdentity,
}

#[derive(Debug, Clone, Copy)]
pub struct ImimaOutput {
    pub total: TensorId,
    pub t2t: TensorId,
    pub v2v: TensorId,
    pub t2v: TensorId,
    pub v2t: TensorId,
}

pub fn imima_loss(
    tape: &mut Tape,
    batch: &PairBatch,
    strategy: IntraPositiveStrategy,
) -> Result<ImimaOutput> {
    let n = batch.len();
    if n < 2 {
        return Err(Error::domain("imima: batch must hold at least two samples"));
    }
    let ids = &batch.identities;
    if ids.iter().all(|&id| id == ids[0]) {
        return Err(Error::domain(
            "imima: every anchor has an empty negative set (single identity in batch)",
        ));
    }

    let nt = tape.rows_l2_normalize(batch.text)?;
    let nv = tape.rows_l2_normalize(batch.vision)?;

    // similarity matrices; rows are anchors of the A modality
    let sim_tt = tape.matmul_nt(nt, nt)?;
    let sim_vv = tape.matmul_nt(nv, nv)?;
    let sim_tv = tape.matmul_nt(nt, nv)?;
    let sim_vt = tape.matmul_nt(nv, nt)?;

    let intra_pairs = intra_positive_pairs(ids, strategy);
    let inter_pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();

    let t2t = directional_term(tape, sim_tt, ids, &intra_pairs)?;
    let v2v = directional_term(tape, sim_vv, ids, &intra_pairs)?;
    let t2v = directional_term(tape, sim_tv, ids, &inter_pairs)?;
    let v2t = directional_term(tape, sim_vt, ids, &inter_pairs)?;

    let a = tape.add(t2t, v2v)?;
    let b = tape.add(t2v, v2t)?;
    let total = tape.add(a, b)?;
    Ok(ImimaOutput { total, t2t, v2v, t2v, v2t })
}

/// (anchor, positive) pairs for the intra-modal directions. Anchors whose
/// identity appears only once contribute no pair.
fn intra_positive_pairs(ids: &[usize], strategy: IntraPositiveStrategy) -> Vec<(usize, usize)> {
    let n = ids.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        match strategy {
            IntraPositiveStrategy::NextSameIdentity => {
                for step in 1..n {
                    let j = (i + step) % n;
                    if ids[j] == ids[i] {
                        pairs.push((i, j));
                        break;
                    }
                }
            }
            IntraPositiveStrategy::MeanAllSameIdentity => {
                for j in 0..n {
                    if j != i && ids[j] == ids[i] {
                        pairs.push((i, j));
                    }
                }
            }
        }
    }
    pairs
}

/// Mean over pairs of logsumexp({pos} + negatives) - sim[anchor, pos].
/// An empty pair list contributes a constant zero.
fn directional_term(
    tape: &mut Tape,
    sim: TensorId,
    ids: &[usize],
    pairs: &[(usize, usize)],
) -> Result<TensorId> {
    if pairs.is_empty() {
        return tape.constant(&[1], &[0.0]);
    }
    let n = ids.len();
    let anchors: Vec<usize> = pairs.iter().map(|&(a, _)| a).collect();
    let positives: Vec<usize> = pairs.iter().map(|&(_, p)| p).collect();
    let rows = tape.gather_rows(sim, &anchors)?;

    let mut mask = vec![false; pairs.len() * n];
    for (r, &(anchor, pos)) in pairs.iter().enumerate() {
        mask[r * n + pos] = true;
        for j in 0..n {
            if ids[j] != ids[anchor] {
                mask[r * n + j] = true;
            }
        }
    }
    let lse = tape.masked_logsumexp_rows(rows, &mask)?;
    let pos_sim = tape.pick_per_row(rows, &positives)?;
    let diff = tape.sub(lse, pos_sim)?;
    tape.mean_all(diff)
}
