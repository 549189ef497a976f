//! Similarity distribution matching loss.
//!
//! q_{i,j} = l_{i,j} / sum_k l_{i,k} is the true matching distribution;
//! p_{i,j} is the row softmax of cosine similarities over temperature tau.
//! The v2t term is (1/n) sum_ij p_ij log(p_ij / (q_ij + eps)); the loss is
//! the sum of the v2t and t2v terms.

use super::{LossWeights, PairBatch};
use crate::error::{Error, Result};
use crate::tensor::{Tape, TensorId};

pub fn sdm_loss(tape: &mut Tape, batch: &PairBatch, weights: &LossWeights) -> Result<TensorId> {
    weights.validate()?;
    let n = batch.len();
    if n < 2 {
        return Err(Error::domain("sdm: batch must hold at least two samples"));
    }
    // cosine similarity via L2 normalization; zero rows are an error
    let nv = tape.rows_l2_normalize(batch.vision).map_err(zero_norm)?;
    let nt = tape.rows_l2_normalize(batch.text).map_err(zero_norm)?;

    let l = batch.matching_matrix();
    let mut log_q = vec![0.0; n * n];
    for i in 0..n {
        let row_sum: f64 = l[i * n..(i + 1) * n].iter().sum();
        for j in 0..n {
            log_q[i * n + j] = (l[i * n + j] / row_sum + weights.epsilon).ln();
        }
    }

    let v2t = directional_kl(tape, nv, nt, &log_q, weights.tau)?;
    let t2v = directional_kl(tape, nt, nv, &log_q, weights.tau)?;
    tape.add(v2t, t2v)
}

fn directional_kl(
    tape: &mut Tape,
    anchors: TensorId,
    others: TensorId,
    log_q: &[f64],
    tau: f64,
) -> Result<TensorId> {
    let n = tape.shape(anchors)[0];
    let sim = tape.matmul_nt(anchors, others)?;
    let scaled = tape.scale(sim, 1.0 / tau)?;
    let lp = tape.log_softmax(scaled, 1)?;
    let p = tape.exp(lp)?;
    let lq = tape.constant(&[n, n], log_q)?;
    let diff = tape.sub(lp, lq)?;
    let prod = tape.mul(p, diff)?;
    let total = tape.sum_all(prod)?;
    tape.scale(total, 1.0 / n as f64)
}

fn zero_norm(e: crate::error::Error) -> crate::error::Error {
    match e {
        crate::error::Error::Domain(d) => {
            Error::domain(format!("sdm: cosine similarity undefined: {d}"))
        }
        other => other,
    }
}
