//! The VTMF joint loss and its components.
//!
//! IMIMA aligns representations within and across modalities through an
//! exponential-similarity contrastive objective over four direction pairs;
//! SDM matches the cosine-similarity softmax distribution against the true
//! matching distribution in both directions; MLM is masked-token
//! cross-entropy. The joint loss is IMIMA + alpha*SDM + beta*MLM.

mod imima;
mod mlm;
mod sdm;

pub use imima::{imima_loss, ImimaOutput, IntraPositiveStrategy};
pub use mlm::{mlm_loss, MaskedTokenModel, MlmOutput};
pub use sdm::sdm_loss;

use crate::error::{Error, Result};
use crate::tensor::{Tape, TensorId};

/// A batch of paired per-case representations living on one tape.
/// `identities[i] == identities[j]` marks (i, j) as a matched pair.
#[derive(Debug, Clone)]
pub struct PairBatch {
    pub vision: TensorId, // [n, d]
    pub text: TensorId,   // [n, d]
    pub identities: Vec<usize>,
}

impl PairBatch {
    pub fn new(tape: &Tape, vision: TensorId, text: TensorId, identities: Vec<usize>) -> Result<Self> {
        let vs = tape.shape(vision);
        let ts = tape.shape(text);
        if vs != ts || vs.len() != 2 {
            return Err(Error::ShapeMismatch {
                context: "pair batch representations",
                lhs: vs.to_vec(),
                rhs: ts.to_vec(),
            });
        }
        if vs[0] != identities.len() {
            return Err(Error::domain(format!(
                "pair batch: {} rows vs {} identities",
                vs[0],
                identities.len()
            )));
        }
        Ok(PairBatch { vision, text, identities })
    }

    pub fn len(&self) -> usize {
        self.identities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }

    /// l_{i,j} = 1 iff identities are equal (always 1 on the diagonal).
    pub fn matching_matrix(&self) -> Vec<f64> {
        let n = self.len();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if self.identities[i] == self.identities[j] {
                    l[i * n + j] = 1.0;
                }
            }
        }
        l
    }
}

/// Per-sample negative index sets: every index with a differing identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSets {
    pub intra: Vec<Vec<usize>>,
    pub inter: Vec<Vec<usize>>,
}

pub fn negative_sets(identities: &[usize]) -> NegativeSets {
    let negatives: Vec<Vec<usize>> = identities
        .iter()
        .map(|&id| {
            identities
                .iter()
                .enumerate()
                .filter(|&(_, &other)| other != id)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    NegativeSets { intra: negatives.clone(), inter: negatives }
}

/// Weights and constants of the joint loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight of SDM in the joint loss.
    pub alpha: f64,
    /// Weight of MLM in the joint loss.
    pub beta_w: f64,
    /// SDM softmax temperature.
    pub tau: f64,
    /// Smoothing constant inside the SDM KL log.
    pub epsilon: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { alpha: 0.84, beta_w: 0.45, tau: 0.02, epsilon: 1e-8 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.tau <= 0.0 {
            return Err(Error::config("loss weights: tau must be positive"));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::config("loss weights: epsilon must be positive"));
        }
        if self.alpha < 0.0 || self.beta_w < 0.0 {
            return Err(Error::config("loss weights: alpha and beta_w must be >= 0"));
        }
        Ok(())
    }
}

/// Joint loss: imima + alpha*sdm + beta*mlm, with the weights as `[1]`
/// tensors so they stay trainable.
pub fn vtmf_loss(
    tape: &mut Tape,
    imima: TensorId,
    sdm: TensorId,
    mlm: TensorId,
    alpha: TensorId,
    beta_w: TensorId,
) -> Result<TensorId> {
    for (id, name) in [(imima, "imima"), (sdm, "sdm"), (mlm, "mlm")] {
        if !tape.tensor(id).is_scalar() {
            return Err(Error::domain(format!("vtmf component {name} is not scalar")));
        }
        if !tape.data(id)[0].is_finite() {
            return Err(Error::NonFinite("vtmf loss component"));
        }
    }
    let ws = tape.scalar_mul(alpha, sdm)?;
    let wm = tape.scalar_mul(beta_w, mlm)?;
    let a = tape.add(imima, ws)?;
    tape.add(a, wm)
}
