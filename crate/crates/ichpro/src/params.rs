//! Parameter blocks: named, flat f64 buffers that get bound onto a tape as
//! gradient-tracking leaves at the start of every training step.

use crate::error::Result;
use crate::tensor::{Tape, TensorId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl ParamBlock {
    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        ParamBlock { shape: shape.to_vec(), data: vec![0.0; numel] }
    }

    pub fn scalar(v: f64) -> Self {
        ParamBlock { shape: vec![1], data: vec![v] }
    }

    /// Xavier-uniform init: U[-a, a] with a = sqrt(6 / (fan_in + fan_out)).
    pub fn xavier(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Self {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| rng.gen_range(-a..a)).collect();
        ParamBlock { shape: shape.to_vec(), data }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Insert as a gradient-tracking leaf.
    pub fn bind(&self, tape: &mut Tape) -> Result<TensorId> {
        tape.param(&self.shape, &self.data)
    }

    /// Insert as a frozen (detached) leaf.
    pub fn bind_const(&self, tape: &mut Tape) -> Result<TensorId> {
        tape.constant(&self.shape, &self.data)
    }
}

/// Walker over every parameter block of a component, in a stable order.
/// Drives the optimizer, checkpointing, and the dead-path gradient checks.
pub trait ParamSet {
    fn for_each_block(&mut self, f: &mut dyn FnMut(&str, &mut ParamBlock));

    fn block_names(&mut self) -> Vec<String> {
        let mut names = Vec::new();
        self.for_each_block(&mut |name, _| names.push(name.to_string()));
        names
    }

    fn total_params(&mut self) -> usize {
        let mut n = 0;
        self.for_each_block(&mut |_, b| n += b.numel());
        n
    }
}
