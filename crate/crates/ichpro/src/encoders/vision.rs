//! Toy vision encoder: three strided conv3+ReLU stages, then a global
//! average pool. The last stage's activations are exposed for Score-CAM.

use super::{Volume, VisionRep};
use crate::error::{Error, Result};
use crate::params::{ParamBlock, ParamSet};
use crate::tensor::{Tape, TensorId};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct ConvStage {
    pub kernels: ParamBlock, // [c_out, c_in, k, k, k]
    pub bias: ParamBlock,    // [c_out]
}

#[derive(Debug, Clone)]
pub struct VisionEncoderParams {
    pub input_dims: [usize; 3],
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub relu: bool, // disabled only by linearity tests
    pub stages: Vec<ConvStage>,
}

impl VisionEncoderParams {
    pub fn init(rng: &mut ChaCha8Rng, input_dims: [usize; 3]) -> Self {
        Self::init_with(rng, input_dims, &[4, 8, 16], 3, 2, true)
    }

    pub fn init_with(
        rng: &mut ChaCha8Rng,
        input_dims: [usize; 3],
        channels: &[usize],
        kernel: usize,
        stride: usize,
        relu: bool,
    ) -> Self {
        let mut stages = Vec::new();
        let mut c_in = 1;
        for &c_out in channels {
            let fan_in = c_in * kernel * kernel * kernel;
            stages.push(ConvStage {
                kernels: ParamBlock::xavier(
                    rng,
                    &[c_out, c_in, kernel, kernel, kernel],
                    fan_in,
                    c_out,
                ),
                bias: ParamBlock::zeros(&[c_out]),
            });
            c_in = c_out;
        }
        VisionEncoderParams {
            input_dims,
            channels: channels.to_vec(),
            kernel,
            stride,
            relu,
            stages,
        }
    }

    pub fn feature_dim(&self) -> usize {
        *self.channels.last().expect("at least one stage")
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundVisionEncoder> {
        let mut stages = Vec::new();
        for s in &self.stages {
            stages.push((s.kernels.bind(tape)?, s.bias.bind(tape)?));
        }
        Ok(BoundVisionEncoder {
            input_dims: self.input_dims,
            stride: self.stride,
            relu: self.relu,
            stages,
        })
    }
}

impl ParamSet for VisionEncoderParams {
    fn for_each_block(&mut self, f: &mut dyn FnMut(&str, &mut ParamBlock)) {
        for (i, stage) in self.stages.iter_mut().enumerate() {
            f(&format!("vision.stage{i}.kernels"), &mut stage.kernels);
            f(&format!("vision.stage{i}.bias"), &mut stage.bias);
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundVisionEncoder {
    pub input_dims: [usize; 3],
    pub stride: usize,
    pub relu: bool,
    pub stages: Vec<(TensorId, TensorId)>,
}

/// Forward pass artifacts; `last_activation` feeds Score-CAM.
#[derive(Debug, Clone, Copy)]
pub struct VisionForward {
    pub rep: VisionRep,
    pub last_activation: TensorId,
    pub last_activation_dims: [usize; 4], // [c, d, h, w]
}

/// Standardized volume -> pooled `[1, d_v]` feature.
pub fn encode_vision(tape: &mut Tape, vol: &Volume, enc: &BoundVisionEncoder) -> Result<VisionForward> {
    if vol.dims != enc.input_dims {
        return Err(Error::config(format!(
            "volume extents {:?} do not match encoder input {:?}",
            vol.dims, enc.input_dims
        )));
    }
    let [d, h, w] = vol.dims;
    let mut x = tape.constant(&[1, d, h, w], &vol.data)?;
    for &(ker, bias) in &enc.stages {
        let conv = tape.conv3(x, ker, enc.stride)?;
        let biased = tape.add_channel_bias(conv, bias)?;
        x = if enc.relu { tape.relu(biased)? } else { biased };
    }
    let shape = tape.shape(x).to_vec();
    let dims = [shape[0], shape[1], shape[2], shape[3]];
    let rep = tape.global_avg_pool3(x)?;
    Ok(VisionForward {
        rep: VisionRep(rep),
        last_activation: x,
        last_activation_dims: dims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn volume(dims: [usize; 3], fill: impl Fn(usize) -> f64) -> Volume {
        let n = dims.iter().product();
        Volume::new(dims, (0..n).map(fill).collect(), [1.0; 3]).unwrap()
    }

    #[test]
    fn zero_volume_gives_zero_representation() {
        // biases init to zero, so a zero volume stays zero through every stage
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = VisionEncoderParams::init(&mut rng, [16, 16, 16]);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape).unwrap();
        let out = encode_vision(&mut tape, &volume([16, 16, 16], |_| 0.0), &bound).unwrap();
        assert!(tape.data(out.rep.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_free_config_is_linear_in_the_volume() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = VisionEncoderParams::init_with(&mut rng, [16, 16, 16], &[4, 8], 3, 2, false);
        let run = |scale: f64| {
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape).unwrap();
            let v = volume([16, 16, 16], |i| scale * ((i % 17) as f64 * 0.1 - 0.8));
            let out = encode_vision(&mut tape, &v, &bound).unwrap();
            tape.data(out.rep.0).to_vec()
        };
        let base = run(1.0);
        let scaled = run(3.5);
        for (b, s) in base.iter().zip(&scaled) {
            assert!((s - 3.5 * b).abs() < 1e-9, "expected {} got {s}", 3.5 * b);
        }
    }

    #[test]
    fn wrong_input_extents_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = VisionEncoderParams::init(&mut rng, [32, 32, 32]);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape).unwrap();
        let bad = volume([16, 16, 16], |_| 0.0);
        assert!(encode_vision(&mut tape, &bad, &bound).is_err());
    }
}
