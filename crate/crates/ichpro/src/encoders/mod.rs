//! Desk-scale encoders and the representation-transformation blocks.
//!
//! The text encoder is an embedding + learned positional table + one
//! self-attention layer; the vision encoder is three strided conv3+ReLU
//! stages with a global average pool. TRT and VRT lift both modality
//! representations onto one shared `[c, h, w]` grid so the fusion block can
//! relate them position by position.

mod text;
mod transform;
mod vision;

pub use text::{encode_text, pooled_text_rep, BoundTextEncoder, TextEncoderParams};
pub use transform::{trt_transform, vrt_transform, BoundTrt, BoundVrt, TrtParams, VrtParams};
pub use vision::{encode_vision, BoundVisionEncoder, VisionEncoderParams, VisionForward};

use crate::error::{Error, Result};
use crate::tensor::TensorId;

/// Token-id sequence with padding marks. `pad_mask[i]` is true where
/// position `i` is padding.
#[derive(Debug, Clone, PartialEq)]
pub struct TextSequence {
    pub token_ids: Vec<usize>,
    pub vocab_size: usize,
    pub pad_mask: Vec<bool>,
}

impl TextSequence {
    pub fn new(token_ids: Vec<usize>, vocab_size: usize, pad_mask: Vec<bool>) -> Result<Self> {
        if pad_mask.len() != token_ids.len() {
            return Err(Error::domain(format!(
                "pad_mask length {} != sequence length {}",
                pad_mask.len(),
                token_ids.len()
            )));
        }
        if let Some(&bad) = token_ids.iter().find(|&&t| t >= vocab_size) {
            return Err(Error::domain(format!("token id {bad} out of vocab {vocab_size}")));
        }
        Ok(TextSequence { token_ids, vocab_size, pad_mask })
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn real_token_count(&self) -> usize {
        self.pad_mask.iter().filter(|&&p| !p).count()
    }
}

/// 3D scan in Hounsfield units before preprocessing, standardized after.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub dims: [usize; 3], // depth, height, width
    pub data: Vec<f64>,
    pub spacing_mm: [f64; 3],
}

impl Volume {
    pub fn new(dims: [usize; 3], data: Vec<f64>, spacing_mm: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::domain(format!("volume has zero extent: {dims:?}")));
        }
        if dims.iter().product::<usize>() != data.len() {
            return Err(Error::domain(format!(
                "volume data length {} does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("volume data"));
        }
        Ok(Volume { dims, data, spacing_mm })
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

/// Tape handle of a `[s_t, d_t]` token-embedding matrix.
#[derive(Debug, Clone, Copy)]
pub struct TextRep(pub TensorId);

/// Tape handle of a `[1, d_v]` pooled backbone feature.
#[derive(Debug, Clone, Copy)]
pub struct VisionRep(pub TensorId);

/// Tape handle of a `[c, h, w]` grid shared by both modalities.
#[derive(Debug, Clone, Copy)]
pub struct UnifiedRep {
    pub id: TensorId,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

/// Shared grid geometry for TRT/VRT outputs and the fusion blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnifiedShape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl UnifiedShape {
    pub fn new(c: usize, h: usize, w: usize) -> Result<Self> {
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::config("unified shape extents must be positive"));
        }
        Ok(UnifiedShape { c, h, w })
    }

    pub fn positions(&self) -> usize {
        self.h * self.w
    }
}

impl Default for UnifiedShape {
    fn default() -> Self {
        // smallest grid that survives the four 2x upsamplings in VRT and a
        // 2x2 pool afterwards
        UnifiedShape { c: 8, h: 16, w: 16 }
    }
}
