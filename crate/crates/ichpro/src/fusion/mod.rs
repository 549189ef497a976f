//! Joint-attention fusion: SoftPool, the cross-modal attention fusion
//! (CMAF) block, the multi-head self-attention fusion (MHSAF) block, and
//! the composable block pipelines used by the attention-structure ablation.

mod cmaf;
mod mhsaf;
mod topology;

pub use cmaf::{
    cmaf_forward, matching_degrees, AttentionMaps, BoundCmaf, CmafOutput, CmafParams,
    MatchingDegrees,
};
pub use mhsaf::{mhsaf_forward, BoundMhsaf, MhsafOutput, MhsafParams};
pub use topology::{AttentionTopology, BlockKind};

use crate::error::Result;
use crate::tensor::{Tape, TensorId};
use std::io::Write;

/// Exponentially weighted pooling over an `h`×`w` position grid.
///
/// `x` is `[h*w, channels]`; each kernel×kernel region is reduced per
/// channel to sum_i softmax(region)_i * region_i.
pub fn softpool(
    tape: &mut Tape,
    x: TensorId,
    h: usize,
    w: usize,
    kernel: usize,
    stride: usize,
) -> Result<TensorId> {
    tape.softpool2d(x, h, w, kernel, stride)
}

/// CSV export of the matching-degree maps, one row per (j, i) pair.
pub fn export_attention_csv<W: Write>(w: &mut W, maps: &AttentionMaps) -> Result<()> {
    writeln!(w, "j,i,beta,rho")?;
    let s = maps.positions;
    for j in 0..s {
        for i in 0..s {
            writeln!(w, "{j},{i},{:.12e},{:.12e}", maps.beta[j * s + i], maps.rho[j * s + i])?;
        }
    }
    Ok(())
}
