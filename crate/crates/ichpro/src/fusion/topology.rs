//! The six attention-structure variants: sequences of Cross (CMAF) and
//! Self (MHSAF) blocks over the same pair of unified inputs.
//!
//! A sequence starting with Self consumes the channel-wise concatenation
//! of the two grids; a Cross block consumes the current (vision, text)
//! pair, or the duplicated stream when it appears after another block.

use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Cross,
    SelfAttn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttentionTopology {
    SelfOnly,
    CrossOnly,
    SelfSelf,
    CrossCross,
    SelfCross,
    CrossSelf,
}

impl AttentionTopology {
    pub const ALL: [AttentionTopology; 6] = [
        AttentionTopology::SelfOnly,
        AttentionTopology::CrossOnly,
        AttentionTopology::SelfSelf,
        AttentionTopology::CrossCross,
        AttentionTopology::SelfCross,
        AttentionTopology::CrossSelf,
    ];

    pub fn blocks(&self) -> &'static [BlockKind] {
        use BlockKind::*;
        match self {
            AttentionTopology::SelfOnly => &[SelfAttn],
            AttentionTopology::CrossOnly => &[Cross],
            AttentionTopology::SelfSelf => &[SelfAttn, SelfAttn],
            AttentionTopology::CrossCross => &[Cross, Cross],
            AttentionTopology::SelfCross => &[SelfAttn, Cross],
            AttentionTopology::CrossSelf => &[Cross, SelfAttn],
        }
    }
}

impl fmt::Display for AttentionTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttentionTopology::SelfOnly => "self",
            AttentionTopology::CrossOnly => "cross",
            AttentionTopology::SelfSelf => "self-self",
            AttentionTopology::CrossCross => "cross-cross",
            AttentionTopology::SelfCross => "self-cross",
            AttentionTopology::CrossSelf => "cross-self",
        };
        f.write_str(s)
    }
}

impl FromStr for AttentionTopology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self" => Ok(AttentionTopology::SelfOnly),
            "cross" => Ok(AttentionTopology::CrossOnly),
            "self-self" => Ok(AttentionTopology::SelfSelf),
            "cross-cross" => Ok(AttentionTopology::CrossCross),
            "self-cross" => Ok(AttentionTopology::SelfCross),
            "cross-self" => Ok(AttentionTopology::CrossSelf),
            other => Err(Error::config(format!(
                "unknown topology {other:?}; expected one of self, cross, self-self, cross-cross, self-cross, cross-self"
            ))),
        }
    }
}
