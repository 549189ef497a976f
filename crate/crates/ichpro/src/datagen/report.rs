//! Clinical report rendering: a fixed-order template of field-name token
//! followed by binned value token. The generator emits token ids directly;
//! there is no free-text tokenization.

use crate::encoders::TextSequence;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Binned clinical fields planted per case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub gender: usize,     // 2 bins
    pub age_bin: usize,    // 4 bins
    pub onset_bin: usize,  // 4 bins: onset-to-scan time
    pub stay_bin: usize,   // 4 bins: hospital stay
    pub gcs_bin: usize,    // 4 bins, 0 = most severe
    pub volume_bin: usize, // 4 bins of the reported hematoma volume
}

/// Token-id layout of the report vocabulary.
///
/// 0 = PAD, 1 = MASK, then one name token per field, then the per-field
/// value bins in field order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vocab;

impl Vocab {
    pub const PAD: usize = 0;
    pub const MASK: usize = 1;

    pub const FIELD_NAMES: [(&'static str, usize); 6] = [
        ("gender", 2),
        ("age", 4),
        ("onset", 4),
        ("stay", 4),
        ("gcs", 4),
        ("volume", 4),
    ];

    pub const fn field_token(field: usize) -> usize {
        2 + field
    }

    pub fn value_token(field: usize, bin: usize) -> usize {
        let mut base = 2 + Self::FIELD_NAMES.len();
        for f in 0..field {
            base += Self::FIELD_NAMES[f].1;
        }
        base + bin
    }

    pub fn size() -> usize {
        2 + Self::FIELD_NAMES.len() + Self::FIELD_NAMES.iter().map(|(_, b)| b).sum::<usize>()
    }

    /// Tokens per report: one name + one value token per field.
    pub const fn seq_len() -> usize {
        2 * Self::FIELD_NAMES.len()
    }
}

impl ReportMeta {
    pub fn bins(&self) -> [usize; 6] {
        [self.gender, self.age_bin, self.onset_bin, self.stay_bin, self.gcs_bin, self.volume_bin]
    }

    pub fn validate(&self) -> Result<()> {
        for (&bin, &(name, count)) in self.bins().iter().zip(Vocab::FIELD_NAMES.iter()) {
            if bin >= count {
                return Err(Error::domain(format!("report field {name} bin {bin} out of {count}")));
            }
        }
        Ok(())
    }
}

/// Fixed-order template: [name_0, value_0, name_1, value_1, ...].
pub fn render_report(meta: &ReportMeta) -> Result<TextSequence> {
    meta.validate()?;
    let mut ids = Vec::with_capacity(Vocab::seq_len());
    for (field, &bin) in meta.bins().iter().enumerate() {
        ids.push(Vocab::field_token(field));
        ids.push(Vocab::value_token(field, bin));
    }
    let len = ids.len();
    TextSequence::new(ids, Vocab::size(), vec![false; len])
}
