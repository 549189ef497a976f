//! Synthetic bimodal dataset with planted, partially complementary label
//! signals.
//!
//! Bad-prognosis cases grow larger, brighter lesions (the vision signal)
//! and skew toward severe pseudo-GCS bins (the text signal). A configurable
//! fraction of cases is "complementary": their lesions are drawn from the
//! good-class distribution regardless of label, so only the text carries
//! the label there. That guarantees, in expectation, the fused > vision >
//! text ordering the training harness verifies.

mod folds;
mod gen;
mod io;
mod preprocess;
mod report;
#[cfg(test)]
mod tests;

pub use folds::{make_folds, FoldPlan};
pub use gen::generate_dataset;
pub use io::{generate_and_save, load_dataset, save_dataset, Dataset};
pub use preprocess::preprocess_volume;
pub use report::{render_report, ReportMeta, Vocab};

use crate::encoders::Volume;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const GOOD: u8 = 0;
pub const BAD: u8 = 1;

/// Planted lesion geometry, in voxel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionMeta {
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
    pub intensity: f64,
    /// True when the lesion was drawn from the good-class distribution
    /// even though the label is bad.
    pub suppressed: bool,
}

impl LesionMeta {
    /// Ellipsoid volume in voxels.
    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.semi_axes.iter().product::<f64>()
    }

    /// Axis-aligned bounding box, inclusive, clamped to the volume extents.
    pub fn bounding_box(&self, dims: [usize; 3]) -> [(usize, usize); 3] {
        let mut bb = [(0usize, 0usize); 3];
        for a in 0..3 {
            let lo = (self.center[a] - self.semi_axes[a]).floor().max(0.0) as usize;
            let hi = (self.center[a] + self.semi_axes[a]).ceil().min((dims[a] - 1) as f64) as usize;
            bb[a] = (lo, hi);
        }
        bb
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMeta {
    pub lesion: LesionMeta,
    pub clinical: ReportMeta,
    /// Case belongs to the complementarity share (label recoverable only
    /// from text when the label is bad).
    pub complementary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCase {
    pub id: usize,
    pub volume: Volume,
    pub report: crate::encoders::TextSequence,
    pub label: u8,
    pub meta: CaseMeta,
}

/// Everything the generator needs; serialized verbatim next to the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_cases: usize,
    /// Fraction of bad-prognosis cases.
    pub class_balance: f64,
    pub seed: u64,
    /// Share of cases whose label is recoverable only from text.
    pub complementarity_fraction: f64,
    /// 0 removes the class difference in lesion geometry/intensity.
    pub vision_signal: f64,
    /// 0 makes the pseudo-GCS bins uninformative.
    pub text_signal: f64,
    pub volume_dim: usize,
    pub background_hu: f64,
    pub smooth_noise_hu: f64,
    pub white_noise_hu: f64,
    pub lesion_radius_good: [f64; 2],
    pub lesion_radius_bad: [f64; 2],
    pub lesion_intensity_good: [f64; 2],
    pub lesion_intensity_bad: [f64; 2],
    /// Log-normal sigma of the reported-volume observation noise.
    pub volume_band_noise: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_cases: 300,
            class_balance: 0.5,
            seed: 7,
            complementarity_fraction: 0.3,
            vision_signal: 1.0,
            text_signal: 0.7,
            volume_dim: 32,
            background_hu: 30.0,
            smooth_noise_hu: 3.0,
            white_noise_hu: 1.0,
            lesion_radius_good: [2.5, 4.5],
            lesion_radius_bad: [5.0, 7.0],
            lesion_intensity_good: [12.0, 22.0],
            lesion_intensity_bad: [32.0, 48.0],
            volume_band_noise: 0.8,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cases < 2 {
            return Err(Error::config("gen: need at least two cases"));
        }
        if !(0.0..=1.0).contains(&self.class_balance) {
            return Err(Error::config("gen: class_balance outside [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.complementarity_fraction) {
            return Err(Error::config("gen: complementarity_fraction outside [0, 1]"));
        }
        if self.vision_signal < 0.0 || self.text_signal < 0.0 {
            return Err(Error::config("gen: signal strengths must be >= 0"));
        }
        if self.volume_dim < 8 {
            return Err(Error::config("gen: volume_dim must be at least 8"));
        }
        for r in [
            self.lesion_radius_good,
            self.lesion_radius_bad,
            self.lesion_intensity_good,
            self.lesion_intensity_bad,
        ] {
            if r[0] > r[1] || r[0] < 0.0 {
                return Err(Error::config(format!("gen: bad range {r:?}")));
            }
        }
        // the largest lesion must fit inside the volume with a margin
        let max_r = self.lesion_radius_good[1].max(self.lesion_radius_bad[1]);
        if 2.0 * (max_r + 1.0) >= self.volume_dim as f64 {
            return Err(Error::config(format!(
                "gen: lesion radius {max_r} cannot fit inside a {}-voxel volume",
                self.volume_dim
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.volume_dim; 3]
    }
}
