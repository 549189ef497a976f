//! Volume preprocessing: clamp to an HU window, then z-score standardize
//! over the whole volume.

use crate::encoders::Volume;
use crate::error::{Error, Result};

pub fn preprocess_volume(vol: &Volume, window: [f64; 2]) -> Result<Volume> {
    let [lo, hi] = window;
    if hi <= lo {
        return Err(Error::config(format!("preprocess: window [{lo}, {hi}] is empty")));
    }
    let n = vol.numel() as f64;
    let clamped: Vec<f64> = vol.data.iter().map(|&v| v.clamp(lo, hi)).collect();
    let mean = clamped.iter().sum::<f64>() / n;
    let var = clamped.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return Err(Error::domain(
            "preprocess: volume is constant after clamping (zero standard deviation)",
        ));
    }
    let data = clamped.iter().map(|v| (v - mean) / std).collect();
    Volume::new(vol.dims, data, vol.spacing_mm)
}
