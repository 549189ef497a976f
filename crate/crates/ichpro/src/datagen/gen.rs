//! Dataset generation. Deterministic given the seed: labels and
//! complementarity flags come from a master stream, every case then owns
//! its own ChaCha stream keyed by case index.

use super::report::{render_report, ReportMeta};
use super::{CaseMeta, GenConfig, LesionMeta, SyntheticCase, BAD, GOOD};
use crate::encoders::Volume;
use crate::error::Result;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MASTER_STREAM: u64 = u64::MAX;

/// GCS bin distribution for bad cases at full text signal, most severe
/// bin first; good cases use the reverse.
const GCS_BAD: [f64; 4] = [0.6, 0.25, 0.1, 0.05];

/// Reported-volume bin thresholds in voxels.
const VOLUME_BIN_EDGES: [f64; 3] = [150.0, 350.0, 700.0];

pub fn generate_dataset(cfg: &GenConfig) -> Result<Vec<SyntheticCase>> {
    cfg.validate()?;
    let n = cfg.n_cases;
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    master.set_stream(MASTER_STREAM);

    // exact class counts, shuffled order
    let n_bad = (n as f64 * cfg.class_balance).round() as usize;
    let mut labels = vec![BAD; n_bad];
    labels.extend(std::iter::repeat(GOOD).take(n - n_bad));
    labels.shuffle(&mut master);

    // complementarity flags, stratified over both classes
    let mut complementary = vec![false; n];
    for class in [GOOD, BAD] {
        let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut master);
        let take = (idx.len() as f64 * cfg.complementarity_fraction).round() as usize;
        for &i in idx.iter().take(take) {
            complementary[i] = true;
        }
    }

    let mut cases = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        cases.push(generate_case(cfg, i, labels[i], complementary[i], &mut rng)?);
    }
    Ok(cases)
}

fn generate_case(
    cfg: &GenConfig,
    id: usize,
    label: u8,
    complementary: bool,
    rng: &mut ChaCha8Rng,
) -> Result<SyntheticCase> {
    // vision suppression: a complementary bad case draws its lesion from
    // the good-class distribution
    let suppressed = complementary && label == BAD;
    let lesion_class = if suppressed { GOOD } else { label };
    let lesion = sample_lesion(cfg, lesion_class, suppressed, rng);
    let volume = paint_volume(cfg, &lesion, rng)?;
    let clinical = sample_clinical(cfg, label, &lesion, rng);
    let report = render_report(&clinical)?;
    Ok(SyntheticCase {
        id,
        volume,
        report,
        label,
        meta: CaseMeta { lesion, clinical, complementary },
    })
}

/// Effective sampling range: good range interpolated toward the bad range
/// by the vision-signal strength.
fn lerp_range(good: [f64; 2], bad: [f64; 2], t: f64) -> [f64; 2] {
    [good[0] + t * (bad[0] - good[0]), good[1] + t * (bad[1] - good[1])]
}

fn sample_lesion(cfg: &GenConfig, class: u8, suppressed: bool, rng: &mut ChaCha8Rng) -> LesionMeta {
    let (radius, intensity) = if class == BAD {
        (
            lerp_range(cfg.lesion_radius_good, cfg.lesion_radius_bad, cfg.vision_signal),
            lerp_range(cfg.lesion_intensity_good, cfg.lesion_intensity_bad, cfg.vision_signal),
        )
    } else {
        (cfg.lesion_radius_good, cfg.lesion_intensity_good)
    };
    let semi_axes = [
        sample_range(rng, radius),
        sample_range(rng, radius),
        sample_range(rng, radius),
    ];
    let dim = cfg.volume_dim as f64;
    let mut center = [0.0; 3];
    for a in 0..3 {
        let margin = semi_axes[a] + 0.5;
        center[a] = rng.gen_range(margin..(dim - 1.0 - margin));
    }
    LesionMeta {
        center,
        semi_axes,
        intensity: sample_range(rng, intensity),
        suppressed,
    }
}

fn sample_range(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..r[1])
    }
}

/// Smooth noise background plus a solid ellipsoid of elevated intensity.
fn paint_volume(cfg: &GenConfig, lesion: &LesionMeta, rng: &mut ChaCha8Rng) -> Result<Volume> {
    let dim = cfg.volume_dim;
    let mut data = smooth_background(cfg, rng);
    // white noise on top
    for v in &mut data {
        *v += gauss(rng) * cfg.white_noise_hu;
    }
    // solid ellipsoid, painted only inside its bounding box
    let bb = lesion.bounding_box([dim; 3]);
    for z in bb[0].0..=bb[0].1 {
        for y in bb[1].0..=bb[1].1 {
            for x in bb[2].0..=bb[2].1 {
                let dz = (z as f64 - lesion.center[0]) / lesion.semi_axes[0];
                let dy = (y as f64 - lesion.center[1]) / lesion.semi_axes[1];
                let dx = (x as f64 - lesion.center[2]) / lesion.semi_axes[2];
                if dz * dz + dy * dy + dx * dx <= 1.0 {
                    data[(z * dim + y) * dim + x] += lesion.intensity;
                }
            }
        }
    }
    Volume::new([dim; 3], data, [1.0; 3])
}

/// Coarse Gaussian grid trilinearly interpolated to the full resolution.
fn smooth_background(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dim = cfg.volume_dim;
    const G: usize = 5;
    let mut coarse = [0.0; G * G * G];
    for v in &mut coarse {
        *v = gauss(rng) * cfg.smooth_noise_hu;
    }
    let step = (dim - 1) as f64 / (G - 1) as f64;
    let mut data = vec![0.0; dim * dim * dim];
    for z in 0..dim {
        for y in 0..dim {
            for x in 0..dim {
                let pos = [z as f64 / step, y as f64 / step, x as f64 / step];
                let base: Vec<usize> = pos.iter().map(|p| (p.floor() as usize).min(G - 2)).collect();
                let frac: Vec<f64> = pos.iter().zip(&base).map(|(p, &b)| p - b as f64).collect();
                let mut acc = 0.0;
                for dz in 0..2 {
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let w = (if dz == 1 { frac[0] } else { 1.0 - frac[0] })
                                * (if dy == 1 { frac[1] } else { 1.0 - frac[1] })
                                * (if dx == 1 { frac[2] } else { 1.0 - frac[2] });
                            acc += w * coarse[((base[0] + dz) * G + base[1] + dy) * G + base[2] + dx];
                        }
                    }
                }
                data[(z * dim + y) * dim + x] = cfg.background_hu + acc;
            }
        }
    }
    data
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn sample_clinical(cfg: &GenConfig, label: u8, lesion: &LesionMeta, rng: &mut ChaCha8Rng) -> ReportMeta {
    // gender / age / onset / stay carry no label signal
    let gender = rng.gen_range(0..2);
    let age_bin = rng.gen_range(0..4);
    let onset_bin = rng.gen_range(0..4);
    let stay_bin = rng.gen_range(0..4);

    // pseudo-GCS: class-conditional distribution blended with uniform by
    // the text-signal strength
    let s = cfg.text_signal.min(1.0);
    let mut probs = [0.0; 4];
    for b in 0..4 {
        let informative = if label == BAD { GCS_BAD[b] } else { GCS_BAD[3 - b] };
        probs[b] = s * informative + (1.0 - s) * 0.25;
    }
    let gcs_bin = sample_discrete(rng, &probs);

    // reported hematoma volume: the true planted volume under log-normal
    // observation noise, binned by fixed thresholds
    let measured = lesion.volume() * (gauss(rng) * cfg.volume_band_noise).exp();
    let volume_bin = VOLUME_BIN_EDGES.iter().filter(|&&e| measured > e).count();

    ReportMeta { gender, age_bin, onset_bin, stay_bin, gcs_bin, volume_bin }
}

fn sample_discrete(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.gen_range(0.0..total);
    for (i, &p) in probs.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    probs.len() - 1
}

/// Generative distribution of GCS bins for each class; the lookup-rule
/// oracle in the tests scores cases by these.
pub fn gcs_bin_probs(text_signal: f64, label: u8) -> [f64; 4] {
    let s = text_signal.min(1.0);
    let mut probs = [0.0; 4];
    for b in 0..4 {
        let informative = if label == BAD { GCS_BAD[b] } else { GCS_BAD[3 - b] };
        probs[b] = s * informative + (1.0 - s) * 0.25;
    }
    probs
}
