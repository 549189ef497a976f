use super::gen::gcs_bin_probs;
use super::report::Vocab;
use super::*;

fn roc_auc_scores(scores: &[f64], labels: &[u8]) -> f64 {
    // pair-counting oracle, test-local
    let mut concordant = 0.0;
    let mut ties = 0.0;
    let mut pairs = 0.0;
    for (i, (&si, &li)) in scores.iter().zip(labels).enumerate() {
        for (&sj, &lj) in scores[i + 1..].iter().zip(&labels[i + 1..]) {
            if li == lj {
                continue;
            }
            pairs += 1.0;
            let (pos, neg) = if li == BAD { (si, sj) } else { (sj, si) };
            if pos > neg {
                concordant += 1.0;
            } else if pos == neg {
                ties += 1.0;
            }
        }
    }
    (concordant + 0.5 * ties) / pairs
}

#[test]
fn balanced_config_gives_exact_class_counts() {
    let cfg = GenConfig { n_cases: 300, class_balance: 0.5, ..GenConfig::default() };
    let cases = generate_dataset(&cfg).unwrap();
    let bad = cases.iter().filter(|c| c.label == BAD).count();
    assert_eq!(bad, 150);
    assert_eq!(cases.len(), 300);
}

#[test]
fn same_seed_reproduces_bitwise() {
    let cfg = GenConfig { n_cases: 12, ..GenConfig::default() };
    let a = generate_dataset(&cfg).unwrap();
    let b = generate_dataset(&cfg).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.volume.data, y.volume.data);
        assert_eq!(x.report, y.report);
        assert_eq!(x.label, y.label);
        assert_eq!(x.meta, y.meta);
    }
    let other = GenConfig { seed: 8, ..cfg };
    let c = generate_dataset(&other).unwrap();
    assert_ne!(a[0].volume.data, c[0].volume.data);
}

#[test]
fn lesions_stay_inside_the_volume() {
    let cfg = GenConfig { n_cases: 40, ..GenConfig::default() };
    for case in generate_dataset(&cfg).unwrap() {
        let l = &case.meta.lesion;
        for a in 0..3 {
            assert!(l.center[a] - l.semi_axes[a] >= 0.0);
            assert!(l.center[a] + l.semi_axes[a] <= (cfg.volume_dim - 1) as f64);
        }
    }
}

#[test]
fn oversized_lesion_ranges_are_rejected() {
    let cfg = GenConfig {
        volume_dim: 16,
        lesion_radius_bad: [7.0, 9.0],
        ..GenConfig::default()
    };
    assert!(generate_dataset(&cfg).is_err());
}

#[test]
fn render_report_is_deterministic_and_local() {
    let meta = ReportMeta { gender: 1, age_bin: 2, onset_bin: 0, stay_bin: 3, gcs_bin: 1, volume_bin: 2 };
    let a = render_report(&meta).unwrap();
    let b = render_report(&meta).unwrap();
    assert_eq!(a, b);

    // one changed bin changes exactly one token
    let mut meta2 = meta;
    meta2.gcs_bin = 3;
    let c = render_report(&meta2).unwrap();
    let diffs = a.token_ids.iter().zip(&c.token_ids).filter(|(x, y)| x != y).count();
    assert_eq!(diffs, 1);
}

#[test]
fn render_report_minimal_bins_fixture() {
    // all fields at bin 0: name tokens 2..7 interleaved with the first
    // value token of each field
    let meta = ReportMeta { gender: 0, age_bin: 0, onset_bin: 0, stay_bin: 0, gcs_bin: 0, volume_bin: 0 };
    let seq = render_report(&meta).unwrap();
    assert_eq!(seq.token_ids, vec![2, 8, 3, 10, 4, 14, 5, 18, 6, 22, 7, 26]);
    assert_eq!(seq.vocab_size, Vocab::size());
    assert_eq!(Vocab::size(), 30);
    assert!(seq.pad_mask.iter().all(|&p| !p));
}

#[test]
fn render_report_rejects_out_of_range_bins() {
    let meta = ReportMeta { gender: 2, age_bin: 0, onset_bin: 0, stay_bin: 0, gcs_bin: 0, volume_bin: 0 };
    assert!(render_report(&meta).is_err());
}

#[test]
fn fold_partition_property_over_random_draws() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let n = rng.gen_range(10..80);
        let seed: u64 = rng.gen();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let plan = make_folds(&labels, 5, seed).unwrap();
        // partition
        let mut seen = vec![false; n];
        for fold in 0..5 {
            for i in plan.validation_indices(fold) {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        // stratification within +-1
        for class in [0u8, 1] {
            let total = labels.iter().filter(|&&l| l == class).count();
            let per_fold: Vec<usize> = (0..5)
                .map(|f| {
                    plan.validation_indices(f).iter().filter(|&&i| labels[i] == class).count()
                })
                .collect();
            let lo = total / 5;
            let hi = lo + usize::from(total % 5 != 0);
            for c in per_fold {
                assert!(c >= lo.saturating_sub(0) && c <= hi, "class {class}: {c} not in [{lo},{hi}]");
            }
        }
    }
}

#[test]
fn lesion_volume_rule_separates_vision_signal_cases() {
    // brute-force threshold rule on the planted lesion volume, evaluated on
    // the cases whose vision signal is intact
    let cfg = GenConfig::default();
    let cases = generate_dataset(&cfg).unwrap();
    let subset: Vec<&SyntheticCase> = cases.iter().filter(|c| !c.meta.lesion.suppressed).collect();
    let scores: Vec<f64> = subset.iter().map(|c| c.meta.lesion.volume()).collect();
    let labels: Vec<u8> = subset.iter().map(|c| c.label).collect();
    let auc = roc_auc_scores(&scores, &labels);
    assert!(auc > 0.75, "volume-rule AUC {auc} too low");
}

#[test]
fn gcs_lookup_rule_recovers_labels_from_text() {
    // score cases by the generative posterior of their pseudo-GCS bin;
    // mean AUC over five seeds must clear 0.75
    let mut aucs = Vec::new();
    for seed in 0..5 {
        let cfg = GenConfig { seed: 100 + seed, ..GenConfig::default() };
        let cases = generate_dataset(&cfg).unwrap();
        let p_bad = gcs_bin_probs(cfg.text_signal, BAD);
        let p_good = gcs_bin_probs(cfg.text_signal, GOOD);
        let scores: Vec<f64> = cases
            .iter()
            .map(|c| {
                let b = c.meta.clinical.gcs_bin;
                p_bad[b] / (p_bad[b] + p_good[b])
            })
            .collect();
        let labels: Vec<u8> = cases.iter().map(|c| c.label).collect();
        aucs.push(roc_auc_scores(&scores, &labels));
    }
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    assert!(mean > 0.75, "gcs lookup mean AUC {mean} (per-seed {aucs:?})");
}

#[test]
fn zero_vision_signal_makes_the_volume_rule_blind() {
    // with the class difference in lesion geometry removed, the volume
    // threshold rule falls to chance
    let mut aucs = Vec::new();
    for seed in 0..5 {
        let cfg = GenConfig {
            seed: 200 + seed,
            vision_signal: 0.0,
            complementarity_fraction: 0.0,
            ..GenConfig::default()
        };
        let cases = generate_dataset(&cfg).unwrap();
        let scores: Vec<f64> = cases.iter().map(|c| c.meta.lesion.volume()).collect();
        let labels: Vec<u8> = cases.iter().map(|c| c.label).collect();
        aucs.push(roc_auc_scores(&scores, &labels));
    }
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    assert!((mean - 0.5).abs() < 0.05, "null-signal mean AUC {mean} (per-seed {aucs:?})");
}

#[test]
fn complementary_bad_cases_look_like_good_ones() {
    let cfg = GenConfig::default();
    let cases = generate_dataset(&cfg).unwrap();
    let n_bad = cases.iter().filter(|c| c.label == BAD).count();
    let suppressed = cases.iter().filter(|c| c.meta.lesion.suppressed).count();
    let expect = (n_bad as f64 * cfg.complementarity_fraction).round() as usize;
    assert_eq!(suppressed, expect);
    for c in &cases {
        if c.meta.lesion.suppressed {
            assert_eq!(c.label, BAD);
            // drawn from the good distribution
            for a in 0..3 {
                assert!(c.meta.lesion.semi_axes[a] <= cfg.lesion_radius_good[1]);
            }
            assert!(c.meta.lesion.intensity <= cfg.lesion_intensity_good[1]);
        }
    }
}

#[test]
fn dataset_roundtrips_through_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = GenConfig { n_cases: 6, ..GenConfig::default() };
    let saved = generate_and_save(tmp.path(), &cfg, 3).unwrap();
    let loaded = load_dataset(tmp.path()).unwrap();
    assert_eq!(loaded.cases.len(), 6);
    assert_eq!(loaded.folds, saved.folds);
    assert_eq!(loaded.config, cfg);
    for (a, b) in saved.cases.iter().zip(&loaded.cases) {
        assert_eq!(a.volume.data, b.volume.data);
        assert_eq!(a.report, b.report);
        assert_eq!(a.label, b.label);
        assert_eq!(a.meta, b.meta);
    }
}
