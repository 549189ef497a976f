//! On-disk dataset layout:
//!
//! ```text
//! <dir>/genconfig.json        generation config, verbatim
//! <dir>/folds.json            {"k", "seed", "assignments"}
//! <dir>/case_0000/volume.bin  tensor wire format, shape d,h,w, raw HU
//! <dir>/case_0000/report.json {"token_ids", "pad_mask", "vocab_size",
//!                              "label", "meta"}
//! ```

use super::{make_folds, CaseMeta, FoldPlan, GenConfig, SyntheticCase};
use crate::encoders::{TextSequence, Volume};
use crate::error::{Error, Result};
use crate::tensor::{read_tensor, write_tensor, Tensor};
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub cases: Vec<SyntheticCase>,
    pub folds: FoldPlan,
    pub config: GenConfig,
}

impl Dataset {
    pub fn labels(&self) -> Vec<u8> {
        self.cases.iter().map(|c| c.label).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportFile {
    token_ids: Vec<usize>,
    pad_mask: Vec<bool>,
    vocab_size: usize,
    label: u8,
    meta: CaseMeta,
}

pub fn save_dataset(dir: &Path, cases: &[SyntheticCase], folds: &FoldPlan, cfg: &GenConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("genconfig.json"))?), cfg)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("folds.json"))?), folds)?;
    for case in cases {
        let cdir = dir.join(format!("case_{:04}", case.id));
        fs::create_dir_all(&cdir)?;
        let t = Tensor::new(case.volume.dims.to_vec(), case.volume.data.clone())?;
        let mut vw = BufWriter::new(File::create(cdir.join("volume.bin"))?);
        write_tensor(&mut vw, &t)?;
        let report = ReportFile {
            token_ids: case.report.token_ids.clone(),
            pad_mask: case.report.pad_mask.clone(),
            vocab_size: case.report.vocab_size,
            label: case.label,
            meta: case.meta.clone(),
        };
        serde_json::to_writer_pretty(BufWriter::new(File::create(cdir.join("report.json"))?), &report)?;
    }
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let config: GenConfig =
        serde_json::from_reader(BufReader::new(File::open(dir.join("genconfig.json")).map_err(
            |e| Error::dataset(format!("missing genconfig.json in {}: {e}", dir.display())),
        )?))?;
    let folds: FoldPlan = serde_json::from_reader(BufReader::new(
        File::open(dir.join("folds.json"))
            .map_err(|e| Error::dataset(format!("missing folds.json in {}: {e}", dir.display())))?,
    ))?;

    let mut cases = Vec::with_capacity(config.n_cases);
    for id in 0..config.n_cases {
        let cdir = dir.join(format!("case_{id:04}"));
        let t = read_tensor(&mut BufReader::new(File::open(cdir.join("volume.bin")).map_err(
            |e| Error::dataset(format!("missing volume for case {id}: {e}")),
        )?))?;
        if t.shape().len() != 3 {
            return Err(Error::dataset(format!(
                "case {id}: volume must be rank 3, got {:?}",
                t.shape()
            )));
        }
        let dims = [t.shape()[0], t.shape()[1], t.shape()[2]];
        let volume = Volume::new(dims, t.data().to_vec(), [1.0; 3])?;

        let rf: ReportFile = serde_json::from_reader(BufReader::new(
            File::open(cdir.join("report.json"))
                .map_err(|e| Error::dataset(format!("missing report for case {id}: {e}")))?,
        ))?;
        if rf.label > 1 {
            return Err(Error::dataset(format!("case {id}: label {} not binary", rf.label)));
        }
        let report = TextSequence::new(rf.token_ids, rf.vocab_size, rf.pad_mask)?;
        cases.push(SyntheticCase {
            id,
            volume,
            report,
            label: rf.label,
            meta: rf.meta,
        });
    }
    if folds.assignments.len() != cases.len() {
        return Err(Error::dataset(format!(
            "fold plan covers {} samples but dataset has {}",
            folds.assignments.len(),
            cases.len()
        )));
    }
    Ok(Dataset { cases, folds, config })
}

/// Generate, plan folds, and write everything to `dir`.
pub fn generate_and_save(dir: &Path, cfg: &GenConfig, k: usize) -> Result<Dataset> {
    let cases = super::generate_dataset(cfg)?;
    let labels: Vec<u8> = cases.iter().map(|c| c.label).collect();
    let folds = make_folds(&labels, k, cfg.seed)?;
    save_dataset(dir, &cases, &folds, cfg)?;
    Ok(Dataset { cases, folds, config: cfg.clone() })
}
