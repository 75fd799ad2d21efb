//! On-disk artifacts of a run. Every file is replaced atomically by writing a
//! sibling temp file and renaming it over the target.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::BinaryVector;
use crate::itrs::{EvalReport, RunLog};
use crate::tree::{Record, SparseRewardDataset};

use super::config::Config;

pub const DATASET_FILE: &str = "dataset.csv";
pub const TREE_FILE: &str = "tree.txt";
pub const LOG_FILE: &str = "log.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const NUSE_FILE: &str = "nuse.csv";
pub const DATASET_HEADER: &str = "state_id,features,action,reward";

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
    }
    fs::rename(&tmp, path)
}

/// Rewards are written with 17 significant digits, enough to round-trip any f64.
pub fn dataset_csv(ds: &SparseRewardDataset) -> String {
    let mut out = format!("{DATASET_HEADER}\n");
    for r in ds.records() {
        out.push_str(&format!("{},{},{},{:.16e}\n", r.state_id, r.features, r.action, r.reward));
    }
    out
}

pub fn parse_dataset_csv(text: &str, n_actions: usize, feature_dim: usize) -> Result<SparseRewardDataset, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == DATASET_HEADER => {}
        _ => return Err(format!("line 1: expected header {DATASET_HEADER:?}")),
    }
    let mut ds = SparseRewardDataset::new(n_actions, feature_dim);
    for (i, line) in lines {
        let at = |m: String| format!("line {}: {m}", i + 1);
        let cols: Vec<&str> = line.split(',').collect();
        let [id, bits, action, reward] = cols[..] else {
            return Err(at(format!("expected 4 columns, got {}", cols.len())));
        };
        let record = Record {
            state_id: id.parse().map_err(|e| at(format!("state_id: {e}")))?,
            features: bits.parse::<BinaryVector>().map_err(|e| at(format!("features: {e}")))?,
            action: action.parse().map_err(|e| at(format!("action: {e}")))?,
            reward: reward.parse().map_err(|e| at(format!("reward: {e}")))?,
        };
        ds.push(record).map_err(|e| at(e.to_string()))?;
    }
    Ok(ds)
}

/// Written before a run starts and rewritten when it stops. A manifest whose
/// `stop_reason` is null belongs to an interrupted run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub method: String,
    pub seed: u64,
    pub config: Config,
    pub stop_reason: Option<String>,
    pub sim_calls: Option<u64>,
    pub final_eval: Option<EvalReport>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, method: &str, config: &Config, outputs: &[&str]) -> Self {
        Self {
            version: VERSION.to_string(),
            command: command.to_string(),
            method: method.to_string(),
            seed: config.run.seed,
            config: config.clone(),
            stop_reason: None,
            sim_calls: None,
            final_eval: None,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }

    pub fn read(dir: &Path) -> Result<Self, String> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}:{}: {e}", path.display(), e.line()))
    }
}

/// Resume state: the run log plus the loop checkpoint, as JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedProgress<S> {
    pub log: RunLog,
    pub checkpoint: crate::itrs::Checkpoint<S>,
}
