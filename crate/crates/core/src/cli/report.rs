use std::fs;
use std::path::{Path, PathBuf};

use super::artifacts::{write_atomic, RunManifest, LOG_FILE};
use super::CliError;

pub const BUDGET_FILE: &str = "budget_accuracy.csv";
pub const SIZE_FILE: &str = "accuracy_vs_size.csv";
pub const BUDGET_HEADER: &str = "method,budget,accuracy,reward_capture,sim_calls";
pub const SIZE_HEADER: &str = "method,seed,dataset_size,sim_calls,accuracy";

fn column(header: &[&str], name: &str, path: &Path) -> Result<usize, CliError> {
    header
        .iter()
        .position(|h| *h == name)
        .ok_or_else(|| CliError::Other(format!("{}: missing column {name}", path.display())))
}

/// `(dataset_size, sim_calls, accuracy)` of every evaluated log row.
fn snapshots(path: &Path) -> Result<Vec<(String, String, String)>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let (size, calls, acc) = (
        column(&header, "dataset_size", path)?,
        column(&header, "sim_calls", path)?,
        column(&header, "accuracy", path)?,
    );
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != header.len() {
            return Err(CliError::Other(format!("{}:{}: expected {} columns", path.display(), i + 2, header.len())));
        }
        if !cols[acc].is_empty() {
            out.push((cols[size].to_string(), cols[calls].to_string(), cols[acc].to_string()));
        }
    }
    Ok(out)
}

pub fn cmd_report(run_dirs: &[PathBuf], out_dir: &Path) -> Result<(), CliError> {
    let mut budget = format!("{BUDGET_HEADER}\n");
    let mut size = format!("{SIZE_HEADER}\n");
    for dir in run_dirs {
        if !dir.is_dir() {
            return Err(CliError::Other(format!("run directory not found: {}", dir.display())));
        }
        let m = RunManifest::read(dir).map_err(CliError::Other)?;
        let (Some(eval), Some(calls)) = (m.final_eval, m.sim_calls) else {
            return Err(CliError::Other(format!("{}: run has not finished", dir.display())));
        };
        let cap = m.config.run.budget.map(|b| b.to_string()).unwrap_or_default();
        budget.push_str(&format!("{},{cap},{},{},{calls}\n", m.method, eval.accuracy, eval.reward_capture));
        for (n, c, a) in snapshots(&dir.join(LOG_FILE))? {
            size.push_str(&format!("{},{},{n},{c},{a}\n", m.method, m.seed));
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| CliError::Other(format!("{}: {e}", out_dir.display())))?;
    for (name, text) in [(BUDGET_FILE, budget), (SIZE_FILE, size)] {
        let path = out_dir.join(name);
        write_atomic(&path, text.as_bytes()).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
