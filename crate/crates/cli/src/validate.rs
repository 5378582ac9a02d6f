//! Re-checks a finished output directory.

use std::collections::BTreeMap;
use std::path::Path;

use spinflow::check_coupling_inequality;
use spinflow::eventlog::{load_event_log, read_discrepancy_times};

use crate::commands::{DISCREPANCY_CSV, ENSEMBLE_CSV};
use crate::manifest::{sha256_file, RunManifest};
use crate::studies::{BIFURCATION_CSV_HEADER, DISCREPANCY_CSV_HEADER, ENSEMBLE_CSV_HEADER};
use crate::CliError;

#[derive(Debug, Default)]
pub struct ValidationReport {
    pub files_checked: usize,
    pub runs_checked: usize,
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

fn first_line(path: &Path) -> Option<String> {
    std::fs::read_to_string(path).ok()?.lines().next().map(str::to_string)
}

/// Checks the manifest checksums, CSV headers, and the coupling inequality
/// on every stored coupled run.
pub fn validate(dir: &Path) -> Result<ValidationReport, CliError> {
    let manifest = RunManifest::load(dir)?;
    let mut report = ValidationReport::default();
    for (name, digest) in &manifest.files {
        let path = dir.join(name);
        match sha256_file(&path) {
            Ok(actual) if &actual == digest => {}
            Ok(_) => report.problems.push(format!("{name}: checksum mismatch")),
            Err(e) => report.problems.push(format!("{name}: {e}")),
        }
        report.files_checked += 1;
        let header = match name.rsplit('/').next().unwrap_or(name) {
            n if n == ENSEMBLE_CSV => Some(ENSEMBLE_CSV_HEADER),
            "bifurcation.csv" => Some(BIFURCATION_CSV_HEADER),
            n if n == DISCREPANCY_CSV => Some(DISCREPANCY_CSV_HEADER),
            "discrepancies.csv" => Some(spinflow::eventlog::DISCREPANCY_CSV_HEADER),
            _ => None,
        };
        if let Some(h) = header {
            if first_line(&path).as_deref() != Some(h) {
                report.problems.push(format!("{name}: header is not `{h}`"));
            }
        }
    }

    let mut run_dirs: BTreeMap<&str, usize> = BTreeMap::new();
    for name in manifest.files.keys() {
        if let Some((run, _)) = name.rsplit_once('/') {
            *run_dirs.entry(run).or_default() += 1;
        }
    }
    for run in run_dirs.keys() {
        let base = dir.join(run);
        let loaded = load_event_log(&base.join("m.bin")).and_then(|m| {
            let m_hat = load_event_log(&base.join("m_hat.bin"))?;
            let file = std::fs::File::open(base.join("discrepancies.csv"))?;
            Ok((m, m_hat, read_discrepancy_times(file)?))
        });
        match loaded {
            Ok((m, m_hat, times)) => {
                if let Err(v) = check_coupling_inequality(&m, &m_hat, &times) {
                    report.problems.push(format!("{run}: {v}"));
                }
            }
            Err(e) => report.problems.push(format!("{run}: {e}")),
        }
        report.runs_checked += 1;
    }
    Ok(report)
}
