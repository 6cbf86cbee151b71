use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Stage;
use crate::error::{Error, Result};
use crate::losses::{LossReport, LossTerm};

/// One line of `train_log.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub stage: Stage,
    pub step: u64,
    pub terms: Vec<LossTerm>,
    pub total: f64,
    /// Seconds since the run started.
    pub wall_time: f64,
    /// True when the optimizer rejected a non-finite gradient.
    #[serde(default)]
    pub skipped: bool,
}

impl StepRecord {
    pub fn new(stage: Stage, step: u64, report: &LossReport, wall_time: f64, skipped: bool) -> Self {
        StepRecord {
            stage,
            step,
            terms: report.terms.clone(),
            total: report.total,
            wall_time,
            skipped,
        }
    }

    pub fn weighted_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.weight * t.value).sum()
    }
}

/// Appends step records as JSON lines; a log without a path only keeps
/// them in memory.
#[derive(Debug, Default)]
pub struct TrainLog {
    file: Option<(PathBuf, File)>,
    pub records: Vec<StepRecord>,
}

impl TrainLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn append_to(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(TrainLog {
            file: Some((path.to_path_buf(), file)),
            records: Vec::new(),
        })
    }

    pub fn push(&mut self, record: StepRecord) -> Result<()> {
        if let Some((path, file)) = &mut self.file {
            let line = serde_json::to_string(&record).expect("record serializes");
            writeln!(file, "{line}").map_err(|e| Error::io(path.as_path(), e))?;
        }
        log::debug!("step {} total {:.6}", record.step, record.total);
        self.records.push(record);
        Ok(())
    }
}

/// Reads every record of a `train_log.jsonl`.
pub fn read_train_log(path: &Path) -> Result<Vec<StepRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut offset = 0;
    let mut out = Vec::new();
    for line in text.split_inclusive('\n') {
        if !line.trim().is_empty() {
            let r = serde_json::from_str(line).map_err(|e| Error::parse(path, offset, e.to_string()))?;
            out.push(r);
        }
        offset += line.len();
    }
    Ok(out)
}
