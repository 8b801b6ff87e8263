use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::modelfile::ModelMeta;
use crate::error::Result;
use crate::simulate::SeedSpec;

/// One acceptance check carried by a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

/// JSON report: `{command, model, config_hash, seed, results, summary, checks}`.
///
/// Wall-clock time is kept out of the report so reruns are byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct Report<R, S> {
    pub command: String,
    pub model: ModelMeta,
    pub config_hash: String,
    pub seed: SeedSpec,
    pub results: Vec<R>,
    pub summary: S,
    pub checks: Vec<Check>,
}

impl<R: Serialize, S: Serialize> Report<R, S> {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `<dir>/<command>.json`, creating `dir` if needed.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.json", self.command));
        fs::write(&path, self.to_json())?;
        Ok(path)
    }
}

/// A point of a curve sidecar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub t: f64,
    pub value: f64,
    pub stderr: Option<f64>,
}

/// Writes a `t,value,stderr` CSV; unknown standard errors are left empty.
pub fn write_series(path: &Path, points: &[SeriesPoint]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["t", "value", "stderr"]).map_err(csv_err)?;
    for p in points {
        let se = p.stderr.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([p.t.to_string(), p.value.to_string(), se]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let dir = std::env::temp_dir().join(format!("mapllt-csv-{}", std::process::id()));
        let path = dir.join("s.csv");
        write_series(
            &path,
            &[SeriesPoint { t: 25.0, value: 0.5, stderr: Some(0.01) }, SeriesPoint { t: 100.0, value: 0.25, stderr: None }],
        )
        .unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "t,value,stderr\n25,0.5,0.01\n100,0.25,\n");
        fs::remove_dir_all(dir).unwrap();
    }
}
