//! Run artifacts and their on-disk form: CSV tables with 17 significant
//! digits, a JSON summary and a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::experiments::config::ExperimentConfig;

/// One pass/fail assertion with the numbers behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, value, threshold, detail: detail.into() }
    }

    /// Passes when `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self::new(name, value <= threshold, value, threshold, detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunArtifacts {
    pub experiment: String,
    pub summary: Value,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub tables: Vec<Table>,
    /// Scheme, grid and tolerance details for the manifest.
    pub scheme: Value,
}

impl RunArtifacts {
    pub fn new(experiment: &str) -> Self {
        Self { experiment: experiment.into(), summary: json!({}), scheme: json!({}), ..Self::default() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// `{:.16e}` keeps 17 significant digits, enough to round-trip an f64.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv(path: &Path, table: &Table) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(&table.columns).map_err(io)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| format_number(*v))).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes `<name>.csv` per table, `summary.json` (when the run produced
/// anything) and `manifest.json`. Output is a pure function of the inputs.
pub fn emit_results(run: &RunArtifacts, config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let mut written = Vec::new();
    for t in &run.tables {
        let path = out_dir.join(format!("{}.csv", t.name));
        write_csv(&path, t)?;
        written.push(path);
    }
    let empty = run.tables.is_empty() && run.checks.is_empty() && run.summary.as_object().is_none_or(|m| m.is_empty());
    if !empty {
        let path = out_dir.join("summary.json");
        write_json(
            &path,
            &json!({
                "experiment": run.experiment,
                "passed": run.passed(),
                "checks": run.checks,
                "results": run.summary,
            }),
        )?;
        written.push(path);
    }
    let files: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let manifest = out_dir.join("manifest.json");
    write_json(
        &manifest,
        &json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "experiment": run.experiment,
            "config": config,
            "scheme": run.scheme,
            "files": files,
        }),
    )?;
    written.push(manifest);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_run_writes_only_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_results(&RunArtifacts::new("noop"), &ExperimentConfig::default(), dir.path()).unwrap();
        assert_eq!(files.len(), 1);
        assert!(files[0].ends_with("manifest.json"));
    }

    #[test]
    fn csv_has_header_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = RunArtifacts::new("t");
        let mut t = Table::new("series", &["t", "L2"]);
        t.push(vec![0.1, 1.0 / 3.0]);
        run.tables.push(t);
        emit_results(&run, &ExperimentConfig::default(), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("series.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,L2"));
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row, vec![0.1, 1.0 / 3.0]);
    }

    #[test]
    fn unwritable_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = emit_results(&RunArtifacts::new("t"), &ExperimentConfig::default(), &blocker.join("sub"));
        assert!(matches!(err, Err(Error::Io(_))));
    }
}
