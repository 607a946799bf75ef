//! CSV tables: the per-plan result table plus per-cell curve and archive files.

use std::path::{Path, PathBuf};

use cco_core::moppo::{ArchiveEntry, EpisodeRecord};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::HarnessError;

pub const RESULTS_FILE: &str = "results.csv";

/// One (axis value, strategy, seed) outcome. File paths are relative to the
/// table's directory; a failed cell has NaN metrics, no files and an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub axis: String,
    pub axis_value: f64,
    pub strategy: String,
    pub seed: u64,
    pub final_coverage: f64,
    pub final_capacity: f64,
    pub curve_file: String,
    pub archive_file: String,
    pub config_hash: String,
    pub error: String,
}

impl ResultRow {
    pub fn ok(&self) -> bool {
        self.error.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    /// Directory the relative file paths resolve against.
    pub root: PathBuf,
}

impl ResultTable {
    pub fn path(&self) -> PathBuf {
        self.root.join(RESULTS_FILE)
    }

    pub fn write(&self) -> Result<PathBuf, HarnessError> {
        let p = self.path();
        write_csv(&p, &self.rows)?;
        Ok(p)
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let rows = read_csv(path)?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { rows, root })
    }

    pub fn failures(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| !r.ok())
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn curves(&self, row: &ResultRow) -> Result<Vec<EpisodeRecord>, HarnessError> {
        read_csv(&self.resolve(&row.curve_file))
    }

    pub fn archive(&self, row: &ResultRow) -> Result<Vec<ArchiveEntry>, HarnessError> {
        read_csv(&self.resolve(&row.archive_file))
    }

    /// Successful rows matching a strategy label and axis value.
    pub fn select<'a>(&'a self, strategy: &'a str, axis_value: f64) -> impl Iterator<Item = &'a ResultRow> {
        self.rows
            .iter()
            .filter(move |r| r.ok() && r.strategy == strategy && r.axis_value == axis_value)
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::csv(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    r.deserialize().collect::<Result<_, _>>().map_err(|e| HarnessError::csv(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: f64, err: &str) -> ResultRow {
        ResultRow {
            axis: "n_ris".into(),
            axis_value: v,
            strategy: "avus".into(),
            seed: 1,
            final_coverage: 0.5,
            final_capacity: if err.is_empty() { 2.25 } else { f64::NAN },
            curve_file: String::new(),
            archive_file: String::new(),
            config_hash: "ab".into(),
            error: err.into(),
        }
    }

    #[test]
    fn round_trip_keeps_nan_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let t = ResultTable { rows: vec![row(1.0, ""), row(2.0, "diverged, at 3")], root: dir.path().into() };
        let p = t.write().unwrap();
        let back = ResultTable::read(&p).unwrap();
        assert_eq!(back.rows.len(), 2);
        assert_eq!(back.rows[0], t.rows[0]);
        assert!(back.rows[1].final_capacity.is_nan());
        assert_eq!(back.failures().count(), 1);
        assert_eq!(back.select("avus", 1.0).count(), 1);
        assert_eq!(back.select("avus", 2.0).count(), 0);
    }

    #[test]
    fn empty_table_writes_no_header() {
        let dir = tempfile::tempdir().unwrap();
        let t = ResultTable { rows: vec![], root: dir.path().into() };
        let back = ResultTable::read(&t.write().unwrap()).unwrap();
        assert!(back.rows.is_empty());
    }
}
