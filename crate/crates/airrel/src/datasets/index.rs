//! Repository layout: a root with `DataList.csv` and one subdirectory per
//! dataset holding `DataDescription.txt` and the data files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::table::{parse_csv, Column, ColumnMap};
use super::{detect_schema, read_text, AccuracyScale, DataError, Schema, ValidateOptions};

pub const DATA_ROOT_ENV: &str = "AIRREL_DATA_ROOT";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub path: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub entries: Vec<DatasetEntry>,
}

const INDEX_COLUMNS: &[Column] = &[
    Column::req("name", "Name", &["dataset"]),
    Column::req("path", "Path", &["directory", "folder"]),
    Column::req("description", "Description", &[]),
];

#[derive(Debug, Clone)]
pub struct DataRoot {
    pub root: PathBuf,
    pub index: DatasetIndex,
}

impl DataRoot {
    /// Reads `DataList.csv` under `root`; entry names must be unique and
    /// every path must be an existing subdirectory.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, DataError> {
        let root = root.into();
        let table = parse_csv(&read_text(&root.join("DataList.csv"))?)?;
        let map = ColumnMap::resolve(&table.headers, INDEX_COLUMNS, &[])?;
        let cell = |row: &[String], key: &str| map.position(key).and_then(|i| row.get(i)).cloned().unwrap_or_default();
        let mut names = BTreeSet::new();
        let mut entries = Vec::new();
        for row in &table.rows {
            let e = DatasetEntry { name: cell(row, "name"), path: cell(row, "path"), description: cell(row, "description") };
            if !names.insert(e.name.clone()) {
                return Err(DataError::Mismatch(format!("duplicate dataset name {:?} in DataList.csv", e.name)));
            }
            if !root.join(&e.path).is_dir() {
                return Err(DataError::Mismatch(format!("dataset {:?}: {:?} is not a directory", e.name, e.path)));
            }
            entries.push(e);
        }
        Ok(Self { root, index: DatasetIndex { entries } })
    }

    /// The `--data-root` flag if given, else the environment variable.
    pub fn locate(flag: Option<&Path>) -> Option<PathBuf> {
        flag.map(Path::to_path_buf).or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from))
    }

    pub fn dataset_dir(&self, name: &str) -> Result<PathBuf, DataError> {
        self.index
            .entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| self.root.join(&e.path))
            .ok_or_else(|| DataError::Mismatch(format!("no dataset named {name:?} in {}", self.root.display())))
    }
}

/// Validation options declared in a dataset's `DataDescription.txt`, e.g.
/// a line `accuracy-scale: percent`.
pub fn declared_options(dir: &Path) -> ValidateOptions {
    let mut o = ValidateOptions::default();
    if let Ok(text) = std::fs::read_to_string(dir.join("DataDescription.txt")) {
        for line in text.lines() {
            if let Some((k, v)) = line.split_once(':') {
                if super::normalize_header(k) == "accuracyscale" {
                    o.accuracy_scale = v.trim().parse::<AccuracyScale>().ok();
                }
            }
        }
    }
    o
}

/// CSV files in `dir` (sorted by name) with their detected schema.
pub fn scan_dir(dir: &Path) -> Result<Vec<(PathBuf, Schema)>, DataError> {
    let rd = std::fs::read_dir(dir).map_err(|source| DataError::Io { path: dir.display().to_string(), source })?;
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let table = parse_csv(&read_text(&f)?)?;
        if let Some(s) = detect_schema(&table.headers) {
            out.push((f, s));
        }
    }
    Ok(out)
}
