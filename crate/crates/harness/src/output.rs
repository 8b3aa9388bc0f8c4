//! CSV tables, run manifest and failure marker.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::RunError;

pub const MANIFEST: &str = "manifest.txt";
pub const PARTIAL_MARKER: &str = "PARTIAL_RUN";

/// Numeric table; `None` cells are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: Vec<String>) -> Self {
        Self {
            name: name.into(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn with_columns(name: impl Into<String>, header: &[&str]) -> Self {
        Self::new(name, header.iter().map(|s| s.to_string()).collect())
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.header.len(), "{}", self.name);
        self.rows.push(row);
    }

    pub fn push_values(&mut self, row: &[f64]) {
        self.push(row.iter().copied().map(Some).collect());
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// CSV text; fails on the first non-finite cell.
    pub fn render(&self) -> Result<String, RunError> {
        let mut out = self.header.join(",");
        out.push('\n');
        for (r, row) in self.rows.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                if let Some(v) = cell {
                    if !v.is_finite() {
                        return Err(RunError::Divergence(format!(
                            "non-finite value {v} in {} row {} column '{}'",
                            self.name, r, self.header[c]
                        )));
                    }
                    write!(out, "{v}").expect("writing to a String");
                }
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// Collects a run's tables, writing each to disk as soon as it is emitted.
#[derive(Debug, Default)]
pub struct Sink {
    dir: Option<PathBuf>,
    tables: Vec<Table>,
    checksums: Vec<(String, String)>,
    notes: Vec<(String, String)>,
}

impl Sink {
    /// In-memory only.
    pub fn memory() -> Self {
        Self::default()
    }

    /// Writes into `dir`, creating it and clearing a stale failure marker.
    pub fn to_dir(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|e| RunError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        let marker = dir.join(PARTIAL_MARKER);
        if marker.exists() {
            fs::remove_file(&marker)
                .map_err(|e| RunError::Runtime(format!("cannot remove {}: {e}", marker.display())))?;
        }
        Ok(Self {
            dir: Some(dir.to_path_buf()),
            ..Self::default()
        })
    }

    pub fn emit(&mut self, table: Table) -> Result<(), RunError> {
        let text = table.render()?;
        if let Some(dir) = &self.dir {
            let path = dir.join(&table.name);
            fs::write(&path, &text).map_err(|e| RunError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        }
        self.checksums
            .push((table.name.clone(), hex::encode(Sha256::digest(text.as_bytes()))));
        self.tables.push(table);
        Ok(())
    }

    /// Free-form key recorded in the manifest.
    pub fn note(&mut self, key: impl Into<String>, value: impl ToString) {
        self.notes.push((key.into(), value.to_string()));
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn notes(&self) -> &[(String, String)] {
        &self.notes
    }

    pub fn note_value(&self, key: &str) -> Option<&str> {
        self.notes.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// `(file name, sha256 hex)` in emission order.
    pub fn checksums(&self) -> &[(String, String)] {
        &self.checksums
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Manifest text: config echo, version, duration, notes, checksums.
    pub fn manifest(&self, config: &[(&'static str, String)], seconds: f64) -> String {
        let mut m = String::from("# run manifest\n");
        writeln!(m, "library_version = {}", env!("CARGO_PKG_VERSION")).expect("String write");
        writeln!(m, "duration_seconds = {seconds:.3}").expect("String write");
        for (k, v) in config {
            writeln!(m, "config.{k} = {v}").expect("String write");
        }
        for (k, v) in &self.notes {
            writeln!(m, "note.{k} = {v}").expect("String write");
        }
        for (name, sum) in &self.checksums {
            writeln!(m, "sha256.{name} = {sum}").expect("String write");
        }
        m
    }

    pub fn write_manifest(&self, config: &[(&'static str, String)], seconds: f64) -> Result<(), RunError> {
        if let Some(dir) = &self.dir {
            let path = dir.join(MANIFEST);
            fs::write(&path, self.manifest(config, seconds))
                .map_err(|e| RunError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        }
        Ok(())
    }

    pub fn write_partial_marker(&self, error: &RunError) {
        if let Some(dir) = &self.dir {
            // Best effort: the run is already failing.
            let _ = fs::write(dir.join(PARTIAL_MARKER), format!("{error}\n"));
        }
    }
}
