use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, Result};

/// Column-major numeric table written with 17 significant digits.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(t: &[f64]) -> Self {
        Self { headers: vec!["t".into()], columns: vec![t.to_vec()] }
    }

    pub fn push(&mut self, header: &str, column: Vec<f64>) {
        debug_assert_eq!(column.len(), self.columns[0].len());
        self.headers.push(header.into());
        self.columns.push(column);
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.headers)?;
        for i in 0..self.rows() {
            w.write_record(self.columns.iter().map(|c| format!("{:.16e}", c[i])))?;
        }
        w.flush().map_err(|source| CliError::Write { path: path.to_owned(), source })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| CliError::Write { path: path.to_owned(), source })
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Write { path: path.to_owned(), source })
}
