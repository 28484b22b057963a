//! Minimal CSV reading for the fixed numeric schemas this tool emits.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// A parsed CSV with a header row and f64 cells.
pub struct NumericCsv {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericCsv {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = match lines.next() {
            Some(h) => h,
            None => bail!("{} is empty", path.display()),
        };
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut row = Vec::with_capacity(columns.len());
            for cell in line.split(',') {
                let v: f64 = cell.trim().parse().with_context(|| {
                    format!("{}: row {} has a non-numeric cell '{cell}'", path.display(), i + 2)
                })?;
                row.push(v);
            }
            if row.len() != columns.len() {
                bail!(
                    "{}: row {} has {} cells, header has {}",
                    path.display(),
                    i + 2,
                    row.len(),
                    columns.len()
                );
            }
            rows.push(row);
        }
        if rows.is_empty() {
            bail!("{} has a header but no data rows", path.display());
        }
        Ok(Self { columns, rows })
    }

    pub fn column_index(&self) -> HashMap<&str, usize> {
        self.columns
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect()
    }

    /// Extracts one column by name.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .with_context(|| format!("missing column '{name}'"))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Requires every named column to exist, reporting all that are missing.
    pub fn require_columns(&self, names: &[&str]) -> Result<()> {
        let missing: Vec<&str> = names
            .iter()
            .copied()
            .filter(|n| !self.columns.iter().any(|c| c == n))
            .collect();
        if !missing.is_empty() {
            bail!("missing columns: {}", missing.join(", "));
        }
        Ok(())
    }
}
