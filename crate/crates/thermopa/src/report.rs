//! CSV tables with `#` metadata lines, and run manifests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::units;

/// A CSV table: `# key = value` lines, one header row, data rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k} = {v}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Numeric values of column `name` (NaN where unparsable).
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| r[i].parse().unwrap_or(f64::NAN))
                .collect(),
        )
    }
}

/// Round-trippable float formatting used in every table.
pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

/// Lower-case hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Provenance written next to every run's outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub deterministic: bool,
    pub method: String,
    pub filter: String,
    pub n_realizations: usize,
    pub j_values: Vec<u32>,
    pub outputs: Vec<PathBuf>,
    pub extra: Vec<(String, String)>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = String::from("# thermopa run manifest\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("command", self.command.clone());
        kv("version", env!("CARGO_PKG_VERSION").to_string());
        kv("constants_revision", units::CONSTANTS_REVISION.to_string());
        kv("config_sha256", self.config_sha256.clone());
        kv("seed", self.seed.to_string());
        kv("deterministic", self.deterministic.to_string());
        kv("method", self.method.clone());
        kv("filter", self.filter.clone());
        kv("n_realizations", self.n_realizations.to_string());
        kv(
            "j_values",
            self.j_values
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        kv(
            "outputs",
            self.outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        for (k, v) in &self.extra {
            kv(k, v.clone());
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(&["a", "b"]).meta("seed", 3);
        t.push(vec!["1".into(), num(0.25)]);
        let csv = t.to_csv();
        assert!(csv.starts_with("# seed = 3\na,b\n1,"));
        assert_eq!(t.column("b").unwrap(), vec![0.25]);
    }
}
