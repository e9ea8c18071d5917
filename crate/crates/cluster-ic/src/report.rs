//! Reproducible output artifacts: stamped CSV tables and JSON summaries.
//!
//! Every table row carries a `(version, seed, config_hash)` stamp so a file
//! can always be traced back to the build and configuration that produced
//! it.  Real numbers are printed with 12 significant digits in scientific
//! notation — small probabilities are never rounded to 0 or 1 — and rows
//! are written in a deterministic order, so identical configuration and
//! seed produce byte-identical files.

use std::io::Write;
use std::path::Path;

use crate::error::Error;

/// Crate version baked into every output row.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Format a real with 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x}")
    }
}

/// Provenance columns appended to every row.
#[derive(Clone, Debug)]
pub struct RowStamp {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl RowStamp {
    pub fn new(seed: u64, config_hash: &str) -> Self {
        Self {
            version: VERSION.into(),
            seed,
            config_hash: config_hash.into(),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// A stamped CSV table built in memory and written in one deterministic
/// pass.
#[derive(Clone, Debug)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    stamp: RowStamp,
}

impl CsvTable {
    pub fn new(columns: &[&str], stamp: RowStamp) -> Self {
        Self {
            header: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            stamp,
        }
    }

    /// Append one row; the stamp columns are added automatically.
    pub fn push(&mut self, cells: Vec<String>) -> Result<(), Error> {
        if cells.len() != self.header.len() {
            return Err(Error::SizeMismatch(self.header.len(), cells.len()));
        }
        self.rows.push(cells);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Render the full file, header line first.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push_str(",version,seed,config_hash\n");
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push_str(&format!(
                ",{},{},{}\n",
                self.stamp.version, self.stamp.seed, self.stamp.config_hash
            ));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
        f.write_all(self.render().as_bytes())
            .map_err(|e| io_err(path, e))
    }
}

/// Write a JSON summary with sorted object keys (`serde_json` preserves
/// `Value` map order as insertion order; we sort for determinism).
pub fn write_summary(path: &Path, value: &serde_json::Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(&sorted(value)).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn sorted(value: &serde_json::Value) -> serde_json::Value {
    match value {
        serde_json::Value::Object(map) => {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by_key(|(k, _)| (*k).clone());
            serde_json::Value::Object(
                entries
                    .into_iter()
                    .map(|(k, v)| (k.clone(), sorted(v)))
                    .collect(),
            )
        }
        serde_json::Value::Array(items) => {
            serde_json::Value::Array(items.iter().map(sorted).collect())
        }
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_12_significant_digits() {
        assert_eq!(fmt_sig(1.0), "1.00000000000e0");
        assert_eq!(fmt_sig(0.5), "5.00000000000e-1");
        // small probabilities keep their magnitude
        assert_eq!(fmt_sig(3.25e-9), "3.25000000000e-9");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
    }

    #[test]
    fn tables_are_stamped_and_deterministic() {
        let mut t = CsvTable::new(&["p", "value"], RowStamp::new(7, "abcd"));
        t.push(vec![fmt_sig(0.1), fmt_sig(0.25)]).unwrap();
        t.push(vec![fmt_sig(0.2), fmt_sig(0.5)]).unwrap();
        let text = t.render();
        assert!(text.starts_with("p,value,version,seed,config_hash\n"));
        assert_eq!(text.matches(",7,abcd\n").count(), 2);
        assert_eq!(t.render(), text);
        assert!(matches!(
            t.push(vec!["only-one".into()]),
            Err(Error::SizeMismatch(2, 1))
        ));
    }

    #[test]
    fn summaries_sort_keys() {
        let v = serde_json::json!({"b": 1, "a": {"d": 2, "c": [3]}});
        let s = serde_json::to_string(&sorted(&v)).unwrap();
        assert_eq!(s, r#"{"a":{"c":[3],"d":2},"b":1}"#);
    }
}
