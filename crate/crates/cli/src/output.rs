//! CSV artifacts. Each file starts with a `#` comment block (tool version,
//! config hash, grid spacing, seed) followed by one header row.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

pub const CAPACITY_COLUMNS: [&str; 7] = ["scenario", "s", "r", "capacity_num", "capacity_den", "delta", "partial_sum"];
pub const CHECKS_COLUMNS: [&str; 7] = ["check", "scenario", "parameters", "lhs", "rhs", "ratio", "pass"];
pub const TRACE_COLUMNS: [&str; 7] = ["scenario", "mode", "rho", "osc", "wiener_integral", "datum_osc", "rhs"];
pub const SNAPSHOT_COLUMNS: [&str; 4] = ["x1", "x2", "t", "u"];

/// First column of the row appended when a stage aborts.
pub const FAILED: &str = "FAILED";

/// Values recorded in every header block.
#[derive(Debug, Clone)]
pub struct RunMeta {
    pub version: &'static str,
    pub config_hash: String,
    pub h: f64,
    pub seed: u64,
}

impl RunMeta {
    pub fn comment_lines(&self) -> Vec<String> {
        vec![
            format!("# wienerlab {}", self.version),
            format!("# config_sha256: {}", self.config_hash),
            format!("# h: {}", self.h),
            format!("# seed: {}", self.seed),
        ]
    }
}

pub struct Table {
    inner: csv::Writer<BufWriter<File>>,
    width: usize,
}

impl Table {
    pub fn create(path: &Path, meta: &RunMeta, columns: &[&str]) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        for line in meta.comment_lines() {
            writeln!(out, "{line}")?;
        }
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(columns)?;
        Ok(Self { inner, width: columns.len() })
    }

    pub fn row(&mut self, fields: &[String]) -> io::Result<()> {
        debug_assert_eq!(fields.len(), self.width);
        self.inner.write_record(fields)?;
        Ok(())
    }

    /// `FAILED,<stage>: <message>,,...` padded to the schema width.
    pub fn failed(&mut self, stage: &str, message: &str) -> io::Result<()> {
        let mut fields = vec![FAILED.to_string(), format!("{stage}: {message}")];
        fields.resize(self.width, String::new());
        self.row(&fields)
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Shortest round-trip form; exponent notation outside [1e-4, 1e7).
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e7).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}
