//! Report plumbing: JSON documents tagged with the identity they test and a
//! hash of the originating configuration, plus full-precision CSV tables.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Metadata embedded in every report: which identity or check the payload
/// exercises, and a stable hash of the configuration text that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct ReportMeta {
    pub identity: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<T: Serialize> {
    pub meta: ReportMeta,
    pub data: T,
}

/// FNV-1a over the canonical config text; hex-encoded.
pub fn config_hash(config_text: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in config_text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

pub fn report<T: Serialize>(identity: &str, config_text: &str, data: T) -> Report<T> {
    Report {
        meta: ReportMeta { identity: identity.to_string(), config_hash: config_hash(config_text) },
        data,
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::InvalidArgument(format!("io error: {e}"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("serialization error: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err)
}

/// One value formatted with 17 significant digits, '.' decimal separator.
pub fn format_full(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err)?;
    writeln!(f, "{}", header.join(",")).map_err(io_err)?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| format_full(v)).collect();
        writeln!(f, "{}", line.join(",")).map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash("s = 1\nn = 64\n");
        let b = config_hash("s = 1\nn = 64\n");
        let c = config_hash("s = 1\nn = 65\n");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 16);
    }

    #[test]
    fn full_precision_round_trips() {
        for v in [std::f64::consts::PI, 1.0 / 3.0, 6.02e23, -1.25e-13] {
            let s = format_full(v);
            assert!(s.contains('.'));
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_and_json_files() {
        let dir = std::env::temp_dir().join("grushin-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let csv = dir.join("t.csv");
        write_csv(&csv, &["a", "b"], &[vec![1.0, 2.0], vec![0.1, 0.2]]).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("a,b\n"));
        assert_eq!(text.lines().count(), 3);

        let json = dir.join("t.json");
        let rep = report("scaling-law", "t = 2", vec![1.0, 2.0]);
        write_json(&json, &rep).unwrap();
        let text = std::fs::read_to_string(&json).unwrap();
        assert!(text.contains("scaling-law"));
        assert!(text.contains("config_hash"));
    }
}
