//! Stamped CSV output.
//!
//! Every file starts with `# config_hash=<sha256> seed=<seed>` followed by
//! optional `key=value` pairs, then a header row. Floats use Rust's
//! shortest round-trip formatting.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    format!("{:x}", Sha256::digest(cfg.canonical().as_bytes()))
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone)]
pub struct Stamp {
    pub hash: String,
    pub seed: u64,
    pub extra: Vec<(&'static str, String)>,
}

impl Stamp {
    pub fn new(hash: &str, seed: u64) -> Self {
        Self { hash: hash.to_string(), seed, extra: Vec::new() }
    }

    pub fn with(mut self, key: &'static str, value: impl ToString) -> Self {
        self.extra.push((key, value.to_string()));
        self
    }

    pub fn line(&self) -> String {
        let mut s = format!("# config_hash={} seed={}", self.hash, self.seed);
        for (k, v) in &self.extra {
            s.push_str(&format!(" {k}={v}"));
        }
        s.push('\n');
        s
    }
}

/// `key=value` pairs of a stamp line.
pub fn parse_stamp(line: &str) -> Option<BTreeMap<String, String>> {
    let body = line.strip_prefix('#')?;
    Some(
        body.split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    )
}

/// In-memory CSV table, written out in one go once complete.
pub struct CsvTable {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvTable {
    pub fn new(stamp: &Stamp, header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(stamp.line().into_bytes());
        writer.write_record(header).expect("writing to memory");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("writing to memory");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("flushing to memory")
    }
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), source }
}

/// Fails early when the directory that would hold `path` is missing or
/// read-only.
pub fn ensure_writable(path: &Path) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let meta = fs::metadata(dir).map_err(|e| io_error(path, e))?;
    if !meta.is_dir() {
        return Err(io_error(path, std::io::Error::new(std::io::ErrorKind::NotADirectory, "parent is not a directory")));
    }
    if meta.permissions().readonly() {
        return Err(io_error(path, std::io::Error::new(std::io::ErrorKind::PermissionDenied, "directory is read-only")));
    }
    Ok(())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stamped_table_quotes_partitions() {
        let stamp = Stamp::new("ab", 7).with("horizon", 1.5);
        let mut t = CsvTable::new(&stamp, &["rep", "t", "partition"]);
        t.row(["0", &fmt_f64(0.1), "1,2|3"]);
        let text = String::from_utf8(t.into_bytes()).unwrap();
        assert_eq!(text, "# config_hash=ab seed=7 horizon=1.5\nrep,t,partition\n0,0.1,\"1,2|3\"\n");
        let stamp = parse_stamp(text.lines().next().unwrap()).unwrap();
        assert_eq!(stamp["seed"], "7");
        assert_eq!(stamp["horizon"], "1.5");
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 12345.678] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
