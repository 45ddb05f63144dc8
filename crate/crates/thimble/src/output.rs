//! Result files: RFC-4180 CSV with shortest round-trip floats, JSON, and
//! the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, Resolved, RunConfig};
use crate::RunError;

/// Shortest decimal text that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Git-style object hash: SHA-256 over `blob <len>\0` followed by the
/// content.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex(&h.finalize())
}

/// Writes the files of one run and remembers their hashes for the
/// manifest.
pub struct Emitter {
    dir: PathBuf,
    formats: Vec<Format>,
    written: Vec<(String, String)>,
}

impl Emitter {
    pub fn new(dir: &Path, formats: &[Format]) -> Result<Self, RunError> {
        fs::create_dir_all(dir)?;
        Ok(Emitter {
            dir: dir.to_path_buf(),
            formats: formats.to_vec(),
            written: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), RunError> {
        fs::write(self.dir.join(name), &bytes)?;
        self.written.push((name.to_string(), blob_hash(&bytes)));
        Ok(())
    }

    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), RunError> {
        if !self.formats.contains(&Format::Csv) {
            return Ok(());
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        let io = |e: csv::Error| RunError::Io(std::io::Error::other(e));
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| RunError::Io(std::io::Error::other(e.to_string())))?;
        self.put(name, bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        if !self.formats.contains(&Format::Json) {
            return Ok(());
        }
        let mut bytes =
            serde_json::to_vec_pretty(value).map_err(|e| RunError::Io(std::io::Error::other(e)))?;
        bytes.push(b'\n');
        self.put(name, bytes)
    }

    /// `manifest.json`: config echo, resolved units, input hash and the
    /// hashes of every data file. Contains no clock reading.
    pub fn manifest(
        &mut self,
        subcommand: &str,
        cfg: &RunConfig,
        resolved: &Resolved,
        tolerances: Value,
        failures: &[String],
    ) -> Result<(), RunError> {
        let outputs: Vec<Value> = self
            .written
            .iter()
            .map(|(f, h)| json!({ "file": f, "hash": h }))
            .collect();
        let m = json!({
            "program": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": subcommand,
            "config": cfg,
            "resolved": resolved,
            "tolerances": tolerances,
            "input_hash": blob_hash(cfg.canonical().as_bytes()),
            "outputs": outputs,
            "failures": failures,
        });
        let mut bytes =
            serde_json::to_vec_pretty(&m).map_err(|e| RunError::Io(std::io::Error::other(e)))?;
        bytes.push(b'\n');
        fs::write(self.dir.join("manifest.json"), bytes)?;
        Ok(())
    }
}

/// Re-reads the configuration echoed in a manifest.
pub fn config_from_manifest(path: &Path) -> Result<RunConfig, RunError> {
    let text = fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| RunError::Config(e.to_string()))?;
    serde_json::from_value(v["config"].clone()).map_err(|e| RunError::Config(e.to_string()))
}
