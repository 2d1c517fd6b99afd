//! File access with provenance tracking, manifests and fixed-precision
//! float output.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{path}: {source}")]
pub struct IoError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

/// Command-line values that parse but make no sense together.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), fmt_f64)
}

/// Compact JSON writer that prints every float with 17 significant digits.
/// Non-finite floats become `null`.
struct Precise;

impl serde_json::ser::Formatter for Precise {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            w.write_all(format!("{value:.16e}").as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Precise);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
struct FileRecord {
    path: PathBuf,
    sha256: String,
    bytes: usize,
}

/// One command invocation: every file read or written is hashed into the
/// manifest.
pub struct Run {
    command: String,
    config: Value,
    inputs: Vec<FileRecord>,
    outputs: Vec<FileRecord>,
    summary: Value,
}

impl Run {
    pub fn new(command: &str, global: &impl Serialize, args: &impl Serialize) -> anyhow::Result<Self> {
        Ok(Self {
            command: command.to_string(),
            config: serde_json::json!({ "global": global, "args": args }),
            inputs: Vec::new(),
            outputs: Vec::new(),
            summary: Value::Null,
        })
    }

    pub fn read(&mut self, path: &Path) -> anyhow::Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|source| IoError { path: path.to_path_buf(), source })?;
        self.inputs.push(FileRecord { path: path.to_path_buf(), sha256: sha256(&bytes), bytes: bytes.len() });
        Ok(bytes)
    }

    pub fn read_string(&mut self, path: &Path) -> anyhow::Result<String> {
        let bytes = self.read(path)?;
        String::from_utf8(bytes).map_err(|e| anyhow::anyhow!("{}: not UTF-8: {e}", path.display()))
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|source| IoError { path: dir.to_path_buf(), source })?;
        }
        fs::write(path, bytes).map_err(|source| IoError { path: path.to_path_buf(), source })?;
        self.outputs.push(FileRecord { path: path.to_path_buf(), sha256: sha256(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn summarize(&mut self, summary: Value) {
        self.summary = summary;
    }

    /// Writes `<primary output>.manifest.json`, or the explicit path.
    pub fn finish(self, explicit: Option<&Path>) -> anyhow::Result<PathBuf> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => {
                let first = self.outputs.first().ok_or_else(|| anyhow::anyhow!("command wrote no output"))?;
                let mut name = first.path.clone().into_os_string();
                name.push(".manifest.json");
                PathBuf::from(name)
            }
        };
        let manifest = json!({
            "tool": "bindkit",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "summary": self.summary,
        });
        let bytes = to_json(&manifest)?;
        fs::write(&path, bytes).map_err(|source| IoError { path: path.clone(), source })?;
        Ok(path)
    }
}
