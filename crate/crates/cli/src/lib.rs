//! Commands behind the `ainv` binary. Every command writes into one output
//! directory: its artifacts, a `config.json` snapshot with all defaults
//! filled in, and a `manifest.json` listing each file with its size and
//! FNV-1a checksum.

pub mod commands;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use ainv_core::adapt::checksum_params;
use ainv_core::analysis::experiment::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config { path: String, message: String },
    Usage(String),
    Core(ainv_core::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_line(&self) -> String {
        let mut v = serde_json::json!({ "status": "error", "kind": self.kind(), "message": self.to_string() });
        if let CliError::Config { path, .. } = self {
            v["field"] = serde_json::Value::String(path.clone());
        }
        v.to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { path, message } => write!(f, "config field `{path}`: {message}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ainv_core::Error> for CliError {
    fn from(e: ainv_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Parses a run configuration; errors name the offending field.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    cfg.validate().map_err(|e| CliError::Config { path: ".".into(), message: e.to_string() })?;
    Ok(cfg)
}

/// Reads `path` if given, else the defaults; `seed` overrides the file.
pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => parse_config(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg.materialized()?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub bytes: u64,
    pub fnv1a64: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub args: Vec<String>,
    pub files: Vec<ManifestEntry>,
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Output directory that records what it writes.
pub struct RunDir {
    root: PathBuf,
    files: Vec<ManifestEntry>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let bytes = bytes.as_ref();
        fs::write(self.path(name), bytes)?;
        self.files.push(ManifestEntry {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            fnv1a64: format!("{:016x}", fnv1a64(bytes)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, serde_json::to_string_pretty(value)? + "\n")
    }

    /// Registers a file that something else already wrote into the directory.
    pub fn record(&mut self, name: &str) -> Result<()> {
        let bytes = fs::read(self.path(name))?;
        self.files.push(ManifestEntry {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            fnv1a64: format!("{:016x}", fnv1a64(&bytes)),
        });
        Ok(())
    }

    /// Writes the config snapshot and the manifest.
    pub fn finish(mut self, command: &str, args: Vec<String>, cfg: Option<&RunConfig>) -> Result<Manifest> {
        if let Some(c) = cfg {
            self.write_json("config.json", c)?;
        }
        let manifest = Manifest { schema_version: 1, command: command.to_string(), args, files: self.files };
        fs::write(self.root.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(manifest)
    }
}

pub fn weights_hex(params: &[f64]) -> String {
    format!("{:016x}", checksum_params(params))
}
