//! Per-invocation state: the loaded device, the resolved seed, the output
//! directory and the list of files written so far.

use std::fmt;
use std::path::{Path, PathBuf};

use fluxkit_core::config::{self, DeviceConfig, TemperatureSource};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::GlobalArgs;

pub const SEED_ENV: &str = "FLUXKIT_SEED";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Core(fluxkit_core::Error),
    /// A replayed run produced different output.
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numeric() => 2,
            CliError::Mismatch(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Mismatch(m) => write!(f, "replay mismatch: {m}"),
        }
    }
}

impl From<fluxkit_core::Error> for CliError {
    fn from(e: fluxkit_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedSource {
    Flag,
    Environment,
    Config,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: String,
    pub argv: Vec<String>,
    /// Absolute path of the device file, or null for the built-in device.
    pub config_path: Option<PathBuf>,
    pub config_digest: String,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub tool_version: String,
    pub out_dir: PathBuf,
    pub outputs: Vec<OutputFile>,
    #[serde(rename = "temperature_mK")]
    pub temperature_mk: f64,
    pub temperature_source: TemperatureSource,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct Session {
    pub device: DeviceConfig,
    pub seed: u64,
    seed_source: SeedSource,
    config_path: Option<PathBuf>,
    config_digest: String,
    out_dir: PathBuf,
    argv: Vec<String>,
    outputs: Vec<OutputFile>,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl Session {
    pub fn open(global: &GlobalArgs, argv: Vec<String>) -> CliResult<Self> {
        let (text, config_path) = match &global.config {
            Some(p) => {
                let text = std::fs::read(p).map_err(|e| {
                    CliError::Core(fluxkit_core::Error::Config(format!("cannot read {}: {e}", p.display())))
                })?;
                let abs = std::fs::canonicalize(p).map_err(|e| io_err(p, e))?;
                (text, Some(abs))
            }
            None => (config::DEFAULT_DEVICE_JSON.as_bytes().to_vec(), None),
        };
        let utf8 = std::str::from_utf8(&text)
            .map_err(|_| fluxkit_core::Error::Config("device file is not UTF-8".into()))?;
        let device = DeviceConfig::from_json_str(utf8)?;
        let (seed, seed_source) = match (global.seed, std::env::var(SEED_ENV)) {
            (Some(s), _) => (s, SeedSource::Flag),
            (None, Ok(v)) => {
                let s = v.trim().parse::<u64>().map_err(|_| {
                    CliError::Usage(format!("{SEED_ENV} must be a non-negative integer, got {v:?}"))
                })?;
                (s, SeedSource::Environment)
            }
            (None, Err(_)) => (device.seed, SeedSource::Config),
        };
        std::fs::create_dir_all(&global.out).map_err(|e| io_err(&global.out, e))?;
        let out_dir = std::fs::canonicalize(&global.out).map_err(|e| io_err(&global.out, e))?;
        Ok(Self {
            device,
            seed,
            seed_source,
            config_path,
            config_digest: sha256_hex(&text),
            out_dir,
            argv,
            outputs: Vec::new(),
        })
    }

    pub fn config_digest(&self) -> &str {
        &self.config_digest
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        self.outputs.push(OutputFile { path: name.to_string(), sha256: sha256_hex(contents.as_bytes()) });
        println!("wrote {}", path.display());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text = to_sorted_json(value)?;
        self.write(name, &text)
    }

    pub fn finish(self, name: &str) -> CliResult<()> {
        let manifest = RunManifest {
            command_line: self.argv.join(" "),
            argv: self.argv,
            config_path: self.config_path,
            config_digest: self.config_digest,
            seed: self.seed,
            seed_source: self.seed_source,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            out_dir: self.out_dir.clone(),
            outputs: self.outputs,
            temperature_mk: self.device.params.temperature * 1e3,
            temperature_source: self.device.temperature_source,
        };
        let path = manifest_path(&self.out_dir, name);
        std::fs::write(&path, to_sorted_json(&manifest)?).map_err(|e| io_err(&path, e))?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

pub fn manifest_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.manifest.json"))
}

/// Pretty JSON with keys in lexicographic order and a trailing newline.
pub fn to_sorted_json<T: Serialize>(value: &T) -> CliResult<String> {
    // serde_json's Value map is ordered, so a round trip sorts every object.
    let v = serde_json::to_value(value).map_err(|e| CliError::Io(format!("serialising JSON: {e}")))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Io(format!("serialising JSON: {e}")))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fluxkit_core::Error;

    #[test]
    fn numeric_failures_exit_with_two() {
        assert_eq!(CliError::Core(Error::Numeric("no convergence".into())).exit_code(), 2);
        assert_eq!(CliError::Core(Error::Multiplicity { dimension: 2 }).exit_code(), 2);
        assert_eq!(CliError::Core(Error::Domain("x".into())).exit_code(), 1);
        assert_eq!(CliError::Core(Error::Config("x".into())).exit_code(), 1);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
    }

    #[test]
    fn json_objects_come_out_sorted() {
        let v = serde_json::json!({"b": 1, "a": {"d": 2, "c": 3}});
        assert_eq!(to_sorted_json(&v).unwrap(), "{\n  \"a\": {\n    \"c\": 3,\n    \"d\": 2\n  },\n  \"b\": 1\n}\n");
    }
}
