//! Run context: output confinement, input digests and report provenance.

use std::cell::RefCell;
use std::fs;
use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context, Result};
use oppo_core::io::{self, SchemaRecord};
use oppo_core::ExecMode;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub parameters: serde_json::Value,
    pub inputs: Vec<InputDigest>,
}

#[derive(Serialize)]
struct Report<'a, T> {
    provenance: &'a Provenance,
    result: &'a T,
}

pub struct Ctx {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub pretty: bool,
    pub mode: ExecMode,
    pub config: RunConfig,
    inputs: RefCell<Vec<InputDigest>>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Ctx {
    pub fn new(out_dir: PathBuf, seed: u64, pretty: bool, mode: ExecMode, config: RunConfig) -> Self {
        Ctx {
            out_dir,
            seed,
            pretty,
            mode,
            config,
            inputs: RefCell::new(Vec::new()),
        }
    }

    /// Registers an input file so its digest appears in every report.
    pub fn input(&self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        let digest = InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        };
        let mut inputs = self.inputs.borrow_mut();
        if !inputs.iter().any(|d| d.path == digest.path) {
            inputs.push(digest);
        }
        Ok(())
    }

    pub fn read<T: SchemaRecord>(&self, path: &Path) -> Result<Vec<T>> {
        self.input(path)?;
        Ok(io::read_records(path)?)
    }

    /// Resolves `name` inside the output directory. Absolute names and
    /// names climbing out of the directory are rejected.
    pub fn out_path(&self, name: impl AsRef<Path>) -> Result<PathBuf> {
        let name = name.as_ref();
        if name.as_os_str().is_empty()
            || !name.components().all(|c| matches!(c, Component::Normal(_)))
        {
            bail!(
                "output name {} must be a relative path inside the output directory",
                name.display()
            );
        }
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .with_context(|| format!("cannot create {}", parent.display()))?;
        }
        Ok(path)
    }

    pub fn provenance(&self, command: &str, parameters: serde_json::Value) -> Provenance {
        let config_sha256 = sha256_hex(&serde_json::to_vec(&parameters).expect("json value"));
        Provenance {
            tool: "oppo",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed: self.seed,
            config_sha256,
            parameters,
            inputs: self.inputs.borrow().clone(),
        }
    }

    fn to_json<T: Serialize>(&self, value: &T) -> Result<Vec<u8>> {
        let mut bytes = if self.pretty {
            serde_json::to_vec_pretty(value)?
        } else {
            serde_json::to_vec(value)?
        };
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn write_report<T: Serialize>(&self, name: impl AsRef<Path>, prov: &Provenance, result: &T) -> Result<PathBuf> {
        let path = self.out_path(name)?;
        let bytes = self.to_json(&Report { provenance: prov, result })?;
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: impl AsRef<Path>, value: &T) -> Result<PathBuf> {
        let path = self.out_path(name)?;
        fs::write(&path, self.to_json(value)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    /// Record file with its manifest sidecar.
    pub fn write_records<T: SchemaRecord>(&self, name: &str, records: &[T]) -> Result<PathBuf> {
        let path = self.out_path(name)?;
        io::write_records(&path, records)?;
        Ok(path)
    }

    /// Plain JSON lines without a manifest, for logs and side files.
    pub fn write_lines<T: Serialize>(&self, name: &str, records: &[T]) -> Result<PathBuf> {
        let path = self.out_path(name)?;
        let file = fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        io::write_records_to(records, file)?;
        Ok(path)
    }

    pub fn summary(&self, line: impl AsRef<str>) {
        if self.pretty {
            println!("{}", line.as_ref());
        }
    }
}

/// Reads JSON lines without a manifest; blank lines are skipped.
pub fn read_lines<T: serde::de::DeserializeOwned>(ctx: &Ctx, path: &Path) -> Result<Vec<T>> {
    ctx.input(path)?;
    let raw = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{}:{}: invalid record", path.display(), i + 1))
        })
        .collect()
}
