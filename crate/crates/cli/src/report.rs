//! JSON reports and their plain-text companions. Every report carries the
//! seed, config hash and tool version; wall-clock timings live in separate
//! files so reports stay byte-identical across reruns.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spacesqueeze::{Error, Result};

use crate::config::RunConfig;

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

impl Provenance {
    pub fn of(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            seed: cfg.seed,
            config_hash: cfg.hash()?,
            version: VERSION.to_string(),
        })
    }

    fn header(&self) -> String {
        format!(
            "seed {}  config {}  version {}\n",
            self.seed, self.config_hash, self.version
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub command: String,
    pub provenance: Provenance,
    pub result: T,
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

/// Writes `<dir>/<name>.json` and `<dir>/<name>.txt`; returns the JSON path.
pub fn write_report<T: Serialize>(
    dir: &Path,
    name: &str,
    provenance: &Provenance,
    result: &T,
    table: &str,
) -> Result<PathBuf> {
    let json = dir.join(format!("{name}.json"));
    write_json(
        &json,
        &Report {
            command: name.to_string(),
            provenance: provenance.clone(),
            result,
        },
    )?;
    let txt = dir.join(format!("{name}.txt"));
    fs::write(&txt, provenance.header() + table)
        .map_err(|e| Error::io(format!("writing {}", txt.display()), e))?;
    Ok(json)
}
