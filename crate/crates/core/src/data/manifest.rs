use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::volume::Label;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Unassigned,
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub case_id: String,
    pub label: Label,
    /// Volume file, relative to the manifest's directory.
    pub path: String,
    pub split: SplitRole,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Entries plus the directory their paths are relative to.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Reads `<dir>/manifest.json`, or the given file directly.
    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = fs::read_to_string(&file).map_err(|e| Error::io(format!("reading {}", file.display()), e))?;
        let entries: Vec<ManifestEntry> =
            serde_json::from_str(&text).map_err(|e| Error::json(file.display().to_string(), e))?;
        let mut ids: Vec<&str> = entries.iter().map(|e| e.case_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Data(format!("manifest lists case {} twice", w[0])));
        }
        Ok(Self {
            dir: file.parent().map(Path::to_path_buf).unwrap_or_default(),
            entries,
        })
    }

    pub fn save(&self) -> Result<PathBuf> {
        let file = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.entries).map_err(|e| Error::json("manifest", e))?;
        fs::write(&file, text + "\n").map_err(|e| Error::io(format!("writing {}", file.display()), e))?;
        Ok(file)
    }

    pub fn cases(&self) -> Vec<(String, Label)> {
        self.entries.iter().map(|e| (e.case_id.clone(), e.label)).collect()
    }

    pub fn entry(&self, case_id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.case_id == case_id)
    }

    pub fn volume_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.dir.join(&entry.path)
    }
}
