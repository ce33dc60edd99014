use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{svol_read, svol_write, NormConstants};
use crate::error::{Error, Result};
use crate::model::{NetworkConfig, ParamSet};

pub const META_FILE: &str = "checkpoint.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub val_auc: f64,
    pub config_hash: String,
    pub dataset_hash: String,
    pub fold: usize,
    pub network: NetworkConfig,
    pub se_enabled: bool,
    /// Constants the network's inputs were normalized with.
    pub norm: NormConstants,
    /// Tensor files in the checkpoint directory, `<name>.svol`.
    pub tensors: Vec<String>,
}

/// Parameter snapshot with the validation score it was selected on.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ParamSet<f32>,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let mut meta = self.meta.clone();
        meta.tensors.clear();
        for (name, t) in self.params.named() {
            svol_write(&dir.join(format!("{name}.svol")), t)?;
            meta.tensors.push(name.to_string());
        }
        let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::json("checkpoint", e))?;
        let path = dir.join(META_FILE);
        fs::write(&path, text + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(META_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let meta: CheckpointMeta =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let tensors = meta
            .tensors
            .iter()
            .map(|name| Ok((name.clone(), svol_read(&dir.join(format!("{name}.svol")))?)))
            .collect::<Result<Vec<_>>>()?;
        let params = ParamSet::from_named(&meta.network, tensors)?;
        if params.se.is_some() != meta.se_enabled {
            return Err(Error::Data(format!(
                "checkpoint {} declares se_enabled={} but its tensors disagree",
                dir.display(),
                meta.se_enabled
            )));
        }
        Ok(Self { params, meta })
    }
}
