use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::NetworkConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    pub l2_lambda: f64,
    pub seed: u64,
    pub se_enabled: bool,
    pub virtual_enabled: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Random flips and rotations of training cases.
    pub augment: bool,
    /// Samples per forward/backward chunk; bounds peak memory, not the math.
    pub chunk: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch: 32,
            epochs: 100,
            patience: Some(30),
            l2_lambda: 1e-2,
            seed: 42,
            se_enabled: true,
            virtual_enabled: true,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
            augment: true,
            chunk: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.l2_lambda > 0.0 && self.l2_lambda.is_finite()) {
            return bad(format!("l2_lambda must be positive, got {}", self.l2_lambda));
        }
        if self.batch == 0 || self.chunk == 0 {
            return bad("batch and chunk must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("Adam betas must lie in [0,1), got {} and {}", self.beta1, self.beta2));
        }
        if !(self.eps > 0.0) {
            return bad(format!("Adam epsilon must be positive, got {}", self.eps));
        }
        Ok(())
    }

    /// The network as trained under this config (virtual class on or off).
    pub fn network(&self, base: &NetworkConfig) -> NetworkConfig {
        NetworkConfig {
            num_virtual: usize::from(self.virtual_enabled),
            ..base.clone()
        }
    }
}

/// First 16 hex digits of SHA-256 over the compact JSON encoding.
pub fn config_hash<S: Serialize>(value: &S) -> Result<String> {
    let bytes = serde_json::to_vec(value).map_err(|e| Error::json("config hash", e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
}
