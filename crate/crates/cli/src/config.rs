//! Run configuration: one JSON document covering phantom generation, splitting,
//! training, the network and evaluation. Command-line flags override its keys.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use spacesqueeze::data::PhantomSetSpec;
use spacesqueeze::model::NetworkConfig;
use spacesqueeze::train::{config_hash, TrainConfig};
use spacesqueeze::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Micro,
    Perclass,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Separable,
    Ambiguous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    pub fn enabled(self) -> bool {
        self == Switch::On
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub preset: Preset,
    /// Phantom set description; replaces `preset` when given.
    pub spec: Option<PhantomSetSpec>,
    /// Cases per class in N0, N1-2, N3plus order.
    pub counts: [usize; 3],
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Separable,
            spec: None,
            counts: [131, 58, 38],
        }
    }
}

impl PhantomConfig {
    pub fn set_spec(&self) -> PhantomSetSpec {
        match (&self.spec, self.preset) {
            (Some(s), _) => s.clone(),
            (None, Preset::Separable) => PhantomSetSpec::separable(),
            (None, Preset::Ambiguous) => PhantomSetSpec::ambiguous(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub folds: usize,
    /// Held-out test cases; defaults to 76/227 of the cohort.
    pub test_n: Option<usize>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { folds: 3, test_n: None }
    }
}

impl SplitConfig {
    pub fn test_size(&self, n_cases: usize) -> usize {
        self.test_n
            .unwrap_or_else(|| ((n_cases * 76) as f64 / 227.0).round() as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub bootstrap: usize,
    pub alpha: f64,
    pub metric: Metric,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            bootstrap: 2000,
            alpha: 0.05,
            metric: Metric::Micro,
        }
    }
}

/// Input locations. Not part of the config hash, so moving a dataset does not
/// change provenance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub split: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds phantom generation, splitting, initialization, shuffling,
    /// augmentation and bootstrap resampling.
    pub seed: u64,
    pub phantom: PhantomConfig,
    pub split: SplitConfig,
    /// `train.seed` is overwritten by `seed`.
    pub train: TrainConfig,
    pub network: NetworkConfig,
    pub eval: EvalConfig,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            phantom: PhantomConfig::default(),
            split: SplitConfig::default(),
            train: TrainConfig::default(),
            network: NetworkConfig::default(),
            eval: EvalConfig::default(),
            paths: Paths::default(),
        }
    }
}

/// Flag values that override the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub se: Option<Switch>,
    pub virtual_class: Option<Switch>,
    pub folds: Option<usize>,
    pub metric: Option<Metric>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Loads `path` (or the defaults), applies `o` and validates.
    pub fn resolve(path: Option<&Path>, o: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(s) = o.seed {
            cfg.seed = s;
        }
        if let Some(e) = o.epochs {
            cfg.train.epochs = e;
        }
        if let Some(s) = o.se {
            cfg.train.se_enabled = s.enabled();
        }
        if let Some(v) = o.virtual_class {
            cfg.train.virtual_enabled = v.enabled();
        }
        if let Some(k) = o.folds {
            cfg.split.folds = k;
        }
        if let Some(m) = o.metric {
            cfg.eval.metric = m;
        }
        cfg.train.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.network.validate()?;
        if self.split.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.split.folds)));
        }
        if !(self.eval.alpha > 0.0 && self.eval.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.eval.alpha)));
        }
        Ok(())
    }

    /// Hash over everything except input paths.
    pub fn hash(&self) -> Result<String> {
        config_hash(&(
            self.seed,
            &self.phantom,
            &self.split,
            &self.train,
            &self.network,
            &self.eval,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_and_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"seed": 7, "network": {"input_hw": 32}, "train": {"lr": 0.001}}"#).unwrap();
        let o = Overrides {
            epochs: Some(5),
            virtual_class: Some(Switch::Off),
            ..Overrides::default()
        };
        let cfg = RunConfig::resolve(Some(&p), &o).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train.seed, 7);
        assert_eq!(cfg.network.input_hw, 32);
        assert_eq!(cfg.network.embed_channels, 16);
        assert_eq!(cfg.train.lr, 0.001);
        assert_eq!(cfg.train.epochs, 5);
        assert!(!cfg.train.virtual_enabled && cfg.train.se_enabled);

        let seeded = RunConfig::resolve(Some(&p), &Overrides { seed: Some(42), ..o }).unwrap();
        assert_ne!(seeded.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn paths_do_not_enter_the_hash() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.paths.data = Some("elsewhere".into());
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"sed": 1}"#).unwrap();
        assert!(matches!(RunConfig::resolve(Some(&p), &Overrides::default()), Err(Error::Config(_))));
        let o = Overrides {
            folds: Some(1),
            ..Overrides::default()
        };
        assert!(matches!(RunConfig::resolve(None, &o), Err(Error::Config(_))));
    }

    #[test]
    fn default_test_size_follows_cohort_ratio() {
        assert_eq!(SplitConfig::default().test_size(227), 76);
    }
}
