//! Argument parsing.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Metric, Overrides, Preset, Switch};

#[derive(Debug, Parser)]
#[command(name = "spacesqueeze", version = crate::report::VERSION, about = "Spectral CT lymph-node classifier: data, training, ablation and statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; each overrides the matching config key.
#[derive(Clone, Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_enum)]
    pub se: Option<Switch>,
    #[arg(long = "virtual", value_enum)]
    pub virtual_class: Option<Switch>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub metric: Option<Metric>,
}

impl Common {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            epochs: self.epochs,
            se: self.se,
            virtual_class: self.virtual_class,
            folds: self.folds,
            metric: self.metric,
        }
    }
}

/// Where to find the dataset and its split. Both default to the config's
/// `paths`, then to the output directory.
#[derive(Clone, Debug, Default, Args)]
pub struct Inputs {
    /// Dataset directory holding manifest.json.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Split file written by `split`.
    #[arg(long)]
    pub split: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic phantom dataset.
    Phantom {
        #[command(flatten)]
        common: Common,
        /// Phantom set description (JSON); overrides --preset.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Cases per class, N0,N1-2,N3plus.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
    },
    /// Stratified test hold-out and k-fold assignment.
    Split {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        /// Held-out test cases.
        #[arg(long)]
        test_n: Option<usize>,
    },
    /// Train one or all folds with the configured components.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        /// Train only this fold (0-based).
        #[arg(long)]
        fold: Option<usize>,
    },
    /// Train and test the four SE/virtual-class combinations on every fold.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Test-set AUC with a BCa interval for one checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Per-class DeLong comparison of two checkpoints with Bonferroni correction.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Export test-set ROC curves as CSV and an SVG overlay.
    Roc {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
    },
}
