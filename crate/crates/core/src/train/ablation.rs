use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::fit::{evaluate, prepare_fold, train_fold, FoldData, Halt, TrainOutcome};
use crate::data::{CaseSource, FoldSplit, PreparedSet};
use crate::error::Result;
use crate::metrics::{micro_auc_with_ci, AucResult};
use crate::model::NetworkConfig;
use crate::ndcore::Tensor;
use crate::rng::{self, tag};

/// The four component combinations, in table order: baseline, SE only,
/// virtual class only, both.
pub const GRID: [(bool, bool); 4] = [(false, false), (true, false), (false, true), (true, true)];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub best_epoch: usize,
    pub val_auc: f64,
    pub test: AucResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halted: Option<Halt>,
    /// Test-set probabilities `[N][K]`, in `test_ids` order.
    #[serde(skip)]
    pub test_probs: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub se_enabled: bool,
    pub virtual_enabled: bool,
    pub config_hash: String,
    pub folds: Vec<FoldOutcome>,
    pub averaged_auc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
    pub test_ids: Vec<String>,
    pub test_labels: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridOptions {
    pub bootstrap: usize,
    pub alpha: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            bootstrap: 2000,
            alpha: 0.05,
        }
    }
}

/// Test-set cases of `split`, normalized with the fold's constants.
pub fn prepare_test(source: &dyn CaseSource, split: &FoldSplit, fold: &FoldData, hw: usize) -> Result<PreparedSet> {
    PreparedSet::load(source, &split.holdout, &fold.norm, hw)
}

/// Test AUC with a BCa interval for a trained fold.
pub fn score_test(
    outcome: &TrainOutcome,
    test: &PreparedSet,
    chunk: usize,
    opts: &GridOptions,
    stream: &[u64],
    seed: u64,
) -> Result<(AucResult, Tensor<f64>)> {
    let probs = evaluate(&outcome.checkpoint.meta.network, &outcome.checkpoint.params, test, chunk)?;
    let auc = micro_auc_with_ci(&probs, &test.labels, opts.bootstrap, opts.alpha, &mut rng::stream(seed, stream))?;
    Ok((auc, probs))
}

/// Trains and tests every grid cell on every fold with a shared seed.
/// `on_fold` sees each trained fold, e.g. to persist checkpoints.
pub fn run_ablation_grid(
    source: &dyn CaseSource,
    split: &FoldSplit,
    base_cfg: &TrainConfig,
    net: &NetworkConfig,
    opts: &GridOptions,
    mut on_fold: impl FnMut(usize, usize, &TrainOutcome) -> Result<()>,
) -> Result<AblationTable> {
    let mut rows: Vec<AblationRow> = GRID
        .iter()
        .map(|&(se, virt)| {
            let cfg = TrainConfig {
                se_enabled: se,
                virtual_enabled: virt,
                ..base_cfg.clone()
            };
            Ok(AblationRow {
                se_enabled: se,
                virtual_enabled: virt,
                config_hash: super::fit::run_hash(&cfg, net)?,
                folds: vec![],
                averaged_auc: 0.0,
            })
        })
        .collect::<Result<_>>()?;
    let mut test_labels = Vec::new();
    for fold in 0..split.k {
        let data = prepare_fold(source, split, fold, net.input_hw)?;
        let test = prepare_test(source, split, &data, net.input_hw)?;
        test_labels = test.labels.clone();
        for (cell, row) in rows.iter_mut().enumerate() {
            let cfg = TrainConfig {
                se_enabled: row.se_enabled,
                virtual_enabled: row.virtual_enabled,
                ..base_cfg.clone()
            };
            let outcome = train_fold(&cfg, net, &data)?;
            on_fold(cell, fold, &outcome)?;
            let stream = [tag::BOOTSTRAP, cell as u64, fold as u64];
            let (test_auc, probs) = score_test(&outcome, &test, cfg.chunk, opts, &stream, cfg.seed)?;
            row.folds.push(FoldOutcome {
                fold,
                best_epoch: outcome.checkpoint.meta.epoch,
                val_auc: outcome.checkpoint.meta.val_auc,
                test: test_auc,
                halted: outcome.halted.clone(),
                test_probs: probs.data().chunks(net.num_classes).map(<[f64]>::to_vec).collect(),
            });
        }
    }
    for row in &mut rows {
        row.averaged_auc = row.folds.iter().map(|f| f.test.auc).sum::<f64>() / row.folds.len() as f64;
    }
    Ok(AblationTable {
        rows,
        test_ids: split.holdout.clone(),
        test_labels,
    })
}

impl AblationTable {
    pub fn row(&self, se: bool, virtual_class: bool) -> Option<&AblationRow> {
        self.rows
            .iter()
            .find(|r| r.se_enabled == se && r.virtual_enabled == virtual_class)
    }

    /// Fixed-width text table: one line of AUCs and one of bracketed BCa
    /// intervals per configuration, folds as columns, averaged AUC last.
    pub fn render(&self) -> String {
        let k = self.rows.first().map_or(0, |r| r.folds.len());
        let mark = |on: bool| if on { "yes" } else { "no" };
        let mut s = format!("{:<9}{:<15}", "SE-Block", "Virtual-Class");
        for f in 1..=k {
            write!(s, "{:<20}", format!("Fold-{f}")).unwrap();
        }
        s.push_str("Averaged AUC\n");
        for r in &self.rows {
            write!(s, "{:<9}{:<15}", mark(r.se_enabled), mark(r.virtual_enabled)).unwrap();
            for f in &r.folds {
                let flag = if f.halted.is_some() { "*" } else { "" };
                write!(s, "{:<20}", format!("{:.4}{flag}", f.test.auc)).unwrap();
            }
            writeln!(s, "{:.4}", r.averaged_auc).unwrap();
            write!(s, "{:<24}", "").unwrap();
            for f in &r.folds {
                let ci = match (f.test.ci_low, f.test.ci_high) {
                    (Some(lo), Some(hi)) => format!("[{lo:.4}, {hi:.4}]"),
                    _ => String::new(),
                };
                write!(s, "{ci:<20}").unwrap();
            }
            s.push('\n');
        }
        if self.rows.iter().flat_map(|r| &r.folds).any(|f| f.halted.is_some()) {
            s.push_str("* training halted on a zero-norm embedding; best earlier checkpoint used\n");
        }
        s
    }
}
