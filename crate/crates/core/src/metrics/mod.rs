//! Discrimination statistics: ROC/AUC, BCa intervals, DeLong tests and
//! multiple-comparison correction.

mod auc;
mod bootstrap;
mod delong;
mod export;
pub mod normal;

pub use auc::{
    binary_auc, flatten_ovr, micro_ovr_auc, ovr_column, pair_counts, per_class_auc, AucResult,
    PairCounts, RocCurve,
};
pub use bootstrap::{
    acceleration, bca_ci, bca_from_replicates, bootstrap_replicates, jackknife,
    micro_auc_with_ci, quantile_sorted, select_rows, BcaInterval, MIN_REPLICATES, MIN_SAMPLE,
};
pub use delong::{
    bonferroni, delong_covariance, delong_per_class, delong_test, placements, DelongResult,
    Placements,
};
pub use export::{read_roc_csv, roc_export, roc_svg, write_roc_csv};
