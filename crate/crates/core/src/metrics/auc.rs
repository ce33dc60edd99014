//! ROC curves and AUC with Mann–Whitney tie handling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndcore::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucResult {
    pub auc: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci_high: Option<f64>,
    pub n_samples: usize,
}

/// Exact pair counts behind an AUC: `auc = wins2 / (2·pairs)`, where `wins2`
/// counts a strict win as 2 and a tie as 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairCounts {
    pub wins2: u64,
    pub pairs: u64,
}

impl PairCounts {
    pub fn auc(&self) -> f64 {
        self.wins2 as f64 / (2 * self.pairs) as f64
    }
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {i} is {}", scores[i])));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::UndefinedAuc(format!(
            "{pos} positives among {} samples",
            labels.len()
        )));
    }
    Ok(())
}

/// Indices sorted by descending score; ties keep input order.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Walks tie groups from the highest score down and returns
/// `(threshold, cumulative tp, cumulative fp)` after each group.
fn tie_groups(scores: &[f64], labels: &[bool]) -> Vec<(f64, u64, u64)> {
    let order = descending(scores);
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((s, tp, fp));
    }
    out
}

/// Pair counts from the trapezoid rule over tie groups, in integers.
pub fn pair_counts(scores: &[f64], labels: &[bool]) -> Result<PairCounts> {
    check_inputs(scores, labels)?;
    let groups = tie_groups(scores, labels);
    let (p, n) = groups.last().map(|g| (g.1, g.2)).unwrap();
    // Trapezoid between successive ROC vertices: Δfp·(tp_prev + tp), scaled by p·n.
    let mut wins2 = 0u64;
    let (mut tp_prev, mut fp_prev) = (0u64, 0u64);
    for &(_, tp, fp) in &groups {
        wins2 += (fp - fp_prev) * (tp_prev + tp);
        tp_prev = tp;
        fp_prev = fp;
    }
    Ok(PairCounts { wins2, pairs: p * n })
}

/// Binary AUC: the probability that a positive outscores a negative, ties
/// counting one half.
pub fn binary_auc(scores: &[f64], labels: &[bool]) -> Result<AucResult> {
    Ok(AucResult {
        auc: pair_counts(scores, labels)?.auc(),
        ci_low: None,
        ci_high: None,
        n_samples: scores.len(),
    })
}

/// Flattens an `[N,K]` score matrix and integer labels into one binary problem.
pub fn flatten_ovr(scores: &Tensor<f64>, labels: &[usize]) -> Result<(Vec<f64>, Vec<bool>)> {
    scores.expect_rank(2, "score matrix")?;
    let (n, k) = (scores.shape()[0], scores.shape()[1]);
    if labels.len() != n {
        return Err(Error::Dimension(format!("{n} score rows for {} labels", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Data(format!("label {bad} out of range for {k} classes")));
    }
    let onehot = labels
        .iter()
        .flat_map(|&l| (0..k).map(move |c| c == l))
        .collect();
    Ok((scores.data().to_vec(), onehot))
}

/// Micro-averaged one-vs-rest AUC.
pub fn micro_ovr_auc(scores: &Tensor<f64>, labels: &[usize]) -> Result<AucResult> {
    let (s, l) = flatten_ovr(scores, labels)?;
    Ok(AucResult {
        n_samples: labels.len(),
        ..binary_auc(&s, &l)?
    })
}

/// Column `class` of the score matrix with its one-vs-rest labels.
pub fn ovr_column(scores: &Tensor<f64>, labels: &[usize], class: usize) -> Result<(Vec<f64>, Vec<bool>)> {
    scores.expect_rank(2, "score matrix")?;
    let k = scores.shape()[1];
    if class >= k || labels.len() != scores.shape()[0] {
        return Err(Error::Dimension(format!(
            "class {class} of {k}, {} labels for {} rows",
            labels.len(),
            scores.shape()[0]
        )));
    }
    let col = scores.data().chunks(k).map(|row| row[class]).collect();
    Ok((col, labels.iter().map(|&l| l == class).collect()))
}

/// One-vs-rest AUC for each class.
pub fn per_class_auc(scores: &Tensor<f64>, labels: &[usize]) -> Result<Vec<AucResult>> {
    scores.expect_rank(2, "score matrix")?;
    (0..scores.shape()[1])
        .map(|c| {
            let (s, l) = ovr_column(scores, labels, c)?;
            binary_auc(&s, &l)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Descending; the first entry is +∞ for the (0, 0) vertex.
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
}

impl RocCurve {
    pub fn from_scores(scores: &[f64], labels: &[bool]) -> Result<Self> {
        check_inputs(scores, labels)?;
        let groups = tie_groups(scores, labels);
        let (p, n) = groups.last().map(|g| (g.1 as f64, g.2 as f64)).unwrap();
        let mut curve = RocCurve {
            thresholds: vec![f64::INFINITY],
            fpr: vec![0.0],
            tpr: vec![0.0],
        };
        for (s, tp, fp) in groups {
            curve.thresholds.push(s);
            curve.fpr.push(fp as f64 / n);
            curve.tpr.push(tp as f64 / p);
        }
        Ok(curve)
    }

    pub fn micro_ovr(scores: &Tensor<f64>, labels: &[usize]) -> Result<Self> {
        let (s, l) = flatten_ovr(scores, labels)?;
        Self::from_scores(&s, &l)
    }

    /// Trapezoidal area.
    pub fn area(&self) -> f64 {
        self.fpr
            .windows(2)
            .zip(self.tpr.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
            .sum()
    }

    pub fn len(&self) -> usize {
        self.fpr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fpr.is_empty()
    }
}
