//! DeLong comparison of two correlated AUCs on the same cases.

use serde::{Deserialize, Serialize};

use super::auc::ovr_column;
use super::normal;
use crate::error::{Error, Result};
use crate::ndcore::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelongResult {
    pub auc_a: f64,
    pub auc_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub cov: f64,
    pub z: f64,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_corrected: Option<f64>,
}

/// Structural components: `v10[i]` for each positive, `v01[j]` for each negative.
#[derive(Clone, Debug, PartialEq)]
pub struct Placements {
    pub v10: Vec<f64>,
    pub v01: Vec<f64>,
}

impl Placements {
    pub fn auc(&self) -> f64 {
        self.v10.iter().sum::<f64>() / self.v10.len() as f64
    }
}

/// `#{others < x} + ½·#{others == x}` for each x, via binary search in `sorted_others`.
fn half_ranks(xs: &[f64], sorted_others: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let lt = sorted_others.partition_point(|&o| o < x);
            let le = sorted_others.partition_point(|&o| o <= x);
            lt as f64 + 0.5 * (le - lt) as f64
        })
        .collect()
}

pub fn placements(scores: &[f64], labels: &[bool]) -> Result<Placements> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("score".into()));
    }
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::UndefinedAuc(format!("{} positives, {} negatives", pos.len(), neg.len())));
    }
    let (mut sp, mut sn) = (pos.clone(), neg.clone());
    sp.sort_by(f64::total_cmp);
    sn.sort_by(f64::total_cmp);
    let (m, n) = (pos.len() as f64, neg.len() as f64);
    let v10 = half_ranks(&pos, &sn).into_iter().map(|c| c / n).collect();
    // A negative scores "below" the positives it loses to.
    let v01 = half_ranks(&neg, &sp).into_iter().map(|c| 1.0 - c / m).collect();
    Ok(Placements { v10, v01 })
}

/// Sample covariance with divisor `len − 1`.
fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len();
    if k < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / k as f64;
    let my = y.iter().sum::<f64>() / k as f64;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (k - 1) as f64
}

/// AUCs and the 2×2 covariance matrix `S10/m + S01/n` for two paired models.
pub fn delong_covariance(
    scores_a: &[f64],
    scores_b: &[f64],
    labels: &[bool],
) -> Result<([f64; 2], [[f64; 2]; 2])> {
    if scores_a.len() != scores_b.len() {
        return Err(Error::Dimension(format!(
            "paired scores differ in length: {} vs {}",
            scores_a.len(),
            scores_b.len()
        )));
    }
    let pa = placements(scores_a, labels)?;
    let pb = placements(scores_b, labels)?;
    let (m, n) = (pa.v10.len() as f64, pa.v01.len() as f64);
    let comps = [&pa, &pb];
    let mut s = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            s[r][c] = covariance(&comps[r].v10, &comps[c].v10) / m
                + covariance(&comps[r].v01, &comps[c].v01) / n;
        }
    }
    Ok(([pa.auc(), pb.auc()], s))
}

/// Two-sided DeLong test of `AUC_a = AUC_b`.
///
/// When the difference has zero variance and the AUCs agree, the result is
/// `z = 0, p = 1`; with unequal AUCs it is a degenerate-variance error.
pub fn delong_test(scores_a: &[f64], scores_b: &[f64], labels: &[bool]) -> Result<DelongResult> {
    let ([auc_a, auc_b], s) = delong_covariance(scores_a, scores_b, labels)?;
    let var = s[0][0] + s[1][1] - 2.0 * s[0][1];
    let diff = auc_a - auc_b;
    let scale = s[0][0] + s[1][1];
    let (z, p) = if var <= f64::EPSILON * scale || var <= 0.0 {
        if diff == 0.0 {
            (0.0, 1.0)
        } else {
            return Err(Error::DegenerateVariance(format!(
                "AUCs {auc_a} and {auc_b} differ but their difference has variance {var:e}"
            )));
        }
    } else {
        let z = diff / var.sqrt();
        (z, (2.0 * normal::sf(z.abs())).min(1.0))
    };
    Ok(DelongResult {
        auc_a,
        auc_b,
        var_a: s[0][0],
        var_b: s[1][1],
        cov: s[0][1],
        z,
        p,
        p_corrected: None,
    })
}

/// Per-class one-vs-rest DeLong tests with Bonferroni correction over the
/// number of classes.
pub fn delong_per_class(
    scores_a: &Tensor<f64>,
    scores_b: &Tensor<f64>,
    labels: &[usize],
) -> Result<Vec<DelongResult>> {
    if scores_a.shape() != scores_b.shape() {
        return Err(Error::Dimension(format!(
            "score matrices {:?} vs {:?}",
            scores_a.shape(),
            scores_b.shape()
        )));
    }
    scores_a.expect_rank(2, "score matrix")?;
    let k = scores_a.shape()[1];
    let mut out = (0..k)
        .map(|c| {
            let (a, l) = ovr_column(scores_a, labels, c)?;
            let (b, _) = ovr_column(scores_b, labels, c)?;
            delong_test(&a, &b, &l)
        })
        .collect::<Result<Vec<_>>>()?;
    let corrected = bonferroni(&out.iter().map(|r| r.p).collect::<Vec<_>>(), k);
    for (r, pc) in out.iter_mut().zip(corrected) {
        r.p_corrected = Some(pc);
    }
    Ok(out)
}

/// `p' = min(1, m·p)`.
pub fn bonferroni(p_values: &[f64], m: usize) -> Vec<f64> {
    p_values.iter().map(|&p| (p * m as f64).min(1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LABELS: [bool; 8] = [true, true, true, true, false, false, false, false];

    #[test]
    fn identical_models() {
        let s = [0.9, 0.4, 0.7, 0.6, 0.3, 0.65, 0.1, 0.4];
        let r = delong_test(&s, &s, &LABELS).unwrap();
        assert_eq!((r.z, r.p), (0.0, 1.0));
    }

    #[test]
    fn placements_average_to_auc() {
        let s = [0.9, 0.4, 0.7, 0.6, 0.3, 0.65, 0.1, 0.4];
        let p = placements(&s, &LABELS).unwrap();
        let auc = crate::metrics::binary_auc(&s, &LABELS).unwrap().auc;
        assert!((p.auc() - auc).abs() < 1e-15);
        let from_neg = p.v01.iter().sum::<f64>() / p.v01.len() as f64;
        assert!((from_neg - auc).abs() < 1e-15);
    }

    #[test]
    fn swapping_models_negates_z() {
        let a = [0.9, 0.4, 0.7, 0.6, 0.3, 0.65, 0.1, 0.4];
        let b = [0.8, 0.5, 0.5, 0.9, 0.6, 0.2, 0.3, 0.45];
        let ab = delong_test(&a, &b, &LABELS).unwrap();
        let ba = delong_test(&b, &a, &LABELS).unwrap();
        assert_eq!(ab.z, -ba.z);
        assert_eq!(ab.p, ba.p);
        assert!((0.0..=1.0).contains(&ab.p));
        assert_eq!(ab.z.signum(), (ab.auc_a - ab.auc_b).signum());
    }

    #[test]
    fn perfect_models_with_different_auc_are_degenerate() {
        // Both have zero placement variance; a is perfect, b perfectly inverted.
        let a = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let b = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        assert!(matches!(
            delong_test(&a, &b, &LABELS),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn bonferroni_values() {
        let c = bonferroni(&[0.0538, 0.6, 0.01], 3);
        assert!((c[0] - 0.1614).abs() < 1e-12);
        assert_eq!(c[1], 1.0);
        assert_eq!(bonferroni(&[0.6, 0.2], 1), vec![0.6, 0.2]);
        assert_eq!(bonferroni(&[0.6], 2), vec![1.0]);
    }
}
