//! Bias-corrected and accelerated (BCa) bootstrap intervals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::auc::{micro_ovr_auc, AucResult};
use super::normal;
use crate::error::{Error, Result};
use crate::ndcore::Tensor;

pub const MIN_REPLICATES: usize = 100;
pub const MIN_SAMPLE: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcaInterval {
    pub low: f64,
    pub high: f64,
    pub z0: f64,
    pub accel: f64,
    /// Adjusted lower and upper percentile levels.
    pub alpha1: f64,
    pub alpha2: f64,
    /// Every replicate took the same value.
    pub degenerate: bool,
}

/// Linear-interpolation quantile of an ascending slice (position `q·(B−1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Jackknife acceleration `Σd³ / (6·(Σd²)^{3/2})` with `d = θ̄ − θ₋ᵢ`.
pub fn acceleration(jackknife: &[f64]) -> f64 {
    if jackknife.len() < 2 {
        return 0.0;
    }
    let mean = jackknife.iter().sum::<f64>() / jackknife.len() as f64;
    let (mut s2, mut s3) = (0.0, 0.0);
    for &t in jackknife {
        let d = mean - t;
        s2 += d * d;
        s3 += d * d * d;
    }
    if s2 == 0.0 {
        0.0
    } else {
        s3 / (6.0 * s2.powf(1.5))
    }
}

/// BCa interval from a fixed set of bootstrap replicates and leave-one-out
/// estimates.
///
/// The bias proportion `#{θ* < θ̂}/B` is clamped to `[1/(2B), 1 − 1/(2B)]` so
/// that `z0` stays finite when θ̂ lies outside the replicate range.
pub fn bca_from_replicates(
    theta_hat: f64,
    replicates: &[f64],
    jackknife: &[f64],
    alpha: f64,
) -> Result<BcaInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if replicates.is_empty() {
        return Err(Error::Config("no bootstrap replicates".into()));
    }
    if replicates.iter().chain(jackknife).any(|v| !v.is_finite()) || !theta_hat.is_finite() {
        return Err(Error::NonFinite("bootstrap statistic".into()));
    }
    let mut sorted = replicates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len() as f64;

    if sorted[0] == sorted[sorted.len() - 1] {
        let v = sorted[0];
        return Ok(BcaInterval {
            low: v,
            high: v,
            z0: 0.0,
            accel: 0.0,
            alpha1: alpha / 2.0,
            alpha2: 1.0 - alpha / 2.0,
            degenerate: true,
        });
    }

    let below = sorted.partition_point(|&t| t < theta_hat) as f64;
    let prop = (below / b).clamp(0.5 / b, 1.0 - 0.5 / b);
    let z0 = normal::inv_cdf(prop);
    let accel = acceleration(jackknife);

    let (alpha1, alpha2) = if z0 == 0.0 && accel == 0.0 {
        (alpha / 2.0, 1.0 - alpha / 2.0)
    } else {
        let adjust = |z: f64| normal::cdf(z0 + (z0 + z) / (1.0 - accel * (z0 + z)));
        (
            adjust(normal::inv_cdf(alpha / 2.0)),
            adjust(normal::inv_cdf(1.0 - alpha / 2.0)),
        )
    };
    Ok(BcaInterval {
        low: quantile_sorted(&sorted, alpha1),
        high: quantile_sorted(&sorted, alpha2),
        z0,
        accel,
        alpha1,
        alpha2,
        degenerate: false,
    })
}

/// Draws `b` case resamples of `0..n` and evaluates `stat` on each. A `None`
/// from `stat` marks a degenerate resample, which is redrawn.
pub fn bootstrap_replicates<R: Rng + ?Sized>(
    n: usize,
    stat: &mut dyn FnMut(&[usize]) -> Option<f64>,
    b: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(b);
    let mut idx = vec![0usize; n];
    let mut attempts = 0usize;
    while out.len() < b {
        attempts += 1;
        if attempts > 50 * b {
            return Err(Error::Data(format!(
                "only {} of {b} bootstrap resamples were usable",
                out.len()
            )));
        }
        for v in idx.iter_mut() {
            *v = rng.gen_range(0..n);
        }
        if let Some(t) = stat(&idx) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Leave-one-out estimates; degenerate subsets are skipped.
pub fn jackknife(n: usize, stat: &mut dyn FnMut(&[usize]) -> Option<f64>) -> Vec<f64> {
    (0..n)
        .filter_map(|skip| {
            let idx: Vec<usize> = (0..n).filter(|&i| i != skip).collect();
            stat(&idx)
        })
        .collect()
}

/// BCa interval for a statistic of `n` cases, evaluated through index sets.
pub fn bca_ci<R: Rng + ?Sized>(
    n: usize,
    mut stat: impl FnMut(&[usize]) -> Option<f64>,
    b: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<(f64, BcaInterval)> {
    if b < MIN_REPLICATES {
        return Err(Error::Config(format!(
            "{b} bootstrap replicates requested, at least {MIN_REPLICATES} required"
        )));
    }
    if n < MIN_SAMPLE {
        return Err(Error::Config(format!(
            "sample of {n} is below the minimum of {MIN_SAMPLE}"
        )));
    }
    let all: Vec<usize> = (0..n).collect();
    let theta_hat = stat(&all)
        .ok_or_else(|| Error::Data("statistic undefined on the full sample".into()))?;
    let reps = bootstrap_replicates(n, &mut stat, b, rng)?;
    let jack = jackknife(n, &mut stat);
    Ok((theta_hat, bca_from_replicates(theta_hat, &reps, &jack, alpha)?))
}

/// Rows `idx` of an `[N,K]` matrix.
pub fn select_rows(scores: &Tensor<f64>, idx: &[usize]) -> Tensor<f64> {
    let k = scores.shape()[1];
    let data = idx
        .iter()
        .flat_map(|&i| scores.data()[i * k..(i + 1) * k].iter().copied())
        .collect();
    Tensor::from_vec(&[idx.len(), k], data).expect("row selection")
}

/// Micro-OvR AUC with a case-resampled BCa interval. Resamples missing a
/// class entirely are redrawn.
pub fn micro_auc_with_ci<R: Rng + ?Sized>(
    scores: &Tensor<f64>,
    labels: &[usize],
    b: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<AucResult> {
    let base = micro_ovr_auc(scores, labels)?;
    let stat = |idx: &[usize]| {
        let l: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        micro_ovr_auc(&select_rows(scores, idx), &l).ok().map(|r| r.auc)
    };
    let (_, ci) = bca_ci(labels.len(), stat, b, alpha, rng)?;
    Ok(AucResult {
        ci_low: Some(ci.low.min(base.auc)),
        ci_high: Some(ci.high.max(base.auc)),
        ..base
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quantile_interpolates() {
        let s = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.0), 0.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert_eq!(quantile_sorted(&s, 0.5), 2.0);
        assert_eq!(quantile_sorted(&s, 0.1), 0.4);
    }

    #[test]
    fn symmetric_case_is_percentile() {
        // θ̂ at the median with half the replicates strictly below, and a
        // symmetric jackknife.
        let reps: Vec<f64> = (0..200).map(|i| i as f64 - 99.5).collect();
        let jack = [-1.0, 1.0, -2.0, 2.0];
        let ci = bca_from_replicates(0.0, &reps, &jack, 0.05).unwrap();
        assert_eq!((ci.z0, ci.accel), (0.0, 0.0));
        let mut sorted = reps.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(ci.low, quantile_sorted(&sorted, 0.025));
        assert_eq!(ci.high, quantile_sorted(&sorted, 0.975));
    }

    #[test]
    fn constant_statistic_is_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (t, ci) = bca_ci(12, |_| Some(3.5), 200, 0.05, &mut rng).unwrap();
        assert_eq!((t, ci.low, ci.high), (3.5, 3.5, 3.5));
        assert!(ci.degenerate);
    }

    #[test]
    fn too_few_replicates_or_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            bca_ci(20, |_| Some(0.0), 99, 0.05, &mut rng),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            bca_ci(9, |_| Some(0.0), 500, 0.05, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn mean_interval_covers_sample_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..30).map(|i| ((i * 37) % 11) as f64).collect();
        let mean = |idx: &[usize]| Some(idx.iter().map(|&i| x[i]).sum::<f64>() / idx.len() as f64);
        let (t, ci) = bca_ci(x.len(), mean, 1000, 0.05, &mut rng).unwrap();
        assert!(ci.low < t && t < ci.high);
        assert!(ci.high - ci.low < 4.0);
    }

    #[test]
    fn auc_interval_brackets_point_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 30;
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let data: Vec<f64> = (0..n)
            .flat_map(|i| {
                let l = labels[i];
                let noise = ((i * 7919) % 13) as f64 / 13.0;
                (0..3).map(move |c| if c == l { 0.5 + noise * 0.6 } else { noise * 0.5 })
            })
            .collect();
        let scores = Tensor::from_vec(&[n, 3], data).unwrap();
        let r = micro_auc_with_ci(&scores, &labels, 500, 0.05, &mut rng).unwrap();
        assert!(r.ci_low.unwrap() <= r.auc && r.auc <= r.ci_high.unwrap());
    }
}
