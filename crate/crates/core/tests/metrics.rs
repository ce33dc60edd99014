//! Metric implementations against independent oracles, plus invariants.

use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spacesqueeze::metrics::*;
use spacesqueeze::ndcore::Tensor;
use statrs::distribution::{ContinuousCDF, Normal};

/// Exhaustive pair count: `Σ [p > n] + ½[p == n]` over all positive/negative pairs.
fn brute_auc(scores: &[f64], labels: &[bool]) -> Ratio<i64> {
    let mut num = Ratio::from_integer(0);
    let mut pairs = 0i64;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1;
                if si > sj {
                    num += Ratio::from_integer(1);
                } else if si == sj {
                    num += Ratio::new(1, 2);
                }
            }
        }
    }
    num / Ratio::from_integer(pairs)
}

fn random_binary(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    let n = rng.gen_range(2..=50);
    let levels = rng.gen_range(2..12);
    let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
    labels[0] = true;
    labels[1] = false;
    // coarse grid so ties are frequent
    let scores = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
    (scores, labels)
}

#[test]
fn binary_auc_matches_pair_counting_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let (s, l) = random_binary(&mut rng);
        let c = pair_counts(&s, &l).unwrap();
        assert_eq!(Ratio::new(c.wins2 as i64, 2 * c.pairs as i64), brute_auc(&s, &l));
        let oracle = brute_auc(&s, &l);
        assert_eq!(binary_auc(&s, &l).unwrap().auc, *oracle.numer() as f64 / *oracle.denom() as f64);
    }
}

#[test]
fn micro_auc_matches_pair_counting_on_flattened_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..300 {
        let n = rng.gen_range(2..=16);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let data: Vec<f64> = (0..3 * n).map(|_| rng.gen_range(0..6) as f64 / 6.0).collect();
        let scores = Tensor::from_vec(&[n, 3], data.clone()).unwrap();
        let flat_labels: Vec<bool> = labels.iter().flat_map(|&l| (0..3).map(move |c| c == l)).collect();
        let oracle = brute_auc(&data, &flat_labels);
        let c = {
            let (s, l) = flatten_ovr(&scores, &labels).unwrap();
            pair_counts(&s, &l).unwrap()
        };
        assert_eq!(Ratio::new(c.wins2 as i64, 2 * c.pairs as i64), oracle);
        assert_eq!(micro_ovr_auc(&scores, &labels).unwrap().n_samples, n);
    }
}

#[test]
fn six_sample_micro_case() {
    let labels = [0, 1, 2, 0, 1, 2];
    let data = vec![
        0.7, 0.2, 0.1, //
        0.3, 0.4, 0.3, //
        0.2, 0.5, 0.3, //
        0.4, 0.4, 0.2, //
        0.1, 0.8, 0.1, //
        0.3, 0.3, 0.4,
    ];
    let scores = Tensor::from_vec(&[6, 3], data.clone()).unwrap();
    let flat: Vec<bool> = labels.iter().flat_map(|&l| (0..3).map(move |c| c == l)).collect();
    let oracle = brute_auc(&data, &flat);
    assert_eq!(micro_ovr_auc(&scores, &labels).unwrap().auc, *oracle.numer() as f64 / *oracle.denom() as f64);
}

/// Efron's BCa written directly from the definitions, sharing nothing with the
/// library beyond the replicate values.
fn oracle_bca(theta: f64, reps: &[f64], jack: &[f64], alpha: f64) -> (f64, f64) {
    let nd = Normal::new(0.0, 1.0).unwrap();
    let b = reps.len() as f64;
    let mut less = 0usize;
    for &r in reps {
        if r < theta {
            less += 1;
        }
    }
    let z0 = nd.inverse_cdf((less as f64 / b).clamp(0.5 / b, 1.0 - 0.5 / b));
    let jbar = jack.iter().sum::<f64>() / jack.len() as f64;
    let num: f64 = jack.iter().map(|t| (jbar - t).powi(3)).sum();
    let den: f64 = jack.iter().map(|t| (jbar - t).powi(2)).sum();
    let a = num / (6.0 * den.powf(1.5));
    let level = |q: f64| {
        let z = nd.inverse_cdf(q);
        nd.cdf(z0 + (z0 + z) / (1.0 - a * (z0 + z)))
    };
    let mut s = reps.to_vec();
    s.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let pick = |q: f64| {
        let pos = q * (s.len() as f64 - 1.0);
        let i = pos as usize;
        if i + 1 >= s.len() {
            s[s.len() - 1]
        } else {
            s[i] * (1.0 - (pos - i as f64)) + s[i + 1] * (pos - i as f64)
        }
    };
    (pick(level(alpha / 2.0)), pick(level(1.0 - alpha / 2.0)))
}

#[test]
fn bca_matches_oracle_on_shared_replicates() {
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..15).map(|_| rng.gen::<f64>().powi(3) * 10.0).collect();
        let mean = |idx: &[usize]| Some(idx.iter().map(|&i| x[i]).sum::<f64>() / idx.len() as f64);

        let mut r1 = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (theta, ci) = bca_ci(x.len(), mean, 2000, 0.05, &mut r1).unwrap();

        let mut r2 = ChaCha8Rng::seed_from_u64(1000 + seed);
        let reps = bootstrap_replicates(x.len(), &mut |idx: &[usize]| mean(idx), 2000, &mut r2).unwrap();
        let total: f64 = x.iter().sum();
        let jack: Vec<f64> = x.iter().map(|xi| (total - xi) / 14.0).collect();
        let (lo, hi) = oracle_bca(theta, &reps, &jack, 0.05);
        assert!((ci.low - lo).abs() < 1e-9, "seed {seed}: {} vs {lo}", ci.low);
        assert!((ci.high - hi).abs() < 1e-9, "seed {seed}: {} vs {hi}", ci.high);
    }
}

/// First-principles DeLong: placements by explicit double loops and the
/// covariance formula written out term by term.
fn oracle_delong(a: &[f64], b: &[f64], labels: &[bool]) -> (f64, f64, f64) {
    let psi = |x: f64, y: f64| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 };
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    let (m, n) = (pos.len() as f64, neg.len() as f64);
    let comps = |s: &[f64]| {
        let v10: Vec<f64> = pos.iter().map(|&i| neg.iter().map(|&j| psi(s[i], s[j])).sum::<f64>() / n).collect();
        let v01: Vec<f64> = neg.iter().map(|&j| pos.iter().map(|&i| psi(s[i], s[j])).sum::<f64>() / m).collect();
        (v10, v01)
    };
    let (a10, a01) = comps(a);
    let (b10, b01) = comps(b);
    let cov = |x: &[f64], y: &[f64]| {
        let mx = x.iter().sum::<f64>() / x.len() as f64;
        let my = y.iter().sum::<f64>() / y.len() as f64;
        let mut acc = 0.0;
        for k in 0..x.len() {
            acc += (x[k] - mx) * (y[k] - my);
        }
        acc / (x.len() as f64 - 1.0)
    };
    (
        cov(&a10, &a10) / m + cov(&a01, &a01) / n,
        cov(&b10, &b10) / m + cov(&b01, &b01) / n,
        cov(&a10, &b10) / m + cov(&a01, &b01) / n,
    )
}

#[test]
fn delong_matches_placement_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..500 {
        let n = rng.gen_range(4..=20);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = true;
        labels[2] = false;
        labels[3] = false;
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| a[i] * 0.5 + rng.gen_range(0..5) as f64).collect();
        let (va, vb, c) = oracle_delong(&a, &b, &labels);
        let (_, s) = delong_covariance(&a, &b, &labels).unwrap();
        assert!((s[0][0] - va).abs() < 1e-9);
        assert!((s[1][1] - vb).abs() < 1e-9);
        assert!((s[0][1] - c).abs() < 1e-9);
        assert!((s[1][0] - c).abs() < 1e-9);
        if let Ok(r) = delong_test(&a, &b, &labels) {
            assert_eq!(r.z.abs() > 1.96, r.p < 0.05, "z {} p {}", r.z, r.p);
            assert!((0.0..=1.0).contains(&r.p));
        }
    }
}

#[test]
fn per_class_delong_is_corrected_by_class_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 30;
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let a = Tensor::from_vec(&[n, 3], (0..3 * n).map(|_| rng.gen()).collect()).unwrap();
    let b = Tensor::from_vec(&[n, 3], (0..3 * n).map(|_| rng.gen()).collect()).unwrap();
    let res = delong_per_class(&a, &b, &labels).unwrap();
    assert_eq!(res.len(), 3);
    for r in res {
        assert_eq!(r.p_corrected.unwrap(), (3.0 * r.p).min(1.0));
    }
}

fn binary_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-100.0f64..100.0, n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(|(s, mut l)| {
                l[0] = true;
                l[1] = false;
                (s, l)
            })
    })
}

proptest! {
    #[test]
    fn auc_invariant_under_monotone_transform((s, l) in binary_strategy(), k in 0.1f64..3.0) {
        let t: Vec<f64> = s.iter().map(|v| (v / 50.0).tanh() * k + (v / 100.0).powi(3)).collect();
        prop_assert_eq!(binary_auc(&s, &l).unwrap().auc, binary_auc(&t, &l).unwrap().auc);
    }

    #[test]
    fn roc_area_equals_auc((s, l) in binary_strategy()) {
        let c = RocCurve::from_scores(&s, &l).unwrap();
        prop_assert!((c.area() - binary_auc(&s, &l).unwrap().auc).abs() < 1e-12);
        prop_assert!(c.fpr.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(c.tpr.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn micro_auc_invariant_under_relabeling(
        n in 3usize..25,
        seed in any::<u64>(),
        perm_idx in 0usize..6,
    ) {
        const PERMS: [[usize; 3]; 6] = [[0,1,2],[0,2,1],[1,0,2],[1,2,0],[2,0,1],[2,1,0]];
        let perm = PERMS[perm_idx];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        labels[0] = 0;
        let data: Vec<f64> = (0..3 * n).map(|_| rng.gen()).collect();
        let scores = Tensor::from_vec(&[n, 3], data.clone()).unwrap();
        // column c moves to perm[c]; label l becomes perm[l]
        let mut moved = vec![0.0; 3 * n];
        for i in 0..n {
            for c in 0..3 {
                moved[i * 3 + perm[c]] = data[i * 3 + c];
            }
        }
        let relabeled: Vec<usize> = labels.iter().map(|&l| perm[l]).collect();
        let permuted = Tensor::from_vec(&[n, 3], moved).unwrap();
        prop_assert_eq!(
            micro_ovr_auc(&scores, &labels).unwrap().auc,
            micro_ovr_auc(&permuted, &relabeled).unwrap().auc
        );
    }

    #[test]
    fn bca_affine_equivariance(seed in any::<u64>(), scale in 0.5f64..4.0, shift in -10.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..20).map(|_| rng.gen::<f64>().powi(2)).collect();
        let mean = |idx: &[usize]| idx.iter().map(|&i| x[i]).sum::<f64>() / idx.len() as f64;
        let (_, base) = bca_ci(20, |i| Some(mean(i)), 300, 0.1, &mut ChaCha8Rng::seed_from_u64(seed ^ 1)).unwrap();
        let (_, moved) = bca_ci(20, |i| Some(scale * mean(i) + shift), 300, 0.1, &mut ChaCha8Rng::seed_from_u64(seed ^ 1)).unwrap();
        prop_assert!((moved.low - (scale * base.low + shift)).abs() < 1e-9 * (1.0 + shift.abs()));
        prop_assert!((moved.high - (scale * base.high + shift)).abs() < 1e-9 * (1.0 + shift.abs()));
    }

    #[test]
    fn delong_antisymmetric((a, l) in binary_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = a.iter().map(|v| v + rng.gen_range(-50.0..50.0)).collect();
        if let (Ok(ab), Ok(ba)) = (delong_test(&a, &b, &l), delong_test(&b, &a, &l)) {
            prop_assert_eq!(ab.z, -ba.z);
            prop_assert_eq!(ab.p, ba.p);
            prop_assert!(ab.z == 0.0 || ab.z.signum() == (ab.auc_a - ab.auc_b).signum());
        }
    }
}
