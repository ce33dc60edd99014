use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Half-width of the Glorot/Xavier uniform range.
pub fn xavier_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Samples `shape` uniformly from `[-L, L]`, `L = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<T: Real, R: Rng + ?Sized>(
    fan_in: usize,
    fan_out: usize,
    shape: &[usize],
    rng: &mut R,
) -> Result<Tensor<T>> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::Config(format!(
            "xavier_uniform: fans must be positive, got ({fan_in}, {fan_out})"
        )));
    }
    let limit = xavier_limit(fan_in, fan_out);
    let dist = Uniform::new_inclusive(-limit, limit);
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::lit(dist.sample(rng))).collect();
    Tensor::from_vec(shape, data)
}

/// `lambda * Σ w²` over the given tensors, and its gradient `2·lambda·w` for each.
pub fn l2_penalty<T: Real>(weights: &[&Tensor<T>], lambda: T) -> (T, Vec<Tensor<T>>) {
    let two = T::lit(2.0);
    let penalty = lambda * weights.iter().map(|w| w.sum_squares()).sum::<T>();
    let grads = weights.iter().map(|w| w.map(|v| two * lambda * v)).collect();
    (penalty, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn limit_for_equal_fans_of_three_is_one() {
        assert_eq!(xavier_limit(3, 3), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let t: Tensor<f64> = xavier_uniform(3, 3, &[1000], &mut rng).unwrap();
        assert!(t.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn same_seed_same_tensor() {
        let a: Tensor<f32> = xavier_uniform(11, 16, &[11, 16], &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b: Tensor<f32> = xavier_uniform(11, 16, &[11, 16], &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
        let c: Tensor<f32> = xavier_uniform(11, 16, &[11, 16], &mut ChaCha8Rng::seed_from_u64(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_mean_near_zero() {
        let n = 100_000;
        let (fi, fo) = (20, 7);
        let l = xavier_limit(fi, fo);
        let t: Tensor<f64> = xavier_uniform(fi, fo, &[n], &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let mean = t.sum() / n as f64;
        // U[-L, L] has variance (2L)²/12.
        assert!(mean.abs() < 3.0 * 2.0 * l / (12.0 * n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn zero_fan_rejected() {
        let r: Result<Tensor<f32>> = xavier_uniform(0, 3, &[3], &mut ChaCha8Rng::seed_from_u64(1));
        assert!(r.is_err());
    }

    #[test]
    fn l2_closed_form() {
        let w = Tensor::<f64>::from_vec(&[1], vec![3.0]).unwrap();
        let (p, g) = l2_penalty(&[&w], 0.01);
        assert!((p - 0.09).abs() < 1e-15);
        assert!((g[0].data()[0] - 0.06).abs() < 1e-15);

        let (p, g) = l2_penalty(&[&w], 0.0);
        assert_eq!(p, 0.0);
        assert_eq!(g[0].data(), &[0.0]);

        let neg = w.map(|v| -v);
        assert_eq!(l2_penalty(&[&neg], 0.01).0, l2_penalty(&[&w], 0.01).0);
    }
}
