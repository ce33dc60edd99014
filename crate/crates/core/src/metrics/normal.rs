//! Standard normal distribution function and its inverse.

use statrs::distribution::{ContinuousCDF, Normal};

fn standard() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Φ(x).
pub fn cdf(x: f64) -> f64 {
    standard().cdf(x)
}

/// Upper tail 1 − Φ(x), without cancellation for large x.
pub fn sf(x: f64) -> f64 {
    standard().sf(x)
}

/// Φ⁻¹(p) for p in (0, 1); ±∞ at the endpoints.
pub fn inv_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    standard().inverse_cdf(p)
}
