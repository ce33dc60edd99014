use rand::Rng;
use serde::{Deserialize, Serialize};

use super::resize::sample_bilinear;
use crate::error::Result;
use crate::ndcore::Tensor;

pub const MAX_ROTATION_DEG: f64 = 18.0;
pub const FLIP_PROB: f64 = 0.5;
pub const ROTATE_PROB: f64 = 0.5;

/// One geometric transform, shared by every channel of a case.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentPlan {
    pub flip: bool,
    pub rotation_deg: Option<f64>,
}

impl AugmentPlan {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Always consumes three draws, so the stream position does not depend on
    /// which branches fire.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let flip = rng.gen_bool(FLIP_PROB);
        let rotate = rng.gen_bool(ROTATE_PROB);
        let theta = rng.gen_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG);
        Self {
            flip,
            rotation_deg: rotate.then_some(theta),
        }
    }

    pub fn is_identity(&self) -> bool {
        !self.flip && self.rotation_deg.is_none()
    }

    pub fn apply(&self, vol: &Tensor<f32>) -> Result<Tensor<f32>> {
        let mut out = if self.flip { flip_horizontal(vol)? } else { vol.clone() };
        if let Some(deg) = self.rotation_deg {
            out = rotate(&out, deg, 0.0)?;
        }
        Ok(out)
    }
}

/// Random flip and rotation of a `[h,w,c]` volume.
pub fn augment<R: Rng + ?Sized>(vol: &Tensor<f32>, rng: &mut R) -> Result<Tensor<f32>> {
    AugmentPlan::sample(rng).apply(vol)
}

/// Mirrors columns (left-right).
pub fn flip_horizontal(vol: &Tensor<f32>) -> Result<Tensor<f32>> {
    vol.expect_rank(3, "volume")?;
    let &[h, w, c] = vol.shape() else { unreachable!() };
    let mut out = vol.clone();
    let (src, dst) = (vol.data(), out.data_mut());
    for y in 0..h {
        for x in 0..w {
            let a = (y * w + x) * c;
            let b = (y * w + (w - 1 - x)) * c;
            dst[a..a + c].copy_from_slice(&src[b..b + c]);
        }
    }
    Ok(out)
}

/// Counter-clockwise rotation about the image center with bilinear
/// resampling; samples falling outside the frame take `fill`.
pub fn rotate(vol: &Tensor<f32>, degrees: f64, fill: f32) -> Result<Tensor<f32>> {
    vol.expect_rank(3, "volume")?;
    let &[h, w, c] = vol.shape() else { unreachable!() };
    let (sin, cos) = degrees.to_radians().sin_cos();
    let (cy, cx) = ((h - 1) as f64 / 2.0, (w - 1) as f64 / 2.0);
    let (ymax, xmax) = ((h - 1) as f64, (w - 1) as f64);
    let mut out = Tensor::full(&[h, w, c], fill);
    let od = out.data_mut();
    for i in 0..h {
        for j in 0..w {
            // Inverse map: rotate the output coordinate back by −θ. Rows grow
            // downward, so a visual counter-clockwise turn flips the sign of y.
            let (dy, dx) = (i as f64 - cy, j as f64 - cx);
            let sx = cos * dx - sin * dy + cx;
            let sy = sin * dx + cos * dy + cy;
            const EDGE: f64 = 1e-9;
            if sy < -EDGE || sx < -EDGE || sy > ymax + EDGE || sx > xmax + EDGE {
                continue;
            }
            let base = (i * w + j) * c;
            sample_bilinear(vol, sy.clamp(0.0, ymax), sx.clamp(0.0, xmax), &mut od[base..base + c]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(h: usize, w: usize, c: usize) -> Tensor<f32> {
        Tensor::from_vec(&[h, w, c], (0..h * w * c).map(|v| v as f32).collect()).unwrap()
    }

    fn blob(n: usize) -> Tensor<f32> {
        let mid = (n - 1) as f64 / 2.0;
        let mut data = Vec::with_capacity(n * n * 2);
        for y in 0..n {
            for x in 0..n {
                let r2 = (y as f64 - mid).powi(2) + (x as f64 - mid).powi(2);
                let g = (-r2 / (2.0 * 64.0)).exp();
                data.extend([g as f32, (0.5 * g) as f32]);
            }
        }
        Tensor::from_vec(&[n, n, 2], data).unwrap()
    }

    #[test]
    fn double_flip_is_identity() {
        let v = ramp(4, 5, 3);
        assert_eq!(flip_horizontal(&flip_horizontal(&v).unwrap()).unwrap(), v);
        assert_ne!(flip_horizontal(&v).unwrap(), v);
    }

    #[test]
    fn identity_plan() {
        let v = ramp(6, 6, 2);
        assert_eq!(AugmentPlan::identity().apply(&v).unwrap(), v);
        assert_eq!(rotate(&v, 0.0, 0.0).unwrap(), v);
    }

    #[test]
    fn quarter_turn_is_exact() {
        let v = ramp(5, 5, 1);
        let r = rotate(&v, 90.0, -1.0).unwrap();
        // Counter-clockwise: the top-right corner moves to the top-left.
        assert!((r.data()[0] - v.data()[4]).abs() < 1e-4);
        let back = rotate(&r, -90.0, -1.0).unwrap();
        assert!(back.max_abs_diff(&v) < 1e-3);
    }

    #[test]
    fn rotation_round_trip_on_smooth_blob() {
        let v = blob(48);
        for deg in [18.0, -11.0, 5.5] {
            let back = rotate(&rotate(&v, deg, 0.0).unwrap(), -deg, 0.0).unwrap();
            assert!(back.max_abs_diff(&v) < 0.02, "{deg}");
        }
    }

    #[test]
    fn channels_share_the_transform() {
        let v = blob(32);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let out = augment(&v, &mut rng).unwrap();
            for px in out.data().chunks(2) {
                assert!((px[1] - 0.5 * px[0]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sampling_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plans: Vec<AugmentPlan> = (0..4000).map(|_| AugmentPlan::sample(&mut rng)).collect();
        let flips = plans.iter().filter(|p| p.flip).count() as f64 / 4000.0;
        let rots: Vec<f64> = plans.iter().filter_map(|p| p.rotation_deg).collect();
        assert!((flips - 0.5).abs() < 0.03);
        assert!((rots.len() as f64 / 4000.0 - 0.5).abs() < 0.03);
        assert!(rots.iter().all(|d| d.abs() <= MAX_ROTATION_DEG));
    }
}
