use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::volume::{Label, RawVolume, BACKGROUND};
use crate::error::{Error, Result};
use crate::model::{energies_kev, ENERGY_LEVELS};
use crate::ndcore::Tensor;
use crate::rng::{self, tag};

/// Attenuation versus energy: `HU(E) = a·E^(−b) + c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralCurve {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SpectralCurve {
    pub fn hu(&self, kev: f64) -> f64 {
        self.a * kev.powf(-self.b) + self.c
    }

    pub fn sample(&self) -> [f64; ENERGY_LEVELS] {
        energies_kev().map(|e| self.hu(e))
    }
}

/// One synthetic case: an elliptical node on a background canvas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub label: Label,
    /// `[height, width]` in pixels.
    pub canvas: [usize; 2],
    /// Semi-axes `[vertical, horizontal]` in pixels.
    pub axes: [f64; 2],
    /// Offset of the ellipse center from the canvas center, `[dy, dx]`.
    #[serde(default)]
    pub offset: [f64; 2],
    pub curve: SpectralCurve,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let [h, w] = self.canvas;
        if h < 8 || w < 8 {
            return Err(Error::Config(format!("canvas {h}x{w} is smaller than 8x8")));
        }
        let [ay, ax] = self.axes;
        if !(ay >= 1.0 && ax >= 1.0) {
            return Err(Error::Config(format!("ellipse axes {:?} must be at least 1 pixel", self.axes)));
        }
        let fits = |half_extent: f64, off: f64, len: usize| {
            let mid = (len - 1) as f64 / 2.0;
            mid + off.abs() + half_extent <= (len - 1) as f64 + 0.5
        };
        if !fits(ay, self.offset[0], h) || !fits(ax, self.offset[1], w) {
            return Err(Error::Config(format!(
                "ellipse axes {:?} at offset {:?} exceed the {h}x{w} canvas",
                self.axes, self.offset
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Config(format!("noise sigma {} must be finite and ≥ 0", self.noise_sigma)));
        }
        let c = self.curve;
        if ![c.a, c.b, c.c].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("spectral curve parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn inside(&self, y: usize, x: usize) -> bool {
        let [h, w] = self.canvas;
        let dy = y as f64 - ((h - 1) as f64 / 2.0 + self.offset[0]);
        let dx = x as f64 - ((w - 1) as f64 / 2.0 + self.offset[1]);
        (dy / self.axes[0]).powi(2) + (dx / self.axes[1]).powi(2) <= 1.0
    }
}

/// Renders the node: every pixel inside the ellipse carries the spectral curve
/// plus independent Gaussian noise per channel; the rest is background.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<RawVolume> {
    spec.validate()?;
    let [h, w] = spec.canvas;
    let curve = spec.curve.sample();
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = rng::stream(spec.seed, &[tag::PHANTOM]);
    let mut data = vec![BACKGROUND; h * w * ENERGY_LEVELS];
    for y in 0..h {
        for x in 0..w {
            if !spec.inside(y, x) {
                continue;
            }
            let px = &mut data[(y * w + x) * ENERGY_LEVELS..(y * w + x + 1) * ENERGY_LEVELS];
            for (v, mu) in px.iter_mut().zip(curve) {
                let s = mu + noise.sample(&mut rng);
                // keep clear of the sentinel value
                *v = (s as f32).max(BACKGROUND + 1.0);
            }
        }
    }
    RawVolume::new(Tensor::from_vec(&[h, w, ENERGY_LEVELS], data)?)
}

/// Per-class spectral template with per-case jitter (standard deviations).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassTemplate {
    pub label: Label,
    pub curve: SpectralCurve,
    #[serde(default = "no_jitter")]
    pub jitter: SpectralCurve,
}

fn no_jitter() -> SpectralCurve {
    SpectralCurve { a: 0.0, b: 0.0, c: 0.0 }
}

/// Description of a whole synthetic cohort, as read from a phantom spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSetSpec {
    pub canvas: [usize; 2],
    /// Range of each semi-axis, drawn uniformly per case.
    pub axes_range: [f64; 2],
    /// Maximum center offset in pixels along each axis.
    #[serde(default)]
    pub center_jitter: f64,
    pub noise_sigma: f64,
    pub classes: Vec<ClassTemplate>,
}

/// A generated case.
#[derive(Clone, Debug, PartialEq)]
pub struct PhantomCase {
    pub case_id: String,
    pub label: Label,
    pub volume: RawVolume,
}

impl PhantomSetSpec {
    /// Classes far apart relative to the noise at every energy.
    pub fn separable() -> Self {
        let t = |label, a| ClassTemplate {
            label,
            curve: SpectralCurve { a, b: 1.5, c: 20.0 },
            jitter: SpectralCurve { a: 0.02 * a, b: 0.0, c: 5.0 },
        };
        Self {
            canvas: [32, 32],
            axes_range: [7.0, 12.0],
            center_jitter: 2.0,
            noise_sigma: 8.0,
            classes: vec![t(Label::N0, 4.0e4), t(Label::NLow, 9.0e4), t(Label::NHeavy, 1.6e5)],
        }
    }

    /// Classes whose curves cross near 90 keV and whose per-case offsets
    /// overlap at any single energy; they separate through the slope of the
    /// curve across energies.
    pub fn ambiguous() -> Self {
        let cross = 90.0f64;
        let t = |label, a: f64| {
            let base = 300.0;
            let c = base - a * cross.powf(-1.5);
            ClassTemplate {
                label,
                curve: SpectralCurve { a, b: 1.5, c },
                jitter: SpectralCurve { a: 0.25 * a, b: 0.0, c: 60.0 },
            }
        };
        Self {
            canvas: [32, 32],
            axes_range: [6.0, 12.0],
            center_jitter: 3.0,
            noise_sigma: 40.0,
            classes: vec![t(Label::N0, 4.0e4), t(Label::NLow, 6.5e4), t(Label::NHeavy, 9.0e4)],
        }
    }

    pub fn template(&self, label: Label) -> Result<&ClassTemplate> {
        self.classes
            .iter()
            .find(|t| t.label == label)
            .ok_or_else(|| Error::Config(format!("no template for class {label}")))
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.axes_range;
        if !(lo >= 1.0 && hi >= lo) {
            return Err(Error::Config(format!("invalid axes range {:?}", self.axes_range)));
        }
        let mut seen = Vec::new();
        for t in &self.classes {
            if seen.contains(&t.label) {
                return Err(Error::Config(format!("class {} has two templates", t.label)));
            }
            seen.push(t.label);
            let j = t.jitter;
            if [j.a, j.b, j.c].iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Config(format!("jitter for class {} must be ≥ 0", t.label)));
            }
        }
        // the largest ellipse must fit wherever its center lands
        PhantomSpec {
            label: Label::N0,
            canvas: self.canvas,
            axes: [hi, hi],
            offset: [self.center_jitter; 2],
            curve: no_jitter(),
            noise_sigma: self.noise_sigma,
            seed: 0,
        }
        .validate()
    }

    fn case_spec(
        &self,
        label: Label,
        seed: u64,
        axes: [f64; 2],
        offset: [f64; 2],
        delta: SpectralCurve,
    ) -> Result<PhantomSpec> {
        let t = self.template(label)?;
        Ok(PhantomSpec {
            label,
            canvas: self.canvas,
            axes,
            offset,
            curve: SpectralCurve {
                a: t.curve.a + delta.a,
                b: t.curve.b + delta.b,
                c: t.curve.c + delta.c,
            },
            noise_sigma: self.noise_sigma,
            seed,
        })
    }

    /// Draws the per-case spec for `case_id` from its own stream.
    pub fn draw_case(&self, case_id: &str, label: Label, seed: u64) -> Result<PhantomSpec> {
        let t = self.template(label)?;
        let case_seed = rng::hash_str(case_id) ^ seed.rotate_left(17);
        let mut r = rng::stream(seed, &[tag::PHANTOM, rng::hash_str(case_id)]);
        let std = |s: f64, r: &mut rng::StreamRng| -> f64 {
            let z: f64 = rand_distr::StandardNormal.sample(r);
            s * z
        };
        let [lo, hi] = self.axes_range;
        let axes = [r.gen_range(lo..=hi), r.gen_range(lo..=hi)];
        let cj = self.center_jitter;
        let offset = if cj > 0.0 {
            [r.gen_range(-cj..=cj), r.gen_range(-cj..=cj)]
        } else {
            [0.0, 0.0]
        };
        let delta = SpectralCurve {
            a: std(t.jitter.a, &mut r),
            b: std(t.jitter.b, &mut r),
            c: std(t.jitter.c, &mut r),
        };
        self.case_spec(label, case_seed, axes, offset, delta)
    }

    /// Generates `n_per_class[i]` cases of class `i`, ids `case-00001`… in
    /// class order. Each case uses its own stream, so the result does not
    /// depend on generation order.
    pub fn generate(&self, n_per_class: [usize; 3], seed: u64) -> Result<Vec<PhantomCase>> {
        self.validate()?;
        if let Some(i) = n_per_class.iter().position(|&n| n == 0) {
            return Err(Error::Config(format!("class {} has zero cases requested", Label::ALL[i])));
        }
        let mut out = Vec::with_capacity(n_per_class.iter().sum());
        let mut serial = 0usize;
        for (label, &n) in Label::ALL.iter().zip(&n_per_class) {
            for _ in 0..n {
                serial += 1;
                let case_id = format!("case-{serial:05}");
                let spec = self.draw_case(&case_id, *label, seed)?;
                out.push(PhantomCase {
                    volume: generate_phantom(&spec)?,
                    case_id,
                    label: *label,
                });
            }
        }
        Ok(out)
    }
}
