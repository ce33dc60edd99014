use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::volume::{RawVolume, BACKGROUND};
use crate::error::{Error, Result};
use crate::ndcore::Tensor;

/// Intensity range fitted on a set of cases, remembering which cases it saw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormConstants {
    pub p_plus_min: f32,
    pub p_max: f32,
    pub source_cases: BTreeSet<String>,
}

impl NormConstants {
    /// Fits min/max over the non-background pixels of `cases`.
    pub fn fit<'a>(cases: impl IntoIterator<Item = (&'a str, &'a RawVolume)>) -> Result<Self> {
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        let mut source_cases = BTreeSet::new();
        for (id, vol) in cases {
            for p in vol.foreground() {
                lo = lo.min(p);
                hi = hi.max(p);
            }
            source_cases.insert(id.to_string());
        }
        if source_cases.is_empty() {
            return Err(Error::Data("no cases to fit normalization constants".into()));
        }
        Self::new(lo, hi, source_cases)
    }

    pub fn new(p_plus_min: f32, p_max: f32, source_cases: BTreeSet<String>) -> Result<Self> {
        if !(p_max > p_plus_min) {
            return Err(Error::DegenerateRange {
                p_min: p_plus_min as f64,
                p_max: p_max as f64,
            });
        }
        Ok(Self {
            p_plus_min,
            p_max,
            source_cases,
        })
    }

    /// Fails if any of `ids` contributed to these constants.
    pub fn ensure_excludes<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for id in ids {
            if self.source_cases.contains(id) {
                return Err(Error::Data(format!(
                    "normalization constants were fitted on held-out case {id}"
                )));
            }
        }
        Ok(())
    }
}

/// Background goes to 0; everything else maps affinely from
/// `[p_plus_min, p_max]` onto `[0, 1]` with clamping.
pub fn normalize(raw: &RawVolume, c: &NormConstants) -> Result<Tensor<f32>> {
    if !(c.p_max > c.p_plus_min) {
        return Err(Error::DegenerateRange {
            p_min: c.p_plus_min as f64,
            p_max: c.p_max as f64,
        });
    }
    let (lo, span) = (c.p_plus_min as f64, (c.p_max - c.p_plus_min) as f64);
    Ok(raw.pixels().map(|p| {
        if p == BACKGROUND {
            0.0
        } else {
            ((p as f64 - lo) / span).clamp(0.0, 1.0) as f32
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vol(values: &[f32]) -> RawVolume {
        let mut data = vec![BACKGROUND; 8 * 8 * 11];
        data[..values.len()].copy_from_slice(values);
        RawVolume::new(Tensor::from_vec(&[8, 8, 11], data).unwrap()).unwrap()
    }

    #[test]
    fn endpoints_background_and_midpoint() {
        let v = vol(&[-100.0, 300.0, 100.0, 500.0, -400.0]);
        let c = NormConstants::new(-100.0, 300.0, BTreeSet::new()).unwrap();
        let n = normalize(&v, &c).unwrap();
        assert_eq!(&n.data()[..5], &[0.0, 1.0, 0.5, 1.0, 0.0]);
        assert_eq!(n.data()[5], 0.0);
        assert!(n.data().iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn fit_ignores_background_and_tracks_sources() {
        let a = vol(&[10.0, 20.0]);
        let b = vol(&[-5.0, 15.0]);
        let c = NormConstants::fit([("a", &a), ("b", &b)]).unwrap();
        assert_eq!((c.p_plus_min, c.p_max), (-5.0, 20.0));
        assert!(c.ensure_excludes(["x", "y"]).is_ok());
        assert!(c.ensure_excludes(["b"]).is_err());
    }

    #[test]
    fn degenerate_range() {
        let a = vol(&[7.0]);
        assert!(matches!(
            NormConstants::fit([("a", &a)]),
            Err(Error::DegenerateRange { .. })
        ));
    }
}
