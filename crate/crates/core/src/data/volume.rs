use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ENERGY_LEVELS;
use crate::ndcore::Tensor;

/// Raw intensity marking pixels outside the region of interest.
pub const BACKGROUND: f32 = -2000.0;

/// Nodal burden class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "N0")]
    N0,
    #[serde(rename = "N1-2")]
    NLow,
    #[serde(rename = "N3plus")]
    NHeavy,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::N0, Label::NLow, Label::NHeavy];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Data(format!("class index {i} out of range")))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::N0 => "N0",
            Label::NLow => "N1-2",
            Label::NHeavy => "N3plus",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Data(format!("unknown label {s:?}")))
    }
}

/// Unnormalized `[h, w, 11]` stack in HU-like units.
#[derive(Clone, Debug, PartialEq)]
pub struct RawVolume {
    pixels: Tensor<f32>,
}

impl RawVolume {
    pub fn new(pixels: Tensor<f32>) -> Result<Self> {
        pixels.expect_rank(3, "raw volume")?;
        let &[h, w, c] = pixels.shape() else { unreachable!() };
        if c != ENERGY_LEVELS {
            return Err(Error::Data(format!("raw volume has {c} channels, expected {ENERGY_LEVELS}")));
        }
        if h < 8 || w < 8 {
            return Err(Error::Data(format!("raw volume {h}x{w} is smaller than 8x8")));
        }
        if !pixels.all_finite() {
            return Err(Error::NonFinite("raw volume pixel".into()));
        }
        if pixels.data().iter().all(|&p| p == BACKGROUND) {
            return Err(Error::Data("raw volume is entirely background".into()));
        }
        Ok(Self { pixels })
    }

    pub fn pixels(&self) -> &Tensor<f32> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Tensor<f32> {
        self.pixels
    }

    pub fn height(&self) -> usize {
        self.pixels.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.pixels.shape()[1]
    }

    /// Non-background intensities.
    pub fn foreground(&self) -> impl Iterator<Item = f32> + '_ {
        self.pixels.data().iter().copied().filter(|&p| p != BACKGROUND)
    }
}

/// A normalized `[hw, hw, 11]` case ready for the network.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVolume {
    pub pixels: Tensor<f32>,
    pub case_id: String,
    pub label: Label,
}
