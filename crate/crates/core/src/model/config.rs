use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of virtual monochromatic energy levels, 40 to 140 keV in 10 keV steps.
pub const ENERGY_LEVELS: usize = 11;

/// Energies (keV) of the input channels, in channel order.
pub fn energies_kev() -> [f64; ENERGY_LEVELS] {
    std::array::from_fn(|i| 40.0 + 10.0 * i as f64)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub input_hw: usize,
    pub energy_channels: usize,
    pub embed_channels: usize,
    pub block2_channels: usize,
    pub block3_channels: usize,
    /// Output width of the first excitation layer (`C/r`).
    pub se_bottleneck: usize,
    pub num_classes: usize,
    /// 0 or 1.
    pub num_virtual: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            input_hw: 176,
            energy_channels: ENERGY_LEVELS,
            embed_channels: 16,
            block2_channels: 12,
            block3_channels: 12,
            se_bottleneck: 4,
            num_classes: 3,
            num_virtual: 1,
        }
    }
}

impl NetworkConfig {
    /// Same topology on a small square input, used for gradient checks.
    pub fn miniature(input_hw: usize) -> Self {
        Self {
            input_hw,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("energy_channels", self.energy_channels),
            ("embed_channels", self.embed_channels),
            ("block2_channels", self.block2_channels),
            ("block3_channels", self.block3_channels),
            ("se_bottleneck", self.se_bottleneck),
            ("num_classes", self.num_classes),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.se_bottleneck > self.embed_channels {
            return Err(Error::Config(format!(
                "se_bottleneck {} exceeds embed_channels {}",
                self.se_bottleneck, self.embed_channels
            )));
        }
        if self.num_virtual > 1 {
            return Err(Error::Config(format!(
                "num_virtual must be 0 or 1, got {}",
                self.num_virtual
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        // conv3 sees ceil(hw/2) pixels and needs at least a 3x3 window.
        if self.input_hw < 5 {
            return Err(Error::Config(format!(
                "input_hw {} too small for two stride-2 3x3 blocks",
                self.input_hw
            )));
        }
        Ok(())
    }

    /// Spatial size after conv1, conv2, conv3.
    pub fn spatial_trace(&self) -> [usize; 3] {
        let h1 = self.input_hw;
        let h2 = h1.div_ceil(2);
        [h1, h2, h2.div_ceil(2)]
    }

    pub fn embedding_dim(&self) -> usize {
        self.block3_channels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        NetworkConfig::default().validate().unwrap();
        assert_eq!(NetworkConfig::default().spatial_trace(), [176, 88, 44]);
        assert_eq!(NetworkConfig::miniature(8).spatial_trace(), [8, 4, 2]);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = NetworkConfig {
            se_bottleneck: 17,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = NetworkConfig {
            num_virtual: 2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(NetworkConfig::miniature(4).validate().is_err());
    }

    #[test]
    fn energy_grid() {
        let e = energies_kev();
        assert_eq!(e[0], 40.0);
        assert_eq!(e[10], 140.0);
    }
}
