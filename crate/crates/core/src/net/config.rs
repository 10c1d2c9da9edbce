use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blur::DEFAULT_THETA_MAX;
use crate::error::{Error, Result};

/// Which pipeline a model runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Inversion at the given angle followed by the refinement cascade.
    #[default]
    Base,
    /// Angle detection and re-inversion in front of the cascade.
    Ad,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Base => "base",
            Variant::Ad => "ad",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(Variant::Base),
            "ad" => Ok(Variant::Ad),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant {other:?} (expected base or ad)"
            ))),
        }
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Number of refinement stages `T`.
    pub stages: usize,
    /// Feature width `F` of the refinement stages.
    pub base_width: usize,
    pub resblocks_per_stage: usize,
    /// Output widths of the stride-2 angle-detector convolutions.
    pub ad_widths: Vec<usize>,
    pub ad_mlp_hidden: usize,
    /// Image channels `C` (1 or 3).
    pub input_channels: usize,
    /// Largest admissible blur angle in degrees.
    pub theta_max: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            stages: 3,
            base_width: 48,
            resblocks_per_stage: 2,
            ad_widths: vec![64, 128, 256, 256],
            ad_mlp_hidden: 64,
            input_channels: 3,
            theta_max: DEFAULT_THETA_MAX,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("network config: {m}")));
        if self.stages == 0 {
            return bad("stages must be >= 1");
        }
        if self.base_width == 0 || self.ad_mlp_hidden == 0 {
            return bad("widths must be positive");
        }
        if self.ad_widths.is_empty() || self.ad_widths.contains(&0) {
            return bad("ad_widths must be a non-empty list of positive widths");
        }
        if !(self.input_channels == 1 || self.input_channels == 3) {
            return bad("input_channels must be 1 or 3");
        }
        if !(self.theta_max > 0.5 && self.theta_max.is_finite()) {
            return bad("theta_max must exceed 0.5");
        }
        Ok(())
    }
}
