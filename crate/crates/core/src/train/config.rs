use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blur::DEFAULT_N_STEP;
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::net::{NetworkConfig, Variant};

/// Optimization hyperparameters. Also the on-disk JSON training config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    /// Smallest drop in validation loss that counts as an improvement.
    pub plateau_min_improvement: f64,
    /// Standard deviation of the angle noise, in degrees.
    pub sigma_noise: f64,
    pub seed: u64,
    pub variant: Variant,
    pub weights: LossWeights,
    /// Recorded for reference; the polar re-blur uses the exact box kernel.
    pub n_step: usize,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    /// Fraction of sharp identities held out when the manifest has no `val` rows.
    pub val_fraction: f64,
    pub network: NetworkConfig,
    /// Dataset manifest (file or directory). The CLI may override it.
    pub manifest: Option<PathBuf>,
    /// Directory receiving the log and checkpoints. The CLI may override it.
    pub output_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 4,
            lr_initial: 1e-4,
            plateau_patience: 5,
            plateau_factor: 0.5,
            plateau_min_improvement: 1e-5,
            sigma_noise: 5.0,
            seed: 0,
            variant: Variant::Base,
            weights: LossWeights::default(),
            n_step: DEFAULT_N_STEP,
            grad_clip: Some(1.0),
            val_fraction: 0.1,
            network: NetworkConfig::default(),
            manifest: None,
            output_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("train config: {m}")));
        if self.epochs == 0
            || self.batch_size == 0
            || self.plateau_patience == 0
            || self.n_step == 0
        {
            return bad("epochs, batch_size, plateau_patience and n_step must be positive".into());
        }
        if !(self.lr_initial > 0.0 && self.lr_initial.is_finite()) {
            return bad(format!(
                "lr_initial must be positive, got {}",
                self.lr_initial
            ));
        }
        if !(0.0..1.0).contains(&self.plateau_factor) {
            return bad(format!(
                "plateau_factor must be in [0, 1), got {}",
                self.plateau_factor
            ));
        }
        if !(self.sigma_noise >= 0.0) {
            return bad(format!(
                "sigma_noise must be >= 0, got {}",
                self.sigma_noise
            ));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad(format!(
                "val_fraction must be in [0, 1), got {}",
                self.val_fraction
            ));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad(format!("grad_clip must be positive, got {c}"));
            }
        }
        self.weights.validate()?;
        self.network.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let cfg: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
