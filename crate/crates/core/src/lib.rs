//! Rotational motion deblurring in the polar domain.
//!
//! A rotational blur about a known center becomes a 1D circular convolution
//! along the angular axis once the image is resampled to polar coordinates.
//! The toolkit builds on that:
//!
//! - [`polar`]: Cartesian ⇄ polar resampling and the inscribed-circle ROI.
//! - [`blur`]: the arc-averaging blur, its polar box kernel and spectrum.
//! - [`inversion`]: regularized frequency-domain inversion.
//! - [`autodiff`]: a small reverse-mode engine with the operators the
//!   network and losses need.
//! - [`net`]: the cascaded residual refinement network, the angle detector,
//!   both pipelines and the checkpoint format.
//! - [`losses`], [`train`]: the training objective and loop.
//! - [`datagen`]: procedural patterns, blurred pairs and manifests.
//! - [`eval`]: ROI metrics and test-set reports.
//! - [`cli`]: the `carnet` command.
//!
//! ```
//! use carnet::blur::{blur_cartesian, BlurSpec};
//! use carnet::datagen::generate_pattern;
//! use carnet::eval::psnr_roi;
//! use carnet::net::{inversion, observe};
//! use carnet::polar::{pct, PolarGeometry};
//!
//! let sharp = generate_pattern("star", 0, 64).unwrap();
//! let blurred = blur_cartesian(&sharp, &BlurSpec::new(10.0).unwrap()).unwrap();
//! let geom = PolarGeometry::default_for(64, 64).with_angular_samples(256);
//! let f0 = inversion(&observe(&blurred, &geom, 1).unwrap(), 10.0).unwrap();
//! let restored = pct(&f0, 64, 64).clamped();
//! assert!(psnr_roi(&restored, &sharp).unwrap() > 0.0);
//! ```

pub mod autodiff;
pub mod blur;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod image;
pub mod inversion;
pub mod losses;
pub mod net;
pub mod polar;
pub mod train;

pub use error::{Error, Result};
