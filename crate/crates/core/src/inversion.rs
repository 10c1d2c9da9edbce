//! Frequency-domain inversion of the polar blur.
//!
//! Forward transforms are unscaled; inverse transforms divide by `R·Θ`, so
//! `ifft2(fft2(x)) == x`.

pub use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::blur::KernelSpectrum;
use crate::error::{Error, Result};
use crate::polar::PolarImage;

/// Default regularizer added to the kernel spectrum before dividing.
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub epsilon: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

fn transform(buf: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    assert_eq!(buf.len(), rows * cols, "buffer is not rows x cols");
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (
            planner.plan_fft_inverse(cols),
            planner.plan_fft_inverse(rows),
        )
    } else {
        (
            planner.plan_fft_forward(cols),
            planner.plan_fft_forward(rows),
        )
    };
    row_fft.process(buf);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = buf[r * cols + c];
        }
        col_fft.process(&mut column);
        for r in 0..rows {
            buf[r * cols + c] = column[r];
        }
    }
    if inverse {
        let scale = 1.0 / (rows * cols) as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }
}

/// In-place unscaled forward 2D DFT of a row-major `rows × cols` buffer.
pub fn fft2(buf: &mut [Complex64], rows: usize, cols: usize) {
    transform(buf, rows, cols, false);
}

/// In-place inverse 2D DFT including the `1/(rows·cols)` normalization.
pub fn ifft2(buf: &mut [Complex64], rows: usize, cols: usize) {
    transform(buf, rows, cols, true);
}

/// Complex result of inverting a single `R×Θ` plane.
pub fn invert_plane(plane: &[f64], spectrum: &KernelSpectrum, epsilon: f64) -> Vec<Complex64> {
    let g = spectrum.geometry();
    let (rows, cols) = (g.radial_samples, g.angular_samples);
    let mut buf: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut buf, rows, cols);
    for (v, k) in buf.iter_mut().zip(spectrum.values()) {
        *v /= k + epsilon;
    }
    ifft2(&mut buf, rows, cols);
    buf
}

/// Deconvolves every channel of `gp` by the kernel spectrum.
///
/// The output is the raw real part; callers that feed it onward clamp it
/// with [`PolarImage::clamp_intermediate`].
pub fn invert(
    gp: &PolarImage,
    spectrum: &KernelSpectrum,
    cfg: &InversionConfig,
) -> Result<PolarImage> {
    if gp.geometry() != spectrum.geometry() {
        return Err(Error::GeometryMismatch(format!(
            "image geometry {:?} differs from kernel geometry {:?}",
            gp.geometry(),
            spectrum.geometry()
        )));
    }
    let mut out = PolarImage::zeros(*gp.geometry(), gp.channels());
    for c in 0..gp.channels() {
        let re: Vec<f64> = invert_plane(&gp.plane(c), spectrum, cfg.epsilon)
            .into_iter()
            .map(|v| v.re)
            .collect();
        out.set_plane(c, &re);
    }
    Ok(out)
}
