//! PSNR and SSIM restricted to the inscribed circular region of interest.

use crate::error::{Error, Result};
use crate::image::CartesianImage;
use crate::polar::roi_mask;

/// PSNR returned for identical images.
pub const PSNR_CAP_DB: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Normalized 1D Gaussian taps; the 2D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn check_shapes(x: &CartesianImage, y: &CartesianImage) -> Result<()> {
    if x.same_shape(y) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            x.height(),
            x.width(),
            x.channels(),
            y.height(),
            y.width(),
            y.channels()
        )))
    }
}

/// Peak-1 PSNR over all channels of the ROI pixels, capped at 100 dB.
pub fn psnr_roi(x: &CartesianImage, y: &CartesianImage) -> Result<f64> {
    check_shapes(x, y)?;
    let mask = roi_mask(x.height(), x.width());
    let c = x.channels();
    let mut sse = 0.0f64;
    let mut n = 0usize;
    for (i, &inside) in mask.iter().enumerate() {
        if !inside {
            continue;
        }
        for ch in 0..c {
            let d = x.data()[i * c + ch] as f64 - y.data()[i * c + ch] as f64;
            sse += d * d;
        }
        n += c;
    }
    let mse = sse / n as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Local SSIM statistics for every valid window position of two planes.
///
/// Returns the SSIM map of shape `(h − 10) × (w − 10)`; entry `(i, j)` is the
/// window centered at pixel `(j + 5, i + 5)`.
pub fn ssim_map(x: &[f64], y: &[f64], h: usize, w: usize) -> Result<Vec<f64>> {
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::ImageTooSmall(format!(
            "{h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let g = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let filter = |img: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut horiz = vec![0.0; h * ow];
        for r in 0..h {
            for c in 0..ow {
                horiz[r * ow + c] = (0..SSIM_WINDOW).map(|k| g[k] * img(r * w + c + k)).sum();
            }
        }
        let mut out = vec![0.0; oh * ow];
        for r in 0..oh {
            for c in 0..ow {
                out[r * ow + c] = (0..SSIM_WINDOW)
                    .map(|k| g[k] * horiz[(r + k) * ow + c])
                    .sum();
            }
        }
        out
    };
    let mu_x = filter(&|i| x[i]);
    let mu_y = filter(&|i| y[i]);
    let xx = filter(&|i| x[i] * x[i]);
    let yy = filter(&|i| y[i] * y[i]);
    let xy = filter(&|i| x[i] * y[i]);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    Ok((0..oh * ow)
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = xx[i] - mx * mx;
            let vy = yy[i] - my * my;
            let cxy = xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .collect())
}

/// Mean local SSIM on BT.601 luminance over windows centered inside the ROI.
///
/// Pixels outside the ROI are zeroed in both images first, so windows near
/// the rim never see the excluded corners.
pub fn ssim_roi(x: &CartesianImage, y: &CartesianImage) -> Result<f64> {
    check_shapes(x, y)?;
    let (h, w) = (x.height(), x.width());
    let mask = roi_mask(h, w);
    let masked = |img: &CartesianImage| -> Vec<f64> {
        img.luminance()
            .data()
            .iter()
            .zip(&mask)
            .map(|(&v, &inside)| if inside { v as f64 } else { 0.0 })
            .collect()
    };
    let map = ssim_map(&masked(x), &masked(y), h, w)?;
    let half = SSIM_WINDOW / 2;
    let ow = w - SSIM_WINDOW + 1;
    let (mut s, mut n) = (0.0, 0usize);
    for (i, v) in map.iter().enumerate() {
        let (r, c) = (i / ow + half, i % ow + half);
        if mask[r * w + c] {
            s += v;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::ImageTooSmall(format!(
            "no SSIM window centered inside the ROI of {h}x{w}"
        )));
    }
    Ok(s / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn psnr_examples() {
        let x = CartesianImage::filled(32, 32, 3, 0.4);
        assert_eq!(psnr_roi(&x, &x).unwrap(), 100.0);
        let y = CartesianImage::filled(32, 32, 3, 0.5);
        assert!((psnr_roi(&x, &y).unwrap() - 20.0).abs() < 1e-5);
        let mut z = x.clone();
        z.set(0, 0, 1, 1.0);
        z.set(31, 31, 0, 0.0);
        assert_eq!(psnr_roi(&x, &z).unwrap(), 100.0);
        let small = CartesianImage::filled(31, 32, 3, 0.4);
        assert_eq!(psnr_roi(&x, &small).unwrap_err().kind(), "shape_mismatch");
    }

    #[test]
    fn ssim_examples() {
        let checker = CartesianImage::from_fn(32, 32, 1, |x, y, _| ((x / 4 + y / 4) % 2) as f32);
        assert!((ssim_roi(&checker, &checker).unwrap() - 1.0).abs() < 1e-12);
        let inv = CartesianImage::from_fn(32, 32, 1, |x, y, _| 1.0 - checker.get(x, y, 0));
        assert!(ssim_roi(&checker, &inv).unwrap() < 0.0);
        let tiny = CartesianImage::filled(10, 10, 1, 0.0);
        assert_eq!(
            ssim_roi(&tiny, &tiny).unwrap_err().kind(),
            "image_too_small"
        );
    }

    #[test]
    fn constant_pair_closed_form() {
        let a = CartesianImage::filled(16, 16, 1, 0.0);
        let b = CartesianImage::filled(16, 16, 1, 1.0);
        let c1 = SSIM_K1 * SSIM_K1;
        let expect = c1 / (1.0 + c1);
        let map = ssim_map(
            &a.data().iter().map(|&v| v as f64).collect::<Vec<_>>(),
            &b.data().iter().map(|&v| v as f64).collect::<Vec<_>>(),
            16,
            16,
        )
        .unwrap();
        assert!(map.iter().all(|v| (v - expect).abs() < 1e-12));
    }

    #[test]
    fn corners_do_not_affect_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = CartesianImage::from_fn(32, 32, 3, |_, _, _| rng.random());
        let b = CartesianImage::from_fn(32, 32, 3, |_, _, _| rng.random());
        let mask = roi_mask(32, 32);
        let mut c = b.clone();
        for (i, &inside) in mask.iter().enumerate() {
            if !inside {
                for ch in 0..3 {
                    c.set(i % 32, i / 32, ch, rng.random());
                }
            }
        }
        assert_eq!(ssim_roi(&a, &b).unwrap(), ssim_roi(&a, &c).unwrap());
        assert_eq!(psnr_roi(&a, &b).unwrap(), psnr_roi(&a, &c).unwrap());
    }

    #[test]
    fn ssim_is_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = CartesianImage::from_fn(24, 24, 3, |_, _, _| rng.random());
        let b = CartesianImage::from_fn(24, 24, 3, |_, _, _| rng.random());
        let ab = ssim_roi(&a, &b).unwrap();
        let ba = ssim_roi(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&ab));
    }
}
