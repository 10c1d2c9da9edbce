//! Rotational blur: the Cartesian arc-averaging operator, its polar-domain
//! box-kernel equivalent, and the kernel spectrum used for inversion.
//!
//! The blur is one-sided: an impulse at angle φ spreads over `[φ, φ + θ]`.
//! Equivalently an output sample at φ averages the input over `[φ − θ, φ]`.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::CartesianImage;
use crate::inversion::fft2;
use crate::polar::{PolarGeometry, PolarImage};

pub const DEFAULT_THETA_MAX: f64 = 40.0;
pub const DEFAULT_N_STEP: usize = 15;

/// Physical blur parameters, angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlurSpec {
    pub theta_gt: f64,
    pub theta_initial: f64,
    pub theta_corrected: Option<f64>,
    pub theta_max: f64,
    pub center: (f64, f64),
    pub n_step: usize,
}

impl BlurSpec {
    /// A ground-truth blur about the image center with `θ_initial = θ_GT`.
    pub fn new(theta_gt: f64) -> Result<Self> {
        let spec = Self {
            theta_gt,
            theta_initial: theta_gt,
            theta_corrected: None,
            theta_max: DEFAULT_THETA_MAX,
            center: (0.5, 0.5),
            n_step: DEFAULT_N_STEP,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_n_step(mut self, n_step: usize) -> Self {
        self.n_step = n_step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_gt > 0.0 && self.theta_gt <= self.theta_max) {
            return Err(Error::InvalidArgument(format!(
                "theta_gt = {} outside (0, {}]",
                self.theta_gt, self.theta_max
            )));
        }
        if self.n_step == 0 {
            return Err(Error::InvalidArgument("n_step must be >= 1".into()));
        }
        if !self.theta_initial.is_finite() {
            return Err(Error::InvalidArgument("theta_initial is not finite".into()));
        }
        Ok(())
    }

    /// `θ_initial` clamped into the usable range `[0.5, θ_max]`.
    pub fn clamped_initial(&self) -> f64 {
        self.theta_initial.clamp(0.5, self.theta_max)
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta >= 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "blur angle {theta} must be >= 0"
        )))
    }
}

/// Averages `n_step` bilinear samples along each pixel's rotational arc.
///
/// Only `theta_gt`, `center` and `n_step` of the spec are used, and
/// `θ = 0` is accepted (the identity).
pub fn blur_cartesian(img: &CartesianImage, spec: &BlurSpec) -> Result<CartesianImage> {
    check_theta(spec.theta_gt)?;
    if spec.n_step == 0 {
        return Err(Error::InvalidArgument("n_step must be >= 1".into()));
    }
    let (h, w, chans) = (img.height(), img.width(), img.channels());
    let cx = spec.center.0 * (w as f64 - 1.0);
    let cy = spec.center.1 * (h as f64 - 1.0);
    let theta = spec.theta_gt.to_radians();
    let n = spec.n_step;
    let rotations: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let u = if n == 1 {
                0.0
            } else {
                k as f64 / (n - 1) as f64
            };
            let a = -u * theta;
            (a.cos(), a.sin())
        })
        .collect();
    let mut out = CartesianImage::filled(h, w, chans, 0.0);
    let mut acc = vec![0.0f64; chans];
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            acc.iter_mut().for_each(|a| *a = 0.0);
            for &(c, s) in &rotations {
                let sx = cx + dx * c - dy * s;
                let sy = cy + dx * s + dy * c;
                for (ch, a) in acc.iter_mut().enumerate() {
                    *a += img.sample_bilinear(sx, sy, ch) as f64;
                }
            }
            for (ch, a) in acc.iter().enumerate() {
                out.set(x, y, ch, (a / n as f64) as f32);
            }
        }
    }
    Ok(out)
}

/// Normalized one-sided box of `width` bins on a ring of `bins` samples.
///
/// Bin `j` receives the overlap of `[j, j+1)` with `[0, width)`, divided by
/// `width`; widths at or below one bin give a delta.
pub fn box_weights(width: f64, bins: usize) -> Vec<f64> {
    let mut weights = vec![0.0; bins];
    if width <= 1.0 {
        weights[0] = 1.0;
        return weights;
    }
    let full = width.floor() as usize;
    for j in 0..full {
        weights[j % bins] += 1.0 / width;
    }
    let frac = width - full as f64;
    if frac > 0.0 {
        weights[full % bins] += frac / width;
    }
    weights
}

/// Box width in angular bins for a blur of `theta` degrees.
pub fn kernel_width_bins(theta: f64, geom: &PolarGeometry) -> f64 {
    theta * geom.bins_per_degree()
}

/// Non-zero taps `(offset, weight)` of the angular kernel for `theta`.
pub fn angular_taps(theta: f64, geom: &PolarGeometry) -> Vec<(usize, f64)> {
    box_weights(kernel_width_bins(theta, geom), geom.angular_samples)
        .into_iter()
        .enumerate()
        .filter(|&(_, w)| w != 0.0)
        .collect()
}

/// The angular box kernel replicated along every radial row.
pub fn build_polar_kernel(theta: f64, geom: &PolarGeometry) -> Result<PolarImage> {
    check_theta(theta)?;
    geom.validate()?;
    let row = box_weights(kernel_width_bins(theta, geom), geom.angular_samples);
    Ok(PolarImage::from_fn(*geom, 1, |_, t, _| row[t]))
}

/// Circular convolution of every radial row with the box kernel of `theta`.
pub fn blur_polar(pimg: &PolarImage, theta: f64) -> Result<PolarImage> {
    check_theta(theta)?;
    let geom = *pimg.geometry();
    let taps = angular_taps(theta, &geom);
    let th = geom.angular_samples;
    let chans = pimg.channels();
    let mut out = PolarImage::zeros(geom, chans);
    for r in 0..geom.radial_samples {
        for t in 0..th {
            for c in 0..chans {
                let mut acc = 0.0;
                for &(m, w) in &taps {
                    acc += w * pimg.get(r, (t + th - m % th) % th, c);
                }
                out.set(r, t, c, acc);
            }
        }
    }
    Ok(out)
}

/// 2D spectrum of the polar blur kernel, `R×Θ` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpectrum {
    geometry: PolarGeometry,
    values: Vec<Complex64>,
}

impl KernelSpectrum {
    pub fn geometry(&self) -> &PolarGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Value at (radial frequency, angular frequency).
    pub fn at(&self, kr: usize, kt: usize) -> Complex64 {
        self.values[kr * self.geometry.angular_samples + kt]
    }

    /// Smallest magnitude over all bins.
    pub fn min_magnitude(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// FFT of the 2D kernel `δ(r) ⊗ box(θ)`: the box sits on radial row 0
/// starting at angular index 0, so the spectrum is constant along the
/// radial-frequency axis and its DC bin is 1.
pub fn kernel_spectrum(theta: f64, geom: &PolarGeometry) -> Result<KernelSpectrum> {
    check_theta(theta)?;
    geom.validate()?;
    let (rows, cols) = (geom.radial_samples, geom.angular_samples);
    let row = box_weights(kernel_width_bins(theta, geom), cols);
    let mut buf = vec![Complex64::new(0.0, 0.0); rows * cols];
    for (t, &w) in row.iter().enumerate() {
        buf[t] = Complex64::new(w, 0.0);
    }
    fft2(&mut buf, rows, cols);
    Ok(KernelSpectrum {
        geometry: *geom,
        values: buf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inversion::ifft2;
    use crate::polar::cpt;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_polar(geom: PolarGeometry, chans: usize, seed: u64) -> PolarImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PolarImage::from_fn(geom, chans, |_, _, _| rng.random::<f64>())
    }

    fn geom(r: usize, t: usize) -> PolarGeometry {
        PolarGeometry::new(0.5, 0.5, r, t, r as f64).unwrap()
    }

    #[test]
    fn zero_angle_cartesian_blur_is_identity() {
        let img =
            CartesianImage::from_fn(17, 13, 3, |x, y, c| ((x * 3 + y * 5 + c) % 7) as f32 / 7.0);
        let spec = BlurSpec {
            theta_gt: 0.0,
            ..BlurSpec::new(1.0).unwrap()
        };
        assert_eq!(blur_cartesian(&img, &spec).unwrap(), img);
    }

    #[test]
    fn constant_is_preserved_inside_circle() {
        let img = CartesianImage::filled(320, 320, 1, 0.3);
        let spec = BlurSpec::new(25.0).unwrap();
        let out = blur_cartesian(&img, &spec).unwrap();
        for y in 0..320 {
            for x in 0..320 {
                let d = ((x as f64 - 159.5).powi(2) + (y as f64 - 159.5).powi(2)).sqrt();
                if d <= 159.5 {
                    assert!((out.get(x, y, 0) - 0.3).abs() < 1e-5, "({x},{y})");
                }
            }
        }
    }

    #[test]
    fn bright_pixel_spreads_along_arc_conserving_energy() {
        let n = 241;
        let c = 120.0;
        let (px, py) = (220usize, 120usize); // radius 100 along +x
        let mut img = CartesianImage::filled(n, n, 1, 0.0);
        img.set(px, py, 0, 1.0);
        let spec = BlurSpec::new(10.0).unwrap().with_n_step(15);
        let out = blur_cartesian(&img, &spec).unwrap();
        let energy: f64 = out.data().iter().map(|&v| v as f64).sum();
        assert!((energy - 1.0).abs() <= 0.02, "energy {energy}");

        // Dense oracle: splat the pixel forward along 1000 rotations of its position.
        let mut oracle = vec![0.0f64; n * n];
        let steps = 1000;
        for k in 0..steps {
            let a = (k as f64 / (steps - 1) as f64 * 10.0).to_radians();
            let (dx, dy) = (px as f64 - c, py as f64 - c);
            let x = c + dx * a.cos() - dy * a.sin();
            let y = c + dx * a.sin() + dy * a.cos();
            let (x0, y0) = (x.floor(), y.floor());
            let (fx, fy) = (x - x0, y - y0);
            for (ox, oy, wgt) in [
                (0, 0, (1.0 - fx) * (1.0 - fy)),
                (1, 0, fx * (1.0 - fy)),
                (0, 1, (1.0 - fx) * fy),
                (1, 1, fx * fy),
            ] {
                let (xi, yi) = (x0 as usize + ox, y0 as usize + oy);
                oracle[yi * n + xi] += wgt / steps as f64;
            }
        }
        let oracle_energy: f64 = oracle.iter().sum();
        assert!((energy - oracle_energy).abs() <= 0.02 * oracle_energy);

        // Same angular centroid as the oracle (within half a degree).
        let centroid = |vals: &mut dyn Iterator<Item = (usize, f64)>| {
            let (mut s, mut m) = (0.0, 0.0);
            for (i, v) in vals {
                let (x, y) = ((i % n) as f64 - c, (i / n) as f64 - c);
                s += v * y.atan2(x).to_degrees();
                m += v;
            }
            s / m
        };
        let a = centroid(&mut out.data().iter().map(|&v| v as f64).enumerate());
        let b = centroid(&mut oracle.iter().copied().enumerate());
        assert!((a - b).abs() < 0.5, "centroids {a} vs {b}");
        assert!((b - 5.0).abs() < 0.5);
    }

    #[test]
    fn polar_zero_angle_is_identity() {
        let p = random_polar(geom(6, 40), 2, 1);
        assert_eq!(blur_polar(&p, 0.0).unwrap(), p);
    }

    #[test]
    fn impulse_spreads_over_four_bins() {
        let g = geom(2, 360);
        let p = PolarImage::from_fn(g, 1, |_, t, _| if t == 10 { 1.0 } else { 0.0 });
        let out = blur_polar(&p, 4.0).unwrap();
        for t in 0..360 {
            let expect = if (10..14).contains(&t) { 0.25 } else { 0.0 };
            assert!((out.get(0, t, 0) - expect).abs() < 1e-15, "t = {t}");
        }
    }

    #[test]
    fn kernel_examples() {
        let g = geom(3, 360);
        let delta = build_polar_kernel(1.0, &g).unwrap();
        assert_eq!(delta.get(1, 0, 0), 1.0);
        assert_eq!(delta.data().iter().sum::<f64>(), 3.0);

        let w = box_weights(2.5, 360);
        assert!((w[0] - 0.4).abs() < 1e-15);
        assert!((w[1] - 0.4).abs() < 1e-15);
        assert!((w[2] - 0.2).abs() < 1e-15);
        assert!(w[3..].iter().all(|&v| v == 0.0));

        let g720 = geom(4, 720);
        for theta in [0.0, 0.3, 1.0, 7.3, 13.37, 20.0, 39.99, 40.0] {
            let k = build_polar_kernel(theta, &g720).unwrap();
            for r in 0..4 {
                let s: f64 = (0..720).map(|t| k.get(r, t, 0)).sum();
                assert!((s - 1.0).abs() < 1e-12, "theta {theta} sum {s}");
            }
        }
    }

    #[test]
    fn spectrum_of_delta_is_ones_and_dc_is_one() {
        let g = geom(8, 64);
        let s = kernel_spectrum(0.0, &g).unwrap();
        for v in s.values() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
        for theta in [3.0, 17.5, 40.0] {
            let s = kernel_spectrum(theta, &g).unwrap();
            assert!((s.at(0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            // Constant along the radial-frequency axis.
            for kr in 1..8 {
                for kt in 0..64 {
                    assert!((s.at(kr, kt) - s.at(0, kt)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn box_spectrum_is_periodic_sinc_with_exact_nulls() {
        let g = geom(2, 720);
        // w = 40 bins divides 720: Dirichlet nulls at every multiple of 18.
        let s = kernel_spectrum(20.0, &g).unwrap();
        let w = 40.0;
        for kt in 0..720 {
            let omega = 2.0 * std::f64::consts::PI * kt as f64 / 720.0;
            let mag = if kt == 0 {
                1.0
            } else {
                ((omega * w / 2.0).sin() / (w * (omega / 2.0).sin())).abs()
            };
            assert!((s.at(0, kt).norm() - mag).abs() < 1e-12, "kt {kt}");
        }
        assert!(s.at(0, 18).norm() < 1e-12);
        assert!(s.at(0, 36).norm() < 1e-12);
    }

    #[test]
    fn convolution_theorem_matches_direct_blur() {
        let g = geom(12, 90);
        for (seed, theta) in [(3u64, 5.0), (4, 12.7), (5, 40.0)] {
            let f = random_polar(g, 1, seed);
            let direct = blur_polar(&f, theta).unwrap();
            let s = kernel_spectrum(theta, &g).unwrap();
            let mut buf: Vec<Complex64> =
                f.plane(0).iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft2(&mut buf, 12, 90);
            buf.iter_mut().zip(s.values()).for_each(|(a, k)| *a *= k);
            ifft2(&mut buf, 12, 90);
            for (a, b) in buf.iter().zip(direct.plane(0)) {
                assert!((a.re - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn polar_blur_is_linear_and_shift_equivariant() {
        let g = geom(5, 64);
        let x = random_polar(g, 1, 8);
        let y = random_polar(g, 1, 9);
        let (a, b) = (0.7, -1.3);
        let mix = PolarImage::from_fn(g, 1, |r, t, c| a * x.get(r, t, c) + b * y.get(r, t, c));
        let lhs = blur_polar(&mix, 9.3).unwrap();
        let bx = blur_polar(&x, 9.3).unwrap();
        let by = blur_polar(&y, 9.3).unwrap();
        for i in 0..lhs.data().len() {
            let rhs = a * bx.data()[i] + b * by.data()[i];
            assert!((lhs.data()[i] - rhs).abs() < 1e-12);
        }
        let shifted = blur_polar(&x.shifted(7), 9.3).unwrap();
        let expect = bx.shifted(7);
        for (p, q) in shifted.data().iter().zip(expect.data()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn cartesian_blur_preserves_roi_mean() {
        let n = 160;
        let c = (n as f64 - 1.0) / 2.0;
        let img = CartesianImage::from_fn(n, n, 1, |x, y, _| {
            let (dx, dy) = (x as f64 - c, y as f64 - c);
            (0.5 + 0.3 * (dx / 9.0).sin() * (dy / 13.0).cos()) as f32
        });
        let mask = crate::polar::roi_mask(n, n);
        let roi_mean = |im: &CartesianImage| {
            let (s, k) = im
                .data()
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| m)
                .fold((0.0, 0usize), |(s, k), (&v, _)| (s + v as f64, k + 1));
            s / k as f64
        };
        for theta in [5.0, 20.0, 40.0] {
            let out = blur_cartesian(&img, &BlurSpec::new(theta).unwrap()).unwrap();
            let (m0, m1) = (roi_mean(&img), roi_mean(&out));
            assert!((m1 - m0).abs() <= 0.01 * m0, "theta {theta}: {m0} vs {m1}");
        }
    }

    #[test]
    fn cartesian_blur_matches_polar_blur_after_cpt() {
        let n = 160;
        let c = (n as f64 - 1.0) / 2.0;
        let img = CartesianImage::from_fn(n, n, 1, |x, y, _| {
            let (dx, dy) = (x as f64 - c, y as f64 - c);
            (0.5 + 0.4 * (-(dx - 30.0).powi(2) / 400.0 - dy.powi(2) / 200.0).exp()) as f32
        });
        let g = PolarGeometry::default_for(n, n);
        for theta in [5.0, 15.0, 30.0] {
            let a = cpt(
                &blur_cartesian(&img, &BlurSpec::new(theta).unwrap()).unwrap(),
                &g,
            )
            .unwrap();
            let b = blur_polar(&cpt(&img, &g).unwrap(), theta).unwrap();
            let mae = a
                .data()
                .iter()
                .zip(b.data())
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>()
                / a.data().len() as f64;
            assert!(mae <= 0.02, "theta {theta}: {mae}");
        }
    }

    #[test]
    fn negative_angle_rejected() {
        let g = geom(2, 16);
        assert!(build_polar_kernel(-1.0, &g).is_err());
        assert!(kernel_spectrum(f64::NAN, &g).is_err());
        assert!(BlurSpec::new(0.0).is_err());
        assert!(BlurSpec::new(41.0).is_err());
    }
}
