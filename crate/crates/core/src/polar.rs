//! Cartesian ⇄ polar resampling and the inscribed-circle ROI.
//!
//! Angle 0 points along +x and angles grow towards +y in pixel
//! coordinates (`x = cx + ρ cos φ`, `y = cy + ρ sin φ`). The blur kernels
//! use the same convention, so the two only have to agree with each other.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::CartesianImage;

/// Sampling grid of a polar raster.
///
/// `center` is normalized: `(0.5, 0.5)` is the image center, mapped to the
/// pixel coordinate `(cx·(W−1), cy·(H−1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarGeometry {
    pub cx: f64,
    pub cy: f64,
    #[serde(rename = "R")]
    pub radial_samples: usize,
    #[serde(rename = "Θ", alias = "Theta")]
    pub angular_samples: usize,
    pub max_radius: f64,
}

impl PolarGeometry {
    pub const MIN_RADIAL: usize = 2;
    pub const MIN_ANGULAR: usize = 8;
    pub const DEFAULT_ANGULAR: usize = 720;

    pub fn new(
        cx: f64,
        cy: f64,
        radial_samples: usize,
        angular_samples: usize,
        max_radius: f64,
    ) -> Result<Self> {
        let g = Self {
            cx,
            cy,
            radial_samples,
            angular_samples,
            max_radius,
        };
        g.validate()?;
        Ok(g)
    }

    /// Centered grid with `R = min(h, w)/2`, `Θ = 720` and the radius reaching
    /// the inscribed circle; 320×320 gives `R = 160, Θ = 720, max_radius = 160`.
    pub fn default_for(height: usize, width: usize) -> Self {
        let half = height.min(width) / 2;
        Self {
            cx: 0.5,
            cy: 0.5,
            radial_samples: half.max(Self::MIN_RADIAL),
            angular_samples: Self::DEFAULT_ANGULAR,
            max_radius: (height.min(width) as f64 / 2.0).max(1.0),
        }
    }

    pub fn with_angular_samples(mut self, angular_samples: usize) -> Self {
        self.angular_samples = angular_samples;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial_samples < Self::MIN_RADIAL {
            return Err(Error::DegenerateGeometry(format!(
                "R = {} < {}",
                self.radial_samples,
                Self::MIN_RADIAL
            )));
        }
        if self.angular_samples < Self::MIN_ANGULAR {
            return Err(Error::DegenerateGeometry(format!(
                "Θ = {} < {}",
                self.angular_samples,
                Self::MIN_ANGULAR
            )));
        }
        if !(self.max_radius > 0.0 && self.max_radius.is_finite()) {
            return Err(Error::DegenerateGeometry(format!(
                "max_radius = {}",
                self.max_radius
            )));
        }
        Ok(())
    }

    /// Radius in pixels of radial row `i`.
    #[inline]
    pub fn rho(&self, i: usize) -> f64 {
        i as f64 * self.max_radius / (self.radial_samples - 1) as f64
    }

    /// Angle in radians of angular column `j`.
    #[inline]
    pub fn phi(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.angular_samples as f64
    }

    /// Angular bins per degree.
    #[inline]
    pub fn bins_per_degree(&self) -> f64 {
        self.angular_samples as f64 / 360.0
    }

    /// Pixel coordinates of the rotation center on an `h×w` image.
    #[inline]
    pub fn pixel_center(&self, height: usize, width: usize) -> (f64, f64) {
        (
            self.cx * (width as f64 - 1.0),
            self.cy * (height as f64 - 1.0),
        )
    }
}

/// A raster over `(radius, angle)`, laid out `[radius][angle][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarImage {
    geometry: PolarGeometry,
    channels: usize,
    data: Vec<f64>,
}

impl PolarImage {
    pub fn new(geometry: PolarGeometry, channels: usize, data: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        let expect = geometry.radial_samples * geometry.angular_samples * channels;
        if channels == 0 || data.len() != expect {
            return Err(Error::ShapeMismatch(format!(
                "polar data length {} != {}x{}x{channels}",
                data.len(),
                geometry.radial_samples,
                geometry.angular_samples
            )));
        }
        Ok(Self {
            geometry,
            channels,
            data,
        })
    }

    pub fn zeros(geometry: PolarGeometry, channels: usize) -> Self {
        let n = geometry.radial_samples * geometry.angular_samples * channels;
        Self {
            geometry,
            channels,
            data: vec![0.0; n],
        }
    }

    pub fn from_fn(
        geometry: PolarGeometry,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut out = Self::zeros(geometry, channels);
        for r in 0..geometry.radial_samples {
            for t in 0..geometry.angular_samples {
                for c in 0..channels {
                    let v = f(r, t, c);
                    out.set(r, t, c, v);
                }
            }
        }
        out
    }

    pub fn geometry(&self) -> &PolarGeometry {
        &self.geometry
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn radial(&self) -> usize {
        self.geometry.radial_samples
    }

    pub fn angular(&self) -> usize {
        self.geometry.angular_samples
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, t: usize, c: usize) -> f64 {
        self.data[(r * self.geometry.angular_samples + t) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, t: usize, c: usize, v: f64) {
        let idx = (r * self.geometry.angular_samples + t) * self.channels + c;
        self.data[idx] = v;
    }

    /// One channel as a contiguous `R×Θ` plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    pub fn set_plane(&mut self, c: usize, plane: &[f64]) {
        for (i, &v) in plane.iter().enumerate() {
            self.data[i * self.channels + c] = v;
        }
    }

    /// Channel-planar `f32` copy (`C×R×Θ`), the network tensor layout.
    pub fn to_planar_f32(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.data.len());
        for c in 0..self.channels {
            out.extend(
                self.data
                    .iter()
                    .skip(c)
                    .step_by(self.channels)
                    .map(|&v| v as f32),
            );
        }
        out
    }

    pub fn from_planar_f32(
        geometry: PolarGeometry,
        channels: usize,
        planar: &[f32],
    ) -> Result<Self> {
        let n = geometry.radial_samples * geometry.angular_samples;
        if planar.len() != n * channels {
            return Err(Error::ShapeMismatch(format!(
                "planar length {} != {channels}x{n}",
                planar.len()
            )));
        }
        let mut out = Self::zeros(geometry, channels);
        for c in 0..channels {
            for i in 0..n {
                out.data[i * channels + c] = planar[c * n + i] as f64;
            }
        }
        Ok(out)
    }

    /// Clamp into the intermediate range `[−0.25, 1.25]`.
    pub fn clamp_intermediate(&mut self) {
        self.data.iter_mut().for_each(|v| *v = v.clamp(-0.25, 1.25));
    }

    /// Circular shift along the angular axis by `shift` bins.
    pub fn shifted(&self, shift: isize) -> Self {
        let th = self.angular() as isize;
        Self::from_fn(self.geometry, self.channels, |r, t, c| {
            self.get(r, (t as isize - shift).rem_euclid(th) as usize, c)
        })
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.geometry == other.geometry && self.channels == other.channels
    }
}

/// Cartesian-to-polar transform by bilinear sampling.
pub fn cpt(img: &CartesianImage, geom: &PolarGeometry) -> Result<PolarImage> {
    geom.validate()?;
    let (cx, cy) = geom.pixel_center(img.height(), img.width());
    let channels = img.channels();
    let trig: Vec<(f64, f64)> = (0..geom.angular_samples)
        .map(|j| {
            let p = geom.phi(j);
            (p.cos(), p.sin())
        })
        .collect();
    let mut out = PolarImage::zeros(*geom, channels);
    for i in 0..geom.radial_samples {
        let rho = geom.rho(i);
        for (j, &(c, s)) in trig.iter().enumerate() {
            let (x, y) = (cx + rho * c, cy + rho * s);
            for ch in 0..channels {
                out.set(i, j, ch, img.sample_bilinear(x, y, ch) as f64);
            }
        }
    }
    Ok(out)
}

/// Polar-to-Cartesian transform. Pixels beyond `max_radius` are 0.
pub fn pct(pimg: &PolarImage, out_h: usize, out_w: usize) -> CartesianImage {
    let g = pimg.geometry();
    let (cx, cy) = g.pixel_center(out_h, out_w);
    let rows = g.radial_samples;
    let th = g.angular_samples;
    let radial_scale = (rows - 1) as f64 / g.max_radius;
    let angular_scale = th as f64 / (2.0 * PI);
    CartesianImage::from_fn(out_h, out_w, pimg.channels(), |x, y, c| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        let dist = (dx * dx + dy * dy).sqrt();
        if dist > g.max_radius {
            return 0.0;
        }
        let r = (dist * radial_scale).min((rows - 1) as f64);
        let t = (dy.atan2(dx) * angular_scale).rem_euclid(th as f64);
        sample_polar(pimg, r, t, c) as f32
    })
}

/// Bilinear sample of a polar raster with angular wraparound.
pub fn sample_polar(pimg: &PolarImage, r: f64, t: f64, c: usize) -> f64 {
    let rows = pimg.radial();
    let th = pimg.angular();
    let r0 = (r.floor() as usize).min(rows - 1);
    let r1 = (r0 + 1).min(rows - 1);
    let fr = r - r0 as f64;
    let t = t.rem_euclid(th as f64);
    let t0f = t.floor();
    let ft = t - t0f;
    let t0 = (t0f as usize) % th;
    let t1 = (t0 + 1) % th;
    let a = pimg.get(r0, t0, c) * (1.0 - ft) + pimg.get(r0, t1, c) * ft;
    let b = pimg.get(r1, t0, c) * (1.0 - ft) + pimg.get(r1, t1, c) * ft;
    a * (1.0 - fr) + b * fr
}

/// Boolean mask of the largest inscribed circle, row-major `h×w`.
pub fn roi_mask(h: usize, w: usize) -> Vec<bool> {
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let r = h.min(w) as f64 / 2.0;
    let r2 = r * r;
    let mut mask = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            mask.push(dx * dx + dy * dy <= r2);
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::psnr_roi;

    fn smooth_radial(n: usize) -> CartesianImage {
        let c = (n as f64 - 1.0) / 2.0;
        CartesianImage::from_fn(n, n, 1, |x, y, _| {
            let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
            (0.5 + 0.4 * (d / n as f64 * 3.0).cos()) as f32
        })
    }

    fn gaussian_blob(n: usize, ox: f64, oy: f64, s: f64) -> CartesianImage {
        CartesianImage::from_fn(n, n, 1, |x, y, _| {
            let dx = x as f64 - ox;
            let dy = y as f64 - oy;
            (-(dx * dx + dy * dy) / (2.0 * s * s)).exp() as f32
        })
    }

    #[test]
    fn degenerate_geometry_rejected() {
        assert!(PolarGeometry::new(0.5, 0.5, 1, 720, 10.0).is_err());
        assert!(PolarGeometry::new(0.5, 0.5, 10, 7, 10.0).is_err());
        assert!(PolarGeometry::new(0.5, 0.5, 10, 8, 0.0).is_err());
        let img = CartesianImage::filled(8, 8, 1, 0.0);
        let bad = PolarGeometry {
            cx: 0.5,
            cy: 0.5,
            radial_samples: 1,
            angular_samples: 8,
            max_radius: 3.0,
        };
        assert_eq!(cpt(&img, &bad).unwrap_err().kind(), "degenerate_geometry");
    }

    #[test]
    fn default_geometry_for_320() {
        let g = PolarGeometry::default_for(320, 320);
        assert_eq!((g.radial_samples, g.angular_samples), (160, 720));
        assert_eq!(g.max_radius, 160.0);
    }

    #[test]
    fn constant_image_maps_to_constant_interior() {
        let img = CartesianImage::filled(64, 64, 3, 0.7);
        let g = PolarGeometry::new(0.5, 0.5, 32, 128, 30.0).unwrap();
        let p = cpt(&img, &g).unwrap();
        for &v in p.data() {
            assert!((v - 0.7).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_radius_row_is_center_value() {
        let img = CartesianImage::from_fn(9, 9, 1, |x, y, _| (x + 9 * y) as f32 / 81.0);
        let g = PolarGeometry::new(0.5, 0.5, 5, 16, 4.0).unwrap();
        let p = cpt(&img, &g).unwrap();
        for t in 0..16 {
            assert_eq!(p.get(0, t, 0), img.get(4, 4, 0) as f64);
        }
    }

    #[test]
    fn constant_polar_to_constant_disc_with_dark_corners() {
        let g = PolarGeometry::default_for(320, 320);
        let p = PolarImage::from_fn(g, 1, |_, _, _| 0.6);
        let img = pct(&p, 320, 320);
        let mask = roi_mask(320, 320);
        for (i, &inside) in mask.iter().enumerate() {
            let v = img.data()[i];
            if inside {
                let (x, y) = (i % 320, i / 320);
                let d = ((x as f64 - 159.5).powi(2) + (y as f64 - 159.5).powi(2)).sqrt();
                if d <= 160.0 {
                    assert!((v - 0.6).abs() < 1e-6);
                }
            }
        }
        assert_eq!(img.get(0, 0, 0), 0.0);
        assert_eq!(img.get(319, 319, 0), 0.0);
    }

    #[test]
    fn bright_angular_column_becomes_ray() {
        let g = PolarGeometry::new(0.5, 0.5, 32, 64, 32.0).unwrap();
        // Column 16 sits at φ = π/2, the +y ray.
        let p = PolarImage::from_fn(g, 1, |_, t, _| if t == 16 { 1.0 } else { 0.0 });
        let img = pct(&p, 65, 65);
        // Direct ray oracle: pixels on x = cx, y > cy sample exactly column 16.
        for y in 34..64 {
            assert!((img.get(32, y, 0) - 1.0).abs() < 1e-6, "y = {y}");
        }
        // Pixels on the opposite ray are dark.
        for y in 1..31 {
            assert!(img.get(32, y, 0).abs() < 1e-6);
        }
        // Off-ray pixels fall off with angular distance.
        let off = img.get(40, 60, 0);
        assert!(off < 0.5);
    }

    #[test]
    fn roundtrip_smooth_image_above_30db() {
        let img = smooth_radial(320);
        let g = PolarGeometry::default_for(320, 320);
        let back = pct(&cpt(&img, &g).unwrap(), 320, 320);
        let psnr = psnr_roi(&img, &back).unwrap();
        assert!(psnr >= 30.0, "psnr {psnr}");
    }

    #[test]
    fn roi_examples() {
        let m = roi_mask(320, 320);
        let frac = m.iter().filter(|&&b| b).count() as f64 / m.len() as f64;
        assert!((frac - PI / 4.0).abs() < 0.01, "fraction {frac}");
        assert_eq!(roi_mask(1, 1), vec![true]);
        assert!(m[160 * 320 + 160]);
        assert!(!m[0]);
    }

    #[test]
    fn angular_wraparound_is_periodic() {
        let g = PolarGeometry::new(0.5, 0.5, 8, 32, 8.0).unwrap();
        let p = PolarImage::from_fn(g, 1, |r, t, _| ((r * 7 + t * 3) % 11) as f64);
        for &(r, t) in &[(0.3, 0.2), (3.7, 31.5), (6.2, 17.9)] {
            let a = sample_polar(&p, r, t, 0);
            let b = sample_polar(&p, r, t + 32.0, 0);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn transforms_preserve_unit_bounds() {
        let img = gaussian_blob(64, 20.0, 40.0, 8.0);
        let g = PolarGeometry::new(0.5, 0.5, 32, 256, 32.0).unwrap();
        let p = cpt(&img, &g).unwrap();
        assert!(p.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let back = pct(&p, 64, 64);
        assert!(back.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn rotation_becomes_angular_shift() {
        let n = 128;
        let c = (n as f64 - 1.0) / 2.0;
        let g = PolarGeometry::new(0.5, 0.5, 64, 360, 60.0).unwrap();
        let delta_deg = 30.0f64;
        let (ox, oy) = (c + 30.0, c + 10.0);
        let img = gaussian_blob(n, ox, oy, 6.0);
        // Rotate the blob center about the image center by Δ (same convention as cpt).
        let d = delta_deg.to_radians();
        let (rx, ry) = (
            c + (ox - c) * d.cos() - (oy - c) * d.sin(),
            c + (ox - c) * d.sin() + (oy - c) * d.cos(),
        );
        let rotated = gaussian_blob(n, rx, ry, 6.0);
        let p = cpt(&img, &g)
            .unwrap()
            .shifted((delta_deg * g.bins_per_degree()) as isize);
        let q = cpt(&rotated, &g).unwrap();
        let mae: f64 = p
            .data()
            .iter()
            .zip(q.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / p.data().len() as f64;
        assert!(mae <= 0.02, "mean abs {mae}");
    }
}
