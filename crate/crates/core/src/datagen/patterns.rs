//! Procedural grayscale test patterns.
//!
//! Variation 0 of every pattern uses fixed canonical parameters; other
//! variations draw their phase, frequency and placement from a generator
//! seeded by `(pattern, index)`.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::CartesianImage;

/// The eleven pattern families, in canonical order.
pub const PATTERNS: [&str; 11] = [
    "checkerboard",
    "circles",
    "diamond",
    "grid",
    "l_shape",
    "line",
    "radial",
    "sine_grating",
    "spiral",
    "star",
    "triangle",
];

/// Sub-samples per axis used to anti-alias each pixel footprint.
const SUPERSAMPLE: usize = 4;

/// Canonical checkerboard cell, as a fraction of the image size.
pub const CHECKER_CELL_FRACTION: f64 = 0.1;
const GRID_PERIOD_FRACTION: f64 = 0.125;
const GRID_STROKE_FRACTION: f64 = 1.0 / 64.0;
const LINE_STROKE_FRACTION: f64 = 0.04;
const RADIAL_PERIOD_FRACTION: f64 = 1.0 / 12.0;
const GRATING_PERIOD_FRACTION: f64 = 1.0 / 16.0;
const SPIRAL_ARMS: f64 = 4.0;
const STAR_SPOKES: f64 = 12.0;

/// A shape evaluated at continuous pixel coordinates in `[0, size)²`.
type Shape = Box<dyn Fn(f64, f64) -> f64>;

fn pattern_seed(kind: usize, index: usize) -> u64 {
    0x5EED_0000_0000 ^ ((kind as u64) << 32) ^ index as u64
}

fn in_triangle(p: (f64, f64), a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
    let cross = |o: (f64, f64), u: (f64, f64), v: (f64, f64)| {
        (u.0 - o.0) * (v.1 - o.1) - (u.1 - o.1) * (v.0 - o.0)
    };
    let (d1, d2, d3) = (cross(a, b, p), cross(b, c, p), cross(c, a, p));
    let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(neg && pos)
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn build(kind: usize, index: usize, size: usize) -> Shape {
    let s = size as f64;
    let c = s / 2.0;
    let canonical = index == 0;
    let mut rng = ChaCha8Rng::seed_from_u64(pattern_seed(kind, index));
    let mut uniform = |lo: f64, hi: f64| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..hi)
        }
    };
    match PATTERNS[kind] {
        "checkerboard" => {
            let (cell, ox, oy) = if canonical {
                (s * CHECKER_CELL_FRACTION, 0.0, 0.0)
            } else {
                let cell = uniform(s / 16.0, s / 6.0);
                (cell, uniform(0.0, cell), uniform(0.0, cell))
            };
            Box::new(move |x, y| {
                let k = ((x + ox) / cell).floor() as i64 + ((y + oy) / cell).floor() as i64;
                bit(k.rem_euclid(2) == 0)
            })
        }
        "circles" => {
            let discs: Vec<(f64, f64, f64)> = if canonical {
                vec![
                    (0.30, 0.30, 0.12),
                    (0.70, 0.32, 0.09),
                    (0.50, 0.55, 0.10),
                    (0.28, 0.72, 0.08),
                    (0.72, 0.70, 0.11),
                ]
            } else {
                (0..5)
                    .map(|_| (uniform(0.2, 0.8), uniform(0.2, 0.8), uniform(0.05, 0.13)))
                    .collect()
            };
            Box::new(move |x, y| {
                bit(discs
                    .iter()
                    .any(|&(u, v, r)| (x - u * s).powi(2) + (y - v * s).powi(2) <= (r * s).powi(2)))
            })
        }
        "diamond" => {
            let (ox, oy, band) = if canonical {
                (0.0, 0.0, s / 14.0)
            } else {
                (
                    uniform(-0.1, 0.1) * s,
                    uniform(-0.1, 0.1) * s,
                    uniform(s / 20.0, s / 10.0),
                )
            };
            Box::new(move |x, y| {
                let d = (x - c - ox).abs() + (y - c - oy).abs();
                bit(d <= 0.42 * s && ((d / band).floor() as i64) % 2 == 0)
            })
        }
        "grid" => {
            let (period, stroke, ox, oy) = if canonical {
                (
                    s * GRID_PERIOD_FRACTION,
                    (s * GRID_STROKE_FRACTION).max(1.5),
                    0.0,
                    0.0,
                )
            } else {
                let p = uniform(s / 12.0, s / 6.0);
                (
                    p,
                    uniform(1.5, (p / 6.0).max(1.6)),
                    uniform(0.0, p),
                    uniform(0.0, p),
                )
            };
            Box::new(move |x, y| {
                let on = |v: f64| (v.rem_euclid(period)) < stroke;
                bit(on(x + ox) || on(y + oy))
            })
        }
        "l_shape" => {
            let (x0, y0, len, thick) = if canonical {
                (0.25, 0.2, 0.55, 0.15)
            } else {
                (
                    uniform(0.15, 0.35),
                    uniform(0.15, 0.35),
                    uniform(0.4, 0.55),
                    uniform(0.1, 0.2),
                )
            };
            Box::new(move |x, y| {
                let (u, v) = (x / s, y / s);
                let vertical = u >= x0 && u <= x0 + thick && v >= y0 && v <= y0 + len;
                let horizontal = v >= y0 + len - thick && v <= y0 + len && u >= x0 && u <= x0 + len;
                bit(vertical || horizontal)
            })
        }
        "line" => {
            let lines: Vec<(f64, f64)> = if canonical {
                vec![(0.0, -0.2), (0.0, 0.0), (0.0, 0.2)]
            } else {
                let a = uniform(0.0, PI);
                (0..3)
                    .map(|i| (a, (i as f64 - 1.0) * uniform(0.12, 0.22)))
                    .collect()
            };
            let stroke = s * LINE_STROKE_FRACTION;
            Box::new(move |x, y| {
                // Each line: unit normal at angle a + π/2, signed offset from the center.
                bit(lines.iter().any(|&(a, off)| {
                    let d = -(x - c) * a.sin() + (y - c) * a.cos() - off * s;
                    d.abs() <= stroke / 2.0
                }))
            })
        }
        "radial" => {
            let (ox, oy, period) = if canonical {
                (-0.1 * s, -0.05 * s, s * RADIAL_PERIOD_FRACTION)
            } else {
                (
                    uniform(-0.2, 0.2) * s,
                    uniform(-0.2, 0.2) * s,
                    uniform(s / 16.0, s / 8.0),
                )
            };
            Box::new(move |x, y| {
                let r = ((x - c - ox).powi(2) + (y - c - oy).powi(2)).sqrt();
                0.5 + 0.5 * (TAU * r / period).cos()
            })
        }
        "sine_grating" => {
            let (a, period, phase) = if canonical {
                (0.0, s * GRATING_PERIOD_FRACTION, 0.0)
            } else {
                (
                    uniform(0.0, PI),
                    uniform(s / 20.0, s / 10.0),
                    uniform(0.0, TAU),
                )
            };
            Box::new(move |x, y| {
                0.5 + 0.5 * (TAU * (x * a.cos() + y * a.sin()) / period + phase).sin()
            })
        }
        "spiral" => {
            let (arms, pitch, phase) = if canonical {
                (SPIRAL_ARMS, s / 6.0, 0.0)
            } else {
                (
                    uniform(2.0, 6.0).round(),
                    uniform(s / 10.0, s / 4.0),
                    uniform(0.0, TAU),
                )
            };
            Box::new(move |x, y| {
                let (dx, dy) = (x - c, y - c);
                let r = (dx * dx + dy * dy).sqrt();
                let phi = dy.atan2(dx);
                bit((arms * phi + TAU * r / pitch + phase).sin() > 0.0)
            })
        }
        "star" => {
            let (spokes, phase) = if canonical {
                (STAR_SPOKES, 0.0)
            } else {
                (uniform(6.0, 18.0).round(), uniform(0.0, TAU))
            };
            Box::new(move |x, y| {
                let phi = (y - c).atan2(x - c);
                bit((spokes * phi + phase).sin() > 0.0)
            })
        }
        "triangle" => {
            let tri = if canonical {
                [(0.5, 0.15), (0.85, 0.8), (0.15, 0.8)]
            } else {
                let rot = uniform(0.0, TAU);
                let rad = uniform(0.25, 0.4);
                let (ox, oy) = (uniform(-0.08, 0.08), uniform(-0.08, 0.08));
                let v = |k: f64| {
                    let a = rot + k * TAU / 3.0;
                    (0.5 + ox + rad * a.cos(), 0.5 + oy + rad * a.sin())
                };
                [v(0.0), v(1.0), v(2.0)]
            };
            Box::new(move |x, y| bit(in_triangle((x / s, y / s), tri[0], tri[1], tri[2])))
        }
        _ => unreachable!("kind index is validated"),
    }
}

/// Renders variation `index` of `kind` as a single-channel `size×size` image.
///
/// Each pixel averages the shape over its footprint `[x, x+1) × [y, y+1)`.
pub fn generate_pattern(kind: &str, index: usize, size: usize) -> Result<CartesianImage> {
    let k = PATTERNS
        .iter()
        .position(|&p| p == kind)
        .ok_or_else(|| Error::UnknownPattern(kind.to_string()))?;
    if size == 0 {
        return Err(Error::InvalidArgument(
            "pattern size must be positive".into(),
        ));
    }
    let shape = build(k, index, size);
    let n = SUPERSAMPLE as f64;
    Ok(CartesianImage::from_fn(size, size, 1, |x, y, _| {
        let mut acc = 0.0;
        for sy in 0..SUPERSAMPLE {
            for sx in 0..SUPERSAMPLE {
                acc += shape(x as f64 + sx as f64 / n, y as f64 + sy as f64 / n);
            }
        }
        (acc / (n * n)).clamp(0.0, 1.0) as f32
    }))
}
