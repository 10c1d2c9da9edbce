use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

use super::{Graph, Var};

/// Denominator floor so exactly-zero gradients compare as equal.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

/// Compares reverse-mode gradients of the scalar `f(x)` with central
/// differences of step `step`.
///
/// Every coordinate is checked when `x` has at most `samples` entries;
/// otherwise a seeded random subset of `samples` coordinates is.
pub fn grad_check<F>(
    f: F,
    shape: &[usize],
    x: &[f64],
    step: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, Var) -> Result<Var>,
{
    let eval = |data: Vec<f64>| -> Result<f64> {
        let mut g = Graph::new();
        let v = g.constant(shape, data)?;
        let out = f(&mut g, v)?;
        Ok(g.item(out))
    };

    let mut g = Graph::new();
    let v = g.param(shape, x.to_vec())?;
    let out = f(&mut g, v)?;
    g.backward(out)?;
    let analytic = g
        .grad(v)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; x.len()]);

    let coords: Vec<usize> = if x.len() <= samples {
        (0..x.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, x.len(), samples).into_vec();
        idx.sort_unstable();
        idx
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        checked: coords.len(),
    };
    for &i in &coords {
        let mut plus = x.to_vec();
        plus[i] += step;
        let mut minus = x.to_vec();
        minus[i] -= step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * step);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
    }
    Ok(report)
}
