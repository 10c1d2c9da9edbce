//! Graph-building forward passes of the network components.
//!
//! Every function takes NCHW tensors whose height is radius and whose width
//! is angle.

use crate::autodiff::{Bindings, Graph, Scalar, Var};
use crate::error::{Error, Result};

use super::config::NetworkConfig;

/// Smallest corrected angle the detector may return, in degrees.
pub const THETA_FLOOR: f64 = 0.5;

fn conv<T: Scalar>(
    g: &mut Graph<T>,
    b: &Bindings,
    name: &str,
    x: Var,
    stride: usize,
) -> Result<Var> {
    let w = b.get(&format!("{name}.weight"))?;
    let bias = b.get(&format!("{name}.bias"))?;
    g.conv2d(x, w, bias, stride)
}

fn conv_relu<T: Scalar>(
    g: &mut Graph<T>,
    b: &Bindings,
    name: &str,
    x: Var,
    stride: usize,
) -> Result<Var> {
    let y = conv(g, b, name, x, stride)?;
    Ok(g.relu(y))
}

/// `x + conv2(relu(conv1(x)))`.
pub fn resblock_forward<T: Scalar>(
    g: &mut Graph<T>,
    b: &Bindings,
    prefix: &str,
    x: Var,
) -> Result<Var> {
    let h = conv_relu(g, b, &format!("{prefix}.conv1"), x, 1)?;
    let r = conv(g, b, &format!("{prefix}.conv2"), h, 1)?;
    g.add(x, r)
}

/// Stage `k` (1-based): returns `(f_next, residual)` with `f_next = f_prev + residual`.
pub fn refinement_stage<T: Scalar>(
    g: &mut Graph<T>,
    b: &Bindings,
    cfg: &NetworkConfig,
    k: usize,
    f_prev: Var,
    gp: Var,
) -> Result<(Var, Var)> {
    if g.shape(f_prev) != g.shape(gp) {
        return Err(Error::ShapeMismatch(format!(
            "stage input {:?} vs observation {:?}",
            g.shape(f_prev),
            g.shape(gp)
        )));
    }
    let x = g.concat(f_prev, gp)?;
    let mut h = conv_relu(g, b, &format!("rs{k}.stem"), x, 1)?;
    for j in 0..cfg.resblocks_per_stage {
        h = resblock_forward(g, b, &format!("rs{k}.block{j}"), h)?;
    }
    let residual = conv(g, b, &format!("rs{k}.head"), h, 1)?;
    let f_next = g.add(f_prev, residual)?;
    Ok((f_next, residual))
}

/// Shallow residual block applied after the last stage.
pub fn final_refinement<T: Scalar>(g: &mut Graph<T>, b: &Bindings, f_t: Var) -> Result<Var> {
    let h = conv_relu(g, b, "fr.conv1", f_t, 1)?;
    let h = conv_relu(g, b, "fr.conv2", h, 1)?;
    let r = conv(g, b, "fr.head", h, 1)?;
    g.add(f_t, r)
}

/// The corrected angle both as a graph scalar and as an `f64`.
#[derive(Debug, Clone, Copy)]
pub struct AngleOutput {
    /// Differentiable `θ_corrected`, shape `[1, 1]`.
    pub var: Var,
    /// The same quantity evaluated in `f64`; equals `θ_initial` exactly when
    /// the predicted offset is zero.
    pub degrees: f64,
}

/// Regresses `θ_corrected = clamp(θ_initial + θ_max·tanh(δ), 0.5, θ_max)`.
pub fn angle_detector<T: Scalar>(
    g: &mut Graph<T>,
    b: &Bindings,
    cfg: &NetworkConfig,
    f_init: Var,
    theta_initial: f64,
    theta_max: f64,
) -> Result<AngleOutput> {
    let shape = g.shape(f_init).to_vec();
    if shape.len() != 4 || shape[0] != 1 {
        return Err(Error::ShapeMismatch(format!(
            "angle detector expects a single NCHW sample, got {shape:?}"
        )));
    }
    let mut h = f_init;
    for i in 0..cfg.ad_widths.len() {
        h = conv_relu(g, b, &format!("ad.conv{i}"), h, 2)?;
    }
    let pooled = g.global_avg_pool(h)?;
    let prior = g.constant(&[1, 1], vec![T::of(theta_initial / theta_max)])?;
    let feat = g.concat(pooled, prior)?;
    let hidden = g.linear(feat, b.get("ad.fc1.weight")?, b.get("ad.fc1.bias")?)?;
    let hidden = g.relu(hidden);
    let delta = g.linear(hidden, b.get("ad.fc2.weight")?, b.get("ad.fc2.bias")?)?;
    let bounded = g.tanh(delta);
    let offset = g.scale(bounded, T::of(theta_max));
    let shifted = g.add_scalar(offset, T::of(theta_initial));
    let var = g.clamp(shifted, T::of(THETA_FLOOR), T::of(theta_max));

    let d = g.item(delta).f64();
    let degrees = (theta_initial + theta_max * d.tanh()).clamp(THETA_FLOOR, theta_max);
    Ok(AngleOutput { var, degrees })
}

/// Runs the `T` stages and the final block from `f0`.
///
/// Returns `[f^0, f^1, …, f^T, f^{T+1}]`.
pub fn cascade<T: Scalar>(
    g: &mut Graph<T>,
    b: &Bindings,
    cfg: &NetworkConfig,
    f0: Var,
    gp: Var,
) -> Result<Vec<Var>> {
    let mut estimates = Vec::with_capacity(cfg.stages + 2);
    estimates.push(f0);
    let mut f = f0;
    for k in 1..=cfg.stages {
        let (next, _) = refinement_stage(g, b, cfg, k, f, gp)?;
        estimates.push(next);
        f = next;
    }
    estimates.push(final_refinement(g, b, f)?);
    Ok(estimates)
}
