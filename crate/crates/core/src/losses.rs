//! Training losses over graph tensors.
//!
//! Every function takes the supervised estimates `f^1 … f^{T+1}` as graph
//! handles of shape `[1, C, R, Θ]` and returns a scalar handle.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Scalar, Var};
use crate::blur::angular_taps;
use crate::error::{Error, Result};
use crate::eval::{gaussian_taps, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};
use crate::net::Variant;
use crate::polar::PolarGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub w_l1: f64,
    pub w_ssim: f64,
    pub w_physics: f64,
    pub w_angle: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_l1: 1.0,
            w_ssim: 0.5,
            w_physics: 0.1,
            w_angle: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w_l1, self.w_ssim, self.w_physics, self.w_angle];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "loss weights must be finite and >= 0, got {self:?}"
            )))
        }
    }
}

/// Scalar values of one loss evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub l1: f64,
    pub ssim: f64,
    pub physics: f64,
    pub angle: f64,
}

impl LossReport {
    /// Builds a report whose total is the weighted sum of the components.
    /// The angle component is forced to zero for the base variant.
    pub fn from_components(
        l1: f64,
        ssim: f64,
        physics: f64,
        angle: f64,
        w: &LossWeights,
        variant: Variant,
    ) -> Self {
        let angle = match variant {
            Variant::Base => 0.0,
            Variant::Ad => angle,
        };
        let mut r = Self {
            total: 0.0,
            l1,
            ssim,
            physics,
            angle,
        };
        r.total = r.recombine(w);
        r
    }

    pub fn recombine(&self, w: &LossWeights) -> f64 {
        w.w_l1 * self.l1
            + w.w_ssim * self.ssim
            + w.w_physics * self.physics
            + w.w_angle * self.angle
    }

    /// Componentwise sum, used to average reports over a batch or epoch.
    pub fn accumulate(&mut self, other: &LossReport) {
        self.total += other.total;
        self.l1 += other.l1;
        self.ssim += other.ssim;
        self.physics += other.physics;
        self.angle += other.angle;
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            total: self.total * s,
            l1: self.l1 * s,
            ssim: self.ssim * s,
            physics: self.physics * s,
            angle: self.angle * s,
        }
    }
}

fn check_stages<T: Scalar>(g: &Graph<T>, estimates: &[Var], target: Var) -> Result<()> {
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("no estimates to supervise".into()));
    }
    for &e in estimates {
        if g.shape(e) != g.shape(target) {
            return Err(Error::ShapeMismatch(format!(
                "estimate {:?} vs target {:?}",
                g.shape(e),
                g.shape(target)
            )));
        }
    }
    Ok(())
}

/// Mean over stages of `f(stage)`.
fn stage_mean<T: Scalar>(
    g: &mut Graph<T>,
    estimates: &[Var],
    mut f: impl FnMut(&mut Graph<T>, Var) -> Result<Var>,
) -> Result<Var> {
    let mut acc = f(g, estimates[0])?;
    for &e in &estimates[1..] {
        let term = f(g, e)?;
        acc = g.add(acc, term)?;
    }
    Ok(g.scale(acc, T::of(1.0 / estimates.len() as f64)))
}

/// Mean over stages of the mean absolute error against `target`.
pub fn l1_loss<T: Scalar>(g: &mut Graph<T>, estimates: &[Var], target: Var) -> Result<Var> {
    check_stages(g, estimates, target)?;
    stage_mean(g, estimates, |g, e| {
        let d = g.sub(e, target)?;
        let a = g.abs(d);
        Ok(g.mean(a))
    })
}

/// Mean SSIM over every valid 11×11 Gaussian window and every channel.
pub fn ssim<T: Scalar>(g: &mut Graph<T>, x: Var, y: Var) -> Result<Var> {
    let taps: Vec<T> = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA)
        .into_iter()
        .map(T::of)
        .collect();
    let c1 = T::of(SSIM_K1 * SSIM_K1);
    let c2 = T::of(SSIM_K2 * SSIM_K2);
    let mx = g.gaussian_valid(x, &taps)?;
    let my = g.gaussian_valid(y, &taps)?;
    let xx = g.mul(x, x)?;
    let yy = g.mul(y, y)?;
    let xy = g.mul(x, y)?;
    let exx = g.gaussian_valid(xx, &taps)?;
    let eyy = g.gaussian_valid(yy, &taps)?;
    let exy = g.gaussian_valid(xy, &taps)?;
    let mx2 = g.mul(mx, mx)?;
    let my2 = g.mul(my, my)?;
    let mxy = g.mul(mx, my)?;
    let vx = g.sub(exx, mx2)?;
    let vy = g.sub(eyy, my2)?;
    let cxy = g.sub(exy, mxy)?;

    let two_mxy = g.scale(mxy, T::of(2.0));
    let a = g.add_scalar(two_mxy, c1);
    let two_cxy = g.scale(cxy, T::of(2.0));
    let b = g.add_scalar(two_cxy, c2);
    let num = g.mul(a, b)?;
    let m2 = g.add(mx2, my2)?;
    let c = g.add_scalar(m2, c1);
    let v2 = g.add(vx, vy)?;
    let d = g.add_scalar(v2, c2);
    let den = g.mul(c, d)?;
    let map = g.div(num, den)?;
    Ok(g.mean(map))
}

/// Mean over stages of `1 − SSIM(f^k, target)`.
pub fn ssim_loss<T: Scalar>(g: &mut Graph<T>, estimates: &[Var], target: Var) -> Result<Var> {
    check_stages(g, estimates, target)?;
    stage_mean(g, estimates, |g, e| {
        let s = ssim(g, e, target)?;
        let neg = g.scale(s, T::of(-1.0));
        Ok(g.add_scalar(neg, T::one()))
    })
}

/// Mean over stages of the mean absolute difference between the re-blurred
/// estimate and the observation. `theta` is a constant of the graph.
pub fn physics_loss<T: Scalar>(
    g: &mut Graph<T>,
    estimates: &[Var],
    gp: Var,
    theta: f64,
    geom: &PolarGeometry,
) -> Result<Var> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "physics loss needs theta > 0, got {theta}"
        )));
    }
    check_stages(g, estimates, gp)?;
    let taps: Vec<(usize, T)> = angular_taps(theta, geom)
        .into_iter()
        .map(|(m, w)| (m, T::of(w)))
        .collect();
    stage_mean(g, estimates, |g, e| {
        let blurred = g.angular_conv(e, &taps)?;
        let d = g.sub(blurred, gp)?;
        let a = g.abs(d);
        Ok(g.mean(a))
    })
}

/// `|θ_corrected − θ_gt| / θ_max`.
pub fn angle_loss<T: Scalar>(
    g: &mut Graph<T>,
    theta_corrected: Var,
    theta_gt: f64,
    theta_max: f64,
) -> Result<Var> {
    if !(theta_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "theta_max must be positive, got {theta_max}"
        )));
    }
    let d = g.add_scalar(theta_corrected, T::of(-theta_gt));
    let a = g.abs(d);
    let s = g.sum(a);
    Ok(g.scale(s, T::of(1.0 / theta_max)))
}

/// Component handles of one loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub l1: Var,
    pub ssim: Var,
    pub physics: Var,
    /// Present only when an angle was predicted.
    pub angle: Option<Var>,
}

/// Weighted total loss. The angle term contributes only for the AD variant.
pub fn combine<T: Scalar>(
    g: &mut Graph<T>,
    terms: &LossTerms,
    w: &LossWeights,
    variant: Variant,
) -> Result<(Var, LossReport)> {
    let mut total = g.scale(terms.l1, T::of(w.w_l1));
    let s = g.scale(terms.ssim, T::of(w.w_ssim));
    total = g.add(total, s)?;
    let p = g.scale(terms.physics, T::of(w.w_physics));
    total = g.add(total, p)?;
    let angle_value = match (variant, terms.angle) {
        (Variant::Ad, Some(a)) => {
            let t = g.scale(a, T::of(w.w_angle));
            total = g.add(total, t)?;
            g.item(a).f64()
        }
        (Variant::Ad, None) => {
            return Err(Error::InvalidArgument(
                "the AD variant needs an angle loss term".into(),
            ));
        }
        (Variant::Base, _) => 0.0,
    };
    let report = LossReport::from_components(
        g.item(terms.l1).f64(),
        g.item(terms.ssim).f64(),
        g.item(terms.physics).f64(),
        angle_value,
        w,
        variant,
    );
    Ok((total, report))
}
