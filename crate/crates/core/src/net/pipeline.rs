use crate::autodiff::{Bindings, Graph, ParamStore, Scalar, Var};
use crate::blur::kernel_spectrum;
use crate::error::{Error, Result};
use crate::image::CartesianImage;
use crate::inversion::{invert, InversionConfig};
use crate::polar::{cpt, pct, PolarGeometry, PolarImage};

use super::blocks::{angle_detector, cascade, AngleOutput, THETA_FLOOR};
use super::config::{NetworkConfig, Variant};
use super::init::{init_params, param_count};

/// Output of either pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct DeblurResult {
    /// `f^0 … f^{T+1}` in the polar frame; the last entry is the final estimate.
    pub estimates: Vec<PolarImage>,
    /// Angle used for the inversion that produced `f^0`.
    pub theta_used: f64,
    pub theta_corrected: Option<f64>,
    /// The inversion under `θ_initial` that the angle detector read.
    pub initial_inversion: Option<PolarImage>,
}

impl DeblurResult {
    pub fn output(&self) -> &PolarImage {
        self.estimates.last().expect("at least one estimate")
    }

    /// Final estimate resampled to Cartesian and clamped to `[0, 1]`.
    pub fn to_cartesian(&self, height: usize, width: usize) -> CartesianImage {
        pct(self.output(), height, width).clamped()
    }
}

/// Converts a Cartesian observation into the polar frame the network sees.
pub fn observe(gc: &CartesianImage, geom: &PolarGeometry, channels: usize) -> Result<PolarImage> {
    cpt(&gc.with_channels(channels)?, geom)
}

/// Frequency inversion at `theta`, clamped to the intermediate range.
pub fn inversion(gp: &PolarImage, theta: f64) -> Result<PolarImage> {
    let spectrum = kernel_spectrum(theta, gp.geometry())?;
    let mut f = invert(gp, &spectrum, &InversionConfig::default())?;
    f.clamp_intermediate();
    Ok(f)
}

/// Records a polar image as a `[1, C, R, Θ]` constant.
pub fn polar_to_tensor<T: Scalar>(g: &mut Graph<T>, p: &PolarImage) -> Result<Var> {
    let data = p
        .to_planar_f32()
        .into_iter()
        .map(|v| T::of(v as f64))
        .collect();
    g.constant(&[1, p.channels(), p.radial(), p.angular()], data)
}

pub fn tensor_to_polar<T: Scalar>(
    g: &Graph<T>,
    v: Var,
    geom: &PolarGeometry,
) -> Result<PolarImage> {
    let shape = g.shape(v);
    if shape.len() != 4
        || shape[0] != 1
        || shape[2] != geom.radial_samples
        || shape[3] != geom.angular_samples
    {
        return Err(Error::ShapeMismatch(format!(
            "tensor {shape:?} does not fit geometry {geom:?}"
        )));
    }
    let planar: Vec<f32> = g.value(v).iter().map(|&x| x.f64() as f32).collect();
    PolarImage::from_planar_f32(*geom, shape[1], &planar)
}

/// Graph handles produced by one forward pass.
#[derive(Debug, Clone)]
pub struct GraphForward {
    pub estimates: Vec<Var>,
    pub gp: Var,
    pub theta_used: f64,
    pub angle: Option<AngleOutput>,
    pub initial_inversion: Option<Var>,
}

/// Builds the full forward pass of `variant` for one polar observation.
///
/// `theta` is the known angle for the base variant and `θ_initial` for the
/// angle-detection variant. Inversions run outside the graph, so no gradient
/// flows through them.
pub fn forward_graph<T: Scalar>(
    g: &mut Graph<T>,
    b: &Bindings,
    cfg: &NetworkConfig,
    variant: Variant,
    gp: &PolarImage,
    theta: f64,
) -> Result<GraphForward> {
    let gp_var = polar_to_tensor(g, gp)?;
    let (theta_used, angle, initial_inversion) = match variant {
        Variant::Base => (theta, None, None),
        Variant::Ad => {
            let theta_initial = theta.clamp(THETA_FLOOR, cfg.theta_max);
            let f_init = polar_to_tensor(g, &inversion(gp, theta_initial)?)?;
            let angle = angle_detector(g, b, cfg, f_init, theta_initial, cfg.theta_max)?;
            (angle.degrees, Some(angle), Some(f_init))
        }
    };
    let f0 = polar_to_tensor(g, &inversion(gp, theta_used)?)?;
    let estimates = cascade(g, b, cfg, f0, gp_var)?;
    Ok(GraphForward {
        estimates,
        gp: gp_var,
        theta_used,
        angle,
        initial_inversion,
    })
}

fn run(
    params: &ParamStore,
    cfg: &NetworkConfig,
    variant: Variant,
    gp: &PolarImage,
    theta: f64,
) -> Result<DeblurResult> {
    let geom = *gp.geometry();
    let mut g = Graph::<f32>::new();
    let b = params.bind(&mut g);
    let out = forward_graph(&mut g, &b, cfg, variant, gp, theta)?;
    let estimates = out
        .estimates
        .iter()
        .map(|&v| tensor_to_polar(&g, v, &geom))
        .collect::<Result<Vec<_>>>()?;
    let initial_inversion = out
        .initial_inversion
        .map(|v| tensor_to_polar(&g, v, &geom))
        .transpose()?;
    Ok(DeblurResult {
        estimates,
        theta_used: out.theta_used,
        theta_corrected: out.angle.map(|a| a.degrees),
        initial_inversion,
    })
}

/// Inversion at a known `theta` followed by the refinement cascade.
pub fn forward_base(
    gc: &CartesianImage,
    theta: f64,
    cfg: &NetworkConfig,
    geom: &PolarGeometry,
    params: &ParamStore,
) -> Result<DeblurResult> {
    if !(theta > 0.0 && theta <= cfg.theta_max) {
        return Err(Error::InvalidArgument(format!(
            "theta {theta} outside (0, {}]",
            cfg.theta_max
        )));
    }
    let gp = observe(gc, geom, cfg.input_channels)?;
    run(params, cfg, Variant::Base, &gp, theta)
}

/// Angle correction from a noisy `theta_initial`, re-inversion, then the cascade.
pub fn forward_ad(
    gc: &CartesianImage,
    theta_initial: f64,
    cfg: &NetworkConfig,
    geom: &PolarGeometry,
    params: &ParamStore,
) -> Result<DeblurResult> {
    if !theta_initial.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "theta_initial {theta_initial} is not finite"
        )));
    }
    let gp = observe(gc, geom, cfg.input_channels)?;
    run(params, cfg, Variant::Ad, &gp, theta_initial)
}

/// Configuration, polar frame and weights of one trained or fresh model.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: NetworkConfig,
    pub variant: Variant,
    pub geometry: PolarGeometry,
    pub params: ParamStore,
}

impl Model {
    pub fn new(
        config: NetworkConfig,
        variant: Variant,
        geometry: PolarGeometry,
        seed: u64,
    ) -> Result<Self> {
        geometry.validate()?;
        let params = init_params(&config, variant, seed)?;
        Ok(Self {
            config,
            variant,
            geometry,
            params,
        })
    }

    pub fn param_count(&self) -> usize {
        debug_assert_eq!(self.params.count(), param_count(&self.config, self.variant));
        self.params.count()
    }

    /// Runs the model's own variant.
    pub fn forward(&self, gc: &CartesianImage, theta: f64) -> Result<DeblurResult> {
        match self.variant {
            Variant::Base => self.forward_base(gc, theta),
            Variant::Ad => self.forward_ad(gc, theta),
        }
    }

    pub fn forward_base(&self, gc: &CartesianImage, theta: f64) -> Result<DeblurResult> {
        forward_base(gc, theta, &self.config, &self.geometry, &self.params)
    }

    pub fn forward_ad(&self, gc: &CartesianImage, theta_initial: f64) -> Result<DeblurResult> {
        if self.variant != Variant::Ad {
            return Err(Error::InvalidArgument("model has no angle detector".into()));
        }
        forward_ad(
            gc,
            theta_initial,
            &self.config,
            &self.geometry,
            &self.params,
        )
    }

    /// Runs [`Model::forward`] over several inputs in order.
    pub fn forward_batch(&self, inputs: &[(CartesianImage, f64)]) -> Result<Vec<DeblurResult>> {
        inputs
            .iter()
            .map(|(gc, theta)| self.forward(gc, *theta))
            .collect()
    }
}
