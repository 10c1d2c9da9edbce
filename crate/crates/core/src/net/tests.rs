use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{grad_check, Graph, ParamStore};
use crate::blur::{blur_cartesian, BlurSpec};
use crate::datagen::generate_pattern;
use crate::error::Result;
use crate::polar::PolarGeometry;

fn small_cfg(channels: usize) -> NetworkConfig {
    NetworkConfig {
        stages: 2,
        base_width: 6,
        resblocks_per_stage: 1,
        ad_widths: vec![4, 8],
        ad_mlp_hidden: 5,
        input_channels: channels,
        ..NetworkConfig::default()
    }
}

fn geom() -> PolarGeometry {
    PolarGeometry::new(0.5, 0.5, 8, 32, 8.0).unwrap()
}

fn blurred_pattern(theta: f64) -> crate::image::CartesianImage {
    let sharp = generate_pattern("checkerboard", 1, 16).unwrap();
    blur_cartesian(&sharp, &BlurSpec::new(theta).unwrap()).unwrap()
}

/// Randomizes every parameter, including the zero-initialized heads.
fn randomize(store: &mut ParamStore, seed: u64, scale: f32) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (_, p) in store.iter_mut() {
        p.data
            .iter_mut()
            .for_each(|v| *v = scale * (rng.random::<f32>() * 2.0 - 1.0));
    }
}

#[test]
fn base_is_identity_at_init() {
    let cfg = small_cfg(3);
    let m = Model::new(cfg.clone(), Variant::Base, geom(), 0).unwrap();
    let r = m.forward_base(&blurred_pattern(10.0), 10.0).unwrap();
    assert_eq!(r.estimates.len(), cfg.stages + 2);
    let f0 = &r.estimates[0];
    for e in &r.estimates {
        let d = e
            .data()
            .iter()
            .zip(f0.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(d <= 1e-6, "{d}");
    }
}

#[test]
fn ad_is_identity_on_angle_at_init_and_matches_base() {
    let cfg = small_cfg(3);
    let m = Model::new(cfg, Variant::Ad, geom(), 0).unwrap();
    let img = blurred_pattern(12.0);
    for theta_initial in [3.7, 12.0, 17.123456789] {
        let r = m.forward_ad(&img, theta_initial).unwrap();
        assert_eq!(r.theta_corrected, Some(theta_initial));
        assert_eq!(r.theta_used, theta_initial);
        let base = m.forward_base(&img, theta_initial).unwrap();
        assert_eq!(base.estimates, r.estimates);
    }
}

#[test]
fn recurrence_holds_with_random_weights() {
    let cfg = small_cfg(1);
    let mut params = init_params(&cfg, Variant::Base, 1).unwrap();
    randomize(&mut params, 2, 0.2);
    let mut g = Graph::<f32>::new();
    let b = params.bind(&mut g);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = g
        .constant(&[1, 1, 8, 32], (0..256).map(|_| rng.random()).collect())
        .unwrap();
    let gp = g
        .constant(&[1, 1, 8, 32], (0..256).map(|_| rng.random()).collect())
        .unwrap();
    let (next, residual) = refinement_stage(&mut g, &b, &cfg, 1, f, gp).unwrap();
    let (fv, rv, nv) = (g.value(f), g.value(residual), g.value(next));
    assert!(rv.iter().any(|&v| v != 0.0));
    for i in 0..nv.len() {
        assert_eq!(nv[i], fv[i] + rv[i]);
    }
    assert_eq!(g.shape(next), g.shape(f));
}

#[test]
fn zero_second_conv_makes_resblock_identity() {
    let cfg = small_cfg(1);
    let mut params = init_params(&cfg, Variant::Base, 4).unwrap();
    randomize(&mut params, 5, 0.3);
    for name in ["rs1.block0.conv2.weight", "rs1.block0.conv2.bias"] {
        params
            .get_mut(name)
            .unwrap()
            .data
            .iter_mut()
            .for_each(|v| *v = 0.0);
    }
    let mut g = Graph::<f32>::new();
    let b = params.bind(&mut g);
    let x = g
        .constant(
            &[1, 6, 5, 12],
            (0..360).map(|i| (i as f32 * 0.1).sin()).collect(),
        )
        .unwrap();
    let y = resblock_forward(&mut g, &b, "rs1.block0", x).unwrap();
    assert_eq!(g.value(y), g.value(x));
}

#[test]
fn final_block_is_finite_on_large_inputs() {
    let cfg = small_cfg(3);
    let mut params = init_params(&cfg, Variant::Base, 6).unwrap();
    randomize(&mut params, 7, 0.5);
    let mut g = Graph::<f32>::new();
    let b = params.bind(&mut g);
    let x = g
        .constant(
            &[1, 3, 8, 32],
            (0..768)
                .map(|i| if i % 2 == 0 { 10.0 } else { -10.0 })
                .collect(),
        )
        .unwrap();
    let y = final_refinement(&mut g, &b, x).unwrap();
    assert!(g.value(y).iter().all(|v| v.is_finite()));
}

#[test]
fn angle_detector_on_zeros_stays_in_range() {
    let cfg = small_cfg(3);
    let mut params = init_params(&cfg, Variant::Ad, 8).unwrap();
    randomize(&mut params, 9, 1.0);
    let mut g = Graph::<f32>::new();
    let b = params.bind(&mut g);
    let x = g.constant(&[1, 3, 8, 32], vec![0.0; 768]).unwrap();
    for theta in [0.5, 3.0, 40.0] {
        let out = angle_detector(&mut g, &b, &cfg, x, theta, 40.0).unwrap();
        assert!(out.degrees.is_finite() && (0.5..=40.0).contains(&out.degrees));
    }
}

#[test]
fn identical_batch_items_give_identical_results() {
    let cfg = small_cfg(3);
    let mut m = Model::new(cfg, Variant::Base, geom(), 10).unwrap();
    randomize(&mut m.params, 11, 0.1);
    let img = blurred_pattern(8.0);
    let out = m.forward_batch(&[(img.clone(), 8.0), (img, 8.0)]).unwrap();
    assert_eq!(out[0], out[1]);
}

#[test]
fn invalid_theta_rejected() {
    let m = Model::new(small_cfg(3), Variant::Base, geom(), 0).unwrap();
    let img = blurred_pattern(8.0);
    assert_eq!(
        m.forward_base(&img, 0.0).unwrap_err().kind(),
        "invalid_argument"
    );
    assert_eq!(
        m.forward_base(&img, 41.0).unwrap_err().kind(),
        "invalid_argument"
    );
    assert!(m.forward_ad(&img, 5.0).is_err());
}

#[test]
fn full_base_forward_backward_gives_finite_gradients() {
    let cfg = small_cfg(3);
    let mut params = init_params(&cfg, Variant::Base, 12).unwrap();
    let gp = observe(&blurred_pattern(9.0), &geom(), 3).unwrap();
    let mut g = Graph::<f32>::new();
    let b = params.bind(&mut g);
    let out = forward_graph(&mut g, &b, &cfg, Variant::Base, &gp, 9.0).unwrap();
    let last = *out.estimates.last().unwrap();
    // Any target other than the observation; at this width the inversion is the identity.
    let shifted = g.add_scalar(out.gp, 0.25);
    let d = g.sub(last, shifted).unwrap();
    let a = g.abs(d);
    let loss = g.mean(a);
    g.backward(loss).unwrap();
    params.accumulate_grads(&g, &b, 1.0);
    for (name, p) in params.iter() {
        let grad = p.grad.as_ref().unwrap();
        assert!(grad.iter().all(|v| v.is_finite()), "{name}");
    }
    assert!(params
        .get("rs1.head.weight")
        .unwrap()
        .grad
        .as_ref()
        .unwrap()
        .iter()
        .any(|&v| v != 0.0));
}

/// Gradient of a smooth scalar readout of a block with respect to its input.
fn check_input_gradient(
    block: impl Fn(
        &mut Graph<f64>,
        &crate::autodiff::Bindings,
        crate::autodiff::Var,
    ) -> Result<crate::autodiff::Var>,
    params: &ParamStore,
    shape: &[usize],
    seed: u64,
) -> f64 {
    let n: usize = shape.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let probe: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    grad_check(
        |g, v| {
            let b = params.bind(g);
            let y = block(g, &b, v)?;
            let p = g.constant(shape, probe.clone())?;
            let t = g.mul(y, p)?;
            Ok(g.sum(t))
        },
        shape,
        &x,
        1e-5,
        64,
        seed,
    )
    .unwrap()
    .max_rel_error
}

#[test]
fn block_gradients_match_finite_differences() {
    let cfg = small_cfg(1);
    let mut params = init_params(&cfg, Variant::Base, 13).unwrap();
    randomize(&mut params, 14, 0.3);
    let e = check_input_gradient(
        |g, b, x| resblock_forward(g, b, "rs1.block0", x),
        &params,
        &[1, 6, 4, 8],
        1,
    );
    assert!(e <= 1e-3, "resblock {e}");
    let e = check_input_gradient(
        |g, b, x| final_refinement(g, b, x),
        &params,
        &[1, 1, 4, 8],
        2,
    );
    assert!(e <= 1e-3, "final block {e}");
    let gp: Vec<f64> = (0..32).map(|i| (i as f64 * 0.3).cos()).collect();
    let e = check_input_gradient(
        |g, b, x| {
            let gpv = g.constant(&[1, 1, 4, 8], gp.clone())?;
            Ok(refinement_stage(g, b, &cfg, 1, x, gpv)?.0)
        },
        &params,
        &[1, 1, 4, 8],
        3,
    );
    assert!(e <= 1e-3, "stage {e}");
}
