use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::ParamStore;
use crate::error::Result;

use super::config::{NetworkConfig, Variant};

/// Kernel size of every convolution in the network.
pub const KERNEL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    Kaiming,
    Zero,
}

/// A named layer and the shape of its weight; biases are `[out]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub weight_shape: Vec<usize>,
    zero: bool,
}

impl LayerSpec {
    fn conv(name: String, cin: usize, cout: usize, init: Init) -> Self {
        Self {
            name,
            weight_shape: vec![cout, cin, KERNEL, KERNEL],
            zero: init == Init::Zero,
        }
    }

    fn linear(name: String, fin: usize, fout: usize, init: Init) -> Self {
        Self {
            name,
            weight_shape: vec![fout, fin],
            zero: init == Init::Zero,
        }
    }

    fn fan_in(&self) -> usize {
        self.weight_shape[1..].iter().product()
    }

    pub fn numel(&self) -> usize {
        self.weight_shape.iter().product::<usize>() + self.weight_shape[0]
    }
}

/// All layers of a model in construction order.
pub fn layer_specs(cfg: &NetworkConfig, variant: Variant) -> Vec<LayerSpec> {
    let (c, f) = (cfg.input_channels, cfg.base_width);
    let mut out = Vec::new();
    for k in 1..=cfg.stages {
        out.push(LayerSpec::conv(
            format!("rs{k}.stem"),
            2 * c,
            f,
            Init::Kaiming,
        ));
        for j in 0..cfg.resblocks_per_stage {
            out.push(LayerSpec::conv(
                format!("rs{k}.block{j}.conv1"),
                f,
                f,
                Init::Kaiming,
            ));
            out.push(LayerSpec::conv(
                format!("rs{k}.block{j}.conv2"),
                f,
                f,
                Init::Kaiming,
            ));
        }
        out.push(LayerSpec::conv(format!("rs{k}.head"), f, c, Init::Zero));
    }
    out.push(LayerSpec::conv("fr.conv1".into(), c, f, Init::Kaiming));
    out.push(LayerSpec::conv("fr.conv2".into(), f, f, Init::Kaiming));
    out.push(LayerSpec::conv("fr.head".into(), f, c, Init::Zero));
    if variant == Variant::Ad {
        let mut cin = c;
        for (i, &w) in cfg.ad_widths.iter().enumerate() {
            out.push(LayerSpec::conv(
                format!("ad.conv{i}"),
                cin,
                w,
                Init::Kaiming,
            ));
            cin = w;
        }
        out.push(LayerSpec::linear(
            "ad.fc1".into(),
            cin + 1,
            cfg.ad_mlp_hidden,
            Init::Kaiming,
        ));
        out.push(LayerSpec::linear(
            "ad.fc2".into(),
            cfg.ad_mlp_hidden,
            1,
            Init::Zero,
        ));
    }
    out
}

/// Parameter total implied by a configuration, without allocating weights.
pub fn param_count(cfg: &NetworkConfig, variant: Variant) -> usize {
    layer_specs(cfg, variant).iter().map(LayerSpec::numel).sum()
}

/// Fresh parameters: fan-in Kaiming normal weights, zero biases, and zero
/// residual heads and angle output layer so the untrained model is the
/// identity on its inputs.
pub fn init_params(cfg: &NetworkConfig, variant: Variant, seed: u64) -> Result<ParamStore> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for spec in layer_specs(cfg, variant) {
        let n: usize = spec.weight_shape.iter().product();
        let weight = if spec.zero {
            vec![0.0; n]
        } else {
            let std = (2.0 / spec.fan_in() as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            (0..n).map(|_| normal.sample(&mut rng) as f32).collect()
        };
        store.insert(format!("{}.weight", spec.name), &spec.weight_shape, weight)?;
        store.insert(
            format!("{}.bias", spec.name),
            &[spec.weight_shape[0]],
            vec![0.0; spec.weight_shape[0]],
        )?;
    }
    Ok(store)
}
