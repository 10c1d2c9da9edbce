//! Trains the angle-detection variant and reports how much it reduces the
//! error of noisy initial angles.
//!
//! cargo run --release --example train_angle_detector -- [epochs]

use carnet::datagen::{
    pattern_set, synthesize_pairs, synthesize_split, BlurSynthesisConfig, Split,
};
use carnet::eval::evaluate;
use carnet::losses::LossWeights;
use carnet::net::{Checkpoint, NetworkConfig, Variant};
use carnet::train::{train_with_progress, TrainConfig};

fn main() -> carnet::Result<()> {
    let epochs: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    let root = std::env::temp_dir()
        .join("carnet-examples")
        .join("train_angle_detector");
    let _ = std::fs::remove_dir_all(&root);

    let data = BlurSynthesisConfig {
        angles: vec![8.0, 14.0, 20.0],
        size: 32,
        channels: 1,
        angular_samples: Some(128),
        seed: 2,
        ..Default::default()
    };
    let mut manifest =
        synthesize_pairs(&pattern_set(&["star", "grid"], 0..3, 32, 1)?, &data, &root)?;
    let test = pattern_set(&["star", "grid"], 50..51, 32, 1)?;
    manifest.extend(synthesize_split(&test, &data, &root, Split::Test)?)?;
    manifest.save()?;

    let cfg = TrainConfig {
        epochs,
        lr_initial: 1e-3,
        sigma_noise: 4.0,
        variant: Variant::Ad,
        val_fraction: 0.2,
        weights: LossWeights {
            w_angle: 1.0,
            ..LossWeights::default()
        },
        network: NetworkConfig {
            input_channels: 1,
            ..NetworkConfig::default()
        },
        ..TrainConfig::default()
    };
    let out = train_with_progress(&manifest, &cfg, &root.join("run"), |s| {
        println!(
            "epoch {:>2}  train {:.4} (angle {:.4})  val {:.4}",
            s.epoch,
            s.train.total,
            s.train.angle,
            s.val.map_or(f64::NAN, |v| v.total)
        );
    })?;

    let best = Checkpoint::load(&out.best_checkpoint)?;
    let report = evaluate(&manifest, Some(&best.model), 4.0, 0, Split::Test)?;
    for r in &report.records {
        println!(
            "θ_gt {:>5.1}  θ_initial {:>6.2}  θ_corrected {:>6.2}",
            r.theta_gt,
            r.theta_initial,
            r.theta_corrected.unwrap_or(f64::NAN)
        );
    }
    print!("{}", report.table());
    Ok(())
}
