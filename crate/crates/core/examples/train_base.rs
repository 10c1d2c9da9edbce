//! Trains the base refinement network for a few epochs on a freshly
//! generated dataset and compares it with inversion alone.
//!
//! cargo run --release --example train_base -- [epochs]

use carnet::datagen::{
    pattern_set, synthesize_pairs, synthesize_split, BlurSynthesisConfig, Split,
};
use carnet::eval::evaluate;
use carnet::net::{Checkpoint, NetworkConfig, Variant};
use carnet::train::{train_with_progress, TrainConfig};

fn main() -> carnet::Result<()> {
    let epochs: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    let root = std::env::temp_dir()
        .join("carnet-examples")
        .join("train_base");
    let _ = std::fs::remove_dir_all(&root);

    let data = BlurSynthesisConfig {
        angles: vec![10.0, 20.0],
        size: 32,
        channels: 1,
        angular_samples: Some(128),
        seed: 1,
        ..Default::default()
    };
    let mut manifest = synthesize_pairs(
        &pattern_set(&["checkerboard", "circles"], 0..3, 32, 1)?,
        &data,
        &root,
    )?;
    let test = pattern_set(&["checkerboard", "circles"], 50..51, 32, 1)?;
    manifest.extend(synthesize_split(&test, &data, &root, Split::Test)?)?;
    manifest.save()?;

    let cfg = TrainConfig {
        epochs,
        lr_initial: 1e-3,
        sigma_noise: 2.0,
        variant: Variant::Base,
        val_fraction: 0.2,
        network: NetworkConfig {
            input_channels: 1,
            ..NetworkConfig::default()
        },
        ..TrainConfig::default()
    };
    let out = train_with_progress(&manifest, &cfg, &root.join("run"), |s| {
        println!(
            "epoch {:>2}  train {:.4}  val {:.4}  lr {:.0e}",
            s.epoch,
            s.train.total,
            s.val.map_or(f64::NAN, |v| v.total),
            s.lr
        );
    })?;

    let best = Checkpoint::load(&out.best_checkpoint)?;
    let report = evaluate(&manifest, Some(&best.model), 2.0, 0, Split::Test)?;
    print!("{}", report.table());
    println!("log {}", out.log.display());
    Ok(())
}
