//! Scores inversion-only deblurring and a model under several angle-noise
//! levels, writing the per-image CSV and summary next to each other.
//!
//! cargo run --release --example evaluate -- [checkpoint]

use carnet::datagen::{pattern_set, synthesize_split, BlurSynthesisConfig, Split};
use carnet::eval::evaluate;
use carnet::net::Checkpoint;

fn main() -> carnet::Result<()> {
    let checkpoint = std::env::args().nth(1);
    let root = std::env::temp_dir()
        .join("carnet-examples")
        .join("evaluate");
    let _ = std::fs::remove_dir_all(&root);

    let model = checkpoint
        .map(Checkpoint::load)
        .transpose()?
        .map(|c| c.model);
    let data = BlurSynthesisConfig {
        angles: vec![5.0, 12.0, 25.0],
        size: model.as_ref().map_or(64, |m| 2 * m.geometry.radial_samples),
        channels: model.as_ref().map_or(1, |m| m.config.input_channels),
        angular_samples: Some(model.as_ref().map_or(256, |m| m.geometry.angular_samples)),
        seed: 9,
        ..Default::default()
    };
    let sharp = pattern_set(
        &["sine_grating", "triangle", "diamond"],
        0..2,
        data.size,
        data.channels,
    )?;
    let manifest = synthesize_split(&sharp, &data, &root, Split::Test)?;
    manifest.save()?;

    for sigma in [0.0, 2.0, 5.0] {
        let report = evaluate(&manifest, model.as_ref(), sigma, 7, Split::Test)?;
        print!("{}", report.table());
        let csv = root.join(format!("eval_sigma{sigma}.csv"));
        let summary = report.save(&csv)?;
        println!("-> {} / {}\n", csv.display(), summary.display());
    }
    Ok(())
}
