//! Writes a small synthetic dataset with train pairs at integer angles and a
//! test split at continuous random angles.
//!
//! cargo run --example generate_dataset -- [out_dir]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use carnet::datagen::{
    make_test_split, pattern_set, synthesize_pairs, BlurSynthesisConfig, DatasetManifest, Split,
};

fn main() -> carnet::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("carnet-examples").join("dataset"));
    let cfg = BlurSynthesisConfig {
        angles: vec![2.0, 8.0, 16.0, 32.0],
        n_step_range: (8, 15),
        size: 96,
        channels: 1,
        seed: 42,
        ..Default::default()
    };
    let patterns = ["checkerboard", "line", "star"];
    let train = pattern_set(&patterns, 0..3, cfg.size, cfg.channels)?;
    let held_out = pattern_set(&patterns, 3..4, cfg.size, cfg.channels)?;

    let mut manifest = synthesize_pairs(&train, &cfg, &root)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    manifest.extend(make_test_split(&held_out, 6, &mut rng, &cfg, &root)?)?;
    let path = manifest.save()?;

    let reloaded = DatasetManifest::load(&path)?;
    reloaded.validate()?;
    println!("{} entries in {}", reloaded.entries.len(), path.display());
    for split in [Split::Train, Split::Test] {
        println!(
            "  {:<5} {}",
            split.as_str(),
            reloaded.entries_in(split).count()
        );
    }
    for (_, e) in reloaded.entries_in(Split::Test) {
        println!(
            "  test θ = {:>8.4}°  n_step = {:>2}  {}",
            e.theta_gt, e.n_step, e.blurred_path
        );
    }
    Ok(())
}
