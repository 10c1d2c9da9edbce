//! Parameter counts per component for the default configurations, and the
//! median inference time of each variant at 320×320.
//!
//! cargo run --release --example param_budget -- [repeats]

use carnet::datagen::generate_pattern;
use carnet::eval::time_inference;
use carnet::net::{layer_specs, Model, NetworkConfig, Variant};
use carnet::polar::PolarGeometry;

fn main() -> carnet::Result<()> {
    let repeats: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let cfg = NetworkConfig::default();
    let geom = PolarGeometry::default_for(320, 320);
    let image = generate_pattern("spiral", 0, 320)?.with_channels(cfg.input_channels)?;

    for variant in [Variant::Base, Variant::Ad] {
        let model = Model::new(cfg.clone(), variant, geom, 0)?;
        let p = &model.params;
        println!(
            "{variant}: {} parameters ({:.2}M)",
            model.param_count(),
            model.param_count() as f64 / 1e6
        );
        println!("  refinement stages {}", p.count_prefix("rs"));
        println!("  final block       {}", p.count_prefix("fr."));
        println!("  angle detector    {}", p.count_prefix("ad."));
        let widest = layer_specs(&cfg, variant)
            .into_iter()
            .max_by_key(|s| s.numel())
            .expect("layers");
        println!(
            "  largest layer     {} {:?}",
            widest.name, widest.weight_shape
        );
        let ms = time_inference(&model, &image, 10.0, repeats)?;
        println!("  inference         {ms:.0} ms median over {repeats}");
    }
    Ok(())
}
