//! Blurs a pattern by whole-image rotation and checks that the Cartesian arc
//! average and the polar box convolution describe the same blur.
//!
//! cargo run --example rotational_blur -- [theta]

use carnet::blur::{blur_cartesian, blur_polar, kernel_width_bins, BlurSpec};
use carnet::datagen::generate_pattern;
use carnet::image::save_raster;
use carnet::polar::{cpt, roi_mask, PolarGeometry};

fn main() -> carnet::Result<()> {
    let theta: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(15.0);
    let size = 160;
    let sharp = generate_pattern("radial", 0, size)?;
    let geom = PolarGeometry::default_for(size, size);
    let out_dir = std::env::temp_dir()
        .join("carnet-examples")
        .join("rotational_blur");
    std::fs::create_dir_all(&out_dir)?;

    println!(
        "θ = {theta}°, kernel width {:.2} angular bins",
        kernel_width_bins(theta, &geom)
    );
    println!("{:>7} {:>14} {:>12}", "n_step", "polar MAE", "ROI mean Δ");
    let mask = roi_mask(size, size);
    let roi_mean = |img: &carnet::image::CartesianImage| {
        let v: Vec<f64> = img
            .data()
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(&p, _)| p as f64)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let reference = blur_polar(&cpt(&sharp, &geom)?, theta)?;
    for n_step in [3, 7, 15, 31, 63] {
        let spec = BlurSpec::new(theta)?.with_n_step(n_step);
        let blurred = blur_cartesian(&sharp, &spec)?;
        let polar = cpt(&blurred, &geom)?;
        let mae = polar
            .data()
            .iter()
            .zip(reference.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / polar.data().len() as f64;
        println!(
            "{n_step:>7} {mae:>14.5} {:>12.5}",
            roi_mean(&blurred) - roi_mean(&sharp)
        );
        if n_step == 15 {
            save_raster(&blurred, out_dir.join(format!("radial_{theta}deg.png")))?;
        }
    }
    save_raster(&sharp, out_dir.join("radial_sharp.png"))?;
    println!("images in {}", out_dir.display());
    Ok(())
}
