//! Resamples a pattern to the polar frame and back, then scores the round
//! trip inside the ROI.
//!
//! cargo run --example polar_roundtrip -- [pattern] [size]

use carnet::datagen::generate_pattern;
use carnet::eval::{psnr_roi, ssim_roi};
use carnet::image::save_raster;
use carnet::polar::{cpt, pct, PolarGeometry};

fn main() -> carnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let pattern = args.next().unwrap_or_else(|| "spiral".into());
    let size: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(128);

    let img = generate_pattern(&pattern, 0, size)?;
    let out_dir = std::env::temp_dir()
        .join("carnet-examples")
        .join("polar_roundtrip");
    std::fs::create_dir_all(&out_dir)?;

    println!("{pattern} {size}x{size}");
    println!("{:>6} {:>10} {:>8}", "Θ", "PSNR (dB)", "SSIM");
    for theta_samples in [90, 180, 360, 720, 1440] {
        let geom = PolarGeometry::default_for(size, size).with_angular_samples(theta_samples);
        let polar = cpt(&img, &geom)?;
        let back = pct(&polar, size, size);
        println!(
            "{theta_samples:>6} {:>10.2} {:>8.4}",
            psnr_roi(&back, &img)?,
            ssim_roi(&back, &img)?
        );
        if theta_samples == 720 {
            // The polar raster itself, radius down the rows.
            let raster = carnet::image::CartesianImage::from_fn(
                geom.radial_samples,
                theta_samples,
                1,
                |t, r, _| polar.get(r, t, 0) as f32,
            );
            save_raster(&raster, out_dir.join("polar.png"))?;
            save_raster(&back.clamped(), out_dir.join("roundtrip.png"))?;
        }
    }
    println!("images in {}", out_dir.display());
    Ok(())
}
