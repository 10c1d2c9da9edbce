use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::image::CartesianImage;
use crate::net::{inversion, observe, Checkpoint, Model};
use crate::polar::pct;
use crate::train::inject_angle_noise;

use super::metrics::{psnr_roi, ssim_roi};

/// Stream of the evaluation angle-noise generator.
const EVAL_NOISE_STREAM: u64 = 7;

/// Metrics of one test image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub entry: usize,
    pub image_id: String,
    pub theta_gt: f64,
    pub theta_initial: f64,
    pub theta_corrected: Option<f64>,
    pub abs_err_before: f64,
    pub abs_err_after: Option<f64>,
    pub psnr_db: f64,
    pub ssim: f64,
    /// Inversion at `theta_initial` with no refinement.
    pub psnr_inversion_db: f64,
    pub ssim_inversion: f64,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self::default();
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    /// `"inversion"`, `"base"` or `"ad"`.
    pub pipeline: String,
    pub sigma: f64,
    pub seed: u64,
    pub images: usize,
    pub psnr_db: Stat,
    pub ssim: Stat,
    pub psnr_inversion_db: Stat,
    pub ssim_inversion: Stat,
    pub abs_err_before: Stat,
    pub abs_err_after: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub records: Vec<MetricsRecord>,
    pub summary: EvalSummary,
}

fn image_id(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

/// Runs `model` (or inversion only, when `None`) over every `split` entry.
///
/// Each entry draws `θ_initial = θ_gt + σ·z` from a generator seeded by
/// `seed`, in manifest order.
pub fn evaluate(
    manifest: &DatasetManifest,
    model: Option<&Model>,
    sigma: f64,
    seed: u64,
    split: Split,
) -> Result<EvalReport> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be >= 0, got {sigma}"
        )));
    }
    if let Some(m) = model {
        if m.geometry != manifest.geometry {
            return Err(Error::ConfigMismatch(format!(
                "checkpoint geometry {:?} differs from manifest geometry {:?}",
                m.geometry, manifest.geometry
            )));
        }
    }
    let channels = model.map(|m| m.config.input_channels);
    let theta_max = model
        .map(|m| m.config.theta_max)
        .unwrap_or(crate::blur::DEFAULT_THETA_MAX);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(EVAL_NOISE_STREAM);
    let mut records = Vec::new();
    for (i, e) in manifest.entries_in(split) {
        let blurred = manifest.load_blurred(e)?;
        let sharp = manifest.load_sharp(e)?;
        let c = channels.unwrap_or(blurred.channels());
        let sharp = sharp.with_channels(c)?;
        let (h, w) = (sharp.height(), sharp.width());
        let theta_initial = inject_angle_noise(e.theta_gt, sigma, theta_max, &mut rng);

        let gp = observe(&blurred, &manifest.geometry, c)?;
        let inv = pct(&inversion(&gp, theta_initial)?, h, w).clamped();
        let psnr_inv = psnr_roi(&inv, &sharp)?;
        let ssim_inv = ssim_roi(&inv, &sharp)?;

        let (out, theta_corrected): (CartesianImage, Option<f64>) = match model {
            None => (inv, None),
            Some(m) => {
                let r = m.forward(&blurred, theta_initial)?;
                (r.to_cartesian(h, w), r.theta_corrected)
            }
        };
        records.push(MetricsRecord {
            entry: i,
            image_id: image_id(&e.blurred_path),
            theta_gt: e.theta_gt,
            theta_initial,
            theta_corrected,
            abs_err_before: (theta_initial - e.theta_gt).abs(),
            abs_err_after: theta_corrected.map(|t| (t - e.theta_gt).abs()),
            psnr_db: psnr_roi(&out, &sharp)?,
            ssim: ssim_roi(&out, &sharp)?,
            psnr_inversion_db: psnr_inv,
            ssim_inversion: ssim_inv,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no {} entries in the manifest",
            split.as_str()
        )));
    }
    let summary = EvalSummary {
        pipeline: model
            .map(|m| m.variant.to_string())
            .unwrap_or_else(|| "inversion".into()),
        sigma,
        seed,
        images: records.len(),
        psnr_db: Stat::of(records.iter().map(|r| r.psnr_db)),
        ssim: Stat::of(records.iter().map(|r| r.ssim)),
        psnr_inversion_db: Stat::of(records.iter().map(|r| r.psnr_inversion_db)),
        ssim_inversion: Stat::of(records.iter().map(|r| r.ssim_inversion)),
        abs_err_before: Stat::of(records.iter().map(|r| r.abs_err_before)),
        abs_err_after: if records.iter().all(|r| r.abs_err_after.is_some()) {
            Some(Stat::of(records.iter().filter_map(|r| r.abs_err_after)))
        } else {
            None
        },
    };
    Ok(EvalReport { records, summary })
}

impl EvalReport {
    /// Per-image CSV preceded by a `# pipeline=… sigma=… seed=…` line.
    pub fn to_csv(&self) -> Result<String> {
        let s = &self.summary;
        let mut out = format!(
            "# pipeline={} sigma={} seed={}\n",
            s.pipeline, s.sigma, s.seed
        );
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        out.push_str(&String::from_utf8_lossy(&body));
        Ok(out)
    }

    /// Writes the CSV to `csv_path` and the summary JSON next to it.
    pub fn save(&self, csv_path: &Path) -> Result<std::path::PathBuf> {
        let unwritable = |p: &Path, e: std::io::Error| Error::Unwritable {
            path: p.to_path_buf(),
            reason: e.to_string(),
        };
        if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| unwritable(dir, e))?;
        }
        fs::write(csv_path, self.to_csv()?).map_err(|e| unwritable(csv_path, e))?;
        let summary_path = csv_path.with_extension("summary.json");
        let mut f = fs::File::create(&summary_path).map_err(|e| unwritable(&summary_path, e))?;
        f.write_all(serde_json::to_string_pretty(&self.summary)?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(summary_path)
    }

    /// Human-readable summary table.
    pub fn table(&self) -> String {
        let s = &self.summary;
        let row = |name: &str, st: &Stat, prec: usize| {
            format!("{name:<22}{:>10.prec$} ± {:.prec$}\n", st.mean, st.std)
        };
        let mut t = format!(
            "pipeline {} | sigma {} | seed {} | {} images\n",
            s.pipeline, s.sigma, s.seed, s.images
        );
        t += &row("PSNR (dB)", &s.psnr_db, 2);
        t += &row("SSIM", &s.ssim, 4);
        t += &row("PSNR inversion (dB)", &s.psnr_inversion_db, 2);
        t += &row("SSIM inversion", &s.ssim_inversion, 4);
        t += &row("|θ err| before (deg)", &s.abs_err_before, 3);
        if let Some(a) = &s.abs_err_after {
            t += &row("|θ err| after (deg)", a, 3);
        }
        t
    }
}

/// Total scalar parameters stored in a checkpoint.
pub fn count_params(checkpoint: &Checkpoint) -> usize {
    checkpoint.model.params.count()
}

/// Median wall-clock milliseconds of `repeats` forward passes after three
/// warm-up runs.
pub fn time_inference(
    model: &Model,
    image: &CartesianImage,
    theta: f64,
    repeats: usize,
) -> Result<f64> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    for _ in 0..3 {
        model.forward(image, theta)?;
    }
    let mut times: Vec<f64> = (0..repeats)
        .map(|_| {
            let t = Instant::now();
            model
                .forward(image, theta)
                .map(|_| t.elapsed().as_secs_f64() * 1e3)
        })
        .collect::<Result<_>>()?;
    times.sort_by(f64::total_cmp);
    let n = times.len();
    Ok(if n % 2 == 1 {
        times[n / 2]
    } else {
        0.5 * (times[n / 2 - 1] + times[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{pattern_set, synthesize_split, BlurSynthesisConfig};
    use crate::net::{NetworkConfig, Variant};

    fn dataset(root: &Path) -> DatasetManifest {
        let cfg = BlurSynthesisConfig {
            angles: vec![12.0, 20.0],
            size: 24,
            channels: 1,
            angular_samples: Some(64),
            ..Default::default()
        };
        let sharp = pattern_set(&["grid", "spiral"], 0..1, 24, 1).unwrap();
        let m = synthesize_split(&sharp, &cfg, root, Split::Test).unwrap();
        m.save().unwrap();
        m
    }

    #[test]
    fn inversion_only_evaluation_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let m = dataset(dir.path());
        let a = evaluate(&m, None, 0.0, 7, Split::Test).unwrap();
        let b = evaluate(&m, None, 0.0, 7, Split::Test).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert!(a
            .to_csv()
            .unwrap()
            .starts_with("# pipeline=inversion sigma=0 seed=7\n"));
        assert_eq!(a.records.len(), 4);
        for r in &a.records {
            assert_eq!(r.theta_initial, r.theta_gt);
            assert_eq!(r.psnr_db, r.psnr_inversion_db);
        }
        let mean = a.records.iter().map(|r| r.psnr_db).sum::<f64>() / 4.0;
        assert!((a.summary.psnr_db.mean - mean).abs() <= 1e-9);
        assert!(evaluate(&m, None, 0.0, 7, Split::Train).is_err());
    }

    #[test]
    fn untrained_ad_model_keeps_the_initial_angle() {
        let dir = tempfile::tempdir().unwrap();
        let m = dataset(dir.path());
        let cfg = NetworkConfig {
            stages: 1,
            base_width: 4,
            resblocks_per_stage: 1,
            ad_widths: vec![4],
            ad_mlp_hidden: 3,
            input_channels: 1,
            ..NetworkConfig::default()
        };
        let model = Model::new(cfg, Variant::Ad, m.geometry, 0).unwrap();
        let r = evaluate(&m, Some(&model), 3.0, 1, Split::Test).unwrap();
        for rec in &r.records {
            assert_eq!(rec.abs_err_after, Some(rec.abs_err_before));
        }
        assert!(r.summary.abs_err_after.is_some());
        let dir2 = tempfile::tempdir().unwrap();
        let path = dir2.path().join("eval.csv");
        let summary = r.save(&path).unwrap();
        assert!(summary.exists() && path.exists());
        assert!(r.table().contains("pipeline ad"));

        let other = Model::new(
            model.config.clone(),
            Variant::Ad,
            m.geometry.with_angular_samples(32),
            0,
        )
        .unwrap();
        assert_eq!(
            evaluate(&m, Some(&other), 0.0, 1, Split::Test)
                .unwrap_err()
                .kind(),
            "config_mismatch"
        );
    }
}
