//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::blur::{blur_cartesian, BlurSpec, DEFAULT_N_STEP, DEFAULT_THETA_MAX};
use crate::datagen::{
    all_patterns, make_test_split, pattern_set, synthesize_pairs, BlurSynthesisConfig,
    DatasetManifest, Split,
};
use crate::error::{Error, Result};
use crate::eval::{count_params, evaluate};
use crate::image::{load_raster, save_raster};
use crate::net::{inversion, layer_specs, observe, Checkpoint, DeblurResult, Variant};
use crate::polar::{pct, PolarGeometry};
use crate::train::{train_with_progress, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "carnet",
    version,
    about = "Rotational motion deblurring toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render patterns, blur them and write a dataset manifest.
    GenData(GenDataArgs),
    /// Apply a rotational blur to one image.
    Blur(BlurArgs),
    /// Deblur one image, by inversion only or with a trained checkpoint.
    Deblur(DeblurArgs),
    /// Train a model from a JSON config.
    Train(TrainArgs),
    /// Evaluate a checkpoint, or inversion only, on a manifest split.
    Eval(EvalArgs),
    /// Print the architecture, parameter counts and metadata of a checkpoint.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// `all` or a comma-separated list of pattern names.
    #[arg(long, default_value = "all")]
    pub patterns: String,
    /// Variations per pattern for the training pairs.
    #[arg(long, default_value_t = 10)]
    pub variations: usize,
    /// `lo:hi` for every integer angle in the range, or a comma-separated list.
    #[arg(long, default_value = "1:40")]
    pub angles: String,
    #[arg(long, default_value_t = 320)]
    pub size: usize,
    #[arg(long, default_value_t = 3)]
    pub channels: usize,
    /// `n` or `lo:hi`; each pair draws its step count from the range.
    #[arg(long, default_value_t = DEFAULT_N_STEP.to_string())]
    pub n_step: String,
    #[arg(long)]
    pub angular_samples: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of test pairs with continuous random angles; 0 writes none.
    #[arg(long, default_value_t = 0)]
    pub test_count: usize,
    /// Held-out variations per pattern that supply the test images.
    #[arg(long, default_value_t = 1)]
    pub test_variations: usize,
}

#[derive(Debug, Args)]
pub struct BlurArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Blur angle in degrees.
    #[arg(long)]
    pub theta: f64,
    #[arg(long, default_value_t = DEFAULT_N_STEP)]
    pub n_step: usize,
    #[arg(long, default_value_t = 0.5)]
    pub cx: f64,
    #[arg(long, default_value_t = 0.5)]
    pub cy: f64,
}

#[derive(Debug, Args)]
pub struct DeblurArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Trained checkpoint; without it only the frequency inversion runs.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Angle estimate in degrees.
    #[arg(long)]
    pub theta_initial: f64,
    /// Pipeline to run; must match the checkpoint when one is given.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Angular samples for inversion-only mode.
    #[arg(long)]
    pub angular_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON file with the training configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the manifest named in the config.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Overrides the output directory named in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Suppress per-epoch progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Trained checkpoint; without it the inversion-only pipeline is scored.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Angle-noise standard deviation in degrees.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Per-image CSV; the summary JSON is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub checkpoint: PathBuf,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

fn parse_angles(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("cannot parse angles {s:?}"));
    if let Some((lo, hi)) = s.split_once(':') {
        let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: i64 = hi.trim().parse().map_err(|_| bad())?;
        if hi < lo {
            return Err(bad());
        }
        return Ok((lo..=hi).map(|a| a as f64).collect());
    }
    s.split(',')
        .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidArgument(format!("cannot parse range {s:?}"));
    match s.split_once(':') {
        Some((lo, hi)) => Ok((
            lo.trim().parse().map_err(|_| bad())?,
            hi.trim().parse().map_err(|_| bad())?,
        )),
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            Ok((n, n))
        }
    }
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Unwritable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    let patterns: Vec<&str> = if a.patterns == "all" {
        all_patterns()
    } else {
        a.patterns.split(',').map(str::trim).collect()
    };
    let cfg = BlurSynthesisConfig {
        angles: parse_angles(&a.angles)?,
        n_step_range: parse_range(&a.n_step)?,
        additive_noise_sigma: a.noise_sigma,
        size: a.size,
        channels: a.channels,
        angular_samples: a.angular_samples,
        seed: a.seed,
        ..Default::default()
    };
    cfg.validate()?;
    let sharp = pattern_set(&patterns, 0..a.variations, a.size, a.channels)?;
    let mut manifest = synthesize_pairs(&sharp, &cfg, &a.out)?;
    if a.test_count > 0 {
        let held = pattern_set(
            &patterns,
            a.variations..a.variations + a.test_variations.max(1),
            a.size,
            a.channels,
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        manifest.extend(make_test_split(
            &held,
            a.test_count,
            &mut rng,
            &cfg,
            &a.out,
        )?)?;
    }
    let path = manifest.save()?;
    println!(
        "wrote {} entries to {}",
        manifest.entries.len(),
        path.display()
    );
    Ok(())
}

fn blur(a: &BlurArgs) -> Result<()> {
    let img = load_raster(&a.input)?;
    let spec = BlurSpec {
        center: (a.cx, a.cy),
        ..BlurSpec::new(a.theta)?.with_n_step(a.n_step)
    };
    spec.validate()?;
    save_raster(&blur_cartesian(&img, &spec)?.clamped(), &a.output)?;
    println!("wrote {}", a.output.display());
    Ok(())
}

#[derive(Serialize)]
struct DeblurSidecar {
    input: PathBuf,
    pipeline: String,
    checkpoint: Option<PathBuf>,
    theta_initial: f64,
    theta_used: f64,
    theta_corrected: Option<f64>,
    geometry: PolarGeometry,
}

fn deblur(a: &DeblurArgs) -> Result<()> {
    let img = load_raster(&a.input)?;
    let (h, w) = (img.height(), img.width());
    let (out, sidecar) = match &a.checkpoint {
        None => {
            if a.variant.is_some_and(|v| v != Variant::Base) {
                return Err(Error::InvalidArgument(
                    "--variant ad needs --checkpoint".into(),
                ));
            }
            let theta = a.theta_initial;
            if !(theta > 0.0 && theta <= DEFAULT_THETA_MAX) {
                return Err(Error::InvalidArgument(format!(
                    "theta {theta} outside (0, {DEFAULT_THETA_MAX}]"
                )));
            }
            let mut geom = PolarGeometry::default_for(h, w);
            if let Some(t) = a.angular_samples {
                geom = geom.with_angular_samples(t);
            }
            geom.validate()?;
            let f0 = inversion(&observe(&img, &geom, img.channels())?, theta)?;
            let sidecar = DeblurSidecar {
                input: a.input.clone(),
                pipeline: "inversion".into(),
                checkpoint: None,
                theta_initial: theta,
                theta_used: theta,
                theta_corrected: None,
                geometry: geom,
            };
            (pct(&f0, h, w).clamped(), sidecar)
        }
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            let model = &ck.model;
            if let Some(v) = a.variant {
                if v != model.variant {
                    return Err(Error::ConfigMismatch(format!(
                        "--variant {v} but the checkpoint holds a {} model",
                        model.variant
                    )));
                }
            }
            let expect = PolarGeometry::default_for(h, w);
            if expect.radial_samples != model.geometry.radial_samples
                || expect.max_radius != model.geometry.max_radius
            {
                return Err(Error::GeometryMismatch(format!(
                    "{h}x{w} input does not fit the checkpoint frame {:?}",
                    model.geometry
                )));
            }
            let r: DeblurResult = model.forward(&img, a.theta_initial)?;
            let sidecar = DeblurSidecar {
                input: a.input.clone(),
                pipeline: model.variant.to_string(),
                checkpoint: Some(path.clone()),
                theta_initial: a.theta_initial,
                theta_used: r.theta_used,
                theta_corrected: r.theta_corrected,
                geometry: model.geometry,
            };
            let out = r.to_cartesian(h, w);
            let out = if out.channels() != img.channels() {
                out.with_channels(img.channels())?
            } else {
                out
            };
            (out, sidecar)
        }
    };
    save_raster(&out, &a.output)?;
    let side = a.output.with_extension("json");
    write_json(&side, &sidecar)?;
    println!("wrote {} and {}", a.output.display(), side.display());
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let mut cfg = TrainConfig::load(&a.config)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let resolve = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
    let manifest_path = a
        .manifest
        .clone()
        .or_else(|| cfg.manifest.clone().map(resolve))
        .ok_or_else(|| {
            Error::InvalidArgument("no manifest given (config `manifest` or --manifest)".into())
        })?;
    let out = a
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone().map(resolve))
        .ok_or_else(|| {
            Error::InvalidArgument(
                "no output directory given (config `output_dir` or --out)".into(),
            )
        })?;
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    let manifest = DatasetManifest::load(&manifest_path)?;
    let quiet = a.quiet;
    let outcome = train_with_progress(&manifest, &cfg, &out, |s| {
        if !quiet {
            let val = s
                .val
                .map(|v| format!("{:.6}", v.total))
                .unwrap_or_else(|| "-".into());
            eprintln!(
                "epoch {:>4}  train {:.6}  val {}  lr {:.3e}{}",
                s.epoch,
                s.train.total,
                val,
                s.lr,
                if s.best { "  *" } else { "" }
            );
        }
    })?;
    println!("best checkpoint {}", outcome.best_checkpoint.display());
    println!("last checkpoint {}", outcome.last_checkpoint.display());
    println!("log {}", outcome.log.display());
    Ok(())
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&a.manifest)?;
    let ck = a.checkpoint.as_ref().map(Checkpoint::load).transpose()?;
    let report = evaluate(
        &manifest,
        ck.as_ref().map(|c| &c.model),
        a.sigma,
        a.seed,
        parse_split(&a.split)?,
    )?;
    let summary = report.save(&a.out)?;
    print!("{}", report.table());
    println!("wrote {} and {}", a.out.display(), summary.display());
    Ok(())
}

#[derive(Serialize)]
struct LayerReport {
    name: String,
    weight_shape: Vec<usize>,
    params: usize,
}

#[derive(Serialize)]
struct InspectReport<'a> {
    variant: Variant,
    total_params: usize,
    refinement_params: usize,
    final_block_params: usize,
    angle_detector_params: usize,
    network: &'a crate::net::NetworkConfig,
    geometry: &'a PolarGeometry,
    training: &'a crate::net::TrainingMetadata,
    layers: Vec<LayerReport>,
}

fn inspect(a: &InspectArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let m = &ck.model;
    let layers: Vec<LayerReport> = layer_specs(&m.config, m.variant)
        .into_iter()
        .map(|s| LayerReport {
            params: s.numel(),
            name: s.name,
            weight_shape: s.weight_shape,
        })
        .collect();
    let report = InspectReport {
        variant: m.variant,
        total_params: count_params(&ck),
        refinement_params: m.params.count_prefix("rs"),
        final_block_params: m.params.count_prefix("fr."),
        angle_detector_params: m.params.count_prefix("ad."),
        network: &m.config,
        geometry: &m.geometry,
        training: &ck.training,
        layers,
    };
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    println!("variant            {}", report.variant);
    println!(
        "total parameters   {} ({:.2}M)",
        report.total_params,
        report.total_params as f64 / 1e6
    );
    println!("  refinement       {}", report.refinement_params);
    println!("  final block      {}", report.final_block_params);
    println!("  angle detector   {}", report.angle_detector_params);
    println!(
        "geometry           R={} Θ={} center=({}, {}) max_radius={}",
        m.geometry.radial_samples,
        m.geometry.angular_samples,
        m.geometry.cx,
        m.geometry.cy,
        m.geometry.max_radius
    );
    println!(
        "training           epoch={} tag={:?} val_loss={:?} lr={:?}",
        ck.training.epoch, ck.training.tag, ck.training.val_loss, ck.training.lr
    );
    for l in &report.layers {
        println!(
            "  {:<24} {:>16} {:>9}",
            l.name,
            format!("{:?}", l.weight_shape),
            l.params
        );
    }
    Ok(())
}

/// Runs one parsed command.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Blur(a) => blur(a),
        Command::Deblur(a) => deblur(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Inspect(a) => inspect(a),
    }
}

/// One-line error report: `error kind=<kind> message=<json string>`.
pub fn error_line(e: &Error) -> String {
    format!(
        "error kind={} message={}",
        e.kind(),
        serde_json::to_string(&e.to_string()).unwrap_or_default()
    )
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            1
        }
    }
}
