use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{Bindings, Graph, Var};
use crate::datagen::DatasetManifest;
use crate::error::{Error, Result};
use crate::losses::{
    angle_loss, combine, l1_loss, physics_loss, ssim_loss, LossReport, LossTerms, LossWeights,
};
use crate::net::{
    forward_graph, polar_to_tensor, Checkpoint, Model, NetworkConfig, TrainingMetadata, Variant,
};

use super::config::TrainConfig;
use super::data::{load_samples, split_indices, Sample};
use super::optim::{clip_grad_norm, inject_angle_noise, AdamState, PlateauScheduler};

pub const LOG_FILE: &str = "train_log.csv";
pub const AUDIT_FILE: &str = "audit.csv";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const NONFINITE_DUMP: &str = "nonfinite_state.json";

const SHUFFLE_STREAM: u64 = 1;
const VAL_NOISE_STREAM: u64 = 2;
const TRAIN_NOISE_STREAM: u64 = 3;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Builds the loss graph of one sample on top of bound parameters.
pub fn sample_loss(
    g: &mut Graph<f32>,
    b: &Bindings,
    network: &NetworkConfig,
    variant: Variant,
    weights: &LossWeights,
    sample: &Sample,
    theta_initial: f64,
) -> Result<(Var, LossReport)> {
    let out = forward_graph(g, b, network, variant, &sample.gp, theta_initial)?;
    let target = polar_to_tensor(g, &sample.target)?;
    let stages = &out.estimates[1..];
    let l1 = l1_loss(g, stages, target)?;
    let ssim = ssim_loss(g, stages, target)?;
    let physics = physics_loss(g, stages, out.gp, out.theta_used, sample.gp.geometry())?;
    let angle = match &out.angle {
        Some(a) => Some(angle_loss(g, a.var, sample.theta_gt, network.theta_max)?),
        None => None,
    };
    combine(
        g,
        &LossTerms {
            l1,
            ssim,
            physics,
            angle,
        },
        weights,
        variant,
    )
}

/// Mean loss over `samples` with angle noise drawn from a fixed stream, so
/// repeated calls on the same model return the same value.
pub fn validation_loss(model: &Model, samples: &[Sample], cfg: &TrainConfig) -> Result<LossReport> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset("no validation samples".into()));
    }
    let mut noise = rng(cfg.seed, VAL_NOISE_STREAM);
    let mut acc = LossReport::default();
    for s in samples {
        let theta = inject_angle_noise(
            s.theta_gt,
            cfg.sigma_noise,
            model.config.theta_max,
            &mut noise,
        );
        let mut g = Graph::<f32>::new();
        let b = model.params.bind(&mut g);
        let (_, r) = sample_loss(
            &mut g,
            &b,
            &model.config,
            model.variant,
            &cfg.weights,
            s,
            theta,
        )?;
        acc.accumulate(&r);
    }
    Ok(acc.scaled(1.0 / samples.len() as f64))
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRow {
    pub epoch: usize,
    pub split: &'static str,
    pub total: f64,
    pub l1: f64,
    pub ssim: f64,
    pub physics: f64,
    pub angle: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
}

impl LogRow {
    fn new(epoch: usize, split: &'static str, r: &LossReport, lr: f64) -> Self {
        Self {
            epoch,
            split,
            total: r.total,
            l1: r.l1,
            ssim: r.ssim,
            physics: r.physics,
            angle: r.angle,
            lr,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct AuditRow<'a> {
    epoch: usize,
    split: &'static str,
    entry: usize,
    sharp_path: &'a str,
}

/// Losses of one finished epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub train: LossReport,
    pub val: Option<LossReport>,
    pub lr: f64,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub best_checkpoint: PathBuf,
    pub last_checkpoint: PathBuf,
    pub log: PathBuf,
    pub audit: PathBuf,
    pub history: Vec<EpochSummary>,
    /// Best monitored loss: validation total, or training total without a
    /// validation split.
    pub best_loss: f64,
    pub train_entries: Vec<usize>,
    pub val_entries: Vec<usize>,
}

#[derive(Serialize)]
struct NonFiniteState<'a> {
    epoch: usize,
    batch: usize,
    entry: usize,
    theta_initial: f64,
    lr: f64,
    report: &'a LossReport,
    grad_norm: Option<f64>,
}

fn unwritable(path: &Path, e: impl ToString) -> Error {
    Error::Unwritable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

/// Trains a fresh model on the manifest's train entries.
pub fn train(
    manifest: &DatasetManifest,
    cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    train_with_progress(manifest, cfg, out_dir, |_| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with_progress(
    manifest: &DatasetManifest,
    cfg: &TrainConfig,
    out_dir: &Path,
    mut progress: impl FnMut(&EpochSummary),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    manifest.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| unwritable(out_dir, e))?;
    let channels = cfg.network.input_channels;
    let (train_idx, val_idx) = split_indices(manifest, cfg.val_fraction, cfg.seed)?;
    let train_set = load_samples(manifest, &train_idx, channels)?;
    let val_set = load_samples(manifest, &val_idx, channels)?;

    let mut model = Model::new(
        cfg.network.clone(),
        cfg.variant,
        manifest.geometry,
        cfg.seed,
    )?;
    let mut adam = AdamState::new();
    let mut sched = PlateauScheduler::new(
        cfg.lr_initial,
        cfg.plateau_patience,
        cfg.plateau_factor,
        cfg.plateau_min_improvement,
    );
    let mut shuffle = rng(cfg.seed, SHUFFLE_STREAM);
    let mut noise = rng(cfg.seed, TRAIN_NOISE_STREAM);

    let log_path = out_dir.join(LOG_FILE);
    let audit_path = out_dir.join(AUDIT_FILE);
    let best_path = out_dir.join(BEST_CHECKPOINT);
    let last_path = out_dir.join(LAST_CHECKPOINT);
    let mut log = csv::Writer::from_path(&log_path).map_err(|e| unwritable(&log_path, e))?;
    let mut audit = csv::Writer::from_path(&audit_path).map_err(|e| unwritable(&audit_path, e))?;

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best_loss = f64::INFINITY;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        let lr = sched.lr();
        order.shuffle(&mut shuffle);
        let mut epoch_report = LossReport::default();
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            model.params.zero_grad();
            let scale = 1.0 / batch.len() as f32;
            for &k in batch {
                let s = &train_set[k];
                audit.serialize(AuditRow {
                    epoch,
                    split: "train",
                    entry: s.index,
                    sharp_path: &manifest.entries[s.index].sharp_path,
                })?;
                let theta = inject_angle_noise(
                    s.theta_gt,
                    cfg.sigma_noise,
                    cfg.network.theta_max,
                    &mut noise,
                );
                let mut g = Graph::<f32>::new();
                let b = model.params.bind(&mut g);
                let (loss, report) = sample_loss(
                    &mut g,
                    &b,
                    &model.config,
                    model.variant,
                    &cfg.weights,
                    s,
                    theta,
                )?;
                let dump = |grad_norm: Option<f64>| {
                    let state = NonFiniteState {
                        epoch,
                        batch: batch_no,
                        entry: s.index,
                        theta_initial: theta,
                        lr,
                        report: &report,
                        grad_norm,
                    };
                    let text = serde_json::to_string(&state).unwrap_or_default();
                    let _ = fs::write(out_dir.join(NONFINITE_DUMP), &text);
                    Error::NonFiniteLoss {
                        epoch,
                        batch: batch_no,
                        state: text,
                    }
                };
                if !report.total.is_finite() {
                    return Err(dump(None));
                }
                g.backward(loss)?;
                model.params.accumulate_grads(&g, &b, scale);
                let norm = model.params.grad_norm();
                if !norm.is_finite() {
                    return Err(dump(Some(norm)));
                }
                epoch_report.accumulate(&report);
            }
            if let Some(c) = cfg.grad_clip {
                clip_grad_norm(&mut model.params, c);
            }
            adam.adam_step(&mut model.params, lr)?;
        }
        let train_report = epoch_report.scaled(1.0 / train_set.len() as f64);

        let val_report = if val_set.is_empty() {
            None
        } else {
            for s in &val_set {
                audit.serialize(AuditRow {
                    epoch,
                    split: "val",
                    entry: s.index,
                    sharp_path: &manifest.entries[s.index].sharp_path,
                })?;
            }
            Some(validation_loss(&model, &val_set, cfg)?)
        };
        let monitored = val_report.as_ref().unwrap_or(&train_report).total;
        sched.observe(monitored);

        log.serialize(LogRow::new(epoch, "train", &train_report, lr))?;
        if let Some(v) = &val_report {
            log.serialize(LogRow::new(epoch, "val", v, lr))?;
        }
        log.flush()?;
        audit.flush()?;

        let best = monitored < best_loss;
        if best {
            best_loss = monitored;
        }
        let meta = |tag: &str| TrainingMetadata {
            epoch,
            val_loss: val_report.map(|v| v.total),
            best_val_loss: val_report.map(|_| best_loss),
            lr: Some(lr),
            seed: Some(cfg.seed),
            tag: tag.to_string(),
        };
        let mut ck = Checkpoint {
            model,
            training: meta("last"),
        };
        ck.save(&last_path)?;
        if best {
            ck.training = meta("best");
            ck.save(&best_path)?;
        }
        model = ck.model;

        let summary = EpochSummary {
            epoch,
            train: train_report,
            val: val_report,
            lr,
            best,
        };
        progress(&summary);
        history.push(summary);
    }

    Ok(TrainOutcome {
        best_checkpoint: best_path,
        last_checkpoint: last_path,
        log: log_path,
        audit: audit_path,
        history,
        best_loss,
        train_entries: train_idx,
        val_entries: val_idx,
    })
}
