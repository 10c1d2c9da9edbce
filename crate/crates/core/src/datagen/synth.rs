use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::blur::{blur_cartesian, BlurSpec, DEFAULT_N_STEP, DEFAULT_THETA_MAX};
use crate::error::{Error, Result};
use crate::image::{save_raster_with_depth, BitDepth, CartesianImage};
use crate::polar::PolarGeometry;

use super::manifest::{DatasetManifest, ManifestEntry, Split};
use super::patterns::{generate_pattern, PATTERNS};

/// Identifier written to manifests for the blur operator used.
pub const SYNTHESIZER: &str = "arc-average/1";

/// Smallest and largest test-split angle in degrees.
pub const TEST_ANGLE_RANGE: (f64, f64) = (1.0, 40.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlurSynthesisConfig {
    /// Blur angles in degrees, each in `(0, theta_max]`.
    pub angles: Vec<f64>,
    /// Inclusive range `n_step` is drawn from per pair.
    pub n_step_range: (usize, usize),
    pub center: (f64, f64),
    /// Standard deviation of additive Gaussian pixel noise.
    pub additive_noise_sigma: f64,
    pub size: usize,
    pub channels: usize,
    pub theta_max: f64,
    /// Angular samples of the recorded polar geometry; `None` uses the default.
    pub angular_samples: Option<usize>,
    pub seed: u64,
}

impl Default for BlurSynthesisConfig {
    fn default() -> Self {
        Self {
            angles: (1..=40).map(f64::from).collect(),
            n_step_range: (DEFAULT_N_STEP, DEFAULT_N_STEP),
            center: (0.5, 0.5),
            additive_noise_sigma: 0.0,
            size: 320,
            channels: 3,
            theta_max: DEFAULT_THETA_MAX,
            angular_samples: None,
            seed: 0,
        }
    }
}

impl BlurSynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if let Some(&a) = self
            .angles
            .iter()
            .find(|&&a| !(a > 0.0 && a <= self.theta_max))
        {
            return bad(format!("angle {a} outside (0, {}]", self.theta_max));
        }
        let (lo, hi) = self.n_step_range;
        if lo == 0 || hi < lo {
            return bad(format!("invalid n_step range {lo}..={hi}"));
        }
        if !(self.additive_noise_sigma >= 0.0) {
            return bad("additive_noise_sigma must be >= 0".into());
        }
        if !(self.channels == 1 || self.channels == 3) {
            return bad("channels must be 1 or 3".into());
        }
        if self.size < 8 {
            return bad("size must be at least 8".into());
        }
        Ok(())
    }

    pub fn geometry(&self) -> PolarGeometry {
        let g = PolarGeometry::default_for(self.size, self.size);
        let g = PolarGeometry {
            cx: self.center.0,
            cy: self.center.1,
            ..g
        };
        match self.angular_samples {
            Some(t) => g.with_angular_samples(t),
            None => g,
        }
    }
}

/// A sharp source image with a stable identity.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpImage {
    pub id: String,
    /// Pattern family or scene name recorded in the manifest.
    pub source: String,
    pub image: CartesianImage,
}

/// Renders `variations` of each named pattern at `size`, replicated to
/// `channels`. Identities are `{pattern}_{index:03}`.
pub fn pattern_set(
    patterns: &[&str],
    indices: std::ops::Range<usize>,
    size: usize,
    channels: usize,
) -> Result<Vec<SharpImage>> {
    let mut out = Vec::new();
    for &p in patterns {
        for i in indices.clone() {
            out.push(SharpImage {
                id: format!("{p}_{i:03}"),
                source: p.to_string(),
                image: generate_pattern(p, i, size)?.with_channels(channels)?,
            });
        }
    }
    Ok(out)
}

/// All eleven pattern names.
pub fn all_patterns() -> Vec<&'static str> {
    PATTERNS.to_vec()
}

fn write_png(img: &CartesianImage, root: &Path, rel: &str) -> Result<()> {
    save_raster_with_depth(img, root.join(rel), BitDepth::Sixteen)
}

fn add_noise(img: &mut CartesianImage, sigma: f64, rng: &mut ChaCha8Rng) {
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma >= 0");
    for v in img.data_mut() {
        *v = (*v as f64 + normal.sample(rng)).clamp(0.0, 1.0) as f32;
    }
}

struct Writer<'a> {
    cfg: &'a BlurSynthesisConfig,
    root: &'a Path,
    rng: ChaCha8Rng,
    manifest: DatasetManifest,
}

impl<'a> Writer<'a> {
    fn new(cfg: &'a BlurSynthesisConfig, root: &'a Path, stream: u64) -> Result<Self> {
        cfg.validate()?;
        for sub in ["sharp", "blurred"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(|e| Error::Unwritable {
                path: dir.clone(),
                reason: e.to_string(),
            })?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        Ok(Self {
            cfg,
            root,
            rng,
            manifest: DatasetManifest::new(cfg.geometry(), SYNTHESIZER, root),
        })
    }

    fn write_sharp(&self, s: &SharpImage) -> Result<String> {
        if s.image.height() != self.cfg.size || s.image.width() != self.cfg.size {
            return Err(Error::ShapeMismatch(format!(
                "{} is {}x{}, expected {}",
                s.id,
                s.image.height(),
                s.image.width(),
                self.cfg.size
            )));
        }
        let rel = format!("sharp/{}.png", s.id);
        write_png(&s.image.with_channels(self.cfg.channels)?, self.root, &rel)?;
        Ok(rel)
    }

    fn write_pair(
        &mut self,
        s: &SharpImage,
        sharp_rel: &str,
        theta: f64,
        split: Split,
    ) -> Result<()> {
        let (lo, hi) = self.cfg.n_step_range;
        let n_step = self.rng.random_range(lo..=hi);
        let spec = BlurSpec {
            theta_gt: theta,
            theta_initial: theta,
            theta_corrected: None,
            theta_max: self.cfg.theta_max,
            center: self.cfg.center,
            n_step,
        };
        spec.validate()?;
        let mut blurred = blur_cartesian(&s.image.with_channels(self.cfg.channels)?, &spec)?;
        add_noise(&mut blurred, self.cfg.additive_noise_sigma, &mut self.rng);
        let k = self.manifest.entries.len();
        let rel = format!("blurred/{}_{}_{k:05}.png", s.id, split.as_str());
        write_png(&blurred.clamped(), self.root, &rel)?;
        self.manifest.entries.push(ManifestEntry {
            sharp_path: sharp_rel.to_string(),
            blurred_path: rel,
            theta_gt: theta,
            n_step,
            pattern_or_scene: s.source.clone(),
            split,
        });
        Ok(())
    }
}

/// Blurs every sharp image at every configured angle into `root`.
///
/// Entries are labeled `train`; the manifest is returned but not saved.
pub fn synthesize_pairs(
    sharp: &[SharpImage],
    cfg: &BlurSynthesisConfig,
    root: &Path,
) -> Result<DatasetManifest> {
    synthesize_split(sharp, cfg, root, Split::Train)
}

/// Like [`synthesize_pairs`] but labels every entry with `split`.
pub fn synthesize_split(
    sharp: &[SharpImage],
    cfg: &BlurSynthesisConfig,
    root: &Path,
    split: Split,
) -> Result<DatasetManifest> {
    let stream = match split {
        Split::Train => 0,
        Split::Test => 1,
        Split::Val => 2,
    };
    let mut w = Writer::new(cfg, root, stream)?;
    for s in sharp {
        let rel = w.write_sharp(s)?;
        for &theta in &cfg.angles {
            w.write_pair(s, &rel, theta, split)?;
        }
    }
    Ok(w.manifest)
}

/// Draws `count` continuous angles uniformly from [`TEST_ANGLE_RANGE`],
/// cycling through `sharp`, and writes `test` entries into `root`.
pub fn make_test_split(
    sharp: &[SharpImage],
    count: usize,
    rng: &mut impl Rng,
    cfg: &BlurSynthesisConfig,
    root: &Path,
) -> Result<DatasetManifest> {
    if count == 0 || sharp.is_empty() {
        return Err(Error::InvalidArgument(
            "test split needs count >= 1 and at least one image".into(),
        ));
    }
    let (lo, hi) = TEST_ANGLE_RANGE;
    let angles = sample_test_angles(count, rng, lo, hi.min(cfg.theta_max));
    let mut w = Writer::new(cfg, root, 1)?;
    let mut rels: Vec<Option<String>> = vec![None; sharp.len()];
    for (i, &theta) in angles.iter().enumerate() {
        let j = i % sharp.len();
        if rels[j].is_none() {
            rels[j] = Some(w.write_sharp(&sharp[j])?);
        }
        let rel = rels[j].clone().expect("written above");
        w.write_pair(&sharp[j], &rel, theta, Split::Test)?;
    }
    Ok(w.manifest)
}

/// Continuous uniform angles in `[lo, hi]`.
pub fn sample_test_angles(count: usize, rng: &mut impl Rng, lo: f64, hi: f64) -> Vec<f64> {
    (0..count).map(|_| rng.random_range(lo..=hi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> BlurSynthesisConfig {
        BlurSynthesisConfig {
            angles: vec![1.0, 7.0],
            size: 24,
            seed: 4,
            ..Default::default()
        }
    }

    #[test]
    fn pairs_manifest_roundtrip_and_nonidentity() {
        let dir = tempfile::tempdir().unwrap();
        let sharp = pattern_set(&["star", "grid"], 0..2, 24, 3).unwrap();
        let m = synthesize_pairs(&sharp, &tiny_cfg(), dir.path()).unwrap();
        assert_eq!(m.entries.len(), 8);
        m.save().unwrap();
        let back = DatasetManifest::load(dir.path()).unwrap();
        assert_eq!(back, m);
        back.validate().unwrap();

        let e = &m.entries[0];
        assert_eq!(e.theta_gt, 1.0);
        let a = m.load_sharp(e).unwrap();
        let b = m.load_blurred(e).unwrap();
        assert!(a.data().iter().zip(b.data()).any(|(x, y)| x != y));
    }

    #[test]
    fn generation_is_byte_identical() {
        let sharp = pattern_set(&["spiral"], 0..1, 24, 1).unwrap();
        let cfg = BlurSynthesisConfig {
            channels: 1,
            n_step_range: (5, 15),
            additive_noise_sigma: 0.01,
            ..tiny_cfg()
        };
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let m1 = synthesize_pairs(&sharp, &cfg, d1.path()).unwrap();
        let m2 = synthesize_pairs(&sharp, &cfg, d2.path()).unwrap();
        m1.save().unwrap();
        m2.save().unwrap();
        assert_eq!(fs::read(m1.path()).unwrap(), fs::read(m2.path()).unwrap());
        for e in &m1.entries {
            assert_eq!(
                fs::read(d1.path().join(&e.blurred_path)).unwrap(),
                fs::read(d2.path().join(&e.blurred_path)).unwrap()
            );
        }
    }

    #[test]
    fn test_angles_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = sample_test_angles(1000, &mut rng, 1.0, 40.0);
        let min = a.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!(min >= 1.0 && max <= 40.0);
        assert!((mean - 20.5).abs() <= 0.7, "mean {mean}");
        let mut rng2 = ChaCha8Rng::seed_from_u64(17);
        assert_eq!(a, sample_test_angles(1000, &mut rng2, 1.0, 40.0));
    }

    #[test]
    fn test_split_is_disjoint_from_train() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg();
        let train = pattern_set(&["line"], 0..2, 24, 3).unwrap();
        let test = pattern_set(&["line"], 2..4, 24, 3).unwrap();
        let mut m = synthesize_pairs(&train, &cfg, dir.path()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = make_test_split(&test, 5, &mut rng, &cfg, dir.path()).unwrap();
        assert!(t.entries.iter().all(|e| e.split == Split::Test));
        assert!(t.entries.iter().all(|e| e.theta_gt.fract() != 0.0));
        m.extend(t).unwrap();
        m.validate().unwrap();
        let train_ids: std::collections::BTreeSet<_> = m
            .entries_in(Split::Train)
            .map(|(_, e)| &e.sharp_path)
            .collect();
        assert!(m
            .entries_in(Split::Test)
            .all(|(_, e)| !train_ids.contains(&e.sharp_path)));
    }

    #[test]
    fn invalid_angles_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = BlurSynthesisConfig {
            angles: vec![0.0],
            ..tiny_cfg()
        };
        let sharp = pattern_set(&["star"], 0..1, 24, 3).unwrap();
        assert!(synthesize_pairs(&sharp, &cfg, dir.path()).is_err());
    }
}
