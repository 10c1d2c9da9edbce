use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::{DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::net::observe;
use crate::polar::{cpt, PolarImage};

/// One decoded training pair in the polar frame.
#[derive(Debug, Clone)]
pub struct Sample {
    /// Index of the entry in the manifest.
    pub index: usize,
    pub theta_gt: f64,
    pub gp: PolarImage,
    pub target: PolarImage,
}

/// Decodes the given manifest entries.
pub fn load_samples(
    manifest: &DatasetManifest,
    indices: &[usize],
    channels: usize,
) -> Result<Vec<Sample>> {
    indices
        .iter()
        .map(|&i| {
            let e = &manifest.entries[i];
            let blurred = manifest.load_blurred(e)?;
            let sharp = manifest.load_sharp(e)?;
            if !blurred.same_shape(&sharp) {
                return Err(Error::ShapeMismatch(format!(
                    "{} and {} differ in size",
                    e.blurred_path, e.sharp_path
                )));
            }
            Ok(Sample {
                index: i,
                theta_gt: e.theta_gt,
                gp: observe(&blurred, &manifest.geometry, channels)?,
                target: cpt(&sharp.with_channels(channels)?, &manifest.geometry)?,
            })
        })
        .collect()
}

/// Train and validation entry indices.
///
/// Entries labeled `val` are used when present. Otherwise a seeded
/// `val_fraction` of the `train` sharp identities is held out, keeping all
/// angles of one sharp image on the same side. `test` entries never appear.
pub fn split_indices(
    manifest: &DatasetManifest,
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let train: Vec<usize> = manifest.entries_in(Split::Train).map(|(i, _)| i).collect();
    let val: Vec<usize> = manifest.entries_in(Split::Val).map(|(i, _)| i).collect();
    if train.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} has no train entries",
            manifest.path().display()
        )));
    }
    if !val.is_empty() || val_fraction == 0.0 {
        return Ok((train, val));
    }
    let mut ids: Vec<&str> = train
        .iter()
        .map(|&i| manifest.entries[i].sharp_path.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if ids.len() < 2 {
        return Ok((train, Vec::new()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_val = ((ids.len() as f64 * val_fraction).round() as usize).clamp(1, ids.len() - 1);
    let held: BTreeSet<&str> = ids[..n_val].iter().copied().collect();
    let (v, t): (Vec<usize>, Vec<usize>) = train
        .iter()
        .partition(|&&i| held.contains(manifest.entries[i].sharp_path.as_str()));
    Ok((t, v))
}
