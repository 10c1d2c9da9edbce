use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{load_raster, CartesianImage};
use crate::polar::PolarGeometry;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// One blurred/sharp pair. Paths are relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sharp_path: String,
    pub blurred_path: String,
    pub theta_gt: f64,
    pub n_step: usize,
    pub pattern_or_scene: String,
    pub split: Split,
}

/// First line of a manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestHeader {
    format_version: u32,
    geometry: PolarGeometry,
    synthesizer: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub geometry: PolarGeometry,
    pub synthesizer: String,
    pub entries: Vec<ManifestEntry>,
    /// Directory the entry paths are relative to.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn new(
        geometry: PolarGeometry,
        synthesizer: impl Into<String>,
        root: impl Into<PathBuf>,
    ) -> Self {
        Self {
            format_version: MANIFEST_FORMAT_VERSION,
            geometry,
            synthesizer: synthesizer.into(),
            entries: Vec::new(),
            root: root.into(),
        }
    }

    pub fn path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let header = ManifestHeader {
            format_version: self.format_version,
            geometry: self.geometry,
            synthesizer: self.synthesizer.clone(),
        };
        let mut out = serde_json::to_string(&header)?;
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Writes `manifest.jsonl` into the root directory.
    pub fn save(&self) -> Result<PathBuf> {
        let path = self.path();
        let mut f = fs::File::create(&path).map_err(|e| Error::Unwritable {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        f.write_all(self.to_jsonl()?.as_bytes())?;
        Ok(path)
    }

    /// Parses a manifest; `path` may be the file or its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut path = path.as_ref().to_path_buf();
        if path.is_dir() {
            path = path.join(MANIFEST_FILE);
        }
        if !path.exists() {
            return Err(Error::MissingFile(path));
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let reader = BufReader::new(fs::File::open(&path)?);
        let mut lines = reader.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Manifest(format!("{} is empty", path.display())))??;
        let header: ManifestHeader = serde_json::from_str(&first)
            .map_err(|e| Error::Manifest(format!("bad header line: {e}")))?;
        if header.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: ManifestEntry = serde_json::from_str(&line)
                .map_err(|err| Error::Manifest(format!("line {}: {err}", i + 2)))?;
            entries.push(e);
        }
        Ok(Self {
            format_version: header.format_version,
            geometry: header.geometry,
            synthesizer: header.synthesizer,
            entries,
            root,
        })
    }

    pub fn entries_in(&self, split: Split) -> impl Iterator<Item = (usize, &ManifestEntry)> {
        self.entries
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.split == split)
    }

    /// Appends every entry of `other`, which must share this manifest's root
    /// and geometry.
    pub fn extend(&mut self, other: DatasetManifest) -> Result<()> {
        if other.geometry != self.geometry || other.root != self.root {
            return Err(Error::Manifest(
                "cannot merge manifests with different roots or geometry".into(),
            ));
        }
        self.entries.extend(other.entries);
        Ok(())
    }

    pub fn load_sharp(&self, e: &ManifestEntry) -> Result<CartesianImage> {
        load_raster(self.root.join(&e.sharp_path))
    }

    pub fn load_blurred(&self, e: &ManifestEntry) -> Result<CartesianImage> {
        load_raster(self.root.join(&e.blurred_path))
    }

    /// Checks that referenced files exist and that no sharp image appears in
    /// two different splits.
    pub fn validate(&self) -> Result<()> {
        let mut owner = std::collections::BTreeMap::new();
        for e in &self.entries {
            for p in [&e.sharp_path, &e.blurred_path] {
                if !self.root.join(p).exists() {
                    return Err(Error::MissingFile(self.root.join(p)));
                }
            }
            if let Some(prev) = owner.insert(e.sharp_path.clone(), e.split) {
                if prev != e.split {
                    return Err(Error::Manifest(format!(
                        "{} appears in both the {} and {} splits",
                        e.sharp_path,
                        prev.as_str(),
                        e.split.as_str()
                    )));
                }
            }
        }
        Ok(())
    }
}
