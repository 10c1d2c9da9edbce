//! Checkpoint container.
//!
//! Layout: 8 magic bytes, a little-endian `u32` header length, a JSON header,
//! then every tensor as raw little-endian `f32` in header order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::polar::PolarGeometry;

use super::config::{NetworkConfig, Variant};
use super::init::layer_specs;
use super::pipeline::Model;

pub const MAGIC: &[u8; 8] = b"CARNETCK";
pub const FORMAT_VERSION: u32 = 1;

/// Training state recorded alongside the weights. Contains no timestamps so
/// identical runs produce identical files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub epoch: usize,
    pub val_loss: Option<f64>,
    pub best_val_loss: Option<f64>,
    pub lr: Option<f64>,
    pub seed: Option<u64>,
    /// `"best"`, `"last"`, or empty for untrained models.
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    network: NetworkConfig,
    geometry: PolarGeometry,
    variant: Variant,
    training: TrainingMetadata,
    tensors: Vec<TensorEntry>,
}

/// A model plus its training metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub training: TrainingMetadata,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let m = &self.model;
        let header = Header {
            format_version: FORMAT_VERSION,
            network: m.config.clone(),
            geometry: m.geometry,
            variant: m.variant,
            training: self.training.clone(),
            tensors: m
                .params
                .iter()
                .map(|(name, p)| TensorEntry {
                    name: name.to_string(),
                    shape: p.shape.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(12 + json.len() + 4 * m.params.count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, p) in m.params.iter() {
            for v in &p.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(corrupt("not a checkpoint (bad magic)"));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = bytes
            .get(12..12 + hlen)
            .ok_or_else(|| corrupt("truncated header"))?;
        let header: Header = serde_json::from_slice(body)?;
        if header.format_version != FORMAT_VERSION {
            return Err(corrupt(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        header.network.validate()?;
        header.geometry.validate()?;

        let expected: Vec<(String, Vec<usize>)> = layer_specs(&header.network, header.variant)
            .into_iter()
            .flat_map(|s| {
                let out = s.weight_shape[0];
                [
                    (format!("{}.weight", s.name), s.weight_shape),
                    (format!("{}.bias", s.name), vec![out]),
                ]
            })
            .collect();
        let mut expected_sorted = expected.clone();
        expected_sorted.sort();
        let found: Vec<(String, Vec<usize>)> = header
            .tensors
            .iter()
            .map(|t| (t.name.clone(), t.shape.clone()))
            .collect();
        if found != expected_sorted {
            return Err(Error::ConfigMismatch(
                "tensor index does not match the architecture described by the header".into(),
            ));
        }

        let mut params = ParamStore::new();
        let mut offset = 12 + hlen;
        for t in &header.tensors {
            let n: usize = t.shape.iter().product();
            let raw = bytes
                .get(offset..offset + 4 * n)
                .ok_or_else(|| corrupt(format!("truncated data for {}", t.name)))?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            params.insert(t.name.clone(), &t.shape, data)?;
            offset += 4 * n;
        }
        if offset != bytes.len() {
            return Err(corrupt("trailing bytes after tensor data"));
        }
        Ok(Self {
            model: Model {
                config: header.network,
                variant: header.variant,
                geometry: header.geometry,
                params,
            },
            training: header.training,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::Unwritable {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_bytes(&fs::read(path)?)
    }

    /// Loads and rejects checkpoints built for another architecture or frame.
    pub fn load_expecting(
        path: impl AsRef<Path>,
        config: Option<&NetworkConfig>,
        geometry: Option<&PolarGeometry>,
    ) -> Result<Self> {
        let ck = Self::load(path)?;
        if let Some(cfg) = config {
            if cfg != &ck.model.config {
                return Err(Error::ConfigMismatch(format!(
                    "checkpoint network {:?} differs from expected {:?}",
                    ck.model.config, cfg
                )));
            }
        }
        if let Some(geom) = geometry {
            if geom != &ck.model.geometry {
                return Err(Error::ConfigMismatch(format!(
                    "checkpoint geometry {:?} differs from expected {:?}",
                    ck.model.geometry, geom
                )));
            }
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> NetworkConfig {
        NetworkConfig {
            stages: 1,
            base_width: 4,
            resblocks_per_stage: 1,
            ad_widths: vec![4, 4],
            ad_mlp_hidden: 3,
            input_channels: 1,
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let geom = PolarGeometry::new(0.5, 0.5, 4, 16, 4.0).unwrap();
        let model = Model::new(small(), Variant::Ad, geom, 3).unwrap();
        let ck = Checkpoint {
            model,
            training: TrainingMetadata {
                epoch: 2,
                val_loss: Some(0.25),
                tag: "last".into(),
                ..Default::default()
            },
        };
        let bytes = ck.to_bytes().unwrap();
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), ck);
        assert_eq!(ck.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn rejects_corruption_and_mismatch() {
        let geom = PolarGeometry::new(0.5, 0.5, 4, 16, 4.0).unwrap();
        let ck = Checkpoint {
            model: Model::new(small(), Variant::Base, geom, 1).unwrap(),
            training: TrainingMetadata::default(),
        };
        let bytes = ck.to_bytes().unwrap();
        assert_eq!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 1])
                .unwrap_err()
                .kind(),
            "checkpoint"
        );
        assert_eq!(
            Checkpoint::from_bytes(b"nonsense data").unwrap_err().kind(),
            "checkpoint"
        );

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        ck.save(&path).unwrap();
        let other = NetworkConfig {
            base_width: 5,
            ..small()
        };
        let err = Checkpoint::load_expecting(&path, Some(&other), None).unwrap_err();
        assert_eq!(err.kind(), "config_mismatch");
        let g2 = geom.with_angular_samples(32);
        assert_eq!(
            Checkpoint::load_expecting(&path, None, Some(&g2))
                .unwrap_err()
                .kind(),
            "config_mismatch"
        );
        assert!(Checkpoint::load_expecting(&path, Some(&small()), Some(&geom)).is_ok());
    }
}
