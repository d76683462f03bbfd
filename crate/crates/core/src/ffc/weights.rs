//! Portable weight container: a JSON manifest naming every tensor with its
//! shape and byte offset, plus a blob of little-endian `f32`s.
//!
//! The manifest is either a bare `[{name, shape, offset}, ...]` array or an
//! object carrying the same array under `tensors` together with the
//! activation. Kernel sizes and channel widths are read from the shapes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::block::{Activation, FfcBlockWeights, ResidualBlock};
use super::conv::{Affine, Conv2d};
use super::generator::{ConvLayer, GeneratorWeights, BLOCK_COUNT};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
}

impl TensorEntry {
    fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightManifest {
    #[serde(default = "format_version")]
    pub format_version: u32,
    #[serde(default)]
    pub activation: Activation,
    pub tensors: Vec<TensorEntry>,
}

fn format_version() -> u32 {
    FORMAT_VERSION
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ManifestDoc {
    Full(WeightManifest),
    Bare(Vec<TensorEntry>),
}

impl WeightManifest {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        Ok(match serde_json::from_slice::<ManifestDoc>(bytes)? {
            ManifestDoc::Full(m) => m,
            ManifestDoc::Bare(tensors) => WeightManifest {
                format_version: FORMAT_VERSION,
                activation: Activation::default(),
                tensors,
            },
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises")
    }
}

struct Reader<'a> {
    entries: BTreeMap<&'a str, &'a TensorEntry>,
    used: BTreeSet<&'a str>,
    blob: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(manifest: &'a WeightManifest, blob: &'a [u8]) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut needed = 0;
        for e in &manifest.tensors {
            if entries.insert(e.name.as_str(), e).is_some() {
                return Err(Error::ShapeMismatch(format!("tensor `{}` listed twice", e.name)));
            }
            needed = needed.max(e.offset + 4 * e.numel());
        }
        if needed > blob.len() {
            return Err(Error::BlobTooShort {
                needed,
                actual: blob.len(),
            });
        }
        Ok(Reader {
            entries,
            used: BTreeSet::new(),
            blob,
        })
    }

    fn take(&mut self, name: &str, rank: usize) -> Result<(Vec<usize>, Vec<f32>)> {
        let (key, entry) = self
            .entries
            .get_key_value(name)
            .map(|(k, e)| (*k, *e))
            .ok_or_else(|| Error::MissingTensor(name.to_string()))?;
        if entry.shape.len() != rank {
            return Err(Error::ShapeMismatch(format!(
                "`{name}` should have rank {rank}, has shape {:?}",
                entry.shape
            )));
        }
        self.used.insert(key);
        let bytes = &self.blob[entry.offset..entry.offset + 4 * entry.numel()];
        let values = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok((entry.shape.clone(), values))
    }

    fn vector(&mut self, name: &str, len: usize) -> Result<Vec<f32>> {
        let (shape, v) = self.take(name, 1)?;
        if shape[0] != len {
            return Err(Error::ShapeMismatch(format!("`{name}` should hold {len} values, holds {}", shape[0])));
        }
        Ok(v)
    }

    fn conv(&mut self, prefix: &str, stride: usize) -> Result<Conv2d> {
        let (shape, weight) = self.take(&format!("{prefix}.weight"), 4)?;
        if shape[2] != shape[3] {
            return Err(Error::ShapeMismatch(format!("`{prefix}.weight` kernel is not square: {shape:?}")));
        }
        let bias = self.vector(&format!("{prefix}.bias"), shape[0])?;
        Conv2d::new(shape[1], shape[0], shape[2], stride, weight, bias)
            .map_err(|e| Error::ShapeMismatch(format!("`{prefix}`: {e}")))
    }

    fn affine(&mut self, prefix: &str, channels: usize) -> Result<Affine> {
        Ok(Affine {
            scale: self.vector(&format!("{prefix}.scale"), channels)?,
            shift: self.vector(&format!("{prefix}.shift"), channels)?,
        })
    }

    fn layer(&mut self, prefix: &str, stride: usize) -> Result<ConvLayer> {
        let conv = self.conv(prefix, stride)?;
        let norm = self.affine(&format!("{prefix}.norm"), conv.out_channels)?;
        Ok(ConvLayer { conv, norm })
    }

    fn ffc(&mut self, prefix: &str, activation: Activation) -> Result<FfcBlockWeights> {
        let l2l = self.conv(&format!("{prefix}.l2l"), 1)?;
        let l2g = self.conv(&format!("{prefix}.l2g"), 1)?;
        let g2l = self.conv(&format!("{prefix}.g2l"), 1)?;
        let spectral = self.conv(&format!("{prefix}.spectral"), 1)?;
        let local = l2l.out_channels;
        let global = l2g.out_channels;
        let w = FfcBlockWeights {
            local_channels: local,
            global_channels: global,
            spectral_norm: self.affine(&format!("{prefix}.spectral.norm"), 2 * global)?,
            norm_local: self.affine(&format!("{prefix}.norm_local"), local)?,
            norm_global: self.affine(&format!("{prefix}.norm_global"), global)?,
            l2l,
            l2g,
            g2l,
            spectral,
            activation,
        };
        w.validate()
            .map_err(|e| Error::ShapeMismatch(format!("`{prefix}`: {e}")))?;
        Ok(w)
    }

    fn finish(self) -> Result<()> {
        if let Some(extra) = self.entries.keys().find(|k| !self.used.contains(*k)) {
            return Err(Error::ShapeMismatch(format!("unexpected tensor `{extra}`")));
        }
        Ok(())
    }
}

/// Materialises and validates a generator from a manifest and its blob.
pub fn load_weights(manifest: &[u8], blob: &[u8]) -> Result<GeneratorWeights> {
    let manifest = WeightManifest::parse(manifest)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::InvalidValue(format!(
            "unsupported weight format version {}",
            manifest.format_version
        )));
    }
    let act = manifest.activation;
    let mut r = Reader::new(&manifest, blob)?;
    let stem = r.layer("stem", 1)?;
    let down = [r.layer("down.0", 2)?, r.layer("down.1", 2)?, r.layer("down.2", 2)?];
    let mut blocks = Vec::with_capacity(BLOCK_COUNT);
    for i in 0..BLOCK_COUNT {
        blocks.push(ResidualBlock {
            first: r.ffc(&format!("blocks.{i}.ffc0"), act)?,
            second: r.ffc(&format!("blocks.{i}.ffc1"), act)?,
        });
    }
    let up = [r.layer("up.0", 1)?, r.layer("up.1", 1)?, r.layer("up.2", 1)?];
    let head = r.conv("head", 1)?;
    r.finish()?;
    let weights = GeneratorWeights {
        stem,
        down,
        blocks,
        up,
        head,
        activation: act,
    };
    weights.validate()?;
    Ok(weights)
}

#[derive(Default)]
struct Writer {
    entries: Vec<TensorEntry>,
    blob: Vec<u8>,
}

impl Writer {
    fn push(&mut self, name: String, shape: Vec<usize>, values: &[f32]) {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.entries.push(TensorEntry {
            name,
            shape,
            offset: self.blob.len(),
        });
        for v in values {
            self.blob.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn conv(&mut self, prefix: &str, c: &Conv2d) {
        self.push(
            format!("{prefix}.weight"),
            vec![c.out_channels, c.in_channels, c.kernel, c.kernel],
            &c.weight,
        );
        self.push(format!("{prefix}.bias"), vec![c.out_channels], &c.bias);
    }

    fn affine(&mut self, prefix: &str, a: &Affine) {
        self.push(format!("{prefix}.scale"), vec![a.channels()], &a.scale);
        self.push(format!("{prefix}.shift"), vec![a.channels()], &a.shift);
    }

    fn layer(&mut self, prefix: &str, l: &ConvLayer) {
        self.conv(prefix, &l.conv);
        self.affine(&format!("{prefix}.norm"), &l.norm);
    }

    fn ffc(&mut self, prefix: &str, w: &FfcBlockWeights) {
        self.conv(&format!("{prefix}.l2l"), &w.l2l);
        self.conv(&format!("{prefix}.l2g"), &w.l2g);
        self.conv(&format!("{prefix}.g2l"), &w.g2l);
        self.conv(&format!("{prefix}.spectral"), &w.spectral);
        self.affine(&format!("{prefix}.spectral.norm"), &w.spectral_norm);
        self.affine(&format!("{prefix}.norm_local"), &w.norm_local);
        self.affine(&format!("{prefix}.norm_global"), &w.norm_global);
    }
}

impl GeneratorWeights {
    /// Serialises into a manifest and blob accepted by [`load_weights`].
    pub fn to_container(&self) -> (WeightManifest, Vec<u8>) {
        let mut w = Writer::default();
        w.layer("stem", &self.stem);
        for (i, d) in self.down.iter().enumerate() {
            w.layer(&format!("down.{i}"), d);
        }
        for (i, b) in self.blocks.iter().enumerate() {
            w.ffc(&format!("blocks.{i}.ffc0"), &b.first);
            w.ffc(&format!("blocks.{i}.ffc1"), &b.second);
        }
        for (i, u) in self.up.iter().enumerate() {
            w.layer(&format!("up.{i}"), u);
        }
        w.conv("head", &self.head);
        let manifest = WeightManifest {
            format_version: FORMAT_VERSION,
            activation: self.activation,
            tensors: w.entries,
        };
        (manifest, w.blob)
    }

    /// Loads `<stem>.json` + `<stem>.bin`, given the manifest path.
    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let manifest_path = manifest_path.as_ref();
        let manifest = std::fs::read(manifest_path)?;
        let blob = std::fs::read(manifest_path.with_extension("bin"))?;
        load_weights(&manifest, &blob)
    }

    /// Writes `<stem>.json` + `<stem>.bin`, given the manifest path.
    pub fn save(&self, manifest_path: impl AsRef<Path>) -> Result<()> {
        let manifest_path = manifest_path.as_ref();
        let (manifest, blob) = self.to_container();
        std::fs::write(manifest_path, manifest.to_json())?;
        std::fs::write(manifest_path.with_extension("bin"), blob)?;
        Ok(())
    }
}
