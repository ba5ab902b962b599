//! The deployable neural asset and its `RNA1` file format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "RNA1" | u32 version | u32 header_len | header_len bytes of UTF-8 JSON | f32 tensors
//! ```
//!
//! The JSON header lists the tensors in storage order with their shapes:
//! the three triplane planes (`triplane.xy`, `triplane.yz`, `triplane.zx`,
//! each `[R, R, C]`) followed by `mlp.{i}.weight` (`[out, in]`) and
//! `mlp.{i}.bias` (`[out]`) for every layer.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AssetKind, Shape};
use crate::math::{Aabb, Rgb};

use super::mlp::{Layer, Mlp, OutputActivation};
use super::model::{NeuralModel, PropertyLayout, ShadingQuery};
use super::triplane::{TriplaneGrid, PLANE_NAMES};

pub const MAGIC: &[u8; 4] = b"RNA1";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("not an RNA1 asset (bad magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported asset version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("asset truncated: {0}")]
    Truncated(String),
    #[error("invalid asset header: {0}")]
    Header(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("shading frame does not match the asset's {0:?} layout")]
    LayoutMismatch(PropertyLayout),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AssetMetadata {
    pub seed: u64,
    pub epochs: usize,
    pub final_loss: f64,
    #[serde(default)]
    pub validation_psnr: Option<f64>,
    /// `false` when trained without the visibility hint: only the lit head is used.
    pub dual_output: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralAsset {
    pub geometry: Shape,
    pub model: NeuralModel<f32>,
    pub metadata: AssetMetadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: AssetKind,
    layout: PropertyLayout,
    resolution: usize,
    channels: usize,
    layer_sizes: Vec<usize>,
    output_activation: OutputActivation,
    bounds: Aabb,
    geometry: Shape,
    metadata: AssetMetadata,
    tensors: Vec<TensorInfo>,
}

impl NeuralAsset {
    pub fn kind(&self) -> AssetKind {
        self.model.layout.kind()
    }

    pub fn parameter_count(&self) -> usize {
        self.model.parameter_count()
    }

    /// `(lit, shadowed)` radiance per unit irradiance. Single-head assets
    /// return the lit output twice.
    pub fn shade(&self, q: &ShadingQuery) -> Result<(Rgb, Rgb), AssetError> {
        let (lit, shadowed) = self.model.eval(q).ok_or(AssetError::LayoutMismatch(self.model.layout))?;
        let to_rgb = |v: [f32; 3]| Rgb::new(v[0] as f64, v[1] as f64, v[2] as f64);
        let lit = to_rgb(lit);
        Ok((lit, if self.metadata.dual_output { to_rgb(shadowed) } else { lit }))
    }

    fn header(&self) -> Header {
        let r = self.model.grid.resolution();
        let c = self.model.grid.channels();
        let mut tensors: Vec<TensorInfo> =
            PLANE_NAMES.iter().map(|n| TensorInfo { name: format!("triplane.{n}"), shape: vec![r, r, c] }).collect();
        for (i, l) in self.model.mlp.layers.iter().enumerate() {
            tensors.push(TensorInfo { name: format!("mlp.{i}.weight"), shape: vec![l.outputs, l.inputs] });
            tensors.push(TensorInfo { name: format!("mlp.{i}.bias"), shape: vec![l.outputs] });
        }
        Header {
            kind: self.kind(),
            layout: self.model.layout,
            resolution: r,
            channels: c,
            layer_sizes: self.model.mlp.sizes(),
            output_activation: self.model.mlp.output,
            bounds: self.model.grid.bounds(),
            geometry: self.geometry.clone(),
            metadata: self.metadata.clone(),
            tensors,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        let mut out = Vec::with_capacity(12 + header.len() + 4 * self.parameter_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        let mut put = |v: &[f32]| v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        for p in self.model.grid.planes() {
            put(p);
        }
        for l in &self.model.mlp.layers {
            put(&l.weights);
            put(&l.biases);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<NeuralAsset, AssetError> {
        if bytes.len() < 4 {
            return Err(AssetError::Truncated("missing magic".into()));
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if &magic != MAGIC {
            return Err(AssetError::BadMagic(magic));
        }
        let mut cur = Cursor { bytes, pos: 4 };
        let version = cur.u32()?;
        if version != VERSION {
            return Err(AssetError::UnsupportedVersion(version));
        }
        let len = cur.u32()? as usize;
        let header: Header =
            serde_json::from_slice(cur.take(len)?).map_err(|e| AssetError::Header(e.to_string()))?;
        if header.layout.kind() != header.kind || header.geometry.kind() != header.kind {
            return Err(AssetError::Header("kind, layout and geometry disagree".into()));
        }
        let (r, c) = (header.resolution, header.channels);
        let sizes = &header.layer_sizes;
        if r < 2 || c == 0 || sizes.len() < 2 || sizes[0] != c + header.layout.len() || *sizes.last().unwrap() != super::OUTPUTS {
            return Err(AssetError::Header(format!("inconsistent dimensions R={r} C={c} layers={sizes:?}")));
        }
        let expected_tensors = 3 + 2 * (sizes.len() - 1);
        if header.tensors.len() != expected_tensors {
            return Err(AssetError::Header(format!("expected {expected_tensors} tensors, found {}", header.tensors.len())));
        }
        let mut tensors = header.tensors.iter();
        let mut next = |want: usize| -> Result<Vec<f32>, AssetError> {
            let info = tensors.next().unwrap();
            let n: usize = info.shape.iter().product();
            if n != want {
                return Err(AssetError::Header(format!("tensor {} has {n} values, expected {want}", info.name)));
            }
            cur.f32s(n)
        };
        let planes = [next(r * r * c)?, next(r * r * c)?, next(r * r * c)?];
        let mut layers = Vec::new();
        for w in sizes.windows(2) {
            let weights = next(w[0] * w[1])?;
            let biases = next(w[1])?;
            layers.push(Layer { inputs: w[0], outputs: w[1], weights, biases });
        }
        if cur.pos != bytes.len() {
            return Err(AssetError::Header(format!("{} trailing bytes", bytes.len() - cur.pos)));
        }
        Ok(NeuralAsset {
            geometry: header.geometry,
            model: NeuralModel {
                grid: TriplaneGrid::from_planes(r, c, header.bounds, planes),
                mlp: Mlp { layers, output: header.output_activation },
                layout: header.layout,
            },
            metadata: header.metadata,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], AssetError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| AssetError::Truncated(format!("need {n} bytes at offset {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, AssetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, AssetError> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| AssetError::Header("tensor too large".into()))?)?;
        Ok(raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect())
    }
}

pub fn save_asset(asset: &NeuralAsset, path: &Path) -> Result<(), AssetError> {
    let io_err = |source| AssetError::Io { path: path.display().to_string(), source };
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(&asset.to_bytes()).map_err(io_err)?;
    Ok(())
}

pub fn load_asset(path: &Path) -> Result<NeuralAsset, AssetError> {
    let bytes = fs::read(path).map_err(|source| AssetError::Io { path: path.display().to_string(), source })?;
    NeuralAsset::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::neural::Architecture;
    use crate::sampling::stream_rng;

    fn small_asset() -> NeuralAsset {
        let mut rng = stream_rng(3, 0, 0);
        let arch = Architecture { resolution: 4, channels: 3, hidden_layers: 2, width: 5, output_activation: OutputActivation::Softplus };
        let bounds = Aabb::new(Vec3::splat(-1.0), Vec3::splat(1.0));
        NeuralAsset {
            geometry: Shape::Sphere { center: Vec3::ZERO, radius: 1.0 },
            model: NeuralModel::new(&arch, PropertyLayout::Surface, bounds, &mut rng),
            metadata: AssetMetadata { seed: 3, epochs: 2, final_loss: 0.5, validation_psnr: Some(20.0), dual_output: true },
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let a = small_asset();
        let bytes = a.to_bytes();
        let b = NeuralAsset::from_bytes(&bytes).unwrap();
        assert_eq!(a, b);
        assert_eq!(bytes, b.to_bytes());
    }

    #[test]
    fn corrupt_magic_and_version_are_rejected() {
        let mut bytes = small_asset().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(NeuralAsset::from_bytes(&bytes), Err(AssetError::BadMagic(_))));
        let mut bytes = small_asset().to_bytes();
        bytes[4] = 7;
        assert!(matches!(NeuralAsset::from_bytes(&bytes), Err(AssetError::UnsupportedVersion(7))));
    }

    #[test]
    fn truncation_is_reported() {
        let bytes = small_asset().to_bytes();
        for cut in [2, 10, 40, bytes.len() - 1] {
            assert!(matches!(NeuralAsset::from_bytes(&bytes[..cut]), Err(AssetError::Truncated(_))), "cut {cut}");
        }
    }
}
