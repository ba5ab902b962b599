//! `RNAD` training slices: one camera's deep buffer.
//!
//! ```text
//! "RNAD" | u32 version | u32 width | u32 height | u32 plane_count
//! plane_count x { 16-byte NUL-padded ASCII name | u32 channels }
//! planar f32 data in directory order: per plane, per channel, rows top to bottom
//! ```

use std::fs;
use std::path::Path;

use crate::geometry::AssetKind;
use crate::math::{Rgb, Vec3};

use super::FormatError;

pub const SLICE_MAGIC: &[u8; 4] = b"RNAD";
pub const SLICE_VERSION: u32 = 1;
const NAME_LEN: usize = 16;

const SURFACE_SCHEMA: &[(&str, usize)] = &[
    ("radiance", 3),
    ("alpha", 1),
    ("position", 3),
    ("view_dir", 3),
    ("light_dir", 3),
    ("visibility", 1),
    ("normal", 3),
];

const FIBER_SCHEMA: &[(&str, usize)] = &[
    ("radiance", 3),
    ("alpha", 1),
    ("position", 3),
    ("view_dir", 3),
    ("light_dir", 3),
    ("visibility", 1),
    ("tangent", 3),
    ("h", 1),
];

/// Planes (name, channel count) a slice of `kind` must carry, in write order.
pub fn slice_schema(kind: AssetKind) -> &'static [(&'static str, usize)] {
    match kind {
        AssetKind::Surface => SURFACE_SCHEMA,
        AssetKind::Fiber => FIBER_SCHEMA,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub name: String,
    pub channels: usize,
    /// Channel-major: `data[c * W * H + y * W + x]`.
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSlice {
    pub width: usize,
    pub height: usize,
    pub kind: AssetKind,
    planes: Vec<Plane>,
}

impl TrainingSlice {
    /// All planes zero.
    pub fn new(kind: AssetKind, width: usize, height: usize) -> Self {
        let planes = slice_schema(kind)
            .iter()
            .map(|&(name, channels)| Plane { name: name.into(), channels, data: vec![0.0; channels * width * height] })
            .collect();
        TrainingSlice { width, height, kind, planes }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn plane(&self, name: &str) -> &Plane {
        self.planes.iter().find(|p| p.name == name).unwrap_or_else(|| panic!("slice has no plane {name:?}"))
    }

    fn plane_mut(&mut self, name: &str) -> &mut Plane {
        self.planes.iter_mut().find(|p| p.name == name).unwrap_or_else(|| panic!("slice has no plane {name:?}"))
    }

    pub fn set(&mut self, name: &str, pixel: usize, values: &[f32]) {
        let n = self.pixel_count();
        let p = self.plane_mut(name);
        assert_eq!(values.len(), p.channels, "plane {name} has {} channels", p.channels);
        for (c, &v) in values.iter().enumerate() {
            p.data[c * n + pixel] = v;
        }
    }

    pub fn get(&self, name: &str, pixel: usize) -> Vec<f32> {
        let n = self.pixel_count();
        let p = self.plane(name);
        (0..p.channels).map(|c| p.data[c * n + pixel]).collect()
    }

    pub fn get1(&self, name: &str, pixel: usize) -> f32 {
        self.plane(name).data[pixel]
    }

    pub fn get_vec3(&self, name: &str, pixel: usize) -> Vec3 {
        let n = self.pixel_count();
        let d = &self.plane(name).data;
        Vec3::new(d[pixel] as f64, d[n + pixel] as f64, d[2 * n + pixel] as f64)
    }

    pub fn set_vec3(&mut self, name: &str, pixel: usize, v: Vec3) {
        self.set(name, pixel, &v.to_f32());
    }

    pub fn radiance(&self, pixel: usize) -> Rgb {
        let v = self.get_vec3("radiance", pixel);
        Rgb::new(v.x, v.y, v.z)
    }

    pub fn covered(&self, pixel: usize) -> bool {
        self.get1("alpha", pixel) > 0.5
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SLICE_MAGIC);
        for v in [SLICE_VERSION, self.width as u32, self.height as u32, self.planes.len() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for p in &self.planes {
            let mut name = [0u8; NAME_LEN];
            name[..p.name.len()].copy_from_slice(p.name.as_bytes());
            out.extend_from_slice(&name);
            out.extend_from_slice(&(p.channels as u32).to_le_bytes());
        }
        for p in &self.planes {
            p.data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
        out
    }

    /// Parses and validates a slice. With `expected = None` the kind is
    /// inferred from the plane set.
    pub fn from_bytes(bytes: &[u8], expected: Option<AssetKind>) -> Result<TrainingSlice, FormatError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != SLICE_MAGIC {
            return Err(FormatError::Malformed("not an RNAD slice (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != SLICE_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let count = r.u32()? as usize;
        if width == 0 || height == 0 {
            return Err(FormatError::Malformed("zero slice size".into()));
        }
        let mut dir = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let raw = r.take(NAME_LEN)?;
            let end = raw.iter().position(|&b| b == 0).unwrap_or(NAME_LEN);
            if raw[end..].iter().any(|&b| b != 0) || !raw[..end].is_ascii() || end == 0 {
                return Err(FormatError::Malformed("plane name is not NUL-padded ASCII".into()));
            }
            let name = String::from_utf8(raw[..end].to_vec()).unwrap();
            let channels = r.u32()? as usize;
            dir.push((name, channels));
        }
        let kind = match expected {
            Some(k) => k,
            None if dir.iter().any(|(n, _)| n == "tangent" || n == "h") => AssetKind::Fiber,
            None => AssetKind::Surface,
        };
        let schema = slice_schema(kind);
        for &(name, channels) in schema {
            match dir.iter().find(|(n, _)| n == name) {
                None => return Err(FormatError::Schema(format!("{kind:?} slice is missing plane {name:?}"))),
                Some((_, c)) if *c != channels => {
                    return Err(FormatError::Schema(format!("plane {name:?} has {c} channels, expected {channels}")))
                }
                _ => {}
            }
        }
        if dir.len() != schema.len() {
            let extra: Vec<&str> =
                dir.iter().map(|(n, _)| n.as_str()).filter(|n| !schema.iter().any(|(s, _)| s == n)).collect();
            return Err(FormatError::Schema(format!("unexpected or duplicate planes {extra:?}")));
        }
        let n = width * height;
        let mut planes = Vec::with_capacity(dir.len());
        for (name, channels) in dir {
            let raw = r.take(channels * n * 4)?;
            let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
            planes.push(Plane { name, channels, data });
        }
        if r.pos != bytes.len() {
            return Err(FormatError::Malformed(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(TrainingSlice { width, height, kind, planes })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| FormatError::Truncated(format!("need {n} bytes at offset {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn write_slice(slice: &TrainingSlice, path: &Path) -> Result<(), FormatError> {
    fs::write(path, slice.to_bytes()).map_err(|e| FormatError::io(path, e))
}

pub fn read_slice(path: &Path, expected: Option<AssetKind>) -> Result<TrainingSlice, FormatError> {
    TrainingSlice::from_bytes(&fs::read(path).map_err(|e| FormatError::io(path, e))?, expected)
}
