//! JSON scene descriptions: named materials, instances, lights and a camera.
//! Relative paths (neural assets, environment maps) resolve against the
//! scene file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraDesc, GeometryError, Instance, Scene, Shape};
use crate::integrator::{EnvironmentLight, Light, RectLight};
use crate::io::{read_pfm, FormatError};
use crate::math::{Rgb, Transform, Vec3};
use crate::neural::{load_asset, AssetError};
use crate::presets::procedural_shape;
use crate::shading::{FiberMaterial, Material, SurfaceMaterial};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scene JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("scene: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default)]
    pub materials: BTreeMap<String, MaterialSpec>,
    pub instances: Vec<InstanceSpec>,
    #[serde(default)]
    pub lights: Vec<LightSpec>,
    #[serde(default)]
    pub camera: Option<CameraDesc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MaterialSpec {
    Surface(SurfaceMaterial),
    Fiber(FiberMaterial),
    /// A trained asset file; instances using it take its geometry.
    Neural { asset: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    /// Defaults to the instance's position in the list.
    #[serde(default)]
    pub id: Option<u32>,
    /// Required unless the material is neural.
    #[serde(default)]
    pub shape: Option<ShapeSpec>,
    /// 4x3 row-major: images of the x, y, z axes, then the translation.
    #[serde(default)]
    pub transform: Option<[[f64; 3]; 4]>,
    pub material: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeSpec {
    Sphere { center: Vec3, radius: f64 },
    Mesh { vertices: Vec<Vec3>, triangles: Vec<[u32; 3]> },
    Fibers { strands: Vec<Vec<Vec3>>, fiber_radius: f64 },
    /// A built-in generator, see [`crate::presets`].
    Procedural {
        name: String,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum LightSpec {
    Directional { direction: Vec3, irradiance: Rgb },
    Point { position: Vec3, intensity: Rgb },
    Rect { corner: Vec3, edge_u: Vec3, edge_v: Vec3, radiance: Rgb },
    /// Either a constant `radiance` or a lat-long PFM `map` times `scale`.
    Environment {
        #[serde(default)]
        radiance: Option<Rgb>,
        #[serde(default)]
        map: Option<PathBuf>,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ShapeSpec {
    pub fn build(&self) -> Result<Shape, SceneError> {
        Ok(match self {
            ShapeSpec::Sphere { center, radius } => Shape::Sphere { center: *center, radius: *radius },
            ShapeSpec::Mesh { vertices, triangles } => Shape::Mesh { vertices: vertices.clone(), triangles: triangles.clone() },
            ShapeSpec::Fibers { strands, fiber_radius } => Shape::Fibers { strands: strands.clone(), fiber_radius: *fiber_radius },
            ShapeSpec::Procedural { name, seed } => {
                procedural_shape(name, *seed).ok_or_else(|| SceneError::Invalid(format!("unknown procedural shape `{name}`")))?
            }
        })
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<SceneFile, SceneError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Loads referenced files and builds the scene.
    pub fn build(&self, base_dir: &Path) -> Result<Scene, SceneError> {
        let names: Vec<&String> = self.materials.keys().collect();
        let mut materials = Vec::with_capacity(names.len());
        for (name, spec) in &self.materials {
            materials.push(match spec {
                MaterialSpec::Surface(m) => {
                    m.validate().map_err(|e| SceneError::Invalid(format!("material `{name}`: {e}")))?;
                    Material::Surface(m.clone())
                }
                MaterialSpec::Fiber(m) => {
                    m.validate().map_err(|e| SceneError::Invalid(format!("material `{name}`: {e}")))?;
                    Material::Fiber(m.clone())
                }
                MaterialSpec::Neural { asset } => Material::Neural(Arc::new(load_asset(&resolve(base_dir, asset))?)),
            });
        }
        let mut instances = Vec::with_capacity(self.instances.len());
        for (k, spec) in self.instances.iter().enumerate() {
            let id = spec.id.unwrap_or(k as u32);
            let material = names
                .iter()
                .position(|n| **n == spec.material)
                .ok_or_else(|| SceneError::Invalid(format!("instance {id}: unknown material `{}`", spec.material)))?;
            let shape = match (&materials[material], &spec.shape) {
                (_, Some(s)) => s.build()?,
                (Material::Neural(a), None) => a.geometry.clone(),
                (_, None) => return Err(SceneError::Invalid(format!("instance {id}: missing shape"))),
            };
            let object_to_world = match spec.transform {
                None => Transform::IDENTITY,
                Some(rows) => Transform::from_rows(rows).ok_or_else(|| SceneError::Invalid(format!("instance {id}: singular transform")))?,
            };
            instances.push(Instance { id, shape, object_to_world, material });
        }
        let lights = self.lights.iter().map(|l| l.build(base_dir)).collect::<Result<Vec<_>, _>>()?;
        Ok(Scene::new(instances, materials, lights, self.camera)?)
    }
}

impl LightSpec {
    fn build(&self, base_dir: &Path) -> Result<Light, SceneError> {
        Ok(match self {
            LightSpec::Directional { direction, irradiance } => {
                if direction.length() == 0.0 {
                    return Err(SceneError::Invalid("directional light with zero direction".into()));
                }
                Light::directional(*direction, *irradiance)
            }
            LightSpec::Point { position, intensity } => Light::Point { position: *position, intensity: *intensity },
            LightSpec::Rect { corner, edge_u, edge_v, radiance } => {
                if edge_u.cross(*edge_v).length() == 0.0 {
                    return Err(SceneError::Invalid("rect light with degenerate edges".into()));
                }
                Light::Rect(RectLight { corner: *corner, edge_u: *edge_u, edge_v: *edge_v, radiance: *radiance })
            }
            LightSpec::Environment { radiance, map, scale } => match (radiance, map) {
                (Some(r), None) => Light::Environment(EnvironmentLight::constant(*r * *scale)),
                (None, Some(path)) => {
                    let img = read_pfm(&resolve(base_dir, path))?;
                    let texels = img.rgb.chunks_exact(3).map(|c| Rgb::new(c[0] as f64, c[1] as f64, c[2] as f64) * *scale).collect();
                    Light::Environment(EnvironmentLight::new(img.width, img.height, texels))
                }
                _ => return Err(SceneError::Invalid("environment light needs exactly one of `radiance` or `map`".into())),
            },
        })
    }
}

pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    let text = fs::read_to_string(path).map_err(|source| SceneError::Io { path: path.display().to_string(), source })?;
    SceneFile::parse(&text)?.build(path.parent().unwrap_or(Path::new(".")))
}
