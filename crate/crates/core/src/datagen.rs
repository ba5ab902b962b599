//! Baking: renders training slices of a single asset under per-pixel random
//! directional lights (and validation slices under one fixed light per
//! view), storing clamped radiance plus the shading AOVs in object space.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AssetKind, Hit, Ray, Scene, Shape};
use crate::integrator::{neural_query, Camera, Clamp, Light, PathSettings, PathTracer, TILE};
use crate::io::{write_slice, FormatError, TrainingSlice};
use crate::math::{Aabb, Rgb, Vec3};
use crate::sampling::{stream_rng, uniform_hemisphere, uniform_sphere};
use crate::shading::{Material, ShadingFrame};

/// Stream ids keeping the RNG uses independent.
const STREAM_TRAIN_CAMERA: u64 = 1;
const STREAM_VALID_CAMERA: u64 = 2;
const STREAM_VALID_LIGHT: u64 = 3;
const VALIDATION_VIEW_KEY: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BakeConfig {
    pub views: usize,
    #[serde(default = "default_validation_views")]
    pub validation_views: usize,
    pub resolution: usize,
    pub spp: usize,
    /// Distance of the cameras from the asset centroid; `None` picks three
    /// times the bounding radius.
    #[serde(default)]
    pub camera_radius: Option<f64>,
    #[serde(default)]
    pub hemisphere_only: bool,
    #[serde(default = "default_clamp_direct")]
    pub clamp_direct: f64,
    #[serde(default = "default_clamp_indirect")]
    pub clamp_indirect: f64,
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    pub seed: u64,
}

fn default_validation_views() -> usize {
    40
}
fn default_clamp_direct() -> f64 {
    20.0
}
fn default_clamp_indirect() -> f64 {
    10.0
}
fn default_max_depth() -> usize {
    8
}

impl Default for BakeConfig {
    fn default() -> Self {
        BakeConfig {
            views: 400,
            validation_views: default_validation_views(),
            resolution: 1024,
            spp: 128,
            camera_radius: None,
            hemisphere_only: false,
            clamp_direct: default_clamp_direct(),
            clamp_indirect: default_clamp_indirect(),
            max_depth: default_max_depth(),
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid bake configuration: {0}")]
    Config(String),
    #[error("scene cannot be baked: {0}")]
    Scene(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl BakeConfig {
    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.spp == 0 || self.resolution == 0 || self.views == 0 {
            return Err(DatagenError::Config("views, resolution and spp must be at least 1".into()));
        }
        if !(self.clamp_direct > 0.0 && self.clamp_indirect > 0.0) {
            return Err(DatagenError::Config("clamp values must be positive".into()));
        }
        if self.max_depth == 0 {
            return Err(DatagenError::Config("max_depth must be at least 1".into()));
        }
        Ok(())
    }

    pub fn clamp(&self) -> Clamp {
        Clamp { direct: self.clamp_direct, indirect: self.clamp_indirect }
    }
}

/// Centroid and radius of the sphere the cameras must stay outside of.
pub fn framing(bounds: &Aabb) -> (Vec3, f64) {
    (bounds.center(), 0.5 * bounds.diagonal())
}

/// Camera on the sphere of `radius` around `centroid`, looking at it, with a
/// field of view that frames the bounding sphere of radius `rho`.
pub fn sample_camera(
    centroid: Vec3,
    rho: f64,
    radius: f64,
    resolution: usize,
    hemisphere_only: bool,
    rng: &mut impl Rng,
) -> Result<Camera, DatagenError> {
    if !(radius > rho) {
        return Err(DatagenError::Config(format!("camera radius {radius} lies inside the asset bounds (radius {rho})")));
    }
    let dir = sample_light_direction(rng, hemisphere_only);
    let origin = centroid + dir * radius;
    let vfov = 2.0 * (rho / radius).asin().to_degrees() * 1.05;
    Ok(Camera::look_at(origin, centroid, Vec3::Z, vfov.min(170.0), resolution, resolution))
}

/// Uniform on the sphere, or on the `z >= 0` hemisphere.
pub fn sample_light_direction(rng: &mut impl Rng, hemisphere_only: bool) -> Vec3 {
    let (u1, u2): (f64, f64) = (rng.random(), rng.random());
    if hemisphere_only {
        uniform_hemisphere(u1, u2)
    } else {
        uniform_sphere(u1, u2)
    }
}

/// Per-pixel result of [`trace_transport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportSample {
    pub radiance: Rgb,
    pub visible: bool,
    pub hit: Option<Hit>,
}

/// Outgoing radiance at the primary hit of `ray` under a unit-irradiance
/// directional light from `wi`, averaged over `spp` clamped path samples.
pub fn trace_transport(scene: &Scene, ray: Ray, wi: Vec3, rng: &mut impl Rng, config: &BakeConfig) -> TransportSample {
    let Some(hit) = scene.intersect(&ray) else {
        return TransportSample { radiance: Rgb::BLACK, visible: false, hit: None };
    };
    let lights = [Light::directional(wi, Rgb::WHITE)];
    let settings = PathSettings { max_depth: config.max_depth, clamp: Some(config.clamp()), ..PathSettings::default() };
    let tracer = PathTracer::new(scene, &lights, settings);
    let mut sum = Rgb::BLACK;
    for _ in 0..config.spp {
        sum += tracer.trace(ray, Some(hit), rng);
    }
    let visible = scene.intersect(&scene.spawn_ray(&hit, wi)).is_none();
    TransportSample { radiance: sum / config.spp as f64, visible, hit: Some(hit) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LightMode {
    PerPixel,
    Fixed(Vec3),
}

/// Checks the scene holds exactly one classical asset and returns its kind.
pub fn bake_target(scene: &Scene) -> Result<AssetKind, DatagenError> {
    let [inst] = scene.instances() else {
        return Err(DatagenError::Scene(format!("expected exactly one instance, found {}", scene.instances().len())));
    };
    match &scene.materials[inst.material] {
        Material::Neural(_) => Err(DatagenError::Scene("cannot bake a neural asset".into())),
        _ => Ok(inst.shape.kind()),
    }
}

/// Renders one slice. `view_key` selects the RNG streams of its tiles.
pub fn render_slice(scene: &Scene, camera: &Camera, mode: LightMode, view_key: u64, config: &BakeConfig) -> Result<TrainingSlice, DatagenError> {
    let kind = bake_target(scene)?;
    let inst = &scene.instances()[0];
    let (w, h) = (camera.width, camera.height);
    let tiles_x = w.div_ceil(TILE);
    let tiles_y = h.div_ceil(TILE);
    let tiles: Vec<Vec<(usize, TransportSample, Vec3)>> = (0..tiles_x * tiles_y)
        .into_par_iter()
        .map(|tile| {
            let mut rng = stream_rng(config.seed, view_key, tile as u64);
            let (x0, y0) = ((tile % tiles_x) * TILE, (tile / tiles_x) * TILE);
            let mut out = Vec::new();
            for y in y0..(y0 + TILE).min(h) {
                for x in x0..(x0 + TILE).min(w) {
                    let wi = match mode {
                        LightMode::PerPixel => sample_light_direction(&mut rng, config.hemisphere_only),
                        LightMode::Fixed(d) => d,
                    };
                    let s = trace_transport(scene, camera.center_ray(x, y), wi, &mut rng, config);
                    out.push((y * w + x, s, wi));
                }
            }
            out
        })
        .collect();
    let mut slice = TrainingSlice::new(kind, w, h);
    for (p, s, wi) in tiles.into_iter().flatten() {
        let Some(hit) = s.hit else { continue };
        let q = neural_query(inst, &hit, (camera.origin - hit.position).normalized(), wi);
        slice.set("alpha", p, &[1.0]);
        slice.set("radiance", p, &[s.radiance.0[0] as f32, s.radiance.0[1] as f32, s.radiance.0[2] as f32]);
        slice.set_vec3("position", p, q.position);
        slice.set_vec3("view_dir", p, q.wo);
        slice.set_vec3("light_dir", p, q.wi);
        slice.set("visibility", p, &[if s.visible { 1.0 } else { 0.0 }]);
        match q.frame {
            ShadingFrame::Surface { normal } => slice.set_vec3("normal", p, normal),
            ShadingFrame::Fiber { tangent, h } => {
                slice.set_vec3("tangent", p, tangent);
                slice.set("h", p, &[h as f32]);
            }
        }
    }
    Ok(slice)
}

/// Everything needed to train on a bake besides the slices themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BakeManifest {
    pub config: BakeConfig,
    pub kind: AssetKind,
    /// Object-space box the feature grid covers.
    pub bounds: Aabb,
    pub geometry: Shape,
    pub object_to_world: [[f64; 3]; 4],
    pub train_cameras: Vec<Camera>,
    pub validation_cameras: Vec<Camera>,
    /// World-space light direction of each validation view.
    pub validation_lights: Vec<Vec3>,
}

pub struct BakedData {
    pub manifest: BakeManifest,
    pub train: Vec<TrainingSlice>,
    pub validation: Vec<TrainingSlice>,
}

/// Bakes all training and validation slices in memory.
pub fn bake_in_memory(scene: &Scene, config: &BakeConfig) -> Result<BakedData, DatagenError> {
    config.validate()?;
    let kind = bake_target(scene)?;
    let inst = &scene.instances()[0];
    let (centroid, rho) = framing(&scene.bounds());
    let radius = config.camera_radius.unwrap_or(3.0 * rho);
    let mut train_cameras = Vec::with_capacity(config.views);
    let mut train = Vec::with_capacity(config.views);
    for v in 0..config.views {
        let mut rng = stream_rng(config.seed, STREAM_TRAIN_CAMERA, v as u64);
        let cam = sample_camera(centroid, rho, radius, config.resolution, config.hemisphere_only, &mut rng)?;
        train.push(render_slice(scene, &cam, LightMode::PerPixel, v as u64, config)?);
        train_cameras.push(cam);
        log::debug!("baked training view {v}");
    }
    let mut validation_cameras = Vec::with_capacity(config.validation_views);
    let mut validation_lights = Vec::with_capacity(config.validation_views);
    let mut validation = Vec::with_capacity(config.validation_views);
    for v in 0..config.validation_views {
        let mut rng = stream_rng(config.seed, STREAM_VALID_CAMERA, v as u64);
        let cam = sample_camera(centroid, rho, radius, config.resolution, config.hemisphere_only, &mut rng)?;
        let light = sample_light_direction(&mut stream_rng(config.seed, STREAM_VALID_LIGHT, v as u64), config.hemisphere_only);
        validation.push(render_slice(scene, &cam, LightMode::Fixed(light), VALIDATION_VIEW_KEY | v as u64, config)?);
        validation_cameras.push(cam);
        validation_lights.push(light);
    }
    let manifest = BakeManifest {
        config: config.clone(),
        kind,
        bounds: inst.shape.bounds().padded(0.01),
        geometry: inst.shape.clone(),
        object_to_world: inst.object_to_world.to_rows(),
        train_cameras,
        validation_cameras,
        validation_lights,
    };
    Ok(BakedData { manifest, train, validation })
}

pub fn slice_path(dir: &Path, validation: bool, index: usize) -> PathBuf {
    dir.join(if validation { "validation" } else { "train" }).join(format!("view_{index:04}.rnad"))
}

impl BakedData {
    pub fn write(&self, dir: &Path) -> Result<(), DatagenError> {
        for sub in ["train", "validation"] {
            let d = dir.join(sub);
            fs::create_dir_all(&d).map_err(|source| DatagenError::Io { path: d.display().to_string(), source })?;
        }
        for (i, s) in self.train.iter().enumerate() {
            write_slice(s, &slice_path(dir, false, i))?;
        }
        for (i, s) in self.validation.iter().enumerate() {
            write_slice(s, &slice_path(dir, true, i))?;
        }
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&path, json).map_err(|source| DatagenError::Io { path: path.display().to_string(), source })
    }
}

/// Bakes and writes `DIR/train/*.rnad`, `DIR/validation/*.rnad` and `DIR/manifest.json`.
pub fn bake(scene: &Scene, config: &BakeConfig, dir: &Path) -> Result<BakeManifest, DatagenError> {
    let data = bake_in_memory(scene, config)?;
    data.write(dir)?;
    Ok(data.manifest)
}

/// Analytic single-bounce radiance of a Lambertian point under a unit
/// directional light.
pub fn lambert_direct(albedo: Rgb, n: Vec3, wi: Vec3) -> Rgb {
    albedo * (n.dot(wi).max(0.0) / PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraDesc, Instance};
    use crate::math::Transform;
    use crate::shading::SurfaceMaterial;

    fn sphere_scene(albedo: Rgb) -> Scene {
        let inst = Instance {
            id: 0,
            shape: Shape::Sphere { center: Vec3::ZERO, radius: 1.0 },
            object_to_world: Transform::IDENTITY,
            material: 0,
        };
        Scene::new(vec![inst], vec![Material::Surface(SurfaceMaterial::lambertian(albedo))], vec![], None::<CameraDesc>).unwrap()
    }

    #[test]
    fn hemisphere_cameras_stay_above_centroid() {
        let c = Vec3::new(0.5, -0.2, 1.0);
        for i in 0..10_000u64 {
            let mut rng = stream_rng(7, STREAM_TRAIN_CAMERA, i);
            let cam = sample_camera(c, 1.0, 4.0, 8, true, &mut rng).unwrap();
            assert!(cam.origin.z >= c.z);
            assert!(((cam.origin - c).length() - 4.0).abs() < 1e-12);
        }
        let a = sample_camera(c, 1.0, 4.0, 8, false, &mut stream_rng(7, 1, 3)).unwrap();
        let b = sample_camera(c, 1.0, 4.0, 8, false, &mut stream_rng(7, 1, 3)).unwrap();
        assert_eq!(a, b);
        assert!(sample_camera(c, 1.0, 0.9, 8, false, &mut stream_rng(7, 1, 3)).is_err());
    }

    #[test]
    fn light_directions_are_unit_and_centered() {
        let mut rng = stream_rng(8, 0, 0);
        let n = 1_000_000;
        let mut mean = Vec3::ZERO;
        for _ in 0..n {
            let d = sample_light_direction(&mut rng, false);
            assert!((d.length() - 1.0).abs() < 1e-12);
            mean = mean + d;
        }
        mean = mean / n as f64;
        // each component has variance 1/3 on the unit sphere
        let three_sigma = 3.0 * (1.0f64 / 3.0 / n as f64).sqrt();
        assert!(mean.x.abs() < three_sigma && mean.y.abs() < three_sigma && mean.z.abs() < three_sigma, "{mean:?}");
        for _ in 0..10_000 {
            assert!(sample_light_direction(&mut rng, true).z >= 0.0);
        }
    }

    #[test]
    fn depth_one_lambert_sphere_matches_analytic_direct() {
        let albedo = Rgb::new(0.8, 0.5, 0.2);
        let scene = sphere_scene(albedo);
        let config = BakeConfig { spp: 4, max_depth: 1, ..BakeConfig::default() };
        let wi = Vec3::new(1.0, 1.0, 0.5).normalized();
        let mut rng = stream_rng(1, 0, 0);
        for k in 0..200 {
            let d = sample_light_direction(&mut rng, false);
            let ray = Ray::new(d * 5.0, -d);
            let s = trace_transport(&scene, ray, wi, &mut rng, &config);
            let hit = s.hit.unwrap();
            let n = hit.position.normalized();
            let want = lambert_direct(albedo, n, wi);
            for c in 0..3 {
                assert!((s.radiance.0[c] - want.0[c]).abs() < 1e-12, "sample {k}");
            }
            assert_eq!(s.visible, n.dot(wi) > 0.0);
        }
    }
}
