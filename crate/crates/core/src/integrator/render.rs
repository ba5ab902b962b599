use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraDesc, Scene};
use crate::io::HdrImage;
use crate::sampling::stream_rng;
use crate::shading::Material;

use super::camera::Camera;
use super::path::{PathSettings, PathTracer};

pub const TILE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub spp: usize,
    pub max_depth: usize,
    pub seed: u64,
    /// Apply `x / (1 + x)` per channel before output.
    #[serde(default)]
    pub tonemap: bool,
    /// Overrides the scene's camera.
    #[serde(default)]
    pub camera: Option<CameraDesc>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig { width: 128, height: 128, spp: 64, max_depth: 8, seed: 0, tonemap: false, camera: None }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("scene has no camera and none was given")]
    NoCamera,
    #[error("spp and resolution must be at least 1")]
    EmptyRender,
    #[error("instance {id}: neural asset is a {asset:?} asset but its geometry is {geometry:?}")]
    KindMismatch { id: u32, asset: crate::geometry::AssetKind, geometry: crate::geometry::AssetKind },
}

/// Checks that every neural instance's geometry matches its asset's kind.
pub fn validate_scene(scene: &Scene) -> Result<(), RenderError> {
    for inst in scene.instances() {
        if let Material::Neural(asset) = &scene.materials[inst.material] {
            if asset.kind() != inst.shape.kind() {
                return Err(RenderError::KindMismatch { id: inst.id, asset: asset.kind(), geometry: inst.shape.kind() });
            }
        }
    }
    Ok(())
}

/// Tile-parallel render with one RNG stream per tile.
pub fn render(scene: &Scene, config: &RenderConfig) -> Result<HdrImage, RenderError> {
    if config.spp == 0 || config.width == 0 || config.height == 0 {
        return Err(RenderError::EmptyRender);
    }
    validate_scene(scene)?;
    let desc = config.camera.or(scene.camera).ok_or(RenderError::NoCamera)?;
    let camera = Camera::from_desc(&desc, config.width, config.height);
    let settings = PathSettings { max_depth: config.max_depth, ..PathSettings::default() };
    let tracer = PathTracer::new(scene, &scene.lights, settings);
    let tiles_x = config.width.div_ceil(TILE);
    let tiles_y = config.height.div_ceil(TILE);
    let tiles: Vec<(usize, Vec<[f32; 4]>)> = (0..tiles_x * tiles_y)
        .into_par_iter()
        .map(|tile| {
            let mut rng = stream_rng(config.seed, tile as u64, 0);
            let (x0, y0) = ((tile % tiles_x) * TILE, (tile / tiles_x) * TILE);
            let mut out = Vec::with_capacity(TILE * TILE);
            for y in y0..(y0 + TILE).min(config.height) {
                for x in x0..(x0 + TILE).min(config.width) {
                    let mut sum = crate::math::Rgb::BLACK;
                    let mut covered = 0usize;
                    for _ in 0..config.spp {
                        let ray = camera.ray(x, y, rng.random(), rng.random());
                        let (l, hit) = tracer.radiance(ray, &mut rng);
                        sum += l;
                        covered += usize::from(hit.is_some());
                    }
                    let mut v = sum / config.spp as f64;
                    if config.tonemap {
                        v = v.map(|c| c / (1.0 + c));
                    }
                    out.push([v.0[0] as f32, v.0[1] as f32, v.0[2] as f32, covered as f32 / config.spp as f32]);
                }
            }
            (tile, out)
        })
        .collect();
    let mut img = HdrImage::new(config.width, config.height);
    let mut alpha = vec![0.0f32; config.width * config.height];
    for (tile, px) in tiles {
        let (x0, y0) = ((tile % tiles_x) * TILE, (tile / tiles_x) * TILE);
        let w = (x0 + TILE).min(config.width) - x0;
        for (k, p) in px.into_iter().enumerate() {
            let (x, y) = (x0 + k % w, y0 + k / w);
            img.set_pixel(x, y, [p[0], p[1], p[2]]);
            alpha[y * config.width + x] = p[3];
        }
    }
    img.alpha = Some(alpha);
    Ok(img)
}
