//! Deployment path tracer: lights, MIS, shadow walks with the self-skip rule,
//! and tile-parallel rendering of scenes that mix neural and classical assets.

mod camera;
mod light;
mod mis;
mod path;
mod render;
mod shadow;

pub use camera::Camera;
pub use light::{EnvironmentLight, Light, LightSample, RectLight};
pub use mis::mis_weight;
pub use path::{clamp_contribution, neural_query, Clamp, NeuralLightRecord, PathSettings, PathTracer, MAX_WALK_SCATTERS};
pub use render::{render, validate_scene, RenderConfig, RenderError, TILE};
pub use shadow::{closest_skipping, occluded, trace_shadow, trace_shadow_payload, RayPayload, ShadowResult};

use crate::math::Rgb;
use crate::neural::{AssetError, NeuralAsset, ShadingQuery};

/// `(lit, shadowed)` outputs of the asset for a query already in training space.
pub fn shade_neural(asset: &NeuralAsset, query: &ShadingQuery) -> Result<(Rgb, Rgb), AssetError> {
    asset.shade(query)
}
