//! The neural representation: triplane feature grid, MLP decoder with two RGB
//! heads (lit and self-shadowed), gradients, and asset serialization.

mod asset;
mod blur;
mod mlp;
mod model;
mod real;
mod triplane;

pub use asset::{load_asset, save_asset, AssetError, AssetMetadata, NeuralAsset};
pub use blur::{blur_grids, blur_kernel};
pub use mlp::{softplus, ForwardCache, Layer, Mlp, MlpGrad, OutputActivation, OUTPUTS};
pub use model::{Architecture, BatchForward, ModelGrad, NeuralModel, PropertyLayout, ShadingQuery};
pub use real::Real;
pub use triplane::{Footprint, TexelWeight, TriplaneGrad, TriplaneGrid, PLANE_AXES, PLANE_NAMES};
