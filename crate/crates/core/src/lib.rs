//! Relightable neural assets: bake an asset's light transport with a path
//! tracer, fit a triplane feature grid plus MLP to it, and render the result
//! inside a path tracer next to classical geometry.

pub mod datagen;
pub mod geometry;
pub mod gradcheck;
pub mod integrator;
pub mod io;
pub mod math;
pub mod neural;
pub mod presets;
pub mod sampling;
pub mod scene_file;
pub mod shading;
pub mod trainer;
