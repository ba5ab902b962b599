//! Procedural test assets and named training configurations.

use std::f64::consts::PI;

use rand::Rng;

use crate::geometry::Shape;
use crate::math::{Rgb, Vec3};
use crate::neural::{Architecture, OutputActivation};
use crate::sampling::stream_rng;
use crate::shading::{Albedo, FiberMaterial, SurfaceMaterial};
use crate::trainer::TrainConfig;

/// Appends a closed axis-aligned box with outward-facing triangles.
pub fn push_box(vertices: &mut Vec<Vec3>, triangles: &mut Vec<[u32; 3]>, min: Vec3, max: Vec3) {
    let base = vertices.len() as u32;
    for i in 0..8 {
        vertices.push(Vec3::new(
            if i & 1 == 0 { min.x } else { max.x },
            if i & 2 == 0 { min.y } else { max.y },
            if i & 4 == 0 { min.z } else { max.z },
        ));
    }
    const FACES: [[u32; 4]; 6] = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]];
    for [a, b, c, d] in FACES {
        triangles.push([base + a, base + b, base + c]);
        triangles.push([base + a, base + c, base + d]);
    }
}

/// Appends an icosphere made by subdividing an icosahedron `levels` times.
pub fn push_icosphere(vertices: &mut Vec<Vec3>, triangles: &mut Vec<[u32; 3]>, center: Vec3, radius: f64, levels: usize) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalized())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut mid = std::collections::HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalized());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let base = vertices.len() as u32;
    vertices.extend(verts.iter().map(|&v| center + v * radius));
    triangles.extend(faces.iter().map(|f| f.map(|i| i + base)));
}

/// Brick-like surface asset: a plate with studs and a sphere on top, all
/// sharing a checkered, slightly glossy, translucent material. Fits in
/// `[-1, 1]^3`.
pub fn translucent_proxy() -> (Shape, SurfaceMaterial) {
    let (mut v, mut t) = (Vec::new(), Vec::new());
    push_box(&mut v, &mut t, Vec3::new(-0.9, -0.6, -0.8), Vec3::new(0.9, 0.6, -0.3));
    for i in 0..3 {
        for j in 0..2 {
            // sunk slightly into the plate so no faces coincide
            let c = Vec3::new(-0.6 + 0.6 * i as f64, -0.3 + 0.6 * j as f64, -0.3);
            push_box(&mut v, &mut t, c + Vec3::new(-0.15, -0.15, -0.05), c + Vec3::new(0.15, 0.15, 0.15));
        }
    }
    push_box(&mut v, &mut t, Vec3::new(-0.35, -0.35, -0.35), Vec3::new(0.35, 0.35, 0.1));
    push_icosphere(&mut v, &mut t, Vec3::new(0.0, 0.0, 0.45), 0.4, 2);
    let material = SurfaceMaterial {
        albedo: Albedo::Checker { a: Rgb::new(0.75, 0.2, 0.12), b: Rgb::new(0.9, 0.75, 0.3), scale: 0.3 },
        roughness: 0.35,
        specular: 0.1,
        translucency_weight: 0.3,
        translucency_mfp: Rgb::new(0.3, 0.15, 0.08),
    };
    (Shape::Mesh { vertices: v, triangles: t }, material)
}

/// Clump of `strands` wavy strands of `segments` segments each, rising
/// along +z from a disk. The default clump has 20 x 10 = 200 segments.
pub fn fiber_clump(strands: usize, segments: usize, seed: u64) -> (Shape, FiberMaterial) {
    let mut rng = stream_rng(seed, 0xf1b, 0);
    let lines = (0..strands)
        .map(|_| {
            let r = 0.35 * rng.random::<f64>().sqrt();
            let a = 2.0 * PI * rng.random::<f64>();
            let phase = 2.0 * PI * rng.random::<f64>();
            let curl = 0.08 + 0.08 * rng.random::<f64>();
            (0..=segments)
                .map(|k| {
                    let s = k as f64 / segments as f64;
                    let spread = 1.0 + 0.8 * s;
                    let w = phase + 3.0 * PI * s;
                    Vec3::new(r * a.cos() * spread + curl * w.cos(), r * a.sin() * spread + curl * w.sin(), -0.9 + 1.8 * s)
                })
                .collect()
        })
        .collect();
    let material = FiberMaterial { base_color: Rgb::new(0.65, 0.4, 0.22), longitudinal_roughness: 0.3, azimuthal_gain: 1.0 };
    (Shape::Fibers { strands: lines, fiber_radius: 0.02 }, material)
}

/// Shapes addressable by name from scene files.
pub fn procedural_shape(name: &str, seed: u64) -> Option<Shape> {
    match name {
        "translucent_proxy" => Some(translucent_proxy().0),
        "fiber_clump" => Some(fiber_clump(20, 10, seed).0),
        _ => None,
    }
}

pub const CONFIG_NAMES: [&str; 7] = ["small", "hq", "full", "channels4", "channels8", "channels16", "channels32"];

fn arch(resolution: usize, channels: usize, width: usize) -> Architecture {
    Architecture { resolution, channels, hidden_layers: 4, width, output_activation: OutputActivation::Softplus }
}

/// Named training configuration. `small` and `hq` are the desk-scale
/// 4x64 and 4x512 decoders on a 64^2 grid, `full` is the full-size model
/// (512^2 grid, 4x512), and `channelsN` varies the feature count of `small`.
pub fn config(name: &str) -> Option<TrainConfig> {
    let desk = |a: Architecture| TrainConfig { architecture: a, epochs: 100, ..TrainConfig::default() };
    Some(match name {
        "small" => desk(arch(64, 8, 64)),
        "hq" => desk(arch(64, 8, 512)),
        "full" => TrainConfig::default(),
        _ => {
            let c: usize = name.strip_prefix("channels")?.parse().ok()?;
            if ![4, 8, 16, 32].contains(&c) {
                return None;
            }
            desk(arch(64, c, 64))
        }
    })
}
