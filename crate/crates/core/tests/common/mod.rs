#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rna_core::geometry::{CameraDesc, Instance, Ray, Scene, Shape};
use rna_core::integrator::{render, EnvironmentLight, Light, PathSettings, PathTracer, RenderConfig};
use rna_core::io::HdrImage;
use rna_core::math::{Aabb, Rgb, Transform, Vec3};
use rna_core::neural::{
    Architecture, AssetMetadata, Mlp, NeuralAsset, NeuralModel, OutputActivation, PropertyLayout, TriplaneGrid, OUTPUTS,
};
use rna_core::sampling::{cosine_hemisphere, sample_uniform_sphere, stream_rng};
use rna_core::presets::{fiber_clump, translucent_proxy};
use rna_core::shading::{Material, SurfaceMaterial};

pub fn single(shape: Shape, material: Material, lights: Vec<Light>) -> Scene {
    let inst = Instance { id: 0, shape, object_to_world: Transform::IDENTITY, material: 0 };
    Scene::new(vec![inst], vec![material], lights, None).unwrap()
}

pub fn proxy_scene() -> Scene {
    let (s, m) = translucent_proxy();
    single(s, Material::Surface(m), vec![])
}

pub fn clump_scene() -> Scene {
    let (s, m) = fiber_clump(20, 10, 0);
    single(s, Material::Fiber(m), vec![])
}

pub fn inverse_softplus(y: f64) -> f64 {
    y.exp_m1().ln()
}

/// Asset whose network ignores its inputs and returns constant lit and
/// shadowed colors.
pub fn constant_asset(geometry: Shape, lit: Rgb, shadowed: Rgb) -> NeuralAsset {
    let layout = PropertyLayout::default_for(geometry.kind());
    let bounds = geometry.bounds().padded(0.01);
    let c = 2;
    let mut mlp: Mlp<f32> = Mlp::zeros(&[c + layout.len(), 4, OUTPUTS], OutputActivation::Softplus);
    let last = mlp.layers.last_mut().unwrap();
    for k in 0..3 {
        last.biases[k] = inverse_softplus(lit.0[k]) as f32;
        last.biases[3 + k] = inverse_softplus(shadowed.0[k]) as f32;
    }
    NeuralAsset {
        geometry,
        model: NeuralModel { grid: TriplaneGrid::zeros(4, c, bounds), mlp, layout },
        metadata: AssetMetadata { dual_output: true, ..AssetMetadata::default() },
    }
}

/// Untrained asset with random triplanes and decoder, so its outputs vary
/// with every input.
pub fn random_asset(geometry: Shape, seed: u64) -> NeuralAsset {
    let layout = PropertyLayout::default_for(geometry.kind());
    let arch = Architecture { resolution: 8, channels: 4, hidden_layers: 2, width: 16, output_activation: OutputActivation::Softplus };
    let mut rng = stream_rng(seed, 0xa55e7, 0);
    let mut model: NeuralModel<f64> = NeuralModel::new(&arch, layout, geometry.bounds().padded(0.01), &mut rng);
    for p in model.grid.planes_mut().iter_mut() {
        for v in p.iter_mut() {
            *v *= 50.0;
        }
    }
    NeuralAsset {
        geometry,
        model: model.cast(),
        metadata: AssetMetadata { dual_output: true, ..AssetMetadata::default() },
    }
}

pub fn unit_bounds() -> Aabb {
    Aabb::new(Vec3::splat(-1.0), Vec3::splat(1.0))
}

pub fn neural_material(asset: NeuralAsset) -> Material {
    Material::Neural(Arc::new(asset))
}

pub fn lambert(albedo: f64) -> Material {
    Material::Surface(SurfaceMaterial::lambertian(Rgb::splat(albedo)))
}

/// Open L-shaped mesh: a floor quad and a wall quad meeting along the y axis,
/// so the wall shadows parts of the floor.
pub fn l_shape() -> Shape {
    let vertices = vec![
        Vec3::new(0.0, -1.0, 0.0),
        Vec3::new(2.0, -1.0, 0.0),
        Vec3::new(2.0, 1.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, -1.0, 2.0),
        Vec3::new(0.0, 1.0, 2.0),
    ];
    let triangles = vec![[0, 1, 2], [0, 2, 3], [0, 3, 5], [0, 5, 4]];
    Shape::Mesh { vertices, triangles }
}

pub fn camera(position: Vec3, look_at: Vec3, vfov_deg: f64) -> CameraDesc {
    CameraDesc { position, look_at, up: Vec3::Z, vfov_deg }
}

pub fn mixed_scene() -> Scene {
    let (clump, hair) = rna_core::presets::fiber_clump(6, 5, 3);
    let (proxy, _) = rna_core::presets::translucent_proxy();
    let instances = vec![
        Instance { id: 0, shape: Shape::Sphere { center: Vec3::ZERO, radius: 0.7 }, object_to_world: Transform::similarity(1.5, 0.0, Vec3::new(2.0, 0.0, 0.0)).unwrap(), material: 0 },
        Instance { id: 1, shape: proxy, object_to_world: Transform::similarity(0.8, 0.6, Vec3::new(-1.5, 0.5, 0.2)).unwrap(), material: 0 },
        Instance { id: 5, shape: clump, object_to_world: Transform::similarity(1.2, -0.3, Vec3::new(0.0, -1.5, 0.0)).unwrap(), material: 1 },
        Instance { id: 9, shape: l_shape(), object_to_world: Transform::translation(Vec3::new(0.0, 1.5, -1.0)), material: 0 },
    ];
    Scene::new(instances, vec![lambert(0.5), Material::Fiber(hair)], vec![], None).unwrap()
}

/// Scene with a neural L-shape (id 1) over a classical ground plane (id 0).
pub fn neural_l_scene(asset_shape: Shape, lights: Vec<Light>) -> Scene {
    let ground = Shape::Mesh {
        vertices: vec![Vec3::new(-4.0, -4.0, -0.5), Vec3::new(4.0, -4.0, -0.5), Vec3::new(4.0, 4.0, -0.5), Vec3::new(-4.0, 4.0, -0.5)],
        triangles: vec![[0, 1, 2], [0, 2, 3]],
    };
    let instances = vec![
        Instance { id: 0, shape: ground, object_to_world: Transform::IDENTITY, material: 0 },
        Instance { id: 1, shape: asset_shape, object_to_world: Transform::similarity(1.0, 0.3, Vec3::new(0.2, 0.0, 0.0)).unwrap(), material: 1 },
    ];
    let materials = vec![lambert(0.6), neural_material(random_asset(l_shape(), 4))];
    let cam = camera(Vec3::new(4.0, -4.0, 3.0), Vec3::new(0.8, 0.0, 0.5), 45.0);
    Scene::new(instances, materials, lights, Some(cam)).unwrap()
}

pub fn sun_and_sky() -> Vec<Light> {
    vec![Light::directional(Vec3::new(-1.0, 0.2, 0.6), Rgb::new(2.0, 1.8, 1.5)), Light::Environment(EnvironmentLight::constant(Rgb::splat(0.2)))]
}

pub fn small_render(seed: u64) -> RenderConfig {
    RenderConfig { width: 40, height: 32, spp: 6, max_depth: 4, seed, ..RenderConfig::default() }
}

/// Irradiance at `p` (normal `n`) from a uniform polygonal emitter of
/// radiance `l`, by the edge-integral formula for Lambertian polygons.
pub fn polygon_irradiance(p: Vec3, n: Vec3, verts: &[Vec3], l: f64) -> f64 {
    let mut sum = 0.0;
    for k in 0..verts.len() {
        let a = (verts[k] - p).normalized();
        let b = (verts[(k + 1) % verts.len()] - p).normalized();
        let angle = a.dot(b).clamp(-1.0, 1.0).acos();
        sum += angle * n.dot(a.cross(b).normalized());
    }
    0.5 * l * sum.abs()
}

pub fn mean_and_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn floor_scene(albedo: f64, lights: Vec<Light>) -> Scene {
    let floor = Shape::Mesh {
        vertices: vec![Vec3::new(-10.0, -10.0, 0.0), Vec3::new(10.0, -10.0, 0.0), Vec3::new(10.0, 10.0, 0.0), Vec3::new(-10.0, 10.0, 0.0)],
        triangles: vec![[0, 1, 2], [0, 2, 3]],
    };
    single(floor, lambert(albedo), lights)
}

/// Light-only, BSDF-only and MIS (the path tracer at depth 1) estimates of
/// the radiance leaving a Lambertian floor point toward +z.
pub fn three_estimators(scene: &Scene, p: Vec3, albedo: f64, n: usize) -> [(f64, f64); 3] {
    let light = &scene.lights[0];
    let mut rng = stream_rng(21, 0, 0);
    let light_only: Vec<f64> = (0..n)
        .map(|_| match light.sample(p, &mut rng) {
            Some(s) if s.wi.z > 0.0 => albedo / PI * s.wi.z * s.weight.0[0],
            _ => 0.0,
        })
        .collect();
    let bsdf_only: Vec<f64> = (0..n)
        .map(|_| {
            let wi = cosine_hemisphere(rng.random(), rng.random());
            let ray = Ray::new(p + Vec3::Z * 1e-6, wi);
            let le = match light {
                Light::Rect(r) => r.intersect(&ray).map_or(Rgb::BLACK, |_| r.emitted(wi)),
                Light::Environment(env) => env.radiance(wi),
                _ => unreachable!(),
            };
            // f cos / pdf = albedo
            albedo * le.0[0]
        })
        .collect();
    let tracer = PathTracer::new(scene, &scene.lights, PathSettings { max_depth: 1, ..PathSettings::default() });
    let camera_ray = Ray::new(p + Vec3::Z, -Vec3::Z);
    let mis: Vec<f64> = (0..n).map(|_| tracer.radiance(camera_ray, &mut rng).0 .0[0]).collect();
    [mean_and_error(&light_only), mean_and_error(&bsdf_only), mean_and_error(&mis)]
}

/// Compares BVH and brute-force intersection on `n` rays through `scene`.
/// Returns the mismatching ray indices and the hit count.
pub fn bvh_vs_brute(scene: &Scene, seed: u64, n: usize) -> (Vec<usize>, usize) {
    let b = scene.bounds().padded(0.5);
    let e = b.extent();
    let mut rng = stream_rng(11, seed, 0);
    let point = |rng: &mut rand_chacha::ChaCha8Rng| b.min + Vec3::new(rng.random::<f64>() * e.x, rng.random::<f64>() * e.y, rng.random::<f64>() * e.z);
    let (mut bad, mut hits) = (Vec::new(), 0);
    for i in 0..n {
        let origin = point(&mut rng);
        // half uniform, half aimed roughly at the geometry
        let dir = if i % 2 == 0 { sample_uniform_sphere(&mut rng) } else { (scene.bounds().center() - origin + (point(&mut rng) - origin) * 0.2).normalized() };
        let ray = Ray::new(origin, dir);
        let a = scene.intersect(&ray);
        if a != scene.intersect_brute(&ray) {
            bad.push(i);
        }
        hits += usize::from(a.is_some());
    }
    (bad, hits)
}

/// Renders the neural L scene as is and with its mesh stored twice over
/// (exact copies, one set in reverse order) under the same instance.
pub fn render_with_duplicated_geometry(seed: u64) -> (HdrImage, HdrImage) {
    let base = render(&neural_l_scene(l_shape(), sun_and_sky()), &small_render(seed)).unwrap();
    let Shape::Mesh { mut vertices, mut triangles } = l_shape() else { unreachable!() };
    let n = vertices.len() as u32;
    vertices.extend(vertices.clone());
    let originals = triangles.clone();
    triangles.extend(originals.iter().rev().map(|t| t.map(|i| i + n)));
    triangles.extend(originals.iter().copied());
    let doubled = render(&neural_l_scene(Shape::Mesh { vertices, triangles }, sun_and_sky()), &small_render(seed)).unwrap();
    (base, doubled)
}

/// Each estimate within 3 sigma of `exact` and of every other estimate.
pub fn estimates_agree(estimates: &[(f64, f64); 3], exact: f64) -> Result<(), String> {
    for (k, &(m, se)) in estimates.iter().enumerate() {
        if (m - exact).abs() > 3.0 * se.max(1e-12) {
            return Err(format!("estimator {k}: {m} +- {se} vs {exact}"));
        }
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let (a, b) = (estimates[i], estimates[j]);
            let se = (a.1 * a.1 + b.1 * b.1).sqrt();
            if (a.0 - b.0).abs() > 3.0 * se.max(1e-12) {
                return Err(format!("estimators {i} and {j} disagree: {a:?} {b:?}"));
            }
        }
    }
    Ok(())
}

pub fn rect_light_case() -> ([(f64, f64); 3], f64) {
    let rect = rna_core::integrator::RectLight {
        corner: Vec3::new(-0.5, -0.5, 1.5),
        edge_u: Vec3::new(0.0, 1.2, 0.0),
        edge_v: Vec3::new(1.0, 0.0, 0.0),
        radiance: Rgb::splat(4.0),
    };
    let verts = [rect.corner, rect.corner + rect.edge_u, rect.corner + rect.edge_u + rect.edge_v, rect.corner + rect.edge_v];
    let (albedo, p) = (0.5, Vec3::new(0.9, -0.3, 0.0));
    let scene = floor_scene(albedo, vec![Light::Rect(rect)]);
    let exact = albedo / PI * polygon_irradiance(p, Vec3::Z, &verts, 4.0);
    (three_estimators(&scene, p, albedo, 4096), exact)
}

pub fn environment_case() -> ([(f64, f64); 3], f64) {
    let (albedo, l) = (0.7, 0.8);
    let scene = floor_scene(albedo, vec![Light::Environment(EnvironmentLight::constant(Rgb::splat(l)))]);
    (three_estimators(&scene, Vec3::new(0.2, 0.1, 0.0), albedo, 4096), albedo * l)
}
