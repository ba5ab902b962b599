mod common;

use std::f64::consts::PI;

use rand::Rng;
use rna_core::geometry::{intersect_brute, Instance, Ray, Scene, Shape};
use rna_core::integrator::{
    neural_query, render, trace_shadow, Camera, EnvironmentLight, Light, PathSettings, PathTracer, RenderConfig,
    RenderError,
};
use rna_core::io::HdrImage;
use rna_core::math::{Rgb, Transform, Vec3};
use rna_core::neural::ShadingQuery;
use rna_core::sampling::{stream_rng, uniform_sphere};
use rna_core::shading::{Material, ShadingFrame};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::*;

#[test]
fn bvh_matches_brute_force_on_three_scenes() {
    for (k, scene) in [proxy_scene(), clump_scene(), mixed_scene()].iter().enumerate() {
        let (bad, hits) = bvh_vs_brute(scene, k as u64, 10_000);
        assert!(bad.is_empty(), "scene {k}: rays {bad:?}");
        assert!(hits > 2_000, "scene {k}: only {hits} hits");
    }
}

#[test]
fn environment_sampling_matches_texel_distribution() {
    let (w, h) = (16, 8);
    let mut rng = stream_rng(5, 0, 0);
    let texels: Vec<Rgb> = (0..w * h)
        .map(|i| if i % 7 == 3 { Rgb::BLACK } else { Rgb::new(rng.random::<f64>() * 4.0, rng.random::<f64>(), rng.random::<f64>() * 2.0) })
        .collect();
    let env = EnvironmentLight::new(w, h, texels.clone());
    // probability of a texel: luminance times the sine at its row center
    let weight = |i: usize| {
        let lum = 0.2126 * texels[i].0[0] + 0.7152 * texels[i].0[1] + 0.0722 * texels[i].0[2];
        lum * (PI * ((i / w) as f64 + 0.5) / h as f64).sin()
    };
    let total: f64 = (0..w * h).map(weight).sum();
    let n = 1_000_000;
    let mut counts = vec![0u64; w * h];
    for _ in 0..n {
        let s = env.sample(&mut rng).unwrap();
        // acos near the poles costs a few digits
        assert!((s.pdf - env.pdf(s.wi)).abs() <= 1e-6 * s.pdf);
        let (i, j) = env.texel_index(s.wi);
        counts[j * w + i] += 1;
    }
    let mut chi2 = 0.0;
    let mut bins = 0;
    for (i, &c) in counts.iter().enumerate() {
        let expected = n as f64 * weight(i) / total;
        if expected == 0.0 {
            assert_eq!(c, 0, "sample drawn from a black texel");
            continue;
        }
        chi2 += (c as f64 - expected).powi(2) / expected;
        bins += 1;
    }
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2} over {bins} bins, p = {p}");
}

#[test]
fn duplicated_own_geometry_leaves_render_bitwise_unchanged() {
    let (base, doubled) = render_with_duplicated_geometry(2);
    assert!(base.rgb.iter().any(|&v| v > 0.0));
    assert_eq!(base, doubled);
}

#[test]
fn hint_matches_brute_force_self_occlusion() {
    let blocker = Instance { id: 2, shape: Shape::Sphere { center: Vec3::new(-1.2, 0.3, 1.2), radius: 0.6 }, object_to_world: Transform::IDENTITY, material: 0 };
    let lights = vec![Light::directional(Vec3::new(-1.0, 0.1, 0.7), Rgb::WHITE), Light::Point { position: Vec3::new(-2.5, -0.5, 1.5), intensity: Rgb::splat(5.0) }];
    let base = neural_l_scene(l_shape(), lights.clone());
    let mut instances = base.instances().to_vec();
    instances.push(blocker);
    let scene = Scene::new(instances, base.materials.clone(), lights, base.camera).unwrap();
    let inst = scene.instance(1).unwrap();
    let Material::Neural(asset) = &scene.materials[inst.material] else { unreachable!() };
    let own: Vec<_> = scene.primitives().iter().filter(|p| p.instance_id == 1).copied().collect();
    let others: Vec<_> = scene.primitives().iter().filter(|p| p.instance_id != 1).copied().collect();
    let tracer = PathTracer::new(&scene, &scene.lights, PathSettings::default());
    let cam = Camera::from_desc(&scene.camera.unwrap(), 64, 64);
    let mut rng = stream_rng(8, 0, 0);
    let mut cases = [0usize; 3];
    for y in 0..64 {
        for x in 0..64 {
            let ray = cam.center_ray(x, y);
            let Some(hit) = scene.intersect(&ray).filter(|h| h.instance_id == 1) else { continue };
            for light in &scene.lights {
                let rec = tracer.neural_light(asset, inst, &hit, -ray.direction, light, &mut rng).unwrap();
                let wi = rec.sample.wi;
                let shadow_ray = if rec.sample.distance.is_finite() { scene.spawn_segment(&hit, wi, rec.sample.distance) } else { scene.spawn_ray(&hit, wi) };
                let blocked = intersect_brute(&others, shadow_ray.origin, wi, shadow_ray.t_min, shadow_ray.t_max).map(|(t, _)| t);
                let self_hit = intersect_brute(&own, shadow_ray.origin, wi, shadow_ray.t_min, blocked.unwrap_or(shadow_ray.t_max)).is_some();
                assert_eq!(rec.shadow.transmittance, u8::from(blocked.is_none()), "pixel ({x}, {y})");
                assert_eq!(rec.shadow.self_hint, self_hit, "pixel ({x}, {y})");
                let (lit, shadowed) = asset.shade(&neural_query(inst, &hit, -ray.direction, wi)).unwrap();
                assert_eq!((rec.lit, rec.shadowed), (lit, shadowed));
                assert_eq!(rec.used, if self_hit { shadowed } else { lit });
                let case = match (blocked.is_some(), self_hit) {
                    (true, _) => 0,
                    (false, true) => 1,
                    (false, false) => 2,
                };
                cases[case] += 1;
            }
        }
    }
    assert!(cases.iter().all(|&c| c > 20), "case counts {cases:?}");
}

#[test]
fn two_instances_of_one_asset_shadow_each_other() {
    let asset = constant_asset(Shape::Sphere { center: Vec3::ZERO, radius: 1.0 }, Rgb::splat(0.3), Rgb::splat(0.1));
    let sphere = asset.geometry.clone();
    let instances = vec![
        Instance { id: 3, shape: sphere.clone(), object_to_world: Transform::IDENTITY, material: 0 },
        Instance { id: 4, shape: sphere, object_to_world: Transform::translation(Vec3::new(3.0, 0.0, 0.0)), material: 0 },
    ];
    let scene = Scene::new(instances, vec![neural_material(asset)], vec![], None).unwrap();
    for (origin, dir, id) in [(Vec3::new(-5.0, 0.0, 0.2), Vec3::X, 3), (Vec3::new(8.0, 0.0, 0.2), -Vec3::X, 4)] {
        let hit = scene.intersect(&Ray::new(origin, dir)).unwrap();
        assert_eq!(hit.instance_id, id);
        // through its own back side, then into the other instance
        let s = trace_shadow(&scene, &hit, dir, f64::INFINITY);
        assert_eq!((s.transmittance, s.self_hint), (0, true));
        let s = trace_shadow(&scene, &hit, -dir, f64::INFINITY);
        assert_eq!((s.transmittance, s.self_hint), (1, false));
        let s = trace_shadow(&scene, &hit, Vec3::new(-dir.x, 0.0, 1.0).normalized(), f64::INFINITY);
        assert_eq!(s.transmittance, 1);
    }
}

#[test]
fn mis_estimators_agree_with_rect_light_closed_form() {
    let (est, exact) = rect_light_case();
    assert!(est.iter().all(|e| e.1 > 0.0));
    estimates_agree(&est, exact).unwrap();
}

#[test]
fn mis_estimators_agree_under_constant_environment() {
    let (est, exact) = environment_case();
    estimates_agree(&est, exact).unwrap();
}

#[test]
fn doubling_irradiance_doubles_the_image() {
    let sun = |e: f64| vec![Light::directional(Vec3::new(-1.0, 0.2, 0.6), Rgb::new(e, 0.9 * e, 0.7 * e))];
    let a = render(&neural_l_scene(l_shape(), sun(1.0)), &small_render(4)).unwrap();
    let b = render(&neural_l_scene(l_shape(), sun(2.0)), &small_render(4)).unwrap();
    assert!(a.rgb.iter().any(|&v| v > 0.0));
    for (x, y) in a.rgb.iter().zip(&b.rgb) {
        assert_eq!(2.0 * x, *y);
    }
}

#[test]
fn alpha_agrees_with_corner_rays() {
    let (center, r) = (Vec3::new(0.0, 0.0, 0.0), 1.0);
    let mut scene = single(Shape::Sphere { center, radius: r }, lambert(0.5), vec![Light::directional(Vec3::Z, Rgb::WHITE)]);
    let desc = camera(Vec3::new(0.0, -4.0, 0.5), Vec3::ZERO, 40.0);
    scene.camera = Some(desc);
    let (w, h, spp) = (32, 24, 16);
    let img = render(&scene, &RenderConfig { width: w, height: h, spp, max_depth: 1, seed: 1, ..RenderConfig::default() }).unwrap();
    let alpha = img.alpha.as_ref().unwrap();
    let cam = Camera::from_desc(&desc, w, h);
    // distance from the sphere center to the ray's line
    let miss_distance = |ray: Ray| {
        let oc = center - ray.origin;
        (oc - ray.direction * oc.dot(ray.direction)).length()
    };
    let (mut full, mut empty) = (0, 0);
    for y in 0..h {
        for x in 0..w {
            let a = alpha[y * w + x];
            assert_eq!((a * spp as f32).fract(), 0.0);
            let d: Vec<f64> = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)].iter().map(|&(sx, sy)| miss_distance(cam.ray(x, y, sx, sy))).collect();
            if d.iter().all(|&v| v < r) {
                assert_eq!(a, 1.0, "pixel ({x}, {y})");
                full += 1;
            } else if d.iter().all(|&v| v > r + 0.2) {
                assert_eq!(a, 0.0, "pixel ({x}, {y})");
                empty += 1;
            }
        }
    }
    assert!(full > 50 && empty > 50, "{full} covered, {empty} empty");
}

#[test]
fn render_is_identical_across_thread_counts() {
    let scene = neural_l_scene(l_shape(), sun_and_sky());
    let run = |threads: usize| -> HdrImage {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| render(&scene, &small_render(9)).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(4));
}

#[test]
fn empty_scene_renders_black() {
    let scene = Scene::new(vec![], vec![], vec![Light::directional(Vec3::Z, Rgb::WHITE)], Some(camera(Vec3::new(0.0, -3.0, 0.0), Vec3::ZERO, 40.0))).unwrap();
    let img = render(&scene, &RenderConfig { width: 8, height: 8, spp: 2, ..RenderConfig::default() }).unwrap();
    assert!(img.rgb.iter().all(|&v| v == 0.0));
    assert!(img.alpha.unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn neural_kind_must_match_geometry() {
    let (clump, _) = rna_core::presets::fiber_clump(4, 4, 0);
    let asset = random_asset(clump, 1);
    let scene = single(l_shape(), neural_material(asset), vec![]);
    let err = render(&scene, &RenderConfig { camera: Some(camera(Vec3::new(0.0, -3.0, 0.0), Vec3::ZERO, 40.0)), ..RenderConfig::default() });
    assert!(matches!(err, Err(RenderError::KindMismatch { id: 0, .. })));
}

#[test]
fn queries_are_expressed_in_training_space() {
    let asset = random_asset(l_shape(), 2);
    let rotated = Instance { id: 0, shape: l_shape(), object_to_world: Transform::similarity(1.0, 0.9, Vec3::new(0.5, 0.0, 0.0)).unwrap(), material: 0 };
    let scene = Scene::new(vec![rotated], vec![neural_material(asset.clone())], vec![], None).unwrap();
    let ray = Ray::new(Vec3::new(0.8, 0.3, 3.0), -Vec3::Z);
    let hit = scene.intersect(&ray).unwrap();
    let inst = &scene.instances()[0];
    let wi = uniform_sphere(0.3, 0.8);
    let in_training = neural_query(inst, &hit, -ray.direction, wi);
    let rgb_normal = match hit.kind {
        rna_core::geometry::HitKind::Surface { normal } => normal,
        _ => unreachable!(),
    };
    let in_world = ShadingQuery { position: hit.position, wo: -ray.direction, wi, frame: ShadingFrame::Surface { normal: rgb_normal } };
    assert_ne!(asset.shade(&in_training).unwrap(), asset.shade(&in_world).unwrap());
    assert_eq!(in_training.position, inst.object_to_world.inverse_point(hit.position));

    let plain = Instance { object_to_world: Transform::IDENTITY, ..inst.clone() };
    let hit = Scene::new(vec![plain.clone()], vec![neural_material(asset.clone())], vec![], None).unwrap().intersect(&ray).unwrap();
    let q = neural_query(&plain, &hit, -ray.direction, wi);
    assert_eq!(q.position, hit.position);
    assert_eq!(q.wi, wi);
}
