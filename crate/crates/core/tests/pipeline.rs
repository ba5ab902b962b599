mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rna_core::datagen::{bake, bake_in_memory, BakeConfig};
use rna_core::geometry::Shape;
use rna_core::integrator::{render, shade_neural, RenderConfig};
use rna_core::math::Vec3;
use rna_core::neural::{load_asset, Architecture, OutputActivation};
use rna_core::presets::{config, CONFIG_NAMES};
use rna_core::scene_file::load_scene;
use rna_core::trainer::{init_model, train, Dataset, TrainConfig};

use common::*;

fn tiny_bake(seed: u64) -> BakeConfig {
    BakeConfig { views: 6, validation_views: 2, resolution: 24, spp: 4, seed, ..BakeConfig::default() }
}

fn tiny_train(epochs: usize) -> TrainConfig {
    TrainConfig {
        architecture: Architecture { resolution: 8, channels: 4, hidden_layers: 2, width: 16, output_activation: OutputActivation::Softplus },
        epochs,
        keep_best: 2,
        ..TrainConfig::default()
    }
}

/// Every file under `dir`, keyed by relative path.
fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn bake_train_render_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let manifest = bake(&proxy_scene(), &tiny_bake(1), &data).unwrap();
    assert_eq!(manifest.train_cameras.len(), 6);
    assert!(data.join("train/view_0005.rnad").exists());
    assert!(data.join("validation/view_0001.rnad").exists());

    let dataset = Dataset::load(&data).unwrap();
    assert_eq!((dataset.train.len(), dataset.validation.len()), (6, 2));
    let cfg = tiny_train(3);
    let outcome = train(&dataset, init_model(&dataset, &cfg), &cfg).unwrap();
    assert_eq!(outcome.history.len(), 3);
    assert!(outcome.history.iter().all(|h| h.loss.is_finite() && h.psnr.is_some()));
    let asset_path = tmp.path().join("proxy.rna");
    outcome.write(&cfg, &asset_path).unwrap();
    assert!(tmp.path().join("proxy_train_log.csv").exists());
    assert!(tmp.path().join("proxy_train_config.json").exists());
    assert_eq!(fs::read_dir(tmp.path().join("proxy_checkpoints")).unwrap().count(), 2);
    let asset = load_asset(&asset_path).unwrap();
    assert_eq!(&asset, outcome.best_asset());

    let scene_json = r#"{
        "materials": {
            "brick": {"type": "neural", "asset": "proxy.rna"},
            "ground": {"type": "surface", "albedo": {"type": "constant", "color": [0.5, 0.5, 0.5]}, "roughness": 1.0}
        },
        "instances": [
            {"material": "brick"},
            {"material": "brick", "transform": [[0.5, 0, 0], [0, 0.5, 0], [0, 0, 0.5], [2, 0, -0.4]]},
            {"shape": {"type": "sphere", "center": [0, 0, -101], "radius": 100}, "material": "ground"}
        ],
        "lights": [{"type": "directional", "direction": [0.3, -0.4, 1], "irradiance": [2, 2, 2]}],
        "camera": {"position": [1, -5, 2], "look_at": [1, 0, 0], "vfov_deg": 45}
    }"#;
    let scene_path = tmp.path().join("scene.json");
    fs::write(&scene_path, scene_json).unwrap();
    let scene = load_scene(&scene_path).unwrap();
    let img = render(&scene, &RenderConfig { width: 24, height: 16, spp: 2, ..RenderConfig::default() }).unwrap();
    assert!(img.is_finite());
    assert!(img.rgb.iter().any(|&v| v > 0.0));
    let alpha = img.alpha.unwrap();
    assert!(alpha.contains(&1.0) && alpha.contains(&0.0), "ground and sky both in frame");
}

#[test]
fn bake_is_byte_identical_across_runs_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = clump_scene();
    let mut trees = Vec::new();
    for (k, threads) in [1, 1, 3].into_iter().enumerate() {
        let dir = tmp.path().join(format!("run{k}"));
        pool(threads).install(|| bake(&scene, &tiny_bake(7), &dir)).unwrap();
        trees.push(tree(&dir));
    }
    assert_eq!(trees[0].len(), 6 + 2 + 1);
    assert_eq!(trees[0], trees[1]);
    assert_eq!(trees[0], trees[2]);
    let other = bake_in_memory(&scene, &tiny_bake(8)).unwrap();
    assert_ne!(other.train[0].to_bytes(), trees[0][&PathBuf::from("train/view_0000.rnad")]);
}

#[test]
fn training_is_bit_identical_across_runs_and_threads() {
    let data = bake_in_memory(&proxy_scene(), &tiny_bake(2)).unwrap();
    let dataset = Dataset::from_baked(&data);
    let cfg = tiny_train(2);
    let run = |threads: usize| pool(threads).install(|| train(&dataset, init_model(&dataset, &cfg), &cfg).unwrap().best_asset().to_bytes());
    let a = run(1);
    assert_eq!(a, run(1));
    assert_eq!(a, run(3));
}

#[test]
fn trained_toy_asset_matches_baked_radiance() {
    // Lambertian sphere at one bounce: the baked radiance is exactly
    // albedo / pi * max(cos, 0), with no noise.
    let albedo = 0.6;
    let scene = single(Shape::Sphere { center: Vec3::ZERO, radius: 1.0 }, lambert(albedo), vec![]);
    let bake_cfg = BakeConfig { views: 96, validation_views: 4, resolution: 48, spp: 1, max_depth: 1, seed: 3, ..BakeConfig::default() };
    let data = bake_in_memory(&scene, &bake_cfg).unwrap();
    let dataset = Dataset::from_baked(&data);
    let mut checked = 0;
    for s in dataset.train.iter().chain(&dataset.validation).flatten() {
        let rna_core::shading::ShadingFrame::Surface { normal } = s.query.frame else { unreachable!() };
        let expected = albedo / PI * normal.dot(s.query.wi).max(0.0);
        assert!((s.target[0] - expected).abs() < 1e-5, "{} vs {expected}", s.target[0]);
        checked += 1;
    }
    assert!(checked > 1000);

    let cfg = TrainConfig {
        architecture: Architecture { resolution: 8, channels: 4, hidden_layers: 3, width: 64, output_activation: OutputActivation::Softplus },
        epochs: 150,
        lr0: 3e-3,
        lr_halving_period: 40,
        ..TrainConfig::default()
    };
    let outcome = train(&dataset, init_model(&dataset, &cfg), &cfg).unwrap();
    let asset = outcome.best_asset();
    let peak = albedo / PI;
    let mut errors: Vec<f64> = Vec::new();
    for s in dataset.validation.iter().flatten() {
        let target = s.target[0];
        // relative error is meaningless near the terminator
        if target < 0.2 * peak {
            continue;
        }
        let (lit, shadowed) = shade_neural(asset, &s.query).unwrap();
        let used = if s.visible { lit } else { shadowed };
        errors.push((used.0[0] - target).abs() / target);
    }
    errors.sort_by(f64::total_cmp);
    let p95 = errors[errors.len() * 95 / 100];
    assert!(errors.len() > 300);
    assert!(p95 < 0.10, "95th percentile relative error {p95}");
}

#[test]
fn config_files_match_presets() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in CONFIG_NAMES {
        let text = fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
        let parsed: TrainConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, config(name).unwrap(), "{name}");
    }
}

#[test]
fn shipped_bake_scenes_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes");
    for name in ["proxy_bake.json", "fiber_bake.json"] {
        let scene = load_scene(&dir.join(name)).unwrap();
        rna_core::datagen::bake_target(&scene).unwrap();
    }
}
