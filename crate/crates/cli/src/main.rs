use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use rna_core::datagen::{bake, BakeConfig};
use rna_core::geometry::{AssetKind, Shape};
use rna_core::gradcheck;
use rna_core::integrator::{render, RenderConfig};
use rna_core::io::{psnr, read_pfm, write_pfm, write_pfm_gray};
use rna_core::math::Vec3;
use rna_core::neural::{load_asset, AssetMetadata, Mlp, NeuralAsset, NeuralModel, PropertyLayout, TriplaneGrid};
use rna_core::presets;
use rna_core::scene_file::load_scene;
use rna_core::trainer::{init_model, train_with_progress, Dataset, TrainConfig};

#[derive(Parser)]
#[command(name = "rna", version, about = "Bake, train and render relightable neural assets")]
struct Cli {
    /// Worker threads for all parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render training and validation slices of a single-asset scene.
    Bake(BakeArgs),
    /// Fit a neural asset to a bake directory.
    Train(TrainArgs),
    /// Path-trace a scene, which may reference neural assets.
    Render(RenderArgs),
    /// PSNR between two PFM images.
    Eval(EvalArgs),
    /// Run the finite-difference gradient suite.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print an asset's header, or the size of a training configuration.
    Info(InfoArgs),
}

#[derive(Args)]
struct BakeArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    views: usize,
    #[arg(long, default_value_t = 40)]
    validation_views: usize,
    #[arg(long)]
    res: usize,
    #[arg(long)]
    spp: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Keep cameras and lights on the z >= 0 hemisphere.
    #[arg(long)]
    hemisphere: bool,
    #[arg(long)]
    camera_radius: Option<f64>,
    #[arg(long, default_value_t = 8)]
    max_depth: usize,
    #[arg(long, default_value_t = 20.0)]
    clamp_direct: f64,
    #[arg(long, default_value_t = 10.0)]
    clamp_indirect: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Preset name (small, hq, full, channels4..channels32) or a JSON file.
    #[arg(long)]
    config: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Square resolution; overridden per axis by --width/--height.
    #[arg(long, default_value_t = 256)]
    res: usize,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, default_value_t = 64)]
    spp: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    max_depth: usize,
    #[arg(long)]
    tonemap: bool,
    #[arg(long)]
    out: PathBuf,
    /// Also write pixel coverage as a grey PFM.
    #[arg(long)]
    alpha: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// PFM whose first channel marks the pixels to compare (value 1).
    #[arg(long)]
    alpha_mask: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    peak: f64,
}

#[derive(Args)]
struct InfoArgs {
    asset: Option<PathBuf>,
    /// Report a configuration (preset name or JSON file) instead of an asset.
    #[arg(long, conflicts_with = "asset")]
    config: Option<String>,
    #[arg(long, default_value = "surface", value_parser = ["surface", "fiber"])]
    kind: String,
}

/// Bad invocation detected before any work starts.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn require_file(p: &Path) -> anyhow::Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(usage(format!("no such file: {}", p.display())))
    }
}

fn load_train_config(arg: &str) -> anyhow::Result<TrainConfig> {
    if let Some(c) = presets::config(arg) {
        return Ok(c);
    }
    let p = Path::new(arg);
    if !p.is_file() {
        return Err(usage(format!("`{arg}` is neither a preset ({}) nor a file", presets::CONFIG_NAMES.join(", "))));
    }
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    let cfg: TrainConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
    Ok(cfg)
}

fn run_bake(a: BakeArgs) -> anyhow::Result<()> {
    require_file(&a.scene)?;
    let config = BakeConfig {
        views: a.views,
        validation_views: a.validation_views,
        resolution: a.res,
        spp: a.spp,
        camera_radius: a.camera_radius,
        hemisphere_only: a.hemisphere,
        clamp_direct: a.clamp_direct,
        clamp_indirect: a.clamp_indirect,
        max_depth: a.max_depth,
        seed: a.seed,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let scene = load_scene(&a.scene)?;
    let manifest = bake(&scene, &config, &a.out)?;
    log::info!("baked {} training and {} validation views to {}", manifest.train_cameras.len(), manifest.validation_cameras.len(), a.out.display());
    Ok(())
}

fn run_train(a: TrainArgs) -> anyhow::Result<()> {
    require_file(&a.data.join("manifest.json"))?;
    let mut config = load_train_config(&a.config)?;
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    config.validate().map_err(|e| usage(e.to_string()))?;
    let dataset = Dataset::load(&a.data)?;
    let model = init_model(&dataset, &config);
    log::info!("training {} parameters on {} samples", model.parameter_count(), dataset.train_sample_count());
    let outcome = train_with_progress(&dataset, model, &config, |e| {
        log::info!("epoch {:>4}  loss {:.6e}  psnr {}", e.epoch, e.loss, e.psnr.map_or("-".into(), |p| format!("{p:.4}")))
    })?;
    outcome.write(&config, &a.out)?;
    let best = outcome.best_asset();
    println!(
        "epochs: {}  final loss: {:.6e}  best validation PSNR: {}",
        config.epochs,
        outcome.last.asset.metadata.final_loss,
        best.metadata.validation_psnr.map_or("-".into(), |p| format!("{p:.4}"))
    );
    Ok(())
}

fn run_render(a: RenderArgs) -> anyhow::Result<()> {
    require_file(&a.scene)?;
    let config = RenderConfig {
        width: a.width.unwrap_or(a.res),
        height: a.height.unwrap_or(a.res),
        spp: a.spp,
        max_depth: a.max_depth,
        seed: a.seed,
        tonemap: a.tonemap,
        camera: None,
    };
    if config.width == 0 || config.height == 0 || config.spp == 0 {
        return Err(usage("resolution and spp must be at least 1"));
    }
    let scene = load_scene(&a.scene)?;
    let img = render(&scene, &config)?;
    write_pfm(&img, &a.out)?;
    if let (Some(path), Some(alpha)) = (&a.alpha, &img.alpha) {
        write_pfm_gray(img.width, img.height, alpha, path)?;
    }
    Ok(())
}

fn run_eval(a: EvalArgs) -> anyhow::Result<()> {
    require_file(&a.reference)?;
    require_file(&a.test)?;
    if let Some(m) = &a.alpha_mask {
        require_file(m)?;
    }
    if !(a.peak > 0.0) {
        return Err(usage("--peak must be positive"));
    }
    let r = read_pfm(&a.reference)?;
    let t = read_pfm(&a.test)?;
    let mask = match &a.alpha_mask {
        None => None,
        Some(p) => {
            let m = read_pfm(p)?;
            Some(m.rgb.chunks_exact(3).map(|c| c[0] >= 1.0 - 1e-6).collect::<Vec<bool>>())
        }
    };
    let value = psnr(&r, &t, a.peak, mask.as_deref())?;
    println!("PSNR: {value:.4}");
    Ok(())
}

fn run_gradcheck(seed: u64) -> anyhow::Result<()> {
    let mut failed = false;
    for r in gradcheck::run_all(seed) {
        let tol = gradcheck::tolerance(r.class);
        let ok = r.max_rel_error < tol && r.checked > 0;
        failed |= !ok;
        println!(
            "{:<4} {:<16} max rel error {:.3e} (tolerance {tol:.0e}), {} checked, {} skipped at kinks",
            if ok { "ok" } else { "FAIL" },
            r.class,
            r.max_rel_error,
            r.checked,
            r.skipped
        );
    }
    if failed {
        bail!("gradient check failed");
    }
    Ok(())
}

fn print_asset(asset: &NeuralAsset, bytes: usize) {
    let m = &asset.model;
    let b = m.grid.bounds();
    println!("kind: {:?}", asset.kind());
    println!("layout: {:?}", m.layout);
    println!("triplane: {0}x{0}x{1} x3", m.grid.resolution(), m.grid.channels());
    println!("mlp layers: {:?}", m.mlp.sizes());
    println!("output activation: {:?}", m.mlp.output);
    println!("bounds: [{}, {}, {}] .. [{}, {}, {}]", b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z);
    println!("parameters: {} ({:.2}M)", asset.parameter_count(), asset.parameter_count() as f64 / 1e6);
    println!("file size: {} bytes ({:.2} MB)", bytes, bytes as f64 / 1e6);
    let md: &AssetMetadata = &asset.metadata;
    println!("seed: {}  epochs: {}  final loss: {:e}  dual output: {}", md.seed, md.epochs, md.final_loss, md.dual_output);
    if let Some(p) = md.validation_psnr {
        println!("validation PSNR: {p:.4}");
    }
}

fn run_info(a: InfoArgs) -> anyhow::Result<()> {
    match (a.asset, a.config) {
        (Some(path), None) => {
            require_file(&path)?;
            let asset = load_asset(&path)?;
            let bytes = std::fs::metadata(&path).with_context(|| path.display().to_string())?.len() as usize;
            print_asset(&asset, bytes);
        }
        (None, Some(c)) => {
            let config = load_train_config(&c)?;
            let kind = if a.kind == "fiber" { AssetKind::Fiber } else { AssetKind::Surface };
            let layout = config.layout.unwrap_or(PropertyLayout::default_for(kind));
            let arch = config.architecture;
            // a zero-valued asset of this shape gives the exact file size
            let bounds = rna_core::math::Aabb::new(Vec3::splat(-1.0), Vec3::splat(1.0));
            let mut sizes = vec![arch.channels + layout.len()];
            sizes.extend(std::iter::repeat_n(arch.width, arch.hidden_layers));
            sizes.push(rna_core::neural::OUTPUTS);
            let asset = NeuralAsset {
                geometry: Shape::Sphere { center: Vec3::ZERO, radius: 1.0 },
                model: NeuralModel {
                    grid: TriplaneGrid::zeros(arch.resolution, arch.channels, bounds),
                    mlp: Mlp::zeros(&sizes, arch.output_activation),
                    layout,
                },
                metadata: AssetMetadata { dual_output: config.dual_output, ..AssetMetadata::default() },
            };
            print_asset(&asset, asset.to_bytes().len());
        }
        _ => return Err(usage("give either ASSET or --config")),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is configured once");
    }
    let result = match cli.command {
        Command::Bake(a) => run_bake(a),
        Command::Train(a) => run_train(a),
        Command::Render(a) => run_render(a),
        Command::Eval(a) => run_eval(a),
        Command::Gradcheck { seed } => run_gradcheck(seed),
        Command::Info(a) => run_info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
