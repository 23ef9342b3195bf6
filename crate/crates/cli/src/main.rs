use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use texsync_cli::config::PipelineConfig;
use texsync_cli::pipeline::{build_scene, run_pipeline};
use texsync_cli::run_eval;
use texsync_core::atlas::bake_atlas_maps;
use texsync_core::embed::{embed_image, embed_text, Embedding};
use texsync_core::fusion::{
    edge_corrupted_corpus, fit_weighter, total_weighter_loss, IdentityFeature, LossWeights, WeighterObjective,
    WeighterParams,
};
use texsync_core::image::GridImage;
use texsync_core::io::{
    read_png, read_texture_png, write_atlas_png16, write_bytes, write_grid_png, write_mask_png, write_raw,
    write_texture_png,
};
use texsync_core::procedural;
use texsync_core::uvtools::{complete_texture_with, enhance_texture_with};

#[derive(Parser)]
#[command(name = "texsync", version, about = "Multi-view synchronized texture generation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set sampler.steps=12`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "TEXSYNC_THREADS", global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a texture through the rig: color grid, depth grid, atlas maps.
    Render {
        /// RGBA texture PNG; a UV gradient when omitted.
        #[arg(long)]
        texture: Option<PathBuf>,
        #[arg(long, default_value = "render")]
        out: PathBuf,
    },
    /// Lift every view of a grid PNG into partial textures.
    Reproject {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value = "partials")]
        out: PathBuf,
    },
    /// Reproject a grid and fuse the views into one texture.
    Fuse {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value = "fused.png")]
        out: PathBuf,
        /// Timestep passed to the adaptive weighter.
        #[arg(long, default_value_t = 0.0)]
        t: f64,
    },
    /// Fit adaptive weighter parameters on a synthetic edge-corrupted corpus.
    FitWeighter {
        #[arg(long, default_value = "weighter.json")]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        budget: usize,
        #[arg(long, default_value_t = 6)]
        samples: u64,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f32,
    },
    /// Loss breakdown of fusing a grid against a ground-truth texture.
    EvalLoss {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
    },
    /// Embed a prompt or an image and write the vector.
    Embed {
        #[arg(long, conflicts_with = "image")]
        text: Option<String>,
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long, default_value = "embedding.emb")]
        out: PathBuf,
    },
    /// Full pipeline: sample, fuse, complete, enhance.
    Texture,
    /// Fill occluded texels from their 3D neighbors.
    Complete {
        #[arg(long)]
        texture: PathBuf,
        #[arg(long, default_value = "completed.png")]
        out: PathBuf,
    },
    /// Upscale a texture by the configured factor.
    Enhance {
        #[arg(long)]
        texture: PathBuf,
        #[arg(long, default_value = "enhanced.png")]
        out: PathBuf,
    },
    /// Sample against a known texture and report consistency metrics.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value = "eval.txt")]
        out: PathBuf,
    },
}

fn load_grid(path: &Path, config: &PipelineConfig) -> Result<GridImage> {
    let image = read_png(path)?;
    let (rows, cols) = GridImage::layout_for(config.rig.view_count);
    Ok(GridImage::split(&image, rows, cols)?)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let config = PipelineConfig::load(cli.global.config.as_deref(), &cli.global.overrides)?;

    match cli.command {
        Command::Texture => {
            let a = run_pipeline(&config)?;
            for (name, _) in &a.files {
                println!("{}", a.dir.join(name).display());
            }
            println!("{}", a.manifest.display());
        }
        Command::Render { texture, out } => {
            let scene = build_scene(&config)?;
            let texture = match texture {
                Some(p) => read_texture_png(p)?,
                None => procedural::uv_gradient(config.texture_resolution, Some(scene.atlas().validity())),
            };
            write_grid_png(&scene.render_grid(&texture)?, out.join("render_grid.png"))?;
            write_grid_png(scene.depth(), out.join("depth_grid.png"))?;
            write_raw(&scene.depth().assemble(), out.join("depth_grid.raw"))?;
            write_atlas_png16(scene.atlas(), &out)?;
            println!("wrote {}", out.display());
        }
        Command::Reproject { grid, out } => {
            let scene = build_scene(&config)?;
            let partials = scene.projector().reproject(&load_grid(&grid, &config)?)?;
            for p in &partials {
                let res = p.resolution;
                write_texture_png(&p.to_texture(), out.join(format!("partial_{}.png", p.view_id)))?;
                write_mask_png(&p.covered, res, res, out.join(format!("partial_{}_mask.png", p.view_id)))?;
                println!("view {}: {} texels", p.view_id, p.covered_count());
            }
        }
        Command::Fuse { grid, out, t } => {
            let scene = build_scene(&config)?;
            let (fused, _) = scene.fuse_grid(&load_grid(&grid, &config)?, &config.weighting()?, t)?;
            write_texture_png(&fused, &out)?;
            println!("{} texels -> {}", fused.valid_count(), out.display());
        }
        Command::FitWeighter {
            out,
            budget,
            samples,
            amplitude,
        } => {
            let scene = build_scene(&config)?;
            let seed = config.eval.seed;
            let train: Vec<u64> = (0..samples).map(|i| seed + i).collect();
            let held: Vec<u64> = (0..samples).map(|i| seed + 10_000 + i).collect();
            let denoiser = &config.eval.denoiser;
            let train = edge_corrupted_corpus(&scene, &train, amplitude, denoiser).context("building corpus")?;
            let held = edge_corrupted_corpus(&scene, &held, amplitude, denoiser).context("building corpus")?;
            let feature = IdentityFeature;
            let weights = LossWeights::default();
            let objective = WeighterObjective::new(scene.geometry(), scene.atlas(), &train, weights, &feature)?;
            let held_out = WeighterObjective::new(scene.geometry(), scene.atlas(), &held, weights, &feature)?;
            let fit = fit_weighter(&objective, WeighterParams::default(), budget)?;
            let base = held_out.evaluate(&WeighterParams::default())?;
            let tuned = held_out.evaluate(&fit.params)?;
            write_bytes(&out, fit.params.to_json().as_bytes())?;
            println!("train loss   {:.6} -> {:.6} ({} evaluations)", fit.initial_loss, fit.loss, fit.trace.len());
            println!("held-out     {base:.6} -> {tuned:.6} ({:.1}% lower)", 100.0 * (1.0 - tuned / base));
            println!("wrote {}", out.display());
        }
        Command::EvalLoss { grid, truth, t } => {
            let scene = build_scene(&config)?;
            let truth = read_texture_png(truth)?;
            let (fused, partials) = scene.fuse_grid(&load_grid(&grid, &config)?, &config.weighting()?, t)?;
            let b = total_weighter_loss(
                scene.geometry(),
                &partials,
                &fused,
                &truth,
                t,
                &LossWeights::default(),
                &IdentityFeature,
            )?;
            println!("pec={:.6}\ncyc={:.6}\nsm={:.6}\ntotal={:.6}", b.pec, b.cyc, b.sm, b.total);
        }
        Command::Embed { text, image, out } => {
            let e: Embedding = match (text, image) {
                (Some(t), None) => embed_text(&t),
                (None, Some(p)) => embed_image(&read_png(p)?)?,
                _ => bail!("pass exactly one of --text or --image"),
            };
            e.save(&out)?;
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            println!(
                "{:?} dim={} norm={:.6} luma={:.6} chroma={:.6}",
                e.modality,
                e.dim(),
                e.norm(),
                norm(e.luma()),
                norm(e.chroma())
            );
        }
        Command::Complete { texture, out } => {
            let scene = build_scene(&config)?;
            let done = complete_texture_with(&read_texture_png(texture)?, scene.atlas(), &config.completion.options())?;
            write_texture_png(&done, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Enhance { texture, out } => {
            let mesh = config.load_mesh()?;
            let texture = read_texture_png(texture)?;
            let factor = config.enhance.factor;
            let hi = bake_atlas_maps(&mesh, texture.resolution() * factor)?;
            write_texture_png(&enhance_texture_with(&texture, &hi, factor, &config.enhance.options())?, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Eval { truth, out } => {
            let scene = build_scene(&config)?;
            let report = run_eval(&config, &scene, &read_texture_png(truth)?)?;
            print!("{}", report.table());
            write_bytes(&out, report.to_key_values().as_bytes())?;
        }
    }
    Ok(())
}
