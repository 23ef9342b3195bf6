//! End-to-end texture generation and its on-disk artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};

use texsync_core::atlas::bake_atlas_maps;
use texsync_core::camera::make_surround_rig;
use texsync_core::embed::{aggregate, embed_image, embed_text, grayscale_negative, ConditionBundle};
use texsync_core::flow::{sample_with_observer, EmbeddingFieldVelocity, IdentityCodec, Scene, SyncConfig};
use texsync_core::io::{read_png, write_grid_png, write_texture_png};
use texsync_core::uvtools::{complete_texture_with, enhance_texture_with};

use crate::config::{NegativeMode, PipelineConfig};
use crate::manifest::Manifest;

pub const FUSED: &str = "fused_texture.png";
pub const COMPLETED: &str = "completed_texture.png";
pub const ENHANCED: &str = "enhanced_texture.png";
pub const RENDER_GRID: &str = "render_grid.png";
pub const DEPTH_GRID: &str = "depth_grid.png";

/// Files written by one pipeline run, relative names paired with paths.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub files: Vec<(String, PathBuf)>,
    pub manifest: PathBuf,
    pub timings: PathBuf,
}

impl Artifacts {
    pub fn get(&self, name: &str) -> Option<&Path> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, p)| p.as_path())
    }
}

pub fn build_scene(config: &PipelineConfig) -> Result<Scene> {
    let mesh = config.load_mesh().context("stage `load-mesh`")?;
    let rig = make_surround_rig(&config.rig_spec()).context("stage `rig`")?;
    Scene::new(mesh, rig, config.texture_resolution, &config.reproject).context("stage `scene`")
}

/// Text embedding plus weighted image embeddings, with the configured
/// negative condition.
pub fn build_condition(config: &PipelineConfig) -> Result<ConditionBundle> {
    let c = &config.condition;
    let mut images = Vec::new();
    for img in c.images.iter().chain(&c.reference) {
        let path = config.resolve(&img.path);
        let pixels = read_png(&path).with_context(|| format!("condition image {}", path.display()))?;
        images.push((img.alpha, embed_image(&pixels)?));
    }
    let bundle = aggregate(&embed_text(&c.prompt), &images)?;
    Ok(match (c.negative, &c.reference) {
        (NegativeMode::GrayscaleRef, Some(r)) => {
            let reference = read_png(config.resolve(&r.path))?;
            bundle.with_negative(grayscale_negative(&reference)?)
        }
        _ => bundle,
    })
}

fn effective_sync(config: &PipelineConfig) -> Result<SyncConfig> {
    Ok(SyncConfig {
        weighting: config.weighting()?,
        ..config.sync
    })
}

/// Samples the multi-view grid, then fuses, completes and enhances the
/// texture. Writes every artifact plus `manifest.txt` (deterministic) and
/// `timings.txt` under the output directory.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Artifacts> {
    let dir = config.output_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut manifest = Manifest::new(config)?;
    let mut artifacts = Artifacts {
        dir: dir.clone(),
        ..Default::default()
    };
    let clock = Instant::now();
    let scene = build_scene(config)?;
    manifest.timing("scene", clock.elapsed());

    let clock = Instant::now();
    let condition = build_condition(config).context("stage `condition`")?;
    let model = EmbeddingFieldVelocity::new(scene.geometry(), scene.atlas(), config.model.seed).context("stage `model`")?;
    let sync = effective_sync(config)?;
    let mut step_files = Vec::new();
    let step_dir = dir.join("steps");
    let mut dump_error = None;
    let out = sample_with_observer(&model, &condition, &scene, &IdentityCodec, &config.sampler, &sync, &mut |rec| {
        if let (true, Some(s)) = (config.dump_steps, rec.sync) {
            let name = format!("steps/step_{:03}_fused.png", rec.step);
            if let Err(e) = write_texture_png(&s.fused, step_dir.join(format!("step_{:03}_fused.png", rec.step))) {
                dump_error.get_or_insert(e);
            }
            step_files.push(name);
        }
    })
    .context("stage `sample`")?;
    if let Some(e) = dump_error {
        return Err(e).context("stage `dump-steps`");
    }
    manifest.timing("sample", clock.elapsed());
    manifest.value("synced_steps", out.synced_steps);
    for name in step_files {
        manifest.artifact(&name);
    }

    let mut record = |name: &str, manifest: &mut Manifest| -> PathBuf {
        manifest.artifact(name);
        let path = dir.join(name);
        artifacts.files.push((name.to_string(), path.clone()));
        path
    };
    write_grid_png(&out.grid, record(RENDER_GRID, &mut manifest)).context("stage `write-grid`")?;
    write_grid_png(scene.depth(), record(DEPTH_GRID, &mut manifest)).context("stage `write-depth`")?;
    write_texture_png(&out.fused, record(FUSED, &mut manifest)).context("stage `write-fused`")?;

    let mut texture = out.fused;
    if config.completion.enabled {
        let clock = Instant::now();
        texture = complete_texture_with(&texture, scene.atlas(), &config.completion.options()).context("stage `complete`")?;
        manifest.timing("complete", clock.elapsed());
        write_texture_png(&texture, record(COMPLETED, &mut manifest))?;
    }
    if config.enhance.enabled {
        let clock = Instant::now();
        let hi = bake_atlas_maps(scene.mesh(), config.texture_resolution * config.enhance.factor)?;
        texture = enhance_texture_with(&texture, &hi, config.enhance.factor, &config.enhance.options()).context("stage `enhance`")?;
        manifest.timing("enhance", clock.elapsed());
        write_texture_png(&texture, record(ENHANCED, &mut manifest))?;
    }

    let (m, t) = manifest.write(&dir).context("stage `manifest`")?;
    artifacts.manifest = m;
    artifacts.timings = t;
    Ok(artifacts)
}
