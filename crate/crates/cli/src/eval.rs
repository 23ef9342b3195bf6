//! Metrics of a sampling run against a known texture.

use std::fmt::Write as _;

use anyhow::{ensure, Context, Result};

use texsync_core::embed::{aggregate, embed_text};
use texsync_core::flow::{sample, IdentityCodec, Latent, NoisyOracleVelocity, OracleVelocity, Scene, SyncConfig, VelocityModel};
use texsync_core::fusion::{loss_cycle, Denoiser};
use texsync_core::reproject::cross_view_disagreement;
use texsync_core::texture::TextureMap;

use crate::config::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    /// Mean absolute error of the fused texture on texels it covers.
    pub texel_l1: f64,
    pub disagreement: f64,
    pub loss_cycle: f64,
    /// Fraction of atlas texels covered by at least one view.
    pub coverage: f64,
}

impl EvalReport {
    pub fn to_key_values(&self) -> String {
        format!(
            "texel_l1={:.9}\ncross_view_disagreement={:.9}\nloss_cycle={:.9}\ncoverage={:.9}\n",
            self.texel_l1, self.disagreement, self.loss_cycle, self.coverage
        )
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        for (k, v) in [
            ("texel L1", self.texel_l1),
            ("cross-view disagreement", self.disagreement),
            ("cycle loss", self.loss_cycle),
            ("coverage", self.coverage),
        ] {
            writeln!(out, "{k:<24} {v:>12.6}").unwrap();
        }
        out
    }
}

/// Samples the grid with a denoiser that targets renders of
/// `ground_truth` (configured under `eval`), then measures the result.
pub fn run_eval(config: &PipelineConfig, scene: &Scene, ground_truth: &TextureMap) -> Result<EvalReport> {
    ensure!(
        ground_truth.resolution() == scene.atlas().resolution(),
        "ground truth is {}^2 but the atlas is {}^2",
        ground_truth.resolution(),
        scene.atlas().resolution()
    );
    let target = Latent::from_grid(&scene.render_grid(ground_truth)?);
    let model: Box<dyn VelocityModel> = match config.eval.denoiser {
        Denoiser::Oracle => Box::new(OracleVelocity::new(target)),
        Denoiser::NoisyOracle { bias_sigma, noise_sigma } => {
            Box::new(NoisyOracleVelocity::new(target, bias_sigma, noise_sigma, config.eval.seed)?)
        }
    };
    let condition = aggregate(&embed_text(&config.condition.prompt), &[])?;
    let sync = SyncConfig {
        weighting: config.weighting()?,
        ..config.sync
    };
    let out = sample(model.as_ref(), &condition, scene, &IdentityCodec, &config.sampler, &sync).context("stage `sample`")?;
    evaluate_grid(scene, &out.grid, &sync, ground_truth)
}

/// Metrics of a finished view grid.
pub fn evaluate_grid(
    scene: &Scene,
    grid: &texsync_core::image::GridImage,
    sync: &SyncConfig,
    ground_truth: &TextureMap,
) -> Result<EvalReport> {
    let (fused, partials) = scene.fuse_grid(grid, &sync.weighting, 0.0)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for u in 0..fused.texel_count() {
        if fused.is_valid(u) && ground_truth.is_valid(u) {
            let (a, b) = (fused.color(u), ground_truth.color(u));
            sum += (0..3).map(|k| (a[k] - b[k]).abs() as f64).sum::<f64>() / 3.0;
            n += 1;
        }
    }
    let atlas = scene.atlas();
    let covered = atlas.valid_indices().filter(|&u| partials.iter().any(|p| p.covered[u])).count();
    Ok(EvalReport {
        texel_l1: if n == 0 { 0.0 } else { sum / n as f64 },
        disagreement: cross_view_disagreement(&partials),
        loss_cycle: loss_cycle(&partials, &fused, scene.mesh(), scene.rig())?,
        coverage: covered as f64 / atlas.valid_count().max(1) as f64,
    })
}
