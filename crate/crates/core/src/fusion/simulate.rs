//! Training pairs for the weighter: imperfect denoised views of a known
//! texture, lifted back to UV space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::{aggregate, embed_text};
use crate::error::{Error, Result};
use crate::fusion::fit::FitSample;
use crate::procedural::surface_field;
use crate::flow::{predict_x0, Branch, Latent, ModelInput, NoisyOracleVelocity, OracleVelocity, Scene, VelocityModel};
use crate::reproject::PartialTexture;
use crate::texture::TextureMap;

/// Velocity model standing in for the trained denoiser during simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Denoiser {
    Oracle,
    NoisyOracle { bias_sigma: f64, noise_sigma: f64 },
}

impl Default for Denoiser {
    fn default() -> Self {
        Denoiser::NoisyOracle {
            bias_sigma: 0.1,
            noise_sigma: 0.05,
        }
    }
}

/// Renders the ground truth, noises it to `x_t = (1 - t) g + t eps`,
/// predicts `x0` with the denoiser and reprojects every view.
pub fn simulate_noisy_partials(
    ground_truth: &TextureMap,
    scene: &Scene,
    t: f64,
    seed: u64,
    denoiser: &Denoiser,
) -> Result<Vec<PartialTexture>> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::invalid(format!("simulation needs t in (0, 1], got {t}")));
    }
    let g = Latent::from_grid(&scene.render_grid(ground_truth)?);
    let eps = Latent::gaussian_like(&g, seed);
    let x = g.zip_map(&eps, |g, e| (1.0 - t) * g + t * e)?;
    let model: Box<dyn VelocityModel> = match *denoiser {
        Denoiser::Oracle => Box::new(OracleVelocity::new(g)),
        Denoiser::NoisyOracle { bias_sigma, noise_sigma } => Box::new(NoisyOracleVelocity::new(
            g,
            bias_sigma,
            noise_sigma,
            seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1),
        )?),
    };
    let condition = aggregate(&embed_text(""), &[])?;
    let v = model.velocity(&ModelInput {
        x: &x,
        t,
        condition: &condition,
        branch: Branch::Positive,
        distilled_scale: 1.0,
        depth: scene.depth(),
    })?;
    let x0 = predict_x0(&x, &v, t)?;
    scene.projector().reproject(&x0.to_grid())
}

/// Adds `amplitude * depth_edge` of random-sign brightness error to one
/// view's covered texels, clamped to [0, 1].
pub fn corrupt_depth_edges(partial: &mut PartialTexture, amplitude: f32, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for u in 0..partial.colors.len() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        if !partial.covered[u] {
            continue;
        }
        let e = sign * amplitude * partial.depth_edge[u];
        partial.colors[u] = partial.colors[u].map(|c| (c + e).clamp(0.0, 1.0));
    }
}

/// Fitting corpus over smooth ground truths: one sample per seed, with
/// `t` cycling through 0.10..0.25 and view 0 corrupted in proportion to its
/// depth-edge channel.
pub fn edge_corrupted_corpus(scene: &Scene, seeds: &[u64], amplitude: f32, denoiser: &Denoiser) -> Result<Vec<FitSample>> {
    seeds
        .iter()
        .map(|&s| {
            let t = 0.1 + 0.05 * (s % 4) as f64;
            let ground_truth = surface_field(scene.atlas(), s as f64 * 0.7);
            let mut partials = simulate_noisy_partials(&ground_truth, scene, t, s, denoiser)?;
            if let Some(p) = partials.first_mut() {
                corrupt_depth_edges(p, amplitude, s ^ 0x77);
            }
            Ok(FitSample { partials, ground_truth, t })
        })
        .collect()
}
