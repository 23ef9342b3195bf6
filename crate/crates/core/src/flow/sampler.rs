//! Euler sampler on a uniform timestep grid from noise (t = 1) to data.

use serde::{Deserialize, Serialize};

use crate::embed::ConditionBundle;
use crate::error::{Error, Result};
use crate::flow::latent::{cfg_velocity, predict_x0, sync_velocity, Codec, Latent};
use crate::flow::model::{Branch, ModelInput, VelocityModel};
use crate::flow::sync::{sync_x0, Scene, SyncConfig, SyncOutput};
use crate::image::GridImage;
use crate::texture::TextureMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub steps: usize,
    /// Explicit guidance scale applied between the two branches.
    pub cfg_scale: f64,
    /// Forwarded to the model untouched.
    pub distilled_scale: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            steps: 30,
            cfg_scale: 2.0,
            distilled_scale: 6.0,
            seed: 0,
        }
    }
}

/// What the observer sees after each step's prediction.
pub struct StepRecord<'a> {
    pub step: usize,
    pub t: f64,
    /// Prediction before synchronization.
    pub x0: &'a Latent,
    pub sync: Option<&'a SyncOutput>,
}

#[derive(Debug, Clone)]
pub struct SampleOutput {
    pub grid: GridImage,
    pub fused: TextureMap,
    pub synced_steps: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn sample(
    model: &dyn VelocityModel,
    condition: &ConditionBundle,
    scene: &Scene,
    codec: &dyn Codec,
    config: &SamplerConfig,
    sync: &SyncConfig,
) -> Result<SampleOutput> {
    sample_with_observer(model, condition, scene, codec, config, sync, &mut |_| {})
}

#[allow(clippy::too_many_arguments)]
pub fn sample_with_observer(
    model: &dyn VelocityModel,
    condition: &ConditionBundle,
    scene: &Scene,
    codec: &dyn Codec,
    config: &SamplerConfig,
    sync: &SyncConfig,
    observer: &mut dyn FnMut(&StepRecord),
) -> Result<SampleOutput> {
    if config.steps == 0 {
        return Err(Error::invalid("sampler needs at least one step"));
    }
    if !config.cfg_scale.is_finite() || !config.distilled_scale.is_finite() {
        return Err(Error::invalid("guidance scales must be finite"));
    }
    sync.validate()?;

    let shape = codec.encode(&scene.blank_grid())?;
    let mut x = Latent::gaussian_like(&shape, config.seed);
    let dt = 1.0 / config.steps as f64;
    let mut fused = None;
    let mut synced_steps = 0;

    for k in 0..config.steps {
        let t = 1.0 - k as f64 * dt;
        let mut v = guided_velocity(model, condition, scene, &x, t, config)?;
        let x0 = predict_x0(&x, &v, t)?;
        let synced = if sync.active_at(k, t) {
            let out = sync_x0(&x0, scene, codec, &sync.weighting, t)?;
            v = sync_velocity(&x, &out.x0, t)?;
            synced_steps += 1;
            Some(out)
        } else {
            None
        };
        observer(&StepRecord {
            step: k,
            t,
            x0: &x0,
            sync: synced.as_ref(),
        });
        if let Some(out) = synced {
            fused = Some(out.fused);
        }
        for (xi, vi) in x.data_mut().iter_mut().zip(v.data()) {
            *xi -= dt * vi;
        }
        if !x.is_finite() {
            return Err(Error::NonFinite { step: k });
        }
    }

    let grid = codec.decode(&x)?;
    let fused = match fused {
        Some(f) => f,
        None => scene.fuse_grid(&grid, &sync.weighting, 0.0)?.0,
    };
    Ok(SampleOutput {
        grid,
        fused,
        synced_steps,
    })
}

fn guided_velocity(
    model: &dyn VelocityModel,
    condition: &ConditionBundle,
    scene: &Scene,
    x: &Latent,
    t: f64,
    config: &SamplerConfig,
) -> Result<Latent> {
    let input = |branch| ModelInput {
        x,
        t,
        condition,
        branch,
        distilled_scale: config.distilled_scale,
        depth: scene.depth(),
    };
    if config.cfg_scale == 1.0 {
        return model.velocity(&input(Branch::Positive));
    }
    let (pos, neg) = rayon::join(
        || model.velocity(&input(Branch::Positive)),
        || model.velocity(&input(Branch::Negative)),
    );
    cfg_velocity(&pos?, &neg?, config.cfg_scale)
}
