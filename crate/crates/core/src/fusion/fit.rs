//! Derivative-free fitting of the adaptive weighter.

use rayon::prelude::*;
use serde::Serialize;

use crate::atlas::UvAtlasMaps;
use crate::error::{Error, Result};
use crate::fusion::loss::{FeatureTransform, LossContext, LossWeights};
use crate::fusion::weights::{fuse, weighter_score, WeighterParams};
use crate::raster::RigGeometry;
use crate::reproject::PartialTexture;
use crate::texture::TextureMap;

#[derive(Debug, Clone)]
pub struct FitSample {
    pub partials: Vec<PartialTexture>,
    pub ground_truth: TextureMap,
    pub t: f64,
}

/// Mean total weighter loss over a fixed dataset.
pub struct WeighterObjective<'a> {
    samples: Vec<(LossContext<'a>, &'a FitSample)>,
    atlas: &'a UvAtlasMaps,
    weights: LossWeights,
    feature: &'a dyn FeatureTransform,
}

impl<'a> WeighterObjective<'a> {
    pub fn new(
        geometry: &'a RigGeometry,
        atlas: &'a UvAtlasMaps,
        dataset: &'a [FitSample],
        weights: LossWeights,
        feature: &'a dyn FeatureTransform,
    ) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::invalid("weighter dataset is empty"));
        }
        let samples = dataset
            .iter()
            .map(|s| Ok((LossContext::new(geometry, &s.partials, Some(&s.ground_truth), s.t)?, s)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samples,
            atlas,
            weights,
            feature,
        })
    }

    pub fn evaluate(&self, params: &WeighterParams) -> Result<f64> {
        let losses = self
            .samples
            .par_iter()
            .map(|(ctx, s)| {
                let w = weighter_score(&s.partials, self.atlas, s.t, params)?;
                let fused = fuse(&s.partials, &w)?;
                Ok(ctx.evaluate(&fused, &self.weights, self.feature)?.total)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub params: WeighterParams,
    pub loss: f64,
    pub initial_loss: f64,
    /// Best loss so far after each evaluation.
    pub trace: Vec<f64>,
}

const INITIAL_STEPS: [f64; 4] = [1.0, 2.0, 1.0, 0.5];
const MIN_STEP: f64 = 1e-4;

fn to_vector(p: &WeighterParams) -> [f64; 4] {
    [p.beta, p.lambda_edge, p.lambda_t, p.temperature.ln()]
}

fn from_vector(x: [f64; 4]) -> WeighterParams {
    WeighterParams {
        beta: x[0].max(0.0),
        lambda_edge: x[1].max(0.0),
        lambda_t: x[2],
        temperature: x[3].exp(),
    }
}

/// Compass search over `(beta, lambda_edge, lambda_t, ln temperature)`:
/// poll each coordinate in both directions, take the first improvement,
/// halve the step after a sweep without one. Never returns worse than
/// `init`; `budget` counts loss evaluations including the initial one.
pub fn fit_weighter(objective: &WeighterObjective, init: WeighterParams, budget: usize) -> Result<FitResult> {
    if budget == 0 {
        return Err(Error::invalid("fitting budget must be at least one evaluation"));
    }
    init.validate()?;
    let initial_loss = objective.evaluate(&init)?;
    let mut best_x = to_vector(&init);
    let mut best = initial_loss;
    let mut trace = vec![best];
    let mut steps = INITIAL_STEPS;

    'search: while trace.len() < budget && steps.iter().any(|&s| s > MIN_STEP) {
        let mut improved = false;
        for i in 0..4 {
            for dir in [1.0, -1.0] {
                if trace.len() >= budget {
                    break 'search;
                }
                let mut x = best_x;
                x[i] += dir * steps[i];
                let cand = from_vector(x);
                if to_vector(&cand) == best_x {
                    continue;
                }
                let f = objective.evaluate(&cand).unwrap_or(f64::INFINITY);
                let f = if f.is_finite() { f } else { f64::INFINITY };
                if f < best {
                    best = f;
                    best_x = to_vector(&cand);
                    improved = true;
                }
                trace.push(best);
                if improved {
                    break;
                }
            }
        }
        if !improved {
            for s in &mut steps {
                *s *= 0.5;
            }
        }
    }
    log::debug!("weighter fit: {} evaluations, loss {initial_loss} -> {best}", trace.len());
    Ok(FitResult {
        params: from_vector(best_x),
        loss: best,
        initial_loss,
        trace,
    })
}
