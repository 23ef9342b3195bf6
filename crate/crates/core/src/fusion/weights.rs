//! Per-texel view weights and the convex fuse.

use serde::{Deserialize, Serialize};

use crate::atlas::UvAtlasMaps;
use crate::error::{Error, Result};
use crate::reproject::PartialTexture;
use crate::texture::TextureMap;

/// Floor on the cosine inside the logarithm of the adaptive weighter.
pub const COS_EPS: f64 = 1e-6;

/// `weights[v][u]`: nonnegative, zero where view `v` does not cover texel
/// `u`, summing to one over views on every covered texel.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    resolution: usize,
    weights: Vec<Vec<f64>>,
}

impl WeightField {
    pub fn new(resolution: usize, weights: Vec<Vec<f64>>) -> Result<Self> {
        let n = resolution * resolution;
        if weights.iter().any(|w| w.len() != n) {
            return Err(Error::shape(format!("weight planes must hold {n} texels")));
        }
        if weights.iter().flatten().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        Ok(Self { resolution, weights })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn view_count(&self) -> usize {
        self.weights.len()
    }

    pub fn view(&self, v: usize) -> &[f64] {
        &self.weights[v]
    }

    #[inline]
    pub fn weight(&self, view: usize, texel: usize) -> f64 {
        self.weights[view][texel]
    }

    /// Largest deviation from a partition of unity over texels covered by
    /// some partial, and largest weight placed on a non-covering view.
    pub fn partition_error(&self, partials: &[PartialTexture]) -> f64 {
        let n = self.resolution * self.resolution;
        let mut worst: f64 = 0.0;
        for u in 0..n {
            let mut sum = 0.0;
            let mut any = false;
            for (v, p) in partials.iter().enumerate() {
                if p.covered[u] {
                    any = true;
                    sum += self.weights[v][u];
                } else {
                    worst = worst.max(self.weights[v][u]);
                }
            }
            if any {
                worst = worst.max((sum - 1.0).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeighterParams {
    pub beta: f64,
    pub lambda_edge: f64,
    pub lambda_t: f64,
    pub temperature: f64,
}

impl Default for WeighterParams {
    fn default() -> Self {
        Self {
            beta: 1.0,
            lambda_edge: 0.0,
            lambda_t: 0.0,
            temperature: 1.0,
        }
    }
}

impl WeighterParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.beta, self.lambda_edge, self.lambda_t, self.temperature];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite weighter parameter in {self:?}")));
        }
        if self.temperature <= 0.0 || self.beta < 0.0 || self.lambda_edge < 0.0 {
            return Err(Error::invalid(format!(
                "weighter needs temperature > 0 and nonnegative beta, lambda_edge: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| Error::invalid(format!("weighter params: {e}")))?;
        p.validate()?;
        Ok(p)
    }
}

/// How synchronization and the fuse stages weigh views.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Weighting {
    Cosine { beta: f64 },
    Adaptive(WeighterParams),
}

impl Default for Weighting {
    fn default() -> Self {
        Weighting::Cosine { beta: 1.0 }
    }
}

impl Weighting {
    pub fn compute(&self, partials: &[PartialTexture], atlas: &UvAtlasMaps, t: f64) -> Result<WeightField> {
        match self {
            Weighting::Cosine { beta } => cosine_weights(partials, *beta),
            Weighting::Adaptive(p) => weighter_score(partials, atlas, t, p),
        }
    }
}

fn check_partials(partials: &[PartialTexture]) -> Result<usize> {
    let first = partials.first().ok_or_else(|| Error::invalid("no partial textures"))?;
    let res = first.resolution;
    if partials.iter().any(|p| p.resolution != res) {
        return Err(Error::shape("partial textures differ in resolution"));
    }
    Ok(res)
}

/// Normalizes nonnegative raw scores over covering views; a texel whose
/// scores all underflow falls back to equal weights.
fn normalize(partials: &[PartialTexture], res: usize, score: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    let n = res * res;
    let mut w = vec![vec![0.0; n]; partials.len()];
    for u in 0..n {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (v, p) in partials.iter().enumerate() {
            if p.covered[u] {
                let s = score(v, u);
                w[v][u] = s;
                sum += s;
                count += 1;
            }
        }
        if count == 0 {
            continue;
        }
        for (v, p) in partials.iter().enumerate() {
            if p.covered[u] {
                w[v][u] = if sum > 0.0 { w[v][u] / sum } else { 1.0 / count as f64 };
            }
        }
    }
    w
}

/// `w_v ∝ max(0, cos_v)^beta` over covering views.
pub fn cosine_weights(partials: &[PartialTexture], beta: f64) -> Result<WeightField> {
    let res = check_partials(partials)?;
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::invalid(format!("cosine exponent must be finite and >= 0, got {beta}")));
    }
    let w = normalize(partials, res, |v, u| (partials[v].view_cos[u] as f64).max(0.0).powf(beta));
    WeightField::new(res, w)
}

/// Softmax over covering views of
/// `((beta + lambda_t * t) * ln(max(eps, cos)) - lambda_edge * edge) / temperature`.
pub fn weighter_score(
    partials: &[PartialTexture],
    atlas: &UvAtlasMaps,
    t: f64,
    params: &WeighterParams,
) -> Result<WeightField> {
    let res = check_partials(partials)?;
    params.validate()?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("timestep {t} outside [0, 1]")));
    }
    if atlas.resolution() != res {
        return Err(Error::shape(format!(
            "atlas resolution {} differs from partial resolution {res}",
            atlas.resolution()
        )));
    }
    let exponent = params.beta + params.lambda_t * t;
    let logit = |v: usize, u: usize| {
        let p = &partials[v];
        (exponent * (p.view_cos[u] as f64).max(COS_EPS).ln() - params.lambda_edge * p.depth_edge[u] as f64)
            / params.temperature
    };
    let n = res * res;
    let mut max_logit = vec![f64::NEG_INFINITY; n];
    for (v, p) in partials.iter().enumerate() {
        for u in 0..n {
            if p.covered[u] {
                max_logit[u] = max_logit[u].max(logit(v, u));
            }
        }
    }
    let w = normalize(partials, res, |v, u| (logit(v, u) - max_logit[u]).exp());
    WeightField::new(res, w)
}

/// Weighted mean of covering views, clamped to their per-channel range so
/// that agreeing views reproduce their common color exactly. Validity is
/// the union of coverage.
pub fn fuse(partials: &[PartialTexture], weights: &WeightField) -> Result<TextureMap> {
    let res = check_partials(partials)?;
    if weights.view_count() != partials.len() || weights.resolution() != res {
        return Err(Error::shape(format!(
            "{} weight planes at resolution {} for {} partials at {res}",
            weights.view_count(),
            weights.resolution(),
            partials.len()
        )));
    }
    let n = res * res;
    let mut colors = vec![[0.0f32; 3]; n];
    let mut valid = vec![false; n];
    for u in 0..n {
        let mut acc = [0.0f64; 3];
        let mut wsum = 0.0;
        let mut lo = [f32::INFINITY; 3];
        let mut hi = [f32::NEG_INFINITY; 3];
        let mut count = 0usize;
        for (v, p) in partials.iter().enumerate() {
            if !p.covered[u] {
                continue;
            }
            let w = weights.weight(v, u);
            let c = p.colors[u];
            for k in 0..3 {
                acc[k] += w * c[k] as f64;
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
            wsum += w;
            count += 1;
        }
        if count == 0 {
            continue;
        }
        valid[u] = true;
        for k in 0..3 {
            let mean = if wsum > 0.0 {
                (acc[k] / wsum) as f32
            } else {
                lo[k]
            };
            colors[u][k] = mean.clamp(lo[k], hi[k]);
        }
    }
    TextureMap::new(res, colors, valid)
}
