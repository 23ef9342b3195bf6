//! Velocity field interface and analytic stand-ins for the network.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::atlas::UvAtlasMaps;
use crate::embed::{ConditionBundle, EMBED_DIM};
use crate::error::{Error, Result};
use crate::flow::latent::Latent;
use crate::image::GridImage;
use crate::raster::{RigGeometry, BACKGROUND};
use crate::texture::texel_index_of;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Positive,
    Negative,
}

pub struct ModelInput<'a> {
    pub x: &'a Latent,
    pub t: f64,
    pub condition: &'a ConditionBundle,
    pub branch: Branch,
    /// Guidance scale baked into distilled backbones; opaque to analytic models.
    pub distilled_scale: f64,
    pub depth: &'a GridImage,
}

/// `v(x, t, condition, depth)`; must be deterministic in its inputs.
pub trait VelocityModel: Send + Sync {
    fn velocity(&self, input: &ModelInput) -> Result<Latent>;
}

/// Straight-line velocity towards a fixed target: `(x - g) / t`.
#[derive(Debug, Clone)]
pub struct OracleVelocity {
    target: Latent,
}

impl OracleVelocity {
    pub fn new(target: Latent) -> Self {
        Self { target }
    }

    pub fn target(&self) -> &Latent {
        &self.target
    }
}

fn oracle(x: &Latent, g: &Latent, t: f64) -> Result<Latent> {
    if t == 0.0 {
        return x.zip_map(g, |_, _| 0.0);
    }
    x.zip_map(g, |x, g| (x - g) / t)
}

impl VelocityModel for OracleVelocity {
    fn velocity(&self, input: &ModelInput) -> Result<Latent> {
        oracle(input.x, &self.target, input.t)
    }
}

/// Oracle plus `t * (bias + noise)`: a constant per-view, per-channel color
/// bias and white noise redrawn for every timestep. Both are seeded, so the
/// model stays deterministic.
#[derive(Debug, Clone)]
pub struct NoisyOracleVelocity {
    target: Latent,
    bias: Vec<[f64; 4]>,
    noise_sigma: f64,
    seed: u64,
}

impl NoisyOracleVelocity {
    pub fn new(target: Latent, bias_sigma: f64, noise_sigma: f64, seed: u64) -> Result<Self> {
        if !(bias_sigma >= 0.0 && noise_sigma >= 0.0 && bias_sigma.is_finite() && noise_sigma.is_finite()) {
            return Err(Error::invalid("noise amplitudes must be finite and nonnegative"));
        }
        if target.channels() > 4 {
            return Err(Error::invalid("noisy oracle supports at most 4 channels"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(0.0, bias_sigma).expect("valid sigma");
        let bias = (0..target.views())
            .map(|_| [0; 4].map(|_: u8| dist.sample(&mut rng)))
            .collect();
        Ok(Self {
            target,
            bias,
            noise_sigma,
            seed,
        })
    }

    pub fn bias(&self, view: usize) -> [f64; 4] {
        self.bias[view]
    }
}

impl VelocityModel for NoisyOracleVelocity {
    fn velocity(&self, input: &ModelInput) -> Result<Latent> {
        let mut v = oracle(input.x, &self.target, input.t)?;
        let t = input.t;
        let ch = v.channels();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ t.to_bits().rotate_left(17) ^ 0x005e_ed0f_5eed);
        for view in 0..v.views() {
            let b = self.bias[view];
            for (i, e) in v.view_mut(view).iter_mut().enumerate() {
                let n: f64 = StandardNormal.sample(&mut rng);
                *e += t * (b[i % ch] + self.noise_sigma * n);
            }
        }
        Ok(v)
    }
}

/// Toy generative model: the condition vector picks a smooth color field
/// over the surface, rendered through the rig; velocity points straight at
/// that render. The field is a function of 3D position, so its renders are
/// already view-consistent; guidance extrapolates between the fields of the
/// two branches.
#[derive(Debug, Clone)]
pub struct EmbeddingFieldVelocity {
    /// Per view, per pixel: atlas texel seen there, or none for background.
    pixel_texels: Vec<Vec<Option<u32>>>,
    texel_positions: Vec<[f64; 3]>,
    texel_valid: Vec<bool>,
    layout: (usize, usize),
    tile: (usize, usize),
    mixing: Vec<f64>,
}

const FIELD_BASIS: usize = 4;

impl EmbeddingFieldVelocity {
    pub fn new(geometry: &RigGeometry, atlas: &UvAtlasMaps, seed: u64) -> Result<Self> {
        if geometry.is_empty() {
            return Err(Error::invalid("rig has no views"));
        }
        let res = atlas.resolution();
        let pixel_texels = geometry
            .views()
            .iter()
            .map(|g| {
                (0..g.pixel_count())
                    .map(|p| {
                        if !g.coverage[p] {
                            return None;
                        }
                        let u = texel_index_of(g.uv[p], res);
                        atlas.is_valid(u).then_some(u as u32)
                    })
                    .collect()
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 3.0 / (EMBED_DIM as f64).sqrt();
        let mixing = (0..3 * FIELD_BASIS * EMBED_DIM)
            .map(|_| {
                let n: f64 = StandardNormal.sample(&mut rng);
                scale * n
            })
            .collect::<Vec<f64>>();
        let g0 = geometry.view(0);
        Ok(Self {
            pixel_texels,
            texel_positions: atlas.positions().to_vec(),
            texel_valid: atlas.validity().to_vec(),
            layout: geometry.layout(),
            tile: (g0.width, g0.height),
            mixing,
        })
    }

    /// Texel colors of the field selected by `vector`.
    pub fn field_colors(&self, vector: &[f64]) -> Vec<[f64; 3]> {
        let mut coeff = [[0.0; FIELD_BASIS]; 3];
        for (k, row) in coeff.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                let base = (k * FIELD_BASIS + j) * EMBED_DIM;
                *c = vector.iter().zip(&self.mixing[base..]).map(|(a, b)| a * b).sum();
            }
        }
        self.texel_positions
            .iter()
            .zip(&self.texel_valid)
            .map(|(p, &valid)| {
                if !valid {
                    return [0.0; 3];
                }
                let phi = [
                    1.0,
                    (std::f64::consts::PI * p[0]).sin(),
                    (std::f64::consts::PI * p[1]).sin(),
                    (std::f64::consts::PI * p[2]).sin(),
                ];
                coeff.map(|c| {
                    let s: f64 = c.iter().zip(&phi).map(|(a, b)| a * b).sum();
                    1.0 / (1.0 + (-s).exp())
                })
            })
            .collect()
    }

    pub fn target(&self, vector: &[f64]) -> Latent {
        let colors = self.field_colors(vector);
        let mut out = Latent::zeros(self.layout, self.tile, 3);
        for (view, texels) in self.pixel_texels.iter().enumerate() {
            let dst = out.view_mut(view);
            for (p, texel) in texels.iter().enumerate() {
                let c = match texel {
                    Some(u) => colors[*u as usize],
                    None => BACKGROUND.map(|b| b as f64),
                };
                dst[p * 3..p * 3 + 3].copy_from_slice(&c);
            }
        }
        out
    }
}

impl VelocityModel for EmbeddingFieldVelocity {
    fn velocity(&self, input: &ModelInput) -> Result<Latent> {
        let vector = match input.branch {
            Branch::Positive => input.condition.positive_vector(),
            Branch::Negative => input.condition.negative.values.clone(),
        };
        oracle(input.x, &self.target(&vector), input.t)
    }
}
