//! Grid-shaped sampler state and the elementwise flow identities.
//!
//! Values are f64 so that straight-path arithmetic such as
//! `x - t * (x - g) / t` lands back on `g` after rounding to image precision.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::image::{GridImage, Image};

/// Tensor over a `rows x cols` grid of `tile_w x tile_h x channels` views,
/// stored view-major: view 0's pixels first, row-major within a view.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    layout: (usize, usize),
    tile: (usize, usize),
    channels: usize,
    data: Vec<f64>,
}

impl Latent {
    pub fn zeros(layout: (usize, usize), tile: (usize, usize), channels: usize) -> Self {
        let n = layout.0 * layout.1 * tile.0 * tile.1 * channels;
        Self {
            layout,
            tile,
            channels,
            data: vec![0.0; n],
        }
    }

    /// Unit gaussian entries from a ChaCha8 stream seeded with `seed`.
    pub fn gaussian_like(shape: &Latent, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = shape.clone();
        for v in &mut out.data {
            *v = StandardNormal.sample(&mut rng);
        }
        out
    }

    pub fn from_grid(grid: &GridImage) -> Self {
        let (tw, th) = grid.tile_size();
        let channels = grid.tile(0).channels();
        let data = grid
            .tiles()
            .iter()
            .flat_map(|t| t.data().iter().map(|&v| v as f64))
            .collect();
        Self {
            layout: (grid.rows(), grid.cols()),
            tile: (tw, th),
            channels,
            data,
        }
    }

    pub fn to_grid(&self) -> GridImage {
        let per = self.view_len();
        let tiles = self
            .data
            .chunks_exact(per)
            .map(|c| {
                Image::from_vec(self.tile.0, self.tile.1, self.channels, c.iter().map(|&v| v as f32).collect())
                    .expect("consistent shape")
            })
            .collect();
        GridImage::new(self.layout.0, self.layout.1, tiles).expect("consistent layout")
    }

    pub fn layout(&self) -> (usize, usize) {
        self.layout
    }

    pub fn tile_size(&self) -> (usize, usize) {
        self.tile
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn views(&self) -> usize {
        self.layout.0 * self.layout.1
    }

    /// Elements per view.
    pub fn view_len(&self) -> usize {
        self.tile.0 * self.tile.1 * self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn view(&self, v: usize) -> &[f64] {
        let n = self.view_len();
        &self.data[v * n..(v + 1) * n]
    }

    pub fn view_mut(&mut self, v: usize) -> &mut [f64] {
        let n = self.view_len();
        &mut self.data[v * n..(v + 1) * n]
    }

    pub fn same_shape(&self, other: &Latent) -> bool {
        self.layout == other.layout && self.tile == other.tile && self.channels == other.channels
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Latent) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn check(&self, other: &Latent, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: {:?}x{:?}x{} vs {:?}x{:?}x{}",
                self.layout, self.tile, self.channels, other.layout, other.tile, other.channels
            )))
        }
    }

    pub fn zip_map(&self, other: &Latent, f: impl Fn(f64, f64) -> f64) -> Result<Latent> {
        self.check(other, "latent shapes differ")?;
        let mut out = self.clone();
        for (o, b) in out.data.iter_mut().zip(&other.data) {
            *o = f(*o, *b);
        }
        Ok(out)
    }
}

/// `x0 = x - t * v`; at `t = 0` returns `x` unchanged.
pub fn predict_x0(x: &Latent, v: &Latent, t: f64) -> Result<Latent> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("timestep {t} outside [0, 1]")));
    }
    if t == 0.0 {
        x.check(v, "predict_x0")?;
        return Ok(x.clone());
    }
    x.zip_map(v, |x, v| x - t * v)
}

/// `v_neg + s * (v_cond - v_neg)`.
pub fn cfg_velocity(v_cond: &Latent, v_neg: &Latent, scale: f64) -> Result<Latent> {
    if scale == 1.0 {
        v_cond.check(v_neg, "cfg_velocity")?;
        return Ok(v_cond.clone());
    }
    v_neg.zip_map(v_cond, |n, c| n + scale * (c - n))
}

/// `(x - x0) / t`; undefined at `t = 0`.
pub fn sync_velocity(x: &Latent, x0: &Latent, t: f64) -> Result<Latent> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::invalid(format!("sync velocity needs t in (0, 1], got {t}")));
    }
    x.zip_map(x0, |x, x0| (x - x0) / t)
}

/// Maps view grids to and from the sampler's state space.
pub trait Codec: Send + Sync {
    fn encode(&self, grid: &GridImage) -> Result<Latent>;
    fn decode(&self, latent: &Latent) -> Result<GridImage>;

    /// True when latent element `i` is pixel element `i` of the decoded grid,
    /// which lets synchronization leave background latents untouched.
    fn pixel_aligned(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityCodec;

impl Codec for IdentityCodec {
    fn encode(&self, grid: &GridImage) -> Result<Latent> {
        Ok(Latent::from_grid(grid))
    }

    fn decode(&self, latent: &Latent) -> Result<GridImage> {
        Ok(latent.to_grid())
    }

    fn pixel_aligned(&self) -> bool {
        true
    }
}
