//! Square UV-space texel grids with validity masks.
//!
//! Texel `(x, y)` has its center at `u = (x + 0.5) / res`,
//! `v = 1 - (y + 0.5) / res`: row 0 is the top of the image (v close to 1).

use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::Vec2;

pub type Rgb = [f32; 3];

/// Color carried by invalid texels.
pub const SENTINEL: Rgb = [1.0, 0.0, 1.0];

#[inline]
pub fn texel_center(x: usize, y: usize, res: usize) -> Vec2 {
    let r = res as f64;
    [(x as f64 + 0.5) / r, 1.0 - (y as f64 + 0.5) / r]
}

/// Texel containing a UV coordinate, clamped to the grid.
#[inline]
pub fn texel_of(uv: Vec2, res: usize) -> (usize, usize) {
    let r = res as f64;
    let clamp = |v: f64| (v.floor().max(0.0) as usize).min(res - 1);
    (clamp(uv[0] * r), clamp((1.0 - uv[1]) * r))
}

#[inline]
pub fn texel_index_of(uv: Vec2, res: usize) -> usize {
    let (x, y) = texel_of(uv, res);
    y * res + x
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextureMap {
    resolution: usize,
    colors: Vec<Rgb>,
    validity: Vec<bool>,
    /// Texels outside `validity` whose color was filled by margin dilation.
    margin: Vec<bool>,
}

impl TextureMap {
    /// All texels invalid.
    pub fn empty(resolution: usize) -> Self {
        let n = resolution * resolution;
        Self {
            resolution,
            colors: vec![SENTINEL; n],
            validity: vec![false; n],
            margin: vec![false; n],
        }
    }

    pub fn constant(resolution: usize, color: Rgb, validity: Vec<bool>) -> Result<Self> {
        let colors = validity
            .iter()
            .map(|&v| if v { color } else { SENTINEL })
            .collect();
        Self::new(resolution, colors, validity)
    }

    /// Colors at invalid texels are replaced with [`SENTINEL`].
    pub fn new(resolution: usize, mut colors: Vec<Rgb>, validity: Vec<bool>) -> Result<Self> {
        let n = resolution * resolution;
        if resolution == 0 {
            return Err(Error::invalid("texture resolution must be positive"));
        }
        if colors.len() != n || validity.len() != n {
            return Err(Error::shape(format!(
                "texture of resolution {resolution} needs {n} texels, got {} colors / {} flags",
                colors.len(),
                validity.len()
            )));
        }
        for (c, &v) in colors.iter_mut().zip(&validity) {
            if !v {
                *c = SENTINEL;
            }
        }
        Ok(Self {
            resolution,
            colors,
            validity,
            margin: vec![false; n],
        })
    }

    /// From a 3-channel image. `validity = None` marks every texel valid.
    pub fn from_image(image: &Image, validity: Option<Vec<bool>>) -> Result<Self> {
        if image.width() != image.height() || image.channels() < 3 {
            return Err(Error::shape(format!(
                "texture image must be square RGB, got {}x{}x{}",
                image.width(),
                image.height(),
                image.channels()
            )));
        }
        let n = image.pixel_count();
        let colors = (0..n)
            .map(|i| {
                let p = image.pixel(i);
                [p[0], p[1], p[2]]
            })
            .collect();
        Self::new(image.width(), colors, validity.unwrap_or_else(|| vec![true; n]))
    }

    pub fn to_image(&self) -> Image {
        let data = self.colors.iter().flat_map(|c| c.iter().copied()).collect();
        Image::from_vec(self.resolution, self.resolution, 3, data).expect("consistent shape")
    }

    #[inline]
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    #[inline]
    pub fn texel_count(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn colors(&self) -> &[Rgb] {
        &self.colors
    }

    pub fn validity(&self) -> &[bool] {
        &self.validity
    }

    pub fn margin(&self) -> &[bool] {
        &self.margin
    }

    #[inline]
    pub fn color(&self, index: usize) -> Rgb {
        self.colors[index]
    }

    #[inline]
    pub fn is_valid(&self, index: usize) -> bool {
        self.validity[index]
    }

    /// Valid or margin-filled: the color is meaningful for sampling.
    #[inline]
    pub fn has_color(&self, index: usize) -> bool {
        self.validity[index] || self.margin[index]
    }

    pub fn valid_count(&self) -> usize {
        self.validity.iter().filter(|&&v| v).count()
    }

    pub fn set(&mut self, index: usize, color: Rgb) {
        self.colors[index] = color;
        self.validity[index] = true;
        self.margin[index] = false;
    }

    pub(crate) fn set_margin(&mut self, index: usize, color: Rgb) {
        debug_assert!(!self.validity[index]);
        self.colors[index] = color;
        self.margin[index] = true;
    }

    /// Mean color over valid texels.
    pub fn valid_mean(&self) -> Option<Rgb> {
        let mut acc = [0.0f64; 3];
        let mut n = 0usize;
        for (c, _) in self.colors.iter().zip(&self.validity).filter(|(_, &v)| v) {
            for k in 0..3 {
                acc[k] += c[k] as f64;
            }
            n += 1;
        }
        (n > 0).then(|| acc.map(|a| (a / n as f64) as f32))
    }
}
