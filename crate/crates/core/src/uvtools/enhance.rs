//! Mask-aware texture upscaling with mild sharpening and margin dilation.

use serde::{Deserialize, Serialize};

use crate::atlas::UvAtlasMaps;
use crate::error::{Error, Result};
use crate::texture::{texel_center, Rgb, TextureMap};
use crate::uvtools::dilate::dilate_margins;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnhanceOptions {
    /// Unsharp-mask amount.
    pub sharpen: f32,
    /// Margin dilation in output texels.
    pub margin: usize,
}

impl Default for EnhanceOptions {
    fn default() -> Self {
        Self { sharpen: 0.5, margin: 4 }
    }
}

/// Keys cubic convolution kernel with a = -0.5.
fn cubic(x: f64) -> f64 {
    let a = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

/// Weighted mean over valid taps, written relative to the strongest tap so
/// that equal colors come out exactly. `None` when the support weight is
/// too small to trust.
fn blend(taps: &[(usize, f64)], texture: &TextureMap, min_weight: f64) -> Option<Rgb> {
    let valid: Vec<(usize, f64)> = taps.iter().copied().filter(|&(u, w)| w != 0.0 && texture.is_valid(u)).collect();
    let wsum: f64 = valid.iter().map(|t| t.1).sum();
    if valid.is_empty() || wsum < min_weight {
        return None;
    }
    let anchor = valid
        .iter()
        .copied()
        .fold(valid[0], |best, t| if t.1 > best.1 { t } else { best })
        .0;
    let c0 = texture.color(anchor);
    let mut lo = c0;
    let mut hi = c0;
    let mut acc = [0.0f64; 3];
    for &(u, w) in &valid {
        let c = texture.color(u);
        for k in 0..3 {
            acc[k] += w * (c[k] - c0[k]) as f64;
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
    }
    Some([0, 1, 2].map(|k| (c0[k] + (acc[k] / wsum) as f32).clamp(lo[k], hi[k])))
}

fn sample_upscaled(texture: &TextureMap, xs: f64, ys: f64) -> Option<Rgb> {
    let res = texture.resolution() as isize;
    let (x0, y0) = (xs.floor() as isize, ys.floor() as isize);
    let (fx, fy) = (xs - x0 as f64, ys - y0 as f64);
    let index = |x: isize, y: isize| (x >= 0 && y >= 0 && x < res && y < res).then(|| (y * res + x) as usize);

    let wx = [cubic(fx + 1.0), cubic(fx), cubic(1.0 - fx), cubic(2.0 - fx)];
    let wy = [cubic(fy + 1.0), cubic(fy), cubic(1.0 - fy), cubic(2.0 - fy)];
    let mut taps = Vec::with_capacity(16);
    for (j, wyj) in wy.iter().enumerate() {
        for (i, wxi) in wx.iter().enumerate() {
            if let Some(u) = index(x0 - 1 + i as isize, y0 - 1 + j as isize) {
                taps.push((u, wxi * wyj));
            }
        }
    }
    if let Some(c) = blend(&taps, texture, 0.5) {
        return Some(c);
    }
    let mut taps = Vec::with_capacity(4);
    for (j, wyj) in [1.0 - fy, fy].iter().enumerate() {
        for (i, wxi) in [1.0 - fx, fx].iter().enumerate() {
            if let Some(u) = index(x0 + i as isize, y0 + j as isize) {
                taps.push((u, wxi * wyj));
            }
        }
    }
    if let Some(c) = blend(&taps, texture, 1e-9) {
        return Some(c);
    }
    // nearest valid texel within the bicubic footprint
    let mut best: Option<(f64, usize)> = None;
    for j in -1..=2 {
        for i in -1..=2 {
            if let Some(u) = index(x0 + i, y0 + j) {
                if texture.is_valid(u) {
                    let d = (i as f64 - fx).powi(2) + (j as f64 - fy).powi(2);
                    if best.is_none_or(|b| d < b.0) {
                        best = Some((d, u));
                    }
                }
            }
        }
    }
    best.map(|(_, u)| texture.color(u))
}

fn unsharp(texture: &TextureMap, amount: f32) -> TextureMap {
    let res = texture.resolution();
    let mut out = texture.clone();
    for y in 0..res {
        for x in 0..res {
            let u = y * res + x;
            if !texture.is_valid(u) {
                continue;
            }
            let c = texture.color(u);
            let mut acc = [0.0f64; 3];
            let mut wsum = 0.0;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= res as isize || ny >= res as isize {
                        continue;
                    }
                    let v = ny as usize * res + nx as usize;
                    if !texture.is_valid(v) {
                        continue;
                    }
                    let w = ((2 - dx.abs()) * (2 - dy.abs())) as f64;
                    let n = texture.color(v);
                    for k in 0..3 {
                        acc[k] += w * (n[k] - c[k]) as f64;
                    }
                    wsum += w;
                }
            }
            // blur - c = acc / wsum
            let sharpened = [0, 1, 2].map(|k| (c[k] - amount * (acc[k] / wsum) as f32).clamp(0.0, 1.0));
            out.set(u, sharpened);
        }
    }
    out
}

pub fn enhance_texture(texture: &TextureMap, atlas_hi: &UvAtlasMaps, factor: usize) -> Result<TextureMap> {
    enhance_texture_with(texture, atlas_hi, factor, &EnhanceOptions::default())
}

/// Upscales by `factor` (2 or 4) onto `atlas_hi`, interpolating only from
/// valid texels, sharpens, and dilates margins.
pub fn enhance_texture_with(
    texture: &TextureMap,
    atlas_hi: &UvAtlasMaps,
    factor: usize,
    options: &EnhanceOptions,
) -> Result<TextureMap> {
    if factor != 2 && factor != 4 {
        return Err(Error::invalid(format!("upscale factor must be 2 or 4, got {factor}")));
    }
    let res = texture.resolution();
    let hi_res = res * factor;
    if atlas_hi.resolution() != hi_res {
        return Err(Error::shape(format!(
            "target atlas is {}^2 but {res}^2 x {factor} needs {hi_res}^2",
            atlas_hi.resolution()
        )));
    }
    let r = res as f64;
    let mut colors = vec![[0.0f32; 3]; hi_res * hi_res];
    let mut valid = vec![false; hi_res * hi_res];
    for u in atlas_hi.valid_indices() {
        let uv = texel_center(u % hi_res, u / hi_res, hi_res);
        if let Some(c) = sample_upscaled(texture, uv[0] * r - 0.5, (1.0 - uv[1]) * r - 0.5) {
            colors[u] = c;
            valid[u] = true;
        }
    }
    let up = TextureMap::new(hi_res, colors, valid)?;
    Ok(dilate_margins(&unsharp(&up, options.sharpen), options.margin))
}
