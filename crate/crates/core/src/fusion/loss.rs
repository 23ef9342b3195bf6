//! Losses used to score a fused texture against its views and ground truth.
//!
//! Pixels whose texel is uncovered on either side of a comparison are
//! excluded; every loss is a mean over the samples that remain.

use serde::{Deserialize, Serialize};

use crate::camera::CameraRig;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::mesh::TriMesh;
use crate::raster::RigGeometry;
use crate::reproject::PartialTexture;
use crate::texture::TextureMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_pec: f64,
    pub lambda_cyc: f64,
    pub lambda_sm: f64,
    /// `alpha` in the `exp(-alpha * t)` noise-level factor.
    pub alpha_decay: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_pec: 1.0,
            lambda_cyc: 0.5,
            lambda_sm: 0.2,
            alpha_decay: 1.0,
        }
    }
}

/// Image transform the reconstruction loss compares in. Implementations
/// must keep width and height.
pub trait FeatureTransform: Send + Sync {
    fn apply(&self, image: &Image) -> Image;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityFeature;

impl FeatureTransform for IdentityFeature {
    fn apply(&self, image: &Image) -> Image {
        image.clone()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub pec: f64,
    pub cyc: f64,
    pub sm: f64,
    pub total: f64,
}

/// Squared forward differences in x and y, summed and divided by the
/// number of pixel values.
pub fn loss_smooth(image: &Image) -> Result<f64> {
    if image.width() < 2 || image.height() < 2 {
        return Err(Error::invalid("smoothness loss needs at least 2x2 pixels"));
    }
    let mask = vec![true; image.pixel_count()];
    Ok(smooth_sum(image, &mask).0 / (image.pixel_count() * image.channels()) as f64)
}

/// Like [`loss_smooth`] but only differences between two masked pixels
/// count, normalized by the masked pixel values.
pub fn loss_smooth_masked(image: &Image, mask: &[bool]) -> f64 {
    let (sum, count) = smooth_sum(image, mask);
    if count == 0 {
        0.0
    } else {
        sum / (count * image.channels()) as f64
    }
}

fn smooth_sum(image: &Image, mask: &[bool]) -> (f64, usize) {
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    let d = image.data();
    let mut sum = 0.0;
    let mut count = 0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !mask[i] {
                continue;
            }
            count += 1;
            for (j, ok) in [(i + 1, x + 1 < w), (i + w, y + 1 < h)] {
                if ok && mask[j] {
                    for c in 0..ch {
                        let g = (d[j * ch + c] - d[i * ch + c]) as f64;
                        sum += g * g;
                    }
                }
            }
        }
    }
    (sum, count)
}

fn l1(a: &Image, b: &Image, mask_a: &[bool], mask_b: &[bool]) -> (f64, usize) {
    let ch = a.channels();
    let mut sum = 0.0;
    let mut count = 0;
    for i in 0..a.pixel_count() {
        if mask_a[i] && mask_b[i] {
            for c in 0..ch {
                sum += (a.data()[i * ch + c] - b.data()[i * ch + c]).abs() as f64;
            }
            count += ch;
        }
    }
    (sum, count)
}

fn ratio(sum: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Renders that do not depend on the fused texture, shared by every
/// evaluation of one training sample.
pub struct LossContext<'a> {
    geometry: &'a RigGeometry,
    partial_renders: Vec<(Image, Vec<bool>)>,
    truth_renders: Vec<(Image, Vec<bool>)>,
    t: f64,
}

impl<'a> LossContext<'a> {
    pub fn new(
        geometry: &'a RigGeometry,
        partials: &[PartialTexture],
        ground_truth: Option<&TextureMap>,
        t: f64,
    ) -> Result<Self> {
        if partials.len() != geometry.len() {
            return Err(Error::shape(format!(
                "{} partials for {} views",
                partials.len(),
                geometry.len()
            )));
        }
        let partial_renders = partials
            .iter()
            .zip(geometry.views())
            .map(|(p, g)| crate::raster::shade(g, &p.to_texture(), crate::raster::Sampling::Nearest))
            .collect::<Result<Vec<_>>>()?;
        let truth_renders = match ground_truth {
            Some(gt) => geometry.render(gt)?,
            None => Vec::new(),
        };
        Ok(Self {
            geometry,
            partial_renders,
            truth_renders,
            t,
        })
    }

    pub fn cycle(&self, fused_renders: &[(Image, Vec<bool>)]) -> f64 {
        let (mut sum, mut count) = (0.0, 0);
        for ((pi, pm), (fi, fm)) in self.partial_renders.iter().zip(fused_renders) {
            let (s, c) = l1(pi, fi, pm, fm);
            sum += s;
            count += c;
        }
        ratio(sum, count)
    }

    pub fn recon(&self, fused_renders: &[(Image, Vec<bool>)], alpha: f64, feature: &dyn FeatureTransform) -> Result<f64> {
        if self.truth_renders.is_empty() {
            return Err(Error::invalid("reconstruction loss needs a ground-truth texture"));
        }
        let (mut sum, mut count) = (0.0, 0);
        for ((ti, tm), (fi, fm)) in self.truth_renders.iter().zip(fused_renders) {
            let (a, b) = (feature.apply(ti), feature.apply(fi));
            if a.width() != ti.width() || a.height() != ti.height() || !a.same_shape(&b) {
                return Err(Error::shape("feature transform changed the image size"));
            }
            let (s, c) = l1(&a, &b, tm, fm);
            sum += s;
            count += c;
        }
        Ok((-alpha * self.t).exp() * ratio(sum, count))
    }

    pub fn smooth(fused_renders: &[(Image, Vec<bool>)]) -> f64 {
        let (mut sum, mut count) = (0.0, 0);
        for (img, mask) in fused_renders {
            let (s, c) = smooth_sum(img, mask);
            sum += s;
            count += c * img.channels();
        }
        ratio(sum, count)
    }

    pub fn evaluate(&self, fused: &TextureMap, weights: &LossWeights, feature: &dyn FeatureTransform) -> Result<LossBreakdown> {
        let renders = self.geometry.render(fused)?;
        let pec = self.recon(&renders, weights.alpha_decay, feature)?;
        let cyc = self.cycle(&renders);
        let sm = Self::smooth(&renders);
        Ok(LossBreakdown {
            pec,
            cyc,
            sm,
            total: weights.lambda_pec * pec + weights.lambda_cyc * cyc + weights.lambda_sm * sm,
        })
    }
}

/// Mean L1 between each view's render of its own partial and of the fused
/// texture, over pixels where both are defined.
pub fn loss_cycle(partials: &[PartialTexture], fused: &TextureMap, mesh: &TriMesh, rig: &CameraRig) -> Result<f64> {
    let geometry = RigGeometry::new(mesh, rig);
    let ctx = LossContext::new(&geometry, partials, None, 0.0)?;
    Ok(ctx.cycle(&geometry.render(fused)?))
}

/// `exp(-alpha t)` times the mean L1 between features of ground-truth and
/// fused renders.
pub fn loss_recon(
    fused: &TextureMap,
    ground_truth: &TextureMap,
    mesh: &TriMesh,
    rig: &CameraRig,
    t: f64,
    weights: &LossWeights,
    feature: &dyn FeatureTransform,
) -> Result<f64> {
    let geometry = RigGeometry::new(mesh, rig);
    let ctx = LossContext {
        geometry: &geometry,
        partial_renders: Vec::new(),
        truth_renders: geometry.render(ground_truth)?,
        t,
    };
    ctx.recon(&geometry.render(fused)?, weights.alpha_decay, feature)
}

pub fn total_weighter_loss(
    geometry: &RigGeometry,
    partials: &[PartialTexture],
    fused: &TextureMap,
    ground_truth: &TextureMap,
    t: f64,
    weights: &LossWeights,
    feature: &dyn FeatureTransform,
) -> Result<LossBreakdown> {
    LossContext::new(geometry, partials, Some(ground_truth), t)?.evaluate(fused, weights, feature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::bake_atlas_maps;
    use crate::camera::{make_surround_rig, RigSpec};
    use crate::fusion::weights::{cosine_weights, fuse, WeightField};
    use crate::procedural;
    use crate::reproject::{reproject_grid, ReprojectOptions};

    #[test]
    fn smooth_closed_forms() {
        assert_eq!(loss_smooth(&Image::filled(5, 4, 3, 0.3)).unwrap(), 0.0);
        let (w, h) = (6usize, 3usize);
        let alt = Image::from_fn(w, h, 1, |x, _, _| (x % 2) as f32);
        let want = (h * (w - 1)) as f64 / (w * h) as f64;
        assert!((loss_smooth(&alt).unwrap() - want).abs() < 1e-12);
        let ramp = Image::from_fn(w, h, 2, |x, _, _| x as f32 / (w - 1) as f32);
        let per_row = (w - 1) as f64 * (1.0 / (w - 1) as f64).powi(2);
        let want = h as f64 * per_row / (w * h) as f64;
        assert!((loss_smooth(&ramp).unwrap() - want).abs() < 1e-7);
        assert!(loss_smooth(&Image::new(1, 5, 3)).is_err());
    }

    #[test]
    fn masked_smooth_ignores_background_edges() {
        let img = Image::from_fn(4, 4, 1, |x, _, _| if x < 2 { 0.5 } else { 1.0 });
        let mask: Vec<bool> = (0..16).map(|i| i % 4 < 2).collect();
        assert_eq!(loss_smooth_masked(&img, &mask), 0.0);
    }

    fn scene() -> (TriMesh, CameraRig, crate::atlas::UvAtlasMaps) {
        let mesh = procedural::cube().unwrap();
        let rig = make_surround_rig(&RigSpec {
            elevation_deg: 30.0,
            resolution: 48,
            ..RigSpec::default()
        })
        .unwrap();
        let atlas = bake_atlas_maps(&mesh, 48).unwrap();
        (mesh, rig, atlas)
    }

    #[test]
    fn cycle_vanishes_on_agreeing_views() {
        let (mesh, rig, atlas) = scene();
        let tex = procedural::uv_gradient(48, Some(atlas.validity()));
        let grid = crate::raster::render_views(&tex, &mesh, &rig, crate::raster::Sampling::Nearest).unwrap();
        let parts = reproject_grid(&grid, &rig, &mesh, &atlas, &ReprojectOptions::default()).unwrap();
        let fused = fuse(&parts, &cosine_weights(&parts, 1.0).unwrap()).unwrap();
        assert_eq!(loss_cycle(&parts, &fused, &mesh, &rig).unwrap(), 0.0);
        let single = parts[0].to_texture();
        assert_eq!(loss_cycle(&parts[..1], &single, &mesh, &make_surround_rig(&RigSpec { view_count: 1, resolution: 48, elevation_deg: 30.0, ..RigSpec::default() }).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn cycle_of_constant_halves() {
        let (mesh, rig, atlas) = scene();
        let grid = crate::image::GridImage::new(2, 2, vec![Image::new(48, 48, 3); 4]).unwrap();
        let mut parts = reproject_grid(&grid, &rig, &mesh, &atlas, &ReprojectOptions::default()).unwrap();
        for (i, p) in parts.iter_mut().enumerate() {
            let c = (i % 2) as f32;
            for u in 0..p.colors.len() {
                if p.covered[u] {
                    p.colors[u] = [c; 3];
                }
            }
        }
        let n = 48 * 48;
        let equal: Vec<Vec<f64>> = (0..4)
            .map(|v| (0..n).map(|u| {
                let k = parts.iter().filter(|p| p.covered[u]).count();
                if parts[v].covered[u] { 1.0 / k as f64 } else { 0.0 }
            }).collect())
            .collect();
        let fused = fuse(&parts, &WeightField::new(48, equal).unwrap()).unwrap();
        let geometry = RigGeometry::new(&mesh, &rig);
        let ctx = LossContext::new(&geometry, &parts, None, 0.0).unwrap();
        // oracle: residual is |own color - mean of covering colors| per sample
        let (mut sum, mut count) = (0.0f64, 0usize);
        let mut shared = 0usize;
        for (v, g) in geometry.views().iter().enumerate() {
            for p in 0..g.pixel_count() {
                if !g.coverage[p] {
                    continue;
                }
                let u = crate::texture::texel_index_of(g.uv[p], 48);
                if !parts[v].covered[u] {
                    continue;
                }
                let cov: Vec<f64> = parts.iter().filter(|q| q.covered[u]).map(|q| q.colors[u][0] as f64).collect();
                let mean = cov.iter().sum::<f64>() / cov.len() as f64;
                shared += (cov.len() > 1) as usize;
                sum += 3.0 * (parts[v].colors[u][0] as f64 - mean).abs();
                count += 3;
            }
        }
        assert!(shared > 0);
        let cyc = ctx.cycle(&geometry.render(&fused).unwrap());
        assert!((cyc - sum / count as f64).abs() < 1e-9, "{cyc} vs {}", sum / count as f64);
    }

    #[test]
    fn recon_scales_with_time() {
        let (mesh, rig, atlas) = scene();
        let gt = TextureMap::constant(48, [0.4; 3], atlas.validity().to_vec()).unwrap();
        let off = TextureMap::constant(48, [0.5; 3], atlas.validity().to_vec()).unwrap();
        let w = LossWeights::default();
        assert_eq!(loss_recon(&gt, &gt, &mesh, &rig, 0.3, &w, &IdentityFeature).unwrap(), 0.0);
        let l0 = loss_recon(&off, &gt, &mesh, &rig, 0.0, &w, &IdentityFeature).unwrap();
        let lh = loss_recon(&off, &gt, &mesh, &rig, 0.5, &w, &IdentityFeature).unwrap();
        let l1 = loss_recon(&off, &gt, &mesh, &rig, 1.0, &w, &IdentityFeature).unwrap();
        let r = (0.5f32 - 0.4f32) as f64;
        assert!((l0 - r).abs() < 1e-9);
        assert!((lh - r * (-0.5f64).exp()).abs() < 1e-9);
        assert!((l1 / l0 - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn default_weights() {
        let w = LossWeights::default();
        assert_eq!((w.lambda_pec, w.lambda_cyc, w.lambda_sm), (1.0, 0.5, 0.2));
    }
}
