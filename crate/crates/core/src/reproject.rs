//! Inverse rendering: lifting view images onto the UV atlas.
//!
//! The lift is texel driven. A valid atlas texel is a candidate for a view
//! when its surface point projects inside the image, agrees with the
//! z-buffer at that pixel within a relative tolerance, and faces the camera
//! more steeply than the cosine cutoff. A candidate is covered only if at
//! least one foreground pixel samples exactly that texel under nearest
//! sampling; its color is taken from the sampling pixel closest to the
//! projected texel center. With nearest sampling on both sides this makes
//! `reproject(render(T))` reproduce `T` bit for bit on covered texels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atlas::UvAtlasMaps;
use crate::camera::{Camera, CameraRig};
use crate::error::{Error, Result};
use crate::image::{GridImage, Image};
use crate::math;
use crate::mesh::TriMesh;
use crate::raster::{rasterize_geometry, RenderOutputs, RigGeometry};
use crate::texture::{texel_index_of, Rgb, TextureMap, SENTINEL};

const NO_PIXEL: u32 = u32::MAX;

/// Relative depth step between neighboring pixels that saturates the
/// depth-edge channel.
const EDGE_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReprojectOptions {
    /// Relative z-buffer agreement required for visibility.
    pub depth_tolerance: f64,
    /// Texels with view cosine at or below this are rejected (0.087 is about 85 degrees).
    pub cos_cutoff: f64,
}

impl Default for ReprojectOptions {
    fn default() -> Self {
        Self {
            depth_tolerance: 1e-2,
            cos_cutoff: 0.087,
        }
    }
}

/// One view's contribution to the atlas.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialTexture {
    pub resolution: usize,
    pub view_id: usize,
    pub colors: Vec<Rgb>,
    pub covered: Vec<bool>,
    /// Clamped to [0, 1]; zero where not covered.
    pub view_cos: Vec<f32>,
    /// Screen-space depth discontinuity indicator in [0, 1].
    pub depth_edge: Vec<f32>,
}

impl PartialTexture {
    pub fn covered_count(&self) -> usize {
        self.covered.iter().filter(|&&c| c).count()
    }

    pub fn to_texture(&self) -> TextureMap {
        TextureMap::new(self.resolution, self.colors.clone(), self.covered.clone())
            .expect("partial texture shape is consistent")
    }
}

/// Precomputed texel-to-pixel correspondence of one view.
#[derive(Debug, Clone)]
pub struct ViewProjector {
    view_id: usize,
    width: usize,
    height: usize,
    resolution: usize,
    source: Vec<u32>,
    view_cos: Vec<f32>,
    depth_edge: Vec<f32>,
}

impl ViewProjector {
    pub fn new(
        view_id: usize,
        mesh: &TriMesh,
        camera: &Camera,
        atlas: &UvAtlasMaps,
        options: &ReprojectOptions,
    ) -> Result<Self> {
        check_atlas(mesh, atlas)?;
        let geometry = rasterize_geometry(mesh, camera, true);
        Ok(Self::from_geometry(view_id, &geometry, mesh, camera, atlas, options))
    }

    /// Builds the correspondence from an existing geometry pass of the same
    /// mesh and camera.
    pub fn from_geometry(
        view_id: usize,
        geometry: &RenderOutputs,
        mesh: &TriMesh,
        camera: &Camera,
        atlas: &UvAtlasMaps,
        options: &ReprojectOptions,
    ) -> Self {
        let (w, h) = (geometry.width, geometry.height);
        let res = atlas.resolution();

        struct Candidate {
            x: f64,
            y: f64,
            view_cos: f32,
            depth_edge: f32,
        }

        let candidates: Vec<Option<Candidate>> = (0..atlas.texel_count())
            .into_par_iter()
            .map(|u| {
                if !atlas.is_valid(u) {
                    return None;
                }
                let p = atlas.position(u);
                let s = camera.project(p)?;
                let (px, py) = camera.pixel_of(&s)?;
                let pix = py * w + px;
                let z = geometry.depth[pix];
                if !z.is_finite() || (s.depth - z).abs() > options.depth_tolerance * s.depth {
                    return None;
                }
                let tri = atlas.triangle(u) as usize;
                let cos = math::dot(mesh.face_normal(tri), camera.direction_to_viewer(p));
                if cos <= options.cos_cutoff {
                    return None;
                }
                Some(Candidate {
                    x: s.x,
                    y: s.y,
                    view_cos: cos.clamp(0.0, 1.0) as f32,
                    depth_edge: depth_edge_at(geometry, px, py),
                })
            })
            .collect();

        let n = res * res;
        let mut source = vec![NO_PIXEL; n];
        let mut best = vec![f64::INFINITY; n];
        for pix in 0..w * h {
            if !geometry.coverage[pix] {
                continue;
            }
            let u = texel_index_of(geometry.uv[pix], res);
            let Some(c) = &candidates[u] else { continue };
            let dx = (pix % w) as f64 + 0.5 - c.x;
            let dy = (pix / w) as f64 + 0.5 - c.y;
            let d2 = dx * dx + dy * dy;
            if d2 < best[u] {
                best[u] = d2;
                source[u] = pix as u32;
            }
        }

        let mut view_cos = vec![0.0; n];
        let mut depth_edge = vec![0.0; n];
        for u in 0..n {
            if source[u] == NO_PIXEL {
                continue;
            }
            let c = candidates[u].as_ref().expect("source implies candidate");
            view_cos[u] = c.view_cos;
            depth_edge[u] = c.depth_edge;
        }
        Self {
            view_id,
            width: w,
            height: h,
            resolution: res,
            source,
            view_cos,
            depth_edge,
        }
    }

    pub fn view_id(&self) -> usize {
        self.view_id
    }

    pub fn covered(&self, texel: usize) -> bool {
        self.source[texel] != NO_PIXEL
    }

    pub fn covered_count(&self) -> usize {
        self.source.iter().filter(|&&s| s != NO_PIXEL).count()
    }

    /// Pixel feeding `texel`, if covered.
    pub fn source_pixel(&self, texel: usize) -> Option<usize> {
        (self.source[texel] != NO_PIXEL).then_some(self.source[texel] as usize)
    }

    pub fn apply(&self, image: &Image) -> Result<PartialTexture> {
        if image.width() != self.width || image.height() != self.height || image.channels() < 3 {
            return Err(Error::shape(format!(
                "image {}x{}x{} does not match camera {}x{} RGB",
                image.width(),
                image.height(),
                image.channels(),
                self.width,
                self.height
            )));
        }
        let colors = self
            .source
            .iter()
            .map(|&s| {
                if s == NO_PIXEL {
                    SENTINEL
                } else {
                    let p = image.pixel(s as usize);
                    [p[0], p[1], p[2]]
                }
            })
            .collect();
        Ok(PartialTexture {
            resolution: self.resolution,
            view_id: self.view_id,
            colors,
            covered: self.source.iter().map(|&s| s != NO_PIXEL).collect(),
            view_cos: self.view_cos.clone(),
            depth_edge: self.depth_edge.clone(),
        })
    }
}

fn depth_edge_at(geometry: &RenderOutputs, x: usize, y: usize) -> f32 {
    let (w, h) = (geometry.width, geometry.height);
    let z = geometry.depth[y * w + x];
    let mut max_step: f64 = 0.0;
    let neighbors = [
        (x.wrapping_sub(1), y),
        (x + 1, y),
        (x, y.wrapping_sub(1)),
        (x, y + 1),
    ];
    for (nx, ny) in neighbors {
        if nx >= w || ny >= h {
            continue;
        }
        let zn = geometry.depth[ny * w + nx];
        if !zn.is_finite() {
            return 1.0;
        }
        max_step = max_step.max((zn - z).abs());
    }
    (max_step / (EDGE_SCALE * z)).min(1.0) as f32
}

fn check_atlas(mesh: &TriMesh, atlas: &UvAtlasMaps) -> Result<()> {
    if atlas.source_triangles() != mesh.triangle_count() {
        return Err(Error::shape(format!(
            "atlas baked from {} triangles, mesh has {}",
            atlas.source_triangles(),
            mesh.triangle_count()
        )));
    }
    Ok(())
}

/// Lifts one view image into a partial texture.
pub fn reproject(
    image: &Image,
    camera: &Camera,
    mesh: &TriMesh,
    atlas: &UvAtlasMaps,
    options: &ReprojectOptions,
) -> Result<PartialTexture> {
    if (image.width(), image.height()) != camera.resolution() {
        return Err(Error::shape(format!(
            "image is {}x{} but camera renders {}x{}",
            image.width(),
            image.height(),
            camera.width(),
            camera.height()
        )));
    }
    ViewProjector::new(0, mesh, camera, atlas, options)?.apply(image)
}

/// Splits a grid into views and lifts each, preserving view order.
pub fn reproject_grid(
    grid: &GridImage,
    rig: &CameraRig,
    mesh: &TriMesh,
    atlas: &UvAtlasMaps,
    options: &ReprojectOptions,
) -> Result<Vec<PartialTexture>> {
    RigProjector::new(mesh, rig, atlas, options)?.reproject(grid)
}

/// Geometry and texel correspondences for every view of a rig.
#[derive(Debug, Clone)]
pub struct RigProjector {
    geometry: RigGeometry,
    views: Vec<ViewProjector>,
}

impl RigProjector {
    pub fn new(mesh: &TriMesh, rig: &CameraRig, atlas: &UvAtlasMaps, options: &ReprojectOptions) -> Result<Self> {
        check_atlas(mesh, atlas)?;
        let geometry = RigGeometry::new(mesh, rig);
        let views = geometry
            .views()
            .par_iter()
            .zip(rig.cameras())
            .enumerate()
            .map(|(i, (g, c))| ViewProjector::from_geometry(i, g, mesh, c, atlas, options))
            .collect();
        Ok(Self { geometry, views })
    }

    pub fn geometry(&self) -> &RigGeometry {
        &self.geometry
    }

    pub fn views(&self) -> &[ViewProjector] {
        &self.views
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn reproject(&self, grid: &GridImage) -> Result<Vec<PartialTexture>> {
        if grid.len() != self.views.len() {
            return Err(Error::shape(format!(
                "grid has {} tiles but the rig has {} cameras",
                grid.len(),
                self.views.len()
            )));
        }
        self.views
            .iter()
            .zip(grid.tiles())
            .map(|(v, tile)| v.apply(tile))
            .collect()
    }

    pub fn reproject_tiles(&self, tiles: &[Image]) -> Result<Vec<PartialTexture>> {
        if tiles.len() != self.views.len() {
            return Err(Error::shape("tile count differs from camera count"));
        }
        self.views.iter().zip(tiles).map(|(v, t)| v.apply(t)).collect()
    }
}

/// Mean over texels covered by two or more views of the largest per-channel
/// color spread across the covering views. Zero if no texel is shared.
pub fn cross_view_disagreement(partials: &[PartialTexture]) -> f64 {
    let Some(first) = partials.first() else { return 0.0 };
    let n = first.colors.len();
    let mut total = 0.0;
    let mut shared = 0usize;
    for u in 0..n {
        let mut lo = [f32::INFINITY; 3];
        let mut hi = [f32::NEG_INFINITY; 3];
        let mut count = 0;
        for p in partials.iter().filter(|p| p.covered[u]) {
            for k in 0..3 {
                lo[k] = lo[k].min(p.colors[u][k]);
                hi[k] = hi[k].max(p.colors[u][k]);
            }
            count += 1;
        }
        if count >= 2 {
            total += (0..3).map(|k| (hi[k] - lo[k]) as f64).fold(0.0, f64::max);
            shared += 1;
        }
    }
    if shared == 0 {
        0.0
    } else {
        total / shared as f64
    }
}
