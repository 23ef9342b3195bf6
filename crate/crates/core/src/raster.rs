//! Z-buffered software rasterization of textured meshes.
//!
//! One sample per pixel at the pixel center, perspective-correct
//! barycentrics, inclusive edges with a strict depth test (on exact depth
//! ties the lower triangle index wins). Back faces are culled by default.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atlas::NO_TRIANGLE;
use crate::camera::{Camera, CameraRig};
use crate::error::{Error, Result};
use crate::image::{GridImage, Image};
use crate::math::{self, Vec2, Vec3};
use crate::mesh::TriMesh;
use crate::texture::{texel_index_of, Rgb, TextureMap};

/// Color of pixels no textured fragment lands on.
pub const BACKGROUND: Rgb = [1.0, 1.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterOptions {
    pub cull_backfaces: bool,
    pub sampling: Sampling,
}

impl Default for RasterOptions {
    fn default() -> Self {
        Self {
            cull_backfaces: true,
            sampling: Sampling::Nearest,
        }
    }
}

/// Per-pixel render channels. Background pixels have `depth = +inf`,
/// `triangle = NO_TRIANGLE`, zero normal/uv/view_cos and white color.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutputs {
    pub width: usize,
    pub height: usize,
    pub triangle: Vec<u32>,
    pub depth: Vec<f64>,
    pub normal: Vec<[f32; 3]>,
    pub uv: Vec<Vec2>,
    pub coverage: Vec<bool>,
    /// Cosine between the geometric face normal and the direction to the eye.
    pub view_cos: Vec<f32>,
    /// Texture-sampled color; present only when a texture was supplied.
    pub color: Option<Image>,
    /// Covered pixels whose texture sample hit a texel with a color.
    pub textured: Option<Vec<bool>>,
}

impl RenderOutputs {
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn covered_count(&self) -> usize {
        self.coverage.iter().filter(|&&c| c).count()
    }
}

pub fn rasterize(
    mesh: &TriMesh,
    camera: &Camera,
    texture: Option<&TextureMap>,
    sampling: Sampling,
) -> Result<RenderOutputs> {
    rasterize_with(
        mesh,
        camera,
        texture,
        &RasterOptions {
            sampling,
            ..RasterOptions::default()
        },
    )
}

pub fn rasterize_with(
    mesh: &TriMesh,
    camera: &Camera,
    texture: Option<&TextureMap>,
    options: &RasterOptions,
) -> Result<RenderOutputs> {
    let mut out = rasterize_geometry(mesh, camera, options.cull_backfaces);
    if let Some(tex) = texture {
        let (color, textured) = shade(&out, tex, options.sampling)?;
        out.color = Some(color);
        out.textured = Some(textured);
    }
    Ok(out)
}

/// Visibility pass without texturing.
pub fn rasterize_geometry(mesh: &TriMesh, camera: &Camera, cull_backfaces: bool) -> RenderOutputs {
    let (w, h) = camera.resolution();
    let n = w * h;
    let mut zbuf = vec![f64::INFINITY; n];
    let mut tri_id = vec![NO_TRIANGLE; n];
    let mut bary = vec![[0.0f64; 3]; n];
    let perspective = camera.is_perspective();
    let (near, far) = (camera.near(), camera.far());

    for t in 0..mesh.triangle_count() {
        let corners = mesh.corners(t);
        if cull_backfaces {
            let [a, b, c] = corners;
            let gn = math::cross(math::sub(b, a), math::sub(c, a));
            let centroid = math::scale(math::add(math::add(a, b), c), 1.0 / 3.0);
            if math::dot(gn, camera.direction_to_viewer(centroid)) <= 0.0 {
                continue;
            }
        }
        let cam = corners.map(|p| camera.to_camera(p));
        let Some(s0) = camera.camera_to_screen(cam[0]) else { continue };
        let Some(s1) = camera.camera_to_screen(cam[1]) else { continue };
        let Some(s2) = camera.camera_to_screen(cam[2]) else { continue };
        let sp = [[s0.x, s0.y], [s1.x, s1.y], [s2.x, s2.y]];
        let area = math::edge(sp[0], sp[1], sp[2]);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        let xmin = sp.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let xmax = sp.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let ymin = sp.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let ymax = sp.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        if xmax < 0.0 || ymax < 0.0 || xmin > w as f64 || ymin > h as f64 {
            continue;
        }
        let x0 = (xmin - 0.5).floor().max(0.0) as usize;
        let y0 = (ymin - 0.5).floor().max(0.0) as usize;
        let x1 = ((xmax - 0.5).ceil().max(0.0) as usize).min(w - 1);
        let y1 = ((ymax - 0.5).ceil().max(0.0) as usize).min(h - 1);
        let inv_z = [1.0 / cam[0][2], 1.0 / cam[1][2], 1.0 / cam[2][2]];
        for y in y0..=y1 {
            let py = y as f64 + 0.5;
            for x in x0..=x1 {
                let p = [x as f64 + 0.5, py];
                let mut e = [
                    math::edge(sp[1], sp[2], p),
                    math::edge(sp[2], sp[0], p),
                    math::edge(sp[0], sp[1], p),
                ];
                if area < 0.0 {
                    e = e.map(|v| -v);
                }
                if e[0] < 0.0 || e[1] < 0.0 || e[2] < 0.0 {
                    continue;
                }
                let l = e.map(|v| v / area.abs());
                let (b, depth) = if perspective {
                    let q = [l[0] * inv_z[0], l[1] * inv_z[1], l[2] * inv_z[2]];
                    let sum = q[0] + q[1] + q[2];
                    (q.map(|v| v / sum), 1.0 / sum)
                } else {
                    (l, l[0] * cam[0][2] + l[1] * cam[1][2] + l[2] * cam[2][2])
                };
                if !(depth > near && depth < far) {
                    continue;
                }
                let i = y * w + x;
                if depth < zbuf[i] {
                    zbuf[i] = depth;
                    tri_id[i] = t as u32;
                    bary[i] = b;
                }
            }
        }
    }

    let mut out = RenderOutputs {
        width: w,
        height: h,
        triangle: tri_id,
        depth: zbuf,
        normal: vec![[0.0; 3]; n],
        uv: vec![[0.0; 2]; n],
        coverage: vec![false; n],
        view_cos: vec![0.0; n],
        color: None,
        textured: None,
    };
    for i in 0..n {
        let t = out.triangle[i];
        if t == NO_TRIANGLE {
            continue;
        }
        let t = t as usize;
        let b = bary[i];
        let uv = mesh.uvs()[t];
        out.coverage[i] = true;
        out.uv[i] = [
            b[0] * uv[0][0] + b[1] * uv[1][0] + b[2] * uv[2][0],
            b[0] * uv[0][1] + b[1] * uv[1][1] + b[2] * uv[2][1],
        ];
        let nrm = math::normalize(math::lerp3(b, mesh.corner_normals(t))).unwrap_or_else(|| mesh.face_normal(t));
        out.normal[i] = nrm.map(|v| v as f32);
        let p: Vec3 = math::lerp3(b, mesh.corners(t));
        out.view_cos[i] = math::dot(mesh.face_normal(t), camera.direction_to_viewer(p)) as f32;
    }
    out
}

/// Samples `texture` at every covered pixel of a geometry pass.
pub fn shade(geometry: &RenderOutputs, texture: &TextureMap, sampling: Sampling) -> Result<(Image, Vec<bool>)> {
    if texture.resolution() == 0 {
        return Err(Error::invalid("texture resolution is zero"));
    }
    let n = geometry.pixel_count();
    let mut color = Image::new(geometry.width, geometry.height, 3);
    let mut textured = vec![false; n];
    for i in 0..n {
        let sample = if geometry.coverage[i] {
            match sampling {
                Sampling::Nearest => {
                    let idx = texel_index_of(geometry.uv[i], texture.resolution());
                    texture.has_color(idx).then(|| texture.color(idx))
                }
                Sampling::Bilinear => sample_bilinear(texture, geometry.uv[i]),
            }
        } else {
            None
        };
        textured[i] = sample.is_some();
        color.pixel_mut(i).copy_from_slice(&sample.unwrap_or(BACKGROUND));
    }
    Ok((color, textured))
}

/// Bilinear filter over texel centers using only texels that carry color.
pub fn sample_bilinear(texture: &TextureMap, uv: Vec2) -> Option<Rgb> {
    let res = texture.resolution();
    let r = res as f64;
    let fx = uv[0] * r - 0.5;
    let fy = (1.0 - uv[1]) * r - 0.5;
    let (x0, y0) = (fx.floor(), fy.floor());
    let (ax, ay) = (fx - x0, fy - y0);
    let mut acc = [0.0f64; 3];
    let mut wsum = 0.0;
    for (dy, wy) in [(0, 1.0 - ay), (1, ay)] {
        for (dx, wx) in [(0, 1.0 - ax), (1, ax)] {
            let x = (x0 as i64 + dx).clamp(0, res as i64 - 1) as usize;
            let y = (y0 as i64 + dy).clamp(0, res as i64 - 1) as usize;
            let idx = y * res + x;
            let wgt = wx * wy;
            if wgt > 0.0 && texture.has_color(idx) {
                let c = texture.color(idx);
                for k in 0..3 {
                    acc[k] += wgt * c[k] as f64;
                }
                wsum += wgt;
            }
        }
    }
    (wsum > 0.0).then(|| acc.map(|a| (a / wsum) as f32))
}

/// Geometry passes for every camera of a rig, reused across texture renders.
#[derive(Debug, Clone)]
pub struct RigGeometry {
    views: Vec<RenderOutputs>,
    layout: (usize, usize),
}

impl RigGeometry {
    pub fn new(mesh: &TriMesh, rig: &CameraRig) -> Self {
        let views = rig
            .cameras()
            .par_iter()
            .map(|c| rasterize_geometry(mesh, c, true))
            .collect();
        Self {
            views,
            layout: GridImage::layout_for(rig.len()),
        }
    }

    pub fn views(&self) -> &[RenderOutputs] {
        &self.views
    }

    pub fn view(&self, i: usize) -> &RenderOutputs {
        &self.views[i]
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn layout(&self) -> (usize, usize) {
        self.layout
    }

    /// Nearest-sampled renders of `texture`, one per view, with the
    /// per-pixel "color defined" masks.
    pub fn render(&self, texture: &TextureMap) -> Result<Vec<(Image, Vec<bool>)>> {
        self.views.iter().map(|g| shade(g, texture, Sampling::Nearest)).collect()
    }

    /// Same encoding as [`render_depth_grid`].
    pub fn depth_grid(&self) -> Result<GridImage> {
        depth_grid_of(&self.views, self.layout)
    }

    pub fn render_grid(&self, texture: &TextureMap) -> Result<GridImage> {
        let tiles = self.render(texture)?.into_iter().map(|(img, _)| img).collect();
        GridImage::new(self.layout.0, self.layout.1, tiles)
    }
}

/// Renders each rig view of a textured mesh and packs them into the grid.
pub fn render_views(texture: &TextureMap, mesh: &TriMesh, rig: &CameraRig, sampling: Sampling) -> Result<GridImage> {
    let (rows, cols) = GridImage::layout_for(rig.len());
    let tiles = rig
        .cameras()
        .par_iter()
        .map(|c| rasterize(mesh, c, Some(texture), sampling).map(|r| r.color.expect("texture given")))
        .collect::<Result<Vec<_>>>()?;
    GridImage::new(rows, cols, tiles)
}

pub fn render_depth_grid(mesh: &TriMesh, rig: &CameraRig) -> Result<GridImage> {
    render_depth_grid_with_layout(mesh, rig, GridImage::layout_for(rig.len()))
}

/// Depth conditioning grid: inverse depth scaled so the nearest foreground
/// point over all views maps to 1; background is 0.
pub fn render_depth_grid_with_layout(mesh: &TriMesh, rig: &CameraRig, layout: (usize, usize)) -> Result<GridImage> {
    if layout.0 * layout.1 != rig.len() {
        return Err(Error::shape(format!(
            "{} views do not fill a {}x{} grid",
            rig.len(),
            layout.0,
            layout.1
        )));
    }
    let depths: Vec<RenderOutputs> = rig
        .cameras()
        .par_iter()
        .map(|c| rasterize_geometry(mesh, c, true))
        .collect();
    depth_grid_of(&depths, layout)
}

fn depth_grid_of(views: &[RenderOutputs], layout: (usize, usize)) -> Result<GridImage> {
    let zmin = views
        .iter()
        .flat_map(|r| r.depth.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let tiles = views
        .iter()
        .map(|r| {
            let data = r
                .depth
                .iter()
                .map(|&z| if z.is_finite() { (zmin / z) as f32 } else { 0.0 })
                .collect();
            Image::from_vec(r.width, r.height, 1, data)
        })
        .collect::<Result<Vec<_>>>()?;
    GridImage::new(layout.0, layout.1, tiles)
}
