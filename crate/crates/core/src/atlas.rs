//! UV-space baking of surface position, normal and coverage.
//!
//! Contested texels are counted only when the texel center lies strictly
//! inside both triangles.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::{self, Vec3};
use crate::mesh::TriMesh;
use crate::texture::texel_center;

pub const NO_TRIANGLE: u32 = u32::MAX;

/// Per-texel surface attributes of a mesh's UV atlas.
///
/// Invalid texels hold NaN positions and zero normals and must not be read.
#[derive(Debug, Clone)]
pub struct UvAtlasMaps {
    resolution: usize,
    position: Vec<Vec3>,
    normal: Vec<Vec3>,
    triangle: Vec<u32>,
    validity: Vec<bool>,
    contested: usize,
    source_triangles: usize,
}

impl UvAtlasMaps {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn texel_count(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.position
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normal
    }

    pub fn triangles(&self) -> &[u32] {
        &self.triangle
    }

    pub fn validity(&self) -> &[bool] {
        &self.validity
    }

    #[inline]
    pub fn is_valid(&self, index: usize) -> bool {
        self.validity[index]
    }

    #[inline]
    pub fn position(&self, index: usize) -> Vec3 {
        self.position[index]
    }

    #[inline]
    pub fn triangle(&self, index: usize) -> u32 {
        self.triangle[index]
    }

    pub fn valid_count(&self) -> usize {
        self.validity.iter().filter(|&&v| v).count()
    }

    /// Texels claimed by more than one UV triangle (last writer kept).
    pub fn contested(&self) -> usize {
        self.contested
    }

    /// Number of triangles in the mesh this atlas was baked from.
    pub fn source_triangles(&self) -> usize {
        self.source_triangles
    }

    /// Indices of valid texels in row-major order.
    pub fn valid_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.validity
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| v.then_some(i))
    }
}

/// Rasterizes every triangle in UV space at texel centers and interpolates
/// position and normal barycentrically. Texel centers on an edge belong to
/// the triangle; overlapping charts resolve to the highest triangle index.
pub fn bake_atlas_maps(mesh: &TriMesh, resolution: usize) -> Result<UvAtlasMaps> {
    if resolution < 4 {
        return Err(Error::invalid(format!("atlas resolution must be >= 4, got {resolution}")));
    }
    let res = resolution;
    let rf = res as f64;

    // rows each triangle can touch; row y has center v = 1 - (y + 0.5) / res
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); res];
    for (t, uv) in mesh.uvs().iter().enumerate() {
        let vmin = uv.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let vmax = uv.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        let y0 = (((1.0 - vmax) * rf - 0.5).floor().max(0.0)) as usize;
        let y1 = ((((1.0 - vmin) * rf - 0.5).ceil()) as usize).min(res - 1);
        for row in rows.iter_mut().take(y1 + 1).skip(y0) {
            row.push(t as u32);
        }
    }

    struct Row {
        position: Vec<Vec3>,
        normal: Vec<Vec3>,
        triangle: Vec<u32>,
        interior: Vec<bool>,
        contested: usize,
    }

    let baked: Vec<Row> = rows
        .par_iter()
        .enumerate()
        .map(|(y, tris)| {
            let mut row = Row {
                position: vec![[f64::NAN; 3]; res],
                normal: vec![[0.0; 3]; res],
                triangle: vec![NO_TRIANGLE; res],
                interior: vec![false; res],
                contested: 0,
            };
            let v = texel_center(0, y, res)[1];
            for &t in tris {
                let uv = mesh.uvs()[t as usize];
                let area = math::edge(uv[0], uv[1], uv[2]);
                if area == 0.0 {
                    continue;
                }
                let umin = uv.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
                let umax = uv.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
                let x0 = ((umin * rf - 0.5).floor().max(0.0)) as usize;
                let x1 = (((umax * rf - 0.5).ceil()) as usize).min(res - 1);
                let pos = mesh.corners(t as usize);
                let nrm = mesh.corner_normals(t as usize);
                for x in x0..=x1 {
                    let p = [texel_center(x, y, res)[0], v];
                    let mut w = [
                        math::edge(uv[1], uv[2], p),
                        math::edge(uv[2], uv[0], p),
                        math::edge(uv[0], uv[1], p),
                    ];
                    if area < 0.0 {
                        w = w.map(|e| -e);
                    }
                    if w.iter().any(|&e| e < 0.0) {
                        continue;
                    }
                    let b = w.map(|e| e / area.abs());
                    // shared edges within a chart are not overlaps
                    let interior = w.iter().all(|&e| e > 0.0);
                    if row.triangle[x] != NO_TRIANGLE && interior && row.interior[x] {
                        row.contested += 1;
                    }
                    row.interior[x] = interior;
                    row.triangle[x] = t;
                    row.position[x] = math::lerp3(b, pos);
                    row.normal[x] = math::normalize(math::lerp3(b, nrm))
                        .unwrap_or_else(|| mesh.face_normal(t as usize));
                }
            }
            row
        })
        .collect();

    let n = res * res;
    let mut maps = UvAtlasMaps {
        resolution: res,
        position: Vec::with_capacity(n),
        normal: Vec::with_capacity(n),
        triangle: Vec::with_capacity(n),
        validity: Vec::with_capacity(n),
        contested: 0,
        source_triangles: mesh.triangle_count(),
    };
    for row in baked {
        maps.contested += row.contested;
        maps.validity.extend(row.triangle.iter().map(|&t| t != NO_TRIANGLE));
        maps.position.extend(row.position);
        maps.normal.extend(row.normal);
        maps.triangle.extend(row.triangle);
    }
    if maps.contested > 0 {
        log::warn!("{} texels claimed by overlapping UV charts", maps.contested);
    }
    Ok(maps)
}
