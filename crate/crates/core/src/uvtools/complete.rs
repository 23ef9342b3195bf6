//! Filling occluded texels from their nearest covered neighbors on the
//! surface, measured in 3D rather than in UV space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atlas::UvAtlasMaps;
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::texture::{Rgb, TextureMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionOptions {
    pub k: usize,
    /// Inverse-distance power.
    pub power: f64,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        Self { k: 8, power: 2.0 }
    }
}

const MAX_CELLS_PER_AXIS: usize = 256;

#[inline]
pub fn squared_distance(a: Vec3, b: Vec3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Inverse-distance mean of `neighbors` (sorted by distance then index),
/// clamped to their color range. Coincident neighbors take precedence.
pub fn idw_blend(neighbors: &[(f64, usize)], colors: &[Rgb], power: f64) -> Rgb {
    let coincident = neighbors.iter().take_while(|(d2, _)| *d2 == 0.0).count();
    let used = if coincident > 0 { &neighbors[..coincident] } else { neighbors };
    let mut acc = [0.0f64; 3];
    let mut wsum = 0.0;
    let mut lo = [f32::INFINITY; 3];
    let mut hi = [f32::NEG_INFINITY; 3];
    for &(d2, i) in used {
        let w = if coincident > 0 { 1.0 } else { 1.0 / d2.powf(0.5 * power) };
        let c = colors[i];
        for k in 0..3 {
            acc[k] += w * c[k] as f64;
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
        wsum += w;
    }
    [0, 1, 2].map(|k| ((acc[k] / wsum) as f32).clamp(lo[k], hi[k]))
}

/// Uniform grid over a point set for k-nearest queries.
struct PointGrid<'a> {
    points: &'a [Vec3],
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl<'a> PointGrid<'a> {
    fn new(points: &'a [Vec3], lo: Vec3, hi: Vec3, cell: f64) -> Self {
        let extent = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let max_extent = extent.iter().copied().fold(0.0, f64::max);
        let cell = if cell > 0.0 { cell.max(max_extent / MAX_CELLS_PER_AXIS as f64) } else { 1.0 };
        let dims = extent.map(|e| ((e / cell).floor() as usize + 1).min(MAX_CELLS_PER_AXIS));
        let mut grid = Self {
            points,
            origin: lo,
            cell,
            dims,
            starts: Vec::new(),
            items: Vec::new(),
        };
        let ncell = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0u32; ncell + 1];
        let keys: Vec<usize> = points.iter().map(|p| grid.key(grid.cell_of(*p))).collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for i in 0..ncell {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            items[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        grid.starts = counts;
        grid.items = items;
        grid
    }

    fn cell_of(&self, p: Vec3) -> [usize; 3] {
        [0, 1, 2].map(|a| {
            let c = ((p[a] - self.origin[a]) / self.cell).floor();
            (c.max(0.0) as usize).min(self.dims[a] - 1)
        })
    }

    fn key(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    /// `k` nearest points as `(squared distance, index)`, ordered by
    /// distance then index.
    fn nearest(&self, q: Vec3, k: usize) -> Vec<(f64, usize)> {
        let center = self.cell_of(q);
        let max_ring = self.dims.iter().copied().max().unwrap_or(1);
        let mut found: Vec<(f64, usize)> = Vec::new();
        for r in 0..=max_ring {
            let lo = center.map(|c| c as isize - r as isize);
            let hi = center.map(|c| c as isize + r as isize);
            for z in lo[2].max(0)..=hi[2].min(self.dims[2] as isize - 1) {
                for y in lo[1].max(0)..=hi[1].min(self.dims[1] as isize - 1) {
                    for x in lo[0].max(0)..=hi[0].min(self.dims[0] as isize - 1) {
                        let on_shell = x == lo[0] || x == hi[0] || y == lo[1] || y == hi[1] || z == lo[2] || z == hi[2];
                        if !on_shell {
                            continue;
                        }
                        let key = self.key([x as usize, y as usize, z as usize]);
                        for &i in &self.items[self.starts[key] as usize..self.starts[key + 1] as usize] {
                            found.push((squared_distance(q, self.points[i as usize]), i as usize));
                        }
                    }
                }
            }
            if found.len() >= k {
                found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                found.truncate(k);
                // anything not yet visited is at least r cells away
                let bound = r as f64 * self.cell;
                if found[k - 1].0 < bound * bound {
                    return found;
                }
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found.truncate(k);
        found
    }
}

pub fn complete_texture(partial: &TextureMap, atlas: &UvAtlasMaps, k: usize) -> Result<TextureMap> {
    complete_texture_with(partial, atlas, &CompletionOptions { k, ..Default::default() })
}

/// Every atlas-valid texel missing from `partial` takes the inverse-distance
/// mean of its `k` nearest valid texels by surface position. Valid texels
/// are untouched; the result is valid exactly where the atlas is.
pub fn complete_texture_with(partial: &TextureMap, atlas: &UvAtlasMaps, options: &CompletionOptions) -> Result<TextureMap> {
    if partial.resolution() != atlas.resolution() {
        return Err(Error::shape(format!(
            "texture resolution {} differs from atlas resolution {}",
            partial.resolution(),
            atlas.resolution()
        )));
    }
    if options.k == 0 || !(options.power.is_finite() && options.power >= 0.0) {
        return Err(Error::invalid("completion needs k >= 1 and a finite nonnegative power"));
    }
    if (0..partial.texel_count()).any(|u| partial.is_valid(u) && !atlas.is_valid(u)) {
        return Err(Error::invalid("texture is valid outside the atlas"));
    }
    let sources: Vec<usize> = (0..partial.texel_count()).filter(|&u| partial.is_valid(u)).collect();
    if sources.is_empty() {
        return Err(Error::NoValidTexels);
    }
    let points: Vec<Vec3> = sources.iter().map(|&u| atlas.position(u)).collect();
    let colors: Vec<Rgb> = sources.iter().map(|&u| partial.color(u)).collect();

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for u in atlas.valid_indices() {
        let p = atlas.position(u);
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    let grid = PointGrid::new(&points, lo, hi, 2.0 * extent / atlas.resolution() as f64);

    let targets: Vec<usize> = atlas.valid_indices().filter(|&u| !partial.is_valid(u)).collect();
    let filled: Vec<Rgb> = targets
        .par_iter()
        .map(|&u| idw_blend(&grid.nearest(atlas.position(u), options.k), &colors, options.power))
        .collect();

    let mut out_colors = partial.colors().to_vec();
    for (&u, c) in targets.iter().zip(filled) {
        out_colors[u] = c;
    }
    TextureMap::new(partial.resolution(), out_colors, atlas.validity().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::bake_atlas_maps;
    use crate::procedural;

    #[test]
    fn full_input_is_unchanged() {
        let atlas = bake_atlas_maps(&procedural::cube().unwrap(), 32).unwrap();
        let tex = procedural::random_texture(32, 2, Some(atlas.validity()));
        assert_eq!(complete_texture(&tex, &atlas, 8).unwrap(), tex);
    }

    #[test]
    fn single_source_spreads_everywhere() {
        let atlas = bake_atlas_maps(&procedural::cube().unwrap(), 32).unwrap();
        let first = atlas.valid_indices().next().unwrap();
        let mut valid = vec![false; 32 * 32];
        valid[first] = true;
        let tex = TextureMap::constant(32, [0.2, 0.4, 0.6], valid).unwrap();
        let out = complete_texture(&tex, &atlas, 8).unwrap();
        for u in atlas.valid_indices() {
            assert_eq!(out.color(u), [0.2, 0.4, 0.6]);
        }
        assert_eq!(out.validity(), atlas.validity());
    }

    #[test]
    fn errors() {
        let atlas = bake_atlas_maps(&procedural::cube().unwrap(), 16).unwrap();
        assert!(matches!(
            complete_texture(&TextureMap::empty(16), &atlas, 8),
            Err(Error::NoValidTexels)
        ));
        let everywhere = TextureMap::constant(16, [0.0; 3], vec![true; 256]).unwrap();
        assert!(complete_texture(&everywhere, &atlas, 8).is_err());
        assert!(complete_texture(&TextureMap::empty(8), &atlas, 8).is_err());
    }

    #[test]
    fn coincident_neighbors_win() {
        let n = [(0.0, 1), (0.0, 2), (0.5, 0)];
        let colors = [[1.0; 3], [0.2; 3], [0.4; 3]];
        let c = idw_blend(&n, &colors, 2.0);
        assert!((c[0] - 0.3).abs() < 1e-6);
    }
}
