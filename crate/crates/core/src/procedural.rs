//! Procedural meshes with ready-made UV atlases, and simple test textures.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::atlas::UvAtlasMaps;
use crate::error::Result;
use crate::math::{self, Vec2, Vec3};
use crate::mesh::TriMesh;
use crate::texture::{texel_center, Rgb, TextureMap};

/// Square in the z = 0 plane spanning [-1, 1]^2, facing +Z, UVs over the
/// whole unit square.
pub fn quad() -> Result<TriMesh> {
    TriMesh::new(
        vec![[-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [1.0, 1.0, 0.0], [-1.0, 1.0, 0.0]],
        vec![[0, 1, 2], [0, 2, 3]],
        vec![
            [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]],
            [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        ],
        None,
    )
}

/// Axis-aligned cube [-1, 1]^3, one UV chart per face laid out in a 3x2 grid
/// with a small inset so charts never touch.
pub fn cube() -> Result<TriMesh> {
    let positions: Vec<Vec3> = (0..8)
        .map(|i| {
            [
                if i & 1 != 0 { 1.0 } else { -1.0 },
                if i & 2 != 0 { 1.0 } else { -1.0 },
                if i & 4 != 0 { 1.0 } else { -1.0 },
            ]
        })
        .collect();
    let index = |p: Vec3| -> u32 {
        (p[0] > 0.0) as u32 | ((p[1] > 0.0) as u32) << 1 | ((p[2] > 0.0) as u32) << 2
    };
    // (normal, s, t) with s x t = normal
    let faces: [(Vec3, Vec3, Vec3); 6] = [
        ([1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]),
        ([-1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]),
        ([0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]),
        ([0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
        ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
        ([0.0, 0.0, -1.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
    ];
    let inset = 1.0 / 64.0;
    let mut triangles = Vec::new();
    let mut uvs = Vec::new();
    for (f, (n, s, t)) in faces.iter().enumerate() {
        let corner = |a: f64, b: f64| math::add(*n, math::add(math::scale(*s, a), math::scale(*t, b)));
        let quad = [corner(-1.0, -1.0), corner(1.0, -1.0), corner(1.0, 1.0), corner(-1.0, 1.0)].map(index);
        let (col, row) = ((f % 3) as f64, (f / 3) as f64);
        let (u0, u1) = (col / 3.0 + inset, (col + 1.0) / 3.0 - inset);
        let (v0, v1) = (row / 2.0 + inset, (row + 1.0) / 2.0 - inset);
        let quv: [Vec2; 4] = [[u0, v0], [u1, v0], [u1, v1], [u0, v1]];
        triangles.push([quad[0], quad[1], quad[2]]);
        uvs.push([quv[0], quv[1], quv[2]]);
        triangles.push([quad[0], quad[2], quad[3]]);
        uvs.push([quv[0], quv[2], quv[3]]);
    }
    TriMesh::new(positions, triangles, uvs, None)
}

/// Unit icosphere with `20 * 4^subdivisions` faces (2 gives 320). Every
/// triangle gets its own chart in a square grid of UV cells.
pub fn icosphere(subdivisions: u32) -> Result<TriMesh> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut positions: Vec<Vec3> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .into_iter()
    .map(|p| math::normalize(p).unwrap())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, positions: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let p = math::scale(math::add(positions[a as usize], positions[b as usize]), 0.5);
                positions.push(math::normalize(p).unwrap());
                (positions.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut positions);
            let bc = midpoint(b, c, &mut positions);
            let ca = midpoint(c, a, &mut positions);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    // outward winding
    for f in &mut faces {
        let [a, b, c] = f.map(|i| positions[i as usize]);
        let n = math::cross(math::sub(b, a), math::sub(c, a));
        if math::dot(n, math::add(math::add(a, b), c)) < 0.0 {
            f.swap(1, 2);
        }
    }
    let uvs = cell_charts(faces.len());
    TriMesh::new(positions, faces, uvs, None)
}

/// One near-equilateral UV triangle per face, each in its own grid cell.
pub fn cell_charts(count: usize) -> Vec<[Vec2; 3]> {
    let n = (count as f64).sqrt().ceil().max(1.0) as usize;
    let cell = 1.0 / n as f64;
    let m = 0.08 * cell;
    (0..count)
        .map(|i| {
            let (x0, y0) = ((i % n) as f64 * cell, (i / n) as f64 * cell);
            [
                [x0 + m, y0 + m],
                [x0 + cell - m, y0 + m],
                [x0 + 0.5 * cell, y0 + cell - m],
            ]
        })
        .collect()
}

/// Valid wherever `validity` says, checkerboard of `cells` squares per side.
pub fn checkerboard(res: usize, cells: usize, a: Rgb, b: Rgb, validity: Option<&[bool]>) -> TextureMap {
    let colors = (0..res * res)
        .map(|i| {
            let (x, y) = (i % res, i / res);
            if ((x * cells / res) + (y * cells / res)).is_multiple_of(2) {
                a
            } else {
                b
            }
        })
        .collect();
    let valid = validity.map(<[bool]>::to_vec).unwrap_or_else(|| vec![true; res * res]);
    TextureMap::new(res, colors, valid).expect("consistent shape")
}

/// Uniformly random 8-bit-quantized colors.
pub fn random_texture(res: usize, seed: u64, validity: Option<&[bool]>) -> TextureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let colors = (0..res * res)
        .map(|_| [0; 3].map(|_: u8| rng.random::<u8>() as f32 / 255.0))
        .collect();
    let valid = validity.map(<[bool]>::to_vec).unwrap_or_else(|| vec![true; res * res]);
    TextureMap::new(res, colors, valid).expect("consistent shape")
}

/// Smooth color field over UV space: easy on the eye for inspection output.
pub fn uv_gradient(res: usize, validity: Option<&[bool]>) -> TextureMap {
    let colors = (0..res * res)
        .map(|i| {
            let uv = texel_center(i % res, i / res, res);
            [uv[0] as f32, uv[1] as f32, (0.5 + 0.5 * (6.0 * uv[0] * uv[1]).sin()) as f32]
        })
        .collect();
    let valid = validity.map(<[bool]>::to_vec).unwrap_or_else(|| vec![true; res * res]);
    TextureMap::new(res, colors, valid).expect("consistent shape")
}

/// Smooth color field of surface position, in [0.05, 0.95]. `phase`
/// shifts the pattern.
pub fn surface_field(atlas: &UvAtlasMaps, phase: f64) -> TextureMap {
    let colors = (0..atlas.texel_count())
        .map(|u| {
            if !atlas.is_valid(u) {
                return [0.0; 3];
            }
            let p = atlas.position(u);
            [
                0.5 + 0.25 * (2.0 * p[0] + phase).sin(),
                0.5 + 0.25 * (1.5 * p[1] - phase).cos(),
                0.5 + 0.2 * (p[2] + p[0] + 0.5 * phase).sin(),
            ]
            .map(|c| c as f32)
        })
        .collect();
    TextureMap::new(atlas.resolution(), colors, atlas.validity().to_vec()).expect("consistent shape")
}
