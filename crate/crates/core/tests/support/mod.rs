//! Brute-force oracles and seeded fixtures shared by integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use texsync_core::atlas::UvAtlasMaps;
use texsync_core::camera::{Camera, Projection};
use texsync_core::math::{self, Vec3};
use texsync_core::mesh::TriMesh;
use texsync_core::texture::TextureMap;

/// Nearest front-facing hit along the ray through each pixel center:
/// `(triangle, depth)` or `None`. Ties keep the lower triangle index.
pub fn ray_visibility(mesh: &TriMesh, camera: &Camera, cull: bool) -> Vec<Option<(u32, f64)>> {
    let (w, h) = camera.resolution();
    let [right, up, forward] = camera.basis();
    let eye = camera.eye();
    let f = camera.focal_pixels();
    let mut out = vec![None; w * h];
    for y in 0..h {
        for x in 0..w {
            let sx = (x as f64 + 0.5 - 0.5 * w as f64) / f;
            let sy = -(y as f64 + 0.5 - 0.5 * h as f64) / f;
            let (origin, dir) = if camera.is_perspective() {
                (eye, math::add(forward, math::add(math::scale(right, sx), math::scale(up, sy))))
            } else {
                (math::add(eye, math::add(math::scale(right, sx), math::scale(up, sy))), forward)
            };
            let mut best: Option<(u32, f64)> = None;
            for t in 0..mesh.triangle_count() {
                let [a, b, c] = mesh.corners(t);
                if camera.is_perspective() && [a, b, c].iter().any(|p| camera.to_camera(*p)[2] <= 1e-12) {
                    continue;
                }
                if cull {
                    let n = math::cross(math::sub(b, a), math::sub(c, a));
                    let centroid = math::scale(math::add(math::add(a, b), c), 1.0 / 3.0);
                    let to_viewer = if camera.is_perspective() { math::sub(eye, centroid) } else { math::scale(forward, -1.0) };
                    if math::dot(n, to_viewer) <= 0.0 {
                        continue;
                    }
                }
                let Some(s) = ray_triangle(origin, dir, a, b, c) else { continue };
                // dir has unit forward component, so the ray parameter is camera depth
                let depth = if camera.is_perspective() { s } else { math::dot(math::sub(math::add(origin, math::scale(dir, s)), eye), forward) };
                if !(depth > camera.near() && depth < camera.far()) {
                    continue;
                }
                if best.is_none_or(|(_, d)| depth < d) {
                    best = Some((t as u32, depth));
                }
            }
            out[y * w + x] = best;
        }
    }
    out
}

/// Moller-Trumbore with inclusive edges; returns the ray parameter.
pub fn ray_triangle(o: Vec3, d: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Option<f64> {
    let e1 = math::sub(b, a);
    let e2 = math::sub(c, a);
    let p = math::cross(d, e2);
    let det = math::dot(e1, p);
    if det.abs() < 1e-15 {
        return None;
    }
    let inv = 1.0 / det;
    let s = math::sub(o, a);
    let u = math::dot(s, p) * inv;
    if u < 0.0 {
        return None;
    }
    let q = math::cross(s, e1);
    let v = math::dot(d, q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(math::dot(e2, q) * inv)
}

/// All-pairs k-nearest inverse-distance fill, written independently of the
/// grid-accelerated implementation.
pub fn brute_force_complete(partial: &TextureMap, atlas: &UvAtlasMaps, k: usize, power: f64) -> TextureMap {
    let sources: Vec<usize> = (0..partial.texel_count()).filter(|&u| partial.is_valid(u)).collect();
    let mut colors = partial.colors().to_vec();
    for u in atlas.valid_indices() {
        if partial.is_valid(u) {
            continue;
        }
        let q = atlas.position(u);
        let mut all: Vec<(f64, usize)> = sources
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let p = atlas.position(s);
                let d = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2], i)
            })
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        all.truncate(k);
        let zero = all.iter().filter(|n| n.0 == 0.0).count();
        let used = if zero > 0 { &all[..zero] } else { &all[..] };
        let mut acc = [0.0f64; 3];
        let mut wsum = 0.0;
        let mut lo = [f32::MAX; 3];
        let mut hi = [f32::MIN; 3];
        for &(d2, i) in used {
            let w = if zero > 0 { 1.0 } else { 1.0 / d2.powf(power / 2.0) };
            let c = partial.color(sources[i]);
            for ch in 0..3 {
                acc[ch] += w * c[ch] as f64;
                lo[ch] = lo[ch].min(c[ch]);
                hi[ch] = hi[ch].max(c[ch]);
            }
            wsum += w;
        }
        colors[u] = [0, 1, 2].map(|ch| ((acc[ch] / wsum) as f32).clamp(lo[ch], hi[ch]));
    }
    TextureMap::new(partial.resolution(), colors, atlas.validity().to_vec()).unwrap()
}

/// Up to `n` random triangles in [-1, 1]^3 with random UVs.
pub fn random_soup(seed: u64, n: usize) -> TriMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::new();
    let mut triangles = Vec::new();
    let mut uvs = Vec::new();
    for t in 0..n {
        let center: Vec3 = [0; 3].map(|_: u8| rng.random_range(-0.8..0.8));
        for _ in 0..3 {
            positions.push([0, 1, 2].map(|a| center[a] + rng.random_range(-0.5..0.5)));
        }
        triangles.push([3 * t as u32, 3 * t as u32 + 1, 3 * t as u32 + 2]);
        uvs.push([0; 3].map(|_: u8| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]));
    }
    TriMesh::new(positions, triangles, uvs, None).unwrap()
}

/// Camera at a random direction and distance looking at the origin.
pub fn random_camera(seed: u64, res: usize, orthographic: bool) -> Camera {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00ca_3e7a);
    let dir = loop {
        let d: Vec3 = [0; 3].map(|_: u8| rng.random_range(-1.0..1.0));
        if let Some(n) = math::normalize(d) {
            if n[1].abs() < 0.95 {
                break n;
            }
        }
    };
    let dist = rng.random_range(3.0..5.0);
    let projection = if orthographic {
        Projection::Orthographic { half_height: 1.8 }
    } else {
        Projection::Perspective {
            fov_y_deg: rng.random_range(35.0..60.0),
        }
    };
    Camera::look_at(math::scale(dir, dist), [0.0; 3], [0.0, 1.0, 0.0], projection, res, res, 0.01, 100.0).unwrap()
}

