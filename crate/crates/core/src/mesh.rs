//! Indexed triangle meshes with per-corner UVs, Wavefront OBJ I/O and
//! bounding-box normalization.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::{self, Vec2, Vec3};

/// Validated triangle mesh.
///
/// UVs are stored per triangle corner so seams need no vertex splitting.
/// Normals are per vertex and always unit length; when the source carries
/// none they are area-weighted face normal averages.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    positions: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    uvs: Vec<[Vec2; 3]>,
    normals: Vec<Vec3>,
    dropped_degenerate: usize,
}

impl TriMesh {
    /// Validates and builds a mesh.
    ///
    /// Triangles that have zero area both in 3D and in UV space are dropped
    /// and counted in [`TriMesh::dropped_degenerate`].
    pub fn new(
        positions: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        uvs: Vec<[Vec2; 3]>,
        normals: Option<Vec<Vec3>>,
    ) -> Result<Self> {
        if triangles.len() != uvs.len() {
            return Err(Error::InvalidMesh(format!(
                "{} triangles but {} UV triples",
                triangles.len(),
                uvs.len()
            )));
        }
        if let Some(p) = positions.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidMesh(format!("position {p} is not finite")));
        }
        let n = positions.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i as usize >= n) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references vertex {bad} but only {n} exist"
                )));
            }
        }
        for (t, corner) in uvs.iter().enumerate() {
            for uv in corner {
                if !(0.0..=1.0).contains(&uv[0]) || !(0.0..=1.0).contains(&uv[1]) {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {t} has UV ({}, {}) outside [0,1]^2",
                        uv[0], uv[1]
                    )));
                }
            }
        }

        let mut kept_tris = Vec::with_capacity(triangles.len());
        let mut kept_uvs = Vec::with_capacity(uvs.len());
        let mut dropped = 0;
        for (tri, uv) in triangles.into_iter().zip(uvs) {
            let [a, b, c] = tri.map(|i| positions[i as usize]);
            let area3 = math::triangle_area(a, b, c);
            let area2 = math::edge(uv[0], uv[1], uv[2]).abs();
            if area3 == 0.0 && area2 == 0.0 {
                dropped += 1;
                continue;
            }
            kept_tris.push(tri);
            kept_uvs.push(uv);
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate triangles");
        }

        let normals = match normals {
            Some(ns) => {
                if ns.len() != n {
                    return Err(Error::InvalidMesh(format!(
                        "{} normals for {n} vertices",
                        ns.len()
                    )));
                }
                let mut out = Vec::with_capacity(n);
                for (i, v) in ns.into_iter().enumerate() {
                    out.push(math::normalize(v).ok_or_else(|| {
                        Error::InvalidMesh(format!("normal {i} has zero length"))
                    })?);
                }
                out
            }
            None => area_weighted_normals(&positions, &kept_tris),
        };

        Ok(Self {
            positions,
            triangles: kept_tris,
            uvs: kept_uvs,
            normals,
            dropped_degenerate: dropped,
        })
    }

    pub fn empty() -> Self {
        Self {
            positions: Vec::new(),
            triangles: Vec::new(),
            uvs: Vec::new(),
            normals: Vec::new(),
            dropped_degenerate: 0,
        }
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn uvs(&self) -> &[[Vec2; 3]] {
        &self.uvs
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn dropped_degenerate(&self) -> usize {
        self.dropped_degenerate
    }

    #[inline]
    pub fn corners(&self, tri: usize) -> [Vec3; 3] {
        self.triangles[tri].map(|i| self.positions[i as usize])
    }

    #[inline]
    pub fn corner_normals(&self, tri: usize) -> [Vec3; 3] {
        self.triangles[tri].map(|i| self.normals[i as usize])
    }

    /// Geometric normal from the winding order (counter-clockwise is front).
    #[inline]
    pub fn face_normal(&self, tri: usize) -> Vec3 {
        let [a, b, c] = self.corners(tri);
        math::normalize(math::cross(math::sub(b, a), math::sub(c, a))).unwrap_or([0.0, 0.0, 0.0])
    }

    /// Axis-aligned bounds over referenced and unreferenced vertices alike.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.positions.first()?;
        Some(self.positions.iter().fold((first, first), |(lo, hi), p| {
            (
                [lo[0].min(p[0]), lo[1].min(p[1]), lo[2].min(p[2])],
                [hi[0].max(p[0]), hi[1].max(p[1]), hi[2].max(p[2])],
            )
        }))
    }

    /// Largest distance of any vertex from the origin.
    pub fn radius(&self) -> f64 {
        self.positions.iter().map(|&p| math::norm(p)).fold(0.0, f64::max)
    }

    pub fn with_positions(&self, positions: Vec<Vec3>) -> Result<Self> {
        if positions.len() != self.positions.len() {
            return Err(Error::InvalidMesh("vertex count changed".into()));
        }
        Ok(Self {
            normals: area_weighted_normals(&positions, &self.triangles),
            positions,
            ..self.clone()
        })
    }
}

fn area_weighted_normals(positions: &[Vec3], triangles: &[[u32; 3]]) -> Vec<Vec3> {
    let mut acc = vec![[0.0; 3]; positions.len()];
    for tri in triangles {
        let [a, b, c] = tri.map(|i| positions[i as usize]);
        // cross product length is twice the area: area weighting for free
        let n = math::cross(math::sub(b, a), math::sub(c, a));
        for &i in tri {
            acc[i as usize] = math::add(acc[i as usize], n);
        }
    }
    acc.into_iter()
        .map(|n| math::normalize(n).unwrap_or([0.0, 0.0, 1.0]))
        .collect()
}

/// Centers the bounding box at the origin and scales the largest half extent
/// to one. UVs are untouched.
pub fn normalize_mesh(mesh: &TriMesh) -> Result<TriMesh> {
    let (lo, hi) = mesh
        .bounds()
        .ok_or_else(|| Error::InvalidMesh("cannot normalize an empty mesh".into()))?;
    let center = math::scale(math::add(lo, hi), 0.5);
    let half = (0..3).map(|k| 0.5 * (hi[k] - lo[k])).fold(0.0, f64::max);
    if half <= 0.0 || !half.is_finite() {
        return Err(Error::InvalidMesh("mesh has zero extent".into()));
    }
    let s = 1.0 / half;
    let positions = mesh
        .positions
        .iter()
        .map(|&p| math::scale(math::sub(p, center), s))
        .collect();
    Ok(TriMesh {
        positions,
        ..mesh.clone()
    })
}

/// Reads a Wavefront OBJ file.
///
/// Polygons are fan-triangulated. Every face corner must carry a `vt`
/// reference. `vn` records are averaged per position index.
pub fn load_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

pub fn parse_obj(text: &str, path: &Path) -> Result<TriMesh> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut positions: Vec<Vec3> = Vec::new();
    let mut texcoords: Vec<Vec2> = Vec::new();
    let mut obj_normals: Vec<Vec3> = Vec::new();
    let mut triangles = Vec::new();
    let mut uvs = Vec::new();
    let mut vertex_normal_acc: Vec<(Vec3, bool)> = Vec::new();
    let mut any_face_without_uv = false;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut parts = line.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        let nums = |parts: std::str::SplitWhitespace<'_>, want: usize| -> Result<Vec<f64>> {
            let vals: Vec<f64> = parts
                .take(want)
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(lineno, format!("bad number in `{tag}` record: {e}")))?;
            if vals.len() < want {
                return Err(err(lineno, format!("`{tag}` record needs {want} values")));
            }
            Ok(vals)
        };
        match tag {
            "v" => {
                let v = nums(parts, 3)?;
                positions.push([v[0], v[1], v[2]]);
            }
            "vt" => {
                let v = nums(parts, 2)?;
                texcoords.push([v[0], v[1]]);
            }
            "vn" => {
                let v = nums(parts, 3)?;
                obj_normals.push([v[0], v[1], v[2]]);
            }
            "f" => {
                let mut corners = Vec::new();
                for item in parts {
                    let mut fields = item.split('/');
                    let resolve = |s: Option<&str>, len: usize, what: &str| -> Result<Option<usize>> {
                        match s {
                            None | Some("") => Ok(None),
                            Some(s) => {
                                let i: i64 = s.parse().map_err(|_| {
                                    err(lineno, format!("bad {what} index `{s}`"))
                                })?;
                                let idx = if i > 0 {
                                    i - 1
                                } else if i < 0 {
                                    len as i64 + i
                                } else {
                                    return Err(err(
                                        lineno,
                                        format!("{what} index 0 is invalid (OBJ indices are 1-based)"),
                                    ));
                                };
                                if idx < 0 || idx as usize >= len {
                                    return Err(err(
                                        lineno,
                                        format!("{what} index {i} out of range ({len} defined)"),
                                    ));
                                }
                                Ok(Some(idx as usize))
                            }
                        }
                    };
                    let v = resolve(fields.next(), positions.len(), "vertex")?
                        .ok_or_else(|| err(lineno, "face corner without vertex index".into()))?;
                    let vt = resolve(fields.next(), texcoords.len(), "texture")?;
                    let vn = resolve(fields.next(), obj_normals.len(), "normal")?;
                    corners.push((v, vt, vn));
                }
                if corners.len() < 3 {
                    return Err(err(lineno, "face needs at least 3 vertices".into()));
                }
                if corners.iter().any(|c| c.1.is_none()) {
                    any_face_without_uv = true;
                    continue;
                }
                if vertex_normal_acc.len() < positions.len() {
                    vertex_normal_acc.resize(positions.len(), ([0.0; 3], false));
                }
                for &(v, _, vn) in &corners {
                    if let Some(n) = vn {
                        let slot = &mut vertex_normal_acc[v];
                        slot.0 = math::add(slot.0, obj_normals[n]);
                        slot.1 = true;
                    }
                }
                for k in 1..corners.len() - 1 {
                    let tri = [corners[0], corners[k], corners[k + 1]];
                    triangles.push(tri.map(|c| c.0 as u32));
                    uvs.push(tri.map(|c| texcoords[c.1.unwrap()]));
                }
            }
            _ => {}
        }
    }

    if any_face_without_uv || (triangles.is_empty() && texcoords.is_empty()) {
        return Err(Error::MissingUv);
    }
    vertex_normal_acc.resize(positions.len(), ([0.0; 3], false));
    let normals = if !obj_normals.is_empty() && vertex_normal_acc.iter().all(|n| n.1) {
        let ns: Option<Vec<Vec3>> = vertex_normal_acc
            .iter()
            .map(|(n, _)| math::normalize(*n))
            .collect();
        ns
    } else {
        None
    };
    TriMesh::new(positions, triangles, uvs, normals)
}

/// Serializes a mesh as OBJ with one `vt` per triangle corner.
pub fn to_obj_string(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for p in &mesh.positions {
        let _ = writeln!(s, "v {:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    for n in &mesh.normals {
        let _ = writeln!(s, "vn {:?} {:?} {:?}", n[0], n[1], n[2]);
    }
    for corner in &mesh.uvs {
        for uv in corner {
            let _ = writeln!(s, "vt {:?} {:?}", uv[0], uv[1]);
        }
    }
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let _ = write!(s, "f");
        for (k, &v) in tri.iter().enumerate() {
            let _ = write!(s, " {}/{}/{}", v + 1, 3 * t + k + 1, v + 1);
        }
        s.push('\n');
    }
    s
}

pub fn write_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_obj_string(mesh)).map_err(|e| Error::io(path, e))
}
