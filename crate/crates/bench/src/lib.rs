//! Shared fixtures for the criterion benches.

use texsync_core::camera::{make_surround_rig, RigSpec};
use texsync_core::flow::Scene;
use texsync_core::procedural;
use texsync_core::reproject::ReprojectOptions;
use texsync_core::texture::TextureMap;

/// 320-face icosphere seen by the default four-view rig.
pub fn sphere_scene(view_resolution: usize, atlas_resolution: usize) -> Scene {
    let rig = make_surround_rig(&RigSpec {
        resolution: view_resolution,
        elevation_deg: 15.0,
        ..Default::default()
    })
    .expect("valid rig");
    Scene::new(procedural::icosphere(2).expect("icosphere"), rig, atlas_resolution, &ReprojectOptions::default())
        .expect("valid scene")
}

pub fn field(scene: &Scene) -> TextureMap {
    procedural::surface_field(scene.atlas(), 0.4)
}

/// Keeps every `stride`-th valid texel of `texture`.
pub fn sparse(texture: &TextureMap, stride: usize) -> TextureMap {
    let valid = (0..texture.texel_count())
        .map(|u| texture.is_valid(u) && u % stride == 0)
        .collect();
    TextureMap::new(texture.resolution(), texture.colors().to_vec(), valid).expect("same shape")
}
