mod support;

use texsync_core::atlas::bake_atlas_maps;
use texsync_core::camera::{make_surround_rig, RigSpec};
use texsync_core::mesh::TriMesh;
use texsync_core::procedural;
use texsync_core::raster::{rasterize, RigGeometry, Sampling};
use texsync_core::reproject::{reproject, RigProjector, ReprojectOptions};

fn meshes() -> Vec<TriMesh> {
    vec![
        procedural::quad().unwrap(),
        procedural::cube().unwrap(),
        procedural::icosphere(2).unwrap(),
    ]
}

#[test]
fn twenty_seeded_triples_round_trip_exactly() {
    let meshes = meshes();
    let mut covered_total = 0;
    for seed in 0..20u64 {
        let mesh = &meshes[seed as usize % 3];
        let atlas = bake_atlas_maps(mesh, 64).unwrap();
        let texture = procedural::random_texture(64, seed, Some(atlas.validity()));
        let camera = support::random_camera(seed, 96, seed % 4 == 3);
        let render = rasterize(mesh, &camera, Some(&texture), Sampling::Nearest).unwrap();
        let partial = reproject(render.color.as_ref().unwrap(), &camera, mesh, &atlas, &ReprojectOptions::default()).unwrap();
        for u in 0..partial.covered.len() {
            if partial.covered[u] {
                assert!(atlas.is_valid(u));
                let (a, b) = (partial.colors[u], texture.color(u));
                assert_eq!(a.map(f32::to_bits), b.map(f32::to_bits), "seed {seed} texel {u}");
            }
        }
        covered_total += partial.covered_count();
    }
    assert!(covered_total > 2000, "too few covered texels: {covered_total}");
}

#[test]
fn every_covered_texel_has_a_sampling_pixel() {
    let mesh = procedural::icosphere(2).unwrap();
    let atlas = bake_atlas_maps(&mesh, 64).unwrap();
    let rig = make_surround_rig(&RigSpec { resolution: 96, ..Default::default() }).unwrap();
    let projector = RigProjector::new(&mesh, &rig, &atlas, &ReprojectOptions::default()).unwrap();
    let geometry = RigGeometry::new(&mesh, &rig);
    for (v, view) in projector.views().iter().enumerate() {
        for u in 0..atlas.texel_count() {
            if let Some(p) = view.source_pixel(u) {
                let uv = geometry.view(v).uv[p];
                assert_eq!(texsync_core::texture::texel_index_of(uv, 64), u);
            }
        }
    }
}

#[test]
fn surround_rig_covers_most_of_a_sphere() {
    let mesh = procedural::icosphere(2).unwrap();
    let atlas = bake_atlas_maps(&mesh, 128).unwrap();
    let rig = make_surround_rig(&RigSpec { resolution: 128, elevation_deg: 15.0, ..Default::default() }).unwrap();
    let projector = RigProjector::new(&mesh, &rig, &atlas, &ReprojectOptions::default()).unwrap();
    let texture = procedural::uv_gradient(128, Some(atlas.validity()));
    let grid = projector.geometry().render_grid(&texture).unwrap();
    let partials = projector.reproject(&grid).unwrap();
    let union = (0..atlas.texel_count()).filter(|&u| partials.iter().any(|p| p.covered[u])).count();
    assert!(union as f64 > 0.5 * atlas.valid_count() as f64, "{union} of {}", atlas.valid_count());
}
