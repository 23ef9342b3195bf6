//! Acceptance criteria 1-11, one PASS/FAIL line each.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use texsync_cli::config::PipelineConfig;
use texsync_core::atlas::{bake_atlas_maps, UvAtlasMaps};
use texsync_core::camera::{make_surround_rig, RigSpec};
use texsync_core::embed::{aggregate, embed_image, embed_text, grayscale_negative, ConditionBundle, Embedding};
use texsync_core::flow::{
    cfg_velocity, sample, sample_with_observer, Branch, EmbeddingFieldVelocity, IdentityCodec, Latent, ModelInput,
    NoisyOracleVelocity, OracleVelocity, SamplerConfig, Scene, SyncConfig, VelocityModel,
};
use texsync_core::fusion::{
    cosine_weights, edge_corrupted_corpus, fit_weighter, fuse, weighter_score, Denoiser, IdentityFeature, LossWeights,
    WeighterObjective, WeighterParams, Weighting,
};
use texsync_core::image::Image;
use texsync_core::mesh::TriMesh;
use texsync_core::procedural;
use texsync_core::raster::{rasterize, rasterize_geometry, Sampling};
use texsync_core::reproject::{cross_view_disagreement, reproject, ReprojectOptions};
use texsync_core::texture::TextureMap;
use texsync_core::uvtools::complete_texture;

type Outcome = (bool, String);
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn scene(mesh: TriMesh, view_res: usize, atlas_res: usize, elevation: f64) -> Scene {
    let rig = make_surround_rig(&RigSpec {
        resolution: view_res,
        elevation_deg: elevation,
        ..Default::default()
    })
    .unwrap();
    Scene::new(mesh, rig, atlas_res, &ReprojectOptions::default()).unwrap()
}

fn empty_condition() -> ConditionBundle {
    aggregate(&embed_text(""), &[]).unwrap()
}

fn c1_round_trip() -> Outcome {
    let meshes = [
        procedural::quad().unwrap(),
        procedural::cube().unwrap(),
        procedural::icosphere(2).unwrap(),
    ];
    let (mut covered, mut bad) = (0, 0);
    for seed in 0..20u64 {
        let mesh = &meshes[seed as usize % 3];
        let atlas = bake_atlas_maps(mesh, 64).unwrap();
        let texture = procedural::random_texture(64, seed, Some(atlas.validity()));
        let camera = support::random_camera(seed, 96, seed % 4 == 3);
        let render = rasterize(mesh, &camera, Some(&texture), Sampling::Nearest).unwrap();
        let partial =
            reproject(render.color.as_ref().unwrap(), &camera, mesh, &atlas, &ReprojectOptions::default()).unwrap();
        for u in (0..partial.covered.len()).filter(|&u| partial.covered[u]) {
            covered += 1;
            if partial.colors[u].map(f32::to_bits) != texture.color(u).map(f32::to_bits) {
                bad += 1;
            }
        }
    }
    (bad == 0 && covered > 0, format!("{bad} mismatches over {covered} covered texels in 20 triples"))
}

fn c2_raster_oracle() -> Outcome {
    let mut meshes: Vec<TriMesh> = (0..16u64).map(|s| support::random_soup(s, 1 + (s as usize * 13) % 50)).collect();
    meshes.push(procedural::quad().unwrap());
    meshes.push(procedural::cube().unwrap());
    meshes.push(procedural::icosphere(0).unwrap());
    let (mut pixels, mut bad) = (0, 0);
    for (i, mesh) in meshes.iter().enumerate() {
        assert!(mesh.triangle_count() <= 50);
        for ortho in [false, true] {
            let camera = support::random_camera(1000 + i as u64, 48, ortho);
            let got = rasterize_geometry(mesh, &camera, true);
            let want = support::ray_visibility(mesh, &camera, true);
            for (p, w) in want.iter().enumerate() {
                pixels += 1;
                let ok = match w {
                    None => !got.coverage[p],
                    Some((t, d)) => got.triangle[p] == *t && (got.depth[p] - d).abs() <= 1e-9 * d.max(1.0),
                };
                bad += usize::from(!ok);
            }
        }
    }
    (bad == 0, format!("{bad} mismatches over {pixels} pixels on {} meshes", meshes.len()))
}

fn c3_flow_exactness(scene: &Scene) -> Outcome {
    let texture = procedural::random_texture(64, 3, Some(scene.atlas().validity()));
    let target = Latent::from_grid(&scene.render_grid(&texture).unwrap());
    let model = OracleVelocity::new(target.clone());
    let mut worst: f64 = 0.0;
    for steps in [1, 7, 30] {
        let config = SamplerConfig { steps, seed: 11, ..Default::default() };
        let out = sample(&model, &empty_condition(), scene, &IdentityCodec, &config, &SyncConfig::disabled()).unwrap();
        worst = worst.max(Latent::from_grid(&out.grid).max_abs_diff(&target));
    }
    (worst < 1e-5, format!("max abs error {worst:.3e} over steps 1, 7, 30"))
}

fn c4_sync_fixed_point(scene: &Scene) -> Outcome {
    let texture = procedural::random_texture(64, 4, Some(scene.atlas().validity()));
    let model = OracleVelocity::new(Latent::from_grid(&scene.render_grid(&texture).unwrap()));
    let config = SamplerConfig { steps: 30, seed: 5, ..Default::default() };
    let mut worst: f64 = 0.0;
    let mut visible = vec![false; scene.atlas().texel_count()];
    let mut observe = |rec: &texsync_core::flow::StepRecord| {
        let s = rec.sync.expect("sync runs every step");
        let pixels = rec.x0.view_len() / rec.x0.channels();
        for v in 0..rec.x0.views() {
            let (a, b) = (rec.x0.view(v), s.x0.view(v));
            for p in (0..pixels).filter(|&p| s.foreground[v][p]) {
                for c in 0..rec.x0.channels() {
                    let i = p * rec.x0.channels() + c;
                    worst = worst.max((a[i] - b[i]).abs());
                }
            }
        }
        for p in &s.partials {
            for (u, &c) in p.covered.iter().enumerate() {
                visible[u] |= c;
            }
        }
    };
    let out = sample_with_observer(
        &model,
        &empty_condition(),
        scene,
        &IdentityCodec,
        &config,
        &SyncConfig::default(),
        &mut observe,
    )
    .unwrap();
    let mut tex_err: f32 = 0.0;
    let mut count = 0;
    for u in (0..visible.len()).filter(|&u| visible[u]) {
        count += 1;
        if !out.fused.is_valid(u) {
            tex_err = f32::INFINITY;
            continue;
        }
        let (a, b) = (out.fused.color(u), texture.color(u));
        tex_err = tex_err.max((0..3).map(|k| (a[k] - b[k]).abs()).fold(0.0, f32::max));
    }
    (
        worst <= 1e-5 && tex_err == 0.0 && count > 0,
        format!("max foreground change {worst:.3e}; fused texture max error {tex_err:.3e} on {count} visible texels"),
    )
}

fn final_disagreement(scene: &Scene, model: &dyn VelocityModel, sync: &SyncConfig) -> f64 {
    let config = SamplerConfig { steps: 30, seed: 9, ..Default::default() };
    let out = sample(model, &empty_condition(), scene, &IdentityCodec, &config, sync).unwrap();
    cross_view_disagreement(&scene.projector().reproject(&out.grid).unwrap())
}

fn c5_sync_efficacy(scene: &Scene) -> Outcome {
    let (mut on, mut off) = (0.0, 0.0);
    for seed in 0..16u64 {
        let texture = procedural::surface_field(scene.atlas(), seed as f64);
        let target = Latent::from_grid(&scene.render_grid(&texture).unwrap());
        let model = NoisyOracleVelocity::new(target, 0.1, 0.05, seed).unwrap();
        on += final_disagreement(scene, &model, &SyncConfig::default()) / 16.0;
        off += final_disagreement(scene, &model, &SyncConfig::disabled()) / 16.0;
    }
    (on < 0.25 * off, format!("mean disagreement sync on {on:.3e}, off {off:.3e} (ratio {:.3})", on / off))
}

fn c6_weighting_identities(scene: &Scene) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut partition: f64 = 0.0;
    for seed in 0..4u64 {
        let texture = procedural::surface_field(scene.atlas(), seed as f64);
        let grid = scene.render_grid(&texture).unwrap();
        let partials = scene.projector().reproject(&grid).unwrap();
        for beta in [0.0, 0.5, 1.0, 3.0, 8.0] {
            let cos = cosine_weights(&partials, beta).unwrap();
            for t in [0.0, 0.3, 1.0] {
                let params = WeighterParams { beta, lambda_edge: 0.0, lambda_t: 0.0, temperature: 1.0 };
                let adaptive = weighter_score(&partials, scene.atlas(), t, &params).unwrap();
                for v in 0..partials.len() {
                    for (a, b) in adaptive.view(v).iter().zip(cos.view(v)) {
                        worst = worst.max((a - b).abs());
                    }
                }
                partition = partition.max(adaptive.partition_error(&partials));
                fuse(&partials, &adaptive).unwrap();
            }
            partition = partition.max(cos.partition_error(&partials));
        }
        let params = WeighterParams { beta: 2.0, lambda_edge: 3.0, lambda_t: -1.0, temperature: 0.5 };
        let w = Weighting::Adaptive(params).compute(&partials, scene.atlas(), 0.4).unwrap();
        partition = partition.max(w.partition_error(&partials));
    }
    (
        worst <= 1e-6 && partition <= 1e-9,
        format!("max |adaptive - cosine| {worst:.3e}; max partition-of-unity error {partition:.3e}"),
    )
}

fn c7_weighter_fit() -> Outcome {
    let scene = scene(procedural::icosphere(2).unwrap(), 128, 64, 15.0);
    let denoiser = Denoiser::default();
    let train = edge_corrupted_corpus(&scene, &(0..6).collect::<Vec<_>>(), 1.0, &denoiser).unwrap();
    let held = edge_corrupted_corpus(&scene, &(100..106).collect::<Vec<_>>(), 1.0, &denoiser).unwrap();
    let weights = LossWeights::default();
    let default_weights = (weights.lambda_pec, weights.lambda_cyc, weights.lambda_sm) == (1.0, 0.5, 0.2);
    let feature = IdentityFeature;
    let objective = WeighterObjective::new(scene.geometry(), scene.atlas(), &train, weights, &feature).unwrap();
    let held_out = WeighterObjective::new(scene.geometry(), scene.atlas(), &held, weights, &feature).unwrap();
    let baseline = WeighterParams { beta: 1.0, lambda_edge: 0.0, lambda_t: 0.0, temperature: 1.0 };
    let fit = fit_weighter(&objective, baseline, 200).unwrap();
    let base = held_out.evaluate(&baseline).unwrap();
    let tuned = held_out.evaluate(&fit.params).unwrap();
    let reduction = 1.0 - tuned / base;
    (
        reduction >= 0.2 && default_weights && fit.trace.len() <= 200,
        format!(
            "held-out loss {base:.5} -> {tuned:.5} ({:.1}% lower, {} evaluations); loss weights {}/{}/{}",
            100.0 * reduction,
            fit.trace.len(),
            weights.lambda_pec,
            weights.lambda_cyc,
            weights.lambda_sm
        ),
    )
}

fn c8_embedding_contract(scene: &Scene) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let img = |rng: &mut ChaCha8Rng| {
        let data = (0..32 * 32 * 3).map(|_| rng.random::<f32>()).collect();
        embed_image(&Image::from_vec(32, 32, 3, data).unwrap()).unwrap()
    };
    let (e1, e2) = (img(&mut rng), img(&mut rng));
    let text = embed_text("a wooden chair");
    let (a, b) = (0.7, -1.3);
    let slot = |items: &[(f64, Embedding)]| aggregate(&text, items).unwrap().image_slot.values;
    let both = slot(&[(a, e1.clone()), (b, e2.clone())]);
    let sum: Vec<f64> = slot(&[(a, e1.clone())]).iter().zip(slot(&[(b, e2.clone())])).map(|(x, y)| x + y).collect();
    let linear = both == sum;
    let homogeneous = [0.25, 2.0, 8.0, -0.5].iter().all(|&l| {
        let scaled = slot(&[(l * a, e1.clone()), (l * b, e2.clone())]);
        scaled == both.iter().map(|v| l * v).collect::<Vec<_>>()
    });

    let zero = aggregate(&text, &[(0.0, e1.clone()), (0.0, e2.clone())]).unwrap();
    let text_only = aggregate(&text, &[]).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let mut text_exact = bits(&zero.positive_vector()) == bits(&text_only.positive_vector());
    let model = EmbeddingFieldVelocity::new(scene.geometry(), scene.atlas(), 1).unwrap();
    let x = Latent::gaussian_like(&Latent::from_grid(&scene.blank_grid()), 2);
    let v = |c: &ConditionBundle| {
        model
            .velocity(&ModelInput {
                x: &x,
                t: 0.6,
                condition: c,
                branch: Branch::Positive,
                distilled_scale: 6.0,
                depth: scene.depth(),
            })
            .unwrap()
    };
    text_exact &= bits(v(&zero).data()) == bits(v(&text_only).data());

    let mut chroma_zero = true;
    for color in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.8, 0.3, 0.1], [1.0, 1.0, 1.0]] {
        let pure = Image::from_fn(16, 16, 3, |_, _, c| color[c]);
        chroma_zero &= grayscale_negative(&pure).unwrap().chroma().iter().all(|&c| c == 0.0);
    }
    (
        linear && homogeneous && text_exact && chroma_zero,
        format!("linearity {linear}, homogeneity {homogeneous}, zero-alpha text path exact {text_exact}, pure-color negative chroma zero {chroma_zero}"),
    )
}

fn c9_cfg_contract() -> Outcome {
    let shape = Latent::zeros((2, 2), (8, 8), 3);
    let vc = Latent::gaussian_like(&shape, 1);
    let vn = Latent::gaussian_like(&shape, 2);
    let bits = |l: &Latent| l.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let unit = bits(&cfg_velocity(&vc, &vn, 1.0).unwrap()) == bits(&vc);
    let fixed = [-3.0, 0.0, 0.5, 1.0, 2.0, 6.0, 17.5]
        .iter()
        .all(|&s| bits(&cfg_velocity(&vc, &vc, s).unwrap()) == bits(&vc));
    let defaults = PipelineConfig::default();
    let from_file = PipelineConfig::load(None, &["sampler.cfg_scale=3.5".into(), "sampler.distilled_scale=4.0".into()]).unwrap();
    let read = defaults.sampler.cfg_scale == 2.0
        && defaults.sampler.distilled_scale == 6.0
        && from_file.sampler.cfg_scale == 3.5
        && from_file.sampler.distilled_scale == 4.0;
    (
        unit && fixed && read,
        format!("s=1 exact {unit}, equal branches fixed {fixed}, defaults 2/6 read from config {read}"),
    )
}

fn small_cube() -> TriMesh {
    let cube = procedural::cube().unwrap();
    let uvs = cube.uvs().iter().map(|t| t.map(|p| [0.42 * p[0], 0.42 * p[1]])).collect();
    TriMesh::new(cube.positions().to_vec(), cube.triangles().to_vec(), uvs, None).unwrap()
}

fn random_partial(atlas: &UvAtlasMaps, seed: u64) -> TextureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = procedural::random_texture(atlas.resolution(), seed, Some(atlas.validity()));
    let valid = atlas.validity().iter().map(|&v| v && rng.random_bool(0.3)).collect();
    TextureMap::new(atlas.resolution(), full.colors().to_vec(), valid).unwrap()
}

fn same_bits(a: &TextureMap, b: &TextureMap) -> bool {
    a.validity() == b.validity()
        && (0..a.texel_count()).all(|u| !a.is_valid(u) || a.color(u).map(f32::to_bits) == b.color(u).map(f32::to_bits))
}

fn c10_completion_oracle() -> Outcome {
    let meshes = [small_cube(), support::random_soup(9, 2), support::random_soup(21, 3)];
    let (mut cases, mut bad, mut other) = (0, 0, 0);
    for (m, mesh) in meshes.iter().enumerate() {
        let atlas = bake_atlas_maps(mesh, 32).unwrap();
        if atlas.valid_count() > 200 {
            return (false, format!("fixture {m} has {} valid texels", atlas.valid_count()));
        }
        for seed in 0..8u64 {
            let partial = random_partial(&atlas, 100 * m as u64 + seed);
            if partial.valid_count() == 0 {
                continue;
            }
            for k in [1, 4, 8] {
                cases += 1;
                let got = complete_texture(&partial, &atlas, k).unwrap();
                bad += usize::from(!same_bits(&got, &support::brute_force_complete(&partial, &atlas, k, 2.0)));
                let again = complete_texture(&got, &atlas, k).unwrap();
                let kept = (0..partial.texel_count()).all(|u| !partial.is_valid(u) || got.color(u) == partial.color(u));
                other += usize::from(!same_bits(&got, &again) || !kept);
            }
        }
    }
    (
        bad == 0 && other == 0 && cases > 0,
        format!("{bad} oracle mismatches, {other} idempotence/preservation failures over {cases} cases"),
    )
}

fn run_texture(config: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_texsync"))
        .args(["texture", "--config"])
        .arg(config)
        .env("RUST_LOG", "warn")
        .stdout(Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("texsync exited with {status}"))
    }
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "mesh = \"builtin:icosphere\"\ntexture_resolution = 64\nview_resolution = 64\noutput_dir = \"out\"\n\
         dump_steps = true\n[sampler]\nsteps = 12\nseed = 42\n[condition]\nprompt = \"weathered bronze\"\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let snapshot = || -> Result<Vec<(String, Vec<u8>)>, String> {
        run_texture(&config)?;
        let manifest = std::fs::read_to_string(out.join("manifest.txt")).map_err(|e| e.to_string())?;
        let mut files = vec![("manifest.txt".to_string(), manifest.clone().into_bytes())];
        for name in manifest.lines().filter_map(|l| l.strip_prefix("artifact=")) {
            files.push((name.to_string(), std::fs::read(out.join(name)).map_err(|e| e.to_string())?));
        }
        Ok(files)
    };
    let (a, b) = match (snapshot(), snapshot()) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return (false, e),
    };
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    (
        a.len() == b.len() && differing.is_empty() && a.len() > 5,
        format!("{} artifacts compared, differing: {:?}", a.len(), differing),
    )
}

fn main() {
    let sphere = scene(procedural::icosphere(2).unwrap(), 64, 64, 15.0);
    let criteria: Vec<(&str, Check)> = vec![
        ("round-trip exactness", Box::new(c1_round_trip)),
        ("rasterizer oracle", Box::new(c2_raster_oracle)),
        ("flow exactness", Box::new(|| c3_flow_exactness(&sphere))),
        ("sync fixed point", Box::new(|| c4_sync_fixed_point(&sphere))),
        ("sync efficacy", Box::new(|| c5_sync_efficacy(&sphere))),
        ("weighting identities", Box::new(|| c6_weighting_identities(&sphere))),
        ("weighter fitting", Box::new(c7_weighter_fit)),
        ("embedding contract", Box::new(|| c8_embedding_contract(&sphere))),
        ("CFG contract", Box::new(c9_cfg_contract)),
        ("completion oracle", Box::new(c10_completion_oracle)),
        ("determinism", Box::new(c11_determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let (ok, detail) = check();
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} {:<22} {}  {} [{:.1}s]",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            detail,
            clock.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
