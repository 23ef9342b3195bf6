use std::path::Path;
use std::process::{Command, Output};

use texsync_cli::config::PipelineConfig;
use texsync_cli::pipeline::build_condition;
use texsync_core::embed::{embed_image, grayscale_negative, white_negative, Embedding};
use texsync_core::image::Image;
use texsync_core::io::{read_texture_png, write_png};

const SMALL: &[&str] = &[
    "--set",
    "texture_resolution=32",
    "--set",
    "view_resolution=32",
    "--set",
    "sampler.steps=4",
];

fn texsync(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_texsync"))
        .current_dir(dir)
        .args(SMALL)
        .args(args)
        .env("RUST_LOG", "warn")
        .env("TEXSYNC_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn stage_commands_chain_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    texsync(d, &["render", "--out", "r"]);
    for f in ["r/render_grid.png", "r/depth_grid.png", "r/depth_grid.raw", "r/atlas_mask.png"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let o = texsync(d, &["reproject", "--grid", "r/render_grid.png", "--out", "p"]);
    assert_eq!(stdout(&o).lines().count(), 4);
    assert!(d.join("p/partial_3_mask.png").exists());

    texsync(d, &["fuse", "--grid", "r/render_grid.png", "--out", "fused.png"]);
    let fused = read_texture_png(d.join("fused.png")).unwrap();
    assert_eq!(fused.resolution(), 32);

    let o = texsync(d, &["eval-loss", "--grid", "r/render_grid.png", "--truth", "fused.png"]);
    let text = stdout(&o);
    assert!(text.contains("pec=0.000000"), "{text}");

    texsync(d, &["complete", "--texture", "fused.png", "--out", "done.png"]);
    let done = read_texture_png(d.join("done.png")).unwrap();
    assert!(done.valid_count() >= fused.valid_count());
    texsync(d, &["enhance", "--texture", "done.png", "--out", "big.png"]);
    assert_eq!(read_texture_png(d.join("big.png")).unwrap().resolution(), 64);

    let o = texsync(d, &["eval", "--truth", "done.png", "--out", "eval.txt"]);
    assert!(stdout(&o).contains("coverage"));
    let kv = std::fs::read_to_string(d.join("eval.txt")).unwrap();
    assert_eq!(kv.lines().count(), 4);
}

#[test]
fn embed_and_fit_weighter_write_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = texsync(d, &["embed", "--text", "rusty metal", "--out", "t.emb"]);
    assert!(stdout(&o).contains("dim=64"));
    assert_eq!(Embedding::load(d.join("t.emb")).unwrap().dim(), 64);

    texsync(d, &["fit-weighter", "--budget", "6", "--samples", "1", "--out", "w.json"]);
    assert!(std::fs::read_to_string(d.join("w.json")).unwrap().contains("lambda_edge"));
}

#[test]
fn missing_input_reports_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_texsync"))
        .current_dir(tmp.path())
        .args(SMALL)
        .args(["fuse", "--grid", "missing.png"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.png"));
}

#[test]
fn invalid_config_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_texsync"))
        .current_dir(tmp.path())
        .args(["texture", "--set", "texture_resolution=48"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("power of two"));
}

fn write_image(path: &Path, color: [f32; 3]) {
    write_png(&Image::from_fn(16, 16, 3, |x, _, c| if x < 8 { color[c] } else { 0.5 }), path).unwrap();
}

#[test]
fn condition_modes_follow_config() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_image(&d.join("ref.png"), [0.9, 0.2, 0.1]);
    let cfg = d.join("c.toml");

    std::fs::write(&cfg, "[condition]\nprompt = \"sks\"\nimages = [{ path = \"ref.png\", alpha = 1.0 }]\n").unwrap();
    let b = build_condition(&PipelineConfig::load(Some(&cfg), &[]).unwrap()).unwrap();
    let e = embed_image(&texsync_core::io::read_png(d.join("ref.png")).unwrap()).unwrap();
    assert_eq!(b.image_slot.values, e.values);
    assert_eq!(b.negative, white_negative());

    std::fs::write(
        &cfg,
        "[condition]\nprompt = \"\"\nnegative = \"grayscale-ref\"\nreference = { path = \"ref.png\", alpha = 1.0 }\n",
    )
    .unwrap();
    let b = build_condition(&PipelineConfig::load(Some(&cfg), &[]).unwrap()).unwrap();
    let reference = texsync_core::io::read_png(d.join("ref.png")).unwrap();
    assert_eq!(b.negative, grayscale_negative(&reference).unwrap());
    assert_eq!(b.image_slot.values, e.values);
}
