//! Declarative run configuration, loaded from TOML with dotted-key overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use texsync_core::camera::{Projection, RigSpec};
use texsync_core::flow::{SamplerConfig, SyncConfig};
use texsync_core::fusion::{Denoiser, WeighterParams, Weighting};
use texsync_core::mesh::{load_obj, normalize_mesh, TriMesh};
use texsync_core::procedural;
use texsync_core::reproject::ReprojectOptions;
use texsync_core::uvtools::{CompletionOptions, EnhanceOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// OBJ path, or `builtin:quad`, `builtin:cube`, `builtin:icosphere`.
    pub mesh: String,
    /// Center and scale the mesh into the unit ball.
    pub normalize_mesh: bool,
    pub texture_resolution: usize,
    pub view_resolution: usize,
    pub output_dir: PathBuf,
    pub rig: RigSettings,
    pub sampler: SamplerConfig,
    pub model: ModelSettings,
    pub condition: ConditionSpec,
    pub sync: SyncConfig,
    /// Adaptive weighter parameters; replaces `sync.weighting` when set.
    pub weighter_path: Option<PathBuf>,
    pub reproject: ReprojectOptions,
    pub completion: CompletionSettings,
    pub enhance: EnhanceSettings,
    pub eval: EvalSettings,
    /// Write the fused texture of every synchronized step.
    pub dump_steps: bool,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mesh: "builtin:icosphere".into(),
            normalize_mesh: true,
            texture_resolution: 256,
            view_resolution: 256,
            output_dir: "out".into(),
            rig: RigSettings::default(),
            sampler: SamplerConfig::default(),
            model: ModelSettings::default(),
            condition: ConditionSpec::default(),
            sync: SyncConfig::default(),
            weighter_path: None,
            reproject: ReprojectOptions::default(),
            completion: CompletionSettings::default(),
            enhance: EnhanceSettings::default(),
            eval: EvalSettings::default(),
            dump_steps: false,
            base_dir: PathBuf::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigSettings {
    pub view_count: usize,
    pub elevation_deg: f64,
    pub distance: f64,
    pub projection: Projection,
}

impl Default for RigSettings {
    fn default() -> Self {
        let spec = RigSpec::default();
        Self {
            view_count: spec.view_count,
            elevation_deg: spec.elevation_deg,
            distance: spec.distance,
            projection: spec.projection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    /// Seed of the toy model's embedding-to-field projection.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageCondition {
    pub path: PathBuf,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeMode {
    #[default]
    White,
    /// Grayscale version of `condition.reference`.
    GrayscaleRef,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionSpec {
    pub prompt: String,
    pub images: Vec<ImageCondition>,
    /// Stylization reference; joins the positive images with its own alpha.
    pub reference: Option<ImageCondition>,
    pub negative: NegativeMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompletionSettings {
    pub enabled: bool,
    pub k: usize,
    pub power: f64,
}

impl Default for CompletionSettings {
    fn default() -> Self {
        let o = CompletionOptions::default();
        Self {
            enabled: true,
            k: o.k,
            power: o.power,
        }
    }
}

impl CompletionSettings {
    pub fn options(&self) -> CompletionOptions {
        CompletionOptions { k: self.k, power: self.power }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnhanceSettings {
    pub enabled: bool,
    pub factor: usize,
    pub sharpen: f32,
    pub margin: usize,
}

impl Default for EnhanceSettings {
    fn default() -> Self {
        let o = EnhanceOptions::default();
        Self {
            enabled: true,
            factor: 2,
            sharpen: o.sharpen,
            margin: o.margin,
        }
    }
}

impl EnhanceSettings {
    pub fn options(&self) -> EnhanceOptions {
        EnhanceOptions {
            sharpen: self.sharpen,
            margin: self.margin,
        }
    }
}

/// Denoiser used by `eval` and `fit-weighter` in place of a trained model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub denoiser: Denoiser,
    pub seed: u64,
}

fn check_resolution(name: &str, r: usize) -> Result<()> {
    ensure!(r >= 16 && r.is_power_of_two(), "{name} must be a power of two >= 16, got {r}");
    Ok(())
}

impl PipelineConfig {
    /// Reads `path` (if any), applies `key=value` overrides and validates.
    /// Relative paths inside a config file resolve against its directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let (mut table, base_dir) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
                (table, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (toml::Table::new(), PathBuf::new()),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut config: PipelineConfig = toml::Value::Table(table).try_into().context("invalid configuration")?;
        config.base_dir = base_dir;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        check_resolution("texture_resolution", self.texture_resolution)?;
        check_resolution("view_resolution", self.view_resolution)?;
        ensure!(self.rig.view_count >= 1, "rig needs at least one view");
        ensure!(self.sampler.steps >= 1, "sampler needs at least one step");
        let c = &self.condition;
        for img in c.images.iter().chain(&c.reference) {
            ensure!(img.alpha.is_finite(), "non-finite alpha {} for {}", img.alpha, img.path.display());
        }
        if c.negative == NegativeMode::GrayscaleRef && c.reference.is_none() {
            bail!("negative mode grayscale-ref needs condition.reference");
        }
        ensure!(matches!(self.enhance.factor, 2 | 4), "enhance.factor must be 2 or 4");
        self.sync.validate()?;
        Ok(())
    }

    /// Resolves a path from the config against the config file's directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn rig_spec(&self) -> RigSpec {
        RigSpec {
            view_count: self.rig.view_count,
            elevation_deg: self.rig.elevation_deg,
            distance: self.rig.distance,
            resolution: self.view_resolution,
            projection: self.rig.projection,
        }
    }

    pub fn load_mesh(&self) -> Result<TriMesh> {
        let mesh = match self.mesh.strip_prefix("builtin:") {
            Some("quad") => procedural::quad()?,
            Some("cube") => procedural::cube()?,
            Some("icosphere") => procedural::icosphere(2)?,
            Some(other) => bail!("unknown builtin mesh `{other}`"),
            None => load_obj(self.resolve(Path::new(&self.mesh)))?,
        };
        Ok(if self.normalize_mesh { normalize_mesh(&mesh)? } else { mesh })
    }

    /// Sync weighting, with the weighter file taking precedence.
    pub fn weighting(&self) -> Result<Weighting> {
        match &self.weighter_path {
            Some(p) => {
                let p = self.resolve(p);
                let text = std::fs::read_to_string(&p).with_context(|| format!("reading weighter {}", p.display()))?;
                Ok(Weighting::Adaptive(WeighterParams::from_json(&text)?))
            }
            None => Ok(self.sync.weighting),
        }
    }

    /// Flattened `key=value` lines in sorted key order.
    pub fn to_key_values(&self) -> Result<String> {
        let value = toml::Value::try_from(self).context("serializing configuration")?;
        let mut lines = Vec::new();
        flatten("", &value, &mut lines);
        lines.sort();
        let mut out = String::new();
        for (k, v) in lines {
            writeln!(out, "{k}={v}").unwrap();
        }
        Ok(out)
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<(String, String)>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// `a.b.c=value`; the value is parsed as TOML and falls back to a string.
fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .with_context(|| format!("override `{assignment}` is not key=value"))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .with_context(|| format!("override `{key}`: `{part}` is not a table"))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = PipelineConfig::load(None, &[]).unwrap();
        assert_eq!(c.texture_resolution, 256);
        assert_eq!(c.sampler.cfg_scale, 2.0);
        assert_eq!(c.sampler.distilled_scale, 6.0);
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let c = PipelineConfig::load(None, &["sampler.steps=7".into(), "mesh=builtin:cube".into()]).unwrap();
        assert_eq!(c.sampler.steps, 7);
        assert_eq!(c.mesh, "builtin:cube");
    }

    #[test]
    fn rejects_bad_resolutions_and_modes() {
        assert!(PipelineConfig::load(None, &["texture_resolution=100".into()]).is_err());
        assert!(PipelineConfig::load(None, &["view_resolution=8".into()]).is_err());
        assert!(PipelineConfig::load(None, &["condition.negative=\"grayscale-ref\"".into()]).is_err());
        assert!(PipelineConfig::load(None, &["unknown_key=1".into()]).is_err());
        assert!(PipelineConfig::load(None, &["enhance.factor=3".into()]).is_err());
    }

    #[test]
    fn key_values_round_trip_through_toml() {
        let c = PipelineConfig::load(None, &["sync.weighting.kind=\"cosine\"".into(), "sync.weighting.beta=2.0".into()]).unwrap();
        let kv = c.to_key_values().unwrap();
        assert!(kv.contains("sync.weighting.beta=2.0\n"));
        assert!(kv.contains("sampler.seed=0\n"));
        let lines: Vec<&str> = kv.lines().collect();
        let mut sorted = lines.clone();
        sorted.sort();
        assert_eq!(lines, sorted);
    }

    #[test]
    fn shipped_example_matches_defaults() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
        let mut c = PipelineConfig::load(Some(&path), &[]).unwrap();
        assert_eq!(c.condition.prompt, "a weathered bronze statue");
        c.condition.prompt.clear();
        c.output_dir = "out".into();
        c.base_dir = PathBuf::new();
        assert_eq!(c, PipelineConfig::default());
    }
}
