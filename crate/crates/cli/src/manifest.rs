//! Run manifest: config, seed-bearing settings and artifact names as sorted
//! `key=value` lines. Wall-clock timings go to a separate file so the
//! manifest itself is reproducible.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Result;

use texsync_core::io::write_bytes;

use crate::config::PipelineConfig;

pub const MANIFEST: &str = "manifest.txt";
pub const TIMINGS: &str = "timings.txt";

pub struct Manifest {
    config: String,
    values: Vec<(String, String)>,
    artifacts: Vec<String>,
    timings: Vec<(String, f64)>,
}

impl Manifest {
    pub fn new(config: &PipelineConfig) -> Result<Self> {
        Ok(Self {
            config: config.to_key_values()?,
            values: Vec::new(),
            artifacts: Vec::new(),
            timings: Vec::new(),
        })
    }

    pub fn value(&mut self, key: &str, value: impl Display) {
        self.values.push((key.to_string(), value.to_string()));
    }

    pub fn artifact(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    pub fn timing(&mut self, stage: &str, elapsed: Duration) {
        log::info!("{stage}: {:.3}s", elapsed.as_secs_f64());
        self.timings.push((stage.to_string(), elapsed.as_secs_f64()));
    }

    pub fn render(&self) -> String {
        let mut out = format!("version={}\n", env!("CARGO_PKG_VERSION"));
        for line in self.config.lines() {
            out.push_str("config.");
            out.push_str(line);
            out.push('\n');
        }
        for (k, v) in &self.values {
            out.push_str(&format!("{k}={v}\n"));
        }
        for a in &self.artifacts {
            out.push_str(&format!("artifact={a}\n"));
        }
        out
    }

    pub fn render_timings(&self) -> String {
        self.timings.iter().map(|(k, v)| format!("{k}={v:.6}\n")).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        let m = dir.join(MANIFEST);
        let t = dir.join(TIMINGS);
        write_bytes(&m, self.render().as_bytes())?;
        write_bytes(&t, self.render_timings().as_bytes())?;
        Ok((m, t))
    }
}
