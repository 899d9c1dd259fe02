use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config_path: Option<PathBuf>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub threads: usize,
    pub output_dir: Option<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// Seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub status: String,
    pub exit_code: i32,
    pub error: Option<String>,
    #[serde(skip)]
    clock: Option<(String, Instant)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            args: std::env::args().collect(),
            config_path: None,
            config: serde_json::Value::Null,
            seed: None,
            version: env!("CARGO_PKG_VERSION"),
            threads: rayon::current_num_threads(),
            output_dir: None,
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            status: "running".into(),
            exit_code: 0,
            error: None,
            clock: None,
        }
    }

    /// Starts timing `phase`, closing the previous one.
    pub fn phase(&mut self, phase: &str) {
        self.stop();
        self.clock = Some((phase.to_string(), Instant::now()));
    }

    pub fn stop(&mut self) {
        if let Some((name, t)) = self.clock.take() {
            *self.timings.entry(name).or_default() += t.elapsed().as_secs_f64();
        }
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn write(&mut self, path: &Path) -> std::io::Result<()> {
        self.stop();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text + "\n")
    }
}
