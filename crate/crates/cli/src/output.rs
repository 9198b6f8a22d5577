use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Output directory that remembers what was written into it.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::io(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.root.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |w| w.write_all(text.as_bytes()))
    }

    /// Write `manifest.json` listing every file produced so far.
    pub fn finish(mut self, command: &str, run: &RunInfo, results: Value) -> Result<(), CliError> {
        let manifest = json!({
            "tool": "atomsim",
            "version": VERSION,
            "command": command,
            "config": run.config,
            "config_sha256": config_hash(&run.config),
            "wall_time_s": run.wall_time(),
            "outputs": self.written,
            "results": results,
        });
        self.write_json("manifest.json", &manifest)
    }
}

/// Effective configuration plus timing of one run.
pub struct RunInfo {
    pub config: BTreeMap<String, Value>,
    pub deterministic: bool,
    pub started: Instant,
}

impl RunInfo {
    pub fn wall_time(&self) -> Option<f64> {
        (!self.deterministic).then(|| self.started.elapsed().as_secs_f64())
    }
}

/// SHA-256 of the canonical (key-sorted, compact) JSON of the configuration.
pub fn config_hash(config: &BTreeMap<String, Value>) -> String {
    let canonical = serde_json::to_string(config).unwrap_or_default();
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
