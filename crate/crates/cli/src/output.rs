//! The output directory of one command and its `report.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use gauss_mlc::report::CsvTable;
use serde_json::{json, Value};

pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
    started: Instant,
}

impl Output {
    /// Creates the directory. Call only after the configuration validated.
    pub fn create(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_owned());
        self.dir.join(name)
    }

    pub fn csv(&mut self, name: &str, table: &CsvTable) -> anyhow::Result<()> {
        let p = self.path(name);
        table.write(&p)?;
        Ok(())
    }

    /// Writes `report.json` and prints the location of the outputs.
    pub fn finish(mut self, command: &str, config: Value, seeds: Value, constants: Value, results: Value) -> anyhow::Result<()> {
        let wall_ms = self.started.elapsed().as_secs_f64() * 1e3;
        let p = self.path("report.json");
        let report = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "seeds": seeds,
            "constants": constants,
            "results": results,
            "wall_ms": wall_ms,
            "files": self.files,
        });
        let body = serde_json::to_string_pretty(&report)? + "\n";
        std::fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
        println!("{command}: wrote {} files to {}", self.files.len(), self.dir.display());
        Ok(())
    }
}
