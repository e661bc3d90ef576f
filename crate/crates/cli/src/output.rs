use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

/// Writes artifacts into one directory, each via a temporary file and a
/// rename so that readers never see a partial file.
pub struct Artifacts {
    dir: Option<PathBuf>,
    pub written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self {
            dir,
            written: Vec::new(),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        write_atomic(dir, name, bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }
}

pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, dir.join(name))
}

pub struct Manifest {
    pub command: String,
    pub argv: Vec<String>,
    pub started: String,
    pub config: Option<Value>,
    pub seed: Option<u64>,
}

impl Manifest {
    pub fn finish(
        &self,
        artifacts: &[String],
        status: &str,
        exit_code: i32,
        summary: Value,
    ) -> Value {
        json!({
            "command": self.command,
            "argv": self.argv,
            "config": self.config,
            "seed": self.seed,
            "started": self.started,
            "finished": now(),
            "artifacts": artifacts,
            "status": status,
            "exit_code": exit_code,
            "summary": summary,
        })
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
