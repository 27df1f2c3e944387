use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::failure::Failure;

pub const OUT_ENV: &str = "FAIRREG_OUT";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub input_digests: BTreeMap<String, String>,
    pub artifacts: Vec<String>,
    pub started_unix: u64,
    pub duration_seconds: f64,
    /// Timing and other run-specific facts kept out of the reports.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, serde_json::Value>,
}

/// Output directory of one command invocation, at
/// `$FAIRREG_OUT/<command>/<name>`. The default name is a digest of the
/// arguments, so rerunning the same command overwrites the same directory.
pub struct RunDir {
    pub path: PathBuf,
    artifacts: Vec<String>,
    started: Instant,
    started_unix: u64,
}

fn fnv(s: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

impl RunDir {
    pub fn create(command: &str, name: Option<&str>, args: &[String]) -> Result<Self, Failure> {
        let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| "fairreg-out".into());
        let name = match name {
            Some(n) if n.is_empty() || n.contains(['/', '\\']) || n == ".." => {
                return Err(Failure::usage(format!("bad run name {n:?}")))
            }
            Some(n) => n.to_string(),
            None => fnv(&args.join("\u{1f}")),
        };
        // created on first write, so a command that fails early leaves nothing behind
        let path = root.join(command).join(name);
        Ok(Self {
            path,
            artifacts: Vec::new(),
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.path.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Failure::io(&path, e))?;
        self.artifacts.push(rel.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<(), Failure> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Data(e.to_string()))?;
        s.push('\n');
        self.write(rel, s.as_bytes())
    }

    pub fn write_jsonl<T: Serialize>(&mut self, rel: &str, records: &[T]) -> Result<(), Failure> {
        let mut s = String::new();
        for r in records {
            s.push_str(&serde_json::to_string(r).map_err(|e| Failure::Data(e.to_string()))?);
            s.push('\n');
        }
        self.write(rel, s.as_bytes())
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<(), Failure> {
        self.write(rel, text.as_bytes())
    }

    /// Writes `manifest.json` and returns its path.
    pub fn finish(
        mut self,
        command: &str,
        argv: Vec<String>,
        config: serde_json::Value,
        seeds: Vec<u64>,
        input_digests: BTreeMap<String, String>,
        notes: BTreeMap<String, serde_json::Value>,
    ) -> Result<PathBuf, Failure> {
        self.artifacts.push("manifest.json".into());
        let manifest = RunManifest {
            command: command.into(),
            argv,
            config,
            seeds,
            input_digests,
            artifacts: self.artifacts.clone(),
            started_unix: self.started_unix,
            duration_seconds: self.started.elapsed().as_secs_f64(),
            notes,
        };
        fs::create_dir_all(&self.path).map_err(|e| Failure::io(&self.path, e))?;
        let path = self.path.join("manifest.json");
        let s = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Data(e.to_string()))? + "\n";
        fs::write(&path, s).map_err(|e| Failure::io(&path, e))?;
        Ok(path)
    }
}

pub fn display(path: &Path) -> String {
    path.display().to_string()
}
