//! Run directory layout, locking, artifact files and the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use viewsym::export::read_config_hash;

use crate::config::RunConfig;
use crate::CliError;

pub const SUBDIRS: [&str; 4] = ["stimuli", "bases", "results", "report"];

/// JSON artifact envelope.
#[derive(Serialize, Deserialize)]
pub struct Artifact<T> {
    pub config_hash: String,
    pub data: T,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub total: usize,
    pub passed: usize,
    pub failed: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    /// Paths relative to the run directory, sorted.
    pub artifacts: Vec<String>,
    pub versions: BTreeMap<String, String>,
    /// Wall-clock seconds per subcommand; the only non-deterministic field.
    pub timings_seconds: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<CheckSummary>,
}

pub struct RunDir {
    pub root: PathBuf,
    pub hash: String,
    _lock: RunLock,
}

struct RunLock(PathBuf);

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

impl RunDir {
    /// Create (or reopen) `<out>/runs/<hash>` and take its lock.
    pub fn open(cfg: &RunConfig) -> Result<RunDir, CliError> {
        let hash = cfg.hash();
        let root = cfg.output_dir.join("runs").join(&hash);
        for sub in SUBDIRS {
            fs::create_dir_all(root.join(sub)).map_err(|e| CliError::io(&root.join(sub), e))?;
        }
        let lock_path = root.join(".lock");
        fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock_path)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    CliError::Locked(lock_path.clone())
                } else {
                    CliError::io(&lock_path, e)
                }
            })?;
        let dir = RunDir {
            root,
            hash,
            _lock: RunLock(lock_path),
        };
        let config = Artifact {
            config_hash: dir.hash.clone(),
            data: cfg,
        };
        dir.write_json("config.json", &config)?;
        Ok(dir)
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(rel);
        let mut w = BufWriter::new(fs::File::create(&path).map_err(|e| CliError::io(&path, e))?);
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))
    }

    pub fn write_artifact<T: Serialize>(&self, rel: &str, data: &T) -> Result<(), CliError> {
        self.write_json(
            rel,
            &Artifact {
                config_hash: self.hash.clone(),
                data,
            },
        )
    }

    /// Read an artifact, insisting it belongs to this run.
    pub fn read_artifact<T: DeserializeOwned>(&self, rel: &str) -> Result<T, CliError> {
        let path = self.path(rel);
        if !path.exists() {
            return Err(CliError::Missing(rel.to_string()));
        }
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let a: Artifact<T> = serde_json::from_str(&text).map_err(|e| CliError::Artifact(format!("{rel}: {e}")))?;
        if a.config_hash != self.hash {
            return Err(CliError::MixedHash {
                file: rel.to_string(),
                found: a.config_hash,
                expected: self.hash.clone(),
            });
        }
        Ok(a.data)
    }

    /// Write a CSV through `f`, which receives the config hash to embed.
    pub fn write_csv(
        &self,
        rel: &str,
        f: impl FnOnce(&mut BufWriter<fs::File>, &str) -> viewsym::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.path(rel);
        let mut w = BufWriter::new(fs::File::create(&path).map_err(|e| CliError::io(&path, e))?);
        f(&mut w, &self.hash).map_err(|e| CliError::Artifact(format!("{rel}: {e}")))?;
        w.flush().map_err(|e| CliError::io(&path, e))
    }

    /// Every artifact file under the run directory, relative and sorted.
    pub fn list_artifacts(&self) -> Result<Vec<String>, CliError> {
        let mut out = Vec::new();
        for sub in SUBDIRS {
            collect(&self.root, &self.root.join(sub), &mut out)?;
        }
        out.push("config.json".into());
        out.sort();
        Ok(out)
    }

    /// Refuse to continue if any artifact carries another run's hash.
    pub fn check_hashes(&self) -> Result<(), CliError> {
        for rel in self.list_artifacts()? {
            let path = self.path(&rel);
            let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            let found = if rel.ends_with(".csv") {
                read_config_hash(&text).map(str::to_owned)
            } else {
                serde_json::from_str::<serde_json::Value>(&text)
                    .ok()
                    .and_then(|v| v.get("config_hash").and_then(|h| h.as_str()).map(str::to_owned))
            };
            match found {
                Some(h) if h == self.hash => {}
                other => {
                    return Err(CliError::MixedHash {
                        file: rel,
                        found: other.unwrap_or_else(|| "none".into()),
                        expected: self.hash.clone(),
                    })
                }
            }
        }
        Ok(())
    }

    pub fn load_manifest(&self) -> RunManifest {
        fs::read_to_string(self.path("manifest.json"))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default()
    }

    /// Rewrite the manifest with the current artifact list and one more timing.
    pub fn update_manifest(&self, step: &str, seconds: f64, checks: Option<CheckSummary>) -> Result<(), CliError> {
        let mut m = self.load_manifest();
        m.config_hash = self.hash.clone();
        m.artifacts = self.list_artifacts()?;
        m.versions = BTreeMap::from([
            ("viewsym".to_string(), viewsym::VERSION.to_string()),
            ("viewsym-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]);
        m.timings_seconds.insert(step.to_string(), seconds);
        if checks.is_some() {
            m.checks = checks;
        }
        self.write_json("manifest.json", &m)
    }
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<(), CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_dir() {
            collect(root, &path, out)?;
        } else if let Ok(rel) = path.strip_prefix(root) {
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}
