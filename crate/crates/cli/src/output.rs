//! Artifact directory: every file carries the config hash and discretization sizes.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use swimopt::splinecurve::io::write_columns;

use crate::config::RunConfig;
use crate::error::CliError;

/// Version tag of the CSV and JSON layouts.
pub const SCHEMA_VERSION: u32 = 1;

pub struct Artifacts {
    pub dir: PathBuf,
    pub command: &'static str,
    pub hash: String,
    pub sizes: Vec<(String, String)>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    config_sha256: &'a str,
    sizes: serde_json::Map<String, serde_json::Value>,
    config: &'a RunConfig,
    data: &'a T,
}

impl Artifacts {
    pub fn new(dir: PathBuf, command: &'static str, config: &RunConfig, n_gamma: usize) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        let sizes = vec![
            ("n_gamma".into(), n_gamma.to_string()),
            ("n_u".into(), config.n_u.to_string()),
            ("panels".into(), config.panels.to_string()),
            ("order".into(), config.order.to_string()),
            ("refine".into(), config.refine.to_string()),
            ("pole_refine".into(), config.pole_refine.to_string()),
        ];
        Ok(Self {
            dir,
            command,
            hash: config.hash(),
            sizes,
        })
    }

    /// Same metadata in a subdirectory (one per sweep worker item).
    pub fn child(&self, name: &str) -> Result<Self, CliError> {
        let dir = self.dir.join(name);
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            command: self.command,
            hash: self.hash.clone(),
            sizes: self.sizes.clone(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn metadata(&self, extra: &[(&str, String)]) -> Vec<String> {
        let mut m = vec![
            format!("swimopt {} schema {SCHEMA_VERSION}", env!("CARGO_PKG_VERSION")),
            format!("command: {}", self.command),
            format!("config_sha256: {}", self.hash),
        ];
        m.extend(self.sizes.iter().map(|(k, v)| format!("{k}: {v}")));
        m.extend(extra.iter().map(|(k, v)| format!("{k}: {v}")));
        m
    }

    pub fn csv(&self, name: &str, extra: &[(&str, String)], header: &[&str], columns: &[&[f64]]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let f = create(&path)?;
        write_columns(BufWriter::new(f), &self.metadata(extra), header, columns)?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, config: &RunConfig, data: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let env = Envelope {
            schema_version: SCHEMA_VERSION,
            command: self.command,
            config_sha256: &self.hash,
            sizes: self
                .sizes
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect(),
            config,
            data,
        };
        serde_json::to_writer_pretty(BufWriter::new(create(&path)?), &env)?;
        Ok(path)
    }
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
