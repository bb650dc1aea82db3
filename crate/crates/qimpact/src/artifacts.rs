//! Artifact files, checksums and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One CSV field. Floats are written with 17 significant digits so every
/// value round-trips exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::I(v as i64)
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".into()
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::F(v) => f.write_str(&format_float(*v)),
            Cell::I(v) => write!(f, "{v}"),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_hash: String,
    pub toolkit_version: String,
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<ArtifactEntry>,
}

impl RunManifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn load(dir: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(dir.join(Self::FILE))?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }

    /// Files whose current checksum differs from the recorded one.
    pub fn verify(&self, dir: &Path) -> std::io::Result<Vec<String>> {
        let mut bad = Vec::new();
        for a in &self.artifacts {
            let bytes = fs::read(dir.join(&a.path))?;
            if sha256_hex(&bytes) != a.sha256 || bytes.len() as u64 != a.bytes {
                bad.push(a.path.clone());
            }
        }
        Ok(bad)
    }
}

/// Writes artifacts into one directory and records their checksums.
#[derive(Debug)]
pub struct ArtifactSink {
    dir: PathBuf,
    entries: Vec<ArtifactEntry>,
}

impl ArtifactSink {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entries(&self) -> &[ArtifactEntry] {
        &self.entries
    }

    pub fn bytes(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        let mut f = fs::File::create(self.dir.join(name))?;
        f.write_all(bytes)?;
        self.entries.push(ArtifactEntry { path: name.into(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    /// CSV with a one-line header; `header` names the columns and units.
    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> std::io::Result<()>
    where
        I: IntoIterator<Item = Vec<Cell>>,
    {
        let mut out = header.join(",");
        out.push('\n');
        for row in rows {
            let line: Vec<String> = row.iter().map(Cell::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        self.bytes(name, out.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    /// Writes `manifest.json`, which lists every artifact written so far.
    pub fn finish(self, experiment: &str, config_hash: String, wall_clock_seconds: f64) -> std::io::Result<RunManifest> {
        let manifest = RunManifest {
            experiment: experiment.into(),
            config_hash,
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            wall_clock_seconds,
            artifacts: self.entries,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        fs::write(self.dir.join(RunManifest::FILE), text + "\n")?;
        Ok(manifest)
    }
}
