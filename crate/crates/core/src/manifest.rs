//! Run manifests: configuration snapshot, code version, timing and SHA-256
//! checksums of every emitted file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::Result;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
/// Bumped whenever a CSV header or column meaning changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub config: String,
    pub version: String,
    pub seed: u64,
    pub started: u64,
    pub finished: u64,
    /// `(file name, hex sha256)` in emission order.
    pub checksums: Vec<(String, String)>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

impl RunManifest {
    /// Checksums the given files and stamps the finish time.
    pub fn finish(config: String, seed: u64, started: u64, files: &[PathBuf]) -> Result<Self> {
        let mut checksums = Vec::with_capacity(files.len());
        for path in files {
            let name = path
                .file_name()
                .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
            checksums.push((name, sha256_hex(&fs::read(path)?)));
        }
        Ok(RunManifest {
            config,
            version: CODE_VERSION.to_string(),
            seed,
            started,
            finished: unix_now(),
            checksums,
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "version={}", self.version);
        let _ = writeln!(out, "csv_schema={CSV_SCHEMA_VERSION}");
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "started_unix={}", self.started);
        let _ = writeln!(out, "finished_unix={}", self.finished);
        out.push_str("[config]\n");
        out.push_str(&self.config);
        out.push_str("[checksums]\n");
        for (name, sum) in &self.checksums {
            let _ = writeln!(out, "{name}={sum}");
        }
        out
    }

    /// Writes `manifest.txt` into `dir` via a temporary file and rename.
    pub fn write_atomic(&self, dir: &Path) -> Result<PathBuf> {
        let tmp = dir.join(format!(".{MANIFEST_FILE}.tmp"));
        let dest = dir.join(MANIFEST_FILE);
        fs::write(&tmp, self.render())?;
        fs::rename(&tmp, &dest)?;
        Ok(dest)
    }

    /// Recomputes every checksum against the files in `dir`.
    pub fn verify(&self, dir: &Path) -> Result<bool> {
        for (name, sum) in &self.checksums {
            if sha256_hex(&fs::read(dir.join(name))?) != *sum {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_checksums_match_files() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.csv");
        fs::write(&f, "x\n1\n").unwrap();
        let m = RunManifest::finish("L=2\n".into(), 5, unix_now(), &[f.clone()]).unwrap();
        let path = m.write_atomic(dir.path()).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert!(text.contains("seed=5"));
        assert!(text.contains("csv_schema=1"));
        assert!(text.contains(&format!("a.csv={}", sha256_hex(b"x\n1\n"))));
        assert!(m.verify(dir.path()).unwrap());
        fs::write(&f, "tampered").unwrap();
        assert!(!m.verify(dir.path()).unwrap());
    }
}
