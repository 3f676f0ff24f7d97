//! Report envelopes and all-or-nothing output writing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};

/// Hex SHA-256 of the canonical JSON form of `config`.
pub fn fingerprint(config: &RunConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub command: &'a str,
    pub tool_version: &'static str,
    pub seed: u64,
    pub config_fingerprint: String,
    pub config: &'a RunConfig,
    pub result: T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(command: &'a str, config: &'a RunConfig, result: T) -> Result<Self> {
        Ok(Self {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            config_fingerprint: fingerprint(config)?,
            config,
            result,
        })
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self)?;
        out.push(b'\n');
        Ok(out)
    }
}

/// Write every file into `dir` or none of them.
///
/// Contents are staged in hidden temporary files in the target directory and
/// renamed into place only after all of them were written. If a rename fails,
/// files already moved into place are removed again.
pub fn write_all_or_nothing(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(files.len());
    let cleanup = |staged: &[(PathBuf, PathBuf)]| {
        for (tmp, _) in staged {
            let _ = fs::remove_file(tmp);
        }
    };
    for (name, bytes) in files {
        let target = dir.join(name);
        let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
        if let Err(e) = fs::write(&tmp, bytes) {
            cleanup(&staged);
            let _ = fs::remove_file(&tmp);
            return Err(Error::io(&tmp, e));
        }
        staged.push((tmp, target));
    }
    for (i, (tmp, target)) in staged.iter().enumerate() {
        if let Err(e) = fs::rename(tmp, target) {
            for (_, done) in &staged[..i] {
                let _ = fs::remove_file(done);
            }
            cleanup(&staged[i..]);
            return Err(Error::io(target, e));
        }
    }
    Ok(staged.into_iter().map(|(_, t)| t).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_tracks_config() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(fingerprint(&a).unwrap(), fingerprint(&b).unwrap());
        b.seed = 1;
        assert_ne!(fingerprint(&a).unwrap(), fingerprint(&b).unwrap());
        assert_eq!(fingerprint(&a).unwrap().len(), 64);
    }

    #[test]
    fn envelope_embeds_config_and_seed() {
        let cfg = RunConfig {
            seed: 42,
            ..Default::default()
        };
        let json = Envelope::new("analyze", &cfg, 7u32).unwrap().to_json().unwrap();
        let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(v["seed"], 42);
        assert_eq!(v["config"]["seed"], 42);
        assert_eq!(v["result"], 7);
    }

    #[test]
    fn writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested");
        let paths = write_all_or_nothing(&out, &[("a.txt", b"a".to_vec()), ("b.txt", b"b".to_vec())]).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(fs::read(out.join("b.txt")).unwrap(), b"b");
        let leftovers = fs::read_dir(&out).unwrap().count();
        assert_eq!(leftovers, 2);
    }

    #[test]
    fn failure_leaves_nothing_behind() {
        let dir = tempfile::tempdir().unwrap();
        // A directory where a file should go makes the rename fail.
        fs::create_dir(dir.path().join("b.txt")).unwrap();
        fs::write(dir.path().join("b.txt").join("keep"), b"x").unwrap();
        let err = write_all_or_nothing(dir.path(), &[("a.txt", b"a".to_vec()), ("b.txt", b"b".to_vec())]);
        assert!(err.is_err());
        assert!(!dir.path().join("a.txt").exists());
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }
}
