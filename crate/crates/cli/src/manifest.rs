//! Run manifests: what was run, with which resolved configuration, and
//! digests of everything written.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub program: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub workers: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<OutputDigest>,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Where the manifest goes when `--manifest` is not given.
pub fn default_location(outputs: &[OutputDigest]) -> Option<PathBuf> {
    outputs.iter().find(|o| o.path != "-").map(|o| {
        let mut p = Path::new(&o.path).as_os_str().to_owned();
        p.push(".manifest.json");
        PathBuf::from(p)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_input() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_sits_next_to_first_file() {
        let outs = [
            OutputDigest { path: "-".into(), bytes: 0, sha256: String::new() },
            OutputDigest { path: "run/m.csv".into(), bytes: 0, sha256: String::new() },
        ];
        assert_eq!(default_location(&outs), Some(PathBuf::from("run/m.csv.manifest.json")));
        assert_eq!(default_location(&outs[..1]), None);
    }
}
