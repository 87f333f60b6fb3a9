//! Run manifest: the resolved configuration, the seed, and content hashes of
//! every artifact in the output directory. Re-running a deterministic
//! pipeline yields a byte-identical manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::StageError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Manifest {
    pub rng_seed: u64,
    pub config: String,
    pub corpus_sha256: Option<String>,
    pub files: Vec<ManifestEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hashes every regular file in the output directory (except the manifest
/// itself), sorted by name, and rewrites the manifest. Stages call this
/// after writing their outputs so a chained run ends with the same manifest
/// as the monolithic pipeline.
pub fn update_manifest(cfg: &PipelineConfig) -> Result<Manifest, StageError> {
    let out = &cfg.output_dir;
    let mut files = Vec::new();
    if out.is_dir() {
        let mut names: Vec<String> = std::fs::read_dir(out)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n != MANIFEST_NAME)
            .collect();
        names.sort();
        for name in names {
            let bytes = std::fs::read(out.join(&name))?;
            files.push(ManifestEntry {
                path: name,
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            });
        }
    }
    let corpus_path = cfg.corpus_path();
    let corpus_sha256 = if corpus_path.is_file() {
        Some(sha256_hex(&std::fs::read(&corpus_path)?))
    } else {
        None
    };
    let manifest = Manifest {
        rng_seed: cfg.rng_seed,
        config: cfg.echo(),
        corpus_sha256,
        files,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| StageError::Data(format!("manifest serialization: {e}")))?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(MANIFEST_NAME), text)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, StageError> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_NAME))
        .map_err(|e| StageError::Data(format!("missing manifest: {e}")))?;
    serde_json::from_str(&text).map_err(|e| StageError::Data(format!("manifest parse: {e}")))
}
