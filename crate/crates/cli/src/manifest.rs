use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::CliError;

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    arguments: Vec<String>,
    version: &'static str,
    seed: u64,
    config_sha256: String,
    config: String,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn digest(path: &Path) -> Result<FileDigest, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

/// Writes `manifest_<command>.json` into the output directory.
pub fn write(
    config: &Config,
    command: &str,
    arguments: &[String],
    seed: u64,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
) -> Result<PathBuf, CliError> {
    let text = config.to_toml();
    let manifest = Manifest {
        command: command.to_string(),
        arguments: arguments.to_vec(),
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config_sha256: sha256_hex(text.as_bytes()),
        config: text,
        inputs: inputs.iter().map(|p| digest(p)).collect::<Result<_, _>>()?,
        outputs: outputs.iter().map(|p| digest(p)).collect::<Result<_, _>>()?,
    };
    let path = config.output_dir.join(format!("manifest_{command}.json"));
    std::fs::create_dir_all(&config.output_dir)?;
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serialises"))?;
    Ok(path)
}
