//! Writing a run's files and its manifest.

use std::fs;
use std::path::{Path, PathBuf};

use amr_core::config::PipelineConfig;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::commands::{CliError, RunOutput};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn manifest(command: &str, config: &PipelineConfig, run: &RunOutput) -> String {
    let inputs: serde_json::Map<String, serde_json::Value> = run
        .inputs
        .iter()
        .map(|(p, h)| (p.display().to_string(), json!(h)))
        .collect();
    let outputs: serde_json::Map<String, serde_json::Value> = run
        .files
        .iter()
        .map(|(name, text)| (name.clone(), json!(sha256_hex(text.as_bytes()))))
        .collect();
    let m = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": config.sha256(),
        "config": config.canonical(),
        "seed": config.seed,
        "inputs": inputs,
        "outputs": outputs,
    });
    let mut text = serde_json::to_string_pretty(&m).expect("manifest is plain JSON");
    text.push('\n');
    text
}

/// Writes every output file and the manifest. If any write fails, the
/// files written so far are removed, and the directory too when this run
/// created it.
pub fn write(
    out: &Path,
    command: &str,
    config: &PipelineConfig,
    run: &RunOutput,
) -> Result<(), CliError> {
    let created = !out.exists();
    let io = |path: &Path, e: std::io::Error| CliError::Data(format!("{}: {e}", path.display()));
    fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let mut files: Vec<(String, &str)> = run
        .files
        .iter()
        .map(|(n, t)| (n.clone(), t.as_str()))
        .collect();
    let manifest = manifest(command, config, run);
    files.push((MANIFEST_FILE.to_string(), &manifest));
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, text) in &files {
        let path = out.join(name);
        if let Err(e) = fs::write(&path, text) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            if created {
                let _ = fs::remove_dir(out);
            }
            return Err(io(&path, e));
        }
        written.push(path);
    }
    Ok(())
}
