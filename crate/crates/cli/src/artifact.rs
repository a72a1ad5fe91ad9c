//! Artifacts are plain files in the output directory. Each starts with a
//! `# config=<hash>` line naming the configuration that produced it.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

const HEADER_PREFIX: &str = "# config=";

pub fn header(hash: &str) -> String {
    format!("{HEADER_PREFIX}{hash}\n")
}

/// Prepends the header and writes `body` to `out/name`.
pub fn write(out: &Path, name: &str, hash: &str, body: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let path = out.join(name);
    let mut bytes = header(hash).into_bytes();
    bytes.extend_from_slice(body);
    fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

/// Reads `out/name`, checks its config hash and returns the body after the
/// header. `producer` is the subcommand that writes the artifact.
pub fn read(out: &Path, name: &str, producer: &str, hash: &str) -> Result<String> {
    let path = out.join(name);
    if !path.exists() {
        bail!("{} not found: run {producer} first", path.display());
    }
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    match first.strip_prefix(HEADER_PREFIX) {
        Some(found) if found == hash => Ok(body.to_string()),
        Some(found) => bail!(
            "{} was produced with config {found}, but the current config is {hash}: re-run {producer}",
            path.display()
        ),
        None => bail!("{} has no config header: re-run {producer}", path.display()),
    }
}
