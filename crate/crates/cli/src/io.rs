//! Reading inputs ("-" is stdin) and atomic writes ("-" is stdout).

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use tomo_core::field::io::GridFile;

pub fn read_bytes(path: &str) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    if path == "-" {
        std::io::stdin().read_to_end(&mut buf).context("reading stdin")?;
    } else {
        buf = std::fs::read(path).with_context(|| format!("reading {path}"))?;
    }
    Ok(buf)
}

pub fn read_grid_file(path: &str) -> Result<GridFile> {
    let buf = read_bytes(path)?;
    GridFile::read_from(&mut buf.as_slice()).with_context(|| format!("decoding {path}"))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &str) -> Result<T> {
    let buf = read_bytes(path)?;
    serde_json::from_slice(&buf).with_context(|| format!("decoding {path}"))
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so the target never holds a partial file.
pub fn write_atomic(path: &str, bytes: &[u8]) -> Result<()> {
    if path == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes)?;
        out.flush()?;
        return Ok(());
    }
    let target = Path::new(path);
    let dir = match target.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(target).with_context(|| format!("writing {path}"))?;
    Ok(())
}

pub fn write_grid_file(path: &str, g: &GridFile) -> Result<()> {
    let mut buf = Vec::new();
    g.write_to(&mut buf)?;
    write_atomic(path, &buf)
}

pub fn write_json<T: serde::Serialize>(path: &str, v: &T) -> Result<()> {
    let mut buf = serde_json::to_vec_pretty(v)?;
    buf.push(b'\n');
    write_atomic(path, &buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_the_target() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        let ps = p.to_str().unwrap();
        write_atomic(ps, b"first").unwrap();
        write_atomic(ps, b"second").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn unwritable_targets_fail() {
        assert!(write_atomic("/nonexistent-dir/x/y.grd", b"x").is_err());
    }
}
