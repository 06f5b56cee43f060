//! MHDB field dumps and trajectory manifests.

use super::field::ScalarField;
use super::grid::{Grid, GridKind, Stretching};
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"MHDB";
pub const VERSION: u32 = 1;

pub fn encode_mhdb(f: &ScalarField) -> Vec<u8> {
    let g = &f.grid;
    let mut b = Vec::with_capacity(40 + 8 * f.values.len());
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.extend_from_slice(&g.kind.code().to_le_bytes());
    b.extend_from_slice(&(g.nx as u32).to_le_bytes());
    b.extend_from_slice(&(g.ny as u32).to_le_bytes());
    b.extend_from_slice(&g.length.to_le_bytes());
    b.extend_from_slice(&g.stretching.code().to_le_bytes());
    b.extend_from_slice(&g.stretching.beta().to_le_bytes());
    for v in &f.values {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b
}

pub fn decode_mhdb(bytes: &[u8], quantity: &str) -> Result<ScalarField> {
    let mut r = bytes;
    let mut take = |n: usize| -> Result<&[u8]> {
        if r.len() < n {
            return Err(Error::Format("truncated MHDB stream".into()));
        }
        let (a, b) = r.split_at(n);
        r = b;
        Ok(a)
    };
    if take(4)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
    let f64_at = |s: &[u8]| f64::from_le_bytes(s.try_into().unwrap());
    let version = u32_at(take(4)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = match u32_at(take(4)?) {
        0 => GridKind::Physical,
        1 => GridKind::Layer,
        k => return Err(Error::Format(format!("unknown grid kind {k}"))),
    };
    let nx = u32_at(take(4)?) as usize;
    let ny = u32_at(take(4)?) as usize;
    let length = f64_at(take(8)?);
    let code = u32_at(take(4)?);
    let beta = f64_at(take(8)?);
    let stretching = Stretching::from_code(code, beta)?;
    let grid = Grid::new(kind, nx, ny, length, stretching)?;
    let body = take(8 * nx * ny)?;
    let values = body.chunks_exact(8).map(f64_at).collect();
    ScalarField::new(grid, values, quantity)
}

pub fn write_mhdb(path: &Path, f: &ScalarField) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&encode_mhdb(f))?;
    Ok(())
}

pub fn read_mhdb(path: &Path) -> Result<ScalarField> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let q = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("field")
        .to_string();
    decode_mhdb(&buf, &q)
}

/// One line per stored file: `time<TAB>quantity<TAB>file`.
pub fn write_manifest(path: &Path, entries: &[(f64, String, String)]) -> Result<()> {
    let mut s = String::from("# time\tquantity\tfile\n");
    for (t, q, f) in entries {
        s.push_str(&format!("{t:.17e}\t{q}\t{f}\n"));
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<(f64, String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(Error::Format(format!("bad manifest line: {line}")));
        }
        let t = parts[0]
            .parse()
            .map_err(|_| Error::Format(format!("bad time in manifest: {}", parts[0])))?;
        out.push((t, parts[1].to_string(), parts[2].to_string()));
    }
    Ok(out)
}

/// Dump a set of time-indexed named fields into `dir` with a manifest.
pub fn dump_series(
    dir: &Path,
    prefix: &str,
    frames: &[(f64, Vec<&ScalarField>)],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (n, (t, fields)) in frames.iter().enumerate() {
        for f in fields {
            let name = format!("{prefix}_{}_{n:05}.mhdb", f.quantity.replace(' ', "_"));
            write_mhdb(&dir.join(&name), f)?;
            entries.push((*t, f.quantity.clone(), name));
        }
    }
    write_manifest(&dir.join(format!("{prefix}_manifest.txt")), &entries)
}
