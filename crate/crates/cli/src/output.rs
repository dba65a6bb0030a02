//! CSV rows, atomic file writes and digests.

use std::io::{self, Write};
use std::path::Path;

use pinlab_core::estimators::EstimateRecord;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::RunError;

pub const CSV_HEADER: [&str; 8] = ["name", "h", "n", "replicas", "point", "std_error", "method", "seed"];

/// 17 significant digits; parses back to the same bits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn records_to_csv(records: &[EstimateRecord]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in records {
        w.write_record([
            r.name.clone(),
            format_float(r.h),
            r.n.to_string(),
            r.replicas.to_string(),
            format_float(r.point),
            format_float(r.std_error),
            r.method.clone(),
            r.seed.to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn parse_csv(bytes: &[u8]) -> Result<Vec<EstimateRecord>, RunError> {
    let bad = |e: String| RunError::Config(format!("csv: {e}"));
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = r.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let float = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s}: {e}")));
    let int = |s: &str| s.parse::<u64>().map_err(|e| bad(format!("{s}: {e}")));
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        out.push(EstimateRecord {
            name: row[0].to_string(),
            h: float(&row[1])?,
            n: int(&row[2])? as usize,
            replicas: int(&row[3])? as usize,
            point: float(&row[4])?,
            std_error: float(&row[5])?,
            method: row[6].to_string(),
            seed: int(&row[7])?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn emit(dir: &Path, name: &str, bytes: &[u8]) -> Result<FileDigest, RunError> {
    let path = dir.join(name);
    write_atomic(&path, bytes).map_err(|source| RunError::Io { path, source })?;
    Ok(FileDigest { file: name.into(), bytes: bytes.len(), sha256: sha256_hex(bytes) })
}

pub fn emit_csv(dir: &Path, name: &str, records: &[EstimateRecord]) -> Result<FileDigest, RunError> {
    emit(dir, name, &records_to_csv(records))
}
