//! File formats: matrices as JSON or CSV, ensembles as JSON lines, and run
//! manifests. All writes go through a temporary file in the target directory
//! and are renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{input, Error, Result};
use crate::growth::GrowthChain;
use crate::matrix::DistanceMatrix;

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Full symmetric matrix with a header row `p0,p1,...`.
pub fn matrix_to_csv(m: &DistanceMatrix) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record((0..m.n()).map(|i| format!("p{i}")))?;
    for row in m.to_full() {
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).map_err(|e| Error::Input(e.to_string()))
}

pub fn matrix_from_csv(text: &str) -> Result<DistanceMatrix> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let n = r.headers()?.len();
    let mut rows = Vec::with_capacity(n);
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Input(format!("row {i}: bad number {s:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.len() != n {
        return input(format!("{} header columns but {} rows", n, rows.len()));
    }
    DistanceMatrix::from_full(&rows)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

/// Matrix JSON `{"n": .., "upper": [..]}`, or CSV when the file ends in `.csv`.
pub fn read_matrix(path: &Path) -> Result<DistanceMatrix> {
    let text = read_text(path)?;
    if is_csv(path) {
        matrix_from_csv(&text)
    } else {
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn matrix_bytes(m: &DistanceMatrix, path: Option<&Path>) -> Result<Vec<u8>> {
    if path.is_some_and(is_csv) {
        Ok(matrix_to_csv(m)?.into_bytes())
    } else {
        Ok(json_line(m)?.into_bytes())
    }
}

/// One JSON document followed by a newline.
pub fn json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string(value)?;
    s.push('\n');
    Ok(s)
}

/// Ensemble as JSON lines, one growth chain per line.
pub fn chains_to_jsonl(chains: &[GrowthChain]) -> Result<String> {
    chains.iter().map(json_line).collect()
}

/// Matrices of an ensemble file. Each non-empty line is a growth chain or a
/// bare matrix record.
pub fn read_ensemble(path: &Path) -> Result<Vec<DistanceMatrix>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| Error::Input(format!("line {}: {e}", i + 1)))?;
        let m = if value.get("steps").is_some() {
            serde_json::from_value::<GrowthChain>(value)?.matrix
        } else {
            serde_json::from_value::<DistanceMatrix>(value)?
        };
        out.push(m);
    }
    if out.is_empty() {
        return input(format!("{} holds no matrices", path.display()));
    }
    Ok(out)
}

/// Write `bytes` to `path` by way of a temporary file and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Vec<String>,
    pub version: String,
    pub seed: u64,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<PathBuf>,
    pub exit_code: i32,
    pub wall_time_secs: f64,
}

/// `<out>.manifest.json` next to an output file.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
