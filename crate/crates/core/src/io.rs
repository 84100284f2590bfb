//! File formats for stored data, queries, embeddings and search outcomes.
//!
//! * Bit vectors: `.bin` files hold rows of `ceil(cols/8)` LSB-first packed
//!   bytes; any other extension is text with one `0`/`1` string per line
//!   (the first CSV field of each line is used, `#` lines are skipped).
//! * Embeddings: `.bin` files hold row-major little-endian `f32`; otherwise
//!   CSV with one embedding per line.
//! * Recommendation test instances: JSON lines, one [`TestInstance`] each.
//! * Search outcomes: JSON lines, one [`OutcomeRecord`] per query per trial.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::camarray::SearchOutcome;
use crate::encode::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::experiments::TestInstance;

fn is_binary(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("bin"))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Reads bit vectors; `cols` is required for packed binary files and checked
/// against text rows when given.
pub fn read_bit_vectors(path: &Path, cols: Option<usize>) -> Result<Vec<BitVector>> {
    if is_binary(path) {
        let cols = cols
            .ok_or_else(|| Error::config("cols", "packed binary input needs the vector width"))?;
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let stride = cols.div_ceil(8);
        if stride == 0 || bytes.len() % stride != 0 {
            return Err(Error::Data(format!(
                "{}: {} bytes is not a whole number of {stride}-byte rows",
                path.display(),
                bytes.len()
            )));
        }
        return bytes
            .chunks(stride)
            .map(|row| BitVector::from_packed_bytes(row, cols))
            .collect();
    }
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() || field.starts_with('#') {
            continue;
        }
        let v = BitVector::parse01(field)
            .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), n + 1)))?;
        if let Some(c) = cols {
            if v.width() != c {
                return Err(Error::WidthMismatch {
                    index: out.len(),
                    expected: c,
                    found: v.width(),
                });
            }
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_bit_vectors(path: &Path, vectors: &[BitVector]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let result = if is_binary(path) {
        vectors
            .iter()
            .try_for_each(|v| w.write_all(&v.to_packed_bytes()))
    } else {
        vectors.iter().try_for_each(|v| writeln!(w, "{v}"))
    };
    result
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads an embedding matrix; `dim` is required for binary files.
pub fn read_embeddings(path: &Path, dim: Option<usize>) -> Result<EmbeddingMatrix> {
    if is_binary(path) {
        let dim =
            dim.ok_or_else(|| Error::config("dim", "binary embeddings need the dimension"))?;
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() % 4 != 0 {
            return Err(Error::Data(format!(
                "{}: length is not a multiple of 4 bytes",
                path.display()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        return EmbeddingMatrix::new(dim, data);
    }
    let reader = BufReader::new(open(path)?);
    let mut data = Vec::new();
    let mut width = dim;
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f32> = line
            .split(',')
            .map(|s| s.trim().parse::<f32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), n + 1)))?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::DimensionMismatch {
                    expected: w,
                    found: row.len(),
                })
            }
            _ => {}
        }
        data.extend(row);
    }
    EmbeddingMatrix::new(width.unwrap_or(1), data)
}

pub fn write_embeddings(path: &Path, matrix: &EmbeddingMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let result = if is_binary(path) {
        matrix
            .data
            .iter()
            .try_for_each(|x| w.write_all(&x.to_le_bytes()))
    } else {
        (0..matrix.len()).try_for_each(|i| {
            let row: Vec<String> = matrix.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", row.join(","))
        })
    };
    result
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_instances(path: &Path) -> Result<Vec<TestInstance>> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: TestInstance = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(inst);
    }
    Ok(out)
}

pub fn write_instances(path: &Path, instances: &[TestInstance]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for inst in instances {
        let line = serde_json::to_string(inst).expect("instances serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One JSON-lines record of a search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub query: usize,
    pub trial: usize,
    pub retrieved: Vec<usize>,
    pub energy_pj: f64,
    pub latency_ns: f64,
}

impl OutcomeRecord {
    pub fn new(query: usize, trial: usize, outcome: &SearchOutcome) -> Self {
        OutcomeRecord {
            query,
            trial,
            retrieved: outcome.retrieved.clone(),
            energy_pj: outcome.energy_pj,
            latency_ns: outcome.latency * 1e9,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("outcome records serialize")
    }
}
