//! File formats: JSON documents whose numeric arrays are either inline or
//! stored in a companion binary file.
//!
//! Binary layout: the 8-byte magic `LLABARR1`, then records of
//! `rows: u64 LE, cols: u64 LE, rows·cols f64 LE` in row-major order.
//! JSON references a record by byte offset and repeats its shape.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"LLABARR1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Binary,
}

/// A matrix inline in JSON or a reference into a binary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArrayRef {
    Inline {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    },
    External {
        file: String,
        offset: u64,
        rows: usize,
        cols: usize,
    },
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn from_row_major(rows: usize, cols: usize, data: &[f64], origin: &str) -> Result<DMatrix<f64>> {
    if data.len() != rows * cols {
        return Err(Error::Format {
            path: origin.to_string(),
            reason: format!("array of {} values declared {rows}×{cols}", data.len()),
        });
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

/// Serde adapter writing a matrix as `{rows, cols, data}` (row-major).
pub mod matrix {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        Repr {
            rows: m.nrows(),
            cols: m.ncols(),
            data: row_major(m),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
        let r = Repr::deserialize(d)?;
        from_row_major(r.rows, r.cols, &r.data, "inline matrix").map_err(serde::de::Error::custom)
    }
}

/// Collects arrays for one document.
#[derive(Debug)]
pub struct ArrayWriter {
    format: OutputFormat,
    file_name: String,
    buffer: Vec<u8>,
}

impl ArrayWriter {
    /// `file_name` is the companion binary file, relative to the JSON document.
    pub fn new(format: OutputFormat, file_name: impl Into<String>) -> Self {
        Self {
            format,
            file_name: file_name.into(),
            buffer: BINARY_MAGIC.to_vec(),
        }
    }

    pub fn put(&mut self, m: &DMatrix<f64>) -> ArrayRef {
        match self.format {
            OutputFormat::Json => ArrayRef::Inline {
                rows: m.nrows(),
                cols: m.ncols(),
                data: row_major(m),
            },
            OutputFormat::Binary => {
                let offset = self.buffer.len() as u64;
                self.buffer.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
                self.buffer.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
                for v in row_major(m) {
                    self.buffer.extend_from_slice(&v.to_le_bytes());
                }
                ArrayRef::External {
                    file: self.file_name.clone(),
                    offset,
                    rows: m.nrows(),
                    cols: m.ncols(),
                }
            }
        }
    }

    /// Write the companion file next to `json_path` when anything was stored.
    pub fn finish(self, json_path: &Path) -> Result<()> {
        if self.format == OutputFormat::Binary && self.buffer.len() > BINARY_MAGIC.len() {
            let path = sibling(json_path, &self.file_name);
            std::fs::write(&path, &self.buffer).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn sibling(json_path: &Path, name: &str) -> PathBuf {
    json_path.parent().unwrap_or_else(|| Path::new(".")).join(name)
}

/// Resolves array references relative to a JSON document.
#[derive(Debug)]
pub struct ArrayReader {
    base: PathBuf,
    files: HashMap<String, Vec<u8>>,
}

impl ArrayReader {
    pub fn new(json_path: &Path) -> Self {
        Self {
            base: json_path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf(),
            files: HashMap::new(),
        }
    }

    pub fn get(&mut self, r: &ArrayRef) -> Result<DMatrix<f64>> {
        match r {
            ArrayRef::Inline { rows, cols, data } => from_row_major(*rows, *cols, data, "inline array"),
            ArrayRef::External {
                file,
                offset,
                rows,
                cols,
            } => {
                if !self.files.contains_key(file) {
                    let path = self.base.join(file);
                    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                    if bytes.len() < 8 || &bytes[..8] != BINARY_MAGIC {
                        return Err(Error::Format {
                            path: path.display().to_string(),
                            reason: "missing binary array magic".into(),
                        });
                    }
                    self.files.insert(file.clone(), bytes);
                }
                let bytes = &self.files[file];
                let bad = |reason: String| Error::Format {
                    path: file.clone(),
                    reason,
                };
                let start = *offset as usize;
                let word = |i: usize| -> Result<[u8; 8]> {
                    bytes
                        .get(i..i + 8)
                        .and_then(|s| s.try_into().ok())
                        .ok_or_else(|| bad(format!("truncated at byte {i}")))
                };
                let hr = u64::from_le_bytes(word(start)?) as usize;
                let hc = u64::from_le_bytes(word(start + 8)?) as usize;
                if (hr, hc) != (*rows, *cols) {
                    return Err(bad(format!(
                        "record at {offset} is {hr}×{hc}, reference says {rows}×{cols}"
                    )));
                }
                let data = (0..hr * hc)
                    .map(|i| word(start + 16 + 8 * i).map(f64::from_le_bytes))
                    .collect::<Result<Vec<_>>>()?;
                from_row_major(hr, hc, &data, file)
            }
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}
