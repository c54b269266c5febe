//! On-disk format: one JSON header line, then the payload.
//!
//! ```text
//! {"format":"superheat-grid","version":1,"geometry":{...},"payload":"f64le"}
//! <len × 8 bytes little-endian>
//! ```
//! or `"payload":"csv"` followed by one value per line in `{:.16e}`, which
//! round-trips every `f64` exactly.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Geometry, GridError, GridField};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad header: {0}")]
    Header(String),
    #[error("bad payload: {0}")]
    Payload(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Payload {
    F64le,
    Csv,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    geometry: Geometry,
    payload: Payload,
}

const FORMAT: &str = "superheat-grid";

pub fn write_grid(field: &GridField, mut out: impl Write, payload: Payload) -> Result<(), IoError> {
    let header = Header { format: FORMAT.into(), version: 1, geometry: field.geometry.clone(), payload };
    let line = serde_json::to_string(&header).map_err(|e| IoError::Header(e.to_string()))?;
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    match payload {
        Payload::F64le => {
            let mut buf = Vec::with_capacity(8 * field.len());
            for v in &field.values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            out.write_all(&buf)?;
        }
        Payload::Csv => {
            for v in &field.values {
                writeln!(out, "{v:.16e}")?;
            }
        }
    }
    Ok(())
}

pub fn read_grid(input: impl Read) -> Result<GridField, IoError> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end()).map_err(|e| IoError::Header(e.to_string()))?;
    if header.format != FORMAT {
        return Err(IoError::Header(format!("unknown format '{}'", header.format)));
    }
    header.geometry.validate()?;
    let n = header.geometry.len();
    let values = match header.payload {
        Payload::F64le => {
            let mut bytes = Vec::new();
            reader.read_to_end(&mut bytes)?;
            if bytes.len() != 8 * n {
                return Err(IoError::Payload(format!("expected {} bytes, found {}", 8 * n, bytes.len())));
            }
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
        }
        Payload::Csv => {
            let mut v = Vec::with_capacity(n);
            for l in reader.lines() {
                let l = l?;
                let t = l.trim();
                if t.is_empty() {
                    continue;
                }
                v.push(t.parse::<f64>().map_err(|e| IoError::Payload(format!("'{t}': {e}")))?);
            }
            v
        }
    };
    Ok(GridField::new(header.geometry, values)?)
}

pub fn save(field: &GridField, path: &Path, payload: Payload) -> Result<(), IoError> {
    let f = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_grid(field, &mut w, payload)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<GridField, IoError> {
    read_grid(fs::File::open(path)?)
}
