//! Loss-free image and text encodings of coverage bitmaps.
//!
//! PGM is binary (P5) with 255 for LoS and 0 for NLoS; width is the column
//! (y) count and height the row (x) count. CSV is one `0`/`1` per cell,
//! comma-separated, one grid row per line. Both decoders restore the exact
//! bits the encoders wrote.

use crate::grid::Grid;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("not a binary PGM: expected a P5 header")]
    BadMagic,
    #[error("PGM header is malformed")]
    BadHeader,
    #[error("PGM maxval must be 255, got {0}")]
    BadMaxval(u32),
    #[error("payload holds {got} cells, header promises {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error("cell value {0:?} is neither 0 nor a full-scale 1")]
    BadCell(String),
    #[error("rows have inconsistent lengths")]
    Ragged,
    #[error("empty input")]
    Empty,
}

pub fn encode_pgm(bits: &Grid<bool>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", bits.cols(), bits.rows()).into_bytes();
    out.extend(bits.iter().map(|&b| if b { 255u8 } else { 0u8 }));
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Grid<bool>, CodecError> {
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<Vec<u8>, CodecError> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(CodecError::BadHeader);
        }
        Ok(bytes[start..pos].to_vec())
    };
    if token(bytes)? != b"P5" {
        return Err(CodecError::BadMagic);
    }
    let parse = |t: Vec<u8>| -> Result<usize, CodecError> {
        std::str::from_utf8(&t)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(CodecError::BadHeader)
    };
    let cols = parse(token(bytes)?)?;
    let rows = parse(token(bytes)?)?;
    let maxval = parse(token(bytes)?)?;
    if maxval != 255 {
        return Err(CodecError::BadMaxval(maxval as u32));
    }
    // Exactly one whitespace byte separates the header from the payload.
    let payload = &bytes[pos + 1..];
    if payload.len() != rows * cols {
        return Err(CodecError::SizeMismatch { got: payload.len(), want: rows * cols });
    }
    let data = payload
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            255 => Ok(true),
            other => Err(CodecError::BadCell(other.to_string())),
        })
        .collect::<Result<Vec<bool>, _>>()?;
    Grid::from_vec(rows, cols, data).ok_or(CodecError::Empty)
}

pub fn encode_csv(bits: &Grid<bool>) -> String {
    let mut out = String::with_capacity(bits.len() * 2 + bits.rows());
    for r in 0..bits.rows() {
        for (c, &b) in bits.row(r).iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            out.push(if b { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

pub fn decode_csv(text: &str) -> Result<Grid<bool>, CodecError> {
    let mut rows: Vec<Vec<bool>> = Vec::new();
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| match cell.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(CodecError::BadCell(other.to_string())),
            })
            .collect::<Result<Vec<bool>, _>>()?;
        rows.push(row);
    }
    let n_rows = rows.len();
    if n_rows == 0 {
        return Err(CodecError::Empty);
    }
    let n_cols = rows[0].len();
    if rows.iter().any(|r| r.len() != n_cols) {
        return Err(CodecError::Ragged);
    }
    Grid::from_vec(n_rows, n_cols, rows.into_iter().flatten().collect())
        .ok_or(CodecError::Empty)
}
