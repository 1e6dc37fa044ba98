//! Sentence-embedding matrices and the `EMB1` file format.
//!
//! Layout (all little endian): magic `EMB1`, `u32` row count n, `u32`
//! column count d, then n·d `f32` values in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::MetricsError;

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";

/// An n×d matrix of sentence embeddings, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, MetricsError> {
        if values.len() != rows * cols {
            return Err(MetricsError::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite("embedding value"));
        }
        Ok(EmbeddingMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MetricsError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(MetricsError::Shape("ragged rows".into()));
        }
        EmbeddingMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        self.values.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }

    /// Stack two matrices with equal column counts.
    pub fn vstack(&self, other: &EmbeddingMatrix) -> Result<EmbeddingMatrix, MetricsError> {
        if self.cols != other.cols {
            return Err(MetricsError::DimensionMismatch(self.cols, other.cols));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(EmbeddingMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            values,
        })
    }

    pub fn read_emb1<R: Read>(mut reader: R) -> Result<Self, MetricsError> {
        let mut header = [0u8; 12];
        reader
            .read_exact(&mut header)
            .map_err(|_| MetricsError::Format("truncated EMB1 header".into()))?;
        if &header[..4] != EMB1_MAGIC {
            return Err(MetricsError::Format("bad EMB1 magic".into()));
        }
        let rows = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes")) as usize;
        let cols = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| MetricsError::Format("EMB1 size overflow".into()))?;

        let mut body = Vec::new();
        reader.read_to_end(&mut body)?;
        if body.len() != len {
            return Err(MetricsError::Format(format!(
                "EMB1 body has {} bytes, header implies {len}",
                body.len()
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        EmbeddingMatrix::new(rows, cols, values)
    }

    /// Values are narrowed to `f32`.
    pub fn write_emb1<W: Write>(&self, mut writer: W) -> Result<(), MetricsError> {
        let rows = u32::try_from(self.rows).map_err(|_| MetricsError::Format("too many rows".into()))?;
        let cols = u32::try_from(self.cols).map_err(|_| MetricsError::Format("too many columns".into()))?;
        let mut buf = Vec::with_capacity(12 + 4 * self.values.len());
        buf.extend_from_slice(EMB1_MAGIC);
        buf.extend_from_slice(&rows.to_le_bytes());
        buf.extend_from_slice(&cols.to_le_bytes());
        for &v in &self.values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        writer.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MetricsError> {
        let file = std::fs::File::open(path).map_err(|e| MetricsError::File {
            path: path.to_owned(),
            source: e,
        })?;
        EmbeddingMatrix::read_emb1(std::io::BufReader::new(file))
    }

    pub fn save(&self, path: &Path) -> Result<(), MetricsError> {
        let mut buf = Vec::new();
        self.write_emb1(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| MetricsError::File {
            path: path.to_owned(),
            source: e,
        })
    }
}
