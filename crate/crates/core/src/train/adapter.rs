//! The trained artifact: a square matrix applied to frozen embeddings.
//!
//! Applying an adapter means projecting the unit embedding through the
//! matrix and renormalizing. [`AdaptedProvider`] folds that into the
//! provider interface so indexing and query paths transform vectors
//! identically.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::index::dense::{dot, EmbeddingVector};
use crate::index::{EmbeddingProvider, ProviderError};

use super::TrainError;

const MAGIC: &[u8; 5] = b"TADP1";

/// Dense row-major matrix mapping embeddings of dimension `cols` to
/// dimension `rows`. Training produces square matrices, but the type
/// supports rectangular ones.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterMatrix {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl AdapterMatrix {
    /// Validate shape and finiteness.
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self, TrainError> {
        if rows == 0 || cols == 0 {
            return Err(TrainError::InvalidAdapter("zero-sized matrix".into()));
        }
        if weights.len() != rows * cols {
            return Err(TrainError::InvalidAdapter(format!(
                "{} weights for a {rows}x{cols} matrix",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(TrainError::InvalidAdapter("non-finite weight".into()));
        }
        Ok(AdapterMatrix { rows, cols, weights })
    }

    /// The identity adapter: applying it leaves embeddings unchanged.
    pub fn identity(dim: usize) -> Self {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        AdapterMatrix { rows: dim, cols: dim, weights }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }

    pub(crate) fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| dot(&self.weights[r * self.cols..(r + 1) * self.cols], x))
            .collect()
    }
}

/// Project an embedding through the adapter and renormalize. Fails if the
/// projection collapses to (numerically) zero.
pub fn apply_adapter(
    adapter: &AdapterMatrix,
    v: &EmbeddingVector,
) -> Result<EmbeddingVector, TrainError> {
    if v.dim() != adapter.cols {
        return Err(TrainError::DimMismatch(adapter.cols, v.dim()));
    }
    Ok(EmbeddingVector::unit_from(adapter.matvec(v.values()))?)
}

/// An embedding provider with an adapter folded in: inner embeddings are
/// normalized, projected, and handed back for final normalization, which
/// is exactly [`apply_adapter`]'s arithmetic.
pub struct AdaptedProvider<'a> {
    inner: &'a dyn EmbeddingProvider,
    adapter: &'a AdapterMatrix,
}

impl<'a> AdaptedProvider<'a> {
    pub fn new(
        inner: &'a dyn EmbeddingProvider,
        adapter: &'a AdapterMatrix,
    ) -> Result<Self, TrainError> {
        if adapter.cols != inner.dim() {
            return Err(TrainError::DimMismatch(adapter.cols, inner.dim()));
        }
        Ok(AdaptedProvider { inner, adapter })
    }
}

impl EmbeddingProvider for AdaptedProvider<'_> {
    fn dim(&self) -> usize {
        self.adapter.rows
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let raw = self.inner.embed_batch(texts)?;
        raw.into_iter()
            .enumerate()
            .map(|(i, v)| {
                let unit = EmbeddingVector::unit_from(v)
                    .map_err(|_| ProviderError::Degenerate(i))?;
                Ok(self.adapter.matvec(unit.values()))
            })
            .collect()
    }
}

/// Write an adapter: magic, rows, cols (u32 little-endian), then row-major
/// f32 weights.
pub fn save_adapter(adapter: &AdapterMatrix, path: impl AsRef<Path>) -> Result<(), TrainError> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    w.write_all(MAGIC)?;
    w.write_all(&(adapter.rows as u32).to_le_bytes())?;
    w.write_all(&(adapter.cols as u32).to_le_bytes())?;
    for &weight in &adapter.weights {
        w.write_all(&(weight as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read an adapter written by [`save_adapter`].
pub fn load_adapter(path: impl AsRef<Path>) -> Result<AdapterMatrix, TrainError> {
    let mut r = BufReader::new(File::open(path.as_ref())?);
    let mut magic = [0u8; 5];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(TrainError::InvalidAdapter("bad magic; not an adapter file".into()));
    }
    let mut b4 = [0u8; 4];
    read_exact(&mut r, &mut b4)?;
    let rows = u32::from_le_bytes(b4) as usize;
    read_exact(&mut r, &mut b4)?;
    let cols = u32::from_le_bytes(b4) as usize;
    if rows == 0 || cols == 0 || rows > 1 << 16 || cols > 1 << 16 {
        return Err(TrainError::InvalidAdapter(format!("implausible shape {rows}x{cols}")));
    }
    let mut weights = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        read_exact(&mut r, &mut b4)?;
        weights.push(f64::from(f32::from_le_bytes(b4)));
    }
    let mut extra = [0u8; 1];
    match r.read_exact(&mut extra) {
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {}
        Ok(()) => return Err(TrainError::InvalidAdapter("trailing data".into())),
        Err(e) => return Err(TrainError::Io(e)),
    }
    AdapterMatrix::new(rows, cols, weights)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<(), TrainError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            TrainError::InvalidAdapter("unexpected end of file".into())
        } else {
            TrainError::Io(e)
        }
    })
}
