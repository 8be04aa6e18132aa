//! Appearance embeddings and the provider abstraction over them.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math;
use crate::Result;

/// Fixed-dimension real appearance vector for one detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vec: Vec<f64>,
}

impl Embedding {
    pub fn new(vec: Vec<f64>) -> Self {
        Embedding { vec }
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vec
    }

    pub fn is_finite(&self) -> bool {
        self.vec.iter().all(|x| x.is_finite())
    }

    /// True when the Euclidean norm is within `tol` of one.
    pub fn is_unit_norm(&self, tol: f64) -> bool {
        math::abs(math::l2_norm(&self.vec) - 1.0) <= tol
    }
}

/// Source of per-detection appearance vectors, keyed by `(frame, det_index)`.
pub trait EmbeddingProvider {
    fn embedding(&self, frame: u32, det_index: u32) -> Option<&Embedding>;

    /// Whether the provider guarantees unit-norm vectors.
    fn normalized(&self) -> bool {
        false
    }
}

/// In-memory table of embeddings with a fixed dimension.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    map: BTreeMap<(u32, u32), Embedding>,
    dim: usize,
    normalized: bool,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable { map: BTreeMap::new(), dim, normalized: false }
    }

    pub fn new_normalized(dim: usize) -> Self {
        EmbeddingTable { map: BTreeMap::new(), dim, normalized: true }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn insert(&mut self, frame: u32, det_index: u32, e: Embedding) -> Result<()> {
        if e.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: e.dim() });
        }
        if self.map.insert((frame, det_index), e).is_some() {
            return Err(Error::DuplicateEmbedding { frame, det_index });
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u32, u32), &Embedding)> {
        self.map.iter()
    }
}

impl EmbeddingProvider for EmbeddingTable {
    fn embedding(&self, frame: u32, det_index: u32) -> Option<&Embedding> {
        self.map.get(&(frame, det_index))
    }

    fn normalized(&self) -> bool {
        self.normalized
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_keys_are_rejected() {
        let mut t = EmbeddingTable::new(2);
        t.insert(1, 0, Embedding::new(alloc::vec![1.0, 0.0])).unwrap();
        let err = t.insert(1, 0, Embedding::new(alloc::vec![0.0, 1.0]));
        assert_eq!(err, Err(Error::DuplicateEmbedding { frame: 1, det_index: 0 }));
    }

    #[test]
    fn dimension_is_enforced() {
        let mut t = EmbeddingTable::new(3);
        let err = t.insert(1, 0, Embedding::new(alloc::vec![1.0]));
        assert_eq!(err, Err(Error::DimensionMismatch { expected: 3, got: 1 }));
    }

    #[test]
    fn unit_norm_check() {
        assert!(Embedding::new(alloc::vec![0.6, 0.8]).is_unit_norm(1e-6));
        assert!(!Embedding::new(alloc::vec![0.6, 0.9]).is_unit_norm(1e-6));
    }
}
