//! Embedding vectors and cosine similarity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmbeddingError {
    #[error("embedding vector must not be empty")]
    Empty,
    #[error("embedding vector has a non-finite value at index {0}")]
    NonFinite(usize),
}

/// A fixed-length vector of finite `f32` components.
///
/// Construction validates the invariants once, so every held value is
/// non-empty and finite for the lifetime of the vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(idx));
        }
        Ok(Self { values })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Euclidean norm, accumulated in `f64`.
    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| {
                let v = f64::from(*v);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        cosine(&self.values, &other.values)
    }
}

impl TryFrom<Vec<f32>> for EmbeddingVector {
    type Error = EmbeddingError;

    fn try_from(values: Vec<f32>) -> Result<Self, Self::Error> {
        EmbeddingVector::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f32> {
    fn from(vector: EmbeddingVector) -> Self {
        vector.values
    }
}

/// Cosine similarity between two equal-length slices, accumulated in `f64`.
///
/// Returns `0.0` when either vector has zero magnitude.
///
/// # Panics
///
/// Panics if the slices differ in length; callers are expected to check
/// dimensions first.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine requires equal dimensions");
    let mut dot = 0.0f64;
    let mut norm_a = 0.0f64;
    let mut norm_b = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        let x = f64::from(*x);
        let y = f64::from(*y);
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    dot / (norm_a.sqrt() * norm_b.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert_eq!(EmbeddingVector::new(vec![]), Err(EmbeddingError::Empty));
        assert_eq!(
            EmbeddingVector::new(vec![1.0, f32::NAN]),
            Err(EmbeddingError::NonFinite(1))
        );
        assert_eq!(
            EmbeddingVector::new(vec![f32::INFINITY]),
            Err(EmbeddingError::NonFinite(0))
        );
    }

    #[test]
    fn cosine_of_identical_vectors_is_one() {
        let v = EmbeddingVector::new(vec![0.3, -1.2, 4.5]).unwrap();
        assert!((v.cosine(&v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_of_orthogonal_vectors_is_zero() {
        let a = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
        let b = EmbeddingVector::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(a.cosine(&b), 0.0);
    }

    #[test]
    fn cosine_of_opposite_vectors_is_minus_one() {
        let a = EmbeddingVector::new(vec![2.0, 1.0]).unwrap();
        let b = EmbeddingVector::new(vec![-2.0, -1.0]).unwrap();
        assert!((a.cosine(&b) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_magnitude_yields_zero() {
        let a = vec![0.0, 0.0];
        let b = vec![1.0, 2.0];
        assert_eq!(cosine(&a, &b), 0.0);
        assert_eq!(cosine(&b, &a), 0.0);
    }

    #[test]
    fn serde_round_trip_is_a_bare_array() {
        let v = EmbeddingVector::new(vec![1.0, 2.5]).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, "[1.0,2.5]");
        let back: EmbeddingVector = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<EmbeddingVector>("[]").is_err());
    }
}
