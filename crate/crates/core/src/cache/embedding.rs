use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance on the Euclidean norm of a stored embedding.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Unit-norm vector in the shared text/image similarity space.
///
/// Values are stored as `f32` behind an `Arc` so that requests, cache entries
/// and trace records can share the same buffer.
#[derive(Clone, PartialEq)]
pub struct Embedding(Arc<[f32]>);

impl Embedding {
    /// Scales `raw` to unit length. The norm is accumulated in `f64`.
    pub fn normalize(raw: &[f32]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidEmbedding("empty vector".into()));
        }
        if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidEmbedding(format!("non-finite component at index {i}")));
        }
        let norm = raw.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidEmbedding("zero vector".into()));
        }
        Ok(Embedding(raw.iter().map(|&v| (f64::from(v) / norm) as f32).collect()))
    }

    /// Same as [`Embedding::normalize`] but starting from `f64` components.
    pub fn normalize_f64(raw: &[f64]) -> Result<Self> {
        if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidEmbedding(format!("non-finite component at index {i}")));
        }
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if raw.is_empty() || norm == 0.0 {
            return Err(Error::InvalidEmbedding("zero vector".into()));
        }
        Ok(Embedding(raw.iter().map(|v| (v / norm) as f32).collect()))
    }

    /// Accepts a vector that is already unit norm (within [`NORM_TOLERANCE`])
    /// without rescaling it, so stored values round-trip bit-for-bit.
    pub fn from_unit(values: Vec<f32>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidEmbedding(format!("non-finite component at index {i}")));
        }
        let norm = norm_f64(&values);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidEmbedding(format!("expected unit norm, got {norm}")));
        }
        Ok(Embedding(values.into()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm_f64(&self.0)
    }
}

impl std::fmt::Debug for Embedding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Embedding(dim={}", self.0.len())?;
        for v in self.0.iter().take(4) {
            write!(f, ", {v:.4}")?;
        }
        if self.0.len() > 4 {
            write!(f, ", ..")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Embedding {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.as_ref().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Embedding {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f32>::deserialize(deserializer)?;
        Embedding::from_unit(values).map_err(serde::de::Error::custom)
    }
}

fn norm_f64(values: &[f32]) -> f64 {
    values.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
}

/// Cosine similarity of two unit embeddings, i.e. their dot product.
pub fn cosine(q: &Embedding, e: &Embedding) -> Result<f64> {
    if q.dim() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            actual: e.dim(),
        });
    }
    Ok(dot(q.as_slice(), e.as_slice()))
}

/// Dot product with eight independent lanes so the inner loop vectorizes.
/// Callers guarantee equal lengths.
#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            lanes[i] += x[i] * y[i];
        }
    }
    let mut tail = 0f32;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    let s = ((lanes[0] + lanes[4]) + (lanes[1] + lanes[5])) + ((lanes[2] + lanes[6]) + (lanes[3] + lanes[7])) + tail;
    f64::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_scales_to_unit() {
        let e = Embedding::normalize(&[3.0, 4.0]).unwrap();
        assert!((f64::from(e.as_slice()[0]) - 0.6).abs() < 1e-7);
        assert!((f64::from(e.as_slice()[1]) - 0.8).abs() < 1e-7);
        assert!((e.norm() - 1.0).abs() < NORM_TOLERANCE);
    }

    #[test]
    fn normalize_keeps_unit_vector() {
        let mut v = vec![0.0; 16];
        v[0] = 1.0;
        let e = Embedding::normalize(&v).unwrap();
        assert_eq!(e.as_slice(), v.as_slice());
    }

    #[test]
    fn normalize_rejects_bad_input() {
        assert!(Embedding::normalize(&[0.0, 0.0]).is_err());
        assert!(Embedding::normalize(&[1.0, f32::NAN]).is_err());
        assert!(Embedding::normalize(&[f32::INFINITY, 0.0]).is_err());
        assert!(Embedding::normalize(&[]).is_err());
    }

    #[test]
    fn cosine_examples() {
        let x = Embedding::normalize(&[1.0, 0.0]).unwrap();
        let y = Embedding::normalize(&[0.0, 1.0]).unwrap();
        assert_eq!(cosine(&x, &x).unwrap(), 1.0);
        assert_eq!(cosine(&x, &y).unwrap(), 0.0);
        let a = Embedding::normalize(&[3.0, 4.0]).unwrap();
        let b = Embedding::normalize(&[4.0, 3.0]).unwrap();
        // 24/25 by hand
        assert!((cosine(&a, &b).unwrap() - 0.96).abs() < 1e-6);
    }

    #[test]
    fn cosine_rejects_dimension_mismatch() {
        let x = Embedding::normalize(&[1.0, 0.0]).unwrap();
        let y = Embedding::normalize(&[1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            cosine(&x, &y),
            Err(Error::DimensionMismatch { expected: 2, actual: 3 })
        ));
    }

    #[test]
    fn from_unit_rejects_non_unit() {
        assert!(Embedding::from_unit(vec![1.0, 1.0]).is_err());
        assert!(Embedding::from_unit(vec![0.6, 0.8]).is_ok());
    }

    #[test]
    fn dot_matches_naive_sum_for_odd_lengths() {
        let a: Vec<f32> = (0..37).map(|i| (i as f32 * 0.37).sin()).collect();
        let b: Vec<f32> = (0..37).map(|i| (i as f32 * 0.11).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn raw_vec() -> impl Strategy<Value = Vec<f32>> {
            prop::collection::vec(-10.0f32..10.0, 1..64).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
        }

        proptest! {
            #[test]
            fn normalized_has_unit_norm(v in raw_vec()) {
                let e = Embedding::normalize(&v).unwrap();
                prop_assert!((e.norm() - 1.0).abs() < NORM_TOLERANCE);
            }

            #[test]
            fn cosine_bounded_and_self_similar((a, b) in (1usize..64).prop_flat_map(|d| (
                prop::collection::vec(-10.0f32..10.0, d),
                prop::collection::vec(-10.0f32..10.0, d),
            ))) {
                prop_assume!(a.iter().any(|x| x.abs() > 1e-3) && b.iter().any(|x| x.abs() > 1e-3));
                let ea = Embedding::normalize(&a).unwrap();
                let eb = Embedding::normalize(&b).unwrap();
                prop_assert!(cosine(&ea, &eb).unwrap().abs() <= 1.0 + 1e-6);
                prop_assert!((cosine(&ea, &ea).unwrap() - 1.0).abs() <= 1e-6);
            }
        }
    }
}
