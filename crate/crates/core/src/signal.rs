//! Sparse signals and dense sketches.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::rng_from_seed;
use crate::scalar::Scalar;

/// Length-`n` vector holding only its nonzero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal<T> {
    n: usize,
    entries: BTreeMap<usize, T>,
}

impl<T: Scalar> SparseSignal<T> {
    pub fn zeros(n: usize) -> Self {
        SparseSignal {
            n,
            entries: BTreeMap::new(),
        }
    }

    /// Builds a signal from `(index, value)` pairs. Exact zeros are dropped;
    /// repeated or out-of-range indices are rejected.
    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (usize, T)>) -> Result<Self> {
        let mut out = SparseSignal::zeros(n);
        for (j, v) in entries {
            if j >= n {
                return Err(Error::Validation(format!("index {j} outside [0, {n})")));
            }
            if out.entries.contains_key(&j) {
                return Err(Error::Validation(format!("index {j} given twice")));
            }
            out.set(j, v);
        }
        Ok(out)
    }

    pub fn from_dense(values: &[T]) -> Self {
        let mut out = SparseSignal::zeros(values.len());
        for (j, &v) in values.iter().enumerate() {
            out.set(j, v);
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, j: usize) -> T {
        self.entries.get(&j).copied().unwrap_or(T::ZERO)
    }

    pub fn set(&mut self, j: usize, v: T) {
        assert!(j < self.n, "index {j} outside [0, {})", self.n);
        if v == T::ZERO {
            self.entries.remove(&j);
        } else {
            self.entries.insert(j, v);
        }
    }

    pub fn add(&mut self, j: usize, v: T) {
        let cur = self.get(j);
        self.set(j, cur + v);
    }

    /// Nonzero entries in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.entries.iter().map(|(&j, &v)| (j, v))
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries.keys().copied().collect()
    }

    /// `||x||_0`.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.values().map(|v| v.to_f64().abs()).sum()
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::ZERO; self.n];
        for (&j, &v) in &self.entries {
            out[j] = v;
        }
        out
    }

    /// Entry-wise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let mut out = self.clone();
        for (j, v) in other.iter() {
            out.add(j, -v);
        }
        Ok(out)
    }

    pub fn scale(&self, c: T) -> Self {
        let mut out = SparseSignal::zeros(self.n);
        for (j, v) in self.iter() {
            out.set(j, v * c);
        }
        out
    }

    /// Copy keeping only the coordinates in `indices`.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        let mut out = SparseSignal::zeros(self.n);
        for &j in indices {
            out.set(j, self.get(j));
        }
        out
    }
}

/// Dense length-`m` measurement vector `y = A x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sketch<T> {
    values: Vec<T>,
}

impl<T: Scalar> Sketch<T> {
    pub fn new(values: Vec<T>) -> Self {
        Sketch { values }
    }

    pub fn zeros(m: usize) -> Self {
        Sketch {
            values: vec![T::ZERO; m],
        }
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.to_f64().abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.to_f64().abs()))
    }
}

/// Exactly `k` nonzero integers at distinct uniform positions, each uniform
/// in `[-max_abs, max_abs] \ {0}`.
pub fn gen_sparse_signal(n: usize, k: usize, max_abs: i64, seed: u64) -> Result<SparseSignal<i64>> {
    if k > n {
        return Err(Error::invalid(format!("k={k} exceeds n={n}")));
    }
    if max_abs < 1 {
        return Err(Error::invalid(format!("max_abs must be positive, got {max_abs}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut positions = index::sample(&mut rng, n, k).into_vec();
    positions.sort_unstable();
    let mut x = SparseSignal::zeros(n);
    for j in positions {
        let magnitude = rng.gen_range(1..=max_abs);
        x.set(j, if rng.gen_bool(0.5) { magnitude } else { -magnitude });
    }
    Ok(x)
}
