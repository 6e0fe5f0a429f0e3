//! The measurement map `y = A x` and the RIP-1 / null-space checks.

use crate::budget;
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::linalg;
use crate::scalar::Scalar;
use crate::signal::{Sketch, SparseSignal};

fn check_dim(g: &BipartiteGraph, n: usize) -> Result<()> {
    if g.n() != n {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: n,
        });
    }
    Ok(())
}

/// `y_i = sum of x_j over left neighbors j of i`, in `O(nnz(x) * d)`.
pub fn encode<T: Scalar>(g: &BipartiteGraph, x: &SparseSignal<T>) -> Result<Sketch<T>> {
    check_dim(g, x.dim())?;
    let mut y = vec![T::ZERO; g.m()];
    for (j, v) in x.iter() {
        for &i in g.neighbors(j) {
            y[i] += v;
        }
    }
    Ok(Sketch::new(y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rip1Bounds {
    /// `(1 - 2 eps) d ||x||_1`
    pub lower: f64,
    /// `||A x||_1`
    pub value: f64,
    /// `d ||x||_1`
    pub upper: f64,
    pub holds: bool,
}

/// Evaluates both sides of the RIP-1 sandwich for `x`. The result is only a
/// guarantee when `x` is sparse enough for the graph's certified expansion.
pub fn rip1_bounds<T: Scalar>(g: &BipartiteGraph, x: &SparseSignal<T>, epsilon: f64) -> Result<Rip1Bounds> {
    let y = encode(g, x)?;
    let norm = x.l1_norm();
    let d = g.d() as f64;
    let lower = (1.0 - 2.0 * epsilon) * d * norm;
    let upper = d * norm;
    let value = y.l1_norm();
    let slack = if T::EXACT { 0.0 } else { 1e-12 * upper };
    Ok(Rip1Bounds {
        lower,
        value,
        upper,
        holds: lower <= value + slack && value <= upper + slack,
    })
}

/// Searches for a nonzero `z` with `||z||_0 <= s` and `A z = 0`.
///
/// Supports are enumerated by increasing size, so a hit is a minimal
/// dependent column set and its null vector has full support. Such a set
/// cannot contain a column with a private row (a neighbor no other column of
/// the set touches), which prunes most candidates before the exact rank test.
pub fn nullspace_sparse_search(g: &BipartiteGraph, s: usize, budget: u64) -> Result<Option<SparseSignal<i64>>> {
    if s > g.n() {
        return Err(Error::invalid(format!("s={s} exceeds n={}", g.n())));
    }
    if s == 0 {
        return Ok(None);
    }
    budget::ensure_within(g.n(), s, budget)?;

    let mut counts = vec![0u32; g.m()];
    let mut set = Vec::with_capacity(s);
    for size in 1..=s {
        if let Some(z) = search_size(g, size, 0, &mut set, &mut counts) {
            return Ok(Some(z));
        }
    }
    Ok(None)
}

fn search_size(
    g: &BipartiteGraph,
    size: usize,
    next: usize,
    set: &mut Vec<usize>,
    counts: &mut [u32],
) -> Option<SparseSignal<i64>> {
    if set.len() == size {
        let no_private_rows = set
            .iter()
            .all(|&j| g.neighbors(j).iter().all(|&r| counts[r] >= 2));
        if !no_private_rows {
            return None;
        }
        let columns: Vec<&[usize]> = set.iter().map(|&j| g.neighbors(j)).collect();
        let z = linalg::rational_null_vector(&columns)?;
        let entries = set.iter().zip(z).map(|(&j, v)| {
            (j, i64::try_from(v).expect("null vector entry fits in i64"))
        });
        return Some(SparseSignal::from_entries(g.n(), entries).expect("valid support"));
    }
    let remaining = size - set.len();
    for v in next..=g.n() - remaining {
        for &r in g.neighbors(v) {
            counts[r] += 1;
        }
        set.push(v);
        let found = search_size(g, size, v + 1, set, counts);
        set.pop();
        for &r in g.neighbors(v) {
            counts[r] -= 1;
        }
        if found.is_some() {
            return found;
        }
    }
    None
}
