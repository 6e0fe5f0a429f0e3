//! Arithmetic modes for signals and sketches.
//!
//! Two modes are supported. `i64` is exact: gap equality is plain integer
//! equality and restricted systems are solved over the rationals. `f64` works
//! with an absolute tolerance `eta`: values with `|v| <= eta` count as zero and
//! gap values are grouped into buckets of width `eta` before counting.

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::linalg::{self, RationalSolve};

/// Outcome of solving `A_S z = y` for a fixed column support `S`.
#[derive(Debug, Clone, PartialEq)]
pub enum SupportSolve<T> {
    /// No `z` satisfies the system.
    Inconsistent,
    /// The columns are linearly dependent; `consistent` tells whether a
    /// solution exists at all.
    RankDeficient { consistent: bool },
    /// Exactly one solution.
    Unique(Vec<T>),
    /// Exactly one solution, but it cannot be represented in this mode
    /// (a non-integral rational in exact mode). Carries the offending column
    /// and whether every entry of the solution is nonzero.
    NotRepresentable { column: usize, full_support: bool },
}

pub trait Scalar:
    Copy
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Default
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    /// Grouping key used when counting identical gaps.
    type Key: Copy + Ord + Hash + Debug + Send + Sync;

    const ZERO: Self;
    /// Whether arithmetic in this mode is exact.
    const EXACT: bool;

    fn from_i64(v: i64) -> Self;
    fn to_f64(self) -> f64;
    fn abs(self) -> Self;

    /// True when the value is treated as zero under tolerance `eta`.
    fn is_negligible(self, eta: f64) -> bool;

    fn key(self, eta: f64) -> Self::Key;

    /// Mean of `count` values whose sum is `sum`. In exact mode the grouped
    /// values are all equal, so the division is exact.
    fn average(sum: Self, count: usize) -> Self;

    /// Shortest text form that parses back to the same value in this mode.
    fn to_text(self) -> String;
    fn parse_text(s: &str) -> Option<Self>;

    /// Solves the restricted system over the given columns, each a sorted
    /// list of row indices in `[0, y.len())`.
    fn solve_support(columns: &[&[usize]], y: &[Self], eta: f64) -> SupportSolve<Self>;

    fn snap(self, eta: f64) -> Self {
        if self.is_negligible(eta) {
            Self::ZERO
        } else {
            self
        }
    }
}

impl Scalar for i64 {
    type Key = i64;

    const ZERO: Self = 0;
    const EXACT: bool = true;

    fn from_i64(v: i64) -> Self {
        v
    }

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn abs(self) -> Self {
        i64::abs(self)
    }

    fn is_negligible(self, _eta: f64) -> bool {
        self == 0
    }

    fn key(self, _eta: f64) -> i64 {
        self
    }

    fn average(sum: Self, count: usize) -> Self {
        debug_assert!(count > 0 && sum % count as i64 == 0);
        sum / count as i64
    }

    fn to_text(self) -> String {
        self.to_string()
    }

    fn parse_text(s: &str) -> Option<Self> {
        s.parse().ok()
    }

    fn solve_support(columns: &[&[usize]], y: &[Self], _eta: f64) -> SupportSolve<Self> {
        let rhs: Vec<i128> = y.iter().map(|&v| v as i128).collect();
        match linalg::rational_solve(columns, &rhs) {
            RationalSolve::Inconsistent => SupportSolve::Inconsistent,
            RationalSolve::RankDeficient { consistent } => {
                SupportSolve::RankDeficient { consistent }
            }
            RationalSolve::Unique(z) => {
                let full_support = z.iter().all(|v| *v.numer() != 0);
                let mut out = Vec::with_capacity(z.len());
                for (column, value) in z.iter().enumerate() {
                    let integral = value
                        .is_integer()
                        .then(|| i64::try_from(value.to_integer()).ok())
                        .flatten();
                    match integral {
                        Some(v) => out.push(v),
                        None => return SupportSolve::NotRepresentable { column, full_support },
                    }
                }
                SupportSolve::Unique(out)
            }
        }
    }
}

impl Scalar for f64 {
    type Key = i64;

    const ZERO: Self = 0.0;
    const EXACT: bool = false;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn abs(self) -> Self {
        f64::abs(self)
    }

    fn is_negligible(self, eta: f64) -> bool {
        self.abs() <= eta
    }

    fn key(self, eta: f64) -> i64 {
        if eta > 0.0 {
            (self / eta).round() as i64
        } else {
            // Zero tolerance: order-preserving map of the bit pattern.
            let bits = self.to_bits() as i64;
            if bits < 0 {
                bits ^ i64::MAX
            } else {
                bits
            }
        }
    }

    fn average(sum: Self, count: usize) -> Self {
        sum / count as f64
    }

    fn to_text(self) -> String {
        // Debug keeps a decimal point on integral values so the file stays
        // in floating mode when read back.
        format!("{self:?}")
    }

    fn parse_text(s: &str) -> Option<Self> {
        s.parse::<f64>().ok().filter(|v| v.is_finite())
    }

    fn solve_support(columns: &[&[usize]], y: &[Self], eta: f64) -> SupportSolve<Self> {
        let fit = linalg::least_squares(columns, y);
        let consistent = fit.residual_max <= eta.max(f64::EPSILON * fit.scale);
        if fit.rank < columns.len() {
            SupportSolve::RankDeficient { consistent }
        } else if consistent {
            SupportSolve::Unique(fit.coefficients)
        } else {
            SupportSolve::Inconsistent
        }
    }
}

/// Default floating tolerance for a sketch: `1e-9 * d * max |y_i|`.
pub fn default_eta<T: Scalar>(d: usize, y: &[T]) -> f64 {
    if T::EXACT {
        return 0.0;
    }
    let max_abs = y.iter().map(|v| v.to_f64().abs()).fold(0.0, f64::max);
    1e-9 * d as f64 * max_abs
}
