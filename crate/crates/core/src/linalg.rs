//! Small dense solvers over column subsets of a 0/1 matrix.
//!
//! Columns are given as sorted row-index lists (the neighbor lists of the
//! chosen left nodes). Exact solves run over `Ratio<i128>`; floating solves
//! use a Householder QR, falling back to a pseudo-inverse for rank-deficient
//! systems.

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use num_traits::{One, Zero};

type Q = Ratio<i128>;

#[derive(Debug, Clone, PartialEq)]
pub enum RationalSolve {
    Inconsistent,
    RankDeficient { consistent: bool },
    Unique(Vec<Q>),
}

/// Rows touched by at least one column, ascending.
fn row_union(columns: &[&[usize]]) -> Vec<usize> {
    let mut rows: Vec<usize> = columns.iter().flat_map(|c| c.iter().copied()).collect();
    rows.sort_unstable();
    rows.dedup();
    rows
}

/// Row-reduces `mat` (rows x width) in place over the rationals, pivoting
/// only within the first `pivot_cols` columns. Returns the pivot column of
/// each pivot row, in order.
fn row_reduce(mat: &mut [Vec<Q>], pivot_cols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..pivot_cols {
        let Some(p) = (row..mat.len()).find(|&r| !mat[r][col].is_zero()) else {
            continue;
        };
        mat.swap(row, p);
        let inv = mat[row][col].recip();
        for v in mat[row].iter_mut() {
            *v *= inv;
        }
        for r in 0..mat.len() {
            if r != row && !mat[r][col].is_zero() {
                let factor = mat[r][col];
                let (pivot_row, target) = if r < row {
                    let (a, b) = mat.split_at_mut(row);
                    (&b[0], &mut a[r])
                } else {
                    let (a, b) = mat.split_at_mut(r);
                    (&a[row], &mut b[0])
                };
                for (t, p) in target.iter_mut().zip(pivot_row.iter()) {
                    *t -= factor * *p;
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == mat.len() {
            break;
        }
    }
    pivots
}

fn restricted_matrix(columns: &[&[usize]], rows: &[usize], rhs: Option<&[i128]>) -> Vec<Vec<Q>> {
    let width = columns.len() + usize::from(rhs.is_some());
    let mut mat = vec![vec![Q::zero(); width]; rows.len()];
    for (c, col) in columns.iter().enumerate() {
        for &r in col.iter() {
            let idx = rows.binary_search(&r).expect("row in union");
            mat[idx][c] = Q::one();
        }
    }
    if let Some(rhs) = rhs {
        for (idx, &r) in rows.iter().enumerate() {
            mat[idx][columns.len()] = Q::from_integer(rhs[r]);
        }
    }
    mat
}

/// Solves `A_S z = rhs` exactly, where `A_S` has the given 0/1 columns and
/// `rhs.len()` rows.
pub fn rational_solve(columns: &[&[usize]], rhs: &[i128]) -> RationalSolve {
    let rows = row_union(columns);
    // Rows outside the union read 0 = rhs_i.
    let outside_nonzero = rhs
        .iter()
        .enumerate()
        .any(|(i, v)| *v != 0 && rows.binary_search(&i).is_err());

    let s = columns.len();
    let mut mat = restricted_matrix(columns, &rows, Some(rhs));
    let pivots = row_reduce(&mut mat, s);
    let rank = pivots.len();
    let consistent =
        !outside_nonzero && mat[rank..].iter().all(|row| row[s].is_zero());

    if rank < s {
        return RationalSolve::RankDeficient { consistent };
    }
    if !consistent {
        return RationalSolve::Inconsistent;
    }
    // Full column rank: reduced rows 0..s hold the identity.
    RationalSolve::Unique((0..s).map(|i| mat[i][s]).collect())
}

/// Column rank of the 0/1 matrix with the given columns.
pub fn rational_rank(columns: &[&[usize]]) -> usize {
    let rows = row_union(columns);
    let mut mat = restricted_matrix(columns, &rows, None);
    row_reduce(&mut mat, columns.len()).len()
}

/// A nonzero integer vector `z` with `A_S z = 0`, if the columns are
/// dependent. Scaled to coprime entries with the first nonzero positive.
pub fn rational_null_vector(columns: &[&[usize]]) -> Option<Vec<i128>> {
    let s = columns.len();
    let rows = row_union(columns);
    let mut mat = restricted_matrix(columns, &rows, None);
    let pivots = row_reduce(&mut mat, s);
    let free = (0..s).find(|c| !pivots.contains(c))?;

    let mut z = vec![Q::zero(); s];
    z[free] = Q::one();
    for (r, &pc) in pivots.iter().enumerate() {
        z[pc] = -mat[r][free];
    }

    let common = z.iter().fold(1i128, |acc, q| lcm(acc, *q.denom()));
    let ints: Vec<i128> = z.iter().map(|q| (*q * common).to_integer()).collect();
    let g = ints.iter().fold(0i128, |acc, &v| gcd(acc, v.abs()));
    let sign = ints.iter().find(|v| **v != 0).map_or(1, |v| v.signum());
    Some(ints.into_iter().map(|v| v / g * sign).collect())
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

fn lcm(a: i128, b: i128) -> i128 {
    if a == 0 || b == 0 {
        return 0;
    }
    (a / gcd(a, b) * b).abs()
}

/// Result of a dense least-squares fit.
#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    pub coefficients: Vec<f64>,
    pub rank: usize,
    /// `max_i |(A_S z - y)_i|` over all rows.
    pub residual_max: f64,
    /// `||A_S z - y||_2` over all rows.
    pub residual_l2: f64,
    /// Largest magnitude in `y`, for relative tolerances.
    pub scale: f64,
}

/// Minimizes `||A_S z - y||_2`. Full column rank goes through QR; otherwise
/// the minimum-norm solution comes from the pseudo-inverse of the Gram matrix.
pub fn least_squares(columns: &[&[usize]], y: &[f64]) -> LeastSquaresFit {
    let m = y.len();
    let s = columns.len();
    let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let mut a = DMatrix::<f64>::zeros(m, s);
    for (c, col) in columns.iter().enumerate() {
        for &r in col.iter() {
            a[(r, c)] = 1.0;
        }
    }
    let b = DVector::from_column_slice(y);

    let (coefficients, rank) = if s == 0 {
        (DVector::zeros(0), 0)
    } else {
        // more columns than rows can never have full column rank
        let solved = if s <= m {
            let qr = a.clone().qr();
            let r = qr.r();
            let diag_max = (0..s).fold(0.0f64, |acc, i| acc.max(r[(i, i)].abs()));
            let tol = (m as f64) * f64::EPSILON * diag_max;
            let full_rank = diag_max > 0.0 && (0..s).all(|i| r[(i, i)].abs() > tol);
            let qtb = qr.q().transpose() * &b;
            full_rank
                .then(|| r.solve_upper_triangular(&qtb.rows(0, s).into_owned()))
                .flatten()
        } else {
            None
        };
        match solved {
            Some(z) => (z, s),
            None => min_norm_solve(&a, &b),
        }
    };

    let residual = &a * &coefficients - &b;
    LeastSquaresFit {
        coefficients: coefficients.iter().copied().collect(),
        rank,
        residual_max: residual.amax(),
        residual_l2: residual.norm(),
        scale,
    }
}

/// Minimum-norm least squares through the eigendecomposition of `A^T A`.
/// nalgebra's SVD can return wrong singular values for matrices with
/// repeated columns, so it is avoided here. One refinement pass recovers the
/// accuracy lost by squaring the condition number.
fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, usize) {
    let eig = (a.transpose() * a).symmetric_eigen();
    let mu_max = eig.eigenvalues.amax();
    let tol = 1e-10 * mu_max;
    let kept: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| mu_max > 0.0 && eig.eigenvalues[i] > tol)
        .collect();
    let pinv_normal = |rhs: &DVector<f64>| {
        let atr = a.transpose() * rhs;
        kept.iter().fold(DVector::zeros(a.ncols()), |acc, &i| {
            let v = eig.eigenvectors.column(i);
            acc + v * (v.dot(&atr) / eig.eigenvalues[i])
        })
    };
    let z = pinv_normal(b);
    let z = &z + pinv_normal(&(b - a * &z));
    (z, kept.len())
}
