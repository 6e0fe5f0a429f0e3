//! Recovery of almost k-sparse signals.
//!
//! An almost k-sparse signal has at most `k` significant entries with
//! magnitude in `[L - Delta, L + Delta]`; every other entry lies in
//! `[-lambda, lambda]`. Recovery runs in two phases. A combinatorial phase
//! identifies the positions and signs of the significant entries by fixing
//! one node per iteration to a quantization level in `{0, +-(L - Delta),
//! +-(L + Delta)}`. Then the actual magnitudes come from a least-squares fit
//! restricted to the identified support.
//!
//! The residual thresholds follow the schedule
//! `rho_t = 2 t Delta + (D - t - 1) lambda` and
//! `phi_t = 2 t Delta + (D - t) lambda`, where `D` is the right degree.

use rand::seq::index;
use rand::Rng;

use crate::decode::{fast_threshold, DecodeStatus, DecodeTrace, IterationRecord};
use crate::error::{Error, Result};
use crate::graph::{rng_from_seed, BipartiteGraph};
use crate::linalg;
use crate::signal::{Sketch, SparseSignal};
use crate::sketch::encode;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlmostSparseModel {
    /// Budget of significant entries.
    pub k: usize,
    /// Near-zero entries lie in `[-lambda, lambda]`.
    pub lambda: f64,
    /// Center `L` of the significant magnitudes.
    pub big_l: f64,
    /// Half-width `Delta` of the significant magnitudes.
    pub delta: f64,
    /// Right degree `D` of the measurement graph.
    pub right_degree: usize,
}

impl AlmostSparseModel {
    /// Checks `lambda, Delta >= 0`, `L - Delta > lambda` and the admissibility
    /// condition `L > 2 k Delta + D lambda`.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.lambda, self.big_l, self.delta].iter().all(|v| v.is_finite());
        if !finite || self.lambda < 0.0 || self.delta < 0.0 {
            return Err(Error::InadmissibleModel(
                "lambda and Delta must be finite and non-negative".into(),
            ));
        }
        if self.big_l - self.delta <= self.lambda {
            return Err(Error::InadmissibleModel(format!(
                "significant level L - Delta = {} does not exceed lambda = {}",
                self.big_l - self.delta,
                self.lambda
            )));
        }
        let bound = 2.0 * self.k as f64 * self.delta + self.right_degree as f64 * self.lambda;
        if self.big_l <= bound {
            return Err(Error::InadmissibleModel(format!(
                "need L > 2 k Delta + D lambda = {bound}, got L = {}",
                self.big_l
            )));
        }
        Ok(())
    }

    pub fn schedule(&self) -> ThresholdSchedule {
        ThresholdSchedule {
            delta: self.delta,
            lambda: self.lambda,
            right_degree: self.right_degree,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSchedule {
    pub delta: f64,
    pub lambda: f64,
    pub right_degree: usize,
}

impl ThresholdSchedule {
    /// `2 t Delta + (D - t - 1) lambda`
    pub fn rho(&self, t: usize) -> f64 {
        2.0 * t as f64 * self.delta + (self.right_degree as f64 - t as f64 - 1.0) * self.lambda
    }

    /// `2 t Delta + (D - t) lambda`
    pub fn phi(&self, t: usize) -> f64 {
        2.0 * t as f64 * self.delta + (self.right_degree as f64 - t as f64) * self.lambda
    }
}

/// Schedule index used for the first pass. With index 0 the first fix would
/// need `|x_j - G| <= lambda`, which fails for any `Delta` much larger than
/// `lambda`; index 1 leaves `2 Delta` of room for the quantization error.
pub const SCHEDULE_ORIGIN: usize = 1;

/// Draws an almost k-sparse signal: `k` significant entries at distinct
/// uniform positions with uniform magnitude in `[L - Delta, L + Delta]` and a
/// random sign, every other entry uniform in `[-lambda, lambda]`.
pub fn gen_almost_sparse(model: &AlmostSparseModel, n: usize, seed: u64) -> Result<SparseSignal<f64>> {
    model.validate()?;
    if model.k > n {
        return Err(Error::invalid(format!("k={} exceeds n={n}", model.k)));
    }
    let mut rng = rng_from_seed(seed);
    let mut positions = index::sample(&mut rng, n, model.k).into_vec();
    positions.sort_unstable();

    let mut x = SparseSignal::zeros(n);
    for &j in &positions {
        let magnitude = if model.delta > 0.0 {
            rng.gen_range(model.big_l - model.delta..=model.big_l + model.delta)
        } else {
            model.big_l
        };
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        x.set(j, sign * magnitude);
    }
    if model.lambda > 0.0 {
        for j in 0..n {
            if positions.binary_search(&j).is_err() {
                x.set(j, rng.gen_range(-model.lambda..=model.lambda));
            }
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Negative,
    Positive,
}

impl Sign {
    pub fn of(v: f64) -> Sign {
        if v < 0.0 {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Sign::Negative => '-',
            Sign::Positive => '+',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobustOptions {
    /// Defaults to `2k + 2`.
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustSupport {
    /// Positions and signs of the significant entries, ascending by index.
    pub support: Vec<(usize, Sign)>,
    /// Quantized estimate from the combinatorial phase.
    pub levels: SparseSignal<f64>,
    /// Per-fix records; `value` is the new level and the gap counts are the
    /// number of measurements with `|residual| > lambda D`.
    pub trace: DecodeTrace<f64>,
}

impl RobustSupport {
    pub fn indices(&self) -> Vec<usize> {
        self.support.iter().map(|&(j, _)| j).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
enum Category {
    /// Wrong level: gap magnitude near `L`.
    Level,
    /// Wrong sign: gap magnitude near `2L`.
    Sign,
}

#[derive(Debug, Clone, Copy)]
struct Fix {
    category: Category,
    post_residual: f64,
    node: usize,
    level: f64,
}

impl Fix {
    fn preferred_over(&self, other: &Fix) -> bool {
        (self.category, self.post_residual, self.node)
            .partial_cmp(&(other.category, other.post_residual, other.node))
            == Some(std::cmp::Ordering::Less)
    }
}

fn in_window(v: f64, lo: f64, hi: f64) -> bool {
    lo <= v && v <= hi
}

/// Combinatorial phase: positions and signs of the significant entries.
///
/// Needs a right-regular graph with right degree `model.right_degree`,
/// `0 <= epsilon < 1/4`, and an admissible model. When several fixes
/// qualify, a level-category fix beats a sign-category one, then the smaller
/// post-fix residual wins, then the smaller node index.
pub fn decode_robust_support(
    g: &BipartiteGraph,
    y: &Sketch<f64>,
    model: &AlmostSparseModel,
    epsilon: f64,
    opts: &RobustOptions,
) -> Result<RobustSupport> {
    model.validate()?;
    match g.right_degree() {
        Some(deg) if deg == model.right_degree => {}
        other => {
            return Err(Error::invalid(format!(
                "robust decoding needs a right-regular graph with D = {}, graph has {other:?}",
                model.right_degree
            )))
        }
    }
    if !(0.0..0.25).contains(&epsilon) {
        return Err(Error::invalid(format!("robust decoding needs 0 <= epsilon < 1/4, got {epsilon}")));
    }
    if y.m() != g.m() {
        return Err(Error::DimensionMismatch {
            expected: g.m(),
            found: y.m(),
        });
    }

    let threshold = fast_threshold(g.d(), epsilon) as usize;
    let schedule = model.schedule();
    let (l, delta, lambda) = (model.big_l, model.delta, model.lambda);
    let significant_gap = lambda * model.right_degree as f64;
    let count_gaps = |r: &[f64]| r.iter().filter(|v| v.abs() > significant_gap).count();

    let mut levels_all = vec![0.0, l - delta, l + delta, -(l - delta), -(l + delta)];
    levels_all.dedup();

    let max_iters = opts.max_iters.unwrap_or(2 * model.k + 2);
    let mut estimate = SparseSignal::<f64>::zeros(g.n());
    let mut residual = y.values().to_vec();
    let mut records = Vec::new();
    let initial_gap_support = count_gaps(&residual);
    let mut t = SCHEDULE_ORIGIN;

    let status = loop {
        let phi = schedule.phi(t);
        let max_abs = residual.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if max_abs <= phi {
            break DecodeStatus::Recovered;
        }
        if records.len() >= max_iters {
            break DecodeStatus::IterationCap;
        }

        let rho = schedule.rho(t);
        let windows = [
            (Category::Level, l - delta - lambda - rho, l + delta + lambda + rho),
            (Category::Sign, 2.0 * l - 2.0 * delta - rho, 2.0 * l + 2.0 * delta + rho),
        ];
        let mut candidates: Vec<usize> = residual
            .iter()
            .enumerate()
            .filter(|(_, v)| windows.iter().any(|&(_, lo, hi)| in_window(v.abs(), lo, hi)))
            .flat_map(|(i, _)| g.left_neighbors(i).iter().copied())
            .collect();
        candidates.sort_unstable();
        candidates.dedup();

        let mut best: Option<Fix> = None;
        for &j in &candidates {
            let current = estimate.get(j);
            for &(category, lo, hi) in &windows {
                for positive in [true, false] {
                    let group: Vec<f64> = g
                        .neighbors(j)
                        .iter()
                        .map(|&i| residual[i])
                        .filter(|&r| in_window(r.abs(), lo, hi) && (r > 0.0) == positive)
                        .collect();
                    if group.len() < threshold {
                        continue;
                    }
                    for &level in &levels_all {
                        if level == current {
                            continue;
                        }
                        let shift = level - current;
                        let post = group.iter().fold(0.0f64, |a, r| a.max((r - shift).abs()));
                        if post > phi {
                            continue;
                        }
                        let fix = Fix {
                            category,
                            post_residual: post,
                            node: j,
                            level,
                        };
                        if best.as_ref().is_none_or(|b| fix.preferred_over(b)) {
                            best = Some(fix);
                        }
                    }
                }
            }
        }

        let Some(fix) = best else {
            break DecodeStatus::Stuck;
        };
        let before = count_gaps(&residual);
        let shift = fix.level - estimate.get(fix.node);
        for &i in g.neighbors(fix.node) {
            residual[i] -= shift;
        }
        estimate.set(fix.node, fix.level);
        records.push(IterationRecord {
            node: fix.node,
            value: fix.level,
            gap_support_before: before,
            gap_support_after: count_gaps(&residual),
        });
        t += 1;
    };

    let support = estimate.iter().map(|(j, v)| (j, Sign::of(v))).collect();
    Ok(RobustSupport {
        support,
        levels: estimate,
        trace: DecodeTrace {
            records,
            status,
            initial_gap_support,
        },
    })
}

/// The `v` supported on `support` minimizing `||A' v - y||_2`, where `A'` is
/// `A` restricted to those columns. Rank-deficient systems get the
/// minimum-norm minimizer.
pub fn least_squares_refine(g: &BipartiteGraph, y: &Sketch<f64>, support: &[usize]) -> Result<SparseSignal<f64>> {
    if y.m() != g.m() {
        return Err(Error::DimensionMismatch {
            expected: g.m(),
            found: y.m(),
        });
    }
    let mut support = support.to_vec();
    support.sort_unstable();
    support.dedup();
    if let Some(&bad) = support.iter().find(|&&j| j >= g.n()) {
        return Err(Error::invalid(format!("support index {bad} outside [0, {})", g.n())));
    }
    if support.is_empty() {
        return Ok(SparseSignal::zeros(g.n()));
    }
    let columns: Vec<&[usize]> = support.iter().map(|&j| g.neighbors(j)).collect();
    let fit = linalg::least_squares(&columns, y.values());
    SparseSignal::from_entries(g.n(), support.into_iter().zip(fit.coefficients))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Inequality {
    fn new(lhs: f64, rhs: f64) -> Self {
        Inequality {
            lhs,
            rhs,
            holds: lhs <= rhs + 1e-12 * rhs.abs().max(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiprCertificate {
    /// `b = ||A u||_1`
    pub b: f64,
    pub u_support_l1: f64,
    pub u_complement_l1: f64,
    /// `|u_S|_1 <= b / (d (1 - 2 eps)) + 2 eps / (1 - 2 eps) |u|_1`
    pub first: Inequality,
    /// `(1 - 4 eps)/(1 - 2 eps) |u_S|_1 <= b / (d (1 - 2 eps)) + 2 eps / (1 - 2 eps) |u_{S^c}|_1`
    pub second: Inequality,
    pub holds: bool,
}

/// Evaluates both forms of the restricted ℓ1 error bound for `u` on the
/// coordinate set `support`.
pub fn ripr_error_bound(g: &BipartiteGraph, u: &SparseSignal<f64>, support: &[usize], epsilon: f64) -> Result<RiprCertificate> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon must lie in [0, 1/2), got {epsilon}")));
    }
    let b = encode(g, u)?.l1_norm();
    let mut support = support.to_vec();
    support.sort_unstable();
    support.dedup();
    let u_support_l1 = u.restrict(&support).l1_norm();
    let u_l1 = u.l1_norm();
    let u_complement_l1 = (u_l1 - u_support_l1).max(0.0);

    let d = g.d() as f64;
    let head = b / (d * (1.0 - 2.0 * epsilon));
    let tail = 2.0 * epsilon / (1.0 - 2.0 * epsilon);
    let first = Inequality::new(u_support_l1, head + tail * u_l1);
    let second = Inequality::new(
        (1.0 - 4.0 * epsilon) / (1.0 - 2.0 * epsilon) * u_support_l1,
        head + tail * u_complement_l1,
    );
    Ok(RiprCertificate {
        b,
        u_support_l1,
        u_complement_l1,
        first,
        second,
        holds: first.holds && second.holds,
    })
}

/// Constant `c` in `||(x - v)_S||_1 <= c n lambda` obtained by chaining the
/// restricted bound with `||A(x - v)||_1 <= n d lambda` and
/// `||u_{S^c}||_1 <= n lambda`: `c = (1 + 2 eps) / (1 - 4 eps)`.
pub fn final_error_constant(epsilon: f64) -> f64 {
    (1.0 + 2.0 * epsilon) / (1.0 - 4.0 * epsilon)
}

/// Both phases together.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustRecovery {
    pub identified: RobustSupport,
    pub refined: SparseSignal<f64>,
    /// `||A v - y||_2` for the refined signal.
    pub residual_l2: f64,
}

pub fn recover_robust(
    g: &BipartiteGraph,
    y: &Sketch<f64>,
    model: &AlmostSparseModel,
    epsilon: f64,
    opts: &RobustOptions,
) -> Result<RobustRecovery> {
    let identified = decode_robust_support(g, y, model, epsilon, opts)?;
    let refined = least_squares_refine(g, y, &identified.indices())?;
    let av = encode(g, &refined)?;
    let residual_l2 = av
        .values()
        .iter()
        .zip(y.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(RobustRecovery {
        identified,
        refined,
        residual_l2,
    })
}
