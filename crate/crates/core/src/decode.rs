//! Exact recovery of sparse signals by iterative gap elimination.
//!
//! Both decoders repeat one step: find a left node whose neighbors share an
//! identical nonzero gap on at least `threshold` of its `d` measurements, and
//! add that gap to the node's estimate. The majority decoder uses
//! `threshold = floor(d/2) + 1`; the fast decoder uses `ceil((1 - 2 eps) d)`,
//! which on a `(3k, 1 - eps)` expander with `eps < 1/4` removes more than
//! `(1 - 4 eps) d` nonzero gaps per step and finishes within `k / (1 - 4 eps)`
//! steps.
//!
//! Candidate selection runs off [`GapState`], which keeps for every left node
//! a multiset of its nonzero neighbor gaps and an ordered queue of nodes keyed
//! by their most frequent gap count. A correction touches only the `d`
//! neighbors of the corrected node and the left nodes sharing them.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::budget;
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::scalar::{default_eta, Scalar, SupportSolve};
use crate::signal::{Sketch, SparseSignal};
use crate::sketch::encode;

/// Multiset of the nonzero gap keys seen by one left node.
#[derive(Debug, Clone, PartialEq)]
struct NodeIndex<K> {
    counts: BTreeMap<K, u32>,
    /// `(count, Reverse(key))`; the last element is the mode, ties going to
    /// the smallest key.
    ranked: BTreeSet<(u32, Reverse<K>)>,
}

impl<K: Ord + Copy> NodeIndex<K> {
    fn new() -> Self {
        NodeIndex {
            counts: BTreeMap::new(),
            ranked: BTreeSet::new(),
        }
    }

    fn insert(&mut self, key: K) {
        let c = self.counts.entry(key).or_insert(0);
        if *c > 0 {
            self.ranked.remove(&(*c, Reverse(key)));
        }
        *c += 1;
        self.ranked.insert((*c, Reverse(key)));
    }

    fn remove(&mut self, key: K) {
        let c = self.counts.get_mut(&key).expect("removing absent gap key");
        self.ranked.remove(&(*c, Reverse(key)));
        *c -= 1;
        if *c == 0 {
            self.counts.remove(&key);
        } else {
            self.ranked.insert((*c, Reverse(key)));
        }
    }

    fn mode(&self) -> Option<(K, u32)> {
        self.ranked.last().map(|&(c, Reverse(k))| (k, c))
    }

    fn runner_up_count(&self) -> u32 {
        self.ranked.iter().rev().nth(1).map_or(0, |&(c, _)| c)
    }

    fn count(&self, key: K) -> u32 {
        self.counts.get(&key).copied().unwrap_or(0)
    }
}

/// Residual `g = y - A x` for the current estimate `x`, with the per-node gap
/// index used to pick corrections.
#[derive(Debug, Clone)]
pub struct GapState<'g, T: Scalar> {
    graph: &'g BipartiteGraph,
    eta: f64,
    estimate: SparseSignal<T>,
    gaps: Vec<T>,
    gap_support: usize,
    nodes: Vec<NodeIndex<T::Key>>,
    /// Left nodes with at least one nonzero gap, ordered by descending mode
    /// count then ascending index.
    queue: BTreeSet<(Reverse<u32>, usize)>,
}

impl<T: Scalar> PartialEq for GapState<'_, T> {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.graph, other.graph)
            && self.eta == other.eta
            && self.estimate == other.estimate
            && self.gaps == other.gaps
            && self.gap_support == other.gap_support
            && self.nodes == other.nodes
            && self.queue == other.queue
    }
}

impl<'g, T: Scalar> GapState<'g, T> {
    /// State for the all-zero estimate.
    pub fn new(graph: &'g BipartiteGraph, y: &Sketch<T>, eta: f64) -> Result<Self> {
        Self::rebuild(graph, y, &SparseSignal::zeros(graph.n()), eta)
    }

    /// Recomputes everything from scratch for estimate `x`.
    pub fn rebuild(graph: &'g BipartiteGraph, y: &Sketch<T>, x: &SparseSignal<T>, eta: f64) -> Result<Self> {
        if y.m() != graph.m() {
            return Err(Error::DimensionMismatch {
                expected: graph.m(),
                found: y.m(),
            });
        }
        let ax = encode(graph, x)?;
        let gaps: Vec<T> = y
            .values()
            .iter()
            .zip(ax.values())
            .map(|(&yi, &ai)| (yi - ai).snap(eta))
            .collect();

        let mut nodes = vec![NodeIndex::new(); graph.n()];
        let mut gap_support = 0;
        for (i, g) in gaps.iter().enumerate() {
            if g.is_negligible(eta) {
                continue;
            }
            gap_support += 1;
            let key = g.key(eta);
            for &l in graph.left_neighbors(i) {
                nodes[l].insert(key);
            }
        }
        let queue = nodes
            .iter()
            .enumerate()
            .filter_map(|(l, node)| node.mode().map(|(_, c)| (Reverse(c), l)))
            .collect();

        Ok(GapState {
            graph,
            eta,
            estimate: x.clone(),
            gaps,
            gap_support,
            nodes,
            queue,
        })
    }

    pub fn graph(&self) -> &'g BipartiteGraph {
        self.graph
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gaps(&self) -> &[T] {
        &self.gaps
    }

    /// `|G_t|`, the number of nonzero gaps.
    pub fn gap_support_size(&self) -> usize {
        self.gap_support
    }

    pub fn estimate(&self) -> &SparseSignal<T> {
        &self.estimate
    }

    pub fn into_estimate(self) -> SparseSignal<T> {
        self.estimate
    }

    /// Most frequent nonzero gap key at node `j` and its multiplicity.
    pub fn mode(&self, j: usize) -> Option<(T::Key, u32)> {
        self.nodes[j].mode()
    }

    /// Number of neighbors of `j` whose gap groups with `v`.
    pub fn matching_gaps(&self, j: usize, v: T) -> u32 {
        if v.is_negligible(self.eta) {
            return 0;
        }
        self.nodes[j].count(v.key(self.eta))
    }

    /// Node with the largest mode count, smallest index first.
    pub fn best_candidate(&self) -> Option<(usize, u32)> {
        self.queue.first().map(|&(Reverse(c), j)| (j, c))
    }

    /// The correction value for node `j`: the mean of the neighbor gaps in
    /// its modal group (all equal in exact mode).
    pub fn mode_value(&self, j: usize) -> Option<T> {
        let (key, count) = self.mode(j)?;
        let sum = self
            .graph
            .neighbors(j)
            .iter()
            .map(|&i| self.gaps[i])
            .filter(|g| !g.is_negligible(self.eta) && g.key(self.eta) == key)
            .fold(T::ZERO, |acc, g| acc + g);
        Some(T::average(sum, count as usize))
    }

    fn requeue(&mut self, l: usize, old: Option<(T::Key, u32)>) {
        let new = self.nodes[l].mode();
        let old_count = old.map(|(_, c)| c);
        let new_count = new.map(|(_, c)| c);
        if old_count == new_count {
            return;
        }
        if let Some(c) = old_count {
            self.queue.remove(&(Reverse(c), l));
        }
        if let Some(c) = new_count {
            self.queue.insert((Reverse(c), l));
        }
    }

    /// Sets `x_j += v` and updates the gaps and index incrementally. No
    /// threshold is checked; see [`GapState::candidate_update`].
    pub fn apply_correction(&mut self, j: usize, v: T) {
        let eta = self.eta;
        self.estimate.add(j, v);
        let graph = self.graph;
        for &i in graph.neighbors(j) {
            let old = self.gaps[i];
            let new = (old - v).snap(eta);
            self.gaps[i] = new;
            let old_key = (!old.is_negligible(eta)).then(|| old.key(eta));
            let new_key = (!new.is_negligible(eta)).then(|| new.key(eta));
            match (old_key.is_some(), new_key.is_some()) {
                (true, false) => self.gap_support -= 1,
                (false, true) => self.gap_support += 1,
                _ => {}
            }
            if old_key == new_key {
                continue;
            }
            for &l in graph.left_neighbors(i) {
                let before = self.nodes[l].mode();
                if let Some(k) = old_key {
                    self.nodes[l].remove(k);
                }
                if let Some(k) = new_key {
                    self.nodes[l].insert(k);
                }
                self.requeue(l, before);
            }
        }
    }

    /// Applies the decoder step `x_j += v`.
    ///
    /// # Panics
    ///
    /// If fewer than `threshold` neighbors of `j` carry the gap `v`.
    pub fn candidate_update(&mut self, j: usize, v: T, threshold: u32) {
        let matching = self.matching_gaps(j, v);
        assert!(
            matching >= threshold,
            "node {j} has {matching} gaps equal to {v}, below threshold {threshold}"
        );
        self.apply_correction(j, v);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeStatus {
    /// All gaps are zero: the estimate reproduces the sketch.
    Recovered,
    IterationCap,
    /// No node meets the threshold; the graph lacked the assumed expansion or
    /// the sketch has no sparse preimage.
    Stuck,
}

impl DecodeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            DecodeStatus::Recovered => "recovered",
            DecodeStatus::IterationCap => "iteration-cap",
            DecodeStatus::Stuck => "stuck",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub node: usize,
    pub value: T,
    pub gap_support_before: usize,
    pub gap_support_after: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeTrace<T> {
    pub records: Vec<IterationRecord<T>>,
    pub status: DecodeStatus,
    /// `|G|` before the first iteration.
    pub initial_gap_support: usize,
}

impl<T: Scalar> DecodeTrace<T> {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// `|G|` before the first iteration followed by `|G|` after each one.
    pub fn gap_supports(&self) -> Vec<usize> {
        std::iter::once(self.initial_gap_support)
            .chain(self.records.iter().map(|r| r.gap_support_after))
            .collect()
    }

    /// Smallest per-iteration drop in `|G|`; `None` for an empty trace.
    /// Negative when some iteration increased `|G|`.
    pub fn min_gap_drop(&self) -> Option<i64> {
        self.records
            .iter()
            .map(|r| r.gap_support_before as i64 - r.gap_support_after as i64)
            .min()
    }

    /// CSV with header `iter,node,value,gap_support_before,gap_support_after`;
    /// iterations are numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,node,value,gap_support_before,gap_support_after\n");
        for (t, r) in self.records.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                t + 1,
                r.node,
                r.value.to_text(),
                r.gap_support_before,
                r.gap_support_after
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded<T> {
    pub estimate: SparseSignal<T>,
    pub trace: DecodeTrace<T>,
}

impl<T> Decoded<T> {
    pub fn status(&self) -> DecodeStatus {
        self.trace.status
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DecodeOptions {
    /// Hard cap on iterations; derived from `k_hint` or the graph if absent.
    pub max_iters: Option<usize>,
    /// Expected sparsity, used only for the default cap.
    pub k_hint: Option<usize>,
    /// Floating tolerance; defaults to `1e-9 * d * max |y_i|`. Ignored in
    /// exact mode.
    pub eta: Option<f64>,
}

/// Slack added to the iteration bound when deriving a default cap.
const CAP_MARGIN: usize = 2;

/// `ceil((1 - 2 eps) d)`, the identical-gap count required by the fast
/// decoder.
pub fn fast_threshold(d: usize, epsilon: f64) -> u32 {
    // The small offset keeps exact products such as 0.75 * 8 from rounding up.
    let t = ((1.0 - 2.0 * epsilon) * d as f64 - 1e-9).ceil();
    (t.max(1.0) as u32).min(d as u32)
}

/// `floor(d/2) + 1`, strictly more than half of the neighbors.
pub fn majority_threshold(d: usize) -> u32 {
    (d / 2 + 1) as u32
}

/// `ceil(k / (1 - 4 eps))`, the iteration bound of the fast decoder.
pub fn iteration_bound(k: usize, epsilon: f64) -> usize {
    ((k as f64 / (1.0 - 4.0 * epsilon)) - 1e-9).ceil().max(0.0) as usize
}

fn run<T: Scalar>(g: &BipartiteGraph, y: &Sketch<T>, threshold: u32, max_iters: usize, eta: f64) -> Result<Decoded<T>> {
    let mut state = GapState::new(g, y, eta)?;
    let initial_gap_support = state.gap_support_size();
    let mut records = Vec::new();
    let status = loop {
        if state.gap_support_size() == 0 {
            break DecodeStatus::Recovered;
        }
        if records.len() >= max_iters {
            break DecodeStatus::IterationCap;
        }
        let Some((j, count)) = state.best_candidate().filter(|&(_, c)| c >= threshold) else {
            break DecodeStatus::Stuck;
        };
        if T::EXACT && 2 * threshold as usize > g.d() {
            // Two distinct gap values cannot both reach a majority threshold.
            assert!(state.nodes[j].runner_up_count() < threshold);
        }
        let v = state.mode_value(j).expect("candidate has a mode");
        let before = state.gap_support_size();
        debug_assert_eq!(state.matching_gaps(j, v), count);
        state.candidate_update(j, v, threshold);
        records.push(IterationRecord {
            node: j,
            value: v,
            gap_support_before: before,
            gap_support_after: state.gap_support_size(),
        });
    };
    Ok(Decoded {
        estimate: state.into_estimate(),
        trace: DecodeTrace {
            records,
            status,
            initial_gap_support,
        },
    })
}

fn resolve_eta<T: Scalar>(g: &BipartiteGraph, y: &Sketch<T>, opts: &DecodeOptions) -> f64 {
    if T::EXACT {
        0.0
    } else {
        opts.eta.unwrap_or_else(|| default_eta(g.d(), y.values()))
    }
}

fn check_sketch<T: Scalar>(g: &BipartiteGraph, y: &Sketch<T>) -> Result<()> {
    if y.m() != g.m() {
        return Err(Error::DimensionMismatch {
            expected: g.m(),
            found: y.m(),
        });
    }
    Ok(())
}

/// Majority-gap decoder: corrects nodes where more than half of the
/// measurements share an identical nonzero gap.
pub fn decode_majority<T: Scalar>(g: &BipartiteGraph, y: &Sketch<T>, opts: &DecodeOptions) -> Result<Decoded<T>> {
    check_sketch(g, y)?;
    let cap = opts.max_iters.unwrap_or_else(|| match opts.k_hint {
        Some(k) => k * g.d() + CAP_MARGIN,
        None => g.m(),
    });
    run(g, y, majority_threshold(g.d()), cap, resolve_eta(g, y, opts))
}

/// Fast decoder with the `ceil((1 - 2 eps) d)` identical-gap threshold.
///
/// Requires `0 <= epsilon < 1/4`; for larger slack the per-step progress
/// guarantee is lost. `epsilon` is a decoder parameter: the result carries no
/// guarantee unless the graph was certified at that slack.
pub fn decode_fast<T: Scalar>(g: &BipartiteGraph, y: &Sketch<T>, epsilon: f64, opts: &DecodeOptions) -> Result<Decoded<T>> {
    if !(0.0..0.25).contains(&epsilon) {
        return Err(Error::invalid(format!("fast decoding needs 0 <= epsilon < 1/4, got {epsilon}")));
    }
    check_sketch(g, y)?;
    let cap = opts.max_iters.unwrap_or_else(|| match opts.k_hint {
        Some(k) => iteration_bound(k, epsilon) + CAP_MARGIN,
        None => (3 * g.m() / g.d()).max(1),
    });
    run(g, y, fast_threshold(g.d(), epsilon), cap, resolve_eta(g, y, opts))
}

/// `A x == y`, exactly in integer mode and within `eta` (default
/// `1e-9 * d * max |y_i|`) in floating mode. Mismatched dimensions give `false`.
pub fn verify_solution<T: Scalar>(g: &BipartiteGraph, y: &Sketch<T>, x: &SparseSignal<T>, eta: Option<f64>) -> bool {
    if y.m() != g.m() || x.dim() != g.n() {
        return false;
    }
    let Ok(ax) = encode(g, x) else { return false };
    let eta = if T::EXACT {
        0.0
    } else {
        eta.unwrap_or_else(|| default_eta(g.d(), y.values()))
    };
    ax.values()
        .iter()
        .zip(y.values())
        .all(|(&a, &b)| (a - b).is_negligible(eta))
}

/// Exhaustive oracle: every support of size `<= k` is solved exactly.
///
/// Returns the unique `<= k`-sparse preimage, `None` if there is none, and
/// [`Error::Ambiguous`] when several exist (the graph does not expand enough
/// for this `k`).
pub fn brute_force_decode<T: Scalar>(g: &BipartiteGraph, y: &Sketch<T>, k: usize, budget: u64) -> Result<Option<SparseSignal<T>>> {
    check_sketch(g, y)?;
    let k = k.min(g.n());
    budget::ensure_within(g.n(), k, budget)?;
    let eta = default_eta(g.d(), y.values());

    let y_support: Vec<bool> = y.values().iter().map(|v| !v.is_negligible(eta)).collect();
    let need = y_support.iter().filter(|&&b| b).count();

    let mut found: Vec<(Vec<usize>, Option<Vec<T>>)> = Vec::new();
    if need == 0 {
        found.push((Vec::new(), Some(Vec::new())));
    }

    struct Walk<'a, T: Scalar> {
        g: &'a BipartiteGraph,
        y: &'a [T],
        eta: f64,
        y_support: &'a [bool],
        need: usize,
        covered: usize,
        counts: Vec<u32>,
        set: Vec<usize>,
        found: &'a mut Vec<(Vec<usize>, Option<Vec<T>>)>,
        infinite: Option<Vec<usize>>,
    }

    impl<T: Scalar> Walk<'_, T> {
        fn push(&mut self, v: usize) {
            for &r in self.g.neighbors(v) {
                if self.counts[r] == 0 && self.y_support[r] {
                    self.covered += 1;
                }
                self.counts[r] += 1;
            }
            self.set.push(v);
        }

        fn pop(&mut self) {
            let v = self.set.pop().unwrap();
            for &r in self.g.neighbors(v) {
                self.counts[r] -= 1;
                if self.counts[r] == 0 && self.y_support[r] {
                    self.covered -= 1;
                }
            }
        }

        fn leaf(&mut self) {
            // A solution supported on the set must cover every nonzero y_i.
            if self.covered < self.need {
                return;
            }
            let columns: Vec<&[usize]> = self.set.iter().map(|&j| self.g.neighbors(j)).collect();
            match T::solve_support(&columns, self.y, self.eta) {
                SupportSolve::Inconsistent | SupportSolve::RankDeficient { consistent: false } => {}
                SupportSolve::RankDeficient { consistent: true } => {
                    self.infinite.get_or_insert_with(|| self.set.clone());
                }
                SupportSolve::Unique(z) => {
                    // Solutions with a zero entry were met at a smaller support.
                    if z.iter().all(|v| !v.is_negligible(self.eta)) {
                        self.found.push((self.set.clone(), Some(z)));
                    }
                }
                SupportSolve::NotRepresentable { full_support, .. } => {
                    if full_support {
                        self.found.push((self.set.clone(), None));
                    }
                }
            }
        }

        fn walk(&mut self, size: usize, next: usize) {
            if self.infinite.is_some() || self.found.len() > 1 {
                return;
            }
            if self.set.len() == size {
                self.leaf();
                return;
            }
            let remaining = size - self.set.len();
            for v in next..=self.g.n() - remaining {
                self.push(v);
                self.walk(size, v + 1);
                self.pop();
            }
        }
    }

    let mut walk = Walk {
        g,
        y: y.values(),
        eta,
        y_support: &y_support,
        need,
        covered: 0,
        counts: vec![0; g.m()],
        set: Vec::new(),
        found: &mut found,
        infinite: None,
    };
    for size in 1..=k {
        walk.walk(size, 0);
    }
    let infinite = walk.infinite.take();

    if infinite.is_some() || found.len() > 1 {
        let mut supports: Vec<Vec<usize>> = found.into_iter().map(|(s, _)| s).collect();
        let has_infinite = infinite.is_some();
        supports.extend(infinite);
        return Err(Error::Ambiguous {
            supports,
            infinite: has_infinite,
        });
    }
    match found.pop() {
        None => Ok(None),
        Some((support, Some(values))) => Ok(Some(
            SparseSignal::from_entries(g.n(), support.into_iter().zip(values))?,
        )),
        Some((support, None)) => Err(Error::NonIntegral { index: support[0] }),
    }
}
