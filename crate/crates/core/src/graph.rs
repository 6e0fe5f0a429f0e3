//! Left-regular bipartite graphs used as 0/1 measurement matrices.
//!
//! Left nodes are signal coordinates, right nodes are measurements. Every
//! left node has exactly `d` distinct neighbors, stored sorted.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::budget;
use crate::error::{Error, Result};

/// Seedable generator used everywhere a seed appears: ChaCha8 seeded through
/// `SeedableRng::seed_from_u64`.
pub type Rng64 = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    n: usize,
    m: usize,
    d: usize,
    /// Row-major `n * d` neighbor table.
    adjacency: Vec<usize>,
    right_degree: Option<usize>,
    /// CSR transpose: left neighbors of each right node.
    right_offsets: Vec<usize>,
    right_nodes: Vec<usize>,
}

impl BipartiteGraph {
    /// Builds a graph from explicit neighbor lists, sorting each row.
    ///
    /// Fails unless every row has exactly `d` distinct entries in `[0, m)`.
    pub fn from_rows(m: usize, d: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || d == 0 || d > m {
            return Err(Error::invalid(format!(
                "need n >= 1 and 1 <= d <= m, got n={n} m={m} d={d}"
            )));
        }
        let mut adjacency = Vec::with_capacity(n * d);
        for (i, mut row) in rows.into_iter().enumerate() {
            if row.len() != d {
                return Err(Error::Validation(format!(
                    "row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
            row.sort_unstable();
            if let Some(&bad) = row.iter().find(|&&r| r >= m) {
                return Err(Error::Validation(format!(
                    "row {i} has neighbor {bad} outside [0, {m})"
                )));
            }
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Validation(format!("row {i} repeats a neighbor")));
            }
            adjacency.extend(row);
        }
        Ok(Self::from_table(n, m, d, adjacency))
    }

    fn from_table(n: usize, m: usize, d: usize, adjacency: Vec<usize>) -> Self {
        let mut degree = vec![0usize; m];
        for &r in &adjacency {
            degree[r] += 1;
        }
        let mut right_offsets = Vec::with_capacity(m + 1);
        right_offsets.push(0);
        for &deg in &degree {
            right_offsets.push(right_offsets.last().unwrap() + deg);
        }
        let mut fill = right_offsets[..m].to_vec();
        let mut right_nodes = vec![0usize; n * d];
        for j in 0..n {
            for &r in &adjacency[j * d..(j + 1) * d] {
                right_nodes[fill[r]] = j;
                fill[r] += 1;
            }
        }
        let right_degree = match degree.first() {
            Some(&first) if degree.iter().all(|&x| x == first) => Some(first),
            _ => None,
        };
        let g = BipartiteGraph {
            n,
            m,
            d,
            adjacency,
            right_degree,
            right_offsets,
            right_nodes,
        };
        debug_assert!(g.check_invariants().is_ok());
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Common right degree `D`, present iff every right node has the same
    /// number of edges (then `n * d == m * D`).
    pub fn right_degree(&self) -> Option<usize> {
        self.right_degree
    }

    /// Sorted right neighbors of left node `j`.
    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.adjacency[j * self.d..(j + 1) * self.d]
    }

    /// Left neighbors of right node `i`, ascending.
    pub fn left_neighbors(&self, i: usize) -> &[usize] {
        &self.right_nodes[self.right_offsets[i]..self.right_offsets[i + 1]]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.adjacency.chunks_exact(self.d)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Re-checks the structural invariants.
    pub fn check_invariants(&self) -> Result<()> {
        if self.adjacency.len() != self.n * self.d {
            return Err(Error::Validation("edge count differs from n*d".into()));
        }
        for (j, row) in self.rows().enumerate() {
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&r| r >= self.m) {
                return Err(Error::Validation(format!("row {j} is not a sorted d-subset")));
            }
        }
        if let Some(deg) = self.right_degree {
            if self.n * self.d != self.m * deg {
                return Err(Error::Validation("n*d != m*D".into()));
            }
        }
        Ok(())
    }
}

/// Each left node gets a uniform `d`-subset of the `m` right nodes.
pub fn gen_random_graph(n: usize, m: usize, d: usize, seed: u64) -> Result<BipartiteGraph> {
    if n == 0 || d == 0 || d > m {
        return Err(Error::invalid(format!(
            "need n >= 1 and 1 <= d <= m, got n={n} m={m} d={d}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut adjacency = Vec::with_capacity(n * d);
    for _ in 0..n {
        let mut row = index::sample(&mut rng, m, d).into_vec();
        row.sort_unstable();
        adjacency.extend(row);
    }
    Ok(BipartiteGraph::from_table(n, m, d, adjacency))
}

/// Left degree `d` and right degree `D = n*d/m` exactly, via a shuffled
/// configuration model whose repeated neighbors are repaired by random stub
/// swaps.
pub fn gen_right_regular_graph(n: usize, m: usize, d: usize, seed: u64) -> Result<BipartiteGraph> {
    if n == 0 || d == 0 || d > m {
        return Err(Error::invalid(format!(
            "need n >= 1 and 1 <= d <= m, got n={n} m={m} d={d}"
        )));
    }
    if (n * d) % m != 0 {
        return Err(Error::invalid(format!("m={m} does not divide n*d={}", n * d)));
    }
    let right_degree = n * d / m;
    let mut rng = rng_from_seed(seed);
    let mut stubs: Vec<usize> = (0..m)
        .flat_map(|r| std::iter::repeat(r).take(right_degree))
        .collect();
    stubs.shuffle(&mut rng);

    let total = stubs.len();
    let contains = |stubs: &[usize], node: usize, r: usize| {
        stubs[node * d..(node + 1) * d].contains(&r)
    };
    let max_attempts = 1000 * total.max(1);
    let mut attempts = 0usize;
    loop {
        let conflict = (0..total).find(|&p| {
            let node = p / d;
            stubs[node * d..p].contains(&stubs[p])
        });
        let Some(p) = conflict else { break };
        let a = p / d;
        loop {
            attempts += 1;
            if attempts > max_attempts {
                return Err(Error::invalid(format!(
                    "collision repair did not converge for n={n} m={m} d={d}"
                )));
            }
            let q = rng.gen_range(0..total);
            let b = q / d;
            if b == a || contains(&stubs, a, stubs[q]) || contains(&stubs, b, stubs[p]) {
                continue;
            }
            stubs.swap(p, q);
            break;
        }
    }

    for row in stubs.chunks_exact_mut(d) {
        row.sort_unstable();
    }
    let g = BipartiteGraph::from_table(n, m, d, stubs);
    debug_assert_eq!(g.right_degree(), Some(right_degree));
    Ok(g)
}

/// Advisory `(d, m)` for an `(l, 1-epsilon)` expander on `n` left nodes:
/// `d = ceil(c_d ln(n/l) / eps)`, `m = ceil(c_m l ln(n/l) / eps^2)`, with `d`
/// clamped to at most `m`.
pub fn suggest_params(n: usize, l: usize, epsilon: f64, c_d: f64, c_m: f64) -> Result<(usize, usize)> {
    if l == 0 || 2 * l > n {
        return Err(Error::invalid(format!("need 1 <= l <= n/2, got n={n} l={l}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(c_d > 0.0 && c_m > 0.0) {
        return Err(Error::invalid("constants c_d and c_m must be positive"));
    }
    let log_ratio = (n as f64 / l as f64).ln();
    let d = ((c_d * log_ratio / epsilon).ceil() as usize).max(1);
    let m = ((c_m * l as f64 * log_ratio / (epsilon * epsilon)).ceil() as usize).max(1);
    Ok((d.min(m), m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleOptions {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpansionOptions {
    /// Maximum number of subsets the exhaustive search may visit.
    pub budget: u64,
    /// Sampled fallback used when the exhaustive search would exceed the
    /// budget. Without it an over-budget request is refused.
    pub sample: Option<SampleOptions>,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        ExpansionOptions {
            budget: budget::DEFAULT_BUDGET,
            sample: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    pub s_max: usize,
    pub epsilon: f64,
    /// In exhaustive mode: every subset of size `1..=s_max` expands. In
    /// sampled mode only "not falsified".
    pub verified: bool,
    /// `min |N(S)| / (d |S|)` over the checked subsets.
    pub worst_ratio: f64,
    /// Subset attaining `worst_ratio` (smallest size, then lexicographic).
    pub worst_subset: Vec<usize>,
    /// Violating subset when `verified` is false.
    pub witness: Option<Vec<usize>>,
    pub exhaustive: bool,
    pub subsets_checked: u64,
}

/// Candidate minimum: `neighbors / (d * size)` compared exactly.
#[derive(Debug, Clone)]
struct Worst {
    neighbors: usize,
    set: Vec<usize>,
}

impl Worst {
    /// Strict preference: lower ratio, then smaller set, then lexicographic.
    fn beats(&self, other: &Worst) -> bool {
        let lhs = self.neighbors * other.set.len();
        let rhs = other.neighbors * self.set.len();
        lhs < rhs
            || (lhs == rhs
                && (self.set.len() < other.set.len()
                    || (self.set.len() == other.set.len() && self.set < other.set)))
    }

    fn better(a: Option<Worst>, b: Option<Worst>) -> Option<Worst> {
        match (a, b) {
            (Some(a), Some(b)) => Some(if b.beats(&a) { b } else { a }),
            (a, None) => a,
            (None, b) => b,
        }
    }
}

/// Incremental neighborhood counter for a growing subset.
struct Cover<'g> {
    g: &'g BipartiteGraph,
    counts: Vec<u32>,
    distinct: usize,
    set: Vec<usize>,
}

impl<'g> Cover<'g> {
    fn new(g: &'g BipartiteGraph) -> Self {
        Cover {
            g,
            counts: vec![0; g.m()],
            distinct: 0,
            set: Vec::new(),
        }
    }

    fn push(&mut self, v: usize) {
        for &r in self.g.neighbors(v) {
            if self.counts[r] == 0 {
                self.distinct += 1;
            }
            self.counts[r] += 1;
        }
        self.set.push(v);
    }

    fn pop(&mut self) {
        let v = self.set.pop().expect("pop on empty cover");
        for &r in self.g.neighbors(v) {
            self.counts[r] -= 1;
            if self.counts[r] == 0 {
                self.distinct -= 1;
            }
        }
    }

    fn offer(&self, worst: &mut Option<Worst>) {
        consider(worst, self.distinct, &self.set);
    }
}

fn consider(worst: &mut Option<Worst>, neighbors: usize, sorted_set: &[usize]) {
    let cand = Worst {
        neighbors,
        set: sorted_set.to_vec(),
    };
    if worst.as_ref().is_none_or(|w| cand.beats(w)) {
        *worst = Some(cand);
    }
}

fn exhaustive_from(g: &BipartiteGraph, first: usize, s_max: usize) -> (Option<Worst>, u64) {
    fn walk(cover: &mut Cover<'_>, next: usize, s_max: usize, worst: &mut Option<Worst>, checked: &mut u64) {
        for v in next..cover.g.n() {
            cover.push(v);
            *checked += 1;
            // Only the current worst matters; a cheap ratio pre-check avoids
            // cloning the set for every visited subset.
            let improves = worst.as_ref().is_none_or(|w| {
                cover.distinct * w.set.len() <= w.neighbors * cover.set.len()
            });
            if improves {
                cover.offer(worst);
            }
            if cover.set.len() < s_max {
                walk(cover, v + 1, s_max, worst, checked);
            }
            cover.pop();
        }
    }

    let mut cover = Cover::new(g);
    let mut worst = None;
    let mut checked = 1;
    cover.push(first);
    cover.offer(&mut worst);
    if s_max > 1 {
        walk(&mut cover, first + 1, s_max, &mut worst, &mut checked);
    }
    (worst, checked)
}

fn sampled_worst(g: &BipartiteGraph, s_max: usize, opts: SampleOptions) -> (Option<Worst>, u64) {
    let mut rng = rng_from_seed(opts.seed);
    let mut worst = None;
    let mut checked = 0u64;
    let mut cover = Cover::new(g);
    for _ in 0..opts.samples {
        let start = rng.gen_range(0..g.n());
        cover.push(start);
        loop {
            let mut sorted = cover.set.clone();
            sorted.sort_unstable();
            consider(&mut worst, cover.distinct, &sorted);
            checked += 1;
            if cover.set.len() >= s_max {
                break;
            }
            // Prefer nodes colliding with the current set; violating sets
            // are connected through shared neighbors.
            let mut next = None;
            for _ in 0..8 {
                let cand = if rng.gen_bool(0.75) {
                    let member = cover.set[rng.gen_range(0..cover.set.len())];
                    let nbrs = g.neighbors(member);
                    let r = nbrs[rng.gen_range(0..nbrs.len())];
                    let lefts = g.left_neighbors(r);
                    lefts[rng.gen_range(0..lefts.len())]
                } else {
                    rng.gen_range(0..g.n())
                };
                if !cover.set.contains(&cand) {
                    next = Some(cand);
                    break;
                }
            }
            match next {
                Some(v) => cover.push(v),
                None => break,
            }
        }
        while !cover.set.is_empty() {
            cover.pop();
        }
    }
    (worst, checked)
}

/// Checks that every left subset `S` with `1 <= |S| <= s_max` has
/// `|N(S)| > (1 - epsilon) d |S|`.
///
/// Runs exhaustively when the subset count fits `opts.budget`; otherwise
/// falls back to sampling if `opts.sample` is set, and refuses with
/// [`Error::BudgetExceeded`] if not.
pub fn check_expansion(g: &BipartiteGraph, s_max: usize, epsilon: f64, opts: &ExpansionOptions) -> Result<ExpansionReport> {
    if s_max == 0 || s_max > g.n() {
        return Err(Error::invalid(format!(
            "s_max must lie in [1, n={}], got {s_max}",
            g.n()
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }

    let (worst, checked, exhaustive) = match budget::ensure_within(g.n(), s_max, opts.budget) {
        Ok(_) => {
            let (worst, checked) = (0..g.n())
                .into_par_iter()
                .map(|first| exhaustive_from(g, first, s_max))
                .reduce(|| (None, 0), |(wa, ca), (wb, cb)| (Worst::better(wa, wb), ca + cb));
            (worst, checked, true)
        }
        Err(err) => match opts.sample {
            Some(sample) if sample.samples > 0 => {
                let (worst, checked) = sampled_worst(g, s_max, sample);
                (worst, checked, false)
            }
            _ => return Err(err),
        },
    };

    let worst = worst.expect("at least one subset checked");
    let size = worst.set.len();
    let verified = (worst.neighbors as f64) > (1.0 - epsilon) * (g.d() * size) as f64;
    Ok(ExpansionReport {
        s_max,
        epsilon,
        verified,
        worst_ratio: worst.neighbors as f64 / (g.d() * size) as f64,
        witness: (!verified).then(|| worst.set.clone()),
        worst_subset: worst.set,
        exhaustive,
        subsets_checked: checked,
    })
}
