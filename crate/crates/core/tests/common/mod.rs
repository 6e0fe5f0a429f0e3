#![allow(dead_code)]

use expander_cs::budget;
use expander_cs::graph::{
    check_expansion, gen_random_graph, gen_right_regular_graph, BipartiteGraph, ExpansionOptions, SampleOptions,
};
use expander_cs::SparseSignal;

/// Claim-1 constants calibrated for `eps = 1/8` at desk scale.
pub const C_D: f64 = 1.5;
pub const C_M: f64 = 3.0;

/// Largest `s <= s_target` whose exhaustive check fits the default budget.
pub fn feasible_size(n: usize, s_target: usize) -> usize {
    let mut s = 0;
    while s < s_target && s < n && budget::subsets_up_to(n, s + 1) <= budget::DEFAULT_BUDGET as u128 {
        s += 1;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Certification {
    /// Exhaustively verified up to this size.
    pub exhaustive: usize,
    /// Additionally not falsified by sampling up to this size.
    pub sampled: Option<usize>,
}

/// Exhaustive check up to the feasible size, then a sampled check up to
/// `s_target` when the exhaustive one stopped short.
pub fn certify(g: &BipartiteGraph, s_target: usize, eps: f64, seed: u64) -> Option<Certification> {
    let exhaustive = feasible_size(g.n(), s_target);
    let report = check_expansion(g, exhaustive, eps, &ExpansionOptions::default()).unwrap();
    if !report.verified {
        return None;
    }
    if exhaustive == s_target {
        return Some(Certification { exhaustive, sampled: None });
    }
    let opts = ExpansionOptions {
        budget: 0,
        sample: Some(SampleOptions { samples: 2000, seed }),
    };
    let sampled = check_expansion(g, s_target, eps, &opts).unwrap();
    assert!(!sampled.exhaustive);
    sampled.verified.then_some(Certification {
        exhaustive,
        sampled: Some(s_target),
    })
}

/// Draws graphs from consecutive seeds until `count` certify. Returns the
/// certified graphs and the number of draws.
pub fn certified_pool(
    count: usize,
    seed_base: u64,
    mut draw: impl FnMut(u64) -> BipartiteGraph,
    mut accept: impl FnMut(&BipartiteGraph, u64) -> bool,
) -> (Vec<BipartiteGraph>, usize) {
    let mut pool = Vec::new();
    let mut draws = 0;
    while pool.len() < count {
        assert!(draws < 50 * count.max(1), "too few graphs certify");
        let seed = seed_base + draws as u64;
        draws += 1;
        let g = draw(seed);
        if accept(&g, seed) {
            pool.push(g);
        }
    }
    (pool, draws)
}

pub fn random_graph(n: usize, m: usize, d: usize) -> impl FnMut(u64) -> BipartiteGraph {
    move |seed| gen_random_graph(n, m, d, seed).unwrap()
}

pub fn right_regular_graph(n: usize, m: usize, d: usize) -> impl FnMut(u64) -> BipartiteGraph {
    move |seed| gen_right_regular_graph(n, m, d, seed).unwrap()
}

/// `A x` from the row lists alone, as a dense vector.
pub fn dense_product(g: &BipartiteGraph, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.m()];
    for (j, row) in g.rows().enumerate() {
        for &i in row {
            out[i] += x[j];
        }
    }
    out
}

pub fn dense_product_i64(g: &BipartiteGraph, x: &[i64]) -> Vec<i64> {
    let mut out = vec![0i64; g.m()];
    for (j, row) in g.rows().enumerate() {
        for &i in row {
            out[i] += x[j];
        }
    }
    out
}

pub fn to_f64(x: &SparseSignal<i64>) -> SparseSignal<f64> {
    SparseSignal::from_entries(x.dim(), x.iter().map(|(j, v)| (j, v as f64))).unwrap()
}
