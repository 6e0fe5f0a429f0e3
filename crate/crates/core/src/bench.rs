//! Seeded benchmark sweeps and their CSV/markdown reports.
//!
//! A sweep is described by a flat `key = value` file:
//!
//! ```text
//! n = 64
//! m = 48
//! d = 6
//! k = 1, 2, 4
//! epsilon = 0.125
//! decoder = fast, majority
//! trials = 100
//! seed = 7
//! certify = true
//! ```
//!
//! Trial `i` uses seed `seed + i`; the graph and the signal come from
//! independent ChaCha8 streams of that seed. All decoders listed run on the
//! same instance. Wall-clock timing is off unless `timing = true`, so that
//! reports are byte-identical across runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;

use crate::budget;
use crate::decode::{decode_fast, decode_majority, verify_solution, DecodeOptions, DecodeStatus};
use crate::error::{Error, Result};
use crate::graph::{
    check_expansion, gen_random_graph, gen_right_regular_graph, rng_from_seed, BipartiteGraph, ExpansionOptions,
};
use crate::robust::{decode_robust_support, gen_almost_sparse, AlmostSparseModel, RobustOptions, Sign};
use crate::signal::{gen_sparse_signal, SparseSignal};
use crate::sketch::encode;

/// Graph draws tried per trial before a certified sweep gives up on it.
const CERTIFY_ATTEMPTS: u64 = 16;
const SIGNAL_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Decoder {
    Majority,
    Fast,
    Robust,
}

impl Decoder {
    pub fn as_str(self) -> &'static str {
        match self {
            Decoder::Majority => "majority",
            Decoder::Fast => "fast",
            Decoder::Robust => "robust",
        }
    }
}

impl FromStr for Decoder {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "majority" => Ok(Decoder::Majority),
            "fast" => Ok(Decoder::Fast),
            "robust" => Ok(Decoder::Robust),
            other => Err(format!("unknown decoder {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalModel {
    /// Exactly k-sparse integers with magnitudes up to `max_abs`.
    Exact { max_abs: i64 },
    /// Almost k-sparse reals; the right degree comes from the graph.
    Almost { lambda: f64, big_l: f64, delta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub right_regular: bool,
    /// One report row per `(k, decoder)` pair.
    pub ks: Vec<usize>,
    pub signal: SignalModel,
    pub decoders: Vec<Decoder>,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    /// Certify each graph at `s_max = min(3k, largest size within budget)`,
    /// redrawing it when the check fails.
    pub certify: bool,
    pub timing: bool,
    pub budget: u64,
    pub max_iters: Option<usize>,
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid value {value:?} for {key}")))
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::parse(line, format!("invalid boolean {value:?} for {key}"))),
    }
}

fn parse_list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|item| parse_value(line, key, item.trim()))
        .collect()
}

impl TrialSpec {
    /// Parses the `key = value` format. `#` starts a comment; unknown or
    /// repeated keys are errors.
    pub fn parse(text: &str) -> Result<TrialSpec> {
        let mut fields: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::parse(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(Error::parse(line, format!("missing value for {key}")));
            }
            if fields.insert(key.to_string(), (line, value.to_string())).is_some() {
                return Err(Error::parse(line, format!("duplicate key {key}")));
            }
        }

        let mut take = |key: &str| fields.remove(key);
        fn required(field: Option<(usize, String)>, key: &str) -> Result<(usize, String)> {
            field.ok_or_else(|| Error::invalid(format!("spec is missing required key {key}")))
        }

        let (l, v) = required(take("n"), "n")?;
        let n = parse_value(l, "n", &v)?;
        let (l, v) = required(take("m"), "m")?;
        let m = parse_value(l, "m", &v)?;
        let (l, v) = required(take("d"), "d")?;
        let d = parse_value(l, "d", &v)?;
        let (l, v) = required(take("k"), "k")?;
        let ks = parse_list(l, "k", &v)?;
        let (l, v) = required(take("epsilon"), "epsilon")?;
        let epsilon = parse_value(l, "epsilon", &v)?;
        let (l, v) = required(take("trials"), "trials")?;
        let trials = parse_value(l, "trials", &v)?;

        let right_regular = match take("right_regular") {
            Some((l, v)) => parse_bool(l, "right_regular", &v)?,
            None => false,
        };
        let decoders = match take("decoder") {
            Some((l, v)) => parse_list(l, "decoder", &v)?,
            None => vec![Decoder::Fast],
        };
        let seed = match take("seed") {
            Some((l, v)) => parse_value(l, "seed", &v)?,
            None => 0,
        };
        let certify = match take("certify") {
            Some((l, v)) => parse_bool(l, "certify", &v)?,
            None => false,
        };
        let timing = match take("timing") {
            Some((l, v)) => parse_bool(l, "timing", &v)?,
            None => false,
        };
        let budget = match take("budget") {
            Some((l, v)) => parse_value(l, "budget", &v)?,
            None => budget::DEFAULT_BUDGET,
        };
        let max_iters = match take("max_iters") {
            Some((l, v)) => Some(parse_value(l, "max_iters", &v)?),
            None => None,
        };

        let kind = take("signal");
        let max_abs = take("max_value");
        let lambda = take("lambda");
        let big_l = take("big_l");
        let delta = take("delta");
        let signal = match kind.as_ref().map(|(l, v)| (*l, v.as_str())) {
            None | Some((_, "exact")) => SignalModel::Exact {
                max_abs: match max_abs {
                    Some((l, v)) => parse_value(l, "max_value", &v)?,
                    None => 100,
                },
            },
            Some((_, "almost")) => {
                let (ll, lv) = required(lambda, "lambda")?;
                let (bl, bv) = required(big_l, "big_l")?;
                let (dl, dv) = required(delta, "delta")?;
                SignalModel::Almost {
                    lambda: parse_value(ll, "lambda", &lv)?,
                    big_l: parse_value(bl, "big_l", &bv)?,
                    delta: parse_value(dl, "delta", &dv)?,
                }
            }
            Some((l, other)) => return Err(Error::parse(l, format!("unknown signal model {other:?}"))),
        };

        if let Some((key, (line, _))) = fields.into_iter().next() {
            return Err(Error::parse(line, format!("unknown key {key}")));
        }

        let spec = TrialSpec {
            n,
            m,
            d,
            right_regular,
            ks,
            signal,
            decoders,
            epsilon,
            trials,
            seed,
            certify,
            timing,
            budget,
            max_iters,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.d > self.m {
            return Err(Error::invalid(format!(
                "need n >= 1 and 1 <= d <= m, got n={} m={} d={}",
                self.n, self.m, self.d
            )));
        }
        if self.right_regular && (self.n * self.d) % self.m != 0 {
            return Err(Error::invalid("right-regular graphs need m to divide n*d"));
        }
        if !(0.0..0.25).contains(&self.epsilon) {
            return Err(Error::invalid(format!("epsilon must lie in [0, 1/4), got {}", self.epsilon)));
        }
        if self.ks.iter().any(|&k| k > self.n) {
            return Err(Error::invalid("every k must be at most n"));
        }
        if self.decoders.is_empty() {
            return Err(Error::invalid("at least one decoder is required"));
        }
        for &decoder in &self.decoders {
            match (decoder, self.signal) {
                (Decoder::Robust, SignalModel::Almost { .. }) => {
                    if !self.right_regular {
                        return Err(Error::invalid("the robust decoder needs right_regular = true"));
                    }
                }
                (Decoder::Robust, SignalModel::Exact { .. }) => {
                    return Err(Error::invalid("the robust decoder needs signal = almost"))
                }
                (_, SignalModel::Almost { .. }) => {
                    return Err(Error::invalid("majority and fast decoders need signal = exact"))
                }
                (_, SignalModel::Exact { max_abs }) if max_abs < 1 => {
                    return Err(Error::invalid("max_value must be positive"))
                }
                _ => {}
            }
        }
        if let SignalModel::Almost { lambda, big_l, delta } = self.signal {
            for &k in &self.ks {
                self.model(k, lambda, big_l, delta).validate()?;
            }
        }
        Ok(())
    }

    fn model(&self, k: usize, lambda: f64, big_l: f64, delta: f64) -> AlmostSparseModel {
        AlmostSparseModel {
            k,
            lambda,
            big_l,
            delta,
            right_degree: self.n * self.d / self.m,
        }
    }

    /// Largest certification size for `k`: `min(3k, s)` with `s` the
    /// largest size whose subset count fits the budget.
    pub fn certification_size(&self, k: usize) -> usize {
        let mut s = 0;
        while s < 3 * k && s < self.n && budget::subsets_up_to(self.n, s + 1) <= self.budget as u128 {
            s += 1;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub k: usize,
    pub decoder: Decoder,
    /// Certification size reached by the graph, if it was certified.
    pub certified: Option<usize>,
    pub success: bool,
    pub iterations: usize,
    /// Smallest and largest per-iteration decrease of the gap support.
    pub min_gap_drop: Option<i64>,
    pub max_gap_drop: Option<i64>,
    /// Decoder wall time in nanoseconds when timing is enabled.
    pub nanos: Option<u128>,
}

/// One report row: a `(k, decoder)` aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub decoder: Decoder,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub k: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub successes: usize,
    pub iters_p50: usize,
    pub iters_max: usize,
    pub iters_mean: f64,
    pub ms_per_iter: Option<f64>,
    /// `Some(s)` when every graph of the row was certified at size `s`.
    pub certified: Option<usize>,
}

impl ReportRow {
    pub fn success_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    pub fn iters_per_k(&self) -> f64 {
        if self.k == 0 {
            0.0
        } else {
            self.iters_mean / self.k as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialReport {
    pub rows: Vec<ReportRow>,
    /// Ordered by trial, then k, then decoder as listed in the spec.
    pub outcomes: Vec<TrialOutcome>,
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = rng_from_seed(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

fn draw_graph(spec: &TrialSpec, seed: u64) -> Result<BipartiteGraph> {
    if spec.right_regular {
        gen_right_regular_graph(spec.n, spec.m, spec.d, seed)
    } else {
        gen_random_graph(spec.n, spec.m, spec.d, seed)
    }
}

/// The trial's graph for sparsity `k`, and the certification size if it
/// passed.
fn trial_graph(spec: &TrialSpec, seed: u64, k: usize) -> Result<(BipartiteGraph, Option<usize>)> {
    if !spec.certify {
        return Ok((draw_graph(spec, derive_seed(seed, 0))?, None));
    }
    let s_max = spec.certification_size(k);
    let opts = ExpansionOptions {
        budget: spec.budget,
        sample: None,
    };
    let mut last = None;
    for attempt in 0..CERTIFY_ATTEMPTS {
        let g = draw_graph(spec, derive_seed(seed, attempt))?;
        if s_max == 0 || check_expansion(&g, s_max, spec.epsilon, &opts)?.verified {
            return Ok((g, Some(s_max)));
        }
        last = Some(g);
    }
    Ok((last.expect("at least one attempt"), None))
}

fn timed<R>(timing: bool, f: impl FnOnce() -> R) -> (R, Option<u128>) {
    if timing {
        let start = Instant::now();
        let r = f();
        (r, Some(start.elapsed().as_nanos()))
    } else {
        (f(), None)
    }
}

fn run_trial(spec: &TrialSpec, trial: usize) -> Vec<TrialOutcome> {
    let seed = spec.seed.wrapping_add(trial as u64);
    let mut outcomes = Vec::new();
    for &k in &spec.ks {
        let record = |decoder, certified, result: Option<(bool, usize, Option<i64>, Option<i64>)>, nanos| {
            let (success, iterations, min_gap_drop, max_gap_drop) = result.unwrap_or((false, 0, None, None));
            TrialOutcome {
                trial,
                seed,
                k,
                decoder,
                certified,
                success,
                iterations,
                min_gap_drop,
                max_gap_drop,
                nanos,
            }
        };
        let (g, certified) = match trial_graph(spec, seed, k) {
            Ok(pair) => pair,
            Err(_) => {
                outcomes.extend(spec.decoders.iter().map(|&dec| record(dec, None, None, None)));
                continue;
            }
        };
        let signal_seed = derive_seed(seed, SIGNAL_STREAM + k as u64);
        for &decoder in &spec.decoders {
            let (result, nanos) = match spec.signal {
                SignalModel::Exact { max_abs } => {
                    let opts = DecodeOptions {
                        max_iters: spec.max_iters,
                        k_hint: Some(k),
                        eta: None,
                    };
                    exact_trial(spec, &g, k, max_abs, signal_seed, decoder, &opts)
                }
                SignalModel::Almost { lambda, big_l, delta } => {
                    let model = spec.model(k, lambda, big_l, delta);
                    robust_trial(spec, &g, &model, signal_seed)
                }
            };
            outcomes.push(record(decoder, certified, result, nanos));
        }
    }
    outcomes
}

type TrialResult = Option<(bool, usize, Option<i64>, Option<i64>)>;

fn exact_trial(
    spec: &TrialSpec,
    g: &BipartiteGraph,
    k: usize,
    max_abs: i64,
    seed: u64,
    decoder: Decoder,
    opts: &DecodeOptions,
) -> (TrialResult, Option<u128>) {
    let Ok(x) = gen_sparse_signal(spec.n, k, max_abs, seed) else {
        return (None, None);
    };
    let Ok(y) = encode(g, &x) else {
        return (None, None);
    };
    let (decoded, nanos) = timed(spec.timing, || match decoder {
        Decoder::Majority => decode_majority(g, &y, opts),
        _ => decode_fast(g, &y, spec.epsilon, opts),
    });
    let Ok(decoded) = decoded else {
        return (None, nanos);
    };
    let success = decoded.status() == DecodeStatus::Recovered
        && verify_solution(g, &y, &decoded.estimate, None)
        && decoded.estimate == x;
    let trace = &decoded.trace;
    let max_drop = trace
        .records
        .iter()
        .map(|r| r.gap_support_before as i64 - r.gap_support_after as i64)
        .max();
    (Some((success, trace.iterations(), trace.min_gap_drop(), max_drop)), nanos)
}

fn robust_trial(spec: &TrialSpec, g: &BipartiteGraph, model: &AlmostSparseModel, seed: u64) -> (TrialResult, Option<u128>) {
    let Ok(x) = gen_almost_sparse(model, spec.n, seed) else {
        return (None, None);
    };
    let Ok(y) = encode(g, &x) else {
        return (None, None);
    };
    let opts = RobustOptions {
        max_iters: spec.max_iters,
    };
    let (found, nanos) = timed(spec.timing, || decode_robust_support(g, &y, model, spec.epsilon, &opts));
    let Ok(found) = found else {
        return (None, nanos);
    };
    let truth = significant_support(&x, model);
    let success = found.trace.status == DecodeStatus::Recovered && found.support == truth;
    let trace = &found.trace;
    let max_drop = trace
        .records
        .iter()
        .map(|r| r.gap_support_before as i64 - r.gap_support_after as i64)
        .max();
    (Some((success, trace.iterations(), trace.min_gap_drop(), max_drop)), nanos)
}

/// Positions and signs of the entries above `lambda` in magnitude.
pub fn significant_support(x: &SparseSignal<f64>, model: &AlmostSparseModel) -> Vec<(usize, Sign)> {
    x.iter()
        .filter(|&(_, v)| v.abs() > model.lambda)
        .map(|(j, v)| (j, Sign::of(v)))
        .collect()
}

/// Lower median: the `ceil(N/2)`-th smallest value.
fn lower_median(sorted: &[usize]) -> usize {
    if sorted.is_empty() {
        0
    } else {
        sorted[(sorted.len() + 1) / 2 - 1]
    }
}

fn summarize(spec: &TrialSpec, outcomes: &[TrialOutcome]) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for &k in &spec.ks {
        for &decoder in &spec.decoders {
            let group: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.k == k && o.decoder == decoder).collect();
            let mut iters: Vec<usize> = group.iter().map(|o| o.iterations).collect();
            iters.sort_unstable();
            let total_iters: usize = iters.iter().sum();
            let ms_per_iter = if spec.timing && total_iters > 0 {
                let nanos: u128 = group.iter().filter_map(|o| o.nanos).sum();
                Some(nanos as f64 / 1e6 / total_iters as f64)
            } else {
                None
            };
            let certified = if spec.certify && !group.is_empty() && group.iter().all(|o| o.certified.is_some()) {
                Some(spec.certification_size(k))
            } else {
                None
            };
            rows.push(ReportRow {
                decoder,
                n: spec.n,
                m: spec.m,
                d: spec.d,
                k,
                epsilon: spec.epsilon,
                trials: group.len(),
                successes: group.iter().filter(|o| o.success).count(),
                iters_p50: lower_median(&iters),
                iters_max: iters.last().copied().unwrap_or(0),
                iters_mean: if iters.is_empty() {
                    0.0
                } else {
                    total_iters as f64 / iters.len() as f64
                },
                ms_per_iter,
                certified,
            });
        }
    }
    rows
}

/// Runs every trial of the spec, in parallel, and aggregates the outcomes.
/// Failed trials are recorded, never fatal.
pub fn run_sweep(spec: &TrialSpec) -> Result<TrialReport> {
    spec.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| run_trial(spec, trial))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let rows = summarize(spec, &outcomes);
    Ok(TrialReport { rows, outcomes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

pub const REPORT_COLUMNS: [&str; 12] = [
    "decoder",
    "n",
    "m",
    "d",
    "k",
    "epsilon",
    "success_rate",
    "iters_p50",
    "iters_max",
    "iters_per_k",
    "ms_per_iter",
    "certified_s_max",
];

fn row_cells(row: &ReportRow) -> Vec<String> {
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".to_string());
    vec![
        row.decoder.as_str().to_string(),
        row.n.to_string(),
        row.m.to_string(),
        row.d.to_string(),
        row.k.to_string(),
        row.epsilon.to_string(),
        row.success_rate().to_string(),
        row.iters_p50.to_string(),
        row.iters_max.to_string(),
        row.iters_per_k().to_string(),
        opt(row.ms_per_iter.map(|v| v.to_string())),
        opt(row.certified.map(|v| v.to_string())),
    ]
}

/// Renders the report rows. `-` marks an absent timing or an uncertified
/// row.
pub fn emit_report(report: &TrialReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(&REPORT_COLUMNS.join(","));
            out.push('\n');
            for row in &report.rows {
                out.push_str(&row_cells(row).join(","));
                out.push('\n');
            }
        }
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| {} |", REPORT_COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(REPORT_COLUMNS.len()));
            for row in &report.rows {
                let _ = writeln!(out, "| {} |", row_cells(row).join(" | "));
            }
        }
    }
    out
}
