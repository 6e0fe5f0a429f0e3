//! Compressed sensing with unbalanced bipartite expander graphs.
//!
//! The measurement matrix is the 0/1 adjacency matrix of a left-regular
//! bipartite graph. This crate builds and certifies such graphs
//! ([`graph`]), sketches sparse signals ([`sketch`]), recovers exactly
//! sparse signals by iterative gap elimination ([`decode`]), and recovers
//! almost-sparse signals by support identification plus restricted least
//! squares ([`robust`]). [`bench`] runs seeded sweeps and [`cli`] is the
//! command-line front end.

pub mod bench;
pub mod budget;
pub mod cli;
pub mod decode;
pub mod error;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod robust;
pub mod scalar;
pub mod signal;
pub mod sketch;

pub use decode::{
    brute_force_decode, decode_fast, decode_majority, verify_solution, DecodeOptions, DecodeStatus,
    DecodeTrace, Decoded, GapState,
};
pub use error::{Error, Result};
pub use graph::{
    check_expansion, gen_random_graph, gen_right_regular_graph, suggest_params, BipartiteGraph,
    ExpansionOptions, ExpansionReport,
};
pub use robust::{decode_robust_support, least_squares_refine, ripr_error_bound, AlmostSparseModel};
pub use scalar::Scalar;
pub use signal::{Sketch, SparseSignal};
pub use sketch::{encode, nullspace_sparse_search, rip1_bounds};
