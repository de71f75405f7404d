//! Scene-graph canonicalization: the exact closure procedure, its
//! brute-force fixed-point oracle, and the two weighted variants driven by
//! learnable relation-property parameters.

mod oracle;
mod params;
mod paths;
mod sgc;
mod wsgc_e;
mod wsgc_s;

pub use oracle::{closure_oracle, ORACLE_MAX_NODES};
pub use params::{
    sigmoid, sigmoid_prime, softmax, CanonGrads, CanonParams, FormulaSet, FormulaSetFile,
};
pub use paths::{max_product_paths, PathTable};
pub use sgc::sgc;
pub use wsgc_e::{subgrad_wsgc_e, wsgc_e, EdgeProvenance, PathStep, WsgcETrace};
pub use wsgc_s::{wsgc_s, ConverseDraw, SampleRecord};

/// Default pruning threshold on completed-edge weights in the exact
/// weighted canonicalization; completions at or below it are dropped to
/// bound fill-in. Set to 0.0 to keep everything.
pub const DEFAULT_PRUNE_EPSILON: f64 = 1e-4;
