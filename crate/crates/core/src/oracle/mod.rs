//! Brute-force verification on small instances.
//!
//! Every function here enumerates exhaustively and works in exact
//! arithmetic. Enumeration sizes are checked against an explicit cap before
//! any work starts; an oversized request is refused, never sampled.

mod assignments;
mod contrast_inequality;
mod couplings;
mod moments;
pub mod verify;

pub use assignments::{enumerate_assignments, multinomial, Assignments};
pub use contrast_inequality::{
    split_counts, verify_contrast_inequality, ContrastInequalityReport, SplitCounts,
};
pub use couplings::{
    coupling_bound, enumerate_couplings, min_s2_over_couplings, visit_couplings, MarginSpec,
    PatternMultiset,
};
pub use moments::{exact_randomization_moments, RandomizationMoments};

/// Default cap on the number of assignments or couplings enumerated.
pub const DEFAULT_CAP: u128 = 10_000_000;
