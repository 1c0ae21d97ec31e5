//! Randomization-based (Neymanian) inference for 2^K factorial experiments
//! with binary outcomes.
//!
//! The crate is organized around five pieces:
//!
//! - [`design_matrix`]: the ±1 model matrix, treatment combinations and effect labels.
//! - [`finite_population`]: the full science table and every population quantity,
//!   computed exactly over the rationals.
//! - [`neymanian`]: complete randomization, observed counts, effect estimates and the
//!   classic and improved variance estimators.
//! - [`oracle`]: brute-force enumeration over assignments and couplings that certifies
//!   the closed-form results on small instances.
//! - [`sim`]: the Monte Carlo ratio experiment and plot-data emission.
//!
//! The [`cli`] module wires all of it to the `fneyman` command-line tool.

pub mod cli;
pub mod design_matrix;
pub mod error;
pub mod finite_population;
pub mod neymanian;
pub mod oracle;
pub mod rational;
pub mod sim;

pub use design_matrix::{ModelMatrix, TreatmentCombination};
pub use error::{Error, Result};
pub use finite_population::{BoundaryCondition, EffectTable, JointCounts, PotentialOutcomeTable};
pub use neymanian::{Assignment, Design, EffectAnalysis, ObservedData};
pub use rational::Exact;
