//! Complete randomization, observed per-arm counts, and the Neymanian
//! estimators built on them.

mod estimate;
mod interval;
mod io;
mod randomization;

pub use estimate::{
    analyze, estimate_effects, improved_variance, variance_classic, variance_improved,
    AnalysisReport, DesignMetadata, EffectAnalysis, ImprovedVariance,
};
pub use interval::{normal_quantile, wald_interval};
pub use randomization::{
    complete_randomization, derive_seed, observe, Assignment, Design, ObservedData,
};
