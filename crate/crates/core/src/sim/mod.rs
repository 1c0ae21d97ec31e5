//! Monte Carlo comparison of the improved and classic variance estimators.
//!
//! The default scheme draws each arm's success count directly,
//! `n_j^obs ~ Uniform{0, ..., U}` truncated to `[0, n_j]`, and records the
//! ratio of the improved to the classic variance estimate for one effect.
//! The `FromTable` scheme instead fixes a random science table and draws
//! complete randomizations of it.

mod config;
mod plot;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use config::{Scheme, SimConfig};
pub use plot::{emit_plot_data, write_histogram_csv, write_ratio_csv};

use crate::design_matrix::ModelMatrix;
use crate::error::{Error, Result};
use crate::finite_population::{true_sampling_variance, PotentialOutcomeTable};
use crate::neymanian::{
    complete_randomization, derive_seed, estimate_effects, improved_variance, observe,
    variance_classic, Design, ObservedData,
};
use crate::rational;

/// Ratios below this count as an improvement of more than 10%.
pub const IMPROVEMENT_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replicate {
    /// 1-based replicate number.
    pub index: usize,
    pub successes: Vec<u64>,
    pub estimate: f64,
    pub var_classic: f64,
    pub correction: f64,
    pub var_improved: f64,
    /// `var_improved / var_classic`; 1 when both are zero, 0 when only the
    /// classic estimate is zero.
    pub ratio: f64,
    pub clamped: bool,
    /// Arms whose draw exceeded `n_j` and was cut back.
    pub truncated: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSummary {
    pub reps: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub frac_improvement_gt_10pct: f64,
    pub n_clamped: usize,
    pub n_truncated: u64,
    pub histogram: Vec<HistogramBin>,
}

impl RatioSummary {
    pub fn from_replicates(reps: &[Replicate], bins: usize) -> Result<Self> {
        if reps.is_empty() {
            return Err(Error::invalid("cannot summarise zero replicates"));
        }
        let ratios: Vec<f64> = reps.iter().map(|r| r.ratio).collect();
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let below = ratios
            .iter()
            .filter(|&&r| r < IMPROVEMENT_THRESHOLD)
            .count();
        Ok(RatioSummary {
            reps: reps.len(),
            min,
            max,
            mean,
            frac_improvement_gt_10pct: below as f64 / ratios.len() as f64,
            n_clamped: reps.iter().filter(|r| r.clamped).count(),
            n_truncated: reps.iter().map(|r| u64::from(r.truncated)).sum(),
            histogram: histogram(&ratios, min.min(1.0), bins.max(1)),
        })
    }
}

/// Equal-width bins on `[low, 1]`; everything lands in the last bin when the range is empty.
fn histogram(ratios: &[f64], low: f64, bins: usize) -> Vec<HistogramBin> {
    let width = (1.0 - low) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &r in ratios {
        let idx = if width > 0.0 {
            (((r - low) / width) as usize).min(bins - 1)
        } else {
            bins - 1
        };
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, count)| HistogramBin {
            left: low + width * b as f64,
            right: if b + 1 == bins {
                1.0
            } else {
                low + width * (b + 1) as f64
            },
            count,
        })
        .collect()
}

/// Extra figures reported by the `FromTable` scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableDiagnostics {
    pub true_estimate: f64,
    pub true_variance: f64,
    pub mean_var_classic: f64,
    pub mean_var_improved: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub replicates: Vec<Replicate>,
    pub summary: RatioSummary,
    pub table: Option<TableDiagnostics>,
}

fn ratio_of(var_classic: f64, var_improved: f64, correction: f64) -> f64 {
    if var_classic > 0.0 {
        var_improved / var_classic
    } else if correction == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn replicate_from(
    index: usize,
    obs: &ObservedData,
    m: &ModelMatrix,
    effect: usize,
    truncated: u32,
) -> Result<Replicate> {
    let estimate = estimate_effects(obs, m)?[effect - 1];
    let var_classic = variance_classic(obs, m.factors())?;
    let iv = improved_variance(var_classic, estimate, m.factors(), obs.units());
    Ok(Replicate {
        index,
        successes: obs.successes().to_vec(),
        estimate,
        var_classic,
        correction: iv.correction,
        var_improved: iv.var_improved,
        ratio: ratio_of(var_classic, iv.var_improved, iv.correction),
        clamped: iv.clamped,
        truncated,
    })
}

fn draw_counts(cfg: &SimConfig, sizes: &[usize], seed: u64) -> (Vec<u64>, u32) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truncated = 0;
    let counts = sizes
        .iter()
        .map(|&n| {
            let n = n as u64;
            let upper = cfg.obs_max.unwrap_or(n);
            let draw = rng.random_range(0..=upper);
            if draw > n {
                truncated += 1;
                n
            } else {
                draw
            }
        })
        .collect();
    (counts, truncated)
}

/// Science table for the `FromTable` scheme: arm `j` has success
/// probability rising linearly from 0.2 to 0.8 across arms.
fn science_table(units: usize, arms: usize, seed: u64) -> Result<PotentialOutcomeTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..units)
        .map(|_| {
            (0..arms)
                .map(|j| {
                    let p = 0.2 + 0.6 * j as f64 / (arms - 1) as f64;
                    u8::from(rng.random_bool(p))
                })
                .collect()
        })
        .collect();
    PotentialOutcomeTable::new(rows)
}

fn run_indices<F>(reps: usize, workers: Option<usize>, f: F) -> Result<Vec<Replicate>>
where
    F: Fn(usize) -> Result<Replicate> + Sync,
{
    match workers {
        Some(1) => (0..reps).map(&f).collect(),
        _ => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(w) = workers {
                builder = builder.num_threads(w);
            }
            let pool = builder
                .build()
                .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
            pool.install(|| (0..reps).into_par_iter().map(&f).collect())
        }
    }
}

/// Run the configured experiment. Replicate `r` draws from
/// `derive_seed(seed, r)`, so the output does not depend on `workers`.
pub fn run_ratio_simulation(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let m = ModelMatrix::new(cfg.factors)?;
    let design = Design::new(cfg.resolved_arm_sizes()?)?;
    let sizes: Vec<usize> = design.sizes().to_vec();

    match cfg.scheme {
        Scheme::UniformCounts => {
            let replicates = run_indices(cfg.reps, cfg.workers, |r| {
                let (counts, truncated) = draw_counts(cfg, &sizes, derive_seed(cfg.seed, r as u64));
                let obs = ObservedData::new(sizes.iter().map(|&n| n as u64).collect(), counts)?;
                replicate_from(r + 1, &obs, &m, cfg.effect, truncated)
            })?;
            let summary = RatioSummary::from_replicates(&replicates, cfg.bins)?;
            Ok(SimResult {
                replicates,
                summary,
                table: None,
            })
        }
        Scheme::FromTable => {
            let table = science_table(design.units(), m.arms(), derive_seed(cfg.seed, u64::MAX))?;
            let replicates = run_indices(cfg.reps, cfg.workers, |r| {
                let a = complete_randomization(&design, derive_seed(cfg.seed, r as u64));
                let obs = observe(&table, &a)?;
                replicate_from(r + 1, &obs, &m, cfg.effect, 0)
            })?;
            let summary = RatioSummary::from_replicates(&replicates, cfg.bins)?;
            let effects = crate::finite_population::population_effects(&table, &m)?;
            let n = replicates.len() as f64;
            let diagnostics = TableDiagnostics {
                true_estimate: rational::to_f64(&effects.average(cfg.effect)),
                true_variance: rational::to_f64(&true_sampling_variance(
                    &table, &m, &sizes, cfg.effect,
                )?),
                mean_var_classic: replicates.iter().map(|r| r.var_classic).sum::<f64>() / n,
                mean_var_improved: replicates.iter().map(|r| r.var_improved).sum::<f64>() / n,
            };
            Ok(SimResult {
                replicates,
                summary,
                table: Some(diagnostics),
            })
        }
    }
}
