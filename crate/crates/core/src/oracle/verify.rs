//! Property suite behind `fneyman verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::contrast_inequality::verify_contrast_inequality;
use super::couplings::{coupling_bound, min_s2_over_couplings, MarginSpec};
use super::moments::exact_randomization_moments;
use super::DEFAULT_CAP;
use crate::design_matrix::ModelMatrix;
use crate::error::{Error, Result};
use crate::finite_population::{
    average_effect, boundary_condition, s2_effect_closed_form, s2_effect_direct, sharp_lower_bound,
    true_sampling_variance, unclipped_lower_bound, JointCounts, PotentialOutcomeTable,
};
use crate::neymanian::Design;
use crate::rational::{self, Exact};

/// Largest number of labelled tables visited in exhaustive mode.
pub const EXHAUSTIVE_TABLE_CAP: u128 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableSource {
    /// Every labelled `N x J` binary table.
    Exhaustive,
    /// `reps` random tables drawn from `seed`.
    Fuzz { reps: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub factors: u32,
    pub units: usize,
    /// Restrict the sharpness check to this margin vector.
    pub margins: Option<Vec<usize>>,
    pub source: TableSource,
    pub cap: u128,
}

impl VerifyConfig {
    pub fn new(factors: u32, units: usize, source: TableSource) -> Self {
        VerifyConfig {
            factors,
            units,
            margins: None,
            source,
            cap: DEFAULT_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyResult {
    pub property: &'static str,
    pub status: Status,
    pub checked: u64,
    pub failures: u64,
    pub detail: String,
}

impl PropertyResult {
    fn tally(property: &'static str, checked: u64, failures: u64, first: Option<String>) -> Self {
        PropertyResult {
            property,
            status: if failures == 0 {
                Status::Pass
            } else {
                Status::Fail
            },
            checked,
            failures,
            detail: first.unwrap_or_default(),
        }
    }

    fn skipped(property: &'static str, why: impl Into<String>) -> Self {
        PropertyResult {
            property,
            status: Status::Skipped,
            checked: 0,
            failures: 0,
            detail: why.into(),
        }
    }

    /// `property=<name> status=<s> checked=<n> failures=<n> [detail="..."]`
    pub fn line(&self) -> String {
        let status = match self.status {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
        };
        let mut s = format!(
            "property={} status={} checked={} failures={}",
            self.property, status, self.checked, self.failures
        );
        if !self.detail.is_empty() {
            s.push_str(&format!(" detail={:?}", self.detail));
        }
        s
    }
}

/// Random binary table. Mixes independent cells with tables built from a
/// couple of row patterns so that boundary cases show up often.
pub fn random_table<R: Rng + ?Sized>(
    rng: &mut R,
    units: usize,
    arms: usize,
) -> PotentialOutcomeTable {
    let patterns = 1u32 << arms;
    let rows: Vec<u32> = if rng.random_bool(0.3) {
        let pool: Vec<u32> = (0..rng.random_range(1..=3))
            .map(|_| rng.random_range(0..patterns))
            .collect();
        (0..units)
            .map(|_| pool[rng.random_range(0..pool.len())])
            .collect()
    } else {
        let density: f64 = rng.random_range(0.05..0.95);
        (0..units)
            .map(|_| {
                (0..arms).fold(0u32, |acc, j| {
                    acc | (u32::from(rng.random_bool(density)) << j)
                })
            })
            .collect()
    };
    PotentialOutcomeTable::from_patterns(arms, &rows).expect("patterns fit the arm count")
}

fn tables(cfg: &VerifyConfig, arms: usize) -> Result<Vec<PotentialOutcomeTable>> {
    match &cfg.source {
        TableSource::Exhaustive => {
            let cells = cfg.units * arms;
            let total = 1u128.checked_shl(cells as u32).filter(|_| cells < 128);
            match total {
                Some(t) if t <= EXHAUSTIVE_TABLE_CAP => {}
                count => {
                    return Err(Error::Refused {
                        what: "tables",
                        count,
                        cap: EXHAUSTIVE_TABLE_CAP,
                    })
                }
            }
            let mask = (1u64 << arms) - 1;
            (0u64..1 << cells)
                .map(|bits| {
                    let rows: Vec<u32> = (0..cfg.units)
                        .map(|i| ((bits >> (i * arms)) & mask) as u32)
                        .collect();
                    PotentialOutcomeTable::from_patterns(arms, &rows)
                })
                .collect()
        }
        TableSource::Fuzz { reps, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok((0..*reps)
                .map(|_| random_table(&mut rng, cfg.units, arms))
                .collect())
        }
    }
}

fn margin_specs(cfg: &VerifyConfig, arms: usize) -> Result<Vec<MarginSpec>> {
    if let Some(m) = &cfg.margins {
        if m.len() != arms {
            return Err(Error::invalid(format!(
                "expected {arms} margins, got {}",
                m.len()
            )));
        }
        return Ok(vec![MarginSpec::new(cfg.units, m.clone())?]);
    }
    match &cfg.source {
        TableSource::Exhaustive => {
            let base = cfg.units + 1;
            let total = (base as u128).checked_pow(arms as u32).unwrap_or(u128::MAX);
            if total > 100_000 {
                return Ok(Vec::new());
            }
            (0..total as usize)
                .map(|mut code| {
                    let margins = (0..arms)
                        .map(|_| {
                            let v = code % base;
                            code /= base;
                            v
                        })
                        .collect();
                    MarginSpec::new(cfg.units, margins)
                })
                .collect()
        }
        TableSource::Fuzz { reps, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
            (0..*reps)
                .map(|_| {
                    MarginSpec::new(
                        cfg.units,
                        (0..arms).map(|_| rng.random_range(0..=cfg.units)).collect(),
                    )
                })
                .collect()
        }
    }
}

fn check_tables(tables: &[PotentialOutcomeTable], m: &ModelMatrix) -> Result<[PropertyResult; 3]> {
    let (mut n1, mut f1, mut d1) = (0u64, 0u64, None);
    let (mut n2, mut f2, mut d2) = (0u64, 0u64, None);
    let (mut n3, mut f3, mut d3) = (0u64, 0u64, None);
    for (ti, t) in tables.iter().enumerate() {
        let counts = JointCounts::from_table(t);
        for l in 1..m.arms() {
            let direct = s2_effect_direct(t, m, l)?;
            n1 += 1;
            if direct != s2_effect_closed_form(t, m, l)? {
                f1 += 1;
                d1.get_or_insert(format!("table {ti}, effect {l}"));
            }

            n2 += 1;
            if !verify_contrast_inequality(t, m, l)?.consistent() {
                f2 += 1;
                d2.get_or_insert(format!("table {ti}, effect {l}"));
            }

            n3 += 1;
            let tau = average_effect(&counts, m, l);
            let tight = direct == unclipped_lower_bound(tau, m.factors(), t.units());
            let valid = direct >= sharp_lower_bound(tau, m.factors(), t.units());
            if !valid || tight != boundary_condition(t, m, l)?.holds() {
                f3 += 1;
                d3.get_or_insert(format!("table {ti}, effect {l}"));
            }
        }
    }
    Ok([
        PropertyResult::tally("closed_form_equivalence", n1, f1, d1),
        PropertyResult::tally("contrast_inequality", n2, f2, d2),
        PropertyResult::tally("bound_validity", n3, f3, d3),
    ])
}

fn check_moments(
    tables: &[PotentialOutcomeTable],
    m: &ModelMatrix,
    cfg: &VerifyConfig,
) -> Result<PropertyResult> {
    let design = match Design::balanced(m.factors(), cfg.units) {
        Ok(d) => d,
        Err(_) => {
            return Ok(PropertyResult::skipped(
                "randomization_moments",
                "N is not a multiple of J with at least two units per arm",
            ))
        }
    };
    let n = rational::int(cfg.units as i128);
    let (mut checked, mut failures, mut detail) = (0u64, 0u64, None);
    for (ti, t) in tables.iter().enumerate() {
        for l in 1..m.arms() {
            let mo = match exact_randomization_moments(t, m, &design, l, cfg.cap) {
                Ok(mo) => mo,
                Err(Error::Refused { count, .. }) => {
                    return Ok(PropertyResult::skipped(
                        "randomization_moments",
                        format!("assignment enumeration refused ({count:?} assignments)"),
                    ))
                }
                Err(e) => return Err(e),
            };
            let counts = JointCounts::from_table(t);
            let var = true_sampling_variance(t, m, design.sizes(), l)?;
            let s2: Exact = s2_effect_direct(t, m, l)?;
            checked += 1;
            let ok = mo.mean_estimate == average_effect(&counts, m, l)
                && mo.variance_estimate == var
                && mo.mean_classic - var == s2 / n;
            if !ok {
                failures += 1;
                detail.get_or_insert(format!("table {ti}, effect {l}"));
            }
        }
    }
    Ok(PropertyResult::tally(
        "randomization_moments",
        checked,
        failures,
        detail,
    ))
}

fn check_sharpness(
    specs: &[MarginSpec],
    m: &ModelMatrix,
    cfg: &VerifyConfig,
) -> Result<PropertyResult> {
    if specs.is_empty() {
        return Ok(PropertyResult::skipped(
            "sharpness",
            "too many margin vectors to enumerate",
        ));
    }
    if cfg.units < 2 {
        return Ok(PropertyResult::skipped(
            "sharpness",
            "needs at least two units",
        ));
    }
    if coupling_bound(&specs[0]).is_none_or(|b| b > cfg.cap) {
        return Ok(PropertyResult::skipped(
            "sharpness",
            "coupling enumeration exceeds the cap",
        ));
    }
    let (mut checked, mut failures, mut detail) = (0u64, 0u64, None);
    for spec in specs {
        let margins = spec.margins();
        let n = spec.units() as i128;
        for l in 1..m.arms() {
            let signed: i128 = margins
                .iter()
                .enumerate()
                .map(|(j, &c)| i128::from(m.entry(j, l)) * c as i128)
                .sum();
            let tau = rational::frac(signed, m.effect_divisor() * n);
            let bound = sharp_lower_bound(tau, m.factors(), spec.units());
            let (min, witness) = min_s2_over_couplings(spec, m, l, cfg.cap)?;
            checked += 1;
            if min != bound || !boundary_condition(&witness, m, l)?.holds() {
                failures += 1;
                detail.get_or_insert(format!(
                    "margins {margins:?}, effect {l}: minimum {min} vs bound {bound}"
                ));
            }
        }
    }
    Ok(PropertyResult::tally(
        "sharpness",
        checked,
        failures,
        detail,
    ))
}

/// Run every property for the configured tables and margins.
pub fn run_verification(cfg: &VerifyConfig) -> Result<Vec<PropertyResult>> {
    let m = ModelMatrix::new(cfg.factors)?;
    if cfg.units < 2 {
        return Err(Error::invalid("verification needs at least two units"));
    }
    let tables = tables(cfg, m.arms())?;
    let [closed_form, inequality, bound] = check_tables(&tables, &m)?;
    let moments = check_moments(&tables, &m, cfg)?;
    let specs = margin_specs(cfg, m.arms())?;
    let sharp = check_sharpness(&specs, &m, cfg)?;
    Ok(vec![closed_form, inequality, bound, moments, sharp])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_exhaustive_passes() {
        let res = run_verification(&VerifyConfig::new(1, 4, TableSource::Exhaustive)).unwrap();
        for r in &res {
            assert_eq!(r.status, Status::Pass, "{}", r.line());
        }
        assert_eq!(res[0].checked, 256);
        assert_eq!(res[4].checked, 25);
    }

    #[test]
    fn fuzz_is_seeded() {
        let cfg = VerifyConfig::new(2, 8, TableSource::Fuzz { reps: 5, seed: 3 });
        let a = run_verification(&VerifyConfig {
            margins: Some(vec![2, 2, 6, 6]),
            ..cfg.clone()
        })
        .unwrap();
        let b = run_verification(&VerifyConfig {
            margins: Some(vec![2, 2, 6, 6]),
            ..cfg
        })
        .unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.status == Status::Pass), "{a:?}");
    }

    #[test]
    fn refuses_large_exhaustive() {
        assert!(matches!(
            run_verification(&VerifyConfig::new(2, 8, TableSource::Exhaustive)),
            Err(Error::Refused { .. })
        ));
    }

    #[test]
    fn line_format() {
        let r = PropertyResult::tally("x", 3, 0, None);
        assert_eq!(r.line(), "property=x status=pass checked=3 failures=0");
    }
}
