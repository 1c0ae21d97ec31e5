use serde::Serialize;

use super::interval::wald_interval;
use super::randomization::ObservedData;
use crate::design_matrix::ModelMatrix;
use crate::error::{Error, Result};

fn check_arms(obs: &ObservedData, factors: u32) -> Result<()> {
    if obs.arms() != 1usize << factors {
        return Err(Error::invalid(format!(
            "observed data has {} arms, but K = {factors} needs {}",
            obs.arms(),
            1usize << factors
        )));
    }
    Ok(())
}

/// `τ̂_l = 2^-(K-1) h_l' p̂` for every effect; entry `l - 1` holds effect `l`.
pub fn estimate_effects(obs: &ObservedData, m: &ModelMatrix) -> Result<Vec<f64>> {
    check_arms(obs, m.factors())?;
    let p = obs.p_hat();
    let divisor = m.effect_divisor() as f64;
    Ok((1..m.arms())
        .map(|l| {
            let contrast: f64 = p
                .iter()
                .enumerate()
                .map(|(j, &pj)| f64::from(m.entry(j, l)) * pj)
                .sum();
            contrast / divisor
        })
        .collect())
}

/// Classic Neymanian variance `2^-2(K-1) Σ_j p̂_j (1 - p̂_j) / (n_j - 1)`.
/// The same value applies to every effect.
pub fn variance_classic(obs: &ObservedData, factors: u32) -> Result<f64> {
    check_arms(obs, factors)?;
    let sum: f64 = obs
        .sizes()
        .iter()
        .zip(obs.p_hat())
        .map(|(&n, p)| p * (1.0 - p) / (n - 1) as f64)
        .sum();
    let scale = (1u64 << (2 * (factors - 1))) as f64;
    Ok(sum / scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImprovedVariance {
    pub correction: f64,
    pub var_improved: f64,
    /// The corrected value went negative and was clamped to zero.
    pub clamped: bool,
}

/// Subtract `(N-1)^-1 max{2^-(K-1)|τ̂| - τ̂^2, 0}` from the classic variance,
/// clamping the result at zero.
pub fn improved_variance(
    var_classic: f64,
    tau_hat: f64,
    factors: u32,
    units: u64,
) -> ImprovedVariance {
    let step = 1.0 / (1u64 << (factors - 1)) as f64;
    let correction = (step * tau_hat.abs() - tau_hat * tau_hat).max(0.0) / (units - 1) as f64;
    let raw = var_classic - correction;
    ImprovedVariance {
        correction,
        var_improved: raw.max(0.0),
        clamped: raw < 0.0,
    }
}

/// Improved variance for every effect; entry `l - 1` holds effect `l`.
pub fn variance_improved(obs: &ObservedData, m: &ModelMatrix) -> Result<Vec<ImprovedVariance>> {
    let classic = variance_classic(obs, m.factors())?;
    let units = obs.units();
    Ok(estimate_effects(obs, m)?
        .into_iter()
        .map(|tau| improved_variance(classic, tau, m.factors(), units))
        .collect())
}

/// Full per-effect record. The interval uses the improved variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectAnalysis {
    pub label: String,
    #[serde(skip)]
    pub effect: usize,
    pub estimate: f64,
    pub var_classic: f64,
    pub correction: f64,
    pub var_improved: f64,
    pub clamped: bool,
    #[serde(skip)]
    pub level: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

pub fn analyze(obs: &ObservedData, m: &ModelMatrix, level: f64) -> Result<Vec<EffectAnalysis>> {
    let classic = variance_classic(obs, m.factors())?;
    let estimates = estimate_effects(obs, m)?;
    let improved = variance_improved(obs, m)?;
    estimates
        .into_iter()
        .zip(improved)
        .enumerate()
        .map(|(idx, (estimate, iv))| {
            let l = idx + 1;
            let (ci_lower, ci_upper) = wald_interval(estimate, iv.var_improved, level)?;
            Ok(EffectAnalysis {
                label: m.label(l).to_string(),
                effect: l,
                estimate,
                var_classic: classic,
                correction: iv.correction,
                var_improved: iv.var_improved,
                clamped: iv.clamped,
                level,
                ci_lower,
                ci_upper,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignMetadata {
    #[serde(rename = "K")]
    pub factors: u32,
    #[serde(rename = "N")]
    pub units: u64,
    #[serde(rename = "n")]
    pub arm_sizes: Vec<u64>,
    pub seed: Option<u64>,
}

/// JSON analysis report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub design: DesignMetadata,
    pub level: f64,
    pub effects: Vec<EffectAnalysis>,
}

impl AnalysisReport {
    pub fn build(obs: &ObservedData, m: &ModelMatrix, level: f64) -> Result<Self> {
        Ok(AnalysisReport {
            design: DesignMetadata {
                factors: m.factors(),
                units: obs.units(),
                arm_sizes: obs.sizes().to_vec(),
                seed: None,
            },
            level,
            effects: analyze(obs, m, level)?,
        })
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "K = {}, N = {}, n = {:?}, interval level {}\n",
            self.design.factors, self.design.units, self.design.arm_sizes, self.level
        );
        out.push_str(&format!(
            "{:>6} {:>10} {:>12} {:>12} {:>12} {:>8} {:>10} {:>10}\n",
            "effect",
            "estimate",
            "var_classic",
            "correction",
            "var_improved",
            "clamped",
            "ci_lower",
            "ci_upper"
        ));
        for e in &self.effects {
            out.push_str(&format!(
                "{:>6} {:>10.6} {:>12.6e} {:>12.6e} {:>12.6e} {:>8} {:>10.6} {:>10.6}\n",
                e.label,
                e.estimate,
                e.var_classic,
                e.correction,
                e.var_improved,
                e.clamped,
                e.ci_lower,
                e.ci_upper
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn estimates() {
        let m1 = ModelMatrix::new(1).unwrap();
        let obs = ObservedData::new(vec![10, 10], vec![2, 7]).unwrap();
        assert!(close(estimate_effects(&obs, &m1).unwrap()[0], 0.5));

        let m2 = ModelMatrix::new(2).unwrap();
        let obs = ObservedData::new(vec![4; 4], vec![0, 0, 4, 4]).unwrap();
        assert_eq!(estimate_effects(&obs, &m2).unwrap(), vec![1.0, 0.0, 0.0]);

        let obs = ObservedData::new(vec![5; 4], vec![3; 4]).unwrap();
        assert!(estimate_effects(&obs, &m2)
            .unwrap()
            .iter()
            .all(|&t| t == 0.0));

        assert!(estimate_effects(&obs, &m1).is_err());
    }

    #[test]
    fn classic_variance_examples() {
        let obs = ObservedData::new(vec![5, 5], vec![2, 3]).unwrap();
        assert!(close(variance_classic(&obs, 1).unwrap(), 0.12));
        let obs = ObservedData::new(vec![3; 4], vec![1; 4]).unwrap();
        assert!(close(variance_classic(&obs, 2).unwrap(), 1.0 / 9.0));
        let obs = ObservedData::new(vec![4, 6], vec![0, 6]).unwrap();
        assert_eq!(variance_classic(&obs, 1).unwrap(), 0.0);
        assert!(variance_classic(&obs, 2).is_err());
    }

    #[test]
    fn improved_variance_examples() {
        let iv = improved_variance(0.12, 0.0, 1, 10);
        assert_eq!(iv.correction, 0.0);
        assert_eq!(iv.var_improved, 0.12);

        let iv = improved_variance(0.12, 0.5, 1, 10);
        assert!(close(iv.correction, 0.25 / 9.0));
        assert!(close(iv.var_improved, 0.12 - 0.25 / 9.0));
        assert!(!iv.clamped);

        let m1 = ModelMatrix::new(1).unwrap();
        let obs = ObservedData::new(vec![5, 5], vec![0, 5]).unwrap();
        let iv = variance_improved(&obs, &m1).unwrap()[0];
        // τ̂ = 1 sits at the edge: 1·1 - 1 = 0, so nothing to subtract
        assert_eq!(iv.correction, 0.0);

        let m2 = ModelMatrix::new(2).unwrap();
        let obs = ObservedData::new(vec![4; 4], vec![0, 4, 4, 4]).unwrap();
        // degenerate arms give integer contrasts, which never leave anything to subtract
        assert_eq!(variance_classic(&obs, 2).unwrap(), 0.0);
        for iv in variance_improved(&obs, &m2).unwrap() {
            assert_eq!(
                (iv.correction, iv.var_improved, iv.clamped),
                (0.0, 0.0, false)
            );
        }

        let iv = improved_variance(0.001, 0.5, 1, 10);
        assert!(iv.correction > 0.001);
        assert!(iv.clamped);
        assert_eq!(iv.var_improved, 0.0);
    }

    #[test]
    fn analyze_composes() {
        let m1 = ModelMatrix::new(1).unwrap();
        let obs = ObservedData::new(vec![5, 5], vec![2, 3]).unwrap();
        let a = analyze(&obs, &m1, 0.95).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].label, "1");
        assert!(close(a[0].estimate, 0.2));
        assert!(close(a[0].var_classic, 0.12));
        assert!(close(a[0].correction, (0.2 - 0.04) / 9.0));
        assert!(a[0].var_improved <= a[0].var_classic);
        assert!(a[0].ci_lower < a[0].estimate && a[0].estimate < a[0].ci_upper);

        let m3 = ModelMatrix::new(3).unwrap();
        let zero = ObservedData::new(vec![4; 8], vec![0; 8]).unwrap();
        for e in analyze(&zero, &m3, 0.9).unwrap() {
            assert_eq!((e.estimate, e.var_classic, e.var_improved), (0.0, 0.0, 0.0));
        }
        assert!(analyze(&obs, &m1, 1.5).is_err());
    }

    #[test]
    fn report_json_shape() {
        let m1 = ModelMatrix::new(1).unwrap();
        let obs = ObservedData::new(vec![5, 5], vec![2, 3]).unwrap();
        let report = AnalysisReport::build(&obs, &m1, 0.95).unwrap();
        let v = serde_json::to_value(&report).unwrap();
        assert_eq!(v["design"]["K"], 1);
        assert_eq!(v["design"]["N"], 10);
        assert!(v["design"]["seed"].is_null());
        let keys: Vec<_> = v["effects"][0]
            .as_object()
            .unwrap()
            .keys()
            .cloned()
            .collect();
        for k in [
            "label",
            "estimate",
            "var_classic",
            "correction",
            "var_improved",
            "clamped",
            "ci_lower",
            "ci_upper",
        ] {
            assert!(keys.iter().any(|x| x == k), "missing {k}");
        }
    }
}
