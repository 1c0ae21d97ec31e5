use num_integer::Integer;

use super::assignments::enumerate_assignments;
use crate::design_matrix::ModelMatrix;
use crate::error::{Error, Result};
use crate::finite_population::PotentialOutcomeTable;
use crate::neymanian::Design;
use crate::rational::{self, Exact};

/// Exact moments of the estimators over the full randomization distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomizationMoments {
    pub assignments: u128,
    /// `E[τ̂_l]`.
    pub mean_estimate: Exact,
    /// `Var[τ̂_l]`.
    pub variance_estimate: Exact,
    /// `E[classic variance estimator]`.
    pub mean_classic: Exact,
}

/// Average `τ̂_l`, its variance, and the classic variance estimator over
/// every assignment of `design`.
///
/// Per assignment, `τ̂_l` and the classic estimator are accumulated as
/// integers over common denominators, so the result is exact.
pub fn exact_randomization_moments(
    t: &PotentialOutcomeTable,
    m: &ModelMatrix,
    design: &Design,
    l: usize,
    cap: u128,
) -> Result<RandomizationMoments> {
    m.check_effect(l)?;
    if t.arms() != m.arms() || design.arms() != m.arms() {
        return Err(Error::invalid(
            "table, design and model matrix disagree on the arm count",
        ));
    }
    if design.units() != t.units() {
        return Err(Error::invalid(
            "design size differs from the table's unit count",
        ));
    }
    let sizes: Vec<i128> = design.sizes().iter().map(|&n| n as i128).collect();
    // τ̂_l = est_num / (2^(K-1) L), L = lcm(n_j)
    let lcm_n = sizes.iter().fold(1i128, |acc, &n| acc.lcm(&n));
    let est_weight: Vec<i128> = sizes
        .iter()
        .enumerate()
        .map(|(j, &n)| i128::from(m.entry(j, l)) * (lcm_n / n))
        .collect();
    // classic = var_num / (4^(K-1) D), D = lcm(n_j^2 (n_j - 1))
    let lcm_d = sizes
        .iter()
        .fold(1i128, |acc, &n| acc.lcm(&(n * n * (n - 1))));
    let var_weight: Vec<i128> = sizes.iter().map(|&n| lcm_d / (n * n * (n - 1))).collect();

    let mut count: i128 = 0;
    let mut sum_est: i128 = 0;
    let mut sum_est_sq: i128 = 0;
    let mut sum_var: i128 = 0;
    let mut successes = vec![0i128; m.arms()];
    for a in enumerate_assignments(design, cap)? {
        successes.iter_mut().for_each(|s| *s = 0);
        for (i, &arm) in a.arms().iter().enumerate() {
            successes[arm] += i128::from(t.outcome(i, arm));
        }
        let est: i128 = successes.iter().zip(&est_weight).map(|(o, w)| o * w).sum();
        let var: i128 = successes
            .iter()
            .zip(&sizes)
            .zip(&var_weight)
            .map(|((o, n), w)| o * (n - o) * w)
            .sum();
        count += 1;
        sum_est += est;
        sum_est_sq += est * est;
        sum_var += var;
    }

    let divisor = m.effect_divisor();
    let est_scale = divisor * lcm_n;
    let mean_num = rational::frac(sum_est, count);
    let mean_estimate = mean_num / rational::int(est_scale);
    let second = rational::frac(sum_est_sq, count) / rational::int(est_scale * est_scale);
    let variance_estimate = second - mean_estimate * mean_estimate;
    let mean_classic = rational::frac(sum_var, count) / rational::int(divisor * divisor * lcm_d);
    Ok(RandomizationMoments {
        assignments: count as u128,
        mean_estimate,
        variance_estimate,
        mean_classic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_population::{population_effects, true_sampling_variance};
    use crate::neymanian::{estimate_effects, observe, variance_classic};
    use crate::oracle::DEFAULT_CAP;
    use crate::rational::frac;

    #[test]
    fn k1_crossed_table() {
        let m = ModelMatrix::new(1).unwrap();
        let t = PotentialOutcomeTable::new(vec![vec![0, 1], vec![0, 1], vec![1, 0], vec![1, 0]])
            .unwrap();
        let d = Design::new(vec![2, 2]).unwrap();
        let mo = exact_randomization_moments(&t, &m, &d, 1, DEFAULT_CAP).unwrap();
        assert_eq!(mo.assignments, 6);
        assert_eq!(mo.mean_estimate, frac(0, 1));
        assert_eq!(mo.variance_estimate, frac(0, 1));
        assert_eq!(
            mo.variance_estimate,
            true_sampling_variance(&t, &m, &[2, 2], 1).unwrap()
        );
    }

    #[test]
    fn matches_float_average_of_estimators() {
        // cross-check the integer bookkeeping against the floating-point estimators
        let m = ModelMatrix::new(2).unwrap();
        let rows: Vec<Vec<u8>> = (0..9u32)
            .map(|i| (0..4).map(|j| ((i * 7 + j * 3) % 5 < 2) as u8).collect())
            .collect();
        let t = PotentialOutcomeTable::new(rows).unwrap();
        let d = Design::new(vec![2, 2, 2, 3]).unwrap();
        let mo = exact_randomization_moments(&t, &m, &d, 2, DEFAULT_CAP).unwrap();
        let all: Vec<_> = enumerate_assignments(&d, DEFAULT_CAP).unwrap().collect();
        let (mut s, mut v) = (0.0, 0.0);
        for a in &all {
            let obs = observe(&t, a).unwrap();
            s += estimate_effects(&obs, &m).unwrap()[1];
            v += variance_classic(&obs, 2).unwrap();
        }
        let n = all.len() as f64;
        assert!((s / n - rational::to_f64(&mo.mean_estimate)).abs() < 1e-12);
        assert!((v / n - rational::to_f64(&mo.mean_classic)).abs() < 1e-12);
        let eff = population_effects(&t, &m).unwrap();
        assert_eq!(mo.mean_estimate, eff.average(2));
    }

    #[test]
    fn mismatched_inputs() {
        let m = ModelMatrix::new(1).unwrap();
        let t = PotentialOutcomeTable::constant(5, &[0, 1]).unwrap();
        let d = Design::new(vec![2, 2]).unwrap();
        assert!(exact_randomization_moments(&t, &m, &d, 1, DEFAULT_CAP).is_err());
        assert!(exact_randomization_moments(&t, &m, &d, 2, DEFAULT_CAP).is_err());
    }
}
