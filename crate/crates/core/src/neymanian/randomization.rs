use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::finite_population::PotentialOutcomeTable;

/// Arm sizes of a completely randomized design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Design {
    sizes: Vec<usize>,
}

impl Design {
    /// The number of arms must be a power of two (at least 2) and every arm
    /// must receive at least two units.
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        let arms = sizes.len();
        if arms < 2 || !arms.is_power_of_two() {
            return Err(Error::invalid(format!(
                "a 2^K design needs a power-of-two number of arms (at least 2), got {arms}"
            )));
        }
        if let Some(j) = sizes.iter().position(|&n| n < 2) {
            return Err(Error::invalid(format!(
                "arm {} has {} units; every arm needs at least 2",
                j + 1,
                sizes[j]
            )));
        }
        Ok(Design { sizes })
    }

    /// Equal arm sizes `N / J`.
    pub fn balanced(factors: u32, units: usize) -> Result<Self> {
        let arms = 1usize << factors;
        if !units.is_multiple_of(arms) {
            return Err(Error::invalid(format!(
                "{units} units cannot be split evenly over {arms} arms"
            )));
        }
        Self::new(vec![units / arms; arms])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn arms(&self) -> usize {
        self.sizes.len()
    }

    pub fn units(&self) -> usize {
        self.sizes.iter().sum()
    }
}

/// Arm membership of every unit (0-based arms).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    arm_of: Vec<usize>,
}

impl Assignment {
    /// Wrap an explicit arm vector, checking it realises `design`.
    pub fn new(arm_of: Vec<usize>, design: &Design) -> Result<Self> {
        if arm_of.len() != design.units() {
            return Err(Error::invalid(
                "assignment length differs from the unit count",
            ));
        }
        let mut counts = vec![0usize; design.arms()];
        for &a in &arm_of {
            if a >= design.arms() {
                return Err(Error::invalid(format!("arm index {a} out of range")));
            }
            counts[a] += 1;
        }
        if counts != design.sizes() {
            return Err(Error::invalid(
                "assignment does not match the design's arm sizes",
            ));
        }
        Ok(Assignment { arm_of })
    }

    pub(crate) fn from_vec_unchecked(arm_of: Vec<usize>) -> Self {
        Assignment { arm_of }
    }

    pub fn arm_of(&self, unit: usize) -> usize {
        self.arm_of[unit]
    }

    pub fn arms(&self) -> &[usize] {
        &self.arm_of
    }

    /// `W_i(z_j)`.
    pub fn indicator(&self, unit: usize, arm: usize) -> bool {
        self.arm_of[unit] == arm
    }
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replicate `index` of a run started from `master`.
///
/// Depends only on `(master, index)`, so replicates can be scheduled in any
/// order or on any number of workers.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(mix(master) ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Uniform draw from all `N! / Π n_j!` assignments of `design`.
pub fn complete_randomization(design: &Design, seed: u64) -> Assignment {
    complete_randomization_with(design, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn complete_randomization_with<R: Rng + ?Sized>(
    design: &Design,
    rng: &mut R,
) -> Assignment {
    let mut units: Vec<usize> = (0..design.units()).collect();
    units.shuffle(rng);
    let mut arm_of = vec![0usize; units.len()];
    let mut pos = 0;
    for (arm, &size) in design.sizes().iter().enumerate() {
        for &u in &units[pos..pos + size] {
            arm_of[u] = arm;
        }
        pos += size;
    }
    Assignment { arm_of }
}

/// Per-arm sample sizes and success counts: the sufficient statistic for
/// every estimator in this crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedData {
    sizes: Vec<u64>,
    successes: Vec<u64>,
}

impl ObservedData {
    pub fn new(sizes: Vec<u64>, successes: Vec<u64>) -> Result<Self> {
        if sizes.len() != successes.len() {
            return Err(Error::invalid("sizes and success counts differ in length"));
        }
        let arms = sizes.len();
        if arms < 2 || !arms.is_power_of_two() {
            return Err(Error::invalid(format!(
                "observed data needs a power-of-two number of arms (at least 2), got {arms}"
            )));
        }
        for (j, (&n, &o)) in sizes.iter().zip(&successes).enumerate() {
            if n < 2 {
                return Err(Error::invalid(format!(
                    "arm {} has {n} units; every arm needs at least 2",
                    j + 1
                )));
            }
            if o > n {
                return Err(Error::invalid(format!(
                    "arm {} reports {o} successes out of {n} units",
                    j + 1
                )));
            }
        }
        Ok(ObservedData { sizes, successes })
    }

    pub fn arms(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn successes(&self) -> &[u64] {
        &self.successes
    }

    pub fn units(&self) -> u64 {
        self.sizes.iter().sum()
    }

    /// `p̂_j = n_j^obs / n_j`.
    pub fn p_hat(&self) -> Vec<f64> {
        self.sizes
            .iter()
            .zip(&self.successes)
            .map(|(&n, &o)| o as f64 / n as f64)
            .collect()
    }
}

pub fn observe(t: &PotentialOutcomeTable, a: &Assignment) -> Result<ObservedData> {
    if t.units() != a.arms().len() {
        return Err(Error::invalid(format!(
            "table has {} units but the assignment covers {}",
            t.units(),
            a.arms().len()
        )));
    }
    let arms = t.arms();
    let mut sizes = vec![0u64; arms];
    let mut successes = vec![0u64; arms];
    for (i, &arm) in a.arms().iter().enumerate() {
        if arm >= arms {
            return Err(Error::invalid(format!("arm index {arm} out of range")));
        }
        sizes[arm] += 1;
        successes[arm] += u64::from(t.outcome(i, arm));
    }
    ObservedData::new(sizes, successes)
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    #[test]
    fn design_validation() {
        assert!(Design::new(vec![2]).is_err());
        assert!(Design::new(vec![3, 1]).is_err());
        assert!(Design::new(vec![2, 2, 2]).is_err());
        assert!(Design::new(vec![2, 2]).is_ok());
        assert_eq!(Design::balanced(3, 400).unwrap().sizes(), &[50; 8]);
        assert!(Design::balanced(2, 10).is_err());
    }

    #[test]
    fn randomization_respects_sizes_and_seed() {
        let d = Design::new(vec![2, 2]).unwrap();
        let a = complete_randomization(&d, 7);
        assert_eq!(a.arms().iter().filter(|&&x| x == 0).count(), 2);
        assert_eq!(a, complete_randomization(&d, 7));
        assert!(Assignment::new(a.arms().to_vec(), &d).is_ok());
        for i in 0..4 {
            let hits = (0..2).filter(|&j| a.indicator(i, j)).count();
            assert_eq!(hits, 1);
        }

        let d = Design::new(vec![3, 2, 4, 5]).unwrap();
        let a = complete_randomization(&d, 11);
        let mut counts = [0usize; 4];
        for &x in a.arms() {
            counts[x] += 1;
        }
        assert_eq!(counts, [3, 2, 4, 5]);
    }

    #[test]
    fn randomization_is_uniform_over_six_assignments() {
        let d = Design::new(vec![2, 2]).unwrap();
        let draws = 60_000u64;
        let mut freq: HashMap<Vec<usize>, u64> = HashMap::new();
        for r in 0..draws {
            let a = complete_randomization(&d, derive_seed(2024, r));
            *freq.entry(a.arms().to_vec()).or_default() += 1;
        }
        assert_eq!(freq.len(), 6);
        for (k, &c) in &freq {
            let rel = c as f64 / draws as f64;
            assert!((rel - 1.0 / 6.0).abs() < 0.01, "{k:?}: {rel}");
        }
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> =
            (0..10_000).map(|r| derive_seed(1, r)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn observe_examples() {
        let d = Design::new(vec![2, 2]).unwrap();
        let ones = PotentialOutcomeTable::constant(4, &[1, 1]).unwrap();
        let a = complete_randomization(&d, 3);
        assert_eq!(observe(&ones, &a).unwrap().successes(), &[2, 2]);
        let zeros = PotentialOutcomeTable::constant(4, &[0, 0]).unwrap();
        assert_eq!(observe(&zeros, &a).unwrap().successes(), &[0, 0]);

        let t = PotentialOutcomeTable::new(vec![vec![0, 1], vec![0, 1], vec![1, 0], vec![1, 0]])
            .unwrap();
        let a = Assignment::new(vec![0, 0, 1, 1], &d).unwrap();
        let obs = observe(&t, &a).unwrap();
        assert_eq!(obs.sizes(), &[2, 2]);
        assert_eq!(obs.successes(), &[0, 0]);

        let short = PotentialOutcomeTable::constant(3, &[0, 1]).unwrap();
        assert!(observe(&short, &a).is_err());
    }

    #[test]
    fn observed_data_validation() {
        assert!(ObservedData::new(vec![2, 2], vec![3, 0]).is_err());
        assert!(ObservedData::new(vec![1, 2], vec![0, 0]).is_err());
        assert!(ObservedData::new(vec![2, 2, 2], vec![0, 0, 0]).is_err());
        assert!(ObservedData::new(vec![2, 2], vec![0]).is_err());
        let obs = ObservedData::new(vec![5, 4], vec![1, 2]).unwrap();
        assert_eq!(obs.p_hat(), vec![0.2, 0.5]);
        assert_eq!(obs.units(), 9);
    }
}
