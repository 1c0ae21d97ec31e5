//! The 2^K model matrix and its treatment combinations.
//!
//! Column 0 is the intercept. Columns 1..=K are the main-effect contrasts,
//! where column `k` alternates blocks of `2^(K-k)` entries of -1 and +1.
//! Columns K+1..J-1 are entry-wise products of main-effect columns, one per
//! subset of factors with at least two elements. Those subsets are ordered
//! by size, then lexicographically on their sorted elements.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest factor count accepted by [`ModelMatrix::new`].
pub const DEFAULT_MAX_FACTORS: u32 = 8;

/// Subsets of `{1..=k}` with at least two elements, in interaction-column order.
///
/// Returns an empty list for `k < 2`.
pub fn subset_order(k: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for size in 2..=k {
        let mut combo: Vec<u32> = (1..=size).collect();
        loop {
            out.push(combo.clone());
            // advance to the next combination in lexicographic order
            let mut pos = size as usize;
            while pos > 0 && combo[pos - 1] == k - size + pos as u32 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            combo[pos - 1] += 1;
            for q in pos..size as usize {
                combo[q] = combo[q - 1] + 1;
            }
        }
    }
    out
}

/// One row of the main-effect sub-matrix: the level (-1 or +1) of each factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct TreatmentCombination(Vec<i8>);

impl TreatmentCombination {
    pub fn levels(&self) -> &[i8] {
        &self.0
    }
}

impl fmt::Display for TreatmentCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// The `J x J` matrix of ±1 contrast columns, `J = 2^K`.
///
/// Columns are indexed `0..J` (column 0 is all ones); arms (rows) are
/// indexed `0..J` in this API and shown as `1..=J` in reports and files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelMatrix {
    factors: u32,
    columns: Vec<Vec<i8>>,
    labels: Vec<String>,
}

impl ModelMatrix {
    pub fn new(factors: u32) -> Result<Self> {
        Self::with_cap(factors, DEFAULT_MAX_FACTORS)
    }

    /// Build the matrix, accepting up to `max_factors` factors.
    pub fn with_cap(factors: u32, max_factors: u32) -> Result<Self> {
        if factors == 0 {
            return Err(Error::invalid("factor count K must be at least 1"));
        }
        if factors > max_factors {
            return Err(Error::invalid(format!(
                "factor count K = {factors} exceeds the configured cap of {max_factors}"
            )));
        }
        if factors > 15 {
            return Err(Error::invalid("factor count K must be at most 15"));
        }
        let arms = 1usize << factors;

        let mut columns = Vec::with_capacity(arms);
        let mut labels = Vec::with_capacity(arms);
        columns.push(vec![1i8; arms]);
        labels.push("0".to_string());

        for k in 1..=factors {
            let block = 1usize << (factors - k);
            let col = (0..arms)
                .map(|j| if (j / block).is_multiple_of(2) { -1 } else { 1 })
                .collect();
            columns.push(col);
            labels.push(k.to_string());
        }
        for subset in subset_order(factors) {
            let col = (0..arms)
                .map(|j| subset.iter().map(|&k| columns[k as usize][j]).product())
                .collect();
            columns.push(col);
            labels.push(subset.iter().map(|k| k.to_string()).collect());
        }
        debug_assert_eq!(columns.len(), arms);

        Ok(ModelMatrix {
            factors,
            columns,
            labels,
        })
    }

    /// Number of factors `K`.
    pub fn factors(&self) -> u32 {
        self.factors
    }

    /// Number of arms `J = 2^K`.
    pub fn arms(&self) -> usize {
        self.columns.len()
    }

    /// Number of factorial effects, `J - 1`.
    pub fn effects(&self) -> usize {
        self.columns.len() - 1
    }

    /// `2^(K-1)`, the divisor that turns a contrast into a factorial effect.
    pub fn effect_divisor(&self) -> i128 {
        1i128 << (self.factors - 1)
    }

    pub fn column(&self, l: usize) -> &[i8] {
        &self.columns[l]
    }

    pub fn entry(&self, arm: usize, l: usize) -> i8 {
        self.columns[l][arm]
    }

    /// Human-readable effect label: `"1"`, `"23"`, `"123"`; `"0"` for the intercept.
    pub fn label(&self, l: usize) -> &str {
        &self.labels[l]
    }

    /// Validate an effect index `l ∈ 1..J`.
    pub fn check_effect(&self, l: usize) -> Result<()> {
        if l == 0 || l >= self.arms() {
            return Err(Error::invalid(format!(
                "effect index {l} out of range 1..={}",
                self.arms() - 1
            )));
        }
        Ok(())
    }

    pub fn treatment_combinations(&self) -> Vec<TreatmentCombination> {
        (0..self.arms())
            .map(|j| {
                TreatmentCombination(
                    (1..=self.factors as usize)
                        .map(|k| self.columns[k][j])
                        .collect(),
                )
            })
            .collect()
    }

    /// Arm whose treatment combination has exactly these factor levels.
    pub fn arm_of_levels(&self, levels: &[i8]) -> Option<usize> {
        if levels.len() != self.factors as usize || levels.iter().any(|&v| v != 1 && v != -1) {
            return None;
        }
        // column k has -1 in the first half of each 2^(K-k+1) block
        Some(
            levels
                .iter()
                .fold(0usize, |acc, &v| (acc << 1) | usize::from(v == 1)),
        )
    }
}

impl fmt::Display for ModelMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .labels
            .iter()
            .map(|s| s.len() + 1)
            .max()
            .unwrap_or(2)
            .max(3);
        write!(f, "{:>5}", "arm")?;
        for l in 0..self.arms() {
            write!(f, " {:>width$}", format!("h{}", self.labels[l]))?;
        }
        writeln!(f)?;
        for j in 0..self.arms() {
            write!(f, "{:>5}", j + 1)?;
            for l in 0..self.arms() {
                write!(f, " {:>width$}", self.columns[l][j])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent route: enumerate all bitmask subsets and sort them.
    fn subset_order_by_sorting(k: u32) -> Vec<Vec<u32>> {
        let mut all: Vec<Vec<u32>> = (0u32..(1 << k))
            .map(|mask| {
                (1..=k)
                    .filter(|b| mask & (1 << (b - 1)) != 0)
                    .collect::<Vec<_>>()
            })
            .filter(|s: &Vec<u32>| s.len() >= 2)
            .collect();
        all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        all
    }

    #[test]
    fn subset_order_small_cases() {
        assert!(subset_order(0).is_empty());
        assert!(subset_order(1).is_empty());
        assert_eq!(subset_order(2), vec![vec![1, 2]]);
        assert_eq!(
            subset_order(3),
            vec![vec![1, 2], vec![1, 3], vec![2, 3], vec![1, 2, 3]]
        );
    }

    #[test]
    fn subset_order_matches_sorted_enumeration() {
        for k in 2..=8 {
            let got = subset_order(k);
            assert_eq!(got.len(), (1usize << k) - 1 - k as usize);
            assert_eq!(got, subset_order_by_sorting(k));
        }
        let k4 = subset_order(4);
        assert_eq!(k4.first().unwrap(), &vec![1, 2]);
        assert_eq!(k4.last().unwrap(), &vec![1, 2, 3, 4]);
        assert_eq!(k4.len(), 11);
    }

    #[test]
    fn rejects_zero_and_over_cap() {
        assert!(matches!(
            ModelMatrix::new(0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(ModelMatrix::new(9).is_err());
        assert!(ModelMatrix::with_cap(9, 10).is_ok());
    }

    #[test]
    fn k1_and_k2_columns() {
        let m = ModelMatrix::new(1).unwrap();
        assert_eq!(m.column(0), &[1, 1]);
        assert_eq!(m.column(1), &[-1, 1]);

        let m = ModelMatrix::new(2).unwrap();
        assert_eq!(m.column(1), &[-1, -1, 1, 1]);
        assert_eq!(m.column(2), &[-1, 1, -1, 1]);
        assert_eq!(m.column(3), &[1, -1, -1, 1]);
        assert_eq!(m.label(3), "12");
        assert_eq!(m.treatment_combinations()[1].levels(), &[-1, 1]);
    }

    #[test]
    fn k1_treatment_combinations() {
        let m = ModelMatrix::new(1).unwrap();
        let z = m.treatment_combinations();
        assert_eq!(z[0].levels(), &[-1]);
        assert_eq!(z[1].levels(), &[1]);
    }

    #[test]
    fn orthogonality_and_balance_up_to_cap() {
        for k in 1..=8 {
            let m = ModelMatrix::new(k).unwrap();
            let arms = m.arms();
            for l in 0..arms {
                if l > 0 {
                    let plus = m.column(l).iter().filter(|&&v| v == 1).count();
                    assert_eq!(plus, arms / 2, "K={k} l={l}");
                }
                for q in l..arms {
                    let dot: i64 = m
                        .column(l)
                        .iter()
                        .zip(m.column(q))
                        .map(|(&a, &b)| i64::from(a) * i64::from(b))
                        .sum();
                    assert_eq!(dot, if l == q { arms as i64 } else { 0 });
                }
            }
        }
    }

    #[test]
    fn rows_enumerate_all_level_vectors() {
        for k in 1..=6 {
            let m = ModelMatrix::new(k).unwrap();
            let z = m.treatment_combinations();
            let distinct: std::collections::HashSet<_> = z.iter().collect();
            assert_eq!(distinct.len(), 1 << k);
            for (j, zj) in z.iter().enumerate() {
                assert_eq!(m.arm_of_levels(zj.levels()), Some(j));
            }
        }
    }

    #[test]
    fn interaction_columns_are_products() {
        for k in 2..=6 {
            let m = ModelMatrix::new(k).unwrap();
            for (offset, subset) in subset_order(k).iter().enumerate() {
                let l = k as usize + 1 + offset;
                for j in 0..m.arms() {
                    let prod: i8 = subset.iter().map(|&f| m.entry(j, f as usize)).product();
                    assert_eq!(m.entry(j, l), prod);
                }
            }
        }
    }
}
