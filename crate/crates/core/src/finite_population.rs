//! The science table of binary potential outcomes and the population
//! quantities derived from it.
//!
//! Everything in this module is exact: outcomes are integers and every
//! derived value is an [`Exact`] rational.

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::design_matrix::ModelMatrix;
use crate::error::{Error, Result};
use crate::rational::{self, Exact};

/// `N x J` table of binary potential outcomes, `y[i][j] = Y_i(z_j)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PotentialOutcomeTable {
    arms: usize,
    cells: Vec<u8>,
}

impl PotentialOutcomeTable {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let arms = rows.first().map(Vec::len).unwrap_or(0);
        if arms == 0 {
            return Err(Error::invalid("table needs at least one unit and one arm"));
        }
        let mut cells = Vec::with_capacity(rows.len() * arms);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != arms {
                return Err(Error::invalid(format!(
                    "unit {} has {} outcomes, expected {arms}",
                    i + 1,
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|&&v| v > 1) {
                return Err(Error::invalid(format!(
                    "unit {} has non-binary outcome {v}",
                    i + 1
                )));
            }
            cells.extend(row);
        }
        Ok(PotentialOutcomeTable { arms, cells })
    }

    /// Table with every unit sharing the same outcome vector.
    pub fn constant(units: usize, row: &[u8]) -> Result<Self> {
        Self::new(vec![row.to_vec(); units])
    }

    /// Build a table from row patterns: bit `j` of a pattern is `Y(z_j)`.
    pub fn from_patterns(arms: usize, patterns: &[u32]) -> Result<Self> {
        let rows = patterns
            .iter()
            .map(|&p| (0..arms).map(|j| ((p >> j) & 1) as u8).collect())
            .collect();
        Self::new(rows)
    }

    pub fn units(&self) -> usize {
        self.cells.len() / self.arms
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn outcome(&self, unit: usize, arm: usize) -> u8 {
        self.cells[unit * self.arms + arm]
    }

    pub fn row(&self, unit: usize) -> &[u8] {
        &self.cells[unit * self.arms..(unit + 1) * self.arms]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.cells.chunks(self.arms)
    }

    /// Reorder units; every population quantity is invariant under this.
    pub fn permute_units(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.units() {
            return Err(Error::invalid("permutation length differs from unit count"));
        }
        Self::new(order.iter().map(|&i| self.row(i).to_vec()).collect())
    }

    /// Read a science table from CSV.
    ///
    /// The header must contain columns `y_arm1..y_armJ`; any other columns
    /// (such as factor levels) are ignored.
    pub fn read_csv<R: Read>(reader: R, arms: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let idx: Vec<usize> = (1..=arms)
            .map(|j| {
                let name = format!("y_arm{j}");
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
            })
            .collect::<Result<_>>()?;
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let row = idx
                .iter()
                .map(|&c| match record.get(c) {
                    Some("0") => Ok(0u8),
                    Some("1") => Ok(1u8),
                    other => Err(Error::Parse(format!(
                        "row {}: outcome must be 0 or 1, got {:?}",
                        line + 1,
                        other.unwrap_or("")
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("science table has no units".into()));
        }
        Self::new(rows)
    }

    pub fn from_csv_path(path: &Path, arms: usize) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, arms)
    }

    pub(crate) fn check_matches(&self, m: &ModelMatrix) -> Result<()> {
        if self.arms != m.arms() {
            return Err(Error::invalid(format!(
                "table has {} arms but the model matrix has {}",
                self.arms,
                m.arms()
            )));
        }
        Ok(())
    }
}

/// Number of units whose outcome is 1 under every arm in `subset` (0-based arms).
pub fn joint_count(t: &PotentialOutcomeTable, subset: &[usize]) -> Result<u64> {
    if subset.is_empty() {
        return Err(Error::invalid("joint count needs a non-empty set of arms"));
    }
    if let Some(&j) = subset.iter().find(|&&j| j >= t.arms()) {
        return Err(Error::invalid(format!("arm index {j} out of range")));
    }
    Ok(t.rows()
        .filter(|row| subset.iter().all(|&j| row[j] == 1))
        .count() as u64)
}

/// Margins `N_j` and pairwise counts `N_{jj'}` of a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointCounts {
    units: u64,
    arms: usize,
    pairs: Vec<u64>,
}

impl JointCounts {
    pub fn from_table(t: &PotentialOutcomeTable) -> Self {
        let arms = t.arms();
        let mut pairs = vec![0u64; arms * arms];
        for row in t.rows() {
            for j in 0..arms {
                if row[j] == 0 {
                    continue;
                }
                for q in 0..arms {
                    pairs[j * arms + q] += u64::from(row[q]);
                }
            }
        }
        JointCounts {
            units: t.units() as u64,
            arms,
            pairs,
        }
    }

    pub fn units(&self) -> u64 {
        self.units
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    /// `N_j`.
    pub fn margin(&self, j: usize) -> u64 {
        self.pairs[j * self.arms + j]
    }

    pub fn margins(&self) -> Vec<u64> {
        (0..self.arms).map(|j| self.margin(j)).collect()
    }

    /// `N_{jj'}`; equals the margin when `j == q`.
    pub fn pair(&self, j: usize, q: usize) -> u64 {
        self.pairs[j * self.arms + q]
    }

    /// `p_j = N_j / N`.
    pub fn proportion(&self, j: usize) -> Exact {
        rational::frac(self.margin(j) as i128, self.units as i128)
    }

    /// `Σ_j h_lj N_j`, i.e. `N 2^(K-1) τ̄_l`.
    pub fn signed_margin_sum(&self, m: &ModelMatrix, l: usize) -> i128 {
        (0..self.arms)
            .map(|j| i128::from(m.entry(j, l)) * self.margin(j) as i128)
            .sum()
    }

    /// `Σ_j N_j + Σ_{j≠j'} h_lj h_lj' N_jj'`, which equals `Σ_i (h_l' Y_i)^2`.
    pub fn contrast_square_sum(&self, m: &ModelMatrix, l: usize) -> i128 {
        let mut total: i128 = (0..self.arms).map(|j| self.margin(j) as i128).sum();
        for j in 0..self.arms {
            for q in 0..self.arms {
                if j != q {
                    total += i128::from(m.entry(j, l) * m.entry(q, l)) * self.pair(j, q) as i128;
                }
            }
        }
        total
    }
}

/// Unit-level and population-level factorial effects.
///
/// Effect `l` (`1..J`) is stored at position `l - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectTable {
    individual: Vec<Vec<Exact>>,
    average: Vec<Exact>,
}

impl EffectTable {
    /// `τ_il`.
    pub fn individual(&self, unit: usize, l: usize) -> Exact {
        self.individual[unit][l - 1]
    }

    /// `τ̄_l`.
    pub fn average(&self, l: usize) -> Exact {
        self.average[l - 1]
    }

    pub fn averages(&self) -> &[Exact] {
        &self.average
    }
}

fn contrast(row: &[u8], m: &ModelMatrix, l: usize) -> i128 {
    row.iter()
        .enumerate()
        .map(|(j, &y)| i128::from(m.entry(j, l)) * i128::from(y))
        .sum()
}

/// Unit effect `τ_il = 2^-(K-1) h_l' Y_i`.
pub fn unit_effect(row: &[u8], m: &ModelMatrix, l: usize) -> Exact {
    rational::frac(contrast(row, m, l), m.effect_divisor())
}

/// Population effect `τ̄_l = 2^-(K-1) h_l' p`.
pub fn average_effect(counts: &JointCounts, m: &ModelMatrix, l: usize) -> Exact {
    rational::frac(
        counts.signed_margin_sum(m, l),
        m.effect_divisor() * counts.units() as i128,
    )
}

pub fn population_effects(t: &PotentialOutcomeTable, m: &ModelMatrix) -> Result<EffectTable> {
    t.check_matches(m)?;
    let counts = JointCounts::from_table(t);
    let individual = t
        .rows()
        .map(|row| (1..m.arms()).map(|l| unit_effect(row, m, l)).collect())
        .collect();
    let average = (1..m.arms())
        .map(|l| average_effect(&counts, m, l))
        .collect();
    Ok(EffectTable {
        individual,
        average,
    })
}

fn require_two_units(units: usize) -> Result<()> {
    if units < 2 {
        return Err(Error::invalid("variances need at least two units"));
    }
    Ok(())
}

/// `S_j^2 = N/(N-1) p_j (1 - p_j)`.
pub fn s2_arm(t: &PotentialOutcomeTable, arm: usize) -> Result<Exact> {
    require_two_units(t.units())?;
    if arm >= t.arms() {
        return Err(Error::invalid(format!("arm index {arm} out of range")));
    }
    let n = t.units() as i128;
    let count = t.rows().filter(|r| r[arm] == 1).count() as i128;
    // N/(N-1) * (c/N) * (1 - c/N) = c (N - c) / (N (N - 1))
    Ok(rational::frac(count * (n - count), n * (n - 1)))
}

/// `S^2(τ̄_l)` computed directly as the sample variance of the unit effects.
pub fn s2_effect_direct(t: &PotentialOutcomeTable, m: &ModelMatrix, l: usize) -> Result<Exact> {
    t.check_matches(m)?;
    m.check_effect(l)?;
    require_two_units(t.units())?;
    let effects: Vec<Exact> = t.rows().map(|row| unit_effect(row, m, l)).collect();
    let n = effects.len() as i128;
    let mean = effects.iter().sum::<Exact>() / rational::int(n);
    let ss: Exact = effects.iter().map(|&e| (e - mean) * (e - mean)).sum();
    Ok(ss / rational::int(n - 1))
}

/// `S^2(τ̄_l)` from margins and pairwise counts alone.
pub fn s2_effect_from_counts(counts: &JointCounts, m: &ModelMatrix, l: usize) -> Result<Exact> {
    m.check_effect(l)?;
    require_two_units(counts.units() as usize)?;
    let n = counts.units() as i128;
    let tau_bar = average_effect(counts, m, l);
    let divisor = m.effect_divisor();
    let first = rational::frac(
        counts.contrast_square_sum(m, l),
        divisor * divisor * (n - 1),
    );
    Ok(first - rational::frac(n, n - 1) * tau_bar * tau_bar)
}

/// `S^2(τ̄_l)` via the closed form in margins and pairwise counts.
pub fn s2_effect_closed_form(
    t: &PotentialOutcomeTable,
    m: &ModelMatrix,
    l: usize,
) -> Result<Exact> {
    t.check_matches(m)?;
    s2_effect_from_counts(&JointCounts::from_table(t), m, l)
}

/// `N/(N-1) (2^-(K-1)|τ̄_l| - τ̄_l^2)`, the lower bound before clipping at zero.
///
/// Attained exactly when every unit effect sits in `{0, -2^-(K-1)}` or
/// every unit effect sits in `{0, +2^-(K-1)}`.
pub fn unclipped_lower_bound(tau_bar: Exact, factors: u32, units: usize) -> Exact {
    let n = units as i128;
    let step = rational::inv_pow2(factors - 1);
    rational::frac(n, n - 1) * (step * rational::abs(&tau_bar) - tau_bar * tau_bar)
}

/// Sharp lower bound on `S^2(τ̄_l)` given the margins:
/// `N/(N-1) max{2^-(K-1)|τ̄_l| - τ̄_l^2, 0}`.
pub fn sharp_lower_bound(tau_bar: Exact, factors: u32, units: usize) -> Exact {
    rational::max(
        unclipped_lower_bound(tau_bar, factors, units),
        rational::int(0),
    )
}

/// Which side of the bound's equality condition a table satisfies for one effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// Every `τ_il ∈ {0, -2^-(K-1)}`; for K = 1 this is `Y_i(1) ≤ Y_i(-1)` for all units.
    Decreasing,
    /// Every `τ_il ∈ {0, +2^-(K-1)}`; for K = 1 this is `Y_i(1) ≥ Y_i(-1)` for all units.
    Increasing,
    /// Every `τ_il = 0`.
    Both,
    Neither,
}

impl BoundaryCondition {
    pub fn holds(self) -> bool {
        self != BoundaryCondition::Neither
    }
}

pub fn boundary_condition(
    t: &PotentialOutcomeTable,
    m: &ModelMatrix,
    l: usize,
) -> Result<BoundaryCondition> {
    t.check_matches(m)?;
    m.check_effect(l)?;
    // τ_il is a multiple of 2^-(K-1); compare the integer contrasts directly
    let (mut dec, mut inc) = (true, true);
    for row in t.rows() {
        match contrast(row, m, l) {
            0 => {}
            -1 => inc = false,
            1 => dec = false,
            _ => return Ok(BoundaryCondition::Neither),
        }
    }
    Ok(match (dec, inc) {
        (true, true) => BoundaryCondition::Both,
        (true, false) => BoundaryCondition::Decreasing,
        (false, true) => BoundaryCondition::Increasing,
        (false, false) => BoundaryCondition::Neither,
    })
}

/// Exact sampling variance of `τ̂_l` under complete randomization with arm sizes `sizes`:
/// `2^-2(K-1) Σ_j S_j^2 / n_j - S^2(τ̄_l) / N`.
pub fn true_sampling_variance(
    t: &PotentialOutcomeTable,
    m: &ModelMatrix,
    sizes: &[usize],
    l: usize,
) -> Result<Exact> {
    t.check_matches(m)?;
    if sizes.len() != m.arms() {
        return Err(Error::invalid(format!(
            "expected {} arm sizes, got {}",
            m.arms(),
            sizes.len()
        )));
    }
    if sizes.iter().any(|&n| n < 2) {
        return Err(Error::invalid("every arm needs at least two units"));
    }
    if sizes.iter().sum::<usize>() != t.units() {
        return Err(Error::invalid("arm sizes must sum to the number of units"));
    }
    let divisor = m.effect_divisor();
    let mut arm_part = rational::int(0);
    for (j, &n_j) in sizes.iter().enumerate() {
        arm_part += s2_arm(t, j)? / rational::int(n_j as i128);
    }
    let n = t.units() as i128;
    Ok(arm_part / rational::int(divisor * divisor) - s2_effect_direct(t, m, l)? / rational::int(n))
}
