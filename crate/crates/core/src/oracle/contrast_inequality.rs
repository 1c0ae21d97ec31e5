use serde::Serialize;

use crate::design_matrix::ModelMatrix;
use crate::error::Result;
use crate::finite_population::{
    boundary_condition, BoundaryCondition, JointCounts, PotentialOutcomeTable,
};

/// Successes of one unit on the -1 and +1 sides of contrast `h_l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    pub minus: i64,
    pub plus: i64,
}

impl SplitCounts {
    /// `plus - minus = 2^(K-1) τ_il`.
    pub fn difference(&self) -> i64 {
        self.plus - self.minus
    }

    /// Slack in `2λ₋ + λ₋(λ₋-1) + λ₊(λ₊-1) ≥ 2λ₋λ₊`; zero iff `τ_il ∈ {0, +2^-(K-1)}`.
    pub fn slack_increasing(&self) -> i64 {
        let (a, b) = (self.minus, self.plus);
        2 * a + a * (a - 1) + b * (b - 1) - 2 * a * b
    }

    /// Mirror-image slack with `2λ₊` on the left; zero iff `τ_il ∈ {0, -2^-(K-1)}`.
    pub fn slack_decreasing(&self) -> i64 {
        let (a, b) = (self.minus, self.plus);
        2 * b + a * (a - 1) + b * (b - 1) - 2 * a * b
    }
}

pub fn split_counts(row: &[u8], m: &ModelMatrix, l: usize) -> SplitCounts {
    let (mut minus, mut plus) = (0, 0);
    for (j, &y) in row.iter().enumerate() {
        if m.entry(j, l) < 0 {
            minus += i64::from(y);
        } else {
            plus += i64::from(y);
        }
    }
    SplitCounts { minus, plus }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContrastInequalityReport {
    /// `Σ_j N_j + Σ_{j≠j'} h_lj h_lj' N_jj'`.
    pub lhs: i128,
    /// `|Σ_j h_lj N_j|`.
    pub rhs: i128,
    pub holds: bool,
    pub equality: bool,
    pub condition: BoundaryCondition,
    /// Both per-unit inequalities hold for every unit.
    pub per_unit_holds: bool,
    /// Every unit is tight in the increasing-side inequality.
    pub per_unit_tight_increasing: bool,
    /// Every unit is tight in the decreasing-side inequality.
    pub per_unit_tight_decreasing: bool,
}

impl ContrastInequalityReport {
    /// The inequality holds, and equality, the boundary condition and the
    /// per-unit tightness all agree.
    pub fn consistent(&self) -> bool {
        let tight = self.per_unit_tight_increasing || self.per_unit_tight_decreasing;
        self.holds
            && self.per_unit_holds
            && self.equality == self.condition.holds()
            && self.equality == tight
            && self.per_unit_tight_increasing
                == matches!(
                    self.condition,
                    BoundaryCondition::Increasing | BoundaryCondition::Both
                )
            && self.per_unit_tight_decreasing
                == matches!(
                    self.condition,
                    BoundaryCondition::Decreasing | BoundaryCondition::Both
                )
    }
}

pub fn verify_contrast_inequality(
    t: &PotentialOutcomeTable,
    m: &ModelMatrix,
    l: usize,
) -> Result<ContrastInequalityReport> {
    let condition = boundary_condition(t, m, l)?;
    let counts = JointCounts::from_table(t);
    let lhs = counts.contrast_square_sum(m, l);
    let rhs = counts.signed_margin_sum(m, l).abs();

    let mut per_unit_holds = true;
    let mut tight_inc = true;
    let mut tight_dec = true;
    for row in t.rows() {
        let s = split_counts(row, m, l);
        let (inc, dec) = (s.slack_increasing(), s.slack_decreasing());
        per_unit_holds &= inc >= 0 && dec >= 0;
        tight_inc &= inc == 0;
        tight_dec &= dec == 0;
    }
    Ok(ContrastInequalityReport {
        lhs,
        rhs,
        holds: lhs >= rhs,
        equality: lhs == rhs,
        condition,
        per_unit_holds,
        per_unit_tight_increasing: tight_inc,
        per_unit_tight_decreasing: tight_dec,
    })
}
