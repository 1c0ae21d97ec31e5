use std::ops::ControlFlow;

use crate::design_matrix::ModelMatrix;
use crate::error::{Error, Result};
use crate::finite_population::{boundary_condition, s2_effect_direct, PotentialOutcomeTable};
use crate::rational::Exact;

/// Unit count and per-arm margins `N_j` that a coupling must reproduce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarginSpec {
    units: usize,
    margins: Vec<usize>,
}

impl MarginSpec {
    pub fn new(units: usize, margins: Vec<usize>) -> Result<Self> {
        if margins.is_empty() {
            return Err(Error::invalid("margin spec needs at least one arm"));
        }
        if margins.len() > 16 {
            return Err(Error::invalid(
                "coupling enumeration supports at most 16 arms",
            ));
        }
        if let Some(&bad) = margins.iter().find(|&&c| c > units) {
            return Err(Error::invalid(format!(
                "margin {bad} exceeds the unit count {units}"
            )));
        }
        Ok(MarginSpec { units, margins })
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn arms(&self) -> usize {
        self.margins.len()
    }

    pub fn margins(&self) -> &[usize] {
        &self.margins
    }
}

/// A science table up to unit order: how many units carry each row pattern.
/// Bit `j` of pattern `p` is `Y(z_j)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PatternMultiset {
    arms: usize,
    counts: Vec<usize>,
}

impl PatternMultiset {
    pub fn count(&self, pattern: u32) -> usize {
        self.counts[pattern as usize]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn margins(&self) -> Vec<usize> {
        (0..self.arms)
            .map(|j| {
                self.counts
                    .iter()
                    .enumerate()
                    .filter(|(p, _)| (p >> j) & 1 == 1)
                    .map(|(_, &c)| c)
                    .sum()
            })
            .collect()
    }

    /// Expand to a table, units sorted by pattern.
    pub fn to_table(&self) -> Result<PotentialOutcomeTable> {
        let patterns: Vec<u32> = self
            .counts
            .iter()
            .enumerate()
            .flat_map(|(p, &c)| std::iter::repeat_n(p as u32, c))
            .collect();
        PotentialOutcomeTable::from_patterns(self.arms, &patterns)
    }
}

/// Number of multisets of size `N` over `2^J` patterns, ignoring margins.
/// `None` on overflow.
pub fn coupling_bound(spec: &MarginSpec) -> Option<u128> {
    let patterns = 1u128.checked_shl(spec.arms() as u32)?;
    // C(N + P - 1, N)
    let n = spec.units() as u128;
    let mut acc: u128 = 1;
    for i in 1..=n {
        acc = acc.checked_mul(patterns - 1 + i)? / i;
    }
    Some(acc)
}

struct Search<'a, F> {
    arms: usize,
    counts: Vec<usize>,
    remaining: Vec<usize>,
    visit: &'a mut F,
}

impl<F> Search<'_, F>
where
    F: FnMut(&PatternMultiset) -> ControlFlow<()>,
{
    /// Fill counts for patterns `0..=pattern`, highest first.
    fn descend(&mut self, pattern: usize, units_left: usize) -> ControlFlow<()> {
        if pattern == 0 {
            if self.remaining.iter().all(|&r| r == 0) {
                self.counts[0] = units_left;
                let res = (self.visit)(&PatternMultiset {
                    arms: self.arms,
                    counts: self.counts.clone(),
                });
                self.counts[0] = 0;
                return res;
            }
            return ControlFlow::Continue(());
        }
        let bits: Vec<usize> = (0..self.arms).filter(|j| (pattern >> j) & 1 == 1).collect();
        let max = bits
            .iter()
            .map(|&j| self.remaining[j])
            .min()
            .unwrap_or(units_left)
            .min(units_left);
        for c in (0..=max).rev() {
            for &j in &bits {
                self.remaining[j] -= c;
            }
            let left = units_left - c;
            // each later unit adds at most one to any column
            let feasible = self.remaining.iter().all(|&r| r <= left)
                && (0..self.arms).all(|j| self.remaining[j] == 0 || has_lower_pattern(pattern, j));
            let res = if feasible {
                self.counts[pattern] = c;
                let r = self.descend(pattern - 1, left);
                self.counts[pattern] = 0;
                r
            } else {
                ControlFlow::Continue(())
            };
            for &j in &bits {
                self.remaining[j] += c;
            }
            res?;
        }
        ControlFlow::Continue(())
    }
}

/// Some pattern below `pattern` has bit `j` set.
fn has_lower_pattern(pattern: usize, j: usize) -> bool {
    pattern > (1 << j)
}

/// Visit every margin-consistent pattern multiset exactly once.
///
/// Refuses when the unconstrained multiset count exceeds `cap`.
pub fn visit_couplings<F>(spec: &MarginSpec, cap: u128, mut visit: F) -> Result<()>
where
    F: FnMut(&PatternMultiset) -> ControlFlow<()>,
{
    match coupling_bound(spec) {
        Some(bound) if bound <= cap => {}
        count => {
            return Err(Error::Refused {
                what: "couplings",
                count,
                cap,
            })
        }
    }
    let patterns = 1usize << spec.arms();
    let mut search = Search {
        arms: spec.arms(),
        counts: vec![0; patterns],
        remaining: spec.margins().to_vec(),
        visit: &mut visit,
    };
    let _ = search.descend(patterns - 1, spec.units());
    Ok(())
}

pub fn enumerate_couplings(spec: &MarginSpec, cap: u128) -> Result<Vec<PatternMultiset>> {
    let mut out = Vec::new();
    visit_couplings(spec, cap, |c| {
        out.push(c.clone());
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// Smallest `S^2(τ̄_l)` over every coupling of the margins, with the first
/// coupling (in enumeration order) that attains it.
pub fn min_s2_over_couplings(
    spec: &MarginSpec,
    m: &ModelMatrix,
    l: usize,
    cap: u128,
) -> Result<(Exact, PotentialOutcomeTable)> {
    m.check_effect(l)?;
    if spec.arms() != m.arms() {
        return Err(Error::invalid(
            "margin spec and model matrix disagree on the arm count",
        ));
    }
    let mut best: Option<(Exact, PotentialOutcomeTable)> = None;
    let mut failure = None;
    visit_couplings(spec, cap, |c| {
        let table = match c.to_table() {
            Ok(t) => t,
            Err(e) => {
                failure = Some(e);
                return ControlFlow::Break(());
            }
        };
        match s2_effect_direct(&table, m, l) {
            Ok(s2) => {
                if best.as_ref().is_none_or(|(b, _)| s2 < *b) {
                    best = Some((s2, table));
                }
                ControlFlow::Continue(())
            }
            Err(e) => {
                failure = Some(e);
                ControlFlow::Break(())
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let best = best.ok_or_else(|| Error::invalid("no coupling matches the margins"))?;
    debug_assert!(boundary_condition(&best.1, m, l).is_ok());
    Ok(best)
}
