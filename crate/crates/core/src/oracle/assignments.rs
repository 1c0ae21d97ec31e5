use crate::error::{Error, Result};
use crate::neymanian::{Assignment, Design};

/// `N! / Π n_j!`, or `None` on overflow.
pub fn multinomial(sizes: &[usize]) -> Option<u128> {
    let mut total: u128 = 1;
    let mut placed: u128 = 0;
    for &n in sizes {
        // multiply by C(placed + n, n) one factor at a time; each prefix stays integral
        for i in 1..=n as u128 {
            placed += 1;
            total = total.checked_mul(placed)? / i;
        }
    }
    Some(total)
}

/// Every assignment of a design, in lexicographic order of the arm vector.
#[derive(Debug, Clone)]
pub struct Assignments {
    current: Option<Vec<usize>>,
}

impl Iterator for Assignments {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        let out = self.current.clone()?;
        let v = self.current.as_mut().unwrap();
        // next multiset permutation
        match (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) {
            None => self.current = None,
            Some(i) => {
                let pivot = i - 1;
                let succ = (i..v.len()).rev().find(|&q| v[q] > v[pivot]).unwrap();
                v.swap(pivot, succ);
                v[i..].reverse();
            }
        }
        Some(Assignment::from_vec_unchecked(out))
    }
}

pub fn enumerate_assignments(design: &Design, cap: u128) -> Result<Assignments> {
    match multinomial(design.sizes()) {
        Some(count) if count <= cap => {}
        count => {
            return Err(Error::Refused {
                what: "assignments",
                count,
                cap,
            })
        }
    }
    let first = design
        .sizes()
        .iter()
        .enumerate()
        .flat_map(|(arm, &n)| std::iter::repeat_n(arm, n))
        .collect();
    Ok(Assignments {
        current: Some(first),
    })
}
