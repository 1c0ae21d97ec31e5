//! Exact rational arithmetic used by every population-level quantity.

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive};

/// Exact rational number. Denominators seen here are products of small
/// powers of two, unit counts and arm sizes, so `i128` is ample.
pub type Exact = Ratio<i128>;

pub fn int(v: i128) -> Exact {
    Exact::from_integer(v)
}

pub fn frac(num: i128, den: i128) -> Exact {
    Exact::new(num, den)
}

/// `2^-e` as an exact value.
pub fn inv_pow2(e: u32) -> Exact {
    Exact::new(1, 1i128 << e)
}

pub fn abs(v: &Exact) -> Exact {
    v.abs()
}

pub fn max(a: Exact, b: Exact) -> Exact {
    if a >= b {
        a
    } else {
        b
    }
}

pub fn to_f64(v: &Exact) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}
