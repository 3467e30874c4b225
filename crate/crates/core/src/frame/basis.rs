use num_traits::{One, Zero};

use super::rational::{lcm_of_denominators, RationalDirection, Q};
use crate::error::{Error, Result};

/// Rational orthogonal matrix (row-major, `n × n`) whose last column is `e`.
///
/// Uses the Householder reflection that swaps the last canonical vector with
/// `e`; every entry stays rational because `|e − e_n|²` is.
pub fn rational_basis(e: &RationalDirection) -> Vec<Vec<Q>> {
    let n = e.dim();
    let ev = e.coords();
    let mut p = vec![vec![Q::zero(); n]; n];
    let mut w = ev.clone();
    w[n - 1] -= Q::one();
    let ww: Q = w.iter().map(|x| x * x).sum();
    for r in 0..n {
        for c in 0..n {
            let id = if r == c { Q::one() } else { Q::zero() };
            p[r][c] = if ww.is_zero() {
                id
            } else {
                id - Q::from_integer(2) * w[r] * w[c] / ww
            };
        }
    }
    p
}

/// Same construction in floating point for an arbitrary unit direction.
pub fn real_basis(e: &[f64]) -> Vec<Vec<f64>> {
    let n = e.len();
    let mut w = e.to_vec();
    w[n - 1] -= 1.0;
    let ww: f64 = w.iter().map(|x| x * x).sum();
    let mut p = vec![vec![0.0; n]; n];
    for r in 0..n {
        for c in 0..n {
            let id = if r == c { 1.0 } else { 0.0 };
            p[r][c] = if ww < 1e-30 { id } else { id - 2.0 * w[r] * w[c] / ww };
        }
    }
    p
}

pub fn column(p: &[Vec<Q>], c: usize) -> Vec<Q> {
    p.iter().map(|row| row[c]).collect()
}

/// Minimal time period and spatial periods of the moving-frame coefficients.
///
/// `T` is the least positive integer with `T c e ∈ Zⁿ`, and `L_α` the least
/// positive integer with `L_α e'_α ∈ Zⁿ` for each column `e'_α` of the basis.
pub fn compute_periods(e: &RationalDirection, c: Q) -> Result<(i64, Vec<i64>)> {
    let p = rational_basis(e);
    let ce: Vec<Q> = e.coords().iter().map(|x| x * c).collect();
    let t = lcm_of_denominators(&ce);
    let l: Vec<i64> = (0..e.dim()).map(|a| lcm_of_denominators(&column(&p, a))).collect();
    // Divisor scan: no proper divisor may already be a period.
    let works = |s: i64, v: &[Q]| v.iter().all(|x| (x * Q::from_integer(s)).is_integer());
    for d in divisors(t).into_iter().filter(|d| *d < t) {
        if works(d, &ce) {
            return Err(Error::Numerical(format!("time period {t} is not minimal: {d} works")));
        }
    }
    for (a, la) in l.iter().enumerate() {
        let col = column(&p, a);
        for d in divisors(*la).into_iter().filter(|d| d < la) {
            if works(d, &col) {
                return Err(Error::Numerical(format!("period {la} along axis {a} is not minimal")));
            }
        }
    }
    Ok((t, l))
}

fn divisors(m: i64) -> Vec<i64> {
    (1..=m).filter(|d| m % d == 0).collect()
}
