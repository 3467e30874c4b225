use num_integer::{Integer, Roots};
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Q = Ratio<i64>;

/// A unit direction with rational coordinates, stored as integer
/// numerators over their Euclidean norm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalDirection {
    numerators: Vec<i64>,
    scale: i64,
}

impl RationalDirection {
    /// Reduces `v` by its gcd and requires `|v|` to be an integer.
    pub fn new(v: &[i64]) -> Result<Self> {
        if v.is_empty() || v.iter().all(|x| *x == 0) {
            return Err(Error::invalid("direction must be a nonzero vector"));
        }
        let g = v.iter().fold(0i64, |g, x| g.gcd(x));
        let numerators: Vec<i64> = v.iter().map(|x| x / g).collect();
        let sq: i64 = numerators.iter().map(|x| x * x).sum();
        let scale = sq.sqrt();
        if scale * scale != sq {
            return Err(Error::invalid(format!(
                "direction {v:?} has irrational norm sqrt({sq}); not a rational unit vector"
            )));
        }
        Ok(Self { numerators, scale })
    }

    pub fn dim(&self) -> usize {
        self.numerators.len()
    }

    pub fn numerators(&self) -> &[i64] {
        &self.numerators
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn coords(&self) -> Vec<Q> {
        self.numerators.iter().map(|x| Q::new(*x, self.scale)).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.numerators.iter().map(|x| *x as f64 / self.scale as f64).collect()
    }
}

/// Frame speed: exact when it came from a fraction or a float that is one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Speed {
    Exact(Q),
    Real(f64),
}

impl Speed {
    pub fn value(&self) -> f64 {
        match self {
            Speed::Exact(q) => q.to_f64().unwrap_or(f64::NAN),
            Speed::Real(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<Q> {
        match self {
            Speed::Exact(q) => Some(*q),
            Speed::Real(x) => float_to_rational(*x),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let p: i64 = p.trim().parse().map_err(|_| Error::invalid(format!("bad speed `{s}`")))?;
            let q: i64 = q.trim().parse().map_err(|_| Error::invalid(format!("bad speed `{s}`")))?;
            if q == 0 {
                return Err(Error::invalid("speed denominator is zero"));
            }
            return Ok(Speed::Exact(Q::new(p, q)));
        }
        let x: f64 = s.parse().map_err(|_| Error::invalid(format!("bad speed `{s}`")))?;
        Ok(Speed::Real(x))
    }
}

impl From<f64> for Speed {
    fn from(x: f64) -> Self {
        Speed::Real(x)
    }
}

/// Speed as it appears in JSON: `"p/q"` or a number.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpeedJson {
    Number(f64),
    Text(String),
}

impl SpeedJson {
    pub fn to_speed(&self) -> Result<Speed> {
        match self {
            SpeedJson::Number(x) => Ok(Speed::Real(*x)),
            SpeedJson::Text(s) => Speed::parse(s),
        }
    }
}

/// Recovers a fraction with denominator at most 10^6 that reproduces `x`
/// to 1e-13, if one exists.
pub fn float_to_rational(x: f64) -> Option<Q> {
    if !x.is_finite() {
        return None;
    }
    // Continued-fraction convergents.
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..40 {
        let a = r.floor();
        if a.abs() > 1e12 {
            return None;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > 1_000_000 {
            return None;
        }
        if (h2 as f64 / k2 as f64 - x).abs() <= 1e-13 * x.abs().max(1.0) {
            return Some(Q::new(h2, k2));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a as f64;
        if frac.abs() < 1e-15 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

pub fn lcm_of_denominators(v: &[Q]) -> i64 {
    v.iter().fold(1i64, |l, q| l.lcm(q.denom()))
}

pub fn is_integral(v: &[Q]) -> bool {
    v.iter().all(|q| q.is_integer())
}

pub fn abs_q(q: Q) -> Q {
    if q.is_negative() {
        -q
    } else {
        q
    }
}

pub fn is_zero(v: &[Q]) -> bool {
    v.iter().all(Zero::is_zero)
}
