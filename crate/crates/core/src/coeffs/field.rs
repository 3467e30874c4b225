use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One Fourier mode `cos * cos(phase) + sin * sin(phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub kt: i64,
    pub kx: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// A real trigonometric polynomial in `(t, x)`, periodic in time and in
/// each spatial coordinate.
///
/// The phase of a mode is `2π (kt t / T + Σ kx[α] x[α] / L[α])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicField {
    pub temporal_period: f64,
    pub spatial_periods: Vec<f64>,
    pub modes: Vec<Mode>,
}

impl PeriodicField {
    pub fn constant(value: f64, dim: usize) -> Self {
        Self::new(
            1.0,
            vec![1.0; dim],
            vec![Mode {
                kt: 0,
                kx: vec![0; dim],
                cos: value,
                sin: 0.0,
            }],
        )
        .expect("unit periods are valid")
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(0.0, dim)
    }

    pub fn new(temporal_period: f64, spatial_periods: Vec<f64>, modes: Vec<Mode>) -> Result<Self> {
        if !(temporal_period > 0.0 && temporal_period.is_finite()) {
            return Err(Error::invalid(format!("temporal period must be positive, got {temporal_period}")));
        }
        if let Some(p) = spatial_periods.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(Error::invalid(format!("spatial period must be positive, got {p}")));
        }
        let dim = spatial_periods.len();
        for m in &modes {
            if m.kx.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.kx.len(),
                });
            }
            if !m.cos.is_finite() || !m.sin.is_finite() {
                return Err(Error::invalid("mode amplitudes must be finite"));
            }
        }
        let mut f = Self {
            temporal_period,
            spatial_periods,
            modes,
        };
        f.canonicalize();
        Ok(f)
    }

    /// Constant-plus-harmonics helper for unit periods in one dimension.
    pub fn from_modes_1d(modes: &[(i64, i64, f64, f64)]) -> Self {
        let modes = modes
            .iter()
            .map(|&(kt, kx, cos, sin)| Mode {
                kt,
                kx: vec![kx],
                cos,
                sin,
            })
            .collect();
        Self::new(1.0, vec![1.0], modes).expect("unit periods are valid")
    }

    pub fn dim(&self) -> usize {
        self.spatial_periods.len()
    }

    /// Flips modes so the first nonzero frequency is positive and merges duplicates.
    fn canonicalize(&mut self) {
        let mut out: Vec<Mode> = Vec::with_capacity(self.modes.len());
        for m in self.modes.drain(..) {
            let mut m = m;
            let lead = std::iter::once(m.kt).chain(m.kx.iter().copied()).find(|k| *k != 0);
            if lead.is_some_and(|k| k < 0) {
                m.kt = -m.kt;
                m.kx.iter_mut().for_each(|k| *k = -*k);
                m.sin = -m.sin;
            }
            if lead.is_none() {
                m.sin = 0.0;
            }
            match out.iter_mut().find(|o| o.kt == m.kt && o.kx == m.kx) {
                Some(o) => {
                    o.cos += m.cos;
                    o.sin += m.sin;
                }
                None => out.push(m),
            }
        }
        out.retain(|m| m.cos != 0.0 || m.sin != 0.0);
        out.sort_by(|a, b| (a.kt, &a.kx).cmp(&(b.kt, &b.kx)));
        self.modes = out;
    }

    fn phase(&self, m: &Mode, t: f64, x: &[f64]) -> f64 {
        let mut p = m.kt as f64 * t / self.temporal_period;
        for ((k, xa), l) in m.kx.iter().zip(x).zip(&self.spatial_periods) {
            p += *k as f64 * xa / l;
        }
        TAU * p
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.value(t, x))
    }

    /// Evaluation without the length check.
    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let (s, c) = self.phase(m, t, x).sin_cos();
                m.cos * c + m.sin * s
            })
            .sum()
    }

    /// Partial derivative in spatial coordinate `axis`.
    pub fn dx(&self, t: f64, x: &[f64], axis: usize) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let w = TAU * m.kx[axis] as f64 / self.spatial_periods[axis];
                let (s, c) = self.phase(m, t, x).sin_cos();
                w * (m.sin * c - m.cos * s)
            })
            .sum()
    }

    pub fn is_constant(&self) -> bool {
        self.modes.iter().all(|m| m.kt == 0 && m.kx.iter().all(|k| *k == 0))
    }

    pub fn is_space_homogeneous(&self) -> bool {
        self.modes.iter().all(|m| m.kx.iter().all(|k| *k == 0))
    }

    pub fn is_time_independent(&self) -> bool {
        self.modes.iter().all(|m| m.kt == 0)
    }

    /// Highest |kt| and highest |kx[α]| per axis.
    pub fn max_frequencies(&self) -> (u64, Vec<u64>) {
        let mut kx = vec![0u64; self.dim()];
        let mut kt = 0u64;
        for m in &self.modes {
            kt = kt.max(m.kt.unsigned_abs());
            for (a, k) in kx.iter_mut().zip(&m.kx) {
                *a = (*a).max(k.unsigned_abs());
            }
        }
        (kt, kx)
    }

    /// Upper bound on |f| from the mode amplitudes.
    pub fn amplitude_bound(&self) -> f64 {
        self.modes.iter().map(|m| m.cos.hypot(m.sin)).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut f = self.clone();
        f.modes.iter_mut().for_each(|m| {
            m.cos *= s;
            m.sin *= s;
        });
        f.canonicalize();
        f
    }

    /// Sum of two fields with identical periods.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.temporal_period != other.temporal_period || self.spatial_periods != other.spatial_periods {
            return Err(Error::invalid("cannot add fields with different periods"));
        }
        let mut modes = self.modes.clone();
        modes.extend(other.modes.iter().cloned());
        Self::new(self.temporal_period, self.spatial_periods.clone(), modes)
    }

    /// Same function, with periods relabelled (frequencies untouched).
    pub(crate) fn with_periods(&self, temporal_period: f64, spatial_periods: Vec<f64>) -> Self {
        Self {
            temporal_period,
            spatial_periods,
            modes: self.modes.clone(),
        }
    }

    /// Approximate equality of coefficients after canonicalization.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let diff = match self.add(&other.scaled(-1.0)) {
            Ok(d) => d,
            Err(_) => return false,
        };
        diff.modes.iter().all(|m| m.cos.abs() <= tol && m.sin.abs() <= tol)
    }
}

/// Row-major matrix of fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<PeriodicField>,
}

impl FieldMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<PeriodicField>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> PeriodicField) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn constant(values: &[Vec<f64>], dim: usize) -> Self {
        let rows = values.len();
        let cols = values.first().map_or(0, Vec::len);
        Self::from_fn(rows, cols, |i, j| PeriodicField::constant(values[i][j], dim))
    }

    pub fn get(&self, i: usize, j: usize) -> &PeriodicField {
        &self.data[i * self.cols + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut PeriodicField {
        &mut self.data[i * self.cols + j]
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.data.iter().map(|f| f.value(t, x)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PeriodicField> {
        self.data.iter()
    }
}
