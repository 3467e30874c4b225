use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The `z` axis of a space-time grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ZDomain {
    /// `[0, length)` with periodic wrap.
    Periodic { length: f64 },
    /// `[-half_width, half_width]` including both endpoints (Dirichlet).
    Interval { half_width: f64 },
    /// A single node standing for `z`-independent functions. `dz` is the
    /// spacing of the grid whose stencil it should reproduce; `0` means the
    /// continuum limit.
    Homogeneous { dz: f64 },
}

/// How `∂_t` is discretized when an operator is applied to a grid field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    /// Periodic backward difference, consistent with the implicit Euler stepper.
    BackwardEuler,
    /// Fourier differentiation in time.
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_t: usize,
    pub n_z: usize,
    pub period: f64,
    pub domain: ZDomain,
    pub scheme: TimeScheme,
}

pub const MIN_NZ: usize = 16;

impl Grid {
    pub fn periodic(n_t: usize, n_z: usize, period: f64, length: f64) -> Result<Self> {
        Self::check(n_t, period)?;
        if n_z < MIN_NZ {
            return Err(Error::invalid(format!("n_z must be at least {MIN_NZ}, got {n_z}")));
        }
        if !(length > 0.0) {
            return Err(Error::invalid("cell length must be positive"));
        }
        Ok(Self {
            n_t,
            n_z,
            period,
            domain: ZDomain::Periodic { length },
            scheme: TimeScheme::BackwardEuler,
        })
    }

    pub fn interval(n_t: usize, n_z: usize, period: f64, half_width: f64) -> Result<Self> {
        Self::check(n_t, period)?;
        if n_z < MIN_NZ {
            return Err(Error::invalid(format!("n_z must be at least {MIN_NZ}, got {n_z}")));
        }
        if !(half_width > 0.0) {
            return Err(Error::invalid("half width must be positive"));
        }
        Ok(Self {
            n_t,
            n_z,
            period,
            domain: ZDomain::Interval { half_width },
            scheme: TimeScheme::BackwardEuler,
        })
    }

    pub fn homogeneous(n_t: usize, period: f64, dz: f64) -> Result<Self> {
        Self::check(n_t, period)?;
        Ok(Self {
            n_t,
            n_z: 1,
            period,
            domain: ZDomain::Homogeneous { dz },
            scheme: TimeScheme::BackwardEuler,
        })
    }

    fn check(n_t: usize, period: f64) -> Result<()> {
        if n_t == 0 {
            return Err(Error::invalid("n_t must be positive"));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::invalid("period must be positive"));
        }
        Ok(())
    }

    pub fn with_scheme(mut self, scheme: TimeScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn dt(&self) -> f64 {
        self.period / self.n_t as f64
    }

    pub fn dz(&self) -> f64 {
        match self.domain {
            ZDomain::Periodic { length } => length / self.n_z as f64,
            ZDomain::Interval { half_width } => 2.0 * half_width / (self.n_z - 1) as f64,
            ZDomain::Homogeneous { dz } => dz,
        }
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    pub fn z(&self, j: usize) -> f64 {
        match self.domain {
            ZDomain::Periodic { .. } => j as f64 * self.dz(),
            ZDomain::Interval { half_width } => -half_width + j as f64 * self.dz(),
            ZDomain::Homogeneous { .. } => 0.0,
        }
    }

    pub fn z_nodes(&self) -> Vec<f64> {
        (0..self.n_z).map(|j| self.z(j)).collect()
    }

    pub fn is_interval(&self) -> bool {
        matches!(self.domain, ZDomain::Interval { .. })
    }

    pub fn is_periodic_z(&self) -> bool {
        !self.is_interval()
    }

    /// Half width `a` for interval grids.
    pub fn half_width(&self) -> Option<f64> {
        match self.domain {
            ZDomain::Interval { half_width } => Some(half_width),
            _ => None,
        }
    }

    /// Index range of nodes that are unknowns (interior nodes on an interval).
    pub fn unknowns(&self) -> std::ops::Range<usize> {
        if self.is_interval() {
            1..self.n_z - 1
        } else {
            0..self.n_z
        }
    }

    /// Number of half points carrying the diffusion coefficient.
    pub fn n_half(&self) -> usize {
        match self.domain {
            ZDomain::Interval { .. } => self.n_z - 1,
            _ => self.n_z,
        }
    }

    /// Interval grid with spacing exactly `dz` (so that `a` is a multiple of it),
    /// `a` rounded to the nearest multiple.
    pub fn interval_with_spacing(n_t: usize, period: f64, a: f64, dz: f64) -> Result<Self> {
        if !(dz > 0.0) {
            return Err(Error::invalid("dz must be positive"));
        }
        let half = (a / dz).round().max(1.0) as usize;
        Self::interval(n_t, 2 * half + 1, period, half as f64 * dz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_contains_endpoints() {
        let g = Grid::interval(8, 21, 1.0, 5.0).unwrap();
        assert_eq!(g.z(0), -5.0);
        assert!((g.z(20) - 5.0).abs() < 1e-14);
        assert_eq!(g.unknowns(), 1..20);
    }

    #[test]
    fn too_coarse_is_rejected() {
        assert!(Grid::periodic(8, 8, 1.0, 1.0).is_err());
    }

    #[test]
    fn spacing_constructor_keeps_dz() {
        let g = Grid::interval_with_spacing(4, 1.0, 40.0, 0.05).unwrap();
        assert!((g.dz() - 0.05).abs() < 1e-15);
        assert_eq!(g.half_width(), Some(40.0));
    }
}
