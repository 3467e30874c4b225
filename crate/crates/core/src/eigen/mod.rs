//! Principal eigenpairs of `R_μ` and the curve `μ ↦ λ₁,μ`.

mod discrete;
mod monodromy;

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use discrete::principal_eigenvalue;
pub use monodromy::monodromy_eigenpair;

use crate::error::{Error, Result};
use crate::frame::{build_operator_mu, FrameSystem};
use crate::pde::{Grid, GridField};

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub mu: f64,
    pub lambda: f64,
    /// Positive eigenfunction normalized to maximum one.
    pub u: GridField,
    /// Minimum of `u` (Harnack floor).
    pub kappa: f64,
    pub iterations: usize,
}

impl Eigenpair {
    /// Copy of the eigenfunction scaled to mean one.
    pub fn mean_normalized(&self) -> GridField {
        let mut u = self.u.clone();
        let m = u.mean();
        u.scale(1.0 / m);
        u
    }
}

/// Which discretization computes eigenpairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Monodromy for space-independent coefficients, periodic cell otherwise.
    Auto,
    Monodromy,
    /// Implicit Euler period map on a periodic cell.
    Cell,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenSettings {
    pub tol: f64,
    pub n_t: usize,
    /// Points per unit length along `z` for the periodic cell.
    pub cell_density: usize,
    pub magnus_substeps: usize,
    pub engine: Engine,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            n_t: 64,
            cell_density: 128,
            magnus_substeps: 2048,
            engine: Engine::Auto,
        }
    }
}

/// Principal eigenpair of `R_μ` for the frame system.
pub fn solve(fsys: &FrameSystem, mu: f64, s: &EigenSettings) -> Result<Eigenpair> {
    let homogeneous = fsys.is_z_homogeneous();
    match s.engine {
        Engine::Monodromy => monodromy_eigenpair(fsys, mu, s.n_t, s.magnus_substeps),
        Engine::Auto if homogeneous => monodromy_eigenpair(fsys, mu, s.n_t, s.magnus_substeps),
        _ => {
            let grid = cell_grid(fsys, s)?;
            let op = build_operator_mu(fsys, mu, &grid)?;
            principal_eigenvalue(&op, s.tol)
        }
    }
}

/// Periodic cell over one frame period in `t` and `z`.
pub fn cell_grid(fsys: &FrameSystem, s: &EigenSettings) -> Result<Grid> {
    let n_t = s.n_t * fsys.period().round().max(1.0) as usize;
    if fsys.is_z_homogeneous() {
        return Grid::homogeneous(n_t, fsys.period(), 0.0);
    }
    let len = fsys.z_period();
    let kmax = fsys
        .a
        .iter()
        .flat_map(|m| m.iter())
        .chain(fsys.q.iter())
        .chain(fsys.l.iter())
        .map(|f| f.max_frequencies().1.last().copied().unwrap_or(0))
        .max()
        .unwrap_or(0) as usize;
    let n_z = (s.cell_density as f64 * len).ceil() as usize;
    Grid::periodic(n_t, n_z.max(16).max(8 * (kmax + 1)), fsys.period(), len)
}

/// Eigenpair on an explicit grid (periodic, or homogeneous with a given `dz`).
pub fn solve_on_grid(fsys: &FrameSystem, mu: f64, grid: &Grid, tol: f64) -> Result<Eigenpair> {
    let op = build_operator_mu(fsys, mu, grid)?;
    principal_eigenvalue(&op, tol)
}

/// `κ = min u` of a max-one eigenfunction; a nonpositive floor is an error.
pub fn harnack_floor(eig: &Eigenpair) -> Result<f64> {
    if eig.kappa > 0.0 {
        Ok(eig.kappa)
    } else {
        Err(Error::Numerical(format!("eigenfunction is not positive (min {})", eig.kappa)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mu: f64,
    pub lambda: f64,
    pub dlambda_dmu: f64,
}

/// Anything that returns `λ₁,μ` for a given `μ`.
pub trait Spectrum: Sync {
    fn lambda(&self, mu: f64) -> Result<f64>;
    fn tol(&self) -> f64;
}

/// Closure-backed spectrum, mostly for closed-form dispersion relations.
pub struct FnSpectrum<F> {
    pub f: F,
    pub tol: f64,
}

impl<F: Fn(f64) -> f64 + Sync> Spectrum for FnSpectrum<F> {
    fn lambda(&self, mu: f64) -> Result<f64> {
        Ok((self.f)(mu))
    }

    fn tol(&self) -> f64 {
        self.tol
    }
}

/// The frame system with fixed eigen settings. Eigenvalues are cached by `μ`.
pub struct FrameSpectrum<'a> {
    pub fsys: &'a FrameSystem,
    pub settings: EigenSettings,
    /// Solve on this grid instead of the default cell.
    pub grid: Option<Grid>,
    cache: Mutex<BTreeMap<u64, f64>>,
}

impl<'a> FrameSpectrum<'a> {
    pub fn new(fsys: &'a FrameSystem, settings: EigenSettings) -> Self {
        Self {
            fsys,
            settings,
            grid: None,
            cache: Mutex::default(),
        }
    }

    pub fn on_grid(fsys: &'a FrameSystem, settings: EigenSettings, grid: Grid) -> Self {
        Self {
            fsys,
            settings,
            grid: Some(grid),
            cache: Mutex::default(),
        }
    }

    pub fn eigenpair(&self, mu: f64) -> Result<Eigenpair> {
        let e = match &self.grid {
            Some(g) => solve_on_grid(self.fsys, mu, g, self.settings.tol),
            None => solve(self.fsys, mu, &self.settings),
        }?;
        self.cache.lock().unwrap_or_else(|p| p.into_inner()).insert(mu.to_bits(), e.lambda);
        Ok(e)
    }
}

impl Spectrum for FrameSpectrum<'_> {
    fn lambda(&self, mu: f64) -> Result<f64> {
        if let Some(l) = self.cache.lock().unwrap_or_else(|p| p.into_inner()).get(&mu.to_bits()) {
            return Ok(*l);
        }
        Ok(self.eigenpair(mu)?.lambda)
    }

    fn tol(&self) -> f64 {
        self.settings.tol
    }
}

/// Derivative step for centered differences of `λ`.
pub fn derivative_step(tol: f64) -> f64 {
    tol.sqrt().max(1e-4)
}

/// Centered difference of `λ` at `μ`.
pub fn dlambda_dmu(spec: &dyn Spectrum, mu: f64) -> Result<f64> {
    let h = derivative_step(spec.tol());
    Ok((spec.lambda(mu + h)? - spec.lambda(mu - h)?) / (2.0 * h))
}

/// `λ₁,μ` and `dλ/dμ` at each `μ`, evaluated in parallel. Failures are
/// reported per entry.
pub fn lambda_mu_curve(spec: &dyn Spectrum, mus: &[f64]) -> Vec<Result<CurvePoint>> {
    mus.par_iter()
        .map(|&mu| {
            let lambda = spec.lambda(mu)?;
            Ok(CurvePoint {
                mu,
                lambda,
                dlambda_dmu: dlambda_dmu(spec, mu)?,
            })
        })
        .collect()
}

pub fn write_curve_csv<W: Write>(points: &[CurvePoint], mut w: W) -> Result<()> {
    writeln!(w, "mu,lambda,dlambda_dmu")?;
    for p in points {
        writeln!(w, "{:e},{:e},{:e}", p.mu, p.lambda, p.dlambda_dmu)?;
    }
    Ok(())
}
