use serde::Serialize;

use super::lattice::{materialize, CellFunction, Competition};
use super::WaveProblem;
use crate::dispersion::{outward_root, DispersionCurve, RootPair};
use crate::eigen::{harnack_floor, Spectrum};
use crate::error::{Error, Result};
use crate::pde::{Grid, GridField};

/// Relative margin for `u̲(−a) ≫ 0`.
pub const A_STAR_MARGIN: f64 = 1e-8;

/// `ū = e^{μ∧z} u'_{μ∧}` and `u̲ = ū − M e^{(μ∧+γ)z} u'_{μ∧+γ}` on the wave lattice.
#[derive(Clone, Debug)]
pub struct SupercriticalEnvelopes {
    pub c: f64,
    /// Roots of the discrete dispersion relation on the wave grid.
    pub roots: RootPair,
    pub gamma: f64,
    pub m: f64,
    pub kappa_gamma: f64,
    /// `λ₁,μ∧+γ + c(μ∧+γ)`, positive.
    pub g_gamma: f64,
    pub b_max: f64,
    pub a_star: f64,
    pub dz: f64,
    /// `λ₁,μ∧ + cμ∧` on the grid; zero up to the root tolerance and never negative.
    pub lambda_wedge: f64,
    pub wedge: CellFunction,
    pub shifted: CellFunction,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SupercriticalSummary {
    pub mu_wedge: f64,
    pub mu_vee: f64,
    pub gamma: f64,
    pub m: f64,
    pub kappa_gamma: f64,
    pub g_gamma: f64,
    pub a_star: f64,
}

impl SupercriticalEnvelopes {
    pub fn summary(&self) -> SupercriticalSummary {
        SupercriticalSummary {
            mu_wedge: self.roots.mu_wedge,
            mu_vee: self.roots.mu_vee,
            gamma: self.gamma,
            m: self.m,
            kappa_gamma: self.kappa_gamma,
            g_gamma: self.g_gamma,
            a_star: self.a_star,
        }
    }

    pub fn upper_at(&self, i: usize, k: usize, m: i64) -> f64 {
        let z = m as f64 * self.dz;
        (self.roots.mu_wedge * z).exp() * self.wedge.at(i, k, m)
    }

    pub fn lower_at(&self, i: usize, k: usize, m: i64) -> f64 {
        let z = m as f64 * self.dz;
        let mu = self.roots.mu_wedge;
        (mu * z).exp() * self.wedge.at(i, k, m) - self.m * ((mu + self.gamma) * z).exp() * self.shifted.at(i, k, m)
    }

    pub fn upper(&self, grid: &Grid) -> GridField {
        materialize(grid, self.wedge.n_comp, |i, k, m| self.upper_at(i, k, m))
    }

    pub fn lower(&self, grid: &Grid) -> GridField {
        materialize(grid, self.wedge.n_comp, |i, k, m| self.lower_at(i, k, m))
    }

    /// `u̲ ∨ 0`.
    pub fn lower_plus(&self, grid: &Grid) -> GridField {
        materialize(grid, self.wedge.n_comp, |i, k, m| self.lower_at(i, k, m).max(0.0))
    }
}

/// Roots of `Λ(μ) = λ₁,μ + cμ` for the discrete operator, bracketed outwards
/// from `mid` where `Λ > 0`. Each root is the endpoint on the positive side.
pub(crate) fn discrete_roots(spec: &dyn Spectrum, c: f64, mid: f64) -> Result<RootPair> {
    let h = |m: f64| spec.lambda(m);
    if h(mid)? <= 0.0 {
        return Err(Error::Numerical(format!(
            "speed {c} is not supercritical for the discretized operator; refine dz or n_t"
        )));
    }
    let tol = 1e-14;
    let (lo, hi) = rayon::join(|| outward_root(&h, mid, true, tol), || outward_root(&h, mid, false, tol));
    Ok(RootPair {
        c,
        mu_wedge: lo?.0,
        mu_vee: hi?.0,
    })
}

/// Envelopes for a supercritical speed `c > c*`.
pub fn build_envelopes_supercritical(problem: &WaveProblem<'_>, curve: &DispersionCurve) -> Result<SupercriticalEnvelopes> {
    let spec = problem.discrete_spectrum();
    let c = problem.c();
    let roots = discrete_roots(&spec, c, curve.mu_star)?;
    let eig_wedge = spec.eigenpair(roots.mu_wedge)?;
    let gamma = 0.5 * roots.mu_wedge.min(roots.mu_vee - roots.mu_wedge);
    let eig_gamma = spec.eigenpair(roots.mu_wedge + gamma)?;
    let g_gamma = eig_gamma.lambda;
    if !(g_gamma > 0.0) {
        return Err(Error::Numerical(format!(
            "lambda + c mu at mu_wedge + gamma is {g_gamma:.3e}, expected positive between the roots"
        )));
    }
    let kappa_gamma = harnack_floor(&eig_gamma)?;
    let b_max = Competition::new(&problem.fsys, &problem.eigen_grid).max();
    let n = problem.fsys.n_comp as f64;
    let m = (1.0 / kappa_gamma).max(n * b_max / (g_gamma * kappa_gamma));
    let wedge = CellFunction::from_field(&eig_wedge.u);
    let shifted = CellFunction::from_field(&eig_gamma.u);

    // u̲(z) ≥ margin ū(z) ⟺ e^{γz} ≤ (1 − margin) φ∧ / (M φγ); the failing
    // lattice points of each phase form a half-line.
    let dz = problem.dz;
    let n_cell = wedge.n_cell as i64;
    let mut first_fail = i64::MAX;
    for i in 0..wedge.n_comp {
        for k in 0..wedge.n_t {
            for p in 0..n_cell {
                let ratio = (1.0 - A_STAR_MARGIN) * wedge.at(i, k, p) / (m * shifted.at(i, k, p));
                let z0 = ratio.ln() / gamma;
                let m0 = (z0 / dz).ceil() as i64;
                // Smallest lattice index ≥ z0/dz with phase p.
                let idx = m0 + (p - m0).rem_euclid(n_cell);
                first_fail = first_fail.min(idx);
            }
        }
    }
    let a_star = (1 - first_fail) as f64 * dz;
    Ok(SupercriticalEnvelopes {
        c,
        roots,
        gamma,
        m,
        kappa_gamma,
        g_gamma,
        b_max,
        a_star,
        dz,
        lambda_wedge: eig_wedge.lambda,
        wedge,
        shifted,
    })
}
