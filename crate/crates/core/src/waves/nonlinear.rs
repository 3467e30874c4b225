use serde::{Deserialize, Serialize};

use super::lattice::Competition;
use crate::error::{Error, Result};
use crate::frame::OperatorSpec;
use crate::pde::linalg::BlockTri;
use crate::pde::{add_boundary_terms, assemble, Boundary, GridField};

/// How the truncated nonlinear problem `R u + (B'u)∘u = 0` is solved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NonlinearSolver {
    /// Newton for time-independent coefficients, relaxation otherwise.
    Auto,
    /// Pseudo-transient Newton on the steady problem.
    Newton,
    /// Implicit Euler over successive periods, Newton inside each step.
    Relaxation,
    /// Outer iteration `r ↦ u_r` with damping `r ← θ u_r + (1 − θ) r`.
    Picard { theta: f64 },
}

impl Default for NonlinearSolver {
    fn default() -> Self {
        Self::Picard { theta: 0.5 }
    }
}

/// Which factors of `(B'w)∘u` follow `u` and which are frozen at `r`.
#[derive(Clone, Copy)]
pub(crate) enum Coupling<'r> {
    /// `(B'u)∘u`.
    Full,
    /// `(B'r)∘u`, linear in `u`.
    Frozen(&'r GridField),
    /// `b_ii u_i² + Σ_{s≠i} b_is r_s u_i`.
    DiagonalLive(&'r GridField),
}

impl Coupling<'_> {
    fn frozen(&self) -> Option<&GridField> {
        match self {
            Coupling::Full => None,
            Coupling::Frozen(r) | Coupling::DiagonalLive(r) => Some(r),
        }
    }

    #[inline]
    fn live(&self, i: usize, s: usize) -> bool {
        match self {
            Coupling::Full => true,
            Coupling::Frozen(_) => false,
            Coupling::DiagonalLive(_) => i == s,
        }
    }

    pub(crate) fn is_linear(&self) -> bool {
        matches!(self, Coupling::Frozen(_))
    }
}

/// The interval problem: operator, competition matrix, Dirichlet data.
pub(crate) struct Problem<'a> {
    pub op: &'a OperatorSpec,
    pub b: &'a Competition,
    pub bnd: &'a Boundary,
}

#[derive(Clone, Debug)]
pub(crate) struct Solved {
    pub u: GridField,
    pub iterations: usize,
    pub history: Vec<f64>,
}

impl Problem<'_> {
    fn nc(&self) -> usize {
        self.op.n_comp
    }

    /// Adds the nonlinear term at node `j` (unknown block `jj`) into `f` and
    /// its Jacobian into the diagonal block of `jac` when given.
    #[allow(clippy::too_many_arguments)]
    fn add_term(&self, mode: Coupling<'_>, k: usize, j: usize, jj: usize, x: &[f64], f: &mut [f64], jac: Option<&mut BlockTri>) {
        let nc = self.nc();
        let b = self.b.block(k, j);
        let u = &x[jj * nc..(jj + 1) * nc];
        let r = mode.frozen();
        let mut jac = jac;
        for i in 0..nc {
            let mut s = 0.0;
            for q in 0..nc {
                let w = if mode.live(i, q) { u[q] } else { r.map_or(0.0, |r| r.get(q, k, j)) };
                s += b[i * nc + q] * w;
            }
            f[jj * nc + i] += u[i] * s;
            if let Some(jm) = jac.as_deref_mut() {
                for q in 0..nc {
                    let mut d = if q == i { s } else { 0.0 };
                    if mode.live(i, q) {
                        d += b[i * nc + q] * u[i];
                    }
                    jm.diag[(jj * nc + i) * nc + q] += d;
                }
            }
        }
    }

    fn gather(&self, u: &GridField, k: usize) -> Vec<f64> {
        let g = &self.op.grid;
        let nc = self.nc();
        let nodes = g.unknowns();
        let mut x = vec![0.0; nodes.len() * nc];
        for (jj, j) in nodes.enumerate() {
            for i in 0..nc {
                x[jj * nc + i] = u.get(i, k, j);
            }
        }
        x
    }

    fn scatter(&self, x: &[f64], u: &mut GridField, k: usize) {
        let g = self.op.grid;
        let (nc, nt, nz) = (self.nc(), g.n_t, g.n_z);
        for (jj, j) in g.unknowns().enumerate() {
            for i in 0..nc {
                u.set(i, k, j, x[jj * nc + i]);
            }
        }
        for i in 0..nc {
            u.set(i, k, 0, self.bnd.left[i * nt + k]);
            u.set(i, k, nz - 1, self.bnd.right[i * nt + k]);
        }
    }

    /// Residual `A_k x − rhs + N(x)` of the steady problem at time index `k`,
    /// with `inv_dt (x − prev)` added for an implicit step.
    fn residual(
        &self,
        mode: Coupling<'_>,
        k: usize,
        a: &BlockTri,
        x: &[f64],
        step: Option<(f64, &[f64])>,
        jac: Option<&mut BlockTri>,
    ) -> Vec<f64> {
        let mut f = vec![0.0; x.len()];
        a.mul(x, &mut f);
        let mut rhs = vec![0.0; x.len()];
        add_boundary_terms(self.op, k, self.bnd, &mut rhs);
        f.iter_mut().zip(&rhs).for_each(|(v, r)| *v -= r);
        if let Some((inv_dt, prev)) = step {
            for (v, (xn, xp)) in f.iter_mut().zip(x.iter().zip(prev)) {
                *v += inv_dt * (xn - xp);
            }
        }
        let mut jac = jac;
        for (jj, j) in self.op.grid.unknowns().enumerate() {
            self.add_term(mode, k, j, jj, x, &mut f, jac.as_deref_mut());
        }
        f
    }

    /// Pseudo-transient Newton for time-independent coefficients: solves
    /// `(J + I/δ) Δ = −F` with `δ` grown as the residual falls.
    pub fn newton(&self, mode: Coupling<'_>, init: &GridField, tol: f64, max_iter: usize) -> Result<Solved> {
        if !self.op.time_independent() || !self.bnd.is_time_independent(self.nc(), self.op.grid.n_t) {
            return Err(Error::invalid(
                "Newton solver needs time-independent coefficients and boundary data",
            ));
        }
        let a = assemble(self.op, 0, 0.0, 0.0);
        let mut x = self.gather(init, 0);
        let mut delta = if mode.is_linear() { f64::INFINITY } else { 1.0 };
        // Residual level reached by rounding alone.
        let floor =
            64.0 * f64::EPSILON * 3.0 * a.nc as f64 * a.diag.iter().chain(&a.lower).chain(&a.upper).fold(0.0f64, |m, v| m.max(v.abs()));
        let mut history = Vec::new();
        let mut prev_norm = f64::NAN;
        for it in 1..=max_iter {
            let mut jac = a.clone();
            let f = self.residual(mode, 0, &a, &x, None, Some(&mut jac));
            let norm = sup(&f);
            history.push(norm);
            if !norm.is_finite() {
                break;
            }
            if it > 1 && prev_norm.is_finite() && !mode.is_linear() {
                delta = (delta * prev_norm / norm.max(1e-300)).clamp(1.0, 1e15);
            }
            prev_norm = norm;
            if delta.is_finite() {
                let shift = 1.0 / delta;
                for r in 0..jac.m * jac.nc {
                    jac.diag[r * jac.nc + r % jac.nc] += shift;
                }
            }
            let mut step: Vec<f64> = f.iter().map(|v| -v).collect();
            jac.factor()?.solve(&mut step);
            let change = sup(&step);
            if mode.is_linear() {
                x.iter_mut().zip(&step).for_each(|(v, d)| *v += d);
            } else {
                x.iter_mut().zip(&step).for_each(|(v, d)| *v = (*v + d).max(0.0));
            }
            // A linear solve is exact up to rounding; one refinement step suffices.
            let at_floor = norm <= floor * sup(&x).max(1.0);
            let done = if mode.is_linear() {
                it >= 2 || change < tol
            } else {
                at_floor || (change < tol && delta >= 1e8)
            };
            if done {
                let mut u = GridField::zeros(self.op.grid, self.nc());
                self.scatter(&x, &mut u, 0);
                let slice = u.slice_t(0);
                for k in 1..self.op.grid.n_t {
                    u.set_slice_t(k, &slice);
                }
                return Ok(Solved {
                    u,
                    iterations: it,
                    history,
                });
            }
        }
        Err(Error::NonConvergence {
            what: "pseudo-transient Newton",
            iterations: history.len(),
            last: history.last().copied().unwrap_or(f64::NAN),
            history,
        })
    }

    /// Implicit Euler over periods from `init` (its slice at `k = 0`) until the
    /// state at the start of a period stops changing. Each step is solved by
    /// Newton, so the limit solves the discrete time-periodic problem.
    pub fn relaxation(&self, mode: Coupling<'_>, init: &GridField, tol: f64, max_periods: usize) -> Result<Solved> {
        let g = self.op.grid;
        let nt = g.n_t;
        let inv_dt = 1.0 / g.dt();
        let steps: Vec<BlockTri> = if self.op.time_independent() {
            vec![assemble(self.op, 0, 0.0, 0.0)]
        } else {
            (0..nt).map(|k| assemble(self.op, k, 0.0, 0.0)).collect()
        };
        let mut u = GridField::zeros(g, self.nc());
        let mut x = self.gather(init, 0);
        let mut history = Vec::new();
        for p in 1..=max_periods {
            let start = x.clone();
            for step in 1..=nt {
                let k = step % nt;
                let a = &steps[if steps.len() == 1 { 0 } else { k }];
                let prev = x.clone();
                for _ in 0..50 {
                    let mut jac = a.clone();
                    let f = self.residual(mode, k, a, &x, Some((inv_dt, &prev)), Some(&mut jac));
                    for r in 0..jac.m * jac.nc {
                        jac.diag[r * jac.nc + r % jac.nc] += inv_dt;
                    }
                    let mut d: Vec<f64> = f.iter().map(|v| -v).collect();
                    jac.factor()?.solve(&mut d);
                    x.iter_mut().zip(&d).for_each(|(v, dv)| *v += dv);
                    if mode.is_linear() || sup(&d) <= 1e-3 * tol {
                        break;
                    }
                }
                self.scatter(&x, &mut u, k);
            }
            let change = x.iter().zip(&start).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            history.push(change);
            if !change.is_finite() {
                break;
            }
            if change < tol {
                return Ok(Solved { u, iterations: p, history });
            }
        }
        Err(Error::NonConvergence {
            what: "periodic relaxation",
            iterations: history.len(),
            last: history.last().copied().unwrap_or(f64::NAN),
            history,
        })
    }

    /// Solves the problem for one coupling mode with the given strategy
    /// (Picard is not an inner strategy).
    pub fn solve(
        &self,
        mode: Coupling<'_>,
        strategy: NonlinearSolver,
        init: &GridField,
        tol: f64,
        max_iter: usize,
        max_periods: usize,
    ) -> Result<Solved> {
        let steady = self.op.time_independent() && self.bnd.is_time_independent(self.nc(), self.op.grid.n_t);
        match strategy {
            NonlinearSolver::Newton => self.newton(mode, init, tol, max_iter),
            NonlinearSolver::Relaxation => self.relaxation(mode, init, tol, max_periods),
            _ if steady => self.newton(mode, init, tol, max_iter),
            _ => self.relaxation(mode, init, tol, max_periods),
        }
    }

    /// `R u + (B'u)∘u` at interior nodes (zero on the boundary).
    pub fn nonlinear_residual(&self, u: &GridField) -> Result<GridField> {
        let mut r = crate::pde::apply_operator(self.op, u)?;
        let g = self.op.grid;
        for k in 0..g.n_t {
            for j in g.unknowns() {
                for i in 0..self.nc() {
                    let v = r.get(i, k, j) + u.get(i, k, j) * self.b.apply(k, j, u, i);
                    r.set(i, k, j, v);
                }
            }
        }
        Ok(r)
    }
}

pub(crate) fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
