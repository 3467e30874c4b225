use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::field::GridField;
use super::grid::{TimeScheme, ZDomain};
use super::linalg::{BlockTri, BlockTriLu};
use crate::error::{Error, Result};
use crate::frame::OperatorSpec;

/// Dirichlet values at the two ends of an interval grid, `[i][k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Boundary {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl Boundary {
    pub fn zero(n_comp: usize, n_t: usize) -> Self {
        Self {
            left: vec![0.0; n_comp * n_t],
            right: vec![0.0; n_comp * n_t],
        }
    }

    pub fn constant(left: &[f64], right: &[f64], n_t: usize) -> Self {
        let rep = |v: &[f64]| v.iter().flat_map(|x| std::iter::repeat_n(*x, n_t)).collect();
        Self {
            left: rep(left),
            right: rep(right),
        }
    }

    /// Boundary values read off the end nodes of a field.
    pub fn from_field(u: &GridField) -> Self {
        let (nc, nt, nz) = (u.n_comp, u.grid.n_t, u.grid.n_z);
        let mut b = Self::zero(nc, nt);
        for i in 0..nc {
            for k in 0..nt {
                b.left[i * nt + k] = u.get(i, k, 0);
                b.right[i * nt + k] = u.get(i, k, nz - 1);
            }
        }
        b
    }

    pub fn is_time_independent(&self, n_comp: usize, n_t: usize) -> bool {
        (0..n_comp).all(|i| {
            let s = &self.left[i * n_t..(i + 1) * n_t];
            let r = &self.right[i * n_t..(i + 1) * n_t];
            s.iter().all(|v| *v == s[0]) && r.iter().all(|v| *v == r[0])
        })
    }
}

/// Assembles `(1/dt − shift) I + A_k` on the unknown nodes. With `dt = ∞`
/// this is the steady operator `A_k − shift`.
pub(crate) fn assemble(op: &OperatorSpec, k: usize, inv_dt: f64, shift: f64) -> BlockTri {
    let g = &op.grid;
    let nc = op.n_comp;
    let nodes = g.unknowns();
    let m = nodes.len();
    let mut a = BlockTri::new(m, nc, matches!(g.domain, ZDomain::Periodic { .. }));
    for (jj, j) in nodes.enumerate() {
        for i in 0..nc {
            let [w, c, e] = op.stencil(i, k, j);
            a.lower[jj * nc + i] = w;
            a.upper[jj * nc + i] = e;
            for s in 0..nc {
                let mut v = op.coupling(k, j, i, s);
                if s == i {
                    v += inv_dt - shift + c;
                }
                a.diag[(jj * nc + i) * nc + s] = v;
            }
        }
    }
    a
}

/// Moves known Dirichlet values to the right-hand side.
pub(crate) fn add_boundary_terms(op: &OperatorSpec, k: usize, bnd: &Boundary, rhs: &mut [f64]) {
    let g = &op.grid;
    if !g.is_interval() {
        return;
    }
    let (nc, nt, nz) = (op.n_comp, g.n_t, g.n_z);
    let m = nz - 2;
    for i in 0..nc {
        let [w, _, _] = op.stencil(i, k, 1);
        rhs[i] -= w * bnd.left[i * nt + k];
        let [_, _, e] = op.stencil(i, k, nz - 2);
        rhs[(m - 1) * nc + i] -= e * bnd.right[i * nt + k];
    }
}

/// Factored implicit Euler steps over one period for a fixed spectral shift:
/// `(u_k − u_{k−1})/dt + (A_k − shift) u_k = 0`.
pub struct PeriodMap<'a> {
    pub op: &'a OperatorSpec,
    pub shift: f64,
    steps: Vec<BlockTriLu>,
}

impl<'a> PeriodMap<'a> {
    pub fn new(op: &'a OperatorSpec, shift: f64) -> Result<Self> {
        let g = &op.grid;
        let inv_dt = 1.0 / g.dt();
        let n_distinct = if op.time_independent() { 1 } else { g.n_t };
        let steps = (0..n_distinct)
            .map(|k| {
                let a = assemble(op, k, inv_dt, shift);
                check_m_matrix(&a, g.t(k))?;
                a.factor()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { op, shift, steps })
    }

    fn lu(&self, k: usize) -> &BlockTriLu {
        &self.steps[if self.steps.len() == 1 { 0 } else { k }]
    }

    /// One period from `v` (component-major spatial slice). Snapshots at
    /// `t_k` go into `snaps` when given; index 0 holds the final state.
    pub fn apply(&self, v: &[f64], bnd: Option<&Boundary>, mut snaps: Option<&mut GridField>) -> Vec<f64> {
        let g = &self.op.grid;
        let (nc, nz, nt) = (self.op.n_comp, g.n_z, g.n_t);
        let nodes = g.unknowns();
        let (j0, m) = (nodes.start, nodes.len());
        let inv_dt = 1.0 / g.dt();
        let mut x = vec![0.0; m * nc];
        for jj in 0..m {
            for i in 0..nc {
                x[jj * nc + i] = v[i * nz + j0 + jj];
            }
        }
        let mut full = v.to_vec();
        for step in 1..=nt {
            let k = step % nt;
            x.iter_mut().for_each(|e| *e *= inv_dt);
            if let Some(b) = bnd {
                add_boundary_terms(self.op, k, b, &mut x);
            }
            self.lu(k).solve(&mut x);
            if let Some(s) = snaps.as_deref_mut() {
                scatter(&x, &mut full, nc, nz, j0, m, bnd, nt, k);
                s.set_slice_t(k, &full);
            }
        }
        scatter(&x, &mut full, nc, nz, j0, m, bnd, nt, 0);
        full
    }
}

#[allow(clippy::too_many_arguments)]
fn scatter(x: &[f64], full: &mut [f64], nc: usize, nz: usize, j0: usize, m: usize, bnd: Option<&Boundary>, nt: usize, k: usize) {
    for jj in 0..m {
        for i in 0..nc {
            full[i * nz + j0 + jj] = x[jj * nc + i];
        }
    }
    if j0 == 1 {
        for i in 0..nc {
            let (l, r) = bnd.map_or((0.0, 0.0), |b| (b.left[i * nt + k], b.right[i * nt + k]));
            full[i * nz] = l;
            full[i * nz + nz - 1] = r;
        }
    }
}

/// Positivity of the implicit step needs a nonsingular M-matrix; strict
/// diagonal dominance is the sufficient condition checked here.
fn check_m_matrix(a: &BlockTri, t: f64) -> Result<()> {
    let nc = a.nc;
    for j in 0..a.m {
        for i in 0..nc {
            let mut off = a.lower[j * nc + i].max(0.0) + a.upper[j * nc + i].max(0.0);
            let mut sum = a.lower[j * nc + i] + a.upper[j * nc + i];
            for s in 0..nc {
                let v = a.diag[(j * nc + i) * nc + s];
                sum += v;
                if s != i {
                    off += v.max(0.0);
                }
            }
            if off > 0.0 {
                return Err(Error::Numerical(format!("implicit step is not an M-matrix at t = {t}")));
            }
            if !(sum > 0.0) {
                return Err(Error::Numerical(format!(
                    "time step too large for a positive implicit step at t = {t} (row sum {sum:.3e}); increase n_t"
                )));
            }
        }
    }
    Ok(())
}

/// Advances `∂_t v + A v = 0` by one period with implicit Euler.
pub fn evolve_period(op: &OperatorSpec, v0: &[f64], bnd: Option<&Boundary>) -> Result<Vec<f64>> {
    let need = op.n_comp * op.grid.n_z;
    if v0.len() != need {
        return Err(Error::DimensionMismatch {
            expected: need,
            got: v0.len(),
        });
    }
    Ok(PeriodMap::new(op, 0.0)?.apply(v0, bnd, None))
}

/// `R_μ u` on the grid (the spatial part through the stencil, `∂_t` per the
/// grid's time scheme). Boundary nodes of an interval grid are left at zero.
pub fn apply_operator(op: &OperatorSpec, u: &GridField) -> Result<GridField> {
    let g = &op.grid;
    if u.grid.n_t != g.n_t || u.grid.n_z != g.n_z || u.n_comp != op.n_comp {
        return Err(Error::invalid("field and operator grids differ"));
    }
    let (nc, nt, nz) = (op.n_comp, g.n_t, g.n_z);
    let mut out = match g.scheme {
        TimeScheme::BackwardEuler => {
            let inv_dt = 1.0 / g.dt();
            GridField::from_fn(*g, nc, |i, k, j| (u.get(i, k, j) - u.get(i, (k + nt - 1) % nt, j)) * inv_dt)
        }
        TimeScheme::Spectral => spectral_dt(u),
    };
    let periodic = g.is_periodic_z();
    for k in 0..nt {
        for j in g.unknowns() {
            let left = if j > 0 { j - 1 } else { nz - 1 };
            let right = if j + 1 < nz { j + 1 } else { 0 };
            for i in 0..nc {
                let [w, c, e] = op.stencil(i, k, j);
                let mut s = c * u.get(i, k, j);
                if nz > 1 && (periodic || (j > 0 && j + 1 < nz)) {
                    s += w * u.get(i, k, left) + e * u.get(i, k, right);
                }
                for r in 0..nc {
                    s += op.coupling(k, j, i, r) * u.get(r, k, j);
                }
                let idx = out.idx(i, k, j);
                out.data[idx] += s;
            }
        }
        if g.is_interval() {
            for i in 0..nc {
                out.set(i, k, 0, 0.0);
                out.set(i, k, nz - 1, 0.0);
            }
        }
    }
    Ok(out)
}

/// Fourier derivative in time of every `(i, j)` series.
pub fn spectral_dt(u: &GridField) -> GridField {
    let g = u.grid;
    let nt = g.n_t;
    let mut out = GridField::zeros(g, u.n_comp);
    if nt < 2 {
        return out;
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(nt);
    let inv = planner.plan_fft_inverse(nt);
    let w0 = std::f64::consts::TAU / g.period;
    let mut buf = vec![Complex::new(0.0, 0.0); nt];
    for i in 0..u.n_comp {
        for j in 0..g.n_z {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = Complex::new(u.get(i, k, j), 0.0);
            }
            fwd.process(&mut buf);
            for (m, b) in buf.iter_mut().enumerate() {
                let freq = if m < nt / 2 || (nt % 2 == 1 && m == nt / 2) {
                    m as f64
                } else if nt.is_multiple_of(2) && m == nt / 2 {
                    0.0
                } else {
                    m as f64 - nt as f64
                };
                *b *= Complex::new(0.0, w0 * freq / nt as f64);
            }
            inv.process(&mut buf);
            for (k, b) in buf.iter().enumerate() {
                out.set(i, k, j, b.re);
            }
        }
    }
    out
}

/// Steady Dirichlet/periodic solve of `(A − shift) u = rhs` at time index `k`.
pub(crate) fn steady_solve(op: &OperatorSpec, k: usize, bnd: Option<&Boundary>, rhs: Option<&[f64]>) -> Result<Vec<f64>> {
    let g = &op.grid;
    let (nc, nz) = (op.n_comp, g.n_z);
    let nodes = g.unknowns();
    let (j0, m) = (nodes.start, nodes.len());
    let a = assemble(op, k, 0.0, 0.0);
    let mut x = vec![0.0; m * nc];
    if let Some(r) = rhs {
        for jj in 0..m {
            for i in 0..nc {
                x[jj * nc + i] = r[i * nz + j0 + jj];
            }
        }
    }
    if let Some(b) = bnd {
        add_boundary_terms(op, k, b, &mut x);
    }
    a.factor()?.solve(&mut x);
    let mut full = vec![0.0; nc * nz];
    scatter(&x, &mut full, nc, nz, j0, m, bnd, g.n_t, k);
    Ok(full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::KppSystem;
    use crate::frame::{build_operator_mu, transform_coefficients, MovingFrame};
    use crate::pde::Grid;

    fn heat_op(l: f64, grid: Grid) -> OperatorSpec {
        let sys = KppSystem::scalar(1.0, 0.0, l, 1.0);
        let fs = transform_coefficients(&sys, &MovingFrame::space_homogeneous(&[1.0], 0.0).unwrap()).unwrap();
        build_operator_mu(&fs, 0.0, &grid).unwrap()
    }

    #[test]
    fn pure_decay_matches_implicit_euler_factor() {
        let nt = 32;
        let g = Grid::homogeneous(nt, 1.0, 0.0).unwrap();
        let op = heat_op(-1.0, g);
        let v = evolve_period(&op, &[1.0], None).unwrap();
        let expect = (1.0 + 1.0 / nt as f64).powi(-(nt as i32));
        assert!((v[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn heat_mode_decay() {
        let g = Grid::periodic(1024, 64, 1.0, 4.0).unwrap();
        let op = heat_op(0.0, g);
        let v0: Vec<f64> = g.z_nodes().iter().map(|z| (0.25 * std::f64::consts::TAU * z).sin()).collect();
        let v = evolve_period(&op, &v0, None).unwrap();
        let ratio = v[16] / v0[16];
        let exact = (-0.25 * std::f64::consts::PI.powi(2)).exp();
        assert!((ratio / exact - 1.0).abs() < 0.02, "ratio {ratio} vs {exact}");
    }

    #[test]
    fn positivity_and_linearity() {
        let g = Grid::periodic(16, 32, 1.0, 1.0).unwrap();
        let op = heat_op(1.0, g);
        let v1: Vec<f64> = (0..32).map(|j| if j == 5 { 1.0 } else { 0.0 }).collect();
        let v2: Vec<f64> = (0..32).map(|j| (j as f64 * 0.3).cos() + 1.5).collect();
        let a = evolve_period(&op, &v1, None).unwrap();
        let b = evolve_period(&op, &v2, None).unwrap();
        assert!(a.iter().all(|v| *v > 0.0));
        let mix: Vec<f64> = v1.iter().zip(&v2).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
        let c = evolve_period(&op, &mix, None).unwrap();
        for j in 0..32 {
            assert!((c[j] - (2.0 * a[j] - 0.5 * b[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_derivative_of_a_sine() {
        let g = Grid::homogeneous(16, 2.0, 0.0).unwrap();
        let u = GridField::from_fn(g, 1, |_, k, _| (std::f64::consts::PI * g.t(k)).sin());
        let d = spectral_dt(&u);
        for k in 0..16 {
            let exact = std::f64::consts::PI * (std::f64::consts::PI * g.t(k)).cos();
            assert!((d.get(0, k, 0) - exact).abs() < 1e-12);
        }
    }
}
