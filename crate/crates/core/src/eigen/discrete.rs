use super::Eigenpair;
use crate::error::{Error, Result};
use crate::frame::OperatorSpec;
use crate::pde::{GridField, PeriodMap};

pub(crate) const MAX_POWER_ITERS: usize = 20_000;

/// Principal eigenpair of the discrete operator `(u_k − u_{k−1})/dt + A_k u_k`
/// on a periodic cell (or a single homogeneous node).
///
/// The shift `σ` is updated until the shifted period map has spectral
/// radius one; each radius comes from power iteration started at the
/// previous Perron vector (all ones initially).
pub fn principal_eigenvalue(op: &OperatorSpec, tol: f64) -> Result<Eigenpair> {
    let g = op.grid;
    if g.is_interval() {
        return Err(Error::invalid("principal eigenvalue needs a periodic or homogeneous grid"));
    }
    let (nc, nz) = (op.n_comp, g.n_z);
    let period = g.period;
    let (row_lo, row_hi) = op.row_sum_range();
    if op.time_independent() {
        // The eigenpair does not depend on n_t; refine the time step until
        // every shift in the row-sum range keeps the implicit step positive.
        let need = ((row_hi - row_lo) * g.dt() * 2.0).ceil() as usize;
        if need > 1 {
            let fine = principal_eigenvalue(&op.resample_time(g.n_t * need)?, tol)?;
            let slice = fine.u.slice_t(0);
            let mut u = GridField::zeros(g, nc);
            for k in 0..g.n_t {
                u.set_slice_t(k, &slice);
            }
            return Ok(Eigenpair { u, ..fine });
        }
    }
    let inv_dt = 1.0 / g.dt();
    // Any shift below 1/dt + min row sum keeps every step a positive M-matrix.
    let shift_cap = inv_dt + row_lo - 1e-9 * inv_dt;
    let mut sigma = row_lo;
    let mut v = vec![1.0; nc * nz];
    let mut total_iters = 0usize;
    let mut history = Vec::new();
    for _ in 0..60 {
        let map = PeriodMap::new(op, sigma)?;
        let (rho, iters) = perron(&map, &mut v, tol)?;
        total_iters += iters;
        let step = -rho.ln() / period;
        history.push(step.abs());
        if step.abs() <= tol * sigma.abs().max(1.0) {
            let mut u = GridField::zeros(g, nc);
            map.apply(&v, None, Some(&mut u));
            let mx = u.max();
            u.scale(1.0 / mx);
            let kappa = u.min();
            return Ok(Eigenpair {
                mu: op.mu,
                lambda: sigma,
                u,
                kappa,
                iterations: total_iters,
            });
        }
        let mut next = sigma + step;
        if next >= shift_cap {
            next = 0.5 * (sigma + shift_cap.min(row_hi.max(sigma)));
            if next <= sigma {
                return Err(Error::Numerical(format!(
                    "eigenvalue lies beyond the positivity limit of the time step; increase n_t (dt = {})",
                    g.dt()
                )));
            }
        }
        sigma = next;
    }
    Err(Error::NonConvergence {
        what: "principal eigenvalue shift",
        iterations: 60,
        last: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// Spectral radius of the period map by power iteration in the max norm.
/// `v` holds the start vector and returns the Perron vector (max one).
pub(crate) fn perron(map: &PeriodMap<'_>, v: &mut [f64], tol: f64) -> Result<(f64, usize)> {
    let mut history = Vec::new();
    let mut rho = 0.0;
    for it in 1..=MAX_POWER_ITERS {
        let w = map.apply(v, None, None);
        let mx = w.iter().copied().fold(0.0, f64::max);
        if !(mx > 0.0) || !mx.is_finite() {
            return Err(Error::Numerical("power iteration lost positivity".into()));
        }
        let change = w.iter().zip(v.iter()).fold(0.0f64, |m, (a, b)| m.max((a / mx - b).abs()));
        let rho_prev = rho;
        rho = mx / v.iter().copied().fold(0.0, f64::max);
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / mx);
        history.push(change);
        if change < tol && (rho - rho_prev).abs() <= tol * rho {
            return Ok((rho, it));
        }
    }
    Err(Error::NonConvergence {
        what: "power iteration",
        iterations: MAX_POWER_ITERS,
        last: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}
