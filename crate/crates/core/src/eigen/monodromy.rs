use nalgebra::DMatrix;

use super::Eigenpair;
use crate::error::{Error, Result};
use crate::frame::FrameSystem;
use crate::pde::{Grid, GridField, TimeScheme};

/// `M(t)` with `∂_t u = (M(t) + λ) u` for `z`-independent eigenfunctions of `R_μ`.
fn generator(fsys: &FrameSystem, mu: f64, t: f64) -> DMatrix<f64> {
    let n = fsys.dim();
    let nc = fsys.n_comp;
    let x = vec![0.0; n];
    DMatrix::from_fn(nc, nc, |r, s| {
        let mut v = fsys.l.get(r, s).value(t, &x);
        if r == s {
            let a = fsys.a[r].get(n - 1, n - 1).value(t, &x);
            let b = fsys.q.get(r, n - 1).value(t, &x);
            v += mu * mu * a - mu * b;
        }
        v
    })
}

/// Fourth-order Magnus step from `t` to `t + h`, returned as `exp(Ω − sI)`
/// together with the shift `s`.
fn magnus_step(fsys: &FrameSystem, mu: f64, t: f64, h: f64, constant: bool) -> (DMatrix<f64>, f64) {
    let omega = if constant {
        generator(fsys, mu, t) * h
    } else {
        let d = 3f64.sqrt() / 6.0;
        let m1 = generator(fsys, mu, t + (0.5 - d) * h);
        let m2 = generator(fsys, mu, t + (0.5 + d) * h);
        let comm = &m2 * &m1 - &m1 * &m2;
        (&m1 + &m2) * (0.5 * h) + comm * (3f64.sqrt() / 12.0 * h * h)
    };
    let s = (0..omega.nrows()).map(|i| omega[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    let shifted = &omega - DMatrix::identity(omega.nrows(), omega.nrows()) * s;
    (shifted.exp(), s)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Perron root and vector of a nonnegative matrix by repeated squaring,
/// polished with a few power steps.
pub(crate) fn perron_small(phi: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let n = phi.nrows();
    let mut s = phi / max_abs(phi);
    for _ in 0..64 {
        let sq = &s * &s;
        let m = max_abs(&sq);
        if !(m > 0.0) || !m.is_finite() {
            break;
        }
        s = sq / m;
    }
    let col = (0..n)
        .max_by(|a, b| s.column(*a).norm().total_cmp(&s.column(*b).norm()))
        .unwrap_or(0);
    let mut v: Vec<f64> = s.column(col).iter().map(|x| x.abs()).collect();
    let vm = v.iter().copied().fold(0.0, f64::max);
    if !(vm > 0.0) {
        return Err(Error::Numerical("monodromy matrix has no positive eigenvector".into()));
    }
    v.iter_mut().for_each(|x| *x /= vm);
    let mut rho = 0.0;
    for _ in 0..50 {
        let w = phi * nalgebra::DVector::from_vec(v.clone());
        let wm = w.iter().copied().fold(0.0, f64::max);
        rho = wm;
        let next: Vec<f64> = w.iter().map(|x| x / wm).collect();
        let change = next.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if change < 1e-15 {
            break;
        }
    }
    if !(rho > 0.0) {
        return Err(Error::Numerical("nonpositive Perron root".into()));
    }
    Ok((rho, v))
}

/// Principal eigenpair for `z`-independent coefficients from the monodromy
/// matrix of `∂_t u = M(t) u`; `λ = −ln ρ(Φ)/T`. The eigenfunction is sampled
/// at `n_t` times on a continuum homogeneous grid.
pub fn monodromy_eigenpair(fsys: &FrameSystem, mu: f64, n_t: usize, substeps: usize) -> Result<Eigenpair> {
    if !fsys.is_z_homogeneous() {
        return Err(Error::invalid("monodromy engine needs coefficients independent of space"));
    }
    let nc = fsys.n_comp;
    let period = fsys.period();
    let constant = fsys.is_time_independent();
    let per_sample = if constant { 1 } else { substeps.div_ceil(n_t).max(1) };
    let h = period / (n_t * per_sample) as f64;
    let mut steps = Vec::with_capacity(n_t * per_sample);
    for m in 0..n_t * per_sample {
        if constant && m > 0 {
            break;
        }
        steps.push(magnus_step(fsys, mu, m as f64 * h, h, constant));
    }
    let step = |m: usize| &steps[if constant { 0 } else { m }];

    let mut phi = DMatrix::<f64>::identity(nc, nc);
    let mut log_scale = 0.0;
    for m in 0..n_t * per_sample {
        let (e, s) = step(m);
        phi = e * phi;
        let norm = max_abs(&phi);
        phi /= norm;
        log_scale += s + norm.ln();
    }
    let (rho, v0) = perron_small(&phi)?;
    let lambda = -(rho.ln() + log_scale) / period;

    let grid = Grid::homogeneous(n_t, period, 0.0)?.with_scheme(TimeScheme::Spectral);
    let mut u = GridField::zeros(grid, nc);
    let mut w = nalgebra::DVector::from_vec(v0);
    let mut log_amp = 0.0;
    for i in 0..nc {
        u.set(i, 0, 0, w[i]);
    }
    for m in 0..n_t * per_sample {
        let (e, s) = step(m);
        w = e * w;
        let norm = w.amax();
        w /= norm;
        log_amp += s + norm.ln() + lambda * h;
        let next = m + 1;
        if next % per_sample == 0 && next / per_sample < n_t {
            let k = next / per_sample;
            for i in 0..nc {
                u.set(i, k, 0, w[i] * log_amp.exp());
            }
        }
    }
    let mx = u.max();
    u.scale(1.0 / mx);
    let kappa = u.min();
    Ok(Eigenpair {
        mu,
        lambda,
        u,
        kappa,
        iterations: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perron_of_swap_plus_identity() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (rho, v) = perron_small(&m).unwrap();
        assert!((rho - 2.0).abs() < 1e-14);
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);
    }
}
