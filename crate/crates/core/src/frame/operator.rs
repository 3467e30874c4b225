use super::transform::FrameSystem;
use crate::error::{Error, Result};
use crate::pde::{Grid, ZDomain};

/// Coefficient tables of `R_μ` on a grid.
///
/// `R` is `∂_t − ∂_z(a ∂_z) + b ∂_z − L'` along the direction of propagation.
/// `R_μ = e^{−μz} R e^{μz}` is applied through the conjugated three-point
/// stencil of `R`, so the identity `R(e^{μz}v) = e^{μz} R_μ v` holds exactly on
/// the grid and the stencil keeps the sign pattern of `R` for every `μ`.
#[derive(Clone, Debug)]
pub struct OperatorSpec {
    pub grid: Grid,
    pub n_comp: usize,
    pub mu: f64,
    /// `a` at half points, `[i][k][h]`.
    diff_half: Vec<f64>,
    /// `b` at nodes, `[i][k][j]`.
    drift: Vec<f64>,
    /// `∂_z a` at nodes, `[i][k][j]`.
    diff_dz: Vec<f64>,
    /// `−L'` at nodes, `[k][j][r][s]`.
    coupling: Vec<f64>,
    /// Additional diagonal potential, `[i][k][j]`.
    extra: Option<Vec<f64>>,
    time_independent: bool,
}

/// Assembles `R_μ` for the frame system on `grid`.
pub fn build_operator_mu(fsys: &FrameSystem, mu: f64, grid: &Grid) -> Result<OperatorSpec> {
    let n = fsys.dim();
    if !fsys.is_transverse_homogeneous() {
        return Err(Error::Unsupported(
            "coefficients vary across the direction of propagation; only line operators are implemented".into(),
        ));
    }
    match grid.domain {
        ZDomain::Homogeneous { .. } if !fsys.is_z_homogeneous() => {
            return Err(Error::invalid("homogeneous grid for coefficients that depend on z"));
        }
        ZDomain::Periodic { length } if !fsys.is_z_homogeneous() => {
            let ratio = length / fsys.z_period();
            if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
                return Err(Error::invalid(format!(
                    "periodic cell length {length} is not a multiple of the z period {}",
                    fsys.z_period()
                )));
            }
        }
        _ => {}
    }
    if (grid.period / fsys.period() - (grid.period / fsys.period()).round()).abs() > 1e-9 {
        return Err(Error::invalid("grid period must be a multiple of the frame period"));
    }
    if !mu.is_finite() {
        return Err(Error::invalid("mu must be finite"));
    }
    let (nc, nt, nz, nh) = (fsys.n_comp, grid.n_t, grid.n_z, grid.n_half());
    let dz = grid.dz();
    let mut x = vec![0.0; n];
    let mut diff_half = vec![0.0; nc * nt * nh];
    let mut drift = vec![0.0; nc * nt * nz];
    let mut diff_dz = vec![0.0; nc * nt * nz];
    let mut coupling = vec![0.0; nt * nz * nc * nc];
    for k in 0..nt {
        let t = grid.t(k);
        for i in 0..nc {
            let a = fsys.a[i].get(n - 1, n - 1);
            let b = fsys.q.get(i, n - 1);
            for h in 0..nh {
                x[n - 1] = grid.z(h) + 0.5 * dz;
                diff_half[(i * nt + k) * nh + h] = a.value(t, &x);
            }
            for j in 0..nz {
                x[n - 1] = grid.z(j);
                drift[(i * nt + k) * nz + j] = b.value(t, &x);
                diff_dz[(i * nt + k) * nz + j] = a.dx(t, &x, n - 1);
            }
        }
        for j in 0..nz {
            x[n - 1] = grid.z(j);
            for r in 0..nc {
                for s in 0..nc {
                    coupling[((k * nz + j) * nc + r) * nc + s] = -fsys.l.get(r, s).value(t, &x);
                }
            }
        }
    }
    let op = OperatorSpec {
        grid: *grid,
        n_comp: nc,
        mu,
        diff_half,
        drift,
        diff_dz,
        coupling,
        extra: None,
        time_independent: fsys.is_time_independent(),
    };
    op.check_sign_pattern()?;
    Ok(op)
}

impl OperatorSpec {
    pub fn time_independent(&self) -> bool {
        self.time_independent
    }

    #[inline]
    fn half(&self, i: usize, k: usize, h: usize) -> f64 {
        self.diff_half[(i * self.grid.n_t + k) * self.grid.n_half() + h]
    }

    #[inline]
    pub fn drift(&self, i: usize, k: usize, j: usize) -> f64 {
        self.drift[(i * self.grid.n_t + k) * self.grid.n_z + j]
    }

    /// Diffusion coefficient at node `j` (average of the neighbouring half points).
    pub fn diffusion(&self, i: usize, k: usize, j: usize) -> f64 {
        let (w, e) = self.half_neighbours(i, k, j);
        0.5 * (w + e)
    }

    fn half_neighbours(&self, i: usize, k: usize, j: usize) -> (f64, f64) {
        let nh = self.grid.n_half();
        match self.grid.domain {
            ZDomain::Interval { .. } => {
                let w = if j > 0 { self.half(i, k, j - 1) } else { self.half(i, k, 0) };
                let e = if j < nh { self.half(i, k, j) } else { self.half(i, k, nh - 1) };
                (w, e)
            }
            _ => (self.half(i, k, (j + nh - 1) % nh), self.half(i, k, j)),
        }
    }

    /// Entry `(r, s)` of the zeroth-order matrix `−L'` plus any extra diagonal.
    #[inline]
    pub fn coupling(&self, k: usize, j: usize, r: usize, s: usize) -> f64 {
        let nc = self.n_comp;
        let mut v = self.coupling[((k * self.grid.n_z + j) * nc + r) * nc + s];
        if r == s {
            if let Some(e) = &self.extra {
                v += e[(r * self.grid.n_t + k) * self.grid.n_z + j];
            }
        }
        v
    }

    /// Stencil `(west, center, east)` of the transport part of `R_μ` for
    /// component `i` at `(k, j)`. The center excludes the coupling matrix.
    #[inline]
    pub fn stencil(&self, i: usize, k: usize, j: usize) -> [f64; 3] {
        let dz = self.grid.dz();
        let b = self.drift(i, k, j);
        let (aw, ae) = self.half_neighbours(i, k, j);
        if dz == 0.0 {
            // Continuum limit for z-independent functions.
            let a = 0.5 * (aw + ae);
            return [0.0, -self.mu * self.mu * a + self.mu * b, 0.0];
        }
        let h2 = dz * dz;
        let west = (-aw / h2 - b / (2.0 * dz)) * (-self.mu * dz).exp();
        let east = (-ae / h2 + b / (2.0 * dz)) * (self.mu * dz).exp();
        let center = (aw + ae) / h2;
        if let ZDomain::Homogeneous { .. } = self.grid.domain {
            return [0.0, west + center + east, 0.0];
        }
        [west, center, east]
    }

    /// Continuum coefficients of `R_μ`: `(diffusion, first order, potential)`
    /// with the potential taken on the diagonal, coupling excluded.
    pub fn continuum_coefficients(&self, i: usize, k: usize, j: usize) -> (f64, f64, f64) {
        let a = self.diffusion(i, k, j);
        let b = self.drift(i, k, j);
        let da = self.diff_dz[(i * self.grid.n_t + k) * self.grid.n_z + j];
        let mu = self.mu;
        (a, b - 2.0 * mu * a, -mu * mu * a - mu * da + mu * b)
    }

    /// Copy with `extra` added to the diagonal potential, `[i][k][j]`.
    pub fn with_extra_potential(&self, extra: Vec<f64>, time_independent: bool) -> Result<Self> {
        let need = self.n_comp * self.grid.n_t * self.grid.n_z;
        if extra.len() != need {
            return Err(Error::DimensionMismatch {
                expected: need,
                got: extra.len(),
            });
        }
        let mut out = self.clone();
        out.extra = Some(match &self.extra {
            Some(e) => e.iter().zip(&extra).map(|(a, b)| a + b).collect(),
            None => extra,
        });
        out.time_independent = self.time_independent && time_independent;
        Ok(out)
    }

    pub fn extra_potential(&self) -> Option<&[f64]> {
        self.extra.as_deref()
    }

    /// Same coefficients at another `μ`.
    pub fn with_mu(&self, mu: f64) -> Self {
        let mut out = self.clone();
        out.mu = mu;
        out
    }

    /// Time-independent operator on a grid with `n_t` time steps (the
    /// coefficients at `k = 0` are repeated).
    pub fn resample_time(&self, n_t: usize) -> Result<Self> {
        if !self.time_independent {
            return Err(Error::invalid("only time-independent operators can be resampled in time"));
        }
        let old = self.grid.n_t;
        let rep = |v: &[f64], inner: usize, outer: usize| -> Vec<f64> {
            let mut out = Vec::with_capacity(outer * n_t * inner);
            for o in 0..outer {
                let block = &v[o * old * inner..o * old * inner + inner];
                for _ in 0..n_t {
                    out.extend_from_slice(block);
                }
            }
            out
        };
        let (nc, nz, nh) = (self.n_comp, self.grid.n_z, self.grid.n_half());
        let mut out = self.clone();
        out.grid.n_t = n_t;
        out.diff_half = rep(&self.diff_half, nh, nc);
        out.drift = rep(&self.drift, nz, nc);
        out.diff_dz = rep(&self.diff_dz, nz, nc);
        out.coupling = rep(&self.coupling, nz * nc * nc, 1);
        out.extra = self.extra.as_ref().map(|e| rep(e, nz, nc));
        Ok(out)
    }

    /// Row sums of the spatial operator at time index `k`, used for bounds.
    pub fn row_sum_range(&self) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let nc = self.n_comp;
        for k in 0..self.grid.n_t {
            for j in self.grid.unknowns() {
                for i in 0..nc {
                    let [w, c, e] = self.stencil(i, k, j);
                    let mut s = w + c + e;
                    for r in 0..nc {
                        s += self.coupling(k, j, i, r);
                    }
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
            }
        }
        (lo, hi)
    }

    fn check_sign_pattern(&self) -> Result<()> {
        for i in 0..self.n_comp {
            for k in 0..self.grid.n_t {
                for j in 0..self.grid.n_z {
                    let [w, _, e] = self.stencil(i, k, j);
                    if w > 0.0 || e > 0.0 {
                        return Err(Error::invalid(format!(
                            "grid too coarse: cell Péclet number exceeds 2 at component {i}, z = {}; increase n_z",
                            self.grid.z(j)
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::KppSystem;
    use crate::frame::{transform_coefficients, MovingFrame};

    fn scalar_frame(c: f64) -> FrameSystem {
        let sys = KppSystem::scalar(1.0, 0.0, 1.0, 1.0);
        transform_coefficients(&sys, &MovingFrame::space_homogeneous(&[1.0], c).unwrap()).unwrap()
    }

    #[test]
    fn scalar_potential_in_moving_frame() {
        let fs = scalar_frame(2.5);
        let g = Grid::homogeneous(4, 1.0, 0.0).unwrap();
        let mu = 0.8;
        let op = build_operator_mu(&fs, mu, &g).unwrap();
        let (_, _, pot) = op.continuum_coefficients(0, 0, 0);
        assert!((pot + op.coupling(0, 0, 0, 0) - (-1.0 - mu * mu + mu * 2.5)).abs() < 1e-14);
        let [_, c, _] = op.stencil(0, 0, 0);
        assert!((c + op.coupling(0, 0, 0, 0) - (-1.0 - mu * mu + mu * 2.5)).abs() < 1e-14);
    }

    #[test]
    fn advection_adds_first_order_potential() {
        let sys = KppSystem::scalar(1.0, 0.7, 1.0, 1.0);
        let fs = transform_coefficients(&sys, &MovingFrame::space_homogeneous(&[1.0], 0.0).unwrap()).unwrap();
        let g = Grid::homogeneous(4, 1.0, 0.0).unwrap();
        let op = build_operator_mu(&fs, 0.5, &g).unwrap();
        let (_, first, pot) = op.continuum_coefficients(0, 0, 0);
        assert!((pot - (-0.25 + 0.5 * 0.7)).abs() < 1e-14);
        assert!((first - (0.7 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn mu_zero_recovers_r() {
        let fs = scalar_frame(1.5);
        let g = Grid::periodic(4, 16, 1.0, 1.0).unwrap();
        let op = build_operator_mu(&fs, 0.0, &g).unwrap();
        let h = g.dz();
        let [w, c, e] = op.stencil(0, 0, 3);
        assert!((w - (-1.0 / (h * h) - 1.5 / (2.0 * h))).abs() < 1e-9);
        assert!((e - (-1.0 / (h * h) + 1.5 / (2.0 * h))).abs() < 1e-9);
        assert!((c - 2.0 / (h * h)).abs() < 1e-9);
    }

    #[test]
    fn conjugated_stencil_approximates_continuum_potential() {
        let fs = scalar_frame(2.0);
        let mu = 1.3;
        for (n, tol) in [(64usize, 1e-3), (256, 1e-4)] {
            let g = Grid::periodic(1, n, 1.0, 1.0).unwrap();
            let op = build_operator_mu(&fs, mu, &g).unwrap();
            let [w, c, e] = op.stencil(0, 0, 0);
            let (_, _, pot) = op.continuum_coefficients(0, 0, 0);
            assert!((w + c + e - pot).abs() < tol);
        }
    }

    #[test]
    fn coarse_grid_with_strong_drift_is_rejected() {
        let fs = scalar_frame(40.0);
        let g = Grid::periodic(1, 16, 1.0, 1.0).unwrap();
        assert!(build_operator_mu(&fs, 0.0, &g).is_err());
    }
}
