use serde::Serialize;

use super::lattice::{materialize, CellFunction, Competition};
use super::WaveProblem;
use crate::dispersion::DispersionCurve;
use crate::eigen::Spectrum;
use crate::error::{Error, Result};
use crate::pde::{apply_operator, Grid, GridField};

/// Cap on `M₁`, `M₂`, `M₃`.
pub const M_CAP: f64 = 1e8;
const GROWTH: f64 = 1.25;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Envelopes at the critical speed, built from `Θ(μ) = e^{μz} u'_μ`
/// (mean-one eigenfunctions) and `Θ̇ = e^{μz}(z u'_μ + ∂_μ u'_μ)`.
#[derive(Clone, Debug)]
pub struct CriticalEnvelopes {
    pub c: f64,
    /// Maximizer of `λ₁,μ + cμ` for the discrete operator.
    pub mu_star: f64,
    /// `λ₁,μ* + cμ*` on the grid (zero at the exact critical speed).
    pub lambda_star: f64,
    pub gamma: f64,
    pub g_gamma: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub a_star: f64,
    pub dz: f64,
    pub theta: CellFunction,
    pub dtheta: CellFunction,
    pub theta_gamma: CellFunction,
    /// First lattice index where `ū` is clamped, `[i][k]`.
    upper_cut: Vec<i64>,
    /// First lattice index where `u̲` vanishes, `[i][k]`.
    lower_cut: Vec<i64>,
    /// Largest violation of the discrete inequalities on the tuning grid.
    pub super_defect: f64,
    pub sub_defect: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CriticalSummary {
    pub mu_star: f64,
    pub lambda_star: f64,
    pub gamma: f64,
    pub g_gamma: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub a_star: f64,
    pub super_defect: f64,
    pub sub_defect: f64,
}

impl CriticalEnvelopes {
    pub fn summary(&self) -> CriticalSummary {
        CriticalSummary {
            mu_star: self.mu_star,
            lambda_star: self.lambda_star,
            gamma: self.gamma,
            g_gamma: self.g_gamma,
            m1: self.m1,
            m2: self.m2,
            m3: self.m3,
            a_star: self.a_star,
            super_defect: self.super_defect,
            sub_defect: self.sub_defect,
        }
    }

    fn n_t(&self) -> usize {
        self.theta.n_t
    }

    /// `−Θ̇(μ*)` at a lattice point.
    fn minus_dtheta(&self, i: usize, k: usize, m: i64) -> f64 {
        let z = m as f64 * self.dz;
        -(self.mu_star * z).exp() * (z * self.theta.at(i, k, m) + self.dtheta.at(i, k, m))
    }

    /// `−Θ̇(μ*) − M₃Θ(μ*) + Θ(μ*+γ)`.
    fn lower_core(&self, m3: f64, i: usize, k: usize, m: i64) -> f64 {
        let z = m as f64 * self.dz;
        self.minus_dtheta(i, k, m) - m3 * (self.mu_star * z).exp() * self.theta.at(i, k, m)
            + ((self.mu_star + self.gamma) * z).exp() * self.theta_gamma.at(i, k, m)
    }

    pub fn upper_at(&self, i: usize, k: usize, m: i64) -> f64 {
        if m < self.upper_cut[i * self.n_t() + k] {
            self.m2 * self.m1 * self.minus_dtheta(i, k, m)
        } else {
            self.m2
        }
    }

    pub fn lower_at(&self, i: usize, k: usize, m: i64) -> f64 {
        if m < self.lower_cut[i * self.n_t() + k] {
            self.m1 * self.m2 * self.lower_core(self.m3, i, k, m)
        } else {
            0.0
        }
    }

    pub fn upper(&self, grid: &Grid) -> GridField {
        materialize(grid, self.theta.n_comp, |i, k, m| self.upper_at(i, k, m))
    }

    /// `u̲`, already equal to `u̲ ∨ 0`.
    pub fn lower(&self, grid: &Grid) -> GridField {
        materialize(grid, self.theta.n_comp, |i, k, m| self.lower_at(i, k, m))
    }

    pub fn lower_plus(&self, grid: &Grid) -> GridField {
        self.lower(grid)
    }
}

/// First lattice index `≥ start` where `f ≤ 0`, requiring `f > 0` before it.
fn first_nonpositive(start: i64, end: i64, f: impl Fn(i64) -> f64) -> Option<i64> {
    (start..=end).find(|&m| !(f(m) > 0.0))
}

/// Envelopes at the critical speed on the interval grid `grid`.
pub fn build_envelopes_critical(problem: &WaveProblem<'_>, curve: &DispersionCurve, grid: &Grid, tol: f64) -> Result<CriticalEnvelopes> {
    let spec = problem.discrete_spectrum();
    let c = problem.c();
    let dz = problem.dz;

    // μ* maximizes Λ(μ) = λ₁,μ + cμ; golden section around the continuum value.
    let (mut lo, mut hi) = (0.5 * curve.mu_star, 1.5 * curve.mu_star);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (spec.lambda(x1)?, spec.lambda(x2)?);
    while hi - lo > 1e-9 * hi {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = spec.lambda(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = spec.lambda(x2)?;
        }
    }
    let mu_star = 0.5 * (lo + hi);
    let mean_one = |mu: f64| -> Result<(f64, CellFunction)> {
        let e = spec.eigenpair(mu)?;
        Ok((e.lambda, CellFunction::from_field(&e.mean_normalized())))
    };
    let (lambda_star, theta) = mean_one(mu_star)?;
    let h = 1e-3 * mu_star;
    let (_, plus) = mean_one(mu_star + h)?;
    let (_, minus) = mean_one(mu_star - h)?;
    let dtheta = CellFunction::difference(&plus, &minus, 2.0 * h);
    let gamma = 0.5 * mu_star;
    let (g_gamma, theta_gamma) = mean_one(mu_star + gamma)?;
    if !(g_gamma < 0.0) {
        return Err(Error::Numerical(format!("g(gamma) = {g_gamma:.3e} is not negative")));
    }

    let nc = problem.fsys.n_comp;
    let nt = theta.n_t;
    let half = (grid.n_z as i64 - 1) / 2;
    // Far enough left that e^{μ*z} has underflowed every constant in play.
    let far = -half - (60.0 / (mu_star * dz)).ceil() as i64;
    let mut env = CriticalEnvelopes {
        c,
        mu_star,
        lambda_star,
        gamma,
        g_gamma,
        m1: 1.0,
        m2: 1.0,
        m3: 1.0,
        a_star: f64::NAN,
        dz,
        theta,
        dtheta,
        theta_gamma,
        upper_cut: vec![0; nc * nt],
        lower_cut: vec![0; nc * nt],
        super_defect: f64::NAN,
        sub_defect: f64::NAN,
    };

    // M₁: (−M₁Θ̇) ∧_{−∞} 1 well defined and positive on the grid.
    loop {
        let mut ok = true;
        for i in 0..nc {
            for k in 0..nt {
                let m1 = env.m1;
                match first_nonpositive(far, half, |m| 1.0 - m1 * env.minus_dtheta(i, k, m)) {
                    Some(cut) if (far..cut).all(|m| env.minus_dtheta(i, k, m) > 0.0) => env.upper_cut[i * nt + k] = cut,
                    _ => ok = false,
                }
            }
        }
        if ok {
            break;
        }
        env.m1 *= GROWTH;
        if env.m1 > M_CAP {
            return Err(Error::EnvelopeTuning(format!(
                "M1 exceeded {M_CAP:e}: -Theta_dot never crosses 1 from below"
            )));
        }
    }

    let op = problem.interval_operator(grid)?;
    let comp = Competition::new(&problem.fsys, grid);
    let scale_tol = |u: &GridField| tol * u.sup_norm().max(1.0);

    // M₂: −L'1 + M₂ b'_ii ≥ 0, then the supersolution inequality on the grid.
    let mut m2_min: f64 = 0.0;
    for k in 0..grid.n_t {
        for j in 0..grid.n_z {
            let b = comp.block(k, j);
            for i in 0..nc {
                let row: f64 = (0..nc).map(|s| -op.coupling(k, j, i, s)).sum();
                m2_min = m2_min.max(row / b[i * nc + i]);
            }
        }
    }
    env.m2 = m2_min.max(1.0);
    loop {
        let u = env.upper(grid);
        let ru = apply_operator(&op, &u)?;
        let (defect, at) = worst(grid, nc, |i, k, j| {
            -(ru.get(i, k, j) + comp.block(k, j)[i * nc + i] * u.get(i, k, j).powi(2))
        });
        if defect <= scale_tol(&u) {
            env.super_defect = defect.max(0.0);
            break;
        }
        env.m2 *= GROWTH;
        if env.m2 > M_CAP {
            return Err(Error::EnvelopeTuning(format!(
                "M2 exceeded {M_CAP:e}; supersolution inequality fails first at {at}"
            )));
        }
    }

    // M₃: u̲ = 0 on z ≥ 0, u̲ ≤ ū, and the subsolution inequality.
    let upper = env.upper(grid);
    loop {
        let m3 = env.m3;
        let mut ok = true;
        let mut why = String::new();
        for i in 0..nc {
            for k in 0..nt {
                match first_nonpositive(far, 0, |m| env.lower_core(m3, i, k, m)) {
                    Some(cut) => env.lower_cut[i * nt + k] = cut,
                    None => {
                        ok = false;
                        why = format!("lower envelope positive at z = 0 (component {i}, t index {k})");
                    }
                }
            }
        }
        if ok {
            let low = env.lower(grid);
            let (over, at) = worst(grid, nc, |i, k, j| low.get(i, k, j) - upper.get(i, k, j));
            let rl = apply_operator(&op, &low)?;
            let (defect, at2) = worst(grid, nc, |i, k, j| rl.get(i, k, j) + low.get(i, k, j) * comp.apply(k, j, &upper, i));
            if over > 0.0 {
                ok = false;
                why = format!("lower envelope above upper at {at}");
            } else if defect > scale_tol(&upper) {
                ok = false;
                why = format!("subsolution inequality fails at {at2} by {defect:.3e}");
            } else {
                env.sub_defect = defect.max(0.0);
            }
        }
        if ok {
            break;
        }
        env.m3 *= GROWTH;
        if env.m3 > M_CAP {
            return Err(Error::EnvelopeTuning(format!("M3 exceeded {M_CAP:e}; {why}")));
        }
    }
    let first_cut = env.lower_cut.iter().copied().min().unwrap_or(0);
    env.a_star = (1 - first_cut) as f64 * dz;
    Ok(env)
}

/// Largest value of `f` over interior nodes and where it occurs.
fn worst(grid: &Grid, nc: usize, f: impl Fn(usize, usize, usize) -> f64) -> (f64, String) {
    let mut best = (f64::NEG_INFINITY, String::new());
    for k in 0..grid.n_t {
        for j in grid.unknowns() {
            for i in 0..nc {
                let v = f(i, k, j);
                if v > best.0 {
                    best = (v, format!("component {i}, t = {:.4}, z = {:.4}", grid.t(k), grid.z(j)));
                }
            }
        }
    }
    best
}
