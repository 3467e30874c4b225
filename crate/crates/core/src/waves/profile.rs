use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pde::GridField;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WaveDiagnostics {
    /// `max(u̲∨0 − u, u − ū, 0)` over the grid.
    pub trapping_violation: f64,
    /// Fitted log-slope of the profile on the downstream third.
    pub downstream_decay_rate: f64,
    /// Minimum over components and times on the upstream window.
    pub upstream_floor: f64,
    /// `max |R u + (B'u)∘u|` over interior nodes.
    pub pde_residual: f64,
    pub a: f64,
    pub iterations: usize,
    /// `max(u − K, 0)`.
    pub k_bound_violation: f64,
}

/// A constructed profile on the truncated cylinder `[−a, a]`.
#[derive(Clone, Debug)]
pub struct WaveProfile {
    pub e: Vec<f64>,
    pub c: f64,
    pub a: f64,
    pub u: GridField,
    pub lower: GridField,
    pub upper: GridField,
    pub diagnostics: WaveDiagnostics,
    pub solver: String,
    /// Convergence trace of the nonlinear solver.
    pub history: Vec<f64>,
    /// Largest trapping violation over Picard iterates, when Picard ran.
    pub iterate_trapping: Option<f64>,
    /// Stabilization gaps along an `a` schedule.
    pub gaps: Vec<f64>,
}

impl WaveProfile {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.u.write_csv(w)
    }

    pub fn diagnostics_json(&self) -> serde_json::Value {
        serde_json::json!({
            "trapping_violation": self.diagnostics.trapping_violation,
            "downstream_decay_rate": self.diagnostics.downstream_decay_rate,
            "upstream_floor": self.diagnostics.upstream_floor,
            "pde_residual": self.diagnostics.pde_residual,
            "a": self.a,
            "iterations": self.diagnostics.iterations,
        })
    }
}

/// `max(lower − u, u − upper, 0)`.
pub fn trapping_violation(u: &GridField, lower: &GridField, upper: &GridField) -> f64 {
    u.data
        .iter()
        .zip(lower.data.iter().zip(&upper.data))
        .fold(0.0f64, |m, (v, (lo, hi))| m.max(lo - v).max(v - hi))
}

/// Least-squares slope, intercept and `R²` of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

/// `max` over components and times at each node.
pub fn envelope_over_time(u: &GridField) -> Vec<f64> {
    let g = u.grid;
    (0..g.n_z)
        .map(|j| {
            let mut m = f64::NEG_INFINITY;
            for i in 0..u.n_comp {
                for k in 0..g.n_t {
                    m = m.max(u.get(i, k, j));
                }
            }
            m
        })
        .collect()
}

/// `min` over components and times at each node.
pub fn floor_over_time(u: &GridField) -> Vec<f64> {
    let g = u.grid;
    (0..g.n_z)
        .map(|j| {
            let mut m = f64::INFINITY;
            for i in 0..u.n_comp {
                for k in 0..g.n_t {
                    m = m.min(u.get(i, k, j));
                }
            }
            m
        })
        .collect()
}

/// Log-slope of the profile maximum on `z ∈ [−a, −a/3]`.
pub fn downstream_slope(u: &GridField) -> f64 {
    let g = u.grid;
    let a = g.half_width().unwrap_or(0.0);
    let env = envelope_over_time(u);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..g.n_z)
        .filter(|&j| g.z(j) <= -a / 3.0 && env[j] > 0.0)
        .map(|j| (g.z(j), env[j].ln()))
        .unzip();
    if xs.len() < 2 {
        return f64::NAN;
    }
    linear_fit(&xs, &ys).0
}

/// Slope of `ln u − μ z` against `ln |z|` on the downstream third, which is
/// one for the `|z| e^{μz}` shape.
pub fn downstream_shape_slope(u: &GridField, mu: f64) -> f64 {
    let g = u.grid;
    let a = g.half_width().unwrap_or(0.0);
    let env = envelope_over_time(u);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..g.n_z)
        .filter(|&j| g.z(j) <= -a / 3.0 && env[j] > 0.0)
        .map(|j| ((-g.z(j)).ln(), env[j].ln() - mu * g.z(j)))
        .unzip();
    if xs.len() < 2 {
        return f64::NAN;
    }
    linear_fit(&xs, &ys).0
}

/// Minimum of the profile over components and times on `[a/3, 5a/6]`.
/// The right end is excluded because the truncated profile meets its zero
/// boundary value there.
pub fn upstream_floor(u: &GridField) -> f64 {
    let g = u.grid;
    let a = g.half_width().unwrap_or(0.0);
    let fl = floor_over_time(u);
    (0..g.n_z)
        .filter(|&j| g.z(j) >= a / 3.0 && g.z(j) <= 5.0 * a / 6.0)
        .map(|j| fl[j])
        .fold(f64::INFINITY, f64::min)
}

/// Largest value over components and times on the left tenth of the domain.
pub fn downstream_max(u: &GridField) -> f64 {
    let g = u.grid;
    let a = g.half_width().unwrap_or(0.0);
    let env = envelope_over_time(u);
    (0..g.n_z)
        .filter(|&j| g.z(j) <= -0.8 * a)
        .map(|j| env[j])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Decay expected downstream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExpectedDecay {
    /// `e^{μ∧ z}`.
    Supercritical { mu_wedge: f64 },
    /// `|z| e^{μ* z}`.
    Critical { mu_star: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    pub downstream_eps: f64,
    /// Relative tolerance on the log-slope (supercritical).
    pub slope_rel_tol: f64,
    /// Tolerance on the `|z|` exponent (critical).
    pub shape_tol: f64,
    pub upstream_min: f64,
    pub residual_tol: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            downstream_eps: 1e-3,
            slope_rel_tol: 0.1,
            shape_tol: 0.2,
            upstream_min: 1e-2,
            residual_tol: 1e-5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub downstream_max: f64,
    pub downstream_ok: bool,
    /// Measured and expected rate (log-slope, or `|z|` exponent when critical).
    pub decay_measured: f64,
    pub decay_expected: f64,
    pub decay_ok: bool,
    pub upstream_floor: f64,
    pub upstream_ok: bool,
    pub pde_residual: f64,
    pub residual_ok: bool,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.downstream_ok && self.decay_ok && self.upstream_ok && self.residual_ok
    }
}

/// Checks the downstream limit, decay rate, upstream floor and residual of a
/// profile. Failures are reported, never raised.
pub fn verify_wave(profile: &WaveProfile, expected: ExpectedDecay, s: &VerifySettings) -> Verification {
    let u = &profile.u;
    let downstream = downstream_max(u);
    let (measured, target, ok) = match expected {
        ExpectedDecay::Supercritical { mu_wedge } => {
            let m = downstream_slope(u);
            (m, mu_wedge, (m - mu_wedge).abs() <= s.slope_rel_tol * mu_wedge)
        }
        ExpectedDecay::Critical { mu_star } => {
            let m = downstream_shape_slope(u, mu_star);
            (m, 1.0, (m - 1.0).abs() <= s.shape_tol)
        }
    };
    let floor = upstream_floor(u);
    let residual = profile.diagnostics.pde_residual;
    Verification {
        downstream_max: downstream,
        downstream_ok: downstream < s.downstream_eps,
        decay_measured: measured,
        decay_expected: target,
        decay_ok: ok,
        upstream_floor: floor,
        upstream_ok: floor > s.upstream_min,
        pde_residual: residual,
        residual_ok: residual < s.residual_tol,
    }
}
