//! Pulsating traveling waves: envelopes, truncated-cylinder solves,
//! continuation in `a` and verification.

mod critical;
mod envelopes;
mod lattice;
mod nonlinear;
mod profile;

use serde::{Deserialize, Serialize};

pub use critical::{build_envelopes_critical, CriticalEnvelopes, CriticalSummary, M_CAP};
pub use envelopes::{build_envelopes_supercritical, SupercriticalEnvelopes, SupercriticalSummary, A_STAR_MARGIN};
pub use lattice::{lattice_index, CellFunction, Competition};
pub use nonlinear::NonlinearSolver;
pub use profile::{
    downstream_max, downstream_shape_slope, downstream_slope, linear_fit, trapping_violation, upstream_floor, verify_wave, ExpectedDecay,
    Verification, VerifySettings, WaveDiagnostics, WaveProfile,
};

use crate::cauchy::logistic_envelope;
use crate::coeffs::KppSystem;
use crate::dispersion::{frame_system, minimal_speed, persistence_check, DispersionCurve, PersistenceReport, SearchSettings};
use crate::eigen::{EigenSettings, FrameSpectrum};
use crate::error::{Error, Result};
use crate::frame::{build_operator_mu, FrameSystem, OperatorSpec};
use crate::pde::{Boundary, Grid, GridField};
use nonlinear::{Coupling, Problem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveSettings {
    /// Half-length of the truncated cylinder.
    pub a: f64,
    pub dz: f64,
    /// Time steps per unit time (time-dependent systems only).
    pub n_t: usize,
    /// Convergence tolerance of the nonlinear solve.
    pub tol: f64,
    /// Eigenvalue tolerance on the wave lattice.
    pub eigen_tol: f64,
    pub solver: NonlinearSolver,
    pub max_iter: usize,
    pub max_periods: usize,
    /// Slack allowed in the discrete envelope inequalities.
    pub ineq_tol: f64,
    /// Increasing half-lengths for continuation; a single solve at `a` when absent.
    pub a_schedule: Option<Vec<f64>>,
    pub window: f64,
    pub gap_tol: f64,
    pub verify: VerifySettings,
    pub search: SearchSettings,
    pub eigen: EigenSettings,
}

impl Default for WaveSettings {
    fn default() -> Self {
        Self {
            a: 40.0,
            dz: 1.0 / 32.0,
            n_t: 32,
            tol: 1e-10,
            eigen_tol: 1e-12,
            solver: NonlinearSolver::default(),
            max_iter: 500,
            max_periods: 20000,
            ineq_tol: 1e-8,
            a_schedule: None,
            window: 10.0,
            gap_tol: 1e-4,
            verify: VerifySettings::default(),
            search: SearchSettings::default(),
            eigen: EigenSettings::default(),
        }
    }
}

/// The system in the frame moving at `c`, with the lattice every wave grid
/// shares: eigenfunctions and interval solves use the same `dz` and `n_t`.
pub struct WaveProblem<'a> {
    pub sys: &'a KppSystem,
    pub fsys: FrameSystem,
    pub dz: f64,
    pub n_t: usize,
    pub eigen_grid: Grid,
    pub settings: WaveSettings,
}

impl<'a> WaveProblem<'a> {
    pub fn new(sys: &'a KppSystem, e: &[f64], c: f64, settings: WaveSettings) -> Result<Self> {
        Self::from_frame(sys, frame_system(sys, e, c)?, settings)
    }

    pub fn from_frame(sys: &'a KppSystem, fsys: FrameSystem, settings: WaveSettings) -> Result<Self> {
        if fsys.dim() != 1 && !fsys.is_transverse_homogeneous() {
            return Err(Error::Unsupported(
                "wave solves need coefficients constant across the direction of propagation".into(),
            ));
        }
        let period = fsys.period();
        let n_t = if fsys.is_time_independent() {
            1
        } else {
            ((settings.n_t as f64 * period).ceil() as usize).max(4)
        };
        let (dz, eigen_grid) = if fsys.is_z_homogeneous() {
            (settings.dz, Grid::homogeneous(n_t, period, settings.dz)?)
        } else {
            let len = fsys.z_period();
            let n_cell = ((len / settings.dz).round() as usize).max(crate::pde::MIN_NZ);
            (len / n_cell as f64, Grid::periodic(n_t, n_cell, period, len)?)
        };
        Ok(Self {
            sys,
            fsys,
            dz,
            n_t,
            eigen_grid,
            settings,
        })
    }

    pub fn c(&self) -> f64 {
        self.fsys.c()
    }

    /// `λ₁,μ + cμ` of the discretized operator on the wave lattice.
    pub fn discrete_spectrum(&self) -> FrameSpectrum<'_> {
        let settings = EigenSettings {
            tol: self.settings.eigen_tol,
            ..self.settings.eigen
        };
        FrameSpectrum::on_grid(&self.fsys, settings, self.eigen_grid)
    }

    pub fn interval_grid(&self, a: f64) -> Result<Grid> {
        Grid::interval_with_spacing(self.n_t, self.fsys.period(), a, self.dz)
    }

    pub fn interval_operator(&self, grid: &Grid) -> Result<OperatorSpec> {
        build_operator_mu(&self.fsys, 0.0, grid)
    }
}

/// Envelopes of either regime.
#[derive(Clone, Debug)]
pub enum Envelopes {
    Supercritical(SupercriticalEnvelopes),
    Critical(CriticalEnvelopes),
}

impl Envelopes {
    pub fn a_star(&self) -> f64 {
        match self {
            Envelopes::Supercritical(e) => e.a_star,
            Envelopes::Critical(e) => e.a_star,
        }
    }

    pub fn upper(&self, grid: &Grid) -> GridField {
        match self {
            Envelopes::Supercritical(e) => e.upper(grid),
            Envelopes::Critical(e) => e.upper(grid),
        }
    }

    pub fn lower(&self, grid: &Grid) -> GridField {
        match self {
            Envelopes::Supercritical(e) => e.lower(grid),
            Envelopes::Critical(e) => e.lower(grid),
        }
    }

    pub fn lower_plus(&self, grid: &Grid) -> GridField {
        match self {
            Envelopes::Supercritical(e) => e.lower_plus(grid),
            Envelopes::Critical(e) => e.lower_plus(grid),
        }
    }

    pub fn expected_decay(&self) -> ExpectedDecay {
        match self {
            Envelopes::Supercritical(e) => ExpectedDecay::Supercritical {
                mu_wedge: e.roots.mu_wedge,
            },
            Envelopes::Critical(e) => ExpectedDecay::Critical { mu_star: e.mu_star },
        }
    }

    pub fn summary_json(&self) -> serde_json::Value {
        match self {
            Envelopes::Supercritical(e) => {
                serde_json::json!({ "kind": "supercritical", "envelopes": e.summary() })
            }
            Envelopes::Critical(e) => {
                serde_json::json!({ "kind": "critical", "envelopes": e.summary() })
            }
        }
    }
}

/// Builds the envelopes for the problem's speed, choosing the regime from
/// the dispersion curve.
pub fn build_envelopes(problem: &WaveProblem<'_>, curve: &DispersionCurve) -> Result<Envelopes> {
    let c = problem.c();
    if curve.is_critical(c) {
        // Inequalities are checked on the largest grid that will be solved on.
        let a = problem
            .settings
            .a_schedule
            .iter()
            .flatten()
            .fold(problem.settings.a, |m, v| m.max(*v));
        let grid = problem.interval_grid(a)?;
        build_envelopes_critical(problem, curve, &grid, problem.settings.ineq_tol).map(Envelopes::Critical)
    } else if c < curve.c_star {
        Err(Error::Subcritical { c, c_star: curve.c_star })
    } else {
        build_envelopes_supercritical(problem, curve).map(Envelopes::Supercritical)
    }
}

/// Solves the truncated problem on `[−a, a]` with data `(u̲∨0)(±a)`.
///
/// With [`NonlinearSolver::Picard`] this runs the outer iteration `r ↦ u_r`
/// (frozen competition in the supercritical case, diagonal term kept live in
/// the critical case) and records the worst trapping violation over iterates.
/// The other solvers act on `R u + (B'u)∘u = 0` directly.
pub fn fixed_point_truncated(problem: &WaveProblem<'_>, env: &Envelopes, a: f64, tol: f64) -> Result<WaveProfile> {
    let grid = problem.interval_grid(a)?;
    let a_grid = grid.half_width().unwrap_or(a);
    if a_grid < env.a_star() {
        return Err(Error::DomainTooShort {
            a: a_grid,
            a_star: env.a_star(),
        });
    }
    let op = problem.interval_operator(&grid)?;
    let comp = Competition::new(&problem.fsys, &grid);
    let lower = env.lower_plus(&grid);
    let upper = env.upper(&grid);
    let bnd = Boundary::from_field(&lower);
    let k_bound = logistic_envelope(problem.sys).k;
    let p = Problem {
        op: &op,
        b: &comp,
        bnd: &bnd,
    };
    let s = &problem.settings;

    let init = lower.zip_map(&upper.map(|v| v.min(k_bound)), f64::max);
    let (u, iterations, history, iterate_trapping, solver) = match s.solver {
        NonlinearSolver::Picard { theta } => {
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(Error::invalid(format!("damping must lie in (0, 1], got {theta}")));
            }
            let mut r = upper.clone();
            let mut u = lower.clone();
            let mut history = Vec::new();
            let mut worst: f64 = 0.0;
            let mut done = false;
            for _ in 0..s.max_iter {
                let mode = match env {
                    Envelopes::Supercritical(_) => Coupling::Frozen(&r),
                    Envelopes::Critical(_) => Coupling::DiagonalLive(&r),
                };
                u = p.solve(mode, NonlinearSolver::Auto, &u, 1e-3 * tol, s.max_iter, s.max_periods)?.u;
                worst = worst.max(trapping_violation(&u, &lower, &upper));
                let next = u.zip_map(&r, |x, y| theta * x + (1.0 - theta) * y);
                let change = next.max_abs_diff(&r);
                history.push(change);
                r = next;
                if change < tol {
                    done = true;
                    break;
                }
            }
            if !done {
                return Err(Error::NonConvergence {
                    what: "truncated fixed point",
                    iterations: history.len(),
                    last: history.last().copied().unwrap_or(f64::NAN),
                    history,
                });
            }
            (r, history.len(), history, Some(worst), format!("picard(theta={theta})"))
        }
        strategy => {
            let out = p.solve(Coupling::Full, strategy, &init, tol, s.max_iter, s.max_periods)?;
            let name = match strategy {
                NonlinearSolver::Auto if op.time_independent() => "newton",
                NonlinearSolver::Auto | NonlinearSolver::Relaxation => "relaxation",
                _ => "newton",
            };
            (out.u, out.iterations, out.history, None, name.to_string())
        }
    };

    let residual = p.nonlinear_residual(&u)?;
    let diagnostics = WaveDiagnostics {
        trapping_violation: trapping_violation(&u, &lower, &upper),
        downstream_decay_rate: downstream_slope(&u),
        upstream_floor: upstream_floor(&u),
        pde_residual: residual.sup_norm(),
        a: a_grid,
        iterations,
        k_bound_violation: (u.max() - k_bound).max(0.0),
    };
    Ok(WaveProfile {
        e: problem.fsys.frame.e.clone(),
        c: problem.c(),
        a: a_grid,
        u,
        lower,
        upper,
        diagnostics,
        solver,
        history,
        iterate_trapping,
        gaps: Vec::new(),
    })
}

/// Solves along an increasing schedule of half-lengths until two successive
/// profiles agree to `gap_tol` on `[−window, window]`.
pub fn extend_to_entire(problem: &WaveProblem<'_>, env: &Envelopes, schedule: &[f64], window: f64, gap_tol: f64) -> Result<WaveProfile> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("a schedule must be nonempty and increasing"));
    }
    let tol = problem.settings.tol;
    let mut gaps = Vec::new();
    let mut prev: Option<WaveProfile> = None;
    for &a in schedule {
        let prof = fixed_point_truncated(problem, env, a, tol)?;
        if prof.diagnostics.k_bound_violation > 1e3 * tol.max(1e-12) {
            return Err(Error::Numerical(format!(
                "profile exceeds the logistic bound by {:.3e} at a = {a}",
                prof.diagnostics.k_bound_violation
            )));
        }
        if let Some(p) = &prev {
            let gap = window_gap(&p.u, &prof.u, window);
            gaps.push(gap);
            if gap < gap_tol {
                return Ok(WaveProfile { gaps, ..prof });
            }
        }
        prev = Some(prof);
    }
    Err(Error::NonConvergence {
        what: "continuation in a",
        iterations: gaps.len(),
        last: gaps.last().copied().unwrap_or(f64::NAN),
        history: gaps,
    })
}

/// `max |u − v|` over the lattice points with `|z| ≤ window` shared by both grids.
pub fn window_gap(u: &GridField, v: &GridField, window: f64) -> f64 {
    let (gu, gv) = (u.grid, v.grid);
    let dz = gu.dz();
    let w = (window / dz).floor() as i64;
    let mut gap: f64 = 0.0;
    for m in -w..=w {
        let ju = m + (gu.n_z as i64 - 1) / 2;
        let jv = m + (gv.n_z as i64 - 1) / 2;
        if ju < 0 || jv < 0 || ju >= gu.n_z as i64 || jv >= gv.n_z as i64 {
            continue;
        }
        for i in 0..u.n_comp {
            for k in 0..gu.n_t {
                gap = gap.max((u.get(i, k, ju as usize) - v.get(i, k, jv as usize)).abs());
            }
        }
    }
    gap
}

/// Everything produced by [`construct_wave`].
#[derive(Clone, Debug)]
pub struct WaveOutcome {
    pub persistence: PersistenceReport,
    pub curve: DispersionCurve,
    pub envelopes: Envelopes,
    pub profile: WaveProfile,
    pub verification: Verification,
}

/// Persistence check, minimal speed along `e`, envelopes at `c`, truncated
/// solve (or continuation along `settings.a_schedule`) and verification.
pub fn construct_wave(sys: &KppSystem, e: &[f64], c: f64, settings: &WaveSettings) -> Result<WaveOutcome> {
    let persistence = persistence_check(sys, &settings.eigen)?;
    persistence.require_persistent()?;
    let static_frame = frame_system(sys, e, 0.0)?;
    let curve = minimal_speed(&FrameSpectrum::new(&static_frame, settings.eigen), e, &settings.search)?;
    let problem = WaveProblem::new(sys, e, c, settings.clone())?;
    let envelopes = build_envelopes(&problem, &curve)?;
    let profile = match &settings.a_schedule {
        Some(schedule) => extend_to_entire(&problem, &envelopes, schedule, settings.window, settings.gap_tol)?,
        None => fixed_point_truncated(&problem, &envelopes, settings.a, settings.tol)?,
    };
    let verification = verify_wave(&profile, envelopes.expected_decay(), &settings.verify);
    Ok(WaveOutcome {
        persistence,
        curve,
        envelopes,
        profile,
        verification,
    })
}
