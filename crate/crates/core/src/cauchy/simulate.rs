use std::io::Write;

use serde::{Deserialize, Serialize};

use super::envelope::{field_bounds, logistic_envelope};
use crate::coeffs::KppSystem;
use crate::error::{Error, Result};
use crate::pde::{Grid, GridField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    /// The line is `[−X, X]`.
    pub half_width: f64,
    pub n_z: usize,
    pub t_final: f64,
    /// Upper bound on the time step; stability bounds may lower it.
    pub dt_max: f64,
    /// Front positions and observers are recorded at this interval.
    pub record_every: f64,
    pub snapshot_times: Vec<f64>,
    /// Absolute levels tracked by the front positions.
    pub thresholds: Vec<f64>,
    /// Stop when a front passes `guard · X`.
    pub guard: f64,
    /// Tolerated excursion outside `[0, bound]` before failing.
    pub bound_tol: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            half_width: 200.0,
            n_z: 4096,
            t_final: 60.0,
            dt_max: 0.01,
            record_every: 0.1,
            snapshot_times: Vec::new(),
            thresholds: vec![0.1, 0.5],
            guard: 0.9,
            bound_tol: 1e-8,
        }
    }
}

/// The system restricted to the line `x = s e`.
#[derive(Clone, Debug)]
struct LineCoefficients {
    n_comp: usize,
    n_z: usize,
    dz: f64,
    nodes: Vec<Vec<f64>>,
    halves: Vec<Vec<f64>>,
    time_independent: bool,
}

/// State of an IMEX simulation: diffusion and advection implicit, reaction
/// explicit, homogeneous Neumann ends.
pub struct Simulator<'a> {
    sys: &'a KppSystem,
    e: Vec<f64>,
    line: LineCoefficients,
    pub t: f64,
    pub dt: f64,
    /// `[i][j]`, component-major.
    pub u: Vec<f64>,
    pub bound: f64,
    bound_tol: f64,
    /// Cached `(a at half points, q, L, B)` when nothing depends on time.
    frozen: Option<Coefficients>,
}

#[derive(Clone, Debug)]
struct Coefficients {
    /// `[i][h]`, `h = 0..n_z − 1`.
    a: Vec<f64>,
    /// `[i][j]`.
    q: Vec<f64>,
    /// `[j][i][s]`.
    l: Vec<f64>,
    b: Vec<f64>,
}

impl LineCoefficients {
    fn new(sys: &KppSystem, e: &[f64], half_width: f64, n_z: usize) -> Result<Self> {
        let n = sys.dim();
        if e.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: e.len() });
        }
        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("direction must be a unit vector"));
        }
        if n > 1 && !sys.is_space_homogeneous() {
            return Err(Error::Unsupported("simulation of space-dependent coefficients needs n = 1".into()));
        }
        if n_z < 16 || !(half_width > 0.0) {
            return Err(Error::invalid("simulation needs n_z ≥ 16 and a positive half width"));
        }
        let dz = 2.0 * half_width / (n_z - 1) as f64;
        let at = |s: f64| e.iter().map(|v| v * s).collect::<Vec<f64>>();
        let nodes = (0..n_z).map(|j| at(-half_width + j as f64 * dz)).collect();
        let halves = (0..n_z - 1).map(|h| at(-half_width + (h as f64 + 0.5) * dz)).collect();
        Ok(Self {
            n_comp: sys.n_comp(),
            n_z,
            dz,
            nodes,
            halves,
            time_independent: sys.is_time_independent(),
        })
    }

    fn s(&self, j: usize) -> f64 {
        -0.5 * self.dz * (self.n_z - 1) as f64 + j as f64 * self.dz
    }

    fn evaluate(&self, sys: &KppSystem, e: &[f64], t: f64) -> Coefficients {
        let (nc, nz) = (self.n_comp, self.n_z);
        let n = e.len();
        let mut a = vec![0.0; nc * (nz - 1)];
        let mut q = vec![0.0; nc * nz];
        let mut l = vec![0.0; nz * nc * nc];
        let mut b = vec![0.0; nz * nc * nc];
        for i in 0..nc {
            let d = sys.diffusion(i);
            for (h, x) in self.halves.iter().enumerate() {
                let mut v = 0.0;
                for r in 0..n {
                    for c in 0..n {
                        if e[r] != 0.0 && e[c] != 0.0 {
                            v += e[r] * e[c] * d.get(r, c).value(t, x);
                        }
                    }
                }
                a[i * (nz - 1) + h] = v;
            }
            for (j, x) in self.nodes.iter().enumerate() {
                q[i * nz + j] = (0..n)
                    .filter(|&r| e[r] != 0.0)
                    .map(|r| e[r] * sys.advection(i, r).value(t, x))
                    .sum();
            }
        }
        for (j, x) in self.nodes.iter().enumerate() {
            for i in 0..nc {
                for s in 0..nc {
                    l[(j * nc + i) * nc + s] = sys.coupling().get(i, s).value(t, x);
                    b[(j * nc + i) * nc + s] = sys.competition().get(i, s).value(t, x);
                }
            }
        }
        Coefficients { a, q, l, b }
    }
}

impl<'a> Simulator<'a> {
    /// Starts from `u0` (`[i][j]` on `n_z` nodes of `[−X, X]` along `e`).
    pub fn new(sys: &'a KppSystem, e: &[f64], u0: Vec<f64>, s: &SimulationSettings) -> Result<Self> {
        let line = LineCoefficients::new(sys, e, s.half_width, s.n_z)?;
        let nc = sys.n_comp();
        if u0.len() != nc * s.n_z {
            return Err(Error::DimensionMismatch {
                expected: nc * s.n_z,
                got: u0.len(),
            });
        }
        if u0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("initial data must be finite and nonnegative"));
        }
        let env = logistic_envelope(sys);
        let init_max = u0.iter().copied().fold(0.0, f64::max);
        let bound = env.k.max(init_max);
        // Explicit reaction keeps u ≥ 0 while dt (|l_ii| + Σ_s b_is M) ≤ 1/2.
        let mut rate: f64 = 0.0;
        for i in 0..nc {
            let (lo, hi) = field_bounds(sys.coupling().get(i, i));
            let bsum: f64 = (0..nc).map(|s| field_bounds(sys.competition().get(i, s)).1.max(0.0)).sum();
            rate = rate.max(lo.abs().max(hi.abs()) + bsum * bound);
        }
        let mut dt = s.dt_max.min(0.1 / (env.r * nc as f64 * env.k)).min(0.5 / rate.max(1e-300));
        if !sys.is_time_independent() {
            dt = dt.min(sys.temporal_period() / 32.0);
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("could not determine a positive time step"));
        }
        let frozen = line.time_independent.then(|| line.evaluate(sys, e, 0.0));
        let sim = Self {
            sys,
            e: e.to_vec(),
            line,
            t: 0.0,
            dt,
            u: u0,
            bound,
            bound_tol: s.bound_tol,
            frozen,
        };
        sim.check_peclet(sim.frozen.clone().unwrap_or_else(|| sim.line.evaluate(sys, e, 0.0)))?;
        Ok(sim)
    }

    fn check_peclet(&self, c: Coefficients) -> Result<()> {
        let (nc, nz, h) = (self.line.n_comp, self.line.n_z, self.line.dz);
        for i in 0..nc {
            for j in 1..nz - 1 {
                let a = c.a[i * (nz - 1) + j - 1].min(c.a[i * (nz - 1) + j]);
                if c.q[i * nz + j].abs() * h > 2.0 * a {
                    return Err(Error::invalid(format!(
                        "grid too coarse: cell Péclet number above 1 at s = {:.3}",
                        self.line.s(j)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_comp(&self) -> usize {
        self.line.n_comp
    }

    pub fn n_z(&self) -> usize {
        self.line.n_z
    }

    pub fn dz(&self) -> f64 {
        self.line.dz
    }

    /// Line coordinate of node `j`.
    pub fn s(&self, j: usize) -> f64 {
        self.line.s(j)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.u[i * self.line.n_z + j]
    }

    /// Linear interpolation of component `i` at line coordinate `s`.
    pub fn value_at(&self, i: usize, s: f64) -> f64 {
        let nz = self.line.n_z;
        let x = (s - self.line.s(0)) / self.line.dz;
        let j = (x.floor().max(0.0) as usize).min(nz - 2);
        let w = (x - j as f64).clamp(0.0, 1.0);
        (1.0 - w) * self.value(i, j) + w * self.value(i, j + 1)
    }

    /// One step of length `dt`.
    pub fn step(&mut self) -> Result<()> {
        let (nc, nz) = (self.line.n_comp, self.line.n_z);
        let explicit = match &self.frozen {
            Some(c) => c.clone(),
            None => self.line.evaluate(self.sys, &self.e, self.t),
        };
        let mut rhs = self.u.clone();
        for j in 0..nz {
            for i in 0..nc {
                let mut lu = 0.0;
                let mut bu = 0.0;
                for s in 0..nc {
                    let v = self.u[s * nz + j];
                    lu += explicit.l[(j * nc + i) * nc + s] * v;
                    bu += explicit.b[(j * nc + i) * nc + s] * v;
                }
                rhs[i * nz + j] += self.dt * (lu - bu * self.u[i * nz + j]);
            }
        }
        let t_next = self.t + self.dt;
        let implicit = match &self.frozen {
            Some(c) => c.clone(),
            None => self.line.evaluate(self.sys, &self.e, t_next),
        };
        let h2 = self.line.dz * self.line.dz;
        let mut lower = vec![0.0; nz];
        let mut diag = vec![0.0; nz];
        let mut upper = vec![0.0; nz];
        for i in 0..nc {
            for j in 0..nz {
                let aw = if j > 0 { implicit.a[i * (nz - 1) + j - 1] } else { 0.0 };
                let ae = if j + 1 < nz { implicit.a[i * (nz - 1) + j] } else { 0.0 };
                // Centered advection; zero at the ends where u_s = 0.
                let adv = if j > 0 && j + 1 < nz {
                    implicit.q[i * nz + j] / (2.0 * self.line.dz)
                } else {
                    0.0
                };
                lower[j] = -self.dt * (aw / h2 + adv);
                upper[j] = -self.dt * (ae / h2 - adv);
                diag[j] = 1.0 + self.dt * (aw + ae) / h2;
            }
            thomas(&lower, &diag, &upper, &mut rhs[i * nz..(i + 1) * nz]);
        }
        self.u = rhs;
        self.t = t_next;
        let (lo, hi) = self
            .u
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        if lo < -self.bound_tol || hi > self.bound + self.bound_tol || !hi.is_finite() {
            let value = if lo < -self.bound_tol { lo } else { hi };
            return Err(Error::BoundViolation {
                t: self.t,
                value,
                bound: self.bound,
            });
        }
        Ok(())
    }

    /// Leftmost and rightmost line coordinates where the largest component
    /// crosses `theta`, linearly interpolated; `None` when nothing exceeds it.
    pub fn front(&self, theta: f64) -> Option<(f64, f64)> {
        let nz = self.line.n_z;
        let m = |j: usize| (0..self.line.n_comp).map(|i| self.value(i, j)).fold(f64::NEG_INFINITY, f64::max);
        let first = (0..nz).find(|&j| m(j) >= theta)?;
        let last = (0..nz).rev().find(|&j| m(j) >= theta)?;
        let cross = |inside: usize, outside: usize| {
            let (vi, vo) = (m(inside), m(outside));
            let w = (vi - theta) / (vi - vo);
            self.s(inside) + w * (self.s(outside) - self.s(inside))
        };
        let left = if first > 0 { cross(first, first - 1) } else { self.s(0) };
        let right = if last + 1 < nz { cross(last, last + 1) } else { self.s(nz - 1) };
        Some((left, right))
    }
}

/// Solves a tridiagonal system in place (Thomas algorithm; the matrices here
/// are diagonally dominant).
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], x: &mut [f64]) {
    let n = x.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    c[0] = upper[0] / beta;
    x[0] /= beta;
    for j in 1..n {
        beta = diag[j] - lower[j] * c[j - 1];
        c[j] = upper[j] / beta;
        x[j] = (x[j] - lower[j] * x[j - 1]) / beta;
    }
    for j in (0..n - 1).rev() {
        x[j] -= c[j] * x[j + 1];
    }
}

/// Level-set positions of one threshold over time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontTrack {
    pub theta: f64,
    pub t: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SimulationRun {
    pub e: Vec<f64>,
    pub half_width: f64,
    pub n_z: usize,
    pub dz: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Upper bound enforced on the solution, `max(K, max u₀)`.
    pub bound: f64,
    pub fronts: Vec<FrontTrack>,
    /// Time at which a front passed the guard, if it did.
    pub exhausted_at: Option<f64>,
    pub snapshots: Vec<(f64, GridField)>,
    pub final_state: GridField,
}

impl SimulationRun {
    pub fn write_fronts_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t")?;
        for f in &self.fronts {
            write!(w, ",x_left_{0},x_right_{0}", f.theta)?;
        }
        writeln!(w)?;
        let n = self.fronts.first().map_or(0, |f| f.t.len());
        for k in 0..n {
            write!(w, "{:e}", self.fronts[0].t[k])?;
            for f in &self.fronts {
                write!(w, ",{:e},{:e}", f.left[k], f.right[k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn line_grid(half_width: f64, n_z: usize) -> Result<Grid> {
    Grid::interval(1, n_z, 1.0, half_width)
}

/// Snapshot of the simulator state as a one-slice interval field.
pub fn snapshot(sim: &Simulator<'_>, half_width: f64) -> Result<GridField> {
    let grid = line_grid(half_width, sim.n_z())?;
    Ok(GridField {
        grid,
        n_comp: sim.n_comp(),
        data: sim.u.clone(),
    })
}

/// Runs the Cauchy problem from `u0` (a one-slice field on `[−X, X]`) along
/// direction `e`, tracking fronts until `t_final` or until a front passes
/// `guard · X`.
pub fn simulate(sys: &KppSystem, e: &[f64], u0: &GridField, s: &SimulationSettings) -> Result<SimulationRun> {
    if u0.grid.n_z != s.n_z || u0.grid.n_t != 1 {
        return Err(Error::invalid("initial data must be a single slice on the simulation grid"));
    }
    let mut sim = Simulator::new(sys, e, u0.data.clone(), s)?;
    let mut fronts: Vec<FrontTrack> = s
        .thresholds
        .iter()
        .map(|&theta| FrontTrack {
            theta,
            t: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
        })
        .collect();
    let mut snapshots = Vec::new();
    let mut pending: Vec<f64> = s.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    pending.reverse();
    let guard = s.guard * s.half_width;
    let every = (s.record_every / sim.dt).round().max(1.0) as usize;
    let steps = (s.t_final / sim.dt).ceil() as usize;
    let mut exhausted_at = None;
    // A side is exhausted when its front crosses the guard from inside.
    // Level sets that appear beyond it (e.g. near-uniform data) are not fronts.
    let record = |sim: &Simulator<'_>, fronts: &mut Vec<FrontTrack>| -> bool {
        let mut out = false;
        for f in fronts.iter_mut() {
            let (l, r) = sim.front(f.theta).unwrap_or((f64::NAN, f64::NAN));
            let (l0, r0) = (f.left.last().copied(), f.right.last().copied());
            let armed = |p0: Option<f64>| p0.is_some_and(|p| p.abs() < guard);
            out |= (l <= -guard && armed(l0)) || (r >= guard && armed(r0));
            f.t.push(sim.t);
            f.left.push(l);
            f.right.push(r);
        }
        out
    };
    record(&sim, &mut fronts);
    while pending.last().is_some_and(|&t| t <= 0.0) {
        snapshots.push((pending.pop().unwrap_or(0.0), snapshot(&sim, s.half_width)?));
    }
    for n in 1..=steps {
        sim.step()?;
        while pending.last().is_some_and(|&t| t <= sim.t + 0.5 * sim.dt) {
            snapshots.push((pending.pop().unwrap_or(sim.t), snapshot(&sim, s.half_width)?));
        }
        if (n % every == 0 || n == steps) && record(&sim, &mut fronts) {
            exhausted_at = Some(sim.t);
            break;
        }
    }
    Ok(SimulationRun {
        e: e.to_vec(),
        half_width: s.half_width,
        n_z: s.n_z,
        dz: sim.dz(),
        dt: sim.dt,
        t_end: sim.t,
        bound: sim.bound,
        fronts,
        exhausted_at,
        snapshots,
        final_state: snapshot(&sim, s.half_width)?,
    })
}

/// `height` on `|s| ≤ width`, zero elsewhere.
pub fn compact_bump(n_comp: usize, s: &SimulationSettings, width: f64, height: f64) -> Result<GridField> {
    let grid = line_grid(s.half_width, s.n_z)?;
    Ok(GridField::from_fn(grid, n_comp, |_, _, j| {
        if grid.z(j).abs() <= width {
            height
        } else {
            0.0
        }
    }))
}

/// `height · (1 + tanh(s − s0)) / 2`: occupied for `s > s0`, empty below.
pub fn front_step(n_comp: usize, s: &SimulationSettings, s0: f64, height: f64) -> Result<GridField> {
    let grid = line_grid(s.half_width, s.n_z)?;
    Ok(GridField::from_fn(grid, n_comp, |_, _, j| {
        0.5 * height * (1.0 + (grid.z(j) - s0).tanh())
    }))
}
