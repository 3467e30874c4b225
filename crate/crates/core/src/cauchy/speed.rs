use serde::{Deserialize, Serialize};

use super::simulate::{front_step, SimulationRun, SimulationSettings, Simulator};
use crate::coeffs::KppSystem;
use crate::error::{Error, Result};
use crate::waves::linear_fit;

/// Least-squares line through late front positions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub speed: f64,
    pub r2: f64,
    pub samples: usize,
}

/// Spreading speeds of one level set, both positive for an invading front.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadingSpeed {
    pub theta: f64,
    /// Speed toward `−e`.
    pub left: Fit,
    /// Speed toward `+e`.
    pub right: Fit,
}

/// Minimum `R²` accepted for a late-time front fit.
pub const MIN_R2: f64 = 0.99;

fn fit(t: &[f64], x: &[f64], sign: f64) -> Result<Fit> {
    let (t, x): (Vec<f64>, Vec<f64>) = t.iter().zip(x).filter(|(_, x)| x.is_finite()).map(|(t, x)| (*t, sign * x)).unzip();
    if t.len() < 3 {
        return Err(Error::Numerical("too few front positions for a speed fit".into()));
    }
    let (speed, _, r2) = linear_fit(&t, &x);
    if r2 < MIN_R2 {
        return Err(Error::Numerical(format!(
            "front position is not linear in time over the late window (R² = {r2:.4})"
        )));
    }
    Ok(Fit {
        speed,
        r2,
        samples: t.len(),
    })
}

/// Slope of the `theta` level set over the second half of the run.
pub fn measure_spreading_speed(run: &SimulationRun, theta: f64) -> Result<SpreadingSpeed> {
    if let Some(t) = run.exhausted_at {
        return Err(Error::DomainExhausted { t });
    }
    let track = run
        .fronts
        .iter()
        .find(|f| (f.theta - theta).abs() <= 1e-12 * theta.abs().max(1.0))
        .ok_or_else(|| Error::invalid(format!("level {theta} was not tracked")))?;
    let start = track.t.iter().position(|&t| t >= 0.5 * run.t_end).unwrap_or(0);
    let t = &track.t[start..];
    Ok(SpreadingSpeed {
        theta,
        left: fit(t, &track.left[start..], -1.0)?,
        right: fit(t, &track.right[start..], 1.0)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeStatus {
    /// The observer kept a positive floor: the front outruns speed `(c + c*)/2`,
    /// which no wave at speed `c` allows.
    NoWaveAtSpeed,
    /// The floor was not established before the run ended or the domain ran out.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub c: f64,
    pub c_star: f64,
    pub observer_speed: f64,
    /// Minimum over components and the late window of `u` at the observer.
    pub floor: f64,
    /// Minimum over components and the late window of `u` deep upstream.
    pub upstream_min: f64,
    pub ratio: f64,
    pub late_window: (f64, f64),
    pub exhausted_at: Option<f64>,
    pub status: ProbeStatus,
    /// `(t, min component at the observer)`.
    pub trace: Vec<(f64, f64)>,
}

/// Required `floor / upstream_min` for a conclusive probe.
pub const PROBE_RATIO: f64 = 0.5;

/// Simulates from a step occupied on the `+e` side and watches the point
/// moving toward `−e` at `(c + c*)/2`. A front spreading at `c*` leaves the
/// observer in the invaded state, contradicting a wave of speed `c < c*`.
pub fn nonexistence_probe(sys: &KppSystem, e: &[f64], c: f64, c_star: f64, tol: f64, s: &SimulationSettings) -> Result<ProbeReport> {
    if !(c < c_star - tol) {
        return Err(Error::invalid(format!("probe needs c < c* − tol; got c = {c}, c* = {c_star}")));
    }
    let x = s.half_width;
    let s0 = 0.8 * x;
    let u0 = front_step(sys.n_comp(), s, s0, 1.0)?;
    let mut sim = Simulator::new(sys, e, u0.data, s)?;
    let v = 0.5 * (c + c_star);
    let upstream = 0.85 * x;
    let guard = s.guard * x;
    let every = (s.record_every / sim.dt).round().max(1.0) as usize;
    let steps = (s.t_final / sim.dt).ceil() as usize;
    let theta = s.thresholds.first().copied().unwrap_or(0.1);
    let mut trace = Vec::new();
    let mut upstream_trace = Vec::new();
    let mut exhausted_at = None;
    let min_at = |sim: &Simulator<'_>, p: f64| (0..sim.n_comp()).map(|i| sim.value_at(i, p)).fold(f64::INFINITY, f64::min);
    for n in 1..=steps {
        sim.step()?;
        if n % every != 0 && n != steps {
            continue;
        }
        let obs = s0 - v * sim.t;
        if obs <= -guard || sim.front(theta).is_some_and(|(l, _)| l <= -guard) {
            exhausted_at = Some(sim.t);
            break;
        }
        trace.push((sim.t, min_at(&sim, obs)));
        upstream_trace.push(min_at(&sim, upstream));
    }
    let t_end = trace.last().map_or(0.0, |p| p.0);
    let late = (2.0 * t_end / 3.0, t_end);
    let late_idx: Vec<usize> = (0..trace.len()).filter(|&k| trace[k].0 >= late.0).collect();
    let floor = late_idx.iter().map(|&k| trace[k].1).fold(f64::INFINITY, f64::min);
    let upstream_min = late_idx.iter().map(|&k| upstream_trace[k]).fold(f64::INFINITY, f64::min);
    let ratio = floor / upstream_min;
    // A run cut short before half its planned length cannot separate the
    // observer from the initial transient.
    let long_enough = t_end >= 0.5 * s.t_final;
    let status = if long_enough && !late_idx.is_empty() && upstream_min > 0.0 && ratio >= PROBE_RATIO {
        ProbeStatus::NoWaveAtSpeed
    } else {
        ProbeStatus::Inconclusive
    };
    Ok(ProbeReport {
        c,
        c_star,
        observer_speed: v,
        floor,
        upstream_min,
        ratio,
        late_window: late,
        exhausted_at,
        status,
        trace,
    })
}
