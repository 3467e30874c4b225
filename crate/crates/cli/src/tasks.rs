use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};
use wavekit::cauchy::{compact_bump, front_step, logistic_envelope, measure_spreading_speed, nonexistence_probe, simulate, SpreadingSpeed};
use wavekit::coeffs::validate_assumptions;
use wavekit::dispersion::{frame_system, minimal_speed, persistence_check, speed_roots, DispersionCurve, PersistenceReport};
use wavekit::eigen::{dlambda_dmu, FrameSpectrum, Spectrum};
use wavekit::waves::{build_envelopes, extend_to_entire, fixed_point_truncated, verify_wave, WaveProblem};
use wavekit::{Error, Result};

use crate::config::{Initial, Job, Task};
use crate::output::Writer;
use crate::svg::{line_plot, Series};

/// What a task left behind.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub task: Task,
    /// Completion order within the run; later entries win on duplicates.
    pub seq: usize,
    pub ok: bool,
    pub summary: Value,
    pub seconds: f64,
}

/// Values later tasks read from earlier ones.
#[derive(Default)]
struct Shared {
    persistence: Option<PersistenceReport>,
    curve: Option<DispersionCurve>,
}

struct Runner<'a> {
    job: &'a Job,
    out: Writer<'a>,
}

/// Runs the plan. Independent tasks run concurrently; a failed task skips
/// everything that depends on it.
pub fn run_plan(job: &Job, out: &Path) -> Vec<Artifact> {
    let runner = Runner {
        job,
        out: Writer::new(out),
    };
    let has = |t: Task| job.plan.contains(&t);
    let (mut chain, sim) = rayon::join(
        || runner.chain(),
        || has(Task::Simulate).then(|| runner.timed(Task::Simulate, |r| r.simulate())),
    );
    chain.extend(sim);
    for (seq, a) in chain.iter_mut().enumerate() {
        a.seq = seq;
    }
    chain
}

impl Runner<'_> {
    fn timed(&self, task: Task, f: impl FnOnce(&Self) -> Result<Value>) -> Artifact {
        log::info!("task {task}: start");
        let start = Instant::now();
        let result = f(self);
        let seconds = start.elapsed().as_secs_f64();
        let (ok, summary) = match result {
            Ok(v) => (v.get("error").is_none(), v),
            Err(e) => (false, json!({ "error": e.to_string() })),
        };
        if let Some(e) = summary.get("error") {
            log::error!("task {task}: {e}");
        }
        let summary = self.finish(task, ok, summary);
        log::info!("task {task}: {} in {seconds:.2}s", if ok { "done" } else { "failed" });
        Artifact {
            task,
            seq: 0,
            ok,
            summary,
            seconds,
        }
    }

    fn finish(&self, task: Task, ok: bool, mut summary: Value) -> Value {
        summary["task"] = json!(task.name());
        summary["status"] = json!(if ok { "ok" } else { "failed" });
        if let Err(e) = self.out.json(&format!("{task}.json"), &summary) {
            log::error!("writing {task}.json: {e}");
        }
        summary
    }

    fn skipped(&self, task: Task, because: &Artifact) -> Artifact {
        let reason = because.summary.get("error").and_then(Value::as_str).unwrap_or("failed");
        let summary = json!({ "error": format!("prerequisite `{}` failed: {reason}", because.task) });
        let mut summary = self.finish(task, false, summary);
        summary["status"] = json!("skipped");
        Artifact {
            task,
            seq: 0,
            ok: false,
            summary,
            seconds: 0.0,
        }
    }

    /// validate → eigen → dispersion → {wave, probe}.
    fn chain(&self) -> Vec<Artifact> {
        let plan = &self.job.plan;
        let mut shared = Shared::default();
        let mut done: Vec<Artifact> = Vec::new();
        let blocker = |done: &[Artifact], t: Task| -> Option<Artifact> {
            t.requires()
                .iter()
                .find_map(|r| done.iter().find(|a| a.task == *r && !a.ok).cloned())
        };
        for t in [Task::Validate, Task::Eigen, Task::Dispersion] {
            if !plan.contains(&t) {
                continue;
            }
            let a = match blocker(&done, t) {
                Some(b) => self.skipped(t, &b),
                None => match t {
                    Task::Validate => self.timed(t, |r| r.validate()),
                    Task::Eigen => self.timed(t, |r| r.eigen(&mut shared)),
                    _ => self.timed(t, |r| r.dispersion(&mut shared)),
                },
            };
            done.push(a);
        }
        let last = [Task::Wave, Task::Probe]
            .into_iter()
            .filter(|t| plan.contains(t))
            .collect::<Vec<_>>();
        let shared = &shared;
        let tail: Vec<Artifact> = last
            .par_iter()
            .map(|&t| match blocker(&done, t) {
                Some(b) => self.skipped(t, &b),
                None if t == Task::Wave => self.timed(t, |r| r.wave(shared)),
                None => self.timed(t, |r| r.probe(shared)),
            })
            .collect();
        done.extend(tail);
        done
    }

    fn validate(&self) -> Result<Value> {
        let report = validate_assumptions(&self.job.system, self.job.config.validate.sampling_factor)?;
        report.require()?;
        let env = logistic_envelope(&self.job.system);
        Ok(json!({ "assumptions": report, "logistic_envelope": env }))
    }

    fn eigen(&self, shared: &mut Shared) -> Result<Value> {
        let job = self.job;
        let settings = job.config.eigen.settings;
        let persistence = persistence_check(&job.system, &settings)?;
        shared.persistence = Some(persistence);
        let fs = frame_system(&job.system, &job.direction, 0.0)?;
        let spec = FrameSpectrum::new(&fs, settings);
        let points: Vec<Value> = job
            .config
            .eigen
            .mu
            .par_iter()
            .map(|&mu| {
                let point = spec.eigenpair(mu).and_then(|e| Ok((e.lambda, e.kappa, dlambda_dmu(&spec, mu)?)));
                match point {
                    Ok((lambda, kappa, d)) => json!({ "mu": mu, "lambda": lambda, "kappa": kappa, "dlambda_dmu": d }),
                    Err(e) => json!({ "mu": mu, "error": e.to_string() }),
                }
            })
            .collect();
        let mut csv = String::from("mu,lambda,dlambda_dmu,kappa\n");
        for p in &points {
            if p.get("error").is_none() {
                csv += &format!(
                    "{:e},{:e},{:e},{:e}\n",
                    num(&p["mu"]),
                    num(&p["lambda"]),
                    num(&p["dlambda_dmu"]),
                    num(&p["kappa"])
                );
            }
        }
        self.out.text("eigen.csv", &csv)?;
        let failed = points
            .iter()
            .find(|p| p.get("error").is_some())
            .map(|p| format!("eigenpair at mu = {} failed", p["mu"]));
        let mut summary = json!({ "direction": job.direction, "persistence": persistence, "settings": settings, "points": points });
        if let Some(e) = failed {
            summary["error"] = json!(e);
        }
        Ok(summary)
    }

    fn dispersion(&self, shared: &mut Shared) -> Result<Value> {
        let job = self.job;
        let settings = job.config.eigen.settings;
        let persistence = match shared.persistence {
            Some(p) => p,
            None => persistence_check(&job.system, &settings)?,
        };
        persistence.require_persistent()?;
        let fs = frame_system(&job.system, &job.direction, 0.0)?;
        let spec = FrameSpectrum::new(&fs, settings);
        let search = job.config.dispersion.search;
        let curve = minimal_speed(&spec, &job.direction, &search)?;
        // Dense samples on (0, 3μ*] for the plot and CSV.
        let mus: Vec<f64> = (1..=60).map(|k| 3.0 * curve.mu_star * k as f64 / 60.0).collect();
        let lambdas = mus.par_iter().map(|&m| spec.lambda(m)).collect::<Result<Vec<_>>>()?;
        let mut csv = String::from("mu,lambda,minus_lambda_over_mu\n");
        for (m, l) in mus.iter().zip(&lambdas) {
            csv += &format!("{m:e},{l:e},{:e}\n", -l / m);
        }
        self.out.text("dispersion.csv", &csv)?;
        let pts: Vec<(f64, f64)> = mus.iter().copied().zip(lambdas.iter().copied()).collect();
        let tangent = vec![(0.0, 0.0), (3.0 * curve.mu_star, -3.0 * curve.c_star * curve.mu_star)];
        let svg = line_plot(
            &format!("dispersion relation, c* = {:.4}", curve.c_star),
            "mu",
            "lambda",
            &[Series::new("lambda(mu)", pts), Series::new("-c* mu", tangent).dashed()],
        );
        self.out.text("dispersion.svg", &svg)?;
        let roots = job
            .config
            .dispersion
            .c
            .map(|c| speed_roots(&spec, &curve, c, &search).map_err(|e| e.to_string()));
        let mut summary = json!({
            "direction": job.direction,
            "c_star": curve.c_star,
            "mu_star": curve.mu_star,
            "lambda_star": curve.lambda_star,
            "bracket": curve.bracket,
            "persistence": persistence,
            "search": search,
            "samples": curve.samples,
        });
        match roots {
            Some(Ok(r)) => summary["roots"] = json!(r),
            Some(Err(e)) => summary["roots_error"] = json!(e),
            None => {}
        }
        shared.curve = Some(curve);
        Ok(summary)
    }

    fn wave(&self, shared: &Shared) -> Result<Value> {
        let job = self.job;
        let curve = shared
            .curve
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("no dispersion curve".into()))?;
        let c = job.config.wave.c.ok_or_else(|| Error::InvalidInput("wave.c is required".into()))?;
        let settings = job.config.wave.settings.clone();
        let problem = WaveProblem::new(&job.system, &job.direction, c, settings.clone())?;
        let env = build_envelopes(&problem, curve)?;
        let profile = match &settings.a_schedule {
            Some(schedule) => extend_to_entire(&problem, &env, schedule, settings.window, settings.gap_tol)?,
            None => fixed_point_truncated(&problem, &env, settings.a, settings.tol)?,
        };
        let verification = verify_wave(&profile, env.expected_decay(), &settings.verify);
        let mut csv = Vec::new();
        profile.write_csv(&mut csv)?;
        self.out.bytes("wave.csv", &csv)?;
        let u = &profile.u;
        let n_t = u.grid.n_t;
        let mut series = Vec::new();
        for (name, frac) in [("t=0", 0.0), ("t=T/4", 0.25), ("t=T/2", 0.5), ("t=3T/4", 0.75)] {
            let k = ((frac * n_t as f64).round() as usize) % n_t;
            for i in 0..u.n_comp {
                let pts = (0..u.grid.n_z).map(|j| (u.grid.z(j), u.get(i, k, j))).collect();
                let label = if u.n_comp > 1 { format!("u{i}, {name}") } else { name.to_string() };
                series.push(Series::new(label, pts));
            }
        }
        let svg = line_plot(&format!("wave profile, c = {c}"), "z", "u", &series);
        self.out.text("wave.svg", &svg)?;
        let mut summary = json!({
            "direction": job.direction,
            "c": c,
            "c_star": curve.c_star,
            "a": profile.a,
            "grid": { "n_t": n_t, "n_z": u.grid.n_z, "dz": u.grid.dz(), "period": u.grid.period },
            "solver": profile.solver,
            "envelopes": env.summary_json(),
            "diagnostics": profile.diagnostics_json(),
            "iterate_trapping": profile.iterate_trapping,
            "gaps": profile.gaps,
            "verification": verification,
            "settings": settings,
        });
        if !verification.passed() {
            let v = &verification;
            let failed: Vec<&str> = [
                ("downstream decay to zero", v.downstream_ok),
                ("decay rate", v.decay_ok),
                ("upstream floor", v.upstream_ok),
                ("PDE residual", v.residual_ok),
            ]
            .into_iter()
            .filter_map(|(name, ok)| (!ok).then_some(name))
            .collect();
            summary["error"] = json!(format!("wave verification failed: {}", failed.join(", ")));
        }
        Ok(summary)
    }

    fn simulate(&self) -> Result<Value> {
        let job = self.job;
        let p = &job.config.simulate;
        let s = &p.settings;
        let nc = job.system.n_comp();
        let u0 = match p.initial {
            Initial::Bump { width, height } => compact_bump(nc, s, width, height)?,
            Initial::Step { s0, height } => front_step(nc, s, s0, height)?,
        };
        let run = simulate(&job.system, &job.direction, &u0, s)?;
        let mut csv = Vec::new();
        run.write_fronts_csv(&mut csv)?;
        self.out.bytes("fronts.csv", &csv)?;
        let mut snaps = Vec::new();
        for (k, (t, f)) in run.snapshots.iter().enumerate() {
            let name = format!("snapshot_{k}.csv");
            let mut csv = Vec::new();
            f.write_csv(&mut csv)?;
            self.out.bytes(&name, &csv)?;
            snaps.push(json!({ "t": t, "file": name }));
        }
        let mut csv = Vec::new();
        run.final_state.write_csv(&mut csv)?;
        self.out.bytes("final_state.csv", &csv)?;
        let mut series = Vec::new();
        for f in &run.fronts {
            series.push(Series::new(
                format!("left, {}", f.theta),
                f.t.iter().copied().zip(f.left.iter().copied()).collect(),
            ));
            series.push(Series::new(
                format!("right, {}", f.theta),
                f.t.iter().copied().zip(f.right.iter().copied()).collect(),
            ));
        }
        self.out
            .text("simulate.svg", &line_plot("front trajectory", "t", "position", &series))?;
        let speeds: Vec<Result<SpreadingSpeed>> = run.fronts.iter().map(|f| measure_spreading_speed(&run, f.theta)).collect();
        let mut summary = json!({
            "direction": job.direction,
            "half_width": run.half_width,
            "n_z": run.n_z,
            "dz": run.dz,
            "dt": run.dt,
            "t_end": run.t_end,
            "bound": run.bound,
            "exhausted_at": run.exhausted_at,
            "snapshots": snaps,
            "speeds": speeds.iter().map(|r| match r {
                Ok(v) => json!(v),
                Err(e) => json!({ "error": e.to_string() }),
            }).collect::<Vec<_>>(),
            "settings": s,
        });
        if let Some(Err(e)) = speeds.iter().find(|r| r.is_err()) {
            summary["error"] = json!(format!("speed measurement failed: {e}"));
        }
        Ok(summary)
    }

    fn probe(&self, shared: &Shared) -> Result<Value> {
        let job = self.job;
        let p = &job.config.probe;
        let curve = shared
            .curve
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("no dispersion curve".into()))?;
        let c = p.c.unwrap_or(0.5 * curve.c_star);
        let report = nonexistence_probe(&job.system, &job.direction, c, curve.c_star, p.tol, &p.settings)?;
        let mut csv = String::from("t,observer_min\n");
        for (t, v) in &report.trace {
            csv += &format!("{t:e},{v:e}\n");
        }
        self.out.text("probe.csv", &csv)?;
        Ok(json!({
            "direction": job.direction,
            "c": report.c,
            "c_star": report.c_star,
            "observer_speed": report.observer_speed,
            "floor": report.floor,
            "upstream_min": report.upstream_min,
            "ratio": report.ratio,
            "late_window": report.late_window,
            "exhausted_at": report.exhausted_at,
            "outcome": report.status,
            "settings": p.settings,
        }))
    }
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}
