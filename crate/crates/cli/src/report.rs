use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::config::{Job, Task};
use crate::svg;
use crate::tasks::Artifact;

pub struct Report {
    pub report: Value,
    pub index_svg: String,
    /// Wall-clock times, kept apart so the report itself is reproducible.
    pub timings: Value,
}

/// Merges task artifacts into one report. Duplicate artifacts for a task
/// resolve to the latest one, with a warning.
pub fn emit_report(job: &Job, seed: u64, artifacts: &[Artifact]) -> Report {
    let mut warnings = job.warnings.clone();
    let mut latest: BTreeMap<Task, &Artifact> = BTreeMap::new();
    for a in artifacts {
        if let Some(prev) = latest.get(&a.task) {
            warnings.push(format!("duplicate output for task `{}`; keeping the latest", a.task));
            if prev.seq > a.seq {
                continue;
            }
        }
        latest.insert(a.task, a);
    }
    let sections: BTreeMap<&str, &Value> = latest.iter().map(|(t, a)| (t.name(), &a.summary)).collect();
    let c = &job.config;
    let mut report = json!({
        "wavekit_version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "direction": job.direction,
        "plan": job.plan.iter().map(|t| t.name()).collect::<Vec<_>>(),
        "ok": latest.values().all(|a| a.ok),
        "warnings": warnings,
        "parameters": {
            "eigen": c.eigen.settings,
            "search": c.dispersion.search,
            "wave": {
                "a": c.wave.settings.a,
                "dz": c.wave.settings.dz,
                "n_t": c.wave.settings.n_t,
                "tol": c.wave.settings.tol,
                "eigen_tol": c.wave.settings.eigen_tol,
                "ineq_tol": c.wave.settings.ineq_tol,
            },
            "simulate": {
                "half_width": c.simulate.settings.half_width,
                "n_z": c.simulate.settings.n_z,
                "t_final": c.simulate.settings.t_final,
                "dt_max": c.simulate.settings.dt_max,
                "bound_tol": c.simulate.settings.bound_tol,
            },
        },
        "tasks": sections,
    });
    if let Some(x) = speed_check(&latest) {
        report["speed_check"] = x;
    }
    let rows: Vec<(String, bool, String)> = latest.values().map(|a| (a.task.name().to_string(), a.ok, note(a))).collect();
    let timings = json!({
        "tasks": latest.iter().map(|(t, a)| (t.name(), a.seconds)).collect::<BTreeMap<_, _>>(),
        "total": latest.values().map(|a| a.seconds).sum::<f64>(),
    });
    Report {
        report,
        index_svg: svg::index(&rows),
        timings,
    }
}

/// Simulated spreading speed toward `−e` against `c*` along `e`.
fn speed_check(latest: &BTreeMap<Task, &Artifact>) -> Option<Value> {
    let disp = latest.get(&Task::Dispersion).filter(|a| a.ok)?;
    let sim = latest.get(&Task::Simulate)?;
    let c_star = disp.summary["c_star"].as_f64()?;
    let fit = sim.summary["speeds"].as_array()?.iter().find(|s| s.get("left").is_some())?;
    let speed = fit["left"]["speed"].as_f64()?;
    Some(json!({ "c_star": c_star, "theta": fit["theta"], "simulated_speed": speed, "ratio": speed / c_star }))
}

fn note(a: &Artifact) -> String {
    let s = &a.summary;
    if let Some(e) = s.get("error").and_then(Value::as_str) {
        return e.chars().take(70).collect();
    }
    let f = |k: &str| s[k].as_f64().map(|v| format!("{v:.5}")).unwrap_or_default();
    match a.task {
        Task::Validate => "assumptions A1-A5 hold".into(),
        Task::Eigen => format!("lambda_p = {:.5}", s["persistence"]["lambda_p"].as_f64().unwrap_or(f64::NAN)),
        Task::Dispersion => format!("c* = {}, mu* = {}", f("c_star"), f("mu_star")),
        Task::Wave => format!("c = {}, solver {}", f("c"), s["solver"].as_str().unwrap_or("?")),
        Task::Simulate => format!("t_end = {}", f("t_end")),
        Task::Probe => format!("c = {}, floor ratio {}", f("c"), f("ratio")),
    }
}
