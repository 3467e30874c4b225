use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wavekit::cauchy::SimulationSettings;
use wavekit::coeffs::{KppSystem, SystemJson};
use wavekit::dispersion::SearchSettings;
use wavekit::eigen::EigenSettings;
use wavekit::waves::WaveSettings;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Validate,
    Eigen,
    Dispersion,
    Wave,
    Simulate,
    Probe,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::Validate,
        Task::Eigen,
        Task::Dispersion,
        Task::Wave,
        Task::Simulate,
        Task::Probe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Validate => "validate",
            Task::Eigen => "eigen",
            Task::Dispersion => "dispersion",
            Task::Wave => "wave",
            Task::Simulate => "simulate",
            Task::Probe => "probe",
        }
    }

    /// Direct prerequisites.
    pub fn requires(self) -> &'static [Task] {
        match self {
            Task::Validate | Task::Simulate => &[],
            Task::Eigen => &[Task::Validate],
            Task::Dispersion => &[Task::Eigen],
            Task::Wave | Task::Probe => &[Task::Dispersion],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub system: SystemJson,
    #[serde(default)]
    pub tasks: Vec<Task>,
    /// Unit propagation direction; the first axis when absent.
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub validate: ValidateParams,
    #[serde(default)]
    pub eigen: EigenParams,
    #[serde(default)]
    pub dispersion: DispersionParams,
    #[serde(default)]
    pub wave: WaveParams,
    #[serde(default)]
    pub simulate: SimulateParams,
    #[serde(default)]
    pub probe: ProbeParams,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateParams {
    pub sampling_factor: usize,
}

impl Default for ValidateParams {
    fn default() -> Self {
        Self { sampling_factor: 8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenParams {
    pub mu: Vec<f64>,
    pub settings: EigenSettings,
}

impl Default for EigenParams {
    fn default() -> Self {
        Self {
            mu: vec![0.0, 0.25, 0.5, 1.0, 2.0],
            settings: EigenSettings::default(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispersionParams {
    /// Also report the roots `μ∧`, `μ∨` at this speed.
    pub c: Option<f64>,
    pub search: SearchSettings,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveParams {
    pub c: Option<f64>,
    pub settings: WaveSettings,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Initial {
    /// `height` on `|s| ≤ width`, zero elsewhere.
    Bump { width: f64, height: f64 },
    /// Smooth step occupied for `s > s0`.
    Step { s0: f64, height: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateParams {
    pub initial: Initial,
    pub settings: SimulationSettings,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            initial: Initial::Bump { width: 2.0, height: 1.0 },
            settings: SimulationSettings::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeParams {
    /// Probed speed; `c*/2` when absent.
    pub c: Option<f64>,
    pub tol: f64,
    pub settings: SimulationSettings,
}

impl Default for ProbeParams {
    fn default() -> Self {
        Self {
            c: None,
            tol: 1e-3,
            settings: SimulationSettings {
                t_final: 80.0,
                ..Default::default()
            },
        }
    }
}

/// A config that failed to parse or validate.
#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<(usize, usize)>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some((l, c)) = self.line {
            write!(f, "line {l}, column {c}: ")?
        }
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "at `{}`: {}", self.path, self.message)
        }
    }
}

fn field_error(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.into(),
        line: None,
        message: message.into(),
    }
}

/// A parsed config with the system built and the task list resolved.
pub struct Job {
    pub config: JobConfig,
    pub system: KppSystem,
    pub direction: Vec<f64>,
    /// Requested tasks plus prerequisites, in dependency order.
    pub plan: Vec<Task>,
    pub warnings: Vec<String>,
}

pub fn load(path: &Path) -> Result<Job, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| field_error("", format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Job, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: JobConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        ConfigError {
            path: e.path().to_string(),
            line: Some((inner.line(), inner.column())),
            message: inner.to_string(),
        }
    })?;
    let system = config.system.clone().build().map_err(|e| field_error("system", e.to_string()))?;
    if !system.has_unit_periods() {
        return Err(field_error("system", "periods must be 1; rescale time and space so that T = L = 1"));
    }
    let n = system.dim();
    let direction = match &config.direction {
        Some(e) => e.clone(),
        None => {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            e
        }
    };
    if direction.len() != n {
        return Err(field_error("direction", format!("expected {n} entries, got {}", direction.len())));
    }
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(field_error("direction", format!("must be a unit vector (norm {norm})")));
    }
    if config.validate.sampling_factor < 4 {
        return Err(field_error("validate.sampling_factor", "must be at least 4"));
    }
    if config.tasks.contains(&Task::Wave) && config.wave.c.is_none() {
        return Err(field_error("wave.c", "the wave task needs a speed"));
    }
    for (k, mu) in config.eigen.mu.iter().enumerate() {
        if !mu.is_finite() {
            return Err(field_error(&format!("eigen.mu[{k}]"), "must be finite"));
        }
    }
    let (plan, warnings) = resolve(&config.tasks);
    Ok(Job {
        config,
        system,
        direction,
        plan,
        warnings,
    })
}

/// Adds missing prerequisites and drops duplicates, keeping dependency order.
pub fn resolve(tasks: &[Task]) -> (Vec<Task>, Vec<String>) {
    let mut warnings = Vec::new();
    let mut wanted = std::collections::BTreeSet::new();
    for (k, &t) in tasks.iter().enumerate() {
        if tasks[..k].contains(&t) {
            warnings.push(format!("task `{t}` listed more than once; the latest entry is used"));
        }
        let mut stack = vec![t];
        while let Some(t) = stack.pop() {
            if wanted.insert(t) && !tasks.contains(&t) {
                warnings.push(format!("task `{t}` added as a prerequisite"));
            }
            stack.extend(t.requires());
        }
    }
    warnings.sort();
    warnings.dedup();
    (Task::ALL.into_iter().filter(|t| wanted.contains(t)).collect(), warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#""system": {"N": 1, "n": 1, "fields": {"A": [[[1.0]]], "q": [[0.0]], "L": [[1.0]], "B": [[1.0]]}}"#;

    #[test]
    fn non_unit_periods_are_rejected() {
        let cfg = r#"{"system": {"N": 1, "n": 1, "T": 2.0, "fields": {"A": [[[1.0]]], "q": [[0.0]], "L": [[1.0]], "B": [[1.0]]}}}"#;
        let err = parse(cfg).err().unwrap();
        assert_eq!(err.path, "system");
        assert!(err.message.contains("periods must be 1"));
    }

    #[test]
    fn prerequisites_are_inserted_in_order() {
        let (plan, warnings) = resolve(&[Task::Wave]);
        assert_eq!(plan, vec![Task::Validate, Task::Eigen, Task::Dispersion, Task::Wave]);
        assert_eq!(warnings.len(), 3);
        let (plan, _) = resolve(&[Task::Simulate, Task::Eigen]);
        assert_eq!(plan, vec![Task::Validate, Task::Eigen, Task::Simulate]);
    }

    #[test]
    fn duplicates_warn() {
        let (plan, warnings) = resolve(&[Task::Validate, Task::Validate]);
        assert_eq!(plan, vec![Task::Validate]);
        assert!(warnings[0].contains("more than once"));
    }

    #[test]
    fn unknown_field_has_a_location() {
        let err = parse(&format!("{{{SCALAR}, \"tasks\": [\"dispersion\"], \"dispersion\": {{\"cc\": 1}}}}"))
            .err()
            .unwrap();
        assert_eq!(err.path, "dispersion.cc");
        assert!(err.line.is_some());
    }

    #[test]
    fn bad_direction() {
        let err = parse(&format!("{{{SCALAR}, \"direction\": [0.5]}}")).err().unwrap();
        assert_eq!(err.path, "direction");
    }

    #[test]
    fn wave_needs_speed() {
        let err = parse(&format!("{{{SCALAR}, \"tasks\": [\"wave\"]}}")).err().unwrap();
        assert_eq!(err.path, "wave.c");
    }
}
