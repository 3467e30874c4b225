//! Direct simulation of the Cauchy problem on a line, spreading speeds,
//! nonexistence probes and the logistic a-priori bound.

mod envelope;
mod simulate;
mod speed;

pub use envelope::{field_bounds, logistic_envelope, LogisticEnvelope};
pub use simulate::{compact_bump, front_step, simulate, snapshot, FrontTrack, SimulationRun, SimulationSettings, Simulator};
pub use speed::{measure_spreading_speed, nonexistence_probe, Fit, ProbeReport, ProbeStatus, SpreadingSpeed, MIN_R2, PROBE_RATIO};
