//! Periodic coefficient fields, the KPP system, and the standing assumptions.

mod assumptions;
mod field;
mod system;

pub use assumptions::{validate_assumptions, AssumptionReport, Check};
pub use field::{FieldMatrix, Mode, PeriodicField};
pub use system::{FieldJson, FieldsJson, KppSystem, SystemJson};
