//! Moving frames along rational (or arbitrary, for space-homogeneous
//! coefficients) directions, and the line operators `R_μ` they induce.

mod basis;
mod operator;
pub mod rational;
mod transform;

pub use basis::{compute_periods, rational_basis, real_basis};
pub use operator::{build_operator_mu, OperatorSpec};
pub use rational::{RationalDirection, Speed, SpeedJson, Q};
pub use transform::{transform_coefficients, FrameMode, FrameRequest, FrameSystem, MovingFrame};
