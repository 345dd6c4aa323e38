//! Wind turbine drive-train model with a gain-scheduled LQ tracking
//! controller and a conventional baseline controller for comparison.

// `!(x > y)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aero;
pub mod baseline;
pub mod common;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod loads;
pub mod lq;
pub mod refgen;
pub mod sim;
pub mod wind;

pub use config::{ControllerKind, Scenario, ScenarioConfig};
pub use error::{Error, Result};
pub use nalgebra;
