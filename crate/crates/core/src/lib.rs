//! Closed-loop layer-to-layer control sandbox for 2D laser powder bed
//! fusion: a deterministic thermal melt-pool plant, LPV model
//! identification, a per-layer trajectory-optimization controller, and the
//! feedback harness that ties them together.

pub mod controller;
pub mod error;
mod linalg;
pub mod plant;
pub mod qp;
pub mod scalar;
pub mod sysid;

pub use error::{Error, Result};
pub use scalar::Real;

/// f64 aliases for the main types; the pipeline runs in f64.
pub type Plant64 = plant::Plant<f64>;
pub type ThermalGrid64 = plant::ThermalGrid<f64>;
pub type MeltPoolState64 = plant::MeltPoolState<f64>;
pub type MaterialProps64 = plant::MaterialProps<f64>;
pub type ProcessParams64 = plant::ProcessParams<f64>;
pub type LpvModel64 = sysid::LpvModel<f64>;
pub type ExcitationSpec64 = sysid::ExcitationSpec<f64>;

/// f32 aliases for experimentation at reduced precision.
pub type Plant32 = plant::Plant<f32>;
pub type MeltPoolState32 = plant::MeltPoolState<f32>;
