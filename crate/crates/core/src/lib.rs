//! Semiclassical model of a laser locked to a strongly saturated atom-cavity
//! resonance: steady states and bistability, time-domain stability, the
//! shot-noise-limited lock budget, and Monte-Carlo lineshapes.
//!
//! Everything downstream of [`model`] works in the scaled variables of
//! [`DimensionlessPoint`]; see that module for the units ledger.

// `!(x > 0.0)` guards are written that way so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod constants;
pub mod dynamics;
pub mod error;
pub mod fmt;
pub mod metrology;
pub mod model;
pub mod noise;
pub mod steady_state;

pub use catalog::{Catalog, SpeciesRecord};
pub use dynamics::{FlowParams, HysteresisConfig, HysteresisLoop, SemiclassicalState, Trajectory};
pub use error::{Error, Result};
pub use metrology::{LockBudget, Table1Row};
pub use model::{Coherence, DerivedParams, DimensionlessPoint, PhysicalDrive, PhysicalSystem};
pub use noise::{FieldSeries, HomodyneConfig, LineshapeEstimate, NoiseSimConfig};
pub use steady_state::{BranchSet, Stability, SteadyStateBranch, Thresholds};
