//! Frequency-domain model of an infinite self-similar spring-damper tree
//! with one damaged component, and identification of that component and
//! its damage amount from a measured frequency response.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assign;
pub mod database;
pub mod error;
pub mod experiments;
pub mod identify;
pub mod measurement;
pub mod minimize;
pub mod model;
pub mod regression;
pub mod roots;

pub use database::{ComponentTable, PoleZeroDatabase, RootMap};
pub use error::{Error, Result};
pub use identify::{identify, IdentificationResult, LocalResult, SolverSettings};
pub use measurement::{make_grid, simulate_measurement, FrequencyGrid, FrequencyResponse, NoiseMode, NoiseSpec};
pub use model::{
    base_delta, candidates, component_count, delta_for_case, undamaged_response, Branch, ComponentId, DamageCase,
    HalfOrderRational, Kind, PolyW, TreeParams, C64,
};
