//! Reverse-engineered electromagnetic pulses that steer the ground-state
//! population of a two-level system along a prescribed logistic path while
//! the system dephases and exchanges energy with a thermal bath.
//!
//! The crate is `no_std` (it needs `alloc` for trajectories and sweep grids).
//! Layout follows the data flow:
//!
//! - [`model`]: parameters, the density-matrix representation and the two
//!   right-hand sides (full lab frame, and the rotating-wave interaction
//!   picture).
//! - [`profile`]: the prescribed population `f(t)`, the coherence `u = h²`
//!   solved as a linear ODE, steady-state coherence and its admissible band.
//! - [`pulse`]: the synthesized field, its complex envelope and the general
//!   inverse map from a trajectory to a field.
//! - [`integrate`]: fixed-step RK4 propagation and tracking reports.
//! - [`sweep`]: feasibility maps, accessible target bands and the thermal
//!   occupation bound.
//!
//! Atomic units throughout (`ħ = 1`).

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod grid;
pub mod integrate;
pub mod model;
pub mod ode;
pub mod profile;
pub mod pulse;
pub mod sweep;

pub use grid::{Interval, TimeGrid};
pub use integrate::{
    integrate, verify_tracking, Drive, Frame, IntegrateError, IntegrateOptions, NoDrive, PulseDrive, TrackingReport,
    Trajectory,
};
pub use model::{lab_frame_rhs, rwa_rhs, NoiseParams, ParamError, StateDerivative, SystemParams, TwoLevelState};
pub use profile::{
    coherence_quadrature, f_dot, f_profile, g_sigmoid, source_term, steady_band, steady_state_coherence,
    steady_state_feasibility, CoherenceProfile, ControlTarget, ProfileError, SteadyStateError, SteadyStateReport,
};
pub use pulse::{field_from_trajectory, CoherenceSample, PulseError, PulseOptions, SynthesizedPulse};
pub use sweep::{
    accessible_band, evaluate_column, feasibility_map, max_feasible_nbar, AxisSpec, Column, FeasibilityGrid, Horizon,
    SweepError, SweepParam, SweepSetup,
};
