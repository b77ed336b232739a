//! Simulation library for a gradient-echo optical quantum memory whose stored
//! spin wave is manipulated by a sinusoidal light-shift grating.
//!
//! Everything is expressed in the dimensionless units of the underlying model:
//! lengths are divided by l = c/g0 and times multiplied by g0, where g0 is the
//! light-matter coupling rate. The propagation equations solved by [`solver`]
//! are
//!
//! ```text
//!   dE/dz     = i sqrt(N) sigma
//!   dsigma/dt = i (eta(t) z + nu(t) cos(kR z + phi)) sigma + i sqrt(N) E
//! ```
//!
//! with a one-way field E(z, t) driven from the input face and a collective
//! coherence sigma(z, t) on the same grid.
//!
//! Module layout:
//! - [`model`]: parameter sets, control schedules, pulses, field states,
//!   schedule validation, and the laser-to-grating conversion helper.
//! - [`solver`]: the Strang-split time stepper and simulation driver.
//! - [`bessel`]: Bessel functions of the first kind by downward recurrence.
//! - [`kspace`]: spectra, polariton construction, diffraction-order
//!   populations, and the analytic grating mode expansion.
//! - [`sequencer`]: regime classification, emission-time prediction, and
//!   schedule builders for read-out, FIFO, and reordering protocols.
//! - [`metrics`]: efficiencies, sweeps, pulse detection, energy balance.
//! - [`presets`]: the canonical desk-scale parameter sets used by tests and
//!   the shipped example configurations.

pub mod bessel;
pub mod kspace;
pub mod metrics;
pub mod model;
pub mod presets;
pub mod sequencer;
pub mod solver;

pub use num_complex::Complex64;
