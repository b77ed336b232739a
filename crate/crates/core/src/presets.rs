//! Canonical parameter sets shared by the integration tests and the sample
//! configs. All presets keep the optical depth at 5.4 and pick grid sizes so
//! the grating wavenumber is an exact harmonic of the box.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::metrics::SweepSetup;
use crate::model::{density_for_depth, InputPulse, SimulationParams};
use crate::sequencer::{
    build_fifo_plan, build_reorder_plan, build_tof_plan, ProtocolPlan, SequencerError,
};

pub const OPTICAL_DEPTH: f64 = 5.4;

/// Single-pulse storage, an optional grating burst, read-out under -eta.
#[derive(Debug, Clone)]
pub struct ReadoutPreset {
    pub params: SimulationParams,
    pub pulse: InputPulse,
    pub eta_bar: f64,
    pub t0: f64,
    pub tau: f64,
    /// (nu_bar, k_bar_r)
    pub grating: (f64, f64),
}

impl ReadoutPreset {
    pub fn plan(&self) -> Result<ProtocolPlan, SequencerError> {
        build_tof_plan(&self.params, &self.pulse, self.eta_bar, self.t0, self.tau, self.grating)
    }
}

/// Pulse train stored under one gradient, recalled through a grating tail.
#[derive(Debug, Clone)]
pub struct TrainPreset {
    pub params: SimulationParams,
    pub pulses: Vec<InputPulse>,
    pub eta_bar: f64,
    /// (nu_bar, k_bar_r)
    pub grating: (f64, f64),
}

impl TrainPreset {
    pub fn fifo_plan(&self) -> Result<ProtocolPlan, SequencerError> {
        build_fifo_plan(&self.params, &self.pulses, self.eta_bar, self.grating)
    }

    pub fn reorder_plan(&self) -> Result<ProtocolPlan, SequencerError> {
        build_reorder_plan(&self.params, &self.pulses, self.eta_bar, self.grating)
    }
}

fn params(length: f64, grid_points_z: usize) -> SimulationParams {
    SimulationParams {
        atomic_density_n: 0.0, // filled per preset
        sample_length_lbar: length,
        grid_points_z,
        time_step_dtbar: 1e-3,
        record_stride: 20,
        snapshot_stride: 0,
    }
}

/// Deep time-of-flight geometry: populated orders sit far below the stored
/// momentum (n'ized k_R = 300 against k0 = 945), so every order rides the
/// conveyor to k = 0 and the output is a pulse train spaced k_R/eta = 15/7.
/// A unit grating burst of amplitude 2 splits the band with weights
/// J_n(2)^2.
pub fn diffraction_readout() -> ReadoutPreset {
    let eta_bar = 70.0;
    let mut p = params(24.0 * TAU / 150.0, 2048);
    p.atomic_density_n = density_for_depth(OPTICAL_DEPTH, eta_bar);
    ReadoutPreset {
        params: p,
        pulse: InputPulse {
            center_tbar: 1.5,
            width_tbar: 0.3,
            amplitude: Complex64::new(0.25, 0.0),
        },
        eta_bar,
        t0: 15.0,
        tau: 1.0,
        grating: (2.0, 150.0),
    }
}

/// Order-hopping geometry for grating-duration scans: k_R = 495 exceeds the
/// stored momentum k0 = 143, so the +-1 orders can never reach k = 0 inside
/// the read-out window and the zero-order echo carries J_0(nu tau)^2 of the
/// baseline. Returns the grid, the fixed read-out, and the scanned
/// durations (nu tau from 0 to 5).
pub fn grating_sweep() -> (SimulationParams, SweepSetup, Vec<f64>) {
    let eta_bar = 22.0;
    let mut p = params(120.0 * TAU / 495.0, 2048);
    p.atomic_density_n = density_for_depth(OPTICAL_DEPTH, eta_bar);
    let setup = SweepSetup {
        pulse: InputPulse {
            center_tbar: 1.5,
            width_tbar: 0.3,
            amplitude: Complex64::new(0.25, 0.0),
        },
        eta_bar,
        t0: 8.0,
        grating: (2.0, 495.0),
    };
    let tau_values: Vec<f64> = (0..26).map(|i| 0.1 * i as f64).collect();
    (p, setup, tau_values)
}

/// Plain gradient echo on the sweep geometry: no grating, single time
/// reversal, echo at 2 t0 - t_c.
pub fn plain_echo() -> ReadoutPreset {
    let (params, setup, _) = grating_sweep();
    ReadoutPreset {
        params,
        pulse: setup.pulse,
        eta_bar: setup.eta_bar,
        t0: setup.t0,
        tau: 0.0,
        grating: setup.grating,
    }
}

/// Three distinguishable pulses (distinct widths and heights) on a box long
/// enough to hold the 495-harmonic grating with the train's momentum spread.
pub fn fifo_train() -> TrainPreset {
    let eta_bar = 22.0;
    let mut p = params(240.0 * TAU / 495.0, 4096);
    p.atomic_density_n = density_for_depth(OPTICAL_DEPTH, eta_bar);
    TrainPreset {
        params: p,
        pulses: vec![
            InputPulse {
                center_tbar: 1.5,
                width_tbar: 0.22,
                amplitude: Complex64::new(0.24, 0.0),
            },
            InputPulse {
                center_tbar: 3.8,
                width_tbar: 0.34,
                amplitude: Complex64::new(0.17, 0.0),
            },
            InputPulse {
                center_tbar: 5.6,
                width_tbar: 0.50,
                amplitude: Complex64::new(0.13, 0.0),
            },
        ],
        eta_bar,
        // nu_bar = 4 keeps the depletion burst short: the zero-order
        // remnant left by in-medium dispersion during the burst scales
        // with N tau_s, and tau_s with 1/nu_bar.
        grating: (4.0, 495.0),
    }
}

/// Train for last-in-first-out reordering: the trailing pulse is narrow so
/// its plain echo clears k = 0 before the middle band arrives, leaving a
/// recapture gap for the grating burst.
pub fn reorder_train() -> TrainPreset {
    let eta_bar = 22.0;
    let mut p = params(240.0 * TAU / 495.0, 4096);
    p.atomic_density_n = density_for_depth(OPTICAL_DEPTH, eta_bar);
    TrainPreset {
        params: p,
        pulses: vec![
            InputPulse {
                center_tbar: 1.6,
                width_tbar: 0.18,
                amplitude: Complex64::new(0.26, 0.0),
            },
            InputPulse {
                center_tbar: 4.1,
                width_tbar: 0.40,
                amplitude: Complex64::new(0.15, 0.0),
            },
            InputPulse {
                center_tbar: 7.2,
                width_tbar: 0.27,
                amplitude: Complex64::new(0.21, 0.0),
            },
        ],
        eta_bar,
        grating: (4.0, 495.0),
    }
}
