//! Domain types shared by the solver and analysis modules: dimensionless
//! parameter sets, piecewise-constant control schedules, input pulses, field
//! states, and schedule validation.
//!
//! Unit convention: every quantity is dimensionless. Lengths are measured in
//! units of l = c/g0 and times in units of 1/g0. The only place SI constants
//! appear is [`grating_from_lasers`], which converts a laboratory grating
//! geometry into the dimensionless pair (nu_bar, k_bar_r).

use num_complex::Complex64;
use thiserror::Error;

/// Speed of light in vacuum, m/s. Used only by the laser-geometry conversion.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// Grid and recording parameters for one simulation.
///
/// The spatial grid spans `[-sample_length_lbar/2, +sample_length_lbar/2)`
/// with `grid_points_z` nodes; the input face is the first node and the
/// output intensity is read at the last node. Centering the sample on z = 0
/// puts a zero-carrier pulse in the middle of the gradient-broadened line, so
/// its full bandwidth can be absorbed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationParams {
    /// Dimensionless linear atomic density N.
    pub atomic_density_n: f64,
    /// Dimensionless sample length L.
    pub sample_length_lbar: f64,
    /// Number of spatial grid nodes.
    pub grid_points_z: usize,
    /// Time step of the Strang-split integrator.
    pub time_step_dtbar: f64,
    /// Number of solver steps between recorded time-series points.
    pub record_stride: usize,
    /// Full field snapshots are kept every `snapshot_stride` recorded points
    /// (plus one at every segment boundary); 0 keeps boundary snapshots only.
    pub snapshot_stride: usize,
}

impl SimulationParams {
    /// Spatial step of the grid.
    pub fn dz(&self) -> f64 {
        self.sample_length_lbar / self.grid_points_z as f64
    }

    /// Grid node positions, `z_j = -L/2 + j dz`.
    pub fn z_grid(&self) -> Vec<f64> {
        let dz = self.dz();
        let half = self.sample_length_lbar / 2.0;
        (0..self.grid_points_z).map(|j| -half + j as f64 * dz).collect()
    }

    /// Optical depth d = 2 pi N / eta for a given gradient slope: the
    /// coupling sqrt(N) enters both propagation equations, so a pulse swept
    /// across resonance by the gradient is absorbed as e^-d in intensity.
    /// Derived on demand; never stored.
    pub fn optical_depth(&self, eta_bar: f64) -> f64 {
        2.0 * std::f64::consts::PI * self.atomic_density_n / eta_bar
    }
}

/// Atomic density that realizes optical depth `d` at gradient slope `eta_bar`.
pub fn density_for_depth(optical_depth: f64, eta_bar: f64) -> f64 {
    optical_depth * eta_bar / (2.0 * std::f64::consts::PI)
}

/// One piecewise-constant stretch of the control timeline.
///
/// Active over `[t_start, t_end)`; the right-open convention makes schedule
/// evaluation unambiguous when a query lands exactly on a switch time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    /// Signed slope of the linear detuning eta * z.
    pub gradient_eta_bar: f64,
    /// Nonnegative amplitude of the sinusoidal light shift.
    pub grating_nu_bar: f64,
    /// Grating wavenumber; enters only through cos(k z + phase).
    pub grating_k_bar: f64,
    /// Grating phase offset; protocol builders emit 0 or pi.
    pub grating_phase: f64,
}

impl Segment {
    /// Gradient-only stretch (grating off).
    pub fn gradient(t_start: f64, t_end: f64, eta_bar: f64) -> Self {
        Segment {
            t_start,
            t_end,
            gradient_eta_bar: eta_bar,
            grating_nu_bar: 0.0,
            grating_k_bar: 0.0,
            grating_phase: 0.0,
        }
    }

    /// Grating-only stretch (gradient off).
    pub fn grating(t_start: f64, t_end: f64, nu_bar: f64, k_bar: f64, phase: f64) -> Self {
        Segment {
            t_start,
            t_end,
            gradient_eta_bar: 0.0,
            grating_nu_bar: nu_bar,
            grating_k_bar: k_bar,
            grating_phase: phase,
        }
    }

    /// All controls off.
    pub fn idle(t_start: f64, t_end: f64) -> Self {
        Segment::gradient(t_start, t_end, 0.0)
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Gaussian input pulse, amplitude * exp(-((t - center)/width)^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputPulse {
    pub center_tbar: f64,
    /// Gaussian 1/e half-width of the amplitude envelope.
    pub width_tbar: f64,
    pub amplitude: Complex64,
}

/// Full control timeline: ordered contiguous segments plus the input pulses
/// driving the boundary field.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlSchedule {
    pub segments: Vec<Segment>,
    pub input_pulses: Vec<InputPulse>,
}

impl ControlSchedule {
    /// Segment containing `t`, by the right-open convention [t_start, t_end).
    pub fn controls_at(&self, t: f64) -> Option<&Segment> {
        self.segments.iter().find(|s| s.t_start <= t && t < s.t_end)
    }

    pub fn t_start(&self) -> f64 {
        self.segments.first().map_or(0.0, |s| s.t_start)
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_end)
    }
}

/// Complex field and coherence envelopes on the spatial grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub time_tbar: f64,
    /// Locally averaged coherence sigma12(z). Weak excitation keeps
    /// |sigma12| well below 1; values above 1 signal parameter blow-up.
    pub sigma12: Vec<Complex64>,
    /// Slowly varying field envelope E(z).
    pub field_e: Vec<Complex64>,
}

impl FieldState {
    /// Vacuum state (no field, all atoms in the ground level).
    pub fn zero(params: &SimulationParams, time_tbar: f64) -> Self {
        FieldState {
            time_tbar,
            sigma12: vec![Complex64::new(0.0, 0.0); params.grid_points_z],
            field_e: vec![Complex64::new(0.0, 0.0); params.grid_points_z],
        }
    }
}

/// Laboratory description of the light-shift grating: two beams of wavelength
/// `lambda` crossing at half-angle `theta`, each with single-beam Rabi
/// frequency `Omega`, detuned by `Delta` from the excited state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalGratingSpec {
    /// Single-beam Rabi frequency (angular units).
    pub rabi_frequency_omega: f64,
    /// Detuning from the excited state (angular units); must be nonzero.
    pub detuning_delta: f64,
    /// Half-angle between the beams, radians.
    pub angle_theta: f64,
    /// Optical wavelength, metres.
    pub wavelength_lambda: f64,
    /// Light-matter coupling rate g0 (angular units) defining the
    /// dimensionless units l = c/g0 and 1/g0.
    pub coupling_g0: f64,
    /// Caller-asserted: |Delta| is much larger than the excited-state decay,
    /// so the light shift Omega^2/Delta is the whole story.
    pub far_detuned: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("grating detuning must be nonzero")]
    ZeroDetuning,
    #[error("beam half-angle must be positive (zero angle means infinite fringe spacing)")]
    ZeroAngle,
    #[error("wavelength must be positive")]
    NonPositiveWavelength,
    #[error("coupling rate g0 must be positive")]
    NonPositiveCoupling,
}

/// Fringe spacing of the grating, metres: d = 2 lambda / theta^2.
pub fn fringe_spacing_m(spec: &PhysicalGratingSpec) -> Result<f64, ModelError> {
    if spec.angle_theta <= 0.0 {
        return Err(ModelError::ZeroAngle);
    }
    if spec.wavelength_lambda <= 0.0 {
        return Err(ModelError::NonPositiveWavelength);
    }
    Ok(2.0 * spec.wavelength_lambda / (spec.angle_theta * spec.angle_theta))
}

/// Converts a laboratory grating description into the dimensionless
/// amplitude and wavenumber (nu_bar, k_bar_r).
///
/// The light-shift amplitude is nu = Omega^2/Delta, so nu_bar = nu/g0. The
/// fringe spacing is d = 2 lambda/theta^2, giving k_R = 2 pi/d = pi theta^2 /
/// lambda, and k_bar_r = k_R * (c/g0).
///
/// This is the only conversion convention implemented. Dimensionless
/// wavenumbers quoted together with a fringe spacing that does not satisfy
/// d = 2 pi (c/g0) / k_bar_r cannot be reproduced by any (theta, lambda)
/// here; enter such values directly in dimensionless form instead.
pub fn grating_from_lasers(spec: &PhysicalGratingSpec) -> Result<(f64, f64), ModelError> {
    if spec.detuning_delta == 0.0 {
        return Err(ModelError::ZeroDetuning);
    }
    if spec.coupling_g0 <= 0.0 {
        return Err(ModelError::NonPositiveCoupling);
    }
    let nu = spec.rabi_frequency_omega * spec.rabi_frequency_omega / spec.detuning_delta;
    let nu_bar = nu / spec.coupling_g0;
    let d = fringe_spacing_m(spec)?;
    let k_r = 2.0 * std::f64::consts::PI / d;
    let k_bar_r = k_r * SPEED_OF_LIGHT_M_PER_S / spec.coupling_g0;
    Ok((nu_bar, k_bar_r))
}

/// One problem found by [`validate_schedule`].
#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    EmptySchedule,
    /// Segment `index+1` does not start where segment `index` ends.
    NonContiguous { index: usize, gap: f64 },
    NonPositiveDuration { index: usize },
    /// Segment is shorter than the solver time step and would be skipped.
    ShorterThanStep { index: usize },
    /// The grid cannot resolve the largest wavenumber this segment implies.
    Nyquist { index: usize, k_estimate: f64, dz_k_product: f64 },
    /// Pulse bandwidth does not fit inside the gradient-broadened line.
    PulseBandwidth { pulse: usize, bandwidth: f64, half_line: f64 },
    /// Pulse center falls in a segment with the gradient off (not absorbed).
    PulseOutsideGradient { pulse: usize },
    NonPositivePulseWidth { pulse: usize },
    InvalidParams { reason: &'static str },
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Finding::EmptySchedule => write!(f, "schedule has no segments"),
            Finding::NonContiguous { index, gap } => write!(
                f,
                "segment {} does not start where segment {} ends (gap {:+e})",
                index + 1,
                index,
                gap
            ),
            Finding::NonPositiveDuration { index } => {
                write!(f, "segment {index} has non-positive duration")
            }
            Finding::ShorterThanStep { index } => {
                write!(f, "segment {index} is shorter than one time step")
            }
            Finding::Nyquist { index, k_estimate, dz_k_product } => write!(
                f,
                "segment {index}: wavenumber estimate {k_estimate:.3e} gives dz*k = {dz_k_product:.3} >= pi"
            ),
            Finding::PulseBandwidth { pulse, bandwidth, half_line } => write!(
                f,
                "pulse {pulse}: bandwidth {bandwidth:.3} exceeds half line width {half_line:.3}"
            ),
            Finding::PulseOutsideGradient { pulse } => {
                write!(f, "pulse {pulse} arrives while the gradient is off")
            }
            Finding::NonPositivePulseWidth { pulse } => {
                write!(f, "pulse {pulse} has non-positive width")
            }
            Finding::InvalidParams { reason } => write!(f, "invalid parameters: {reason}"),
        }
    }
}

/// Result of checking a schedule against a parameter set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.findings.is_empty() {
            write!(f, "schedule ok")
        } else {
            for finding in &self.findings {
                writeln!(f, "{finding}")?;
            }
            Ok(())
        }
    }
}

/// Spectral half-extent attributed to a pulse: amplitude has fallen to
/// e^-9 ~ 1e-4 at `PULSE_BAND_SIGMAS / width` away from the carrier.
const PULSE_BAND_SIGMAS: f64 = 3.0;

/// Tolerance for contiguity of consecutive segments.
const CONTIGUITY_TOL: f64 = 1e-9;

/// Pure check of a schedule against a parameter set.
///
/// Reports, without failing: parameter-range problems, segment ordering and
/// contiguity violations, segments too short for the time step, Nyquist
/// violations (the grid must resolve both the grating wavenumber and the
/// momentum excursion |eta| * t_span), and input pulses whose bandwidth
/// cannot be absorbed by the gradient-broadened line.
pub fn validate_schedule(schedule: &ControlSchedule, params: &SimulationParams) -> ValidationReport {
    let mut findings = Vec::new();

    if params.grid_points_z < 16 {
        findings.push(Finding::InvalidParams { reason: "grid_points_z must be at least 16" });
    }
    if !(params.sample_length_lbar > 0.0) {
        findings.push(Finding::InvalidParams { reason: "sample_length_lbar must be positive" });
    }
    if !(params.time_step_dtbar > 0.0) {
        findings.push(Finding::InvalidParams { reason: "time_step_dtbar must be positive" });
    }
    if params.record_stride == 0 {
        findings.push(Finding::InvalidParams { reason: "record_stride must be at least 1" });
    }
    if !(params.atomic_density_n >= 0.0) {
        findings.push(Finding::InvalidParams { reason: "atomic_density_n must be nonnegative" });
    }

    if schedule.segments.is_empty() {
        findings.push(Finding::EmptySchedule);
        return ValidationReport { findings };
    }

    let t_span = schedule.t_end() - schedule.t_start();
    let dz = params.dz();

    for (i, seg) in schedule.segments.iter().enumerate() {
        if !(seg.t_end > seg.t_start) {
            findings.push(Finding::NonPositiveDuration { index: i });
        } else if seg.duration() < params.time_step_dtbar {
            findings.push(Finding::ShorterThanStep { index: i });
        }
        if i + 1 < schedule.segments.len() {
            let gap = schedule.segments[i + 1].t_start - seg.t_end;
            if gap.abs() > CONTIGUITY_TOL * t_span.abs().max(1.0) {
                findings.push(Finding::NonContiguous { index: i, gap });
            }
        }
        let k_estimate = seg.grating_k_bar.abs().max(seg.gradient_eta_bar.abs() * t_span);
        let product = dz * k_estimate;
        if product >= std::f64::consts::PI {
            findings.push(Finding::Nyquist { index: i, k_estimate, dz_k_product: product });
        }
    }

    let half_line_of = |seg: &Segment| seg.gradient_eta_bar.abs() * params.sample_length_lbar / 2.0;
    for (p, pulse) in schedule.input_pulses.iter().enumerate() {
        if !(pulse.width_tbar > 0.0) {
            findings.push(Finding::NonPositivePulseWidth { pulse: p });
            continue;
        }
        match schedule.controls_at(pulse.center_tbar) {
            Some(seg) if seg.gradient_eta_bar != 0.0 => {
                let bandwidth = PULSE_BAND_SIGMAS / pulse.width_tbar;
                let half_line = half_line_of(seg);
                if bandwidth > half_line {
                    findings.push(Finding::PulseBandwidth { pulse: p, bandwidth, half_line });
                }
            }
            _ => findings.push(Finding::PulseOutsideGradient { pulse: p }),
        }
    }

    ValidationReport { findings }
}
