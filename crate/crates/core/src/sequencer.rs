//! Protocol planning: builds control schedules for diffraction read-out and
//! pulse-sequencing experiments, classifies the operating regime, and
//! predicts emission times from the piecewise-linear momentum bookkeeping
//! k(t) = k_init + integral of the gradient slope.
//!
//! Everything here is pure arithmetic on the conveyor picture: storage under
//! +eta moves a pulse's spin-wave band up in k at rate eta, read-out under
//! -eta moves it back down, light is emitted when a populated band crosses
//! k = 0, and a grating pulse of area nu*tau splits each band into orders
//! offset by n*k_R with amplitudes J_n(nu*tau).

use thiserror::Error;

use crate::bessel::j0_first_root;
use crate::model::{
    validate_schedule, ControlSchedule, InputPulse, Segment, SimulationParams, ValidationReport,
};

/// Operating regime of a grating protocol.
///
/// With n' populated orders, grating momentum k_R, and stored momentum
/// k0 = eta (t0 - t_in): order hopping when n' k_R > k0 (a grating kick can
/// move population past k = 0, the sequencing regime), time of flight
/// otherwise (all orders stay on the positive conveyor and emerge as
/// separate delayed copies).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    OrderHopping,
    TimeOfFlight,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::OrderHopping => write!(f, "I (order hopping)"),
            Regime::TimeOfFlight => write!(f, "II (time of flight)"),
        }
    }
}

/// A planned experiment: the schedule to run plus what should come out.
#[derive(Debug, Clone)]
pub struct ProtocolPlan {
    pub schedule: ControlSchedule,
    /// (label, emission time), sorted by time. The label is the diffraction
    /// order for read-out plans and the 1-based input pulse number for
    /// sequencing plans.
    pub predicted_emissions: Vec<(i32, f64)>,
    pub regime: Regime,
    /// Audit trail of the solved timing quantities.
    pub notes: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SequencerError {
    #[error("{what} must be positive")]
    NonPositive { what: &'static str },
    #[error("pulses must be in strictly increasing center order with positive widths")]
    BadPulses,
    #[error("pulse tails must fit inside the storage window (0, t0); offending pulse {pulse}")]
    PulseOutsideStorage { pulse: usize },
    #[error(
        "sequencing needs the order-hopping regime: n'*k_R = {ladder:.3} does not exceed the stored momentum k0 = {k0:.3}"
    )]
    RegimeMismatch { ladder: f64, k0: f64 },
    #[error(
        "no suppressed-crossing window: the empty band clears k=0 only for eta*T_rev > {lower:.3}, but the first order reaches k=0 at {upper:.3}"
    )]
    NoSuppressionWindow { lower: f64, upper: f64 },
    #[error(
        "cannot recapture between echoes: need a momentum gap of {needed:.3} between adjacent bands, have {available:.3}"
    )]
    NoRecaptureGap { needed: f64, available: f64 },
    #[error("planned schedule failed validation:\n{0}")]
    Validation(ValidationReport),
}

/// Regime of a grating protocol with `n_prime` populated orders; see
/// [`Regime`]. The boundary n' k_R = k0 counts as time of flight.
pub fn classify_regime(n_prime: i32, k_bar_r: f64, eta_bar: f64, t0: f64, t_in: f64) -> Regime {
    assert!(eta_bar > 0.0, "gradient magnitude must be positive");
    assert!(t0 > t_in, "storage must end after the pulse arrives");
    let k0 = eta_bar * (t0 - t_in);
    if n_prime as f64 * k_bar_r > k0 {
        Regime::OrderHopping
    } else {
        Regime::TimeOfFlight
    }
}

/// Emission times of the requested diffraction orders: the base echo at
/// `t_echo0` plus one order spacing k_R/eta per order.
pub fn predict_emission_times(
    t_echo0: f64,
    k_bar_r: f64,
    eta_bar: f64,
    orders: &[i32],
) -> Vec<(i32, f64)> {
    assert!(eta_bar > 0.0, "gradient magnitude must be positive");
    orders.iter().map(|&n| (n, t_echo0 + n as f64 * k_bar_r / eta_bar)).collect()
}

/// Grating duration that empties the zeroth diffraction order: the first
/// root of J_0 divided by the grating amplitude.
pub fn depletion_duration(nu_bar: f64) -> Result<f64, SequencerError> {
    if nu_bar <= 0.0 {
        return Err(SequencerError::NonPositive { what: "grating amplitude" });
    }
    Ok(j0_first_root() / nu_bar)
}

/// Half-width in k of the stored band of one pulse: the conveyor spreads the
/// pulse's temporal extent into momentum at rate eta. The 3.5 covers the
/// e^-9 envelope edge with margin for structured (non-Gaussian) envelopes.
fn band_half_width(eta_bar: f64, width_tbar: f64) -> f64 {
    3.5 * eta_bar * width_tbar
}

/// Time padding after the last predicted emission.
const TAIL_PAD: f64 = 0.5;

fn check_pulses(pulses: &[InputPulse]) -> Result<(), SequencerError> {
    if pulses.is_empty() {
        return Err(SequencerError::BadPulses);
    }
    for (i, p) in pulses.iter().enumerate() {
        if !(p.width_tbar > 0.0) {
            return Err(SequencerError::BadPulses);
        }
        if i > 0 && p.center_tbar <= pulses[i - 1].center_tbar {
            return Err(SequencerError::BadPulses);
        }
    }
    for (i, p) in pulses.iter().enumerate() {
        if p.center_tbar - 4.0 * p.width_tbar < 0.0 {
            return Err(SequencerError::PulseOutsideStorage { pulse: i });
        }
    }
    Ok(())
}

/// Storage end time: all pulse tails absorbed.
fn storage_end(pulses: &[InputPulse]) -> f64 {
    pulses.iter().map(|p| p.center_tbar + 4.0 * p.width_tbar).fold(0.0, f64::max)
}

/// The depletion burst is not instantaneous: over its duration tau_s the
/// in-medium dispersion advances each band by a k-dependent phase (rate
/// N/k) that the Bessel-node condition does not cancel, leaving a
/// zero-order remnant of amplitude ~0.3 N tau_s / kappa. That remnant
/// leaks out at the otherwise dark k = 0 crossing, so storage must run
/// until every band sits at kappa >= DEPLETION_CLEARANCE * N tau_s, which
/// caps the remnant near 3% in amplitude (under 0.1% in energy).
const DEPLETION_CLEARANCE: f64 = 10.0;

fn cleared_storage_end(
    pulses: &[InputPulse],
    atomic_density_n: f64,
    eta_bar: f64,
    tau_s: f64,
) -> f64 {
    let last = pulses.last().expect("pulses checked nonempty");
    let clearance = DEPLETION_CLEARANCE * atomic_density_n * tau_s / eta_bar;
    storage_end(pulses).max(last.center_tbar + clearance)
}

/// Diffraction read-out: store one pulse under +eta until `t0`, apply the
/// grating alone for `tau`, then read out under -eta. Predicted emissions
/// are the populated orders that reach k = 0 inside the read-out window,
/// spaced k_R/eta around the base echo at 2 t0 - t_c + tau.
pub fn build_tof_plan(
    params: &SimulationParams,
    pulse: &InputPulse,
    eta_bar: f64,
    t0: f64,
    tau: f64,
    grating: (f64, f64),
) -> Result<ProtocolPlan, SequencerError> {
    let (nu_bar, k_bar_r) = grating;
    if eta_bar <= 0.0 {
        return Err(SequencerError::NonPositive { what: "gradient magnitude" });
    }
    if tau < 0.0 {
        return Err(SequencerError::NonPositive { what: "grating duration" });
    }
    check_pulses(std::slice::from_ref(pulse))?;
    if pulse.center_tbar + 4.0 * pulse.width_tbar > t0 {
        return Err(SequencerError::PulseOutsideStorage { pulse: 0 });
    }

    let area = nu_bar * tau;
    let n_prime = area.ceil() as i32;
    let regime = classify_regime(n_prime.max(0), k_bar_r, eta_bar, t0, pulse.center_tbar);

    let kappa0 = eta_bar * (t0 - pulse.center_tbar);
    let band = band_half_width(eta_bar, pulse.width_tbar);
    let t_echo0 = 2.0 * t0 - pulse.center_tbar + tau;
    let order_spacing = k_bar_r / eta_bar;

    let horizon = match regime {
        Regime::TimeOfFlight => {
            t_echo0 + n_prime as f64 * order_spacing + 4.0 * pulse.width_tbar + TAIL_PAD
        }
        Regime::OrderHopping => t_echo0 + 4.0 * pulse.width_tbar + TAIL_PAD,
    };

    let mut emissions = Vec::new();
    let mut trapped = Vec::new();
    for n in -n_prime..=n_prime {
        let k_band = kappa0 + n as f64 * k_bar_r;
        let t_n = t_echo0 + n as f64 * order_spacing;
        if k_band > band && t_n + pulse.width_tbar <= horizon {
            emissions.push((n, t_n));
        } else {
            trapped.push(n);
        }
    }

    let mut segments = vec![Segment::gradient(0.0, t0, eta_bar)];
    if tau > 0.0 {
        segments.push(Segment::grating(t0, t0 + tau, nu_bar, k_bar_r, 0.0));
    }
    segments.push(Segment::gradient(t0 + tau, horizon, -eta_bar));

    let schedule = ControlSchedule { segments, input_pulses: vec![*pulse] };
    let report = validate_schedule(&schedule, params);
    if !report.is_clean() {
        return Err(SequencerError::Validation(report));
    }

    let mut notes = vec![
        format!("stored momentum k0 = {kappa0:.4}, band half-width {band:.4}"),
        format!("grating area {area:.4} populates orders |n| <= {n_prime}"),
        format!("base echo at t = {t_echo0:.4}, order spacing {order_spacing:.4}"),
    ];
    if !trapped.is_empty() {
        notes.push(format!("orders {trapped:?} stay trapped or outside the read-out window"));
    }

    Ok(ProtocolPlan { schedule, predicted_emissions: emissions, regime, notes })
}

/// One stored band entering the grating/sweep/grating/recall tail.
struct Band {
    label: i32,
    kappa: f64,
    width_tbar: f64,
    /// Residual bands ride along but their re-emission is unwanted.
    emit: bool,
}

/// Plans the sequencing tail shared by the FIFO and reorder protocols:
/// deplete the occupied orders with a grating burst, sweep the emptied bands
/// through k = 0 under -eta (nothing is emitted at the suppressed crossing),
/// rebuild the bands with a phase-flipped burst, then recall under +eta.
/// Returns the segments from `start` on, the emission times, the horizon,
/// and audit notes.
fn sequencing_tail(
    start: f64,
    bands: &[Band],
    eta_bar: f64,
    nu_bar: f64,
    k_bar_r: f64,
) -> Result<(Vec<Segment>, Vec<(i32, f64)>, f64, Vec<String>), SequencerError> {
    let tau_s = depletion_duration(nu_bar)?;

    // The sweep must carry every occupied band past k = 0 while no first
    // order reaches it; 5.0 is a fixed extra clearance in momentum units.
    let pad = 5.0;
    let lower = bands
        .iter()
        .filter(|b| b.kappa > 0.0)
        .map(|b| b.kappa + band_half_width(eta_bar, b.width_tbar))
        .fold(0.0, f64::max)
        + pad;
    let upper = bands
        .iter()
        .map(|b| b.kappa + k_bar_r - band_half_width(eta_bar, b.width_tbar))
        .fold(f64::INFINITY, f64::min)
        - pad;
    if upper - lower < 2.0 * pad {
        return Err(SequencerError::NoSuppressionWindow { lower, upper });
    }
    let eta_t_rev = lower + 0.15 * (upper - lower) + pad;
    let t_rev = eta_t_rev / eta_bar;

    let t_emit = |kappa: f64| start + 2.0 * tau_s + 2.0 * t_rev - kappa / eta_bar;
    let mut emissions: Vec<(i32, f64)> = bands
        .iter()
        .filter(|b| b.emit)
        .map(|b| (b.label, t_emit(b.kappa)))
        .collect();
    emissions.sort_by(|a, b| a.1.total_cmp(&b.1));

    let last = emissions.last().expect("at least one band is recalled");
    let last_width = bands.iter().find(|b| b.label == last.0).unwrap().width_tbar;
    let mut horizon = last.1 + 4.0 * last_width + TAIL_PAD;
    let mut notes = vec![
        format!("depletion burst tau_s = {tau_s:.6}"),
        format!("suppressed-crossing sweep eta*T_rev = {eta_t_rev:.4} in window ({lower:.4}, {upper:.4})"),
        format!("every recalled pulse is delayed by 2(tau_s + T_rev) = {:.4}", 2.0 * (tau_s + t_rev)),
    ];
    if let Some(first_resid) = bands
        .iter()
        .filter(|b| !b.emit)
        .map(|b| t_emit(b.kappa))
        .min_by(f64::total_cmp)
    {
        let cut = last.1 + 0.5 * (first_resid - last.1);
        if cut < horizon {
            horizon = cut;
        }
        notes.push(format!(
            "residual excitation re-crosses k=0 at t = {first_resid:.4}; horizon cut to {horizon:.4}"
        ));
    }

    let segments = vec![
        Segment::grating(start, start + tau_s, nu_bar, k_bar_r, 0.0),
        Segment::gradient(start + tau_s, start + tau_s + t_rev, -eta_bar),
        Segment::grating(start + tau_s + t_rev, start + 2.0 * tau_s + t_rev, nu_bar, k_bar_r, std::f64::consts::PI),
        Segment::gradient(start + 2.0 * tau_s + t_rev, horizon, eta_bar),
    ];
    Ok((segments, emissions, horizon, notes))
}

fn regime_gate(
    n_prime: i32,
    k_bar_r: f64,
    eta_bar: f64,
    t0: f64,
    t_in: f64,
) -> Result<Regime, SequencerError> {
    let regime = classify_regime(n_prime, k_bar_r, eta_bar, t0, t_in);
    if regime != Regime::OrderHopping {
        return Err(SequencerError::RegimeMismatch {
            ladder: n_prime as f64 * k_bar_r,
            k0: eta_bar * (t0 - t_in),
        });
    }
    Ok(regime)
}

/// First-in-first-out recall: store the pulses, empty every occupied order
/// with a depletion burst, sweep the emptied bands through k = 0, rebuild
/// them with the phase-flipped burst, and recall under +eta. Each pulse
/// comes out non-time-reversed, delayed by exactly 2(tau_s + T_rev).
pub fn build_fifo_plan(
    params: &SimulationParams,
    pulses: &[InputPulse],
    eta_bar: f64,
    grating: (f64, f64),
) -> Result<ProtocolPlan, SequencerError> {
    let (nu_bar, k_bar_r) = grating;
    if eta_bar <= 0.0 {
        return Err(SequencerError::NonPositive { what: "gradient magnitude" });
    }
    check_pulses(pulses)?;
    let tau_s = depletion_duration(nu_bar)?;
    let t0 = cleared_storage_end(pulses, params.atomic_density_n, eta_bar, tau_s);
    let n_prime = (nu_bar * tau_s).ceil() as i32;
    let regime = regime_gate(n_prime, k_bar_r, eta_bar, t0, pulses[0].center_tbar)?;

    let bands: Vec<Band> = pulses
        .iter()
        .enumerate()
        .map(|(i, p)| Band {
            label: i as i32 + 1,
            kappa: eta_bar * (t0 - p.center_tbar),
            width_tbar: p.width_tbar,
            emit: true,
        })
        .collect();

    let (tail, emissions, _horizon, mut notes) =
        sequencing_tail(t0, &bands, eta_bar, nu_bar, k_bar_r)?;
    let mut segments = vec![Segment::gradient(0.0, t0, eta_bar)];
    segments.extend(tail);

    let schedule = ControlSchedule { segments, input_pulses: pulses.to_vec() };
    let report = validate_schedule(&schedule, params);
    if !report.is_clean() {
        return Err(SequencerError::Validation(report));
    }
    notes.insert(0, format!("storage ends at t0 = {t0:.4}"));

    Ok(ProtocolPlan { schedule, predicted_emissions: emissions, regime, notes })
}

/// Reordered recall 3-1-2: a plain gradient reversal releases the last
/// pulse first (time-reversed), the remaining excitation is recaptured by
/// switching the gradient back off-resonant, and a FIFO tail recalls the
/// earlier pulses in input order.
pub fn build_reorder_plan(
    params: &SimulationParams,
    pulses: &[InputPulse],
    eta_bar: f64,
    grating: (f64, f64),
) -> Result<ProtocolPlan, SequencerError> {
    let (nu_bar, k_bar_r) = grating;
    if eta_bar <= 0.0 {
        return Err(SequencerError::NonPositive { what: "gradient magnitude" });
    }
    check_pulses(pulses)?;
    if pulses.len() < 2 {
        return Err(SequencerError::BadPulses);
    }
    let tau_s = depletion_duration(nu_bar)?;
    let t0 = cleared_storage_end(pulses, params.atomic_density_n, eta_bar, tau_s);
    let n_prime = (nu_bar * tau_s).ceil() as i32;
    let regime = regime_gate(n_prime, k_bar_r, eta_bar, t0, pulses[0].center_tbar)?;

    let last = pulses.len() - 1;
    let kappa = |p: &InputPulse| eta_bar * (t0 - p.center_tbar);

    // Gap in which the sweep can stop: the last pulse's band has fully
    // crossed k = 0, the next band has not arrived.
    let b_last = band_half_width(eta_bar, pulses[last].width_tbar);
    let b_prev = band_half_width(eta_bar, pulses[last - 1].width_tbar);
    let gap_low = kappa(&pulses[last]) + b_last;
    let gap_high = kappa(&pulses[last - 1]) - b_prev;
    if gap_high <= gap_low {
        return Err(SequencerError::NoRecaptureGap {
            needed: b_last + b_prev,
            available: kappa(&pulses[last - 1]) - kappa(&pulses[last]),
        });
    }
    let eta_dt_g = 0.5 * (gap_low + gap_high);
    let t_g = t0 + eta_dt_g / eta_bar;
    let t_echo_last = 2.0 * t0 - pulses[last].center_tbar;

    let mut bands: Vec<Band> = pulses[..last]
        .iter()
        .enumerate()
        .map(|(i, p)| Band {
            label: i as i32 + 1,
            kappa: kappa(p) - eta_dt_g,
            width_tbar: p.width_tbar,
            emit: true,
        })
        .collect();
    // What the plain echo failed to emit rides along at negative k and
    // re-crosses after the recalled pulses; the horizon must cut it off.
    bands.push(Band {
        label: last as i32 + 1,
        kappa: kappa(&pulses[last]) - eta_dt_g,
        width_tbar: pulses[last].width_tbar,
        emit: false,
    });

    let (tail, mut emissions, _horizon, mut notes) =
        sequencing_tail(t_g, &bands, eta_bar, nu_bar, k_bar_r)?;
    let mut segments =
        vec![Segment::gradient(0.0, t0, eta_bar), Segment::gradient(t0, t_g, -eta_bar)];
    segments.extend(tail);

    emissions.push((last as i32 + 1, t_echo_last));
    emissions.sort_by(|a, b| a.1.total_cmp(&b.1));

    let schedule = ControlSchedule { segments, input_pulses: pulses.to_vec() };
    let report = validate_schedule(&schedule, params);
    if !report.is_clean() {
        return Err(SequencerError::Validation(report));
    }
    notes.insert(0, format!("plain echo of the last pulse at t = {t_echo_last:.4} (time-reversed)"));
    notes.insert(
        1,
        format!("recapture at t_g = {t_g:.4}, sweep window eta*dt in ({gap_low:.4}, {gap_high:.4})"),
    );

    Ok(ProtocolPlan { schedule, predicted_emissions: emissions, regime, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::bessel_jn;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn seq_params() -> SimulationParams {
        SimulationParams {
            atomic_density_n: 4.269,
            sample_length_lbar: 240.0 * 2.0 * std::f64::consts::PI / 495.0,
            grid_points_z: 4096,
            time_step_dtbar: 1e-3,
            record_stride: 20,
            snapshot_stride: 0,
        }
    }

    fn tof_params() -> SimulationParams {
        SimulationParams {
            atomic_density_n: 7.756,
            sample_length_lbar: 24.0 * 2.0 * std::f64::consts::PI / 150.0,
            grid_points_z: 2048,
            time_step_dtbar: 1e-3,
            record_stride: 20,
            snapshot_stride: 0,
        }
    }

    fn gauss(center: f64, width: f64, amp: f64) -> InputPulse {
        InputPulse { center_tbar: center, width_tbar: width, amplitude: Complex64::new(amp, 0.0) }
    }

    #[test]
    fn regime_boundary_counts_as_time_of_flight() {
        // n' k_R == k0 exactly.
        assert_eq!(classify_regime(2, 150.0, 30.0, 11.5, 1.5), Regime::TimeOfFlight);
        assert_eq!(classify_regime(2, 150.1, 30.0, 11.5, 1.5), Regime::OrderHopping);
    }

    #[test]
    fn narrow_ladder_with_long_storage_is_time_of_flight() {
        // k0 = 70 * 13.5 = 945 dwarfs two orders of 150.
        assert_eq!(classify_regime(2, 150.0, 70.0, 15.0, 1.5), Regime::TimeOfFlight);
        // Trading gradient for grating momentum (x3.3 both ways) flips it.
        assert_eq!(classify_regime(2, 495.0, 70.0 / 3.3, 15.0, 1.5), Regime::OrderHopping);
    }

    #[test]
    fn emission_times_form_a_progression() {
        assert_eq!(predict_emission_times(29.5, 150.0, 70.0, &[0]), vec![(0, 29.5)]);
        let times = predict_emission_times(29.5, 150.0, 70.0, &[-1, 0, 1, 2]);
        let spacing = 150.0 / 70.0;
        for (i, (n, t)) in times.iter().enumerate() {
            assert_eq!(*n, i as i32 - 1);
            assert_relative_eq!(*t, 29.5 + (*n as f64) * spacing, max_relative = 1e-12);
        }
    }

    #[test]
    fn depletion_time_scales_inversely_with_amplitude() {
        assert_relative_eq!(depletion_duration(1.0).unwrap(), 2.4048, max_relative = 1e-4);
        assert_relative_eq!(depletion_duration(2.0).unwrap(), 1.2024, max_relative = 1e-4);
        assert_eq!(
            depletion_duration(0.0),
            Err(SequencerError::NonPositive { what: "grating amplitude" })
        );
    }

    #[test]
    fn zero_grating_duration_degenerates_to_a_plain_echo() {
        let pulse = gauss(1.5, 0.3, 0.25);
        let plan = build_tof_plan(&tof_params(), &pulse, 70.0, 15.0, 0.0, (2.0, 150.0)).unwrap();
        assert_eq!(plan.schedule.segments.len(), 2);
        assert_eq!(plan.predicted_emissions.len(), 1);
        let (n, t) = plan.predicted_emissions[0];
        assert_eq!(n, 0);
        assert_relative_eq!(t, 28.5, max_relative = 1e-12); // 2*15 - 1.5
        assert_eq!(plan.regime, Regime::TimeOfFlight);
    }

    #[test]
    fn read_out_plan_fans_out_the_orders() {
        let pulse = gauss(1.5, 0.3, 0.25);
        let plan = build_tof_plan(&tof_params(), &pulse, 70.0, 15.0, 1.0, (2.0, 150.0)).unwrap();
        assert_eq!(plan.regime, Regime::TimeOfFlight);
        assert_eq!(plan.schedule.segments.len(), 3);
        // Orders -2..2 all sit on the positive conveyor (k0 = 945).
        assert_eq!(plan.predicted_emissions.len(), 5);
        let spacing = 150.0 / 70.0;
        for w in plan.predicted_emissions.windows(2) {
            assert_relative_eq!(w[1].1 - w[0].1, spacing, max_relative = 1e-9);
        }
        let base = plan.predicted_emissions.iter().find(|(n, _)| *n == 0).unwrap().1;
        assert_relative_eq!(base, 29.5, max_relative = 1e-12);
        assert!(validate_schedule(&plan.schedule, &tof_params()).is_clean());
    }

    #[test]
    fn order_hopping_read_out_keeps_higher_orders_trapped() {
        // Same product eta*k_R budget, traded 3.3x toward the grating.
        let params = SimulationParams {
            atomic_density_n: 4.269,
            sample_length_lbar: 120.0 * 2.0 * std::f64::consts::PI / 495.0,
            grid_points_z: 2048,
            time_step_dtbar: 1e-3,
            record_stride: 20,
            snapshot_stride: 0,
        };
        let pulse = gauss(1.5, 0.3, 0.25);
        let plan = build_tof_plan(&params, &pulse, 70.0 / 3.3, 15.0, 1.0, (2.0, 495.0)).unwrap();
        assert_eq!(plan.regime, Regime::OrderHopping);
        assert_eq!(plan.predicted_emissions.len(), 1);
        assert_eq!(plan.predicted_emissions[0].0, 0);
        assert!(plan.notes.iter().any(|n| n.contains("trapped")));
    }

    #[test]
    fn fifo_keeps_input_order_with_uniform_delay() {
        let pulses =
            vec![gauss(1.5, 0.3, 0.2), gauss(3.7, 0.3, 0.2), gauss(5.9, 0.3, 0.2)];
        let plan = build_fifo_plan(&seq_params(), &pulses, 21.212, (2.0, 495.0)).unwrap();
        assert_eq!(plan.regime, Regime::OrderHopping);
        assert_eq!(plan.schedule.segments.len(), 5);
        let labels: Vec<i32> = plan.predicted_emissions.iter().map(|e| e.0).collect();
        assert_eq!(labels, vec![1, 2, 3]);
        // Uniform delay: output spacing equals input spacing.
        let d01 = plan.predicted_emissions[1].1 - plan.predicted_emissions[0].1;
        let d12 = plan.predicted_emissions[2].1 - plan.predicted_emissions[1].1;
        assert_relative_eq!(d01, 2.2, max_relative = 1e-9);
        assert_relative_eq!(d12, 2.2, max_relative = 1e-9);
        // The depletion bursts really sit at the Bessel node.
        let grating_segs: Vec<&Segment> =
            plan.schedule.segments.iter().filter(|s| s.grating_nu_bar > 0.0).collect();
        assert_eq!(grating_segs.len(), 2);
        for seg in grating_segs {
            assert_abs_diff_eq!(bessel_jn(0, 2.0 * seg.duration()), 0.0, epsilon = 1e-9);
        }
        assert!(validate_schedule(&plan.schedule, &seq_params()).is_clean());
    }

    #[test]
    fn fifo_of_one_is_a_delayed_copy() {
        let pulses = vec![gauss(1.5, 0.3, 0.2)];
        let plan = build_fifo_plan(&seq_params(), &pulses, 21.212, (2.0, 495.0)).unwrap();
        assert_eq!(plan.predicted_emissions.len(), 1);
        assert!(plan.predicted_emissions[0].1 > plan.schedule.segments[0].t_end);
    }

    #[test]
    fn fifo_refuses_time_of_flight_parameters() {
        // Strong gradient, modest grating momentum: the ladder cannot clear
        // the stored band.
        let pulses =
            vec![gauss(1.5, 0.3, 0.2), gauss(3.7, 0.3, 0.2), gauss(5.9, 0.3, 0.2)];
        let err = build_fifo_plan(&tof_params(), &pulses, 70.0, (2.0, 150.0)).unwrap_err();
        assert!(
            matches!(err, SequencerError::RegimeMismatch { .. })
                || matches!(err, SequencerError::NoSuppressionWindow { .. }),
            "got {err:?}"
        );
    }

    #[test]
    fn reorder_emits_last_pulse_first() {
        let pulses =
            vec![gauss(1.6, 0.22, 0.2), gauss(4.4, 0.26, 0.2), gauss(7.2, 0.3, 0.2)];
        let plan = build_reorder_plan(&seq_params(), &pulses, 21.212, (2.0, 495.0)).unwrap();
        assert_eq!(plan.schedule.segments.len(), 6);
        let labels: Vec<i32> = plan.predicted_emissions.iter().map(|e| e.0).collect();
        assert_eq!(labels, vec![3, 1, 2]);
        // Plain echo of pulse 3 at 2 t0 - c3.
        let t0 = plan.schedule.segments[0].t_end;
        assert_relative_eq!(plan.predicted_emissions[0].1, 2.0 * t0 - 7.2, max_relative = 1e-9);
        // Pulses 1 and 2 keep their input spacing.
        let d = plan.predicted_emissions[2].1 - plan.predicted_emissions[1].1;
        assert_relative_eq!(d, 2.8, max_relative = 1e-9);
        assert!(plan.schedule.t_end() >= plan.predicted_emissions[2].1);
        assert!(validate_schedule(&plan.schedule, &seq_params()).is_clean());
    }

    #[test]
    fn two_pulse_reorder_swaps_them() {
        let pulses = vec![gauss(1.6, 0.25, 0.2), gauss(4.4, 0.3, 0.2)];
        let plan = build_reorder_plan(&seq_params(), &pulses, 21.212, (2.0, 495.0)).unwrap();
        let labels: Vec<i32> = plan.predicted_emissions.iter().map(|e| e.0).collect();
        assert_eq!(labels, vec![2, 1]);
    }

    #[test]
    fn reorder_needs_a_gap_between_bands() {
        // Overlapping bands: pulses too close for the widths.
        let pulses =
            vec![gauss(1.6, 0.3, 0.2), gauss(2.4, 0.3, 0.2), gauss(3.2, 0.3, 0.2)];
        let err = build_reorder_plan(&seq_params(), &pulses, 21.212, (2.0, 495.0)).unwrap_err();
        assert!(matches!(err, SequencerError::NoRecaptureGap { .. }), "got {err:?}");
    }

    #[test]
    fn unsorted_pulses_are_rejected() {
        let pulses = vec![gauss(3.7, 0.3, 0.2), gauss(1.5, 0.3, 0.2)];
        assert_eq!(
            build_fifo_plan(&seq_params(), &pulses, 21.212, (2.0, 495.0)).unwrap_err(),
            SequencerError::BadPulses
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn depletion_always_lands_on_the_bessel_node(nu in 0.05f64..40.0) {
            let tau = depletion_duration(nu).unwrap();
            prop_assert!((bessel_jn(0, nu * tau)).abs() < 1e-9);
        }

        #[test]
        fn built_fifo_plans_always_validate(
            // First center stays above 4 w_max so the leading tail fits in t > 0.
            c1 in 1.4f64..2.0,
            gap in 2.0f64..2.6,
            w in 0.25f64..0.33,
        ) {
            let pulses = vec![
                gauss(c1, w, 0.2),
                gauss(c1 + gap, w, 0.2),
                gauss(c1 + 2.0 * gap, w, 0.2),
            ];
            let plan = build_fifo_plan(&seq_params(), &pulses, 21.212, (2.0, 495.0)).unwrap();
            prop_assert!(validate_schedule(&plan.schedule, &seq_params()).is_clean());
            let labels: Vec<i32> = plan.predicted_emissions.iter().map(|e| e.0).collect();
            prop_assert_eq!(labels, vec![1, 2, 3]);
        }
    }
}
