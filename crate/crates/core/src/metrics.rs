//! Observables computed from simulation records: retrieval efficiency,
//! grating-duration sweeps, pulse detection and identification, and the
//! energy-balance diagnostic for the decay-free model.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{InputPulse, SimulationParams};
use crate::sequencer::{build_tof_plan, ProtocolPlan, SequencerError};
use crate::solver::{run, SimulationRecord, SolverError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("window ({0:.4}, {1:.4}) is outside the recorded span ({2:.4}, {3:.4})")]
    WindowOutsideSpan(f64, f64, f64, f64),
    #[error("no input energy in the record; efficiency is undefined")]
    ZeroInputEnergy,
    #[error("grating durations must be nonnegative and ascending")]
    BadTauValues,
    #[error("baseline run retrieved nothing; cannot normalize the sweep")]
    ZeroBaseline,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Sequencer(#[from] SequencerError),
}

/// Retrieval efficiency over one time window.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport {
    pub window: (f64, f64),
    pub output_energy: f64,
    /// Input energy over the whole record, not the window.
    pub input_energy: f64,
    pub efficiency: f64,
    /// Efficiency of a reference run with the grating off, when one exists.
    pub baseline_efficiency: Option<f64>,
}

/// Integral of a sampled series treated as piecewise linear, restricted to
/// [t0, t1] with partial cells interpolated.
fn windowed_trapezoid(times: &[f64], values: &[f64], t0: f64, t1: f64) -> f64 {
    let mut total = 0.0;
    for i in 1..times.len() {
        let (ta, tb) = (times[i - 1], times[i]);
        let lo = ta.max(t0);
        let hi = tb.min(t1);
        if hi <= lo {
            continue;
        }
        let width = tb - ta;
        if width <= 0.0 {
            continue;
        }
        let va = values[i - 1] + (values[i] - values[i - 1]) * (lo - ta) / width;
        let vb = values[i - 1] + (values[i] - values[i - 1]) * (hi - ta) / width;
        total += 0.5 * (va + vb) * (hi - lo);
    }
    total
}

/// Energy retrieved in `window` as a fraction of the total input energy.
pub fn retrieval_efficiency(
    record: &SimulationRecord,
    window: (f64, f64),
) -> Result<EfficiencyReport, MetricsError> {
    let span = (record.times[0], *record.times.last().unwrap());
    let tol = 1e-9 * (span.1 - span.0).abs().max(1.0);
    if window.0 < span.0 - tol || window.1 > span.1 + tol || window.1 <= window.0 {
        return Err(MetricsError::WindowOutsideSpan(window.0, window.1, span.0, span.1));
    }
    let input_energy = windowed_trapezoid(&record.times, &record.input_intensity, span.0, span.1);
    if input_energy <= 0.0 {
        return Err(MetricsError::ZeroInputEnergy);
    }
    let output_energy =
        windowed_trapezoid(&record.times, &record.output_intensity, window.0, window.1);
    Ok(EfficiencyReport {
        window,
        output_energy,
        input_energy,
        efficiency: output_energy / input_energy,
        baseline_efficiency: None,
    })
}

/// Window attributed to one predicted emission: halfway to the nearest other
/// emission (or to the span edges for a lone emission), clamped to the span.
pub fn emission_window(plan: &ProtocolPlan, which: usize, span: (f64, f64)) -> (f64, f64) {
    let t = plan.predicted_emissions[which].1;
    let mut half = f64::INFINITY;
    for (j, (_, tj)) in plan.predicted_emissions.iter().enumerate() {
        if j != which {
            half = half.min((tj - t).abs() / 2.0);
        }
    }
    if !half.is_finite() {
        half = (t - span.0).min(span.1 - t);
    }
    ((t - half).max(span.0), (t + half).min(span.1))
}

/// Inputs of a diffraction read-out, minus the grating duration being swept.
#[derive(Debug, Clone, Copy)]
pub struct SweepSetup {
    pub pulse: InputPulse,
    pub eta_bar: f64,
    pub t0: f64,
    /// (nu_bar, k_bar_r)
    pub grating: (f64, f64),
}

/// Zero-order retrieval efficiency as a function of grating duration,
/// normalized so tau = 0 maps to exactly 1. Each duration is an independent
/// simulation; points run in parallel.
pub fn efficiency_sweep(
    params: &SimulationParams,
    setup: &SweepSetup,
    tau_values: &[f64],
) -> Result<Vec<(f64, f64)>, MetricsError> {
    if tau_values.windows(2).any(|w| w[1] <= w[0]) || tau_values.first().is_some_and(|&t| t < 0.0)
    {
        return Err(MetricsError::BadTauValues);
    }

    let run_one = |tau: f64| -> Result<f64, MetricsError> {
        let plan =
            build_tof_plan(params, &setup.pulse, setup.eta_bar, setup.t0, tau, setup.grating)?;
        let record = run(params, &plan.schedule)?;
        let span = (record.times[0], *record.times.last().unwrap());
        let zero_order = plan
            .predicted_emissions
            .iter()
            .position(|(n, _)| *n == 0)
            .expect("zero order always predicted");
        let (mut lo, hi) = emission_window(&plan, zero_order, span);
        // Keep leaked (unabsorbed) input light out of the window: retrieval
        // starts with the read-out segment.
        let readout_start = plan.schedule.segments.last().unwrap().t_start;
        lo = lo.max(readout_start);
        Ok(retrieval_efficiency(&record, (lo, hi))?.efficiency)
    };

    let baseline = run_one(0.0)?;
    if baseline <= 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    let efficiencies: Vec<f64> = tau_values
        .par_iter()
        .map(|&tau| run_one(tau))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(tau_values
        .iter()
        .zip(efficiencies)
        .map(|(&tau, eff)| (tau, if tau == 0.0 { 1.0 } else { eff / baseline }))
        .collect())
}

/// One pulse found in the output intensity series.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedPulse {
    /// Peak instant, refined by parabolic interpolation through the three
    /// samples around the discrete maximum.
    pub peak_time: f64,
    pub peak_intensity: f64,
    /// Integrated |E_out|^2 over the pulse extent.
    pub energy: f64,
    /// Extent in time of the above-threshold region owned by this peak.
    pub t_start: f64,
    pub t_end: f64,
    /// Inclusive sample-index range of the extent, for envelope slicing.
    pub sample_range: (usize, usize),
}

/// Finds output pulses: local maxima of |E_out|^2 at least
/// `threshold_fraction` of the global maximum, with topographic prominence
/// at least half that bar. Both bars scale with the threshold, so raising it
/// never increases the count. Each kept peak owns the surrounding
/// above-threshold samples, split at the deepest valley between neighbors.
pub fn detect_pulses(record: &SimulationRecord, threshold_fraction: f64) -> Vec<DetectedPulse> {
    assert!(
        threshold_fraction > 0.0 && threshold_fraction < 1.0,
        "threshold fraction must be in (0, 1)"
    );
    let y = &record.output_intensity;
    let n = y.len();
    let gmax = y.iter().cloned().fold(0.0, f64::max);
    if gmax <= 0.0 || n < 3 {
        return Vec::new();
    }
    let height_bar = threshold_fraction * gmax;
    let prominence_bar = 0.5 * height_bar;

    // Local maxima; plateaus count once at their left edge.
    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..n - 1 {
        if y[i] >= height_bar && y[i] > y[i - 1] && y[i] >= y[i + 1] {
            peaks.push(i);
        }
    }

    // Topographic prominence: drop to the lowest saddle before a higher
    // sample on each side; the global maximum keeps its full height.
    let prominence = |p: usize| -> f64 {
        let mut saddle = f64::NEG_INFINITY;
        for side in [0usize, 1] {
            let mut low = y[p];
            let mut i = p;
            loop {
                if side == 0 {
                    if i == 0 {
                        break;
                    }
                    i -= 1;
                } else {
                    if i == n - 1 {
                        break;
                    }
                    i += 1;
                }
                if y[i] > y[p] {
                    saddle = saddle.max(low);
                    break;
                }
                low = low.min(y[i]);
            }
        }
        if saddle == f64::NEG_INFINITY {
            y[p]
        } else {
            y[p] - saddle
        }
    };
    peaks.retain(|&p| prominence(p) >= prominence_bar);

    // Ownership boundaries: deepest valley between adjacent kept peaks.
    let mut bounds = Vec::with_capacity(peaks.len() + 1);
    bounds.push(0usize);
    for w in peaks.windows(2) {
        let valley = (w[0]..=w[1])
            .min_by(|&a, &b| y[a].total_cmp(&y[b]))
            .unwrap();
        bounds.push(valley);
    }
    bounds.push(n - 1);

    peaks
        .iter()
        .enumerate()
        .map(|(pi, &p)| {
            let mut lo = p;
            while lo > bounds[pi] && y[lo - 1] >= height_bar && y[lo - 1] <= y[lo] {
                lo -= 1;
            }
            let mut hi = p;
            while hi < bounds[pi + 1] && y[hi + 1] >= height_bar && y[hi + 1] <= y[hi] {
                hi += 1;
            }
            // Include the sub-threshold shoulders down to the ownership
            // boundary so the energy integral captures the tails.
            while lo > bounds[pi] && y[lo - 1] <= y[lo] {
                lo -= 1;
            }
            while hi < bounds[pi + 1] && y[hi + 1] <= y[hi] {
                hi += 1;
            }

            let peak_time = parabolic_peak(&record.times, y, p);
            let energy =
                windowed_trapezoid(&record.times, y, record.times[lo], record.times[hi]);
            DetectedPulse {
                peak_time,
                peak_intensity: y[p],
                energy,
                t_start: record.times[lo],
                t_end: record.times[hi],
                sample_range: (lo, hi),
            }
        })
        .collect()
}

/// Refines a discrete maximum through the vertex of the parabola fitted to
/// the three surrounding samples.
fn parabolic_peak(times: &[f64], y: &[f64], p: usize) -> f64 {
    if p == 0 || p + 1 >= y.len() {
        return times[p];
    }
    let denom = y[p - 1] - 2.0 * y[p] + y[p + 1];
    if denom >= 0.0 {
        return times[p];
    }
    let offset = 0.5 * (y[p - 1] - y[p + 1]) / denom;
    times[p] + offset * (times[p] - times[p - 1])
}

/// Worst relative violation of energy conservation over the record:
/// max_t |in(t) - out(t) - stored(t)| / in(total), with in/out the running
/// intensity integrals. Zero for a record with no input.
pub fn energy_balance(record: &SimulationRecord) -> f64 {
    let times = &record.times;
    if times.len() < 2 {
        return 0.0;
    }
    let total_in = windowed_trapezoid(times, &record.input_intensity, times[0], *times.last().unwrap());
    if total_in <= 0.0 {
        return 0.0;
    }
    let mut cum_in = 0.0;
    let mut cum_out = 0.0;
    let mut worst: f64 = 0.0;
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        cum_in += 0.5 * (record.input_intensity[i - 1] + record.input_intensity[i]) * dt;
        cum_out += 0.5 * (record.output_intensity[i - 1] + record.output_intensity[i]) * dt;
        let stored = record.stored_energy[i] - record.stored_energy[0];
        worst = worst.max((cum_in - cum_out - stored).abs());
    }
    worst / total_in
}

/// Largest normalized cross-correlation between two sampled envelopes over
/// all integer lags. 1 means a shifted copy; returns 0 if either is empty or
/// all zero.
pub fn max_normalized_correlation(a: &[f64], b: &[f64]) -> f64 {
    let ea: f64 = a.iter().map(|x| x * x).sum();
    let eb: f64 = b.iter().map(|x| x * x).sum();
    if ea <= 0.0 || eb <= 0.0 {
        return 0.0;
    }
    let norm = (ea * eb).sqrt();
    let mut best: f64 = 0.0;
    let (na, nb) = (a.len() as i64, b.len() as i64);
    for lag in -(nb - 1)..na {
        let mut dot = 0.0;
        for j in 0..nb {
            let i = lag + j;
            if i >= 0 && i < na {
                dot += a[i as usize] * b[j as usize];
            }
        }
        best = best.max(dot / norm);
    }
    best
}
