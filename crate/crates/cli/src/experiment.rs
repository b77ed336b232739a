//! Executes a parsed configuration and writes the artifacts.
//!
//! Every run leaves `timeseries.csv`, `kmap.csv`, `spectrum.csv`, and
//! `report.txt` in the configured output directory; a sweep adds
//! `sweep.csv`. All CSV floats are printed with 17 significant digits, so a
//! round-trip through the file reproduces the exact f64 and two runs of the
//! same config produce byte-identical artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gem_core::bessel::{bessel_jn, j0_first_root};
use gem_core::kspace::{to_spectrum, PolaritonSpectrum, SpectrumError};
use gem_core::metrics::{
    detect_pulses, efficiency_sweep, emission_window, energy_balance, retrieval_efficiency,
    DetectedPulse, MetricsError, SweepSetup,
};
use gem_core::model::validate_schedule;
use gem_core::sequencer::{
    build_fifo_plan, build_reorder_plan, build_tof_plan, ProtocolPlan, SequencerError,
};
use gem_core::solver::{run, SimulationRecord, SolverError};
use thiserror::Error;

use crate::config::{ExperimentConfig, Protocol};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("planning failed: {0}")]
    Sequencer(#[from] SequencerError),
    #[error("schedule failed validation:\n{0}")]
    Validation(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ExperimentError {
    /// 1 for validation failures, 2 for numerical ones, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Sequencer(_) | ExperimentError::Validation(_) => 1,
            ExperimentError::Solver(SolverError::Validation(_)) => 1,
            ExperimentError::Solver(_) | ExperimentError::Spectrum(_) => 2,
            ExperimentError::Metrics(m) => match m {
                MetricsError::Sequencer(_) => 1,
                MetricsError::Solver(SolverError::Validation(_)) => 1,
                MetricsError::BadTauValues => 1,
                _ => 2,
            },
            ExperimentError::Io { .. } => 3,
        }
    }
}

/// What a run produced: the artifact paths, in the order written, and the
/// report text (also on disk as `report.txt`).
#[derive(Debug)]
pub struct RunSummary {
    pub artifacts: Vec<PathBuf>,
    pub report: String,
}

/// 17 significant digits: the shortest fixed format that round-trips every
/// f64 exactly.
fn full(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    fs::write(path, contents)
        .map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source })
}

/// CSV `k,re_psi,im_psi,abs2_psi`, one row per momentum bin, k ascending.
pub fn export_spectrum(spectrum: &PolaritonSpectrum, path: &Path) -> Result<(), ExperimentError> {
    let mut s = String::from("k,re_psi,im_psi,abs2_psi\n");
    for (k, psi) in spectrum.k_values.iter().zip(&spectrum.psi) {
        let _ = writeln!(s, "{},{},{},{}", full(*k), full(psi.re), full(psi.im), full(psi.norm_sqr()));
    }
    write_file(path, &s)
}

fn write_timeseries(record: &SimulationRecord, path: &Path) -> Result<(), ExperimentError> {
    let mut s = String::from("t,input_intensity,output_intensity,stored_energy\n");
    for i in 0..record.times.len() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            full(record.times[i]),
            full(record.input_intensity[i]),
            full(record.output_intensity[i]),
            full(record.stored_energy[i]),
        );
    }
    write_file(path, &s)
}

/// |Psi(k, t)|^2 over the recorded snapshots: first row the snapshot times,
/// first column the momentum axis.
fn write_kmap(record: &SimulationRecord, path: &Path) -> Result<(), ExperimentError> {
    let spectra = snapshot_spectra(record)?;
    let mut s = String::from("k");
    for sp in &spectra {
        s.push(',');
        s.push_str(&full(sp.time_tbar));
    }
    s.push('\n');
    let bins = spectra.first().map_or(0, |sp| sp.k_values.len());
    for i in 0..bins {
        s.push_str(&full(spectra[0].k_values[i]));
        for sp in &spectra {
            s.push(',');
            s.push_str(&full(sp.psi[i].norm_sqr()));
        }
        s.push('\n');
    }
    write_file(path, &s)
}

fn snapshot_spectra(record: &SimulationRecord) -> Result<Vec<PolaritonSpectrum>, ExperimentError> {
    record
        .snapshots
        .iter()
        .map(|state| to_spectrum(state, &record.params).map_err(ExperimentError::from))
        .collect()
}

/// The snapshot holding the most stored excitation (first one on ties):
/// the natural single spectrum to keep from a run.
fn densest_spectrum(record: &SimulationRecord) -> Result<PolaritonSpectrum, ExperimentError> {
    let dz = record.params.dz();
    let mut best = 0;
    let mut best_energy = f64::NEG_INFINITY;
    for (i, state) in record.snapshots.iter().enumerate() {
        let energy = state.sigma12.iter().map(|s| s.norm_sqr()).sum::<f64>() * dz;
        if energy > best_energy {
            best = i;
            best_energy = energy;
        }
    }
    Ok(to_spectrum(&record.snapshots[best], &record.params)?)
}

struct ReportInput<'a> {
    config: &'a ExperimentConfig,
    plan: Option<&'a ProtocolPlan>,
    record: &'a SimulationRecord,
    detected: &'a [DetectedPulse],
    spectrum_time: f64,
    sweep: Option<&'a SweepSection>,
}

struct SweepSection {
    points: Vec<(f64, f64)>,
    nu_bar: f64,
    fit_amplitude: f64,
    fit_r_squared: f64,
    first_null_tau: Option<f64>,
}

const DETECT_THRESHOLD: f64 = 0.05;

fn render_report(input: &ReportInput) -> Result<String, ExperimentError> {
    let ReportInput { config, plan, record, detected, spectrum_time, sweep } = input;
    let params = &record.params;
    let mut s = String::new();
    let _ = writeln!(s, "protocol: {}", config.protocol.name());
    match plan {
        Some(p) => {
            let _ = writeln!(s, "regime: {}", p.regime);
        }
        None => {
            let _ = writeln!(s, "regime: unclassified (custom schedule)");
        }
    }
    let _ = writeln!(s, "atomic density N: {:.6e}", params.atomic_density_n);
    let _ = writeln!(
        s,
        "grid: {} points, length {:.6e}, dz {:.6e}",
        params.grid_points_z,
        params.sample_length_lbar,
        params.dz()
    );
    let _ = writeln!(
        s,
        "time step: {:.6e}, record stride {}, snapshot stride {}",
        params.time_step_dtbar, params.record_stride, params.snapshot_stride
    );
    let _ = writeln!(s, "segments: {}", record.schedule.segments.len());
    let _ = writeln!(s, "input pulses: {}", record.schedule.input_pulses.len());

    if let Some(p) = plan {
        if !p.notes.is_empty() {
            let _ = writeln!(s, "planner notes:");
            for note in &p.notes {
                let _ = writeln!(s, "  - {note}");
            }
        }
        let _ = writeln!(s, "predicted emissions:");
        for (label, t) in &p.predicted_emissions {
            let _ = writeln!(s, "  emission {label}: t = {t:.6e}");
        }
    } else {
        let _ = writeln!(s, "predicted emissions: none (custom schedule)");
    }

    let _ = writeln!(
        s,
        "detected output pulses (threshold {DETECT_THRESHOLD} of the peak): {}",
        detected.len()
    );
    for (i, d) in detected.iter().enumerate() {
        let _ = writeln!(
            s,
            "  #{}: peak t = {:.6e}, peak intensity = {:.6e}, energy = {:.6e}",
            i + 1,
            d.peak_time,
            d.peak_intensity,
            d.energy
        );
    }

    if let Some(p) = plan {
        if !p.predicted_emissions.is_empty() && !detected.is_empty() {
            let _ = writeln!(s, "predicted vs observed:");
            for (label, t) in &p.predicted_emissions {
                let nearest = detected
                    .iter()
                    .map(|d| d.peak_time)
                    .min_by(|a, b| (a - t).abs().partial_cmp(&(b - t).abs()).unwrap())
                    .unwrap();
                let _ = writeln!(
                    s,
                    "  emission {label}: predicted {:.6e}, nearest peak {:.6e}, delta {:+.3e}",
                    t,
                    nearest,
                    nearest - t
                );
            }
        }

        let span = (record.times[0], *record.times.last().unwrap());
        let storage_end = record.schedule.segments[0].t_end;
        let _ = writeln!(s, "emission efficiencies:");
        for (i, (label, _)) in p.predicted_emissions.iter().enumerate() {
            let (lo, hi) = emission_window(p, i, span);
            let window = (lo.max(storage_end), hi);
            let report = retrieval_efficiency(record, window)?;
            let _ = writeln!(
                s,
                "  emission {label}: window [{:.6e}, {:.6e}], efficiency {:.6e}",
                window.0, window.1, report.efficiency
            );
        }
    }

    // Custom schedules can legitimately have no input pulses or nothing
    // after the first segment; efficiencies are undefined there, not errors.
    let span = (record.times[0], *record.times.last().unwrap());
    let after_storage = record.schedule.segments[0].t_end;
    if after_storage >= span.1 {
        let _ = writeln!(s, "total efficiency: undefined (single-segment schedule)");
    } else {
        match retrieval_efficiency(record, (after_storage, span.1)) {
            Ok(total) => {
                let _ = writeln!(s, "input energy: {:.6e}", total.input_energy);
                let _ = writeln!(s, "output energy after storage: {:.6e}", total.output_energy);
                let _ = writeln!(s, "total efficiency after storage: {:.6e}", total.efficiency);
            }
            Err(MetricsError::ZeroInputEnergy) => {
                let _ = writeln!(s, "input energy: 0; efficiencies undefined");
            }
            Err(e) => return Err(e.into()),
        }
    }
    let _ = writeln!(s, "energy balance violation: {:.6e}", energy_balance(record));
    let _ = writeln!(s, "spectrum.csv: snapshot at t = {spectrum_time:.6e}");

    if let Some(sw) = sweep {
        let _ = writeln!(s, "sweep: {} durations, nu_bar = {:.6e}", sw.points.len(), sw.nu_bar);
        let _ = writeln!(
            s,
            "fit to amplitude * J0(nu_bar tau)^2: amplitude {:.6e}, R^2 {:.6e}",
            sw.fit_amplitude, sw.fit_r_squared
        );
        match sw.first_null_tau {
            Some(tau) => {
                let _ = writeln!(
                    s,
                    "first efficiency null: tau = {:.6e} (nu_bar tau = {:.6e}, J0 root at {:.6e})",
                    tau,
                    sw.nu_bar * tau,
                    j0_first_root()
                );
            }
            None => {
                let _ = writeln!(s, "first efficiency null: not bracketed by the scanned range");
            }
        }
    }

    Ok(s)
}

/// Runs the configured experiment and writes its artifacts into
/// `config.output_dir` (created if needed).
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, ExperimentError> {
    fs::create_dir_all(&config.output_dir)
        .map_err(|source| ExperimentError::Io { path: config.output_dir.clone(), source })?;
    match &config.protocol {
        Protocol::Sweep { setup, tau_values } => run_sweep(config, setup, tau_values),
        _ => run_single(config),
    }
}

/// Plan for everything except sweeps and custom schedules.
fn build_plan(config: &ExperimentConfig) -> Result<Option<ProtocolPlan>, ExperimentError> {
    let params = &config.params;
    let plan = match &config.protocol {
        Protocol::PlainGem { pulse, eta_bar, t0 } => {
            Some(build_tof_plan(params, pulse, *eta_bar, *t0, 0.0, (0.0, 0.0))?)
        }
        Protocol::TofDiffraction { pulse, eta_bar, t0, tau, grating } => {
            Some(build_tof_plan(params, pulse, *eta_bar, *t0, *tau, *grating)?)
        }
        Protocol::Fifo { pulses, eta_bar, grating } => {
            Some(build_fifo_plan(params, pulses, *eta_bar, *grating)?)
        }
        Protocol::Reorder { pulses, eta_bar, grating } => {
            Some(build_reorder_plan(params, pulses, *eta_bar, *grating)?)
        }
        Protocol::Sweep { .. } | Protocol::CustomSchedule { .. } => None,
    };
    Ok(plan)
}

fn run_single(config: &ExperimentConfig) -> Result<RunSummary, ExperimentError> {
    let plan = build_plan(config)?;
    let schedule = match (&plan, &config.protocol) {
        (Some(p), _) => p.schedule.clone(),
        (None, Protocol::CustomSchedule { schedule }) => {
            let report = validate_schedule(schedule, &config.params);
            if !report.is_clean() {
                return Err(ExperimentError::Validation(report.to_string()));
            }
            schedule.clone()
        }
        _ => unreachable!("sweeps take the other path"),
    };
    let record = run(&config.params, &schedule)?;
    write_artifacts(config, plan.as_ref(), &record, None)
}

fn write_artifacts(
    config: &ExperimentConfig,
    plan: Option<&ProtocolPlan>,
    record: &SimulationRecord,
    sweep: Option<&SweepSection>,
) -> Result<RunSummary, ExperimentError> {
    let dir = &config.output_dir;
    let mut artifacts = Vec::new();

    let path = dir.join("timeseries.csv");
    write_timeseries(record, &path)?;
    artifacts.push(path);

    let path = dir.join("kmap.csv");
    write_kmap(record, &path)?;
    artifacts.push(path);

    let spectrum = densest_spectrum(record)?;
    let path = dir.join("spectrum.csv");
    export_spectrum(&spectrum, &path)?;
    artifacts.push(path);

    if let Some(sw) = sweep {
        let mut s = String::from("tau,efficiency_normalized\n");
        for (tau, eff) in &sw.points {
            let _ = writeln!(s, "{},{}", full(*tau), full(*eff));
        }
        let path = dir.join("sweep.csv");
        write_file(&path, &s)?;
        artifacts.push(path);
    }

    let detected = detect_pulses(record, DETECT_THRESHOLD);
    let report = render_report(&ReportInput {
        config,
        plan,
        record,
        detected: &detected,
        spectrum_time: spectrum.time_tbar,
        sweep,
    })?;
    let path = dir.join("report.txt");
    write_file(&path, &report)?;
    artifacts.push(path);

    Ok(RunSummary { artifacts, report })
}

/// Least-squares scale of `model` onto `y` and the resulting R^2.
fn scaled_fit(model: &[f64], y: &[f64]) -> (f64, f64) {
    let mm: f64 = model.iter().map(|m| m * m).sum();
    let my: f64 = model.iter().zip(y).map(|(m, v)| m * v).sum();
    let a = my / mm;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = model.iter().zip(y).map(|(m, v)| (v - a * m).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (a, r_squared)
}

/// Abscissa of the parabola through three points, for refining a sampled
/// minimum.
fn parabolic_min(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d21 = (y[1] - y[0]) / (x[1] - x[0]);
    let d32 = (y[2] - y[1]) / (x[2] - x[1]);
    let curv = (d32 - d21) / (x[2] - x[0]);
    if curv <= 0.0 {
        return x[1];
    }
    0.5 * (x[0] + x[1] - d21 / curv)
}

fn first_interior_minimum(points: &[(f64, f64)]) -> Option<f64> {
    for i in 1..points.len() - 1 {
        if points[i].1 <= points[i - 1].1 && points[i].1 < points[i + 1].1 {
            let x = [points[i - 1].0, points[i].0, points[i + 1].0];
            let y = [points[i - 1].1, points[i].1, points[i + 1].1];
            return Some(parabolic_min(x, y));
        }
    }
    None
}

fn run_sweep(
    config: &ExperimentConfig,
    setup: &SweepSetup,
    tau_values: &[f64],
) -> Result<RunSummary, ExperimentError> {
    let points = efficiency_sweep(&config.params, setup, tau_values)?;

    let nu_bar = setup.grating.0;
    let model: Vec<f64> = points.iter().map(|(tau, _)| bessel_jn(0, nu_bar * tau).powi(2)).collect();
    let y: Vec<f64> = points.iter().map(|&(_, eff)| eff).collect();
    let (fit_amplitude, fit_r_squared) = scaled_fit(&model, &y);
    let section = SweepSection {
        first_null_tau: first_interior_minimum(&points),
        points,
        nu_bar,
        fit_amplitude,
        fit_r_squared,
    };

    // The time series and momentum map come from a run at the first scanned
    // duration, re-simulated here so the sweep artifacts stand on their own.
    let plan = build_tof_plan(
        &config.params,
        &setup.pulse,
        setup.eta_bar,
        setup.t0,
        tau_values[0],
        setup.grating,
    )?;
    let record = run(&config.params, &plan.schedule)?;
    write_artifacts(config, Some(&plan), &record, Some(&section))
}
