//! Flat `key = value` experiment configurations.
//!
//! One key per line, `#` starts a comment, blank lines are skipped. All
//! physical values are dimensionless (the model's units). Unknown keys are
//! rejected, as are known keys that the selected protocol does not use, both
//! with the offending line number. Relative paths in a config resolve
//! against the directory the config file lives in.
//!
//! Keys shared by every protocol:
//!
//! ```text
//! protocol        = plain_gem | tof_diffraction | sweep | fifo | reorder | custom_schedule
//! output_dir      = artifacts directory (default: out)
//! grid_points     = spatial grid size (default: 2048)
//! sample_length   = box length; or grating_periods = <int> to fit that many
//!                   grating wavelengths exactly (keeps k_bar_r commensurate
//!                   with the momentum grid)
//! dt              = solver time step (default: 1e-3)
//! record_stride   = steps per recorded sample (default: 20)
//! snapshot_stride = samples per interior field snapshot, 0 = boundaries only
//! atomic_density  = N; or optical_depth = d with N derived from d and eta_bar
//! ```
//!
//! Protocol keys: `eta_bar` and `t0` for the single-pulse protocols, `tau`
//! for `tof_diffraction`, the grating pair `nu_bar`/`k_bar_r` wherever a
//! grating acts, `pulse = center, width, amplitude` (repeatable for the
//! train protocols), `tau_start`/`tau_stop`/`tau_points` for `sweep`, and
//! `schedule_file` for `custom_schedule` (rows `t_start t_end eta_bar
//! nu_bar k_bar_r phase`, contiguous in time).

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use gem_core::metrics::SweepSetup;
use gem_core::model::{
    density_for_depth, ControlSchedule, InputPulse, Segment, SimulationParams,
};
use gem_core::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Unreadable { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` already set on line {first}")]
    Duplicate { line: usize, first: usize, key: String },
    #[error("line {line}: `{key}` does not apply to protocol `{protocol}`")]
    Inapplicable { line: usize, key: String, protocol: String },
    #[error("line {line}: bad value for `{key}`: {reason}")]
    BadValue { line: usize, key: String, reason: String },
    #[error("missing required keys: {keys}")]
    Missing { keys: String },
    #[error("cannot read schedule file {path}: {source}")]
    ScheduleUnreadable { path: PathBuf, source: std::io::Error },
    #[error("schedule line {line}: {reason}")]
    ScheduleLine { line: usize, reason: String },
    #[error(
        "schedule line {line}: segment starts at {t_start} but the previous one ends at \
         {prev_end} (gap {gap:+e}); segments must be contiguous, without gaps or overlap"
    )]
    ScheduleContiguity { line: usize, t_start: f64, prev_end: f64, gap: f64 },
}

impl ConfigError {
    /// Process exit code this error maps to: 3 for unreadable files, 1 for
    /// everything else (the config itself is at fault).
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Unreadable { .. } | ConfigError::ScheduleUnreadable { .. } => 3,
            _ => 1,
        }
    }
}

/// What to run. Exactly one protocol per config.
#[derive(Debug, Clone)]
pub enum Protocol {
    /// Store one pulse, reverse the gradient, collect the bare echo.
    PlainGem { pulse: InputPulse, eta_bar: f64, t0: f64 },
    /// Store, apply the grating alone for `tau`, read out.
    TofDiffraction { pulse: InputPulse, eta_bar: f64, t0: f64, tau: f64, grating: (f64, f64) },
    /// Zero-order efficiency versus grating duration.
    Sweep { setup: SweepSetup, tau_values: Vec<f64> },
    /// Recall a stored train in arrival order.
    Fifo { pulses: Vec<InputPulse>, eta_bar: f64, grating: (f64, f64) },
    /// Recall the last stored pulse first, then the rest in order.
    Reorder { pulses: Vec<InputPulse>, eta_bar: f64, grating: (f64, f64) },
    /// Run segments straight from a schedule file.
    CustomSchedule { schedule: ControlSchedule },
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::PlainGem { .. } => "plain_gem",
            Protocol::TofDiffraction { .. } => "tof_diffraction",
            Protocol::Sweep { .. } => "sweep",
            Protocol::Fifo { .. } => "fifo",
            Protocol::Reorder { .. } => "reorder",
            Protocol::CustomSchedule { .. } => "custom_schedule",
        }
    }
}

/// A parsed configuration, ready for `run_experiment`.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub params: SimulationParams,
    pub protocol: Protocol,
    pub output_dir: PathBuf,
}

const KNOWN_KEYS: [&str; 20] = [
    "protocol",
    "output_dir",
    "grid_points",
    "sample_length",
    "grating_periods",
    "dt",
    "record_stride",
    "snapshot_stride",
    "atomic_density",
    "optical_depth",
    "eta_bar",
    "t0",
    "tau",
    "nu_bar",
    "k_bar_r",
    "pulse",
    "tau_start",
    "tau_stop",
    "tau_points",
    "schedule_file",
];

const PROTOCOL_NAMES: &str =
    "plain_gem, tof_diffraction, sweep, fifo, reorder, custom_schedule";

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

fn parse_lines(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let code = raw.split('#').next().unwrap_or("").trim();
        if code.is_empty() {
            continue;
        }
        let Some((key, value)) = code.split_once('=') else {
            return Err(ConfigError::Syntax { line, text: code.to_string() });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line, text: code.to_string() });
        }
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey { line, key: key.to_string() });
        }
        entries.push(Entry { line, key: key.to_string(), value: value.to_string() });
    }
    Ok(entries)
}

/// Entries with take-once bookkeeping; whatever is left over at the end did
/// not apply to the selected protocol.
struct Fields {
    entries: Vec<Entry>,
    taken: Vec<bool>,
}

impl Fields {
    fn new(entries: Vec<Entry>) -> Self {
        let taken = vec![false; entries.len()];
        Fields { entries, taken }
    }

    fn take(&mut self, key: &str) -> Result<Option<Entry>, ConfigError> {
        let mut found: Option<usize> = None;
        for (i, e) in self.entries.iter().enumerate() {
            if e.key == key {
                if let Some(first) = found {
                    return Err(ConfigError::Duplicate {
                        line: e.line,
                        first: self.entries[first].line,
                        key: key.to_string(),
                    });
                }
                found = Some(i);
            }
        }
        Ok(found.map(|i| {
            self.taken[i] = true;
            self.entries[i].clone()
        }))
    }

    fn take_all(&mut self, key: &str) -> Vec<Entry> {
        let mut out = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.key == key {
                self.taken[i] = true;
                out.push(e.clone());
            }
        }
        out
    }

    fn leftover(&self) -> Option<&Entry> {
        self.entries.iter().zip(&self.taken).find(|(_, &t)| !t).map(|(e, _)| e)
    }
}

fn float(e: &Entry) -> Result<f64, ConfigError> {
    match e.value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ConfigError::BadValue {
            line: e.line,
            key: e.key.clone(),
            reason: format!("`{}` is not a finite number", e.value),
        }),
    }
}

fn positive(e: &Entry) -> Result<f64, ConfigError> {
    let v = float(e)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::BadValue {
            line: e.line,
            key: e.key.clone(),
            reason: "must be positive".to_string(),
        })
    }
}

fn integer(e: &Entry) -> Result<usize, ConfigError> {
    e.value.parse::<usize>().map_err(|_| ConfigError::BadValue {
        line: e.line,
        key: e.key.clone(),
        reason: format!("`{}` is not a nonnegative integer", e.value),
    })
}

/// `pulse = center, width, amplitude` with a real amplitude.
fn pulse(e: &Entry) -> Result<InputPulse, ConfigError> {
    let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(ConfigError::BadValue {
            line: e.line,
            key: e.key.clone(),
            reason: "expected `center, width, amplitude`".to_string(),
        });
    }
    let mut nums = [0.0; 3];
    for (slot, part) in nums.iter_mut().zip(&parts) {
        *slot = match part.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                return Err(ConfigError::BadValue {
                    line: e.line,
                    key: e.key.clone(),
                    reason: format!("`{part}` is not a finite number"),
                })
            }
        };
    }
    if nums[1] <= 0.0 {
        return Err(ConfigError::BadValue {
            line: e.line,
            key: e.key.clone(),
            reason: "pulse width must be positive".to_string(),
        });
    }
    Ok(InputPulse {
        center_tbar: nums[0],
        width_tbar: nums[1],
        amplitude: Complex64::new(nums[2], 0.0),
    })
}

fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    let step = (stop - start) / (points - 1) as f64;
    (0..points).map(|i| start + i as f64 * step).collect()
}

/// Reads and parses a config file. See the module docs for the format.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Unreadable { path: path.to_path_buf(), source })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base)
}

/// As [`load_config`], with the text already in hand. Relative paths in the
/// config resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ExperimentConfig, ConfigError> {
    let mut fields = Fields::new(parse_lines(text)?);
    let mut missing: Vec<&str> = Vec::new();

    let Some(proto_entry) = fields.take("protocol")? else {
        return Err(ConfigError::Missing { keys: "protocol".to_string() });
    };
    let proto_name = proto_entry.value.clone();
    if !PROTOCOL_NAMES.split(", ").any(|p| p == proto_name) {
        return Err(ConfigError::BadValue {
            line: proto_entry.line,
            key: "protocol".to_string(),
            reason: format!("`{proto_name}` is not one of {PROTOCOL_NAMES}"),
        });
    }

    let output_dir = match fields.take("output_dir")? {
        Some(e) => base_dir.join(&e.value),
        None => base_dir.join("out"),
    };
    let grid_points = fields.take("grid_points")?.as_ref().map(integer).transpose()?.unwrap_or(2048);
    let dt = fields.take("dt")?.as_ref().map(positive).transpose()?.unwrap_or(1e-3);
    let record_stride =
        fields.take("record_stride")?.as_ref().map(integer).transpose()?.unwrap_or(20);
    let snapshot_stride =
        fields.take("snapshot_stride")?.as_ref().map(integer).transpose()?.unwrap_or(0);

    // Protocol-scoped scalars, taken up front so duplicates are caught even
    // on keys the protocol later ignores; unused ones surface as leftovers.
    let eta_entry = match proto_name.as_str() {
        "custom_schedule" => None, // only legitimate alongside optical_depth; see below
        _ => fields.take("eta_bar")?,
    };
    let eta_bar = eta_entry.as_ref().map(positive).transpose()?;

    let nu_entry = fields.take("nu_bar")?;
    let kr_entry = fields.take("k_bar_r")?;
    let grating = match proto_name.as_str() {
        "tof_diffraction" | "sweep" | "fifo" | "reorder" => {
            let nu = match &nu_entry {
                Some(e) => Some(positive(e)?),
                None => {
                    missing.push("nu_bar");
                    None
                }
            };
            let kr = match &kr_entry {
                Some(e) => Some(positive(e)?),
                None => {
                    missing.push("k_bar_r");
                    None
                }
            };
            nu.zip(kr)
        }
        _ => {
            // Leave the entries untaken conceptually: push them back as
            // leftovers by reporting them inapplicable right away.
            if let Some(e) = nu_entry.or(kr_entry) {
                return Err(ConfigError::Inapplicable {
                    line: e.line,
                    key: e.key,
                    protocol: proto_name,
                });
            }
            None
        }
    };

    let density_entry = fields.take("atomic_density")?;
    let depth_entry = fields.take("optical_depth")?;
    let density = match (&density_entry, &depth_entry) {
        (Some(_), Some(o)) => {
            return Err(ConfigError::BadValue {
                line: o.line,
                key: o.key.clone(),
                reason: "give either atomic_density or optical_depth, not both".to_string(),
            })
        }
        (Some(d), None) => {
            let v = float(d)?;
            if v < 0.0 {
                return Err(ConfigError::BadValue {
                    line: d.line,
                    key: d.key.clone(),
                    reason: "must be nonnegative".to_string(),
                });
            }
            v
        }
        (None, Some(o)) => {
            let d = positive(o)?;
            // The depth is the first-class group; N = d eta / (2 pi).
            let eta = match proto_name.as_str() {
                "custom_schedule" => fields.take("eta_bar")?.as_ref().map(positive).transpose()?,
                _ => eta_bar,
            };
            match eta {
                Some(eta) => density_for_depth(d, eta),
                None => {
                    return Err(ConfigError::BadValue {
                        line: o.line,
                        key: o.key.clone(),
                        reason: "optical_depth needs eta_bar to derive the density".to_string(),
                    })
                }
            }
        }
        (None, None) => {
            missing.push("atomic_density or optical_depth");
            0.0
        }
    };

    let length_entry = fields.take("sample_length")?;
    let periods_entry = fields.take("grating_periods")?;
    let sample_length = match (&length_entry, &periods_entry) {
        (Some(_), Some(p)) => {
            return Err(ConfigError::BadValue {
                line: p.line,
                key: p.key.clone(),
                reason: "give either sample_length or grating_periods, not both".to_string(),
            })
        }
        (Some(l), None) => positive(l)?,
        (None, Some(p)) => {
            let n = integer(p)?.max(1);
            match grating {
                Some((_, kr)) => n as f64 * TAU / kr,
                None => {
                    return Err(ConfigError::BadValue {
                        line: p.line,
                        key: p.key.clone(),
                        reason: "grating_periods needs a protocol with k_bar_r".to_string(),
                    })
                }
            }
        }
        (None, None) => {
            missing.push("sample_length or grating_periods");
            1.0
        }
    };

    let pulses: Vec<InputPulse> = {
        let entries = fields.take_all("pulse");
        let mut out = Vec::with_capacity(entries.len());
        match proto_name.as_str() {
            "plain_gem" | "tof_diffraction" | "sweep" if entries.len() > 1 => {
                return Err(ConfigError::BadValue {
                    line: entries[1].line,
                    key: "pulse".to_string(),
                    reason: format!("protocol `{proto_name}` stores exactly one pulse"),
                });
            }
            _ => {}
        }
        for e in &entries {
            out.push(pulse(e)?);
        }
        out
    };

    fn need(
        entry: Option<Entry>,
        name: &'static str,
        missing: &mut Vec<&'static str>,
    ) -> Option<Entry> {
        if entry.is_none() {
            missing.push(name);
        }
        entry
    }

    let protocol = match proto_name.as_str() {
        "plain_gem" | "tof_diffraction" | "sweep" => {
            let t0_entry = need(fields.take("t0")?, "t0", &mut missing);
            let t0 = t0_entry.as_ref().map(positive).transpose()?;
            if pulses.is_empty() {
                missing.push("pulse");
            }
            if eta_bar.is_none() {
                missing.push("eta_bar");
            }
            match proto_name.as_str() {
                "plain_gem" => Protocol::PlainGem {
                    pulse: pulses.first().copied().unwrap_or(ZERO_PULSE),
                    eta_bar: eta_bar.unwrap_or(1.0),
                    t0: t0.unwrap_or(1.0),
                },
                "tof_diffraction" => {
                    let tau_entry = need(fields.take("tau")?, "tau", &mut missing);
                    let tau = match &tau_entry {
                        Some(e) => {
                            let v = float(e)?;
                            if v < 0.0 {
                                return Err(ConfigError::BadValue {
                                    line: e.line,
                                    key: e.key.clone(),
                                    reason: "must be nonnegative".to_string(),
                                });
                            }
                            v
                        }
                        None => 0.0,
                    };
                    Protocol::TofDiffraction {
                        pulse: pulses.first().copied().unwrap_or(ZERO_PULSE),
                        eta_bar: eta_bar.unwrap_or(1.0),
                        t0: t0.unwrap_or(1.0),
                        tau,
                        grating: grating.unwrap_or((1.0, 1.0)),
                    }
                }
                _ => {
                    let start_entry = need(fields.take("tau_start")?, "tau_start", &mut missing);
                    let stop_entry = need(fields.take("tau_stop")?, "tau_stop", &mut missing);
                    let points_entry = need(fields.take("tau_points")?, "tau_points", &mut missing);
                    let start = match &start_entry {
                        Some(e) => {
                            let v = float(e)?;
                            if v < 0.0 {
                                return Err(ConfigError::BadValue {
                                    line: e.line,
                                    key: e.key.clone(),
                                    reason: "must be nonnegative".to_string(),
                                });
                            }
                            v
                        }
                        None => 0.0,
                    };
                    let stop = stop_entry.as_ref().map(float).transpose()?.unwrap_or(1.0);
                    let points = points_entry.as_ref().map(integer).transpose()?.unwrap_or(2);
                    if let Some(e) = &points_entry {
                        if points < 2 {
                            return Err(ConfigError::BadValue {
                                line: e.line,
                                key: e.key.clone(),
                                reason: "a sweep needs at least 2 points".to_string(),
                            });
                        }
                    }
                    if let Some(e) = &stop_entry {
                        if stop <= start {
                            return Err(ConfigError::BadValue {
                                line: e.line,
                                key: e.key.clone(),
                                reason: "tau_stop must exceed tau_start".to_string(),
                            });
                        }
                    }
                    Protocol::Sweep {
                        setup: SweepSetup {
                            pulse: pulses.first().copied().unwrap_or(ZERO_PULSE),
                            eta_bar: eta_bar.unwrap_or(1.0),
                            t0: t0.unwrap_or(1.0),
                            grating: grating.unwrap_or((1.0, 1.0)),
                        },
                        tau_values: linspace(start, stop, points),
                    }
                }
            }
        }
        "fifo" | "reorder" => {
            if pulses.is_empty() {
                missing.push("pulse");
            }
            if eta_bar.is_none() {
                missing.push("eta_bar");
            }
            let eta_bar = eta_bar.unwrap_or(1.0);
            let grating = grating.unwrap_or((1.0, 1.0));
            if proto_name == "fifo" {
                Protocol::Fifo { pulses: pulses.clone(), eta_bar, grating }
            } else {
                Protocol::Reorder { pulses: pulses.clone(), eta_bar, grating }
            }
        }
        _ => {
            let file_entry = need(fields.take("schedule_file")?, "schedule_file", &mut missing);
            let segments = match &file_entry {
                Some(e) => load_schedule_file(&base_dir.join(&e.value))?,
                None => Vec::new(),
            };
            Protocol::CustomSchedule {
                schedule: ControlSchedule { segments, input_pulses: pulses.clone() },
            }
        }
    };

    if !missing.is_empty() {
        return Err(ConfigError::Missing { keys: missing.join(", ") });
    }
    if let Some(e) = fields.leftover() {
        return Err(ConfigError::Inapplicable {
            line: e.line,
            key: e.key.clone(),
            protocol: proto_name,
        });
    }

    Ok(ExperimentConfig {
        params: SimulationParams {
            atomic_density_n: density,
            sample_length_lbar: sample_length,
            grid_points_z: grid_points,
            time_step_dtbar: dt,
            record_stride,
            snapshot_stride,
        },
        protocol,
        output_dir,
    })
}

/// Placeholder for error paths that still need a value before the collected
/// missing-key report fires. Never reaches a built config.
const ZERO_PULSE: InputPulse =
    InputPulse { center_tbar: 1.0, width_tbar: 1.0, amplitude: Complex64::new(0.0, 0.0) };

const CONTIGUITY_TOL: f64 = 1e-9;

/// Schedule file: one segment per line, `t_start t_end eta_bar nu_bar
/// k_bar_r phase`, `#` comments, consecutive segments contiguous in time.
fn load_schedule_file(path: &Path) -> Result<Vec<Segment>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::ScheduleUnreadable { path: path.to_path_buf(), source })?;
    let mut segments: Vec<(usize, Segment)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let code = raw.split('#').next().unwrap_or("").trim();
        if code.is_empty() {
            continue;
        }
        let parts: Vec<&str> = code.split_whitespace().collect();
        if parts.len() != 6 {
            return Err(ConfigError::ScheduleLine {
                line,
                reason: format!(
                    "expected 6 columns `t_start t_end eta_bar nu_bar k_bar_r phase`, got {}",
                    parts.len()
                ),
            });
        }
        let mut nums = [0.0; 6];
        for (slot, part) in nums.iter_mut().zip(&parts) {
            *slot = match part.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => {
                    return Err(ConfigError::ScheduleLine {
                        line,
                        reason: format!("`{part}` is not a finite number"),
                    })
                }
            };
        }
        if nums[1] <= nums[0] {
            return Err(ConfigError::ScheduleLine {
                line,
                reason: "t_end must exceed t_start".to_string(),
            });
        }
        if let Some((_, prev)) = segments.last() {
            let gap = nums[0] - prev.t_end;
            if gap.abs() > CONTIGUITY_TOL {
                return Err(ConfigError::ScheduleContiguity {
                    line,
                    t_start: nums[0],
                    prev_end: prev.t_end,
                    gap,
                });
            }
        }
        segments.push((
            line,
            Segment {
                t_start: nums[0],
                t_end: nums[1],
                gradient_eta_bar: nums[2],
                grating_nu_bar: nums[3],
                grating_k_bar: nums[4],
                grating_phase: nums[5],
            },
        ));
    }
    Ok(segments.into_iter().map(|(_, s)| s).collect())
}
