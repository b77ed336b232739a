//! `gem`: run gradient-echo memory experiments from flat config files.
//!
//! Exit codes: 0 success, 1 configuration or validation failure, 2 numerical
//! failure, 3 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use gem_cli::config::{load_config, Protocol};
use gem_cli::experiment::{run_experiment, ExperimentError, RunSummary};
use gem_cli::CliError;
use gem_core::bessel::{bessel_jn, MAX_ARGUMENT};
use gem_core::kspace::orders_needed;
use gem_core::model::validate_schedule;
use gem_core::sequencer::{
    build_fifo_plan, build_reorder_plan, build_tof_plan, ProtocolPlan,
};

#[derive(Parser)]
#[command(name = "gem", version, about = "gradient-echo memory simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment a config file describes and write its artifacts.
    Simulate { config: PathBuf },
    /// Run a grating-duration sweep config (protocol must be `sweep`).
    Sweep { config: PathBuf },
    /// Run a stored pulse train through a recall protocol, overriding the
    /// config's own fifo/reorder choice.
    Protocol {
        #[command(subcommand)]
        which: TrainCommand,
    },
    /// Print the diffraction-order weights J_n(nu tau)^2 of a grating burst.
    Oracle {
        #[arg(long)]
        nu: f64,
        #[arg(long)]
        tau: f64,
    },
    /// Parse a config and check its schedule without running anything.
    Validate { config: PathBuf },
}

#[derive(Subcommand)]
enum TrainCommand {
    /// Recall in arrival order.
    Fifo { config: PathBuf },
    /// Recall the last stored pulse first, then the rest in order.
    Reorder { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; only real usage mistakes
            // should exit nonzero.
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config } => {
            let cfg = load_config(&config)?;
            finish(run_experiment(&cfg)?)
        }
        Command::Sweep { config } => {
            let cfg = load_config(&config)?;
            if !matches!(cfg.protocol, Protocol::Sweep { .. }) {
                return Err(CliError::Usage(format!(
                    "`sweep` needs a sweep config; {} declares protocol `{}`",
                    config.display(),
                    cfg.protocol.name()
                )));
            }
            finish(run_experiment(&cfg)?)
        }
        Command::Protocol { which } => {
            let (path, want_fifo) = match which {
                TrainCommand::Fifo { config } => (config, true),
                TrainCommand::Reorder { config } => (config, false),
            };
            let mut cfg = load_config(&path)?;
            cfg.protocol = match cfg.protocol {
                Protocol::Fifo { pulses, eta_bar, grating }
                | Protocol::Reorder { pulses, eta_bar, grating } => {
                    if want_fifo {
                        Protocol::Fifo { pulses, eta_bar, grating }
                    } else {
                        Protocol::Reorder { pulses, eta_bar, grating }
                    }
                }
                other => {
                    return Err(CliError::Usage(format!(
                        "`protocol` needs a pulse-train config (fifo or reorder); {} declares \
                         protocol `{}`",
                        path.display(),
                        other.name()
                    )))
                }
            };
            finish(run_experiment(&cfg)?)
        }
        Command::Oracle { nu, tau } => oracle(nu, tau),
        Command::Validate { config } => validate(&config),
    }
}

/// Writes to stdout, treating a closed pipe (e.g. `gem ... | head`) as done
/// rather than a failure.
fn print_stdout(text: &str) -> Result<(), CliError> {
    use std::io::Write as _;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(ExperimentError::Io { path: PathBuf::from("stdout"), source: e }.into()),
    }
}

fn finish(summary: RunSummary) -> Result<(), CliError> {
    let mut s = String::new();
    for path in &summary.artifacts {
        s.push_str(&format!("wrote {}\n", path.display()));
    }
    print_stdout(&s)
}

/// The analytic weights a grating burst of area nu*tau puts on each
/// diffraction order, as CSV on stdout.
fn oracle(nu: f64, tau: f64) -> Result<(), CliError> {
    if !(nu.is_finite() && tau.is_finite()) || nu < 0.0 || tau < 0.0 {
        return Err(CliError::Usage("oracle needs finite nu >= 0 and tau >= 0".to_string()));
    }
    let area = nu * tau;
    if area > MAX_ARGUMENT {
        return Err(CliError::Usage(format!(
            "pulse area nu*tau = {area} exceeds the supported range ({MAX_ARGUMENT})"
        )));
    }
    let n_max = orders_needed(area, 1e-12).max(1);
    let mut s = format!("# diffraction-order weights for pulse area nu*tau = {area}\n");
    s.push_str("n,j_n,weight\n");
    let mut total = 0.0;
    for n in -n_max..=n_max {
        let j = bessel_jn(n, area);
        total += j * j;
        s.push_str(&format!("{n},{:.16e},{:.16e}\n", j, j * j));
    }
    s.push_str(&format!("# weight sum over |n| <= {n_max}: {total:.16e}\n"));
    print_stdout(&s)
}

/// Loads the config and builds its plan (or checks its schedule) without
/// simulating, reporting what would run.
fn validate(path: &Path) -> Result<(), CliError> {
    let cfg = load_config(path)?;
    let params = &cfg.params;
    let plan: Option<ProtocolPlan> = match &cfg.protocol {
        Protocol::PlainGem { pulse, eta_bar, t0 } => {
            Some(build_tof_plan(params, pulse, *eta_bar, *t0, 0.0, (0.0, 0.0))
                .map_err(ExperimentError::from)?)
        }
        Protocol::TofDiffraction { pulse, eta_bar, t0, tau, grating } => {
            Some(build_tof_plan(params, pulse, *eta_bar, *t0, *tau, *grating)
                .map_err(ExperimentError::from)?)
        }
        Protocol::Sweep { setup, tau_values } => {
            // The longest duration stresses the schedule hardest.
            let tau = *tau_values.last().expect("sweep configs carry at least 2 points");
            Some(
                build_tof_plan(params, &setup.pulse, setup.eta_bar, setup.t0, tau, setup.grating)
                    .map_err(ExperimentError::from)?,
            )
        }
        Protocol::Fifo { pulses, eta_bar, grating } => {
            Some(build_fifo_plan(params, pulses, *eta_bar, *grating)
                .map_err(ExperimentError::from)?)
        }
        Protocol::Reorder { pulses, eta_bar, grating } => {
            Some(build_reorder_plan(params, pulses, *eta_bar, *grating)
                .map_err(ExperimentError::from)?)
        }
        Protocol::CustomSchedule { schedule } => {
            let report = validate_schedule(schedule, params);
            if !report.is_clean() {
                return Err(ExperimentError::Validation(report.to_string()).into());
            }
            None
        }
    };
    let mut s = format!("config ok: protocol {}\n", cfg.protocol.name());
    if let Some(plan) = plan {
        s.push_str(&format!("regime: {}\n", plan.regime));
        s.push_str(&format!("segments: {}\n", plan.schedule.segments.len()));
        s.push_str(&format!("predicted emissions: {}\n", plan.predicted_emissions.len()));
        for note in &plan.notes {
            s.push_str(&format!("note: {note}\n"));
        }
    } else {
        s.push_str("custom schedule validates cleanly\n");
    }
    print_stdout(&s)
}
