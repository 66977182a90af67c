//! `cardio-nlsolve`: runs the solver experiments and renders their plots.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use cardio_core::bench::{emit_svg, run_experiment, BenchSettings, ExperimentKind, PlotKind};
use clap::{Parser, Subcommand};

/// Exit status when every run finished but at least one did not converge.
const NOT_CONVERGED: u8 = 3;
/// Exit status for unknown experiments, keys or malformed overrides.
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "cardio-nlsolve", version, about = "Nonlinear solver experiments for the decoupled implicit Bidomain model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV and SVG files to the output directory.
    ///
    /// Overrides apply in order: config file, --set pairs, solver flags.
    /// Experiments: tuning, robustness_size, robustness_ischemia, full_beat,
    /// thread_scaling, convergence_trace, imex (see `cardio-nlsolve experiments`).
    Run {
        #[arg(long)]
        experiment: String,
        /// Flat `key = value` file with dotted keys (see `cardio-nlsolve defaults`).
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=value` override; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Nonlinear method: newton, inewton, qn_preonly, qn_jaclow, ngmres, ncg (sets solver.method).
        #[arg(long = "snes-type")]
        snes_type: Option<String>,
        /// L-BFGS history length (sets solver.qn_m).
        #[arg(long = "snes-qn-m")]
        snes_qn_m: Option<usize>,
        /// NCG conjugacy rule: fr, prp, dy, cd (sets solver.ncg_type).
        #[arg(long = "snes-ncg-type")]
        snes_ncg_type: Option<String>,
        /// Initial Eisenstat-Walker forcing term (sets solver.ew_rtol).
        #[arg(long = "snes-ksp-ew-rtol")]
        snes_ksp_ew_rtol: Option<f64>,
        /// Relative tolerance of the inner CG solves (sets ksp.rtol).
        #[arg(long = "ksp-rtol")]
        ksp_rtol: Option<f64>,
        /// Nonlinear iteration cap (sets solver.max_it).
        #[arg(long = "snes-max-it")]
        snes_max_it: Option<usize>,
    },
    /// Render a plot from harness CSV files.
    Plot {
        /// iterations_vs_time, residual_loglog or cpu_bars.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
    /// Print every configuration key with its default value.
    Defaults,
    /// List the experiments and their default parameter grids.
    Experiments,
}

fn settings_from(
    config: Option<PathBuf>,
    set: &[String],
    flags: [(&str, Option<String>); 6],
) -> anyhow::Result<BenchSettings> {
    let mut s = BenchSettings::default();
    if let Some(path) = config {
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        s.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
    }
    for pair in set {
        s.set_pair(pair)?;
    }
    for (key, value) in flags {
        if let Some(v) = value {
            s.set(key, &v)?;
        }
    }
    Ok(s)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<cardio_core::Error>() {
                Some(cardio_core::Error::Usage(_)) => ExitCode::from(USAGE),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { experiment, config, set, out, snes_type, snes_qn_m, snes_ncg_type, snes_ksp_ew_rtol, ksp_rtol, snes_max_it } => {
            let kind: ExperimentKind = experiment.parse()?;
            let settings = settings_from(
                config,
                &set,
                [
                    ("solver.method", snes_type),
                    ("solver.qn_m", snes_qn_m.map(|v| v.to_string())),
                    ("solver.ncg_type", snes_ncg_type),
                    ("solver.ew_rtol", snes_ksp_ew_rtol.map(|v| v.to_string())),
                    ("ksp.rtol", ksp_rtol.map(|v| v.to_string())),
                    ("solver.max_it", snes_max_it.map(|v| v.to_string())),
                ],
            )?;
            let outcome = run_experiment(kind, &settings, &out)?;
            for run in &outcome.runs {
                println!(
                    "{:<28} converged={:<5} mean_its={:>8.2} inner={:>6} solve={:.3}s",
                    run.label, run.converged, run.mean_iterations, run.inner_iterations, run.solve_seconds
                );
            }
            println!("wrote {} files to {}", outcome.files.len(), out.display());
            if outcome.all_converged() {
                Ok(ExitCode::SUCCESS)
            } else {
                for f in &outcome.failures {
                    eprintln!("not converged: {f}");
                }
                Ok(ExitCode::from(NOT_CONVERGED))
            }
        }
        Command::Plot { kind, out, csv } => {
            let kind: PlotKind = kind.parse()?;
            emit_svg(&csv, kind, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Defaults => {
            for (k, v) in BenchSettings::default().pairs() {
                println!("{k} = {v}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiments => {
            println!("{}", ExperimentKind::usage());
            Ok(ExitCode::SUCCESS)
        }
    }
}
