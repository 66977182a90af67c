//! The experiment suites of the harness.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::bench::order::{fit_order, ORDER_PAIRS};
use crate::bench::report::CsvReport;
use crate::bench::settings::BenchSettings;
use crate::bench::svg::{emit_svg, PlotKind};
use crate::error::{Error, Result};
use crate::nsolve::NonlinearMethod;
use crate::timeloop::{imex_compare, Simulation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Tuning,
    RobustnessSize,
    RobustnessIschemia,
    FullBeat,
    ThreadScaling,
    ConvergenceTrace,
    Imex,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::Tuning,
        Self::RobustnessSize,
        Self::RobustnessIschemia,
        Self::FullBeat,
        Self::ThreadScaling,
        Self::ConvergenceTrace,
        Self::Imex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Tuning => "tuning",
            Self::RobustnessSize => "robustness_size",
            Self::RobustnessIschemia => "robustness_ischemia",
            Self::FullBeat => "full_beat",
            Self::ThreadScaling => "thread_scaling",
            Self::ConvergenceTrace => "convergence_trace",
            Self::Imex => "imex",
        }
    }

    /// Default parameter grid, as printed in usage errors and help.
    pub fn default_grid(self) -> &'static str {
        match self {
            Self::Tuning => "newton baseline; inewton ew_rtol in {0.5,0.1,0.01,0.001}; qn_preonly and qn_jaclow m in {2,5,10,20}; ngmres m in {1,2,5,10}; ncg beta in {fr,prp,dy,cd}; 16^3, 1 ms",
            Self::RobustnessSize => "all methods on grids {16,24,32,48}^3 of a fixed domain, 1 ms",
            Self::RobustnessIschemia => "all methods, healthy vs halved conductivity in the central full-thickness box, 16^3, 1 ms",
            Self::FullBeat => "all methods over 100 ms, 16^3",
            Self::ThreadScaling => "all methods with {1,2,4,8} worker threads, 16^3, 1 ms",
            Self::ConvergenceTrace => "residual history of the first time step for all methods, 16^3",
            Self::Imex => "monodomain implicit at tau vs IMEX at tau/N, N in {1,2,4}, reference tau/256, 16^3, 1 ms",
        }
    }

    pub fn usage() -> String {
        Self::ALL.iter().map(|k| format!("  {:<20} {}", k.name(), k.default_grid())).collect::<Vec<_>>().join("\n")
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown experiment `{s}`; available:\n{}", Self::usage())))
    }
}

/// Aggregate of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub label: String,
    pub method: NonlinearMethod,
    pub elements: usize,
    pub threads: usize,
    pub converged: bool,
    pub steps: usize,
    pub mean_iterations: f64,
    pub inner_iterations: usize,
    pub solve_seconds: f64,
    pub step_seconds: f64,
    pub failure_step: Option<usize>,
    pub file: PathBuf,
}

/// Files written and runs performed by one experiment.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOutcome {
    pub files: Vec<PathBuf>,
    pub runs: Vec<RunSummary>,
    /// Descriptions of runs that did not converge.
    pub failures: Vec<String>,
}

impl ExperimentOutcome {
    pub fn all_converged(&self) -> bool {
        self.failures.is_empty()
    }

    fn record(&mut self, run: RunSummary) {
        if !run.converged {
            self.failures.push(match run.failure_step {
                Some(s) => format!("{} stopped at step {s}", run.label),
                None => format!("{} did not converge", run.label),
            });
        }
        self.files.push(run.file.clone());
        self.runs.push(run);
    }

    fn write(&mut self, report: &CsvReport, path: PathBuf) -> Result<()> {
        report.write(&path)?;
        self.files.push(path);
        Ok(())
    }

    fn plot(&mut self, inputs: &[PathBuf], kind: PlotKind, path: PathBuf) -> Result<()> {
        emit_svg(inputs, kind, &path)?;
        self.files.push(path);
        Ok(())
    }
}

type Header = Vec<(String, String)>;

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

/// Header of every file: version, run id, the run-specific entries, every
/// resolved setting and the fixed algorithmic choices.
fn header(settings: &BenchSettings, kind: ExperimentKind, extra: Header) -> Header {
    let mut h = vec![kv("version", env!("CARGO_PKG_VERSION")), kv("experiment", kind)];
    h.extend(extra);
    h.extend(settings.pairs());
    h.push(kv("initial_guess", "previous time step"));
    h.push(kv("ew_forcing", "choice 1: |‖F_k‖ − ‖F_{k−1} + J_{k−1}s_{k−1}‖| / ‖F_{k−1}‖, clamped to [1e-6, 0.9]"));
    h.push(kv("timing", "SNEStime is wall time of the nonlinear solve only"));
    let digest = Sha256::digest(h.iter().map(|(k, v)| format!("{k}={v}\n")).collect::<String>().as_bytes());
    let id: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    h.insert(1, kv("run_id", id));
    h
}

const SUMMARY_COLUMNS: [&str; 10] =
    ["label", "method", "grid", "threads", "converged", "meanIts", "innerIts", "SNEStime", "stepTime", "failureStep"];

fn summary_row(r: &RunSummary) -> Vec<String> {
    vec![
        r.label.clone(),
        r.method.to_string(),
        r.elements.to_string(),
        r.threads.to_string(),
        r.converged.to_string(),
        format!("{:.4}", r.mean_iterations),
        r.inner_iterations.to_string(),
        format!("{:e}", r.solve_seconds),
        format!("{:e}", r.step_seconds),
        r.failure_step.map(|s| s.to_string()).unwrap_or_default(),
    ]
}

fn summary(settings: &BenchSettings, kind: ExperimentKind, runs: &[RunSummary]) -> CsvReport {
    let mut r = CsvReport::new(header(settings, kind, vec![kv("label", "summary")]), &SUMMARY_COLUMNS);
    for run in runs {
        r.rows.push(summary_row(run));
    }
    r
}

/// Runs the time loop for `settings` on an `n³` grid and writes the
/// per-step CSV to `path`.
pub fn run_series(
    settings: &BenchSettings,
    kind: ExperimentKind,
    n: usize,
    ischemic: bool,
    label: &str,
    path: &Path,
) -> Result<RunSummary> {
    let config = settings.simulation(n, ischemic)?;
    let dt_bound = config.timestep_bound();
    let method = config.solver.method;
    let result = Simulation::new(config)?.run()?;
    let threads = rayon::current_num_threads();
    let run = RunSummary {
        label: label.to_string(),
        method,
        elements: n,
        threads,
        converged: result.converged(),
        steps: result.records.len(),
        mean_iterations: result.mean_iterations(),
        inner_iterations: result.total_inner_iterations(),
        solve_seconds: result.total_solve_seconds(),
        step_seconds: result.records.iter().map(|r| r.step_seconds).sum(),
        failure_step: result.failure.as_ref().map(|f| f.step),
        file: path.to_path_buf(),
    };
    let extra = vec![
        kv("label", label),
        kv("grid", format!("{n}x{n}x{n}")),
        kv("ischemia", ischemic),
        kv("threads", threads),
        kv("dt_bound", dt_bound),
        kv("converged", run.converged),
        kv("failure_step", run.failure_step.map(|s| s.to_string()).unwrap_or_else(|| "none".into())),
        kv("total_solve_seconds", format!("{:e}", run.solve_seconds)),
        kv("total_step_seconds", format!("{:e}", run.step_seconds)),
    ];
    CsvReport::from_steps(header(settings, kind, extra), &result.records).write(path)?;
    Ok(run)
}

fn with_method(settings: &BenchSettings, method: NonlinearMethod) -> BenchSettings {
    let mut s = settings.clone();
    s.solver.method = method;
    s
}

fn tuning(settings: &BenchSettings, out: &Path, result: &mut ExperimentOutcome) -> Result<()> {
    let kind = ExperimentKind::Tuning;
    let mut variants: Vec<(String, BenchSettings)> = vec![("newton".into(), with_method(settings, NonlinearMethod::Newton))];
    for &ew in &settings.tuning.ew_rtol {
        let mut s = with_method(settings, NonlinearMethod::InexactNewton);
        s.solver.ew_rtol0 = ew;
        variants.push((format!("inewton_rtol{ew}"), s));
    }
    for method in [NonlinearMethod::QnPreonly, NonlinearMethod::QnJacLow] {
        for &m in &settings.tuning.qn_m {
            let mut s = with_method(settings, method);
            s.solver.qn_m = m;
            variants.push((format!("{method}_m{m}"), s));
        }
    }
    for &m in &settings.tuning.ngmres_m {
        let mut s = with_method(settings, NonlinearMethod::Ngmres);
        s.solver.ngmres_m = m;
        variants.push((format!("ngmres_m{m}"), s));
    }
    for &b in &settings.tuning.ncg {
        let mut s = with_method(settings, NonlinearMethod::Ncg);
        s.solver.ncg_beta = b;
        variants.push((format!("ncg_{b}"), s));
    }
    for (label, s) in &variants {
        let path = out.join(format!("TUNING_{label}.csv"));
        result.record(run_series(s, kind, settings.elements, false, label, &path)?);
    }
    let path = out.join("summary.csv");
    result.write(&summary(settings, kind, &result.runs), path.clone())?;
    result.plot(&[path], PlotKind::CpuBars, out.join("cpu_bars.svg"))
}

fn robustness_size(settings: &BenchSettings, out: &Path, result: &mut ExperimentOutcome) -> Result<()> {
    let kind = ExperimentKind::RobustnessSize;
    for &n in &settings.sizes {
        let mut files = Vec::new();
        for &m in &settings.methods {
            let path = out.join(format!("ROBUSTNESS_{m}_{n}.csv"));
            result.record(run_series(&with_method(settings, m), kind, n, false, m.name(), &path)?);
            files.push(path);
        }
        result.plot(&files, PlotKind::IterationsVsTime, out.join(format!("iterations_vs_time_{n}.svg")))?;
    }
    result.write(&summary(settings, kind, &result.runs), out.join("summary.csv"))
}

fn robustness_ischemia(settings: &BenchSettings, out: &Path, result: &mut ExperimentOutcome) -> Result<()> {
    let kind = ExperimentKind::RobustnessIschemia;
    let n = settings.elements;
    let mut change = CsvReport::new(
        header(settings, kind, vec![kv("label", "ischemia_change")]),
        &["label", "healthyIts", "ischemicIts", "relativeChange"],
    );
    for &m in &settings.methods {
        let s = with_method(settings, m);
        let healthy_path = out.join(format!("HEALTHY_{m}.csv"));
        let ischemic_path = out.join(format!("ISCHEMIC_{m}.csv"));
        let healthy = run_series(&s, kind, n, false, &format!("{m} healthy"), &healthy_path)?;
        let ischemic = run_series(&s, kind, n, true, &format!("{m} ischemic"), &ischemic_path)?;
        change.push([
            m.to_string(),
            format!("{:.4}", healthy.mean_iterations),
            format!("{:.4}", ischemic.mean_iterations),
            format!("{:.4}", ischemic.mean_iterations / healthy.mean_iterations - 1.0),
        ]);
        result.record(healthy);
        result.record(ischemic);
        result.plot(&[healthy_path, ischemic_path], PlotKind::IterationsVsTime, out.join(format!("iterations_vs_time_{m}.svg")))?;
    }
    result.write(&change, out.join("ischemia.csv"))?;
    result.write(&summary(settings, kind, &result.runs), out.join("summary.csv"))
}

fn full_beat(settings: &BenchSettings, out: &Path, result: &mut ExperimentOutcome) -> Result<()> {
    let kind = ExperimentKind::FullBeat;
    let mut s = settings.clone();
    s.t_end = settings.full_beat_t_end;
    let mut files = Vec::new();
    for &m in &settings.methods {
        let path = out.join(format!("FULL_BEAT_{m}.csv"));
        result.record(run_series(&with_method(&s, m), kind, s.elements, false, m.name(), &path)?);
        files.push(path);
    }
    result.plot(&files, PlotKind::IterationsVsTime, out.join("iterations_vs_time.svg"))?;
    result.write(&summary(&s, kind, &result.runs), out.join("summary.csv"))
}

fn thread_scaling(settings: &BenchSettings, out: &Path, result: &mut ExperimentOutcome) -> Result<()> {
    let kind = ExperimentKind::ThreadScaling;
    let mut scaling = CsvReport::new(
        header(settings, kind, vec![kv("label", "scaling"), kv("speedup", "S_p = T_1 / T_p"), kv("efficiency", "E_p = T_1 / (p T_p)")]),
        &["label", "method", "threads", "SNEStime", "speedup", "efficiency", "converged"],
    );
    for &m in &settings.methods {
        let mut base = None;
        for &p in &settings.threads {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(p)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot build a pool of {p} threads: {e}")))?;
            let path = out.join(format!("SCALING_{m}_p{p}.csv"));
            let label = format!("{m} p={p}");
            let run = pool.install(|| run_series(&with_method(settings, m), kind, settings.elements, false, &label, &path))?;
            // baseline is the first entry p₀: S_p = p₀ T_{p₀} / T_p, i.e. T₁/T_p when p₀ = 1
            let t0 = *base.get_or_insert(run.solve_seconds);
            let speedup = settings.threads[0] as f64 * t0 / run.solve_seconds;
            scaling.push([
                label.clone(),
                m.to_string(),
                p.to_string(),
                format!("{:e}", run.solve_seconds),
                format!("{speedup:.4}"),
                format!("{:.4}", speedup / p as f64),
                run.converged.to_string(),
            ]);
            result.record(run);
        }
    }
    let path = out.join("scaling.csv");
    result.write(&scaling, path.clone())?;
    result.plot(&[path], PlotKind::CpuBars, out.join("cpu_bars.svg"))
}

fn convergence_trace(settings: &BenchSettings, out: &Path, result: &mut ExperimentOutcome) -> Result<()> {
    let kind = ExperimentKind::ConvergenceTrace;
    let mut orders = CsvReport::new(
        header(settings, kind, vec![kv("label", "orders"), kv("order_fit", format!("least squares over the last {ORDER_PAIRS} residual pairs"))]),
        &["label", "order", "iterations", "converged", "SNEStime"],
    );
    let mut files = Vec::new();
    for &m in &settings.methods {
        let s = with_method(settings, m);
        let config = s.reference()?;
        let dt_bound = config.timestep_bound();
        let mut sim = Simulation::new(config)?;
        let (record, trace) = sim.step()?;
        let order = fit_order(&trace.residual_norms, ORDER_PAIRS);
        let extra = vec![
            kv("label", m),
            kv("step", 1),
            kv("dt_bound", dt_bound),
            kv("converged", trace.converged),
            kv("termination", format!("{:?}", trace.reason)),
            kv("fitted_order", order.map(|o| format!("{o:.4}")).unwrap_or_else(|| "none".into())),
        ];
        let mut report = CsvReport::new(header(&s, kind, extra), &["its", "resNorm"]);
        for (k, r) in trace.residual_norms.iter().enumerate() {
            report.push([k.to_string(), format!("{r:e}")]);
        }
        let path = out.join(format!("TRACE_{m}.csv"));
        result.write(&report, path.clone())?;
        files.push(path);
        orders.push([
            m.to_string(),
            order.map(|o| format!("{o:.4}")).unwrap_or_default(),
            trace.iterations().to_string(),
            trace.converged.to_string(),
            format!("{:e}", record.solve_seconds),
        ]);
        if !trace.converged {
            result.failures.push(format!("{m} did not converge on the first step ({:?})", trace.reason));
        }
    }
    result.write(&orders, out.join("orders.csv"))?;
    result.plot(&files, PlotKind::ResidualLogLog, out.join("residual_loglog.svg"))
}

fn imex(settings: &BenchSettings, out: &Path, result: &mut ExperimentOutcome) -> Result<()> {
    let kind = ExperimentKind::Imex;
    let config = settings.reference()?;
    let report = match imex_compare(&config, &settings.imex_factors, settings.imex_reference_ratio) {
        Ok(r) => r,
        Err(Error::StepFailure { step, reason }) => {
            result.failures.push(format!("monodomain solve failed at step {step}: {reason}"));
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let matching = report.matching_factor(1.1).map(|n| n.to_string()).unwrap_or_else(|| "none".into());
    let mut csv = CsvReport::new(
        header(
            settings,
            kind,
            vec![
                kv("label", "imex"),
                kv("reference", format!("implicit at tau/{}", report.reference_ratio)),
                kv("error_norm", "sqrt(tau sum_n ||v^n - v_ref(t_n)||_H1^2)"),
                kv("matching_factor", matching),
            ],
        ),
        &["label", "N", "tau", "bochnerError", "secondsPerStep", "SNEStime"],
    );
    csv.push([
        "implicit".to_string(),
        "1".into(),
        report.tau.to_string(),
        format!("{:e}", report.implicit_error),
        format!("{:e}", report.implicit_seconds_per_step),
        format!("{:e}", report.implicit_total_seconds),
    ]);
    for &(n, err, per_step, total) in &report.imex {
        csv.push([
            format!("imex_N{n}"),
            n.to_string(),
            (report.tau / n as f64).to_string(),
            format!("{err:e}"),
            format!("{per_step:e}"),
            format!("{total:e}"),
        ]);
    }
    let path = out.join("imex.csv");
    result.write(&csv, path.clone())?;
    result.plot(&[path], PlotKind::CpuBars, out.join("cpu_bars.svg"))
}

/// Runs `kind` with `settings`, writing every artifact below `out`.
pub fn run_experiment(kind: ExperimentKind, settings: &BenchSettings, out: &Path) -> Result<ExperimentOutcome> {
    settings.reference()?;
    fs::create_dir_all(out)?;
    let mut result = ExperimentOutcome::default();
    match kind {
        ExperimentKind::Tuning => tuning(settings, out, &mut result)?,
        ExperimentKind::RobustnessSize => robustness_size(settings, out, &mut result)?,
        ExperimentKind::RobustnessIschemia => robustness_ischemia(settings, out, &mut result)?,
        ExperimentKind::FullBeat => full_beat(settings, out, &mut result)?,
        ExperimentKind::ThreadScaling => thread_scaling(settings, out, &mut result)?,
        ExperimentKind::ConvergenceTrace => convergence_trace(settings, out, &mut result)?,
        ExperimentKind::Imex => imex(settings, out, &mut result)?,
    }
    Ok(result)
}
