//! Decoupled time stepping: gating update with frozen potential, then the
//! nonlinear Bidomain solve.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use crate::bidomain::{convexity_timestep_bound, h1_norm_squared, BidomainProblem, MembraneParams, MonodomainProblem, NonlinearityMode};
use crate::error::{Error, Result};
use crate::fem::{assemble_laplacian, rotated_fibers, AxisBox, ConductivitySet, StructuredGrid};
use crate::ionic::{gating_step, FitzHughNagumo, IonicModel, StateBox};
use crate::nsolve::{solve, NonlinearSolveSpec, SolveTrace};
use crate::sparse::CsrMatrix;
use crate::Real;

/// Applied current `I_i = +A`, `I_e = −A` on a box during
/// `[start, start + duration)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusProtocol<T> {
    pub region: AxisBox<T>,
    pub amplitude: T,
    pub start: T,
    pub duration: T,
}

impl<T: Real> StimulusProtocol<T> {
    /// Corner box covering the first quarter of every axis, active for 1 ms.
    pub fn corner(grid: &StructuredGrid<T>, amplitude: T) -> Self {
        Self { region: AxisBox::fractional(grid, [0.0; 3], [0.25; 3]), amplitude, start: T::zero(), duration: T::one() }
    }

    pub fn validate(&self, grid: &StructuredGrid<T>) -> Result<()> {
        if !(self.duration > T::zero()) {
            return Err(Error::InvalidConfig(format!("stimulus duration must be positive, got {}", self.duration)));
        }
        if self.nodes(grid).is_empty() {
            return Err(Error::InvalidConfig("stimulus region contains no grid node".into()));
        }
        Ok(())
    }

    pub fn nodes(&self, grid: &StructuredGrid<T>) -> Vec<usize> {
        (0..grid.num_nodes()).filter(|&i| self.region.contains(grid.node_coords(i))).collect()
    }

    /// Fraction of `(t0, t1]` covered by the stimulus window.
    pub fn active_fraction(&self, t0: T, t1: T) -> T {
        let lo = t0.max(self.start);
        let hi = t1.min(self.start + self.duration);
        if hi > lo {
            (hi - lo) / (t1 - t0)
        } else {
            T::zero()
        }
    }

    /// Step-averaged nodal currents on `(t0, t1]`, so each step receives the
    /// exact charge of the stimulus window.
    pub fn currents(&self, grid: &StructuredGrid<T>, t0: T, t1: T) -> (Vec<T>, Vec<T>) {
        let n = grid.num_nodes();
        let mut iapp_i = vec![T::zero(); n];
        let mut iapp_e = vec![T::zero(); n];
        let a = self.amplitude * self.active_fraction(t0, t1);
        if a != T::zero() {
            for j in self.nodes(grid) {
                iapp_i[j] = a;
                iapp_e[j] = -a;
            }
        }
        (iapp_i, iapp_e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig<T> {
    pub grid: StructuredGrid<T>,
    /// Fiber angles at the bottom and top faces (radians).
    pub fiber_angles: (T, T),
    pub conductivities: ConductivitySet<T>,
    pub ionic: FitzHughNagumo<T>,
    pub membrane: MembraneParams<T>,
    pub t_end: T,
    pub stimulus: StimulusProtocol<T>,
    pub solver: NonlinearSolveSpec,
    pub enforce_dt_bound: bool,
    pub state_box: StateBox<T>,
}

impl<T: Real> SimulationConfig<T> {
    /// 16³ cube of side 0.4 cm, τ = 0.05 ms, 1 ms horizon, corner stimulus.
    pub fn reference() -> Self {
        let grid = StructuredGrid::cube(16, T::lit(0.4)).expect("valid grid");
        let stimulus = StimulusProtocol::corner(&grid, T::lit(DEFAULT_STIMULUS));
        let third = T::lit(std::f64::consts::FRAC_PI_3);
        Self {
            grid,
            fiber_angles: (-third, third),
            conductivities: ConductivitySet::normal(),
            ionic: FitzHughNagumo::default(),
            membrane: MembraneParams::default(),
            t_end: T::one(),
            stimulus,
            solver: NonlinearSolveSpec::default(),
            enforce_dt_bound: true,
            state_box: StateBox::default(),
        }
    }

    /// Replaces the grid by an `n³` cube of the same extent. The stimulus box
    /// is given in physical coordinates and stays in place.
    pub fn with_resolution(mut self, n: usize) -> Self {
        let side = self.grid.extent()[0];
        self.grid = StructuredGrid::cube(n, side).expect("valid grid");
        self
    }

    pub fn num_steps(&self) -> usize {
        (self.t_end / self.membrane.tau).round().to_usize().unwrap_or(0)
    }

    pub fn timestep_bound(&self) -> T {
        convexity_timestep_bound(&self.ionic, self.membrane.cm, &self.state_box)
    }

    pub fn validate(&self) -> Result<()> {
        self.membrane.validate()?;
        self.conductivities.validate()?;
        self.stimulus.validate(&self.grid)?;
        self.solver.validate()?;
        if !(self.t_end >= self.membrane.tau) {
            return Err(Error::InvalidConfig(format!("t_end {} is shorter than one step {}", self.t_end, self.membrane.tau)));
        }
        let bound = self.timestep_bound();
        if self.enforce_dt_bound && self.membrane.tau > bound {
            return Err(Error::TimestepBound { tau: self.membrane.tau.as_f64(), tau_max: bound.as_f64() });
        }
        Ok(())
    }
}

/// Default stimulus amplitude: `A/χ = 1` drives the stimulated membrane to
/// the excited branch within 1 ms.
pub const DEFAULT_STIMULUS: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub nonlinear_iterations: usize,
    pub inner_iterations: usize,
    /// Wall time of the nonlinear solve (s).
    pub solve_seconds: f64,
    /// Wall time of the whole step including gating and assembly (s).
    pub step_seconds: f64,
    pub residual_norm: f64,
    pub restarts: usize,
    pub converged: bool,
}

/// Solution after `step` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState<T> {
    pub step: usize,
    pub time: T,
    /// `[u_i; u_e]`
    pub u: Vec<T>,
    pub w: Vec<T>,
}

impl<T: Real> SimulationState<T> {
    pub fn transmembrane(&self) -> Vec<T> {
        crate::bidomain::transmembrane(&self.u)
    }
}

/// Non-converged nonlinear solve.
#[derive(Debug, Clone)]
pub struct StepFailure {
    pub step: usize,
    pub trace: SolveTrace,
}

#[derive(Debug, Clone)]
pub struct RunResult<T> {
    pub records: Vec<StepRecord>,
    pub state: SimulationState<T>,
    pub dt_bound: T,
    pub failure: Option<StepFailure>,
}

impl<T: Real> RunResult<T> {
    pub fn converged(&self) -> bool {
        self.failure.is_none()
    }

    pub fn into_result(self) -> Result<Self> {
        match &self.failure {
            Some(f) => Err(Error::StepFailure {
                step: f.step,
                reason: format!("{:?} after {} iterations, ‖F‖ = {:e}", f.trace.reason, f.trace.iterations(), f.trace.final_residual()),
            }),
            None => Ok(self),
        }
    }

    pub fn mean_iterations(&self) -> f64 {
        mean(self.records.iter().map(|r| r.nonlinear_iterations as f64))
    }

    pub fn total_inner_iterations(&self) -> usize {
        self.records.iter().map(|r| r.inner_iterations).sum()
    }

    pub fn total_solve_seconds(&self) -> f64 {
        self.records.iter().map(|r| r.solve_seconds).sum()
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Bidomain time integrator.
pub struct Simulation<T: Real> {
    config: SimulationConfig<T>,
    problem: BidomainProblem<T, FitzHughNagumo<T>>,
    state: SimulationState<T>,
    dt_bound: T,
}

impl<T: Real> Simulation<T> {
    pub fn new(config: SimulationConfig<T>) -> Result<Self> {
        config.validate()?;
        let fibers = rotated_fibers(&config.grid, config.fiber_angles.0, config.fiber_angles.1);
        let mut problem =
            BidomainProblem::new(config.grid.clone(), &fibers, &config.conductivities, config.ionic, config.membrane)?;
        problem.set_state_box(config.state_box);
        let n = config.grid.num_nodes();
        let v_ref = config.ionic.v_ref();
        // u_i − u_e = v_ref with zero-mean u_e
        let state = SimulationState {
            step: 0,
            time: T::zero(),
            u: [vec![v_ref; n], vec![T::zero(); n]].concat(),
            w: vec![config.ionic.gating_equilibrium(v_ref); n],
        };
        let dt_bound = config.timestep_bound();
        Ok(Self { config, problem, state, dt_bound })
    }

    pub fn config(&self) -> &SimulationConfig<T> {
        &self.config
    }

    pub fn problem(&self) -> &BidomainProblem<T, FitzHughNagumo<T>> {
        &self.problem
    }

    pub fn state(&self) -> &SimulationState<T> {
        &self.state
    }

    pub fn dt_bound(&self) -> T {
        self.dt_bound
    }

    pub fn finished(&self) -> bool {
        self.state.step >= self.config.num_steps()
    }

    /// Gating update and step data for the next step.
    pub fn prepare_step(&mut self) -> Result<()> {
        let tau = self.config.membrane.tau;
        let v_prev = self.state.transmembrane();
        let w = gating_step(&self.config.ionic, &v_prev, &self.state.w, tau)?;
        let t0 = self.state.time;
        let t1 = T::from_count(self.state.step + 1) * tau;
        let (iapp_i, iapp_e) = self.config.stimulus.currents(&self.config.grid, t0, t1);
        self.problem.set_step_data(&v_prev, &w, &iapp_i, &iapp_e)?;
        Ok(())
    }

    /// Accepts the solution of the prepared step.
    pub fn commit_step(&mut self, u: Vec<T>) {
        let step = self.state.step + 1;
        self.state = SimulationState {
            step,
            time: T::from_count(step) * self.config.membrane.tau,
            u,
            w: self.problem.gating().to_vec(),
        };
    }

    /// One full step. The record is returned even when the solve did not
    /// converge; the state only advances on success.
    pub fn step(&mut self) -> Result<(StepRecord, SolveTrace)> {
        let start = Instant::now();
        self.prepare_step()?;
        let solve_start = Instant::now();
        let (u, trace) = solve(&self.problem, &self.config.solver, &self.state.u)?;
        let solve_seconds = solve_start.elapsed().as_secs_f64();
        let converged = trace.converged;
        let time = (T::from_count(self.state.step + 1) * self.config.membrane.tau).as_f64();
        if converged {
            self.commit_step(u);
        }
        let record = StepRecord {
            time,
            nonlinear_iterations: trace.iterations(),
            inner_iterations: trace.total_inner_iterations(),
            solve_seconds,
            step_seconds: start.elapsed().as_secs_f64(),
            residual_norm: trace.final_residual(),
            restarts: trace.restarts,
            converged,
        };
        Ok((record, trace))
    }

    /// Steps to the end of the horizon, stopping at the first failed solve.
    pub fn run(mut self) -> Result<RunResult<T>> {
        self.run_observed(|_, _| {})
    }

    /// As [`Self::run`], calling `observe` after every step.
    pub fn run_observed(&mut self, mut observe: impl FnMut(&StepRecord, &SolveTrace)) -> Result<RunResult<T>> {
        let mut records = Vec::with_capacity(self.config.num_steps());
        let mut failure = None;
        while !self.finished() {
            let (record, trace) = self.step()?;
            observe(&record, &trace);
            let ok = record.converged;
            records.push(record);
            if !ok {
                failure = Some(StepFailure { step: self.state.step + 1, trace });
                break;
            }
        }
        Ok(RunResult { records, state: self.state.clone(), dt_bound: self.dt_bound, failure })
    }

    pub fn restore(&mut self, state: SimulationState<T>) -> Result<()> {
        let n = self.config.grid.num_nodes();
        if state.u.len() != 2 * n || state.w.len() != n {
            return Err(Error::Checkpoint(format!(
                "state sizes ({}, {}) do not match the grid ({} nodes)",
                state.u.len(),
                state.w.len(),
                n
            )));
        }
        self.state = state;
        Ok(())
    }

    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        write_checkpoint(path, &self.config.grid, self.config.membrane.tau, &self.state)
    }
}

/// Runs `config` to completion.
pub fn run<T: Real>(config: SimulationConfig<T>) -> Result<RunResult<T>> {
    Simulation::new(config)?.run()
}

const MAGIC: &[u8; 8] = b"CNLS0001";

/// Binary checkpoint: a 32-byte header (magic, element counts as three
/// little-endian `u32`, 4 bytes padding, τ as `f64`), followed by the step
/// index (`u64`), the time, `u_i`, `u_e` and `w`, all little-endian `f64`.
pub fn write_checkpoint<T: Real>(path: &Path, grid: &StructuredGrid<T>, tau: T, state: &SimulationState<T>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    for d in grid.elements_per_axis() {
        let d = u32::try_from(d).map_err(|_| Error::Checkpoint(format!("grid dimension {d} exceeds u32")))?;
        out.write_all(&d.to_le_bytes())?;
    }
    out.write_all(&[0u8; 4])?;
    out.write_all(&tau.as_f64().to_le_bytes())?;
    out.write_all(&(state.step as u64).to_le_bytes())?;
    out.write_all(&state.time.as_f64().to_le_bytes())?;
    for v in state.u.iter().chain(&state.w) {
        out.write_all(&v.as_f64().to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Checkpoint contents: element counts, τ and the state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub elements: [usize; 3],
    pub tau: T,
    pub state: SimulationState<T>,
}

pub fn read_checkpoint<T: Real>(path: &Path) -> Result<Checkpoint<T>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() < 48 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("missing CNLS0001 header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let elements = [u32_at(8), u32_at(12), u32_at(16)];
    let tau = T::lit(f64_at(24));
    let step = u64::from_le_bytes(bytes[32..40].try_into().expect("8 bytes")) as usize;
    let time = T::lit(f64_at(40));
    let n = (elements[0] + 1) * (elements[1] + 1) * (elements[2] + 1);
    let expected = 48 + 8 * 3 * n;
    if bytes.len() != expected {
        return Err(Error::Checkpoint(format!("expected {expected} bytes for {n} nodes, found {}", bytes.len())));
    }
    let values: Vec<T> = (0..3 * n).map(|i| T::lit(f64_at(48 + 8 * i))).collect();
    let (u, w) = values.split_at(2 * n);
    Ok(Checkpoint { elements, tau, state: SimulationState { step, time, u: u.to_vec(), w: w.to_vec() } })
}

/// Transmembrane trajectory of a monodomain run.
#[derive(Debug, Clone)]
pub struct MonodomainRun<T> {
    /// `v^n` for `n = 0..=steps`.
    pub potentials: Vec<Vec<T>>,
    pub solve_seconds: Vec<f64>,
    pub iterations: Vec<usize>,
}

/// Integrates the monodomain reduction of `config` with step `tau` and the
/// given treatment of the ionic current.
pub fn run_monodomain<T: Real>(config: &SimulationConfig<T>, tau: T, mode: NonlinearityMode) -> Result<MonodomainRun<T>> {
    let fibers = rotated_fibers(&config.grid, config.fiber_angles.0, config.fiber_angles.1);
    let membrane = MembraneParams { tau, ..config.membrane };
    let mut problem = MonodomainProblem::new(config.grid.clone(), &fibers, &config.conductivities, config.ionic, membrane, mode)?;
    let steps = (config.t_end / tau).round().to_usize().unwrap_or(0);
    let n = config.grid.num_nodes();
    let v_ref = config.ionic.v_ref();
    let mut v = vec![v_ref; n];
    let mut w = vec![config.ionic.gating_equilibrium(v_ref); n];
    let mut out = MonodomainRun { potentials: vec![v.clone()], solve_seconds: Vec::new(), iterations: Vec::new() };
    let spec = &config.solver;
    for step in 0..steps {
        w = gating_step(&config.ionic, &v, &w, tau)?;
        let t0 = T::from_count(step) * tau;
        let (iapp, _) = config.stimulus.currents(&config.grid, t0, t0 + tau);
        problem.set_step_data(&v, &w, &iapp)?;
        let start = Instant::now();
        let (next, trace) = solve(&problem, spec, &v)?;
        out.solve_seconds.push(start.elapsed().as_secs_f64());
        out.iterations.push(trace.iterations());
        if !trace.converged {
            return Err(Error::StepFailure {
                step: step + 1,
                reason: format!("{:?} with ‖F‖ = {:e}", trace.reason, trace.final_residual()),
            });
        }
        v = next;
        out.potentials.push(v.clone());
    }
    Ok(out)
}

/// `sqrt(τ Σ_n ‖x^n − y^{nr}‖²_{H¹})` where the reference trajectory `y` is
/// `ratio` times finer than `x` and sampled at the coarse times.
pub fn bochner_error<T: Real>(
    mass: &CsrMatrix<T>,
    laplacian: &CsrMatrix<T>,
    coarse: &[Vec<T>],
    reference: &[Vec<T>],
    ratio: usize,
    tau: T,
) -> Result<T> {
    if (coarse.len() - 1) * ratio != reference.len() - 1 {
        return Err(Error::InvalidConfig(format!(
            "trajectories of {} and {} states are not related by the factor {ratio}",
            coarse.len(),
            reference.len()
        )));
    }
    let mut acc = T::zero();
    for (n, x) in coarse.iter().enumerate().skip(1) {
        let e: Vec<T> = x.iter().zip(&reference[n * ratio]).map(|(&a, &b)| a - b).collect();
        acc += h1_norm_squared(mass, laplacian, &e)?;
    }
    Ok((tau * acc).sqrt())
}

/// Outcome of the IMEX comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ImexReport {
    pub tau: f64,
    pub reference_ratio: usize,
    pub implicit_error: f64,
    pub implicit_seconds_per_step: f64,
    pub implicit_total_seconds: f64,
    /// `(N, error, seconds per step, total seconds)` of IMEX at `τ/N`.
    pub imex: Vec<(usize, f64, f64, f64)>,
}

impl ImexReport {
    /// Smallest refinement whose IMEX error is within `slack` times the
    /// implicit error.
    pub fn matching_factor(&self, slack: f64) -> Option<usize> {
        self.imex.iter().find(|(_, e, _, _)| *e <= slack * self.implicit_error).map(|(n, ..)| *n)
    }
}

/// Implicit monodomain at `τ` against IMEX at `τ/N`, both measured against
/// an implicit reference at `τ/reference_ratio`.
pub fn imex_compare<T: Real>(config: &SimulationConfig<T>, factors: &[usize], reference_ratio: usize) -> Result<ImexReport> {
    let tau = config.membrane.tau;
    let mass = crate::fem::assemble_mass(&config.grid);
    let lap = assemble_laplacian(&config.grid);
    let reference = run_monodomain(config, tau / T::from_count(reference_ratio), NonlinearityMode::Implicit)?;
    let implicit = run_monodomain(config, tau, NonlinearityMode::Implicit)?;
    let implicit_error = bochner_error(&mass, &lap, &implicit.potentials, &reference.potentials, reference_ratio, tau)?.as_f64();
    let total = |r: &MonodomainRun<T>| r.solve_seconds.iter().sum::<f64>();
    let mut imex = Vec::new();
    for &nf in factors {
        if reference_ratio % nf != 0 {
            return Err(Error::InvalidConfig(format!("refinement {nf} does not divide the reference ratio {reference_ratio}")));
        }
        let sub = tau / T::from_count(nf);
        let run = run_monodomain(config, sub, NonlinearityMode::Explicit)?;
        // compare at the implicit time levels
        let sampled: Vec<Vec<T>> = run.potentials.iter().step_by(nf).cloned().collect();
        let err = bochner_error(&mass, &lap, &sampled, &reference.potentials, reference_ratio, tau)?.as_f64();
        let t = total(&run);
        imex.push((nf, err, t / run.solve_seconds.len().max(1) as f64, t));
    }
    let it = total(&implicit);
    Ok(ImexReport {
        tau: tau.as_f64(),
        reference_ratio,
        implicit_error,
        implicit_seconds_per_step: it / implicit.solve_seconds.len().max(1) as f64,
        implicit_total_seconds: it,
        imex,
    })
}

/// Bochner errors of the Bidomain transmembrane potential for steps
/// `τ, τ/2, …` (one per entry of `refinements`) against a run at
/// `τ/reference_ratio`.
pub fn self_convergence<T: Real>(config: &SimulationConfig<T>, refinements: &[usize], reference_ratio: usize) -> Result<Vec<f64>> {
    let tau = config.membrane.tau;
    let mass = crate::fem::assemble_mass(&config.grid);
    let lap = assemble_laplacian(&config.grid);
    let trajectory = |r: usize| -> Result<Vec<Vec<T>>> {
        let mut cfg = config.clone();
        cfg.membrane.tau = tau / T::from_count(r);
        let mut sim = Simulation::new(cfg)?;
        let mut out = vec![sim.state().transmembrane()];
        while !sim.finished() {
            let (rec, trace) = sim.step()?;
            if !rec.converged {
                return Err(Error::StepFailure { step: sim.state().step + 1, reason: format!("{:?}", trace.reason) });
            }
            out.push(sim.state().transmembrane());
        }
        Ok(out)
    };
    let reference = trajectory(reference_ratio)?;
    refinements
        .iter()
        .map(|&r| {
            let coarse = trajectory(r)?;
            Ok(bochner_error(&mass, &lap, &coarse, &reference, reference_ratio / r, tau / T::from_count(r))?.as_f64())
        })
        .collect()
}
