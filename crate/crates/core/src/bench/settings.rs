//! Flat `key = value` configuration of the experiment harness.

use std::fmt::Display;
use std::str::FromStr;

use crate::bidomain::MembraneParams;
use crate::error::{Error, Result};
use crate::fem::{AxisBox, ConductivitySet, StructuredGrid};
use crate::ionic::{FitzHughNagumo, StateBox};
use crate::nsolve::{NcgBeta, NonlinearMethod, NonlinearSolveSpec};
use crate::timeloop::{SimulationConfig, StimulusProtocol, DEFAULT_STIMULUS};

/// Parameter grid of the tuning experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningGrid {
    pub ew_rtol: Vec<f64>,
    pub qn_m: Vec<usize>,
    pub ngmres_m: Vec<usize>,
    pub ncg: Vec<NcgBeta>,
}

impl Default for TuningGrid {
    fn default() -> Self {
        Self { ew_rtol: vec![0.5, 0.1, 0.01, 0.001], qn_m: vec![2, 5, 10, 20], ngmres_m: vec![1, 2, 5, 10], ncg: NcgBeta::ALL.to_vec() }
    }
}

/// Every knob of the harness. Boxes are fractions of the domain extent.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub elements: usize,
    pub length: f64,
    pub tau: f64,
    pub t_end: f64,
    pub chi: f64,
    pub cm: f64,
    pub ionic: FitzHughNagumo<f64>,
    pub state_box: StateBox<f64>,
    pub sigma_intra: [f64; 3],
    pub sigma_extra: [f64; 3],
    pub fiber_angles: (f64, f64),
    pub stimulus_amplitude: f64,
    pub stimulus_start: f64,
    pub stimulus_duration: f64,
    pub stimulus_lo: [f64; 3],
    pub stimulus_hi: [f64; 3],
    pub ischemia_lo: [f64; 3],
    pub ischemia_hi: [f64; 3],
    pub solver: NonlinearSolveSpec,
    pub enforce_dt_bound: bool,
    pub methods: Vec<NonlinearMethod>,
    pub sizes: Vec<usize>,
    pub threads: Vec<usize>,
    pub full_beat_t_end: f64,
    pub imex_factors: Vec<usize>,
    pub imex_reference_ratio: usize,
    pub tuning: TuningGrid,
}

impl Default for BenchSettings {
    fn default() -> Self {
        let normal = ConductivitySet::<f64>::normal();
        let third = std::f64::consts::FRAC_PI_3;
        let m = MembraneParams::<f64>::default();
        Self {
            elements: 16,
            length: 0.4,
            tau: m.tau,
            t_end: 1.0,
            chi: m.chi,
            cm: m.cm,
            ionic: FitzHughNagumo::default(),
            state_box: StateBox::default(),
            sigma_intra: normal.intra,
            sigma_extra: normal.extra,
            fiber_angles: (-third, third),
            stimulus_amplitude: DEFAULT_STIMULUS,
            stimulus_start: 0.0,
            stimulus_duration: 1.0,
            stimulus_lo: [0.0; 3],
            stimulus_hi: [0.25; 3],
            ischemia_lo: [0.375, 0.375, 0.0],
            ischemia_hi: [0.625, 0.625, 1.0],
            solver: NonlinearSolveSpec::default(),
            enforce_dt_bound: true,
            methods: NonlinearMethod::ALL.to_vec(),
            sizes: vec![16, 24, 32, 48],
            threads: vec![1, 2, 4, 8],
            full_beat_t_end: 100.0,
            imex_factors: vec![1, 2, 4],
            imex_reference_ratio: 256,
            tuning: TuningGrid::default(),
        }
    }
}

/// Keys accepted by [`BenchSettings::set`], in header order.
pub const KEYS: &[&str] = &[
    "grid.n",
    "grid.length",
    "tau",
    "t_end",
    "membrane.chi",
    "membrane.cm",
    "ionic.k",
    "ionic.a",
    "ionic.gamma",
    "ionic.eps",
    "ionic.v_ref",
    "box.v",
    "box.w",
    "sigma.intra",
    "sigma.extra",
    "fibers.angles",
    "stimulus.amplitude",
    "stimulus.start",
    "stimulus.duration",
    "stimulus.lo",
    "stimulus.hi",
    "ischemia.lo",
    "ischemia.hi",
    "solver.method",
    "solver.atol",
    "solver.rtol",
    "solver.max_it",
    "solver.qn_m",
    "solver.ncg_type",
    "solver.ngmres_m",
    "solver.ew_rtol",
    "solver.jaclow_it",
    "ksp.rtol",
    "ksp.max_it",
    "enforce_dt_bound",
    "methods",
    "sizes",
    "threads",
    "full_beat.t_end",
    "imex.factors",
    "imex.reference_ratio",
    "tuning.ew_rtol",
    "tuning.qn_m",
    "tuning.ngmres_m",
    "tuning.ncg",
];

fn scalar<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value.trim().parse().map_err(|_| Error::Usage(format!("cannot parse `{value}` for `{key}`")))
}

fn list<V: FromStr>(key: &str, value: &str) -> Result<Vec<V>> {
    let out: Vec<V> = value.split(',').map(|s| scalar(key, s)).collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::Usage(format!("`{key}` needs at least one value")));
    }
    Ok(out)
}

fn array<const N: usize>(key: &str, value: &str) -> Result<[f64; N]> {
    let v: Vec<f64> = list(key, value)?;
    v.try_into().map_err(|_| Error::Usage(format!("`{key}` takes exactly {N} comma-separated numbers")))
}

fn join<V: Display>(v: &[V]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl BenchSettings {
    /// Applies one override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match key {
            "grid.n" => self.elements = scalar(key, value)?,
            "grid.length" => self.length = scalar(key, value)?,
            "tau" => self.tau = scalar(key, value)?,
            "t_end" => self.t_end = scalar(key, value)?,
            "membrane.chi" => self.chi = scalar(key, value)?,
            "membrane.cm" => self.cm = scalar(key, value)?,
            "ionic.k" => self.ionic.k = scalar(key, value)?,
            "ionic.a" => self.ionic.a = scalar(key, value)?,
            "ionic.gamma" => self.ionic.gamma = scalar(key, value)?,
            "ionic.eps" => self.ionic.eps = scalar(key, value)?,
            "ionic.v_ref" => self.ionic.v_ref = scalar(key, value)?,
            "box.v" => self.state_box.v = array::<2>(key, value).map(|[a, b]| (a, b))?,
            "box.w" => self.state_box.w = array::<2>(key, value).map(|[a, b]| (a, b))?,
            "sigma.intra" => self.sigma_intra = array(key, value)?,
            "sigma.extra" => self.sigma_extra = array(key, value)?,
            "fibers.angles" => self.fiber_angles = array::<2>(key, value).map(|[a, b]| (a, b))?,
            "stimulus.amplitude" => self.stimulus_amplitude = scalar(key, value)?,
            "stimulus.start" => self.stimulus_start = scalar(key, value)?,
            "stimulus.duration" => self.stimulus_duration = scalar(key, value)?,
            "stimulus.lo" => self.stimulus_lo = array(key, value)?,
            "stimulus.hi" => self.stimulus_hi = array(key, value)?,
            "ischemia.lo" => self.ischemia_lo = array(key, value)?,
            "ischemia.hi" => self.ischemia_hi = array(key, value)?,
            "solver.method" => {
                let m: NonlinearMethod = value.trim().parse()?;
                self.solver.method = m;
                self.methods = vec![m];
            }
            "solver.atol" => self.solver.atol = scalar(key, value)?,
            "solver.rtol" => self.solver.rtol = scalar(key, value)?,
            "solver.max_it" => self.solver.max_it = scalar(key, value)?,
            "solver.qn_m" => self.solver.qn_m = scalar(key, value)?,
            "solver.ncg_type" => self.solver.ncg_beta = value.trim().parse()?,
            "solver.ngmres_m" => self.solver.ngmres_m = scalar(key, value)?,
            "solver.ew_rtol" => self.solver.ew_rtol0 = scalar(key, value)?,
            "solver.jaclow_it" => self.solver.jaclow_inner_it = scalar(key, value)?,
            "ksp.rtol" => self.solver.linear.rtol = scalar(key, value)?,
            "ksp.max_it" => self.solver.linear.max_it = scalar(key, value)?,
            "enforce_dt_bound" => self.enforce_dt_bound = scalar(key, value)?,
            "methods" => {
                self.methods = value.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?;
                self.solver.method = self.methods[0];
            }
            "sizes" => self.sizes = list(key, value)?,
            "threads" => self.threads = list(key, value)?,
            "full_beat.t_end" => self.full_beat_t_end = scalar(key, value)?,
            "imex.factors" => self.imex_factors = list(key, value)?,
            "imex.reference_ratio" => self.imex_reference_ratio = scalar(key, value)?,
            "tuning.ew_rtol" => self.tuning.ew_rtol = list(key, value)?,
            "tuning.qn_m" => self.tuning.qn_m = list(key, value)?,
            "tuning.ngmres_m" => self.tuning.ngmres_m = list(key, value)?,
            "tuning.ncg" => self.tuning.ncg = value.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?,
            _ => return Err(Error::Usage(format!("unknown key `{key}`; accepted keys: {}", KEYS.join(", ")))),
        }
        Ok(())
    }

    /// Applies a `key=value` override string.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| Error::Usage(format!("override `{pair}` is not of the form key=value")))?;
        self.set(k, v)
    }

    /// Applies a flat config text: one `key = value` per line, `#` starts a
    /// comment, blank lines ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.set_pair(line).map_err(|e| Error::Usage(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// Resolved values of every key, in [`KEYS`] order.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let s = &self.solver;
        let values = [
            self.elements.to_string(),
            self.length.to_string(),
            self.tau.to_string(),
            self.t_end.to_string(),
            self.chi.to_string(),
            self.cm.to_string(),
            self.ionic.k.to_string(),
            self.ionic.a.to_string(),
            self.ionic.gamma.to_string(),
            self.ionic.eps.to_string(),
            self.ionic.v_ref.to_string(),
            join(&[self.state_box.v.0, self.state_box.v.1]),
            join(&[self.state_box.w.0, self.state_box.w.1]),
            join(&self.sigma_intra),
            join(&self.sigma_extra),
            join(&[self.fiber_angles.0, self.fiber_angles.1]),
            self.stimulus_amplitude.to_string(),
            self.stimulus_start.to_string(),
            self.stimulus_duration.to_string(),
            join(&self.stimulus_lo),
            join(&self.stimulus_hi),
            join(&self.ischemia_lo),
            join(&self.ischemia_hi),
            s.method.to_string(),
            s.atol.to_string(),
            s.rtol.to_string(),
            s.max_it.to_string(),
            s.qn_m.to_string(),
            s.ncg_beta.to_string(),
            s.ngmres_m.to_string(),
            s.ew_rtol0.to_string(),
            s.jaclow_inner_it.to_string(),
            s.linear.rtol.to_string(),
            s.linear.max_it.to_string(),
            self.enforce_dt_bound.to_string(),
            join(&self.methods),
            join(&self.sizes),
            join(&self.threads),
            self.full_beat_t_end.to_string(),
            join(&self.imex_factors),
            self.imex_reference_ratio.to_string(),
            join(&self.tuning.ew_rtol),
            join(&self.tuning.qn_m),
            join(&self.tuning.ngmres_m),
            join(&self.tuning.ncg),
        ];
        KEYS.iter().map(|k| k.to_string()).zip(values).collect()
    }

    /// Simulation on an `n³` grid, optionally with the ischemic box.
    pub fn simulation(&self, n: usize, ischemic: bool) -> Result<SimulationConfig<f64>> {
        let grid = StructuredGrid::cube(n, self.length)?;
        let mut conductivities = ConductivitySet { intra: self.sigma_intra, extra: self.sigma_extra, ischemia: None };
        if ischemic {
            conductivities = conductivities.with_ischemic_box(AxisBox::fractional(&grid, self.ischemia_lo, self.ischemia_hi));
        }
        let stimulus = StimulusProtocol {
            region: AxisBox::fractional(&grid, self.stimulus_lo, self.stimulus_hi),
            amplitude: self.stimulus_amplitude,
            start: self.stimulus_start,
            duration: self.stimulus_duration,
        };
        let config = SimulationConfig {
            grid,
            fiber_angles: self.fiber_angles,
            conductivities,
            ionic: self.ionic,
            membrane: MembraneParams { chi: self.chi, cm: self.cm, tau: self.tau },
            t_end: self.t_end,
            stimulus,
            solver: self.solver.clone(),
            enforce_dt_bound: self.enforce_dt_bound,
            state_box: self.state_box,
        };
        config.validate()?;
        Ok(config)
    }

    /// Simulation on the configured grid.
    pub fn reference(&self) -> Result<SimulationConfig<f64>> {
        self.simulation(self.elements, false)
    }
}
