//! Solver selection, controls and iteration traces.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::sparse::{KspMethod, LinearSolveSpec, PcKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NonlinearMethod {
    Newton,
    InexactNewton,
    QnPreonly,
    QnJacLow,
    Ngmres,
    Ncg,
}

impl NonlinearMethod {
    pub const ALL: [NonlinearMethod; 6] = [
        NonlinearMethod::Newton,
        NonlinearMethod::InexactNewton,
        NonlinearMethod::QnPreonly,
        NonlinearMethod::QnJacLow,
        NonlinearMethod::Ngmres,
        NonlinearMethod::Ncg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Newton => "newton",
            Self::InexactNewton => "inewton",
            Self::QnPreonly => "qn_preonly",
            Self::QnJacLow => "qn_jaclow",
            Self::Ngmres => "ngmres",
            Self::Ncg => "ncg",
        }
    }

    pub fn needs_jacobian(self) -> bool {
        matches!(self, Self::Newton | Self::InexactNewton | Self::QnPreonly | Self::QnJacLow)
    }
}

impl fmt::Display for NonlinearMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NonlinearMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown nonlinear method `{s}` (newton, inewton, qn_preonly, qn_jaclow, ngmres, ncg)")))
    }
}

/// Conjugacy rule of nonlinear CG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NcgBeta {
    FletcherReeves,
    PolakRibierePolyak,
    DaiYuan,
    ConjugateDescent,
}

impl NcgBeta {
    pub const ALL: [NcgBeta; 4] = [Self::FletcherReeves, Self::PolakRibierePolyak, Self::DaiYuan, Self::ConjugateDescent];

    pub fn name(self) -> &'static str {
        match self {
            Self::FletcherReeves => "fr",
            Self::PolakRibierePolyak => "prp",
            Self::DaiYuan => "dy",
            Self::ConjugateDescent => "cd",
        }
    }
}

impl fmt::Display for NcgBeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NcgBeta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown NCG type `{s}` (fr, prp, dy, cd)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearSolveSpec {
    pub method: NonlinearMethod,
    pub atol: f64,
    pub rtol: f64,
    pub stol: f64,
    pub max_it: usize,
    pub qn_m: usize,
    pub ncg_beta: NcgBeta,
    pub ngmres_m: usize,
    pub ew_rtol0: f64,
    pub jaclow_inner_it: usize,
    pub linear: LinearSolveSpec,
}

impl Default for NonlinearSolveSpec {
    fn default() -> Self {
        Self {
            method: NonlinearMethod::Newton,
            atol: 1e-12,
            rtol: 1e-6,
            stol: 0.0,
            max_it: 2000,
            qn_m: 5,
            ncg_beta: NcgBeta::FletcherReeves,
            ngmres_m: 5,
            ew_rtol0: 0.1,
            jaclow_inner_it: 10,
            linear: LinearSolveSpec { method: KspMethod::Cg, pc: PcKind::Gmg, rtol: 1e-8, ..LinearSolveSpec::default() },
        }
    }
}

impl NonlinearSolveSpec {
    pub fn with_method(method: NonlinearMethod) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.qn_m < 1 {
            return Err(Error::InvalidConfig("qn_m must be at least 1".into()));
        }
        if self.ngmres_m < 1 {
            return Err(Error::InvalidConfig("ngmres_m must be at least 1".into()));
        }
        if !(self.ew_rtol0 > 0.0 && self.ew_rtol0 < 1.0) {
            return Err(Error::InvalidConfig(format!("ew_rtol0 must lie in (0, 1), got {}", self.ew_rtol0)));
        }
        if !(self.atol >= 0.0 && self.rtol >= 0.0) {
            return Err(Error::InvalidConfig("tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Atol,
    Rtol,
    MaxIt,
    Breakdown,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(self, Self::Atol | Self::Rtol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    /// `‖F(x_k)‖₂`, starting with the initial guess.
    pub residual_norms: Vec<f64>,
    /// Inner linear iterations spent in each outer iteration.
    pub inner_iterations: Vec<usize>,
    pub converged: bool,
    pub reason: Termination,
    /// NCG steepest-descent restarts or NGMRES window restarts.
    pub restarts: usize,
    /// L-BFGS pairs rejected by the curvature safeguard.
    pub skipped_pairs: usize,
    /// Forcing terms used by inexact Newton.
    pub forcing_terms: Vec<f64>,
}

impl SolveTrace {
    pub(crate) fn start(r0: f64) -> Self {
        Self {
            residual_norms: vec![r0],
            inner_iterations: Vec::new(),
            converged: false,
            reason: Termination::MaxIt,
            restarts: 0,
            skipped_pairs: 0,
            forcing_terms: Vec::new(),
        }
    }

    pub fn iterations(&self) -> usize {
        self.residual_norms.len() - 1
    }

    pub fn total_inner_iterations(&self) -> usize {
        self.inner_iterations.iter().sum()
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual_norms.last().expect("trace holds the initial residual")
    }
}
