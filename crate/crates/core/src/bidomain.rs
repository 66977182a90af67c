//! The decoupled-in-time Bidomain system, its energy potential and a
//! monodomain reduction.
//!
//! Unknowns are stored as `x = [u_i; u_e]`. Every matrix is assembled with
//! the 2×2×2 Gauss rule, including the ionic terms, so that the residual is
//! the exact gradient of the potential and the Jacobian its exact Hessian.

use crate::error::{Error, Result};
use crate::fem::{
    assemble_conductivity, assemble_laplacian, assemble_mass, ConductivitySet, FiberField, GaussIntegrator, Medium,
    StructuredGrid,
};
use crate::ionic::{IonicModel, StateBox};
use crate::nsolve::NonlinearSystem;
use crate::sparse::vecops::{dot, sum};
use crate::sparse::{CsrMatrix, GmgOptions};
use crate::Real;

/// Conductivities are given in Ω⁻¹cm⁻¹. With χ in cm⁻¹, C_m in μF/cm² and
/// time in ms the membrane terms are in mS/cm³, so the diffusion operators
/// are assembled in mS/cm.
pub const CONDUCTIVITY_UNIT: f64 = 1e3;

/// Surface-to-volume ratio, membrane capacitance and time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembraneParams<T> {
    /// χ (cm⁻¹)
    pub chi: T,
    /// C_m (μF/cm²)
    pub cm: T,
    /// τ (ms)
    pub tau: T,
}

impl<T: Real> Default for MembraneParams<T> {
    fn default() -> Self {
        Self { chi: T::lit(1000.0), cm: T::one(), tau: T::lit(0.05) }
    }
}

impl<T: Real> MembraneParams<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("chi", self.chi), ("C_m", self.cm), ("tau", self.tau)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `χ C_m / τ`
    pub fn capacitive(&self) -> T {
        self.chi * self.cm / self.tau
    }
}

/// Intra- and extracellular potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitVector<T> {
    pub u_i: Vec<T>,
    pub u_e: Vec<T>,
}

impl<T: Real> SplitVector<T> {
    pub fn zeros(n: usize) -> Self {
        Self { u_i: vec![T::zero(); n], u_e: vec![T::zero(); n] }
    }

    pub fn from_flat(x: &[T]) -> Self {
        let n = x.len() / 2;
        Self { u_i: x[..n].to_vec(), u_e: x[n..].to_vec() }
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut x = self.u_i.clone();
        x.extend_from_slice(&self.u_e);
        x
    }

    /// `v = u_i − u_e`
    pub fn transmembrane(&self) -> Vec<T> {
        self.u_i.iter().zip(&self.u_e).map(|(&a, &b)| a - b).collect()
    }
}

/// `v = u_i − u_e` from the flat layout.
pub fn transmembrane<T: Real>(x: &[T]) -> Vec<T> {
    let n = x.len() / 2;
    x[..n].iter().zip(&x[n..]).map(|(&a, &b)| a - b).collect()
}

/// One time step of the Bidomain system with frozen `v_prev`, `w` and
/// applied currents.
#[derive(Debug, Clone)]
pub struct BidomainProblem<T, I> {
    grid: StructuredGrid<T>,
    mass: CsrMatrix<T>,
    k_i: CsrMatrix<T>,
    k_e: CsrMatrix<T>,
    integrator: GaussIntegrator<T>,
    /// `M 1`
    mass_weights: Vec<T>,
    volume: T,
    params: MembraneParams<T>,
    model: I,
    state_box: StateBox<T>,
    gauge: bool,
    v_prev: Vec<T>,
    w: Vec<T>,
    m_v_prev: Vec<T>,
    m_iapp_i: Vec<T>,
    m_iapp_e: Vec<T>,
}

impl<T: Real, I: IonicModel<T>> BidomainProblem<T, I> {
    /// Assembles the operators. The step data start at rest with no applied
    /// current.
    pub fn new(
        grid: StructuredGrid<T>,
        fibers: &FiberField<T>,
        conductivities: &ConductivitySet<T>,
        model: I,
        params: MembraneParams<T>,
    ) -> Result<Self> {
        params.validate()?;
        if fibers.len() != grid.num_elements() {
            return Err(Error::DimensionMismatch { expected: grid.num_elements(), got: fibers.len() });
        }
        let mass = assemble_mass(&grid);
        let sigma = conductivities.scaled(T::lit(CONDUCTIVITY_UNIT));
        let k_i = assemble_conductivity(&grid, fibers, &sigma, Medium::Intra)?;
        let k_e = assemble_conductivity(&grid, fibers, &sigma, Medium::Extra)?;
        let n = grid.num_nodes();
        let mass_weights = mass.spmv(&vec![T::one(); n])?;
        let volume = sum(&mass_weights);
        let integrator = GaussIntegrator::new(&grid);
        let v_prev = vec![model.v_ref(); n];
        let w = vec![model.gating_equilibrium(model.v_ref()); n];
        let m_v_prev = mass.spmv(&v_prev)?;
        Ok(Self {
            grid,
            mass,
            k_i,
            k_e,
            integrator,
            mass_weights,
            volume,
            params,
            model,
            state_box: StateBox::default(),
            gauge: true,
            v_prev,
            w,
            m_v_prev,
            m_iapp_i: vec![T::zero(); n],
            m_iapp_e: vec![T::zero(); n],
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.grid.num_nodes()
    }

    pub fn grid(&self) -> &StructuredGrid<T> {
        &self.grid
    }

    pub fn mass(&self) -> &CsrMatrix<T> {
        &self.mass
    }

    pub fn stiffness_intra(&self) -> &CsrMatrix<T> {
        &self.k_i
    }

    pub fn stiffness_extra(&self) -> &CsrMatrix<T> {
        &self.k_e
    }

    pub fn params(&self) -> &MembraneParams<T> {
        &self.params
    }

    pub fn model(&self) -> &I {
        &self.model
    }

    pub fn v_prev(&self) -> &[T] {
        &self.v_prev
    }

    pub fn gating(&self) -> &[T] {
        &self.w
    }

    pub fn state_box(&self) -> &StateBox<T> {
        &self.state_box
    }

    pub fn set_state_box(&mut self, bx: StateBox<T>) {
        self.state_box = bx;
    }

    pub fn set_gauge(&mut self, on: bool) {
        self.gauge = on;
    }

    pub fn set_tau(&mut self, tau: T) -> Result<()> {
        let params = MembraneParams { tau, ..self.params };
        params.validate()?;
        self.params = params;
        Ok(())
    }

    /// Installs the data of the next step. Applied currents must have zero
    /// total: `|1ᵀM(I_i + I_e)| ≤ 1e-10 ‖M (I_i, I_e)‖`.
    pub fn set_step_data(&mut self, v_prev: &[T], w: &[T], iapp_i: &[T], iapp_e: &[T]) -> Result<()> {
        let n = self.num_nodes();
        for len in [v_prev.len(), w.len(), iapp_i.len(), iapp_e.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        let m_i = self.mass.spmv(iapp_i)?;
        let m_e = self.mass.spmv(iapp_e)?;
        let total = (sum(&m_i) + sum(&m_e)).abs();
        let scale = (dot(&m_i, &m_i) + dot(&m_e, &m_e)).sqrt();
        if total > T::lit(1e-10) * scale {
            return Err(Error::InvalidConfig(format!(
                "applied currents are not compatible: net current {:e} (scale {:e})",
                total.as_f64(),
                scale.as_f64()
            )));
        }
        self.v_prev = v_prev.to_vec();
        self.m_v_prev = self.mass.spmv(v_prev)?;
        self.w = w.to_vec();
        self.m_iapp_i = m_i;
        self.m_iapp_e = m_e;
        Ok(())
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        let expected = 2 * self.num_nodes();
        if x.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: x.len() });
        }
        Ok(())
    }

    /// `(F_i, F_e)`, the gradient of [`Self::potential`].
    pub fn residual(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_dim(x)?;
        let n = self.num_nodes();
        let (u_i, u_e) = x.split_at(n);
        let v = transmembrane(x);
        let a = self.params.capacitive();
        let chi = self.params.chi;
        let mv = self.mass.spmv(&v)?;
        let ion = self.integrator.load(&v, &self.w, |v, w| self.model.i_ion(v, w));
        let ki = self.k_i.spmv(u_i)?;
        let ke = self.k_e.spmv(u_e)?;
        let mut f = vec![T::zero(); 2 * n];
        let (f_i, f_e) = f.split_at_mut(n);
        for j in 0..n {
            let coupling = a * (mv[j] - self.m_v_prev[j]) + chi * ion[j];
            f_i[j] = coupling + ki[j] - self.m_iapp_i[j];
            f_e[j] = -coupling + ke[j] - self.m_iapp_e[j];
        }
        Ok(f)
    }

    /// `S = (χC_m/τ) M + χ M_∂`, the membrane block of the Hessian.
    fn membrane_block(&self, v: &[T]) -> Result<CsrMatrix<T>> {
        let chi = self.params.chi;
        let m_d = self.integrator.weighted_mass(v, &self.w, |v, w| self.model.d_i_ion_dv(v, w));
        CsrMatrix::linear_combination(&[(&self.mass, self.params.capacitive()), (&m_d, chi)])
    }

    /// `[[K_i + S, −S], [−S, K_e + S]]`
    pub fn jacobian(&self, x: &[T]) -> Result<CsrMatrix<T>> {
        self.check_dim(x)?;
        let s = self.membrane_block(&transmembrane(x))?;
        block_hessian(&s, &self.k_i, &self.k_e)
    }

    /// `Ψ = ½(χC_m/τ)‖v − v_prev‖²_M + ½u_iᵀK_i u_i + ½u_eᵀK_e u_e
    ///     + ∫Θ(v, w) − u_iᵀM I_i − u_eᵀM I_e`
    pub fn potential(&self, x: &[T]) -> Result<T> {
        self.check_dim(x)?;
        let n = self.num_nodes();
        let (u_i, u_e) = x.split_at(n);
        let v = transmembrane(x);
        let half = T::lit(0.5);
        let dv: Vec<T> = v.iter().zip(&self.v_prev).map(|(&a, &b)| a - b).collect();
        let capacitive = half * self.params.capacitive() * dot(&dv, &self.mass.spmv(&dv)?);
        let diffusion = half * (dot(u_i, &self.k_i.spmv(u_i)?) + dot(u_e, &self.k_e.spmv(u_e)?));
        let chi = self.params.chi;
        let reaction = self.integrator.integral(&v, &self.w, |v, w| self.model.theta(chi, v, w));
        let applied = dot(u_i, &self.m_iapp_i) + dot(u_e, &self.m_iapp_e);
        Ok(capacitive + diffusion + reaction - applied)
    }

    /// Largest τ for which the potential is convex on the state box:
    /// `(χC_m/τ) M + χ M_∂ ⪰ 0` holds when `C_m/τ ≥ −I̲`.
    pub fn convexity_timestep_bound(&self) -> T {
        convexity_timestep_bound(&self.model, self.params.cm, &self.state_box)
    }

    /// Volume-weighted mean of `u_e`.
    pub fn extracellular_mean(&self, x: &[T]) -> T {
        let n = self.num_nodes();
        dot(&self.mass_weights, &x[n..]) / self.volume
    }

    /// Shifts both potentials by the mean of `u_e`; `v` is unchanged.
    pub fn gauge_project(&self, x: &mut [T]) {
        let mean = self.extracellular_mean(x);
        x.iter_mut().for_each(|xi| *xi -= mean);
    }
}

/// `τ_max = C_m / |I̲|`, or `+∞` when `I̲ ≥ 0`.
pub fn convexity_timestep_bound<T: Real, I: IonicModel<T> + ?Sized>(model: &I, cm: T, bx: &StateBox<T>) -> T {
    let (lo, _) = model.derivative_bounds(bx);
    if lo >= T::zero() {
        T::infinity()
    } else {
        cm / lo.abs()
    }
}

/// Assembles `[[K_i + S, −S], [−S, K_e + S]]` from matrices sharing one pattern.
fn block_hessian<T: Real>(s: &CsrMatrix<T>, k_i: &CsrMatrix<T>, k_e: &CsrMatrix<T>) -> Result<CsrMatrix<T>> {
    if !s.same_pattern(k_i) || !s.same_pattern(k_e) {
        return Err(Error::InvalidConfig("Bidomain blocks must share a sparsity pattern".into()));
    }
    let n = s.nrows();
    let nnz = s.nnz();
    let (rp, ci) = (s.row_ptr(), s.col_idx());
    let mut row_ptr = Vec::with_capacity(2 * n + 1);
    let mut col_idx = Vec::with_capacity(4 * nnz);
    let mut values = Vec::with_capacity(4 * nnz);
    row_ptr.push(0);
    for (diag, offset_diag, offset_off) in [(k_i, 0, n), (k_e, n, 0)] {
        for r in 0..n {
            let range = rp[r]..rp[r + 1];
            // columns must stay sorted: the left block precedes the right one
            let blocks: [(usize, bool); 2] =
                if offset_diag == 0 { [(offset_diag, true), (offset_off, false)] } else { [(offset_off, false), (offset_diag, true)] };
            for (offset, is_diag) in blocks {
                for slot in range.clone() {
                    col_idx.push(ci[slot] + offset);
                    values.push(if is_diag { diag.values()[slot] + s.values()[slot] } else { -s.values()[slot] });
                }
            }
            row_ptr.push(col_idx.len());
        }
    }
    CsrMatrix::new(2 * n, 2 * n, row_ptr, col_idx, values)
}

impl<T: Real, I: IonicModel<T>> NonlinearSystem<T> for BidomainProblem<T, I> {
    fn dim(&self) -> usize {
        2 * self.num_nodes()
    }

    fn residual(&self, x: &[T]) -> Result<Vec<T>> {
        BidomainProblem::residual(self, x)
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    fn jacobian(&self, x: &[T]) -> Result<CsrMatrix<T>> {
        BidomainProblem::jacobian(self, x)
    }

    fn project_update(&self, x: &mut [T]) {
        if self.gauge {
            self.gauge_project(x);
        }
    }

    /// The residual is orthogonal to `(1, 1)` for compatible data; the
    /// projection only removes round-off along the kernel.
    fn project_residual(&self, f: &mut [T]) {
        if self.gauge {
            let mean = sum(f) / T::from_count(f.len());
            f.iter_mut().for_each(|v| *v -= mean);
        }
    }

    fn nullspace(&self) -> Option<Vec<T>> {
        let len = self.dim();
        Some(vec![T::one() / T::from_count(len).sqrt(); len])
    }

    fn multigrid_layout(&self) -> Option<([usize; 3], GmgOptions)> {
        Some((self.grid.elements_per_axis(), GmgOptions { nfields: 2, constant_nullspace: true, ..GmgOptions::default() }))
    }
}

/// Treatment of the ionic current in the monodomain reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearityMode {
    /// `I_ion(v^n, w^n)`
    Implicit,
    /// `I_ion(v^{n−1}, w^n)`, which makes each step linear.
    Explicit,
}

/// Single-field reduction with harmonic-mean conductivities.
#[derive(Debug, Clone)]
pub struct MonodomainProblem<T, I> {
    grid: StructuredGrid<T>,
    mass: CsrMatrix<T>,
    k: CsrMatrix<T>,
    laplacian: CsrMatrix<T>,
    integrator: GaussIntegrator<T>,
    params: MembraneParams<T>,
    model: I,
    mode: NonlinearityMode,
    v_prev: Vec<T>,
    w: Vec<T>,
    m_v_prev: Vec<T>,
    m_iapp: Vec<T>,
    /// Ionic load at `v_prev` (explicit mode).
    ion_prev: Vec<T>,
}

impl<T: Real, I: IonicModel<T>> MonodomainProblem<T, I> {
    pub fn new(
        grid: StructuredGrid<T>,
        fibers: &FiberField<T>,
        conductivities: &ConductivitySet<T>,
        model: I,
        params: MembraneParams<T>,
        mode: NonlinearityMode,
    ) -> Result<Self> {
        params.validate()?;
        if fibers.len() != grid.num_elements() {
            return Err(Error::DimensionMismatch { expected: grid.num_elements(), got: fibers.len() });
        }
        let mass = assemble_mass(&grid);
        let sigma = conductivities.harmonic_mean().scaled(T::lit(CONDUCTIVITY_UNIT));
        let k = assemble_conductivity(&grid, fibers, &sigma, Medium::Intra)?;
        let laplacian = assemble_laplacian(&grid);
        let integrator = GaussIntegrator::new(&grid);
        let n = grid.num_nodes();
        let mut p = Self {
            grid,
            mass,
            k,
            laplacian,
            integrator,
            params,
            model,
            mode,
            v_prev: Vec::new(),
            w: Vec::new(),
            m_v_prev: Vec::new(),
            m_iapp: vec![T::zero(); n],
            ion_prev: Vec::new(),
        };
        let v0 = vec![p.model.v_ref(); n];
        let w0 = vec![p.model.gating_equilibrium(p.model.v_ref()); n];
        p.set_step_data(&v0, &w0, &vec![T::zero(); n])?;
        Ok(p)
    }

    pub fn num_nodes(&self) -> usize {
        self.grid.num_nodes()
    }

    pub fn grid(&self) -> &StructuredGrid<T> {
        &self.grid
    }

    pub fn mass(&self) -> &CsrMatrix<T> {
        &self.mass
    }

    /// Unit isotropic stiffness, for H¹ seminorms.
    pub fn laplacian(&self) -> &CsrMatrix<T> {
        &self.laplacian
    }

    pub fn params(&self) -> &MembraneParams<T> {
        &self.params
    }

    pub fn model(&self) -> &I {
        &self.model
    }

    pub fn mode(&self) -> NonlinearityMode {
        self.mode
    }

    pub fn set_tau(&mut self, tau: T) -> Result<()> {
        let params = MembraneParams { tau, ..self.params };
        params.validate()?;
        self.params = params;
        Ok(())
    }

    pub fn set_step_data(&mut self, v_prev: &[T], w: &[T], iapp: &[T]) -> Result<()> {
        let n = self.num_nodes();
        for len in [v_prev.len(), w.len(), iapp.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        self.v_prev = v_prev.to_vec();
        self.w = w.to_vec();
        self.m_v_prev = self.mass.spmv(v_prev)?;
        self.m_iapp = self.mass.spmv(iapp)?;
        self.ion_prev = match self.mode {
            NonlinearityMode::Explicit => self.integrator.load(v_prev, w, |v, w| self.model.i_ion(v, w)),
            NonlinearityMode::Implicit => Vec::new(),
        };
        Ok(())
    }

    fn check_dim(&self, v: &[T]) -> Result<()> {
        if v.len() != self.num_nodes() {
            return Err(Error::DimensionMismatch { expected: self.num_nodes(), got: v.len() });
        }
        Ok(())
    }

    pub fn residual(&self, v: &[T]) -> Result<Vec<T>> {
        self.check_dim(v)?;
        let a = self.params.capacitive();
        let chi = self.params.chi;
        let mv = self.mass.spmv(v)?;
        let kv = self.k.spmv(v)?;
        let implicit_ion;
        let ion = match self.mode {
            NonlinearityMode::Implicit => {
                implicit_ion = self.integrator.load(v, &self.w, |v, w| self.model.i_ion(v, w));
                &implicit_ion
            }
            NonlinearityMode::Explicit => &self.ion_prev,
        };
        Ok((0..v.len()).map(|j| a * (mv[j] - self.m_v_prev[j]) + kv[j] + chi * ion[j] - self.m_iapp[j]).collect())
    }

    pub fn jacobian(&self, v: &[T]) -> Result<CsrMatrix<T>> {
        self.check_dim(v)?;
        let a = self.params.capacitive();
        match self.mode {
            NonlinearityMode::Implicit => {
                let m_d = self.integrator.weighted_mass(v, &self.w, |v, w| self.model.d_i_ion_dv(v, w));
                CsrMatrix::linear_combination(&[(&self.mass, a), (&self.k, T::one()), (&m_d, self.params.chi)])
            }
            NonlinearityMode::Explicit => CsrMatrix::linear_combination(&[(&self.mass, a), (&self.k, T::one())]),
        }
    }

    /// Energy whose gradient is [`Self::residual`].
    pub fn potential(&self, v: &[T]) -> Result<T> {
        self.check_dim(v)?;
        let half = T::lit(0.5);
        let dv: Vec<T> = v.iter().zip(&self.v_prev).map(|(&a, &b)| a - b).collect();
        let quad = half * self.params.capacitive() * dot(&dv, &self.mass.spmv(&dv)?) + half * dot(v, &self.k.spmv(v)?);
        let chi = self.params.chi;
        let reaction = match self.mode {
            NonlinearityMode::Implicit => self.integrator.integral(v, &self.w, |v, w| self.model.theta(chi, v, w)),
            NonlinearityMode::Explicit => chi * dot(&self.ion_prev, v),
        };
        Ok(quad + reaction - dot(v, &self.m_iapp))
    }
}

impl<T: Real, I: IonicModel<T>> NonlinearSystem<T> for MonodomainProblem<T, I> {
    fn dim(&self) -> usize {
        self.num_nodes()
    }

    fn residual(&self, x: &[T]) -> Result<Vec<T>> {
        MonodomainProblem::residual(self, x)
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    fn jacobian(&self, x: &[T]) -> Result<CsrMatrix<T>> {
        MonodomainProblem::jacobian(self, x)
    }

    fn multigrid_layout(&self) -> Option<([usize; 3], GmgOptions)> {
        Some((self.grid.elements_per_axis(), GmgOptions::default()))
    }
}

/// `‖x‖_M² + ‖∇x‖²` with the mass matrix and unit Laplacian.
pub fn h1_norm_squared<T: Real>(mass: &CsrMatrix<T>, laplacian: &CsrMatrix<T>, x: &[T]) -> Result<T> {
    Ok(dot(x, &mass.spmv(x)?) + dot(x, &laplacian.spmv(x)?))
}
