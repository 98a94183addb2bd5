//! Pulse description and matrix-free Hamiltonians.
//!
//! Two appliers implement [`Hamiltonian`]: the single-channel partial-wave
//! ground Hamiltonian and the five-channel pump Hamiltonian in the two-photon
//! rotating frame. Channel order of the latter is fixed:
//!
//! | index | channel | rotating-frame shift |
//! |-------|---------|----------------------|
//! | 0 | X¹Σg⁺ | 0 |
//! | 1 | (1)¹Πg | −2ω_L |
//! | 2 | Πu diabat 11 | −3ω_L |
//! | 3 | Πu diabat 22 | −3ω_L |
//! | 4 | (2)¹Σu⁺ | −3ω_L |
//!
//! X couples to Πg through χ = ¼E(t)²M(R); Πg couples to each upper channel
//! through μᵢ(R)E(t); the two Πu diabats couple through V₁₂ + ω^S₁₂. The
//! envelope is cut to exactly zero beyond `support_fwhm` FWHMs from the
//! centre, so field-dependent terms vanish identically outside the pulse.

use std::f64::consts::LN_2;
use std::sync::Arc;

use crate::curves::{diabatize, interpolate, CurveSet, CHANNEL_LABELS};
use crate::error::{Error, Result};
use crate::grid::{
    centrifugal_term, Boundary, ChannelState, KineticOperator, KineticScratch, RadialGrid, C64,
};
use crate::units;

/// Time-dependent carrier phase φ(t).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PhaseProfile {
    #[default]
    TransformLimited,
    /// φ(t) = chirp·(t − t_c)² (rad, with t in a.u.).
    Quadratic { chirp: f64 },
}

/// Gaussian pump pulse in atomic units.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseParameters {
    /// Peak field amplitude E₀ (a.u.).
    pub e0: f64,
    /// Intensity full width at half maximum (a.u. time).
    pub fwhm: f64,
    /// Carrier photon energy ω_L (hartree).
    pub omega_l: f64,
    pub t_center: f64,
    pub phase: PhaseProfile,
    /// Real polarization components, |ε|² = 1.
    pub polarization: Vec<f64>,
    /// Envelope is exactly zero beyond this many FWHMs from `t_center`.
    pub support_fwhm: f64,
}

/// Default envelope support in units of the FWHM.
pub const DEFAULT_SUPPORT_FWHM: f64 = 6.0;

impl PulseParameters {
    pub fn new(e0: f64, fwhm: f64, omega_l: f64, t_center: f64) -> Result<Self> {
        if !(fwhm > 0.0) || !(omega_l > 0.0) || !(e0 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pulse needs fwhm > 0, ω_L > 0, E₀ ≥ 0 (got {fwhm}, {omega_l}, {e0})"
            )));
        }
        Ok(Self {
            e0,
            fwhm,
            omega_l,
            t_center,
            phase: PhaseProfile::TransformLimited,
            polarization: vec![1.0],
            support_fwhm: DEFAULT_SUPPORT_FWHM,
        })
    }

    /// Pulse from laboratory units: W/cm², fs, nm, fs.
    pub fn from_lab(
        intensity_w_cm2: f64,
        fwhm_fs: f64,
        lambda_nm: f64,
        t_center_fs: f64,
    ) -> Result<Self> {
        if !(lambda_nm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "wavelength must be positive, got {lambda_nm}"
            )));
        }
        Self::new(
            units::intensity_to_field(intensity_w_cm2),
            fwhm_fs / units::AU_TIME_IN_FS,
            units::wavelength_nm_to_hartree(lambda_nm),
            t_center_fs / units::AU_TIME_IN_FS,
        )
    }

    pub fn with_polarization(mut self, eps: Vec<f64>) -> Result<Self> {
        let n: f64 = eps.iter().map(|e| e * e).sum();
        if eps.is_empty() || (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("|ε|² = {n}, expected 1")));
        }
        self.polarization = eps;
        Ok(self)
    }

    pub fn with_support(mut self, support_fwhm: f64) -> Self {
        self.support_fwhm = support_fwhm;
        self
    }

    pub fn with_phase(mut self, phase: PhaseProfile) -> Self {
        self.phase = phase;
        self
    }

    /// Same pulse with a different peak field.
    pub fn with_field(&self, e0: f64) -> Self {
        Self { e0, ..self.clone() }
    }

    pub fn peak_intensity_w_cm2(&self) -> f64 {
        units::field_to_intensity(self.e0)
    }

    /// Interval outside which the envelope is identically zero.
    pub fn support(&self) -> (f64, f64) {
        let h = self.support_fwhm * self.fwhm;
        (self.t_center - h, self.t_center + h)
    }

    /// Complex envelope E(t) = S(t)e^{iφ(t)}; `|E|²` is half its peak at `t_c ± fwhm/2`.
    pub fn envelope(&self, t: f64) -> C64 {
        let dt = t - self.t_center;
        if dt.abs() > self.support_fwhm * self.fwhm || self.e0 == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let s = self.e0 * (-2.0 * LN_2 * dt * dt / (self.fwhm * self.fwhm)).exp();
        match self.phase {
            PhaseProfile::TransformLimited => C64::new(s, 0.0),
            PhaseProfile::Quadratic { chirp } => C64::from_polar(s, chirp * dt * dt),
        }
    }
}

pub fn envelope(t: f64, p: &PulseParameters) -> C64 {
    p.envelope(t)
}

pub fn intensity_to_field(intensity_w_cm2: f64) -> f64 {
    units::intensity_to_field(intensity_w_cm2)
}

/// χ(t,R) = ¼E(t)²·(ε·M·ε)(R) for a contracted moment profile.
pub fn two_photon_coupling(t: f64, moment: &[f64], p: &PulseParameters) -> Vec<C64> {
    let e = p.envelope(t);
    let f = 0.25 * e * e;
    moment.iter().map(|&m| f * m).collect()
}

/// ω^S(t,R) = −¼|E(t)|²·(ε·α·ε)(R).
pub fn stark_shift(t: f64, alpha: &[f64], p: &PulseParameters) -> Vec<f64> {
    let f = -0.25 * p.envelope(t).norm_sqr();
    alpha.iter().map(|&a| f * a).collect()
}

/// Monomial absorbing potential `−iη((R − r_start)/(r_max − r_start))ⁿ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cap {
    pub r_start: f64,
    pub eta: f64,
    pub order: u32,
}

impl Cap {
    /// Real profile `η·f(R)`; the potential is `−i` times this.
    pub fn profile(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        if !(self.r_start > grid.r_min() && self.r_start < grid.r_max()) {
            return Err(Error::InvalidParameter(format!(
                "CAP start {} outside ({}, {})",
                self.r_start,
                grid.r_min(),
                grid.r_max()
            )));
        }
        if !(self.eta > 0.0) || !(self.order == 2 || self.order == 3) {
            return Err(Error::InvalidParameter(format!(
                "CAP needs η > 0 and n ∈ {{2,3}} (got {}, {})",
                self.eta, self.order
            )));
        }
        let span = grid.r_max() - self.r_start;
        Ok(grid
            .points()
            .into_iter()
            .map(|r| {
                if r > self.r_start {
                    self.eta * ((r - self.r_start) / span).powi(self.order as i32)
                } else {
                    0.0
                }
            })
            .collect())
    }
}

pub fn cap_potential(grid: &RadialGrid, r_start: f64, eta: f64, order: u32) -> Result<Vec<C64>> {
    Ok(Cap {
        r_start,
        eta,
        order,
    }
    .profile(grid)?
    .into_iter()
    .map(|w| C64::new(0.0, -w))
    .collect())
}

/// Worker-local scratch for Hamiltonian application.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    kinetic: KineticScratch,
}

/// What [`crate::propagator::estimate_spectral_range`] needs to bound the spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeIngredients {
    pub kinetic_max: f64,
    /// Per channel: smallest / largest diagonal potential over R and the pulse.
    pub diag_min: Vec<f64>,
    pub diag_max: Vec<f64>,
    /// Per channel: Σ over other channels of max |coupling|.
    pub coupling_row_sum: Vec<f64>,
}

/// Matrix-free Hamiltonian applied at a (frozen) time `t`.
pub trait Hamiltonian: Sync {
    fn grid(&self) -> &RadialGrid;
    fn labels(&self) -> &Arc<[String]>;
    fn j(&self) -> u32;
    fn n_channels(&self) -> usize {
        self.labels().len()
    }
    /// `out = H(t)·input`, channel-major layout.
    fn apply(&self, t: f64, input: &[C64], out: &mut [C64], ws: &mut Workspace);
    fn range_ingredients(&self) -> RangeIngredients;
    fn is_hermitian(&self) -> bool;
    fn workspace(&self) -> Workspace;

    /// Apply to a state, checking its layout.
    fn apply_state(&self, state: &ChannelState, t: f64) -> Result<ChannelState> {
        if state.grid() != self.grid() || state.labels() != self.labels() {
            return Err(Error::Layout(
                "state layout does not match the Hamiltonian".into(),
            ));
        }
        let mut out = state.clone();
        let mut ws = self.workspace();
        self.apply(t, state.data(), out.data_mut(), &mut ws);
        Ok(out)
    }

    fn zero_state(&self) -> ChannelState {
        ChannelState::zeros(*self.grid(), self.labels().clone(), self.j())
    }
}

/// Options shared by both assemblers.
#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyOptions {
    pub boundary: Boundary,
    /// Cap on every diagonal potential (hartree, rotating frame). Bounds the
    /// Chebyshev range; irrelevant to dynamics as long as it sits well above
    /// every energy the wavepackets reach.
    pub potential_ceiling: Option<f64>,
    pub cap: Option<Cap>,
    /// Refuse grids whose largest kinetic eigenvalue is below this (hartree).
    pub min_kinetic: Option<f64>,
    /// Allowed relative mismatch between pulse ω_L and the profiles' tag.
    pub omega_tolerance: f64,
}

/// Default potential ceiling in the rotating frame (hartree).
pub const DEFAULT_POTENTIAL_CEILING: f64 = 0.06;

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            boundary: Boundary::Sine,
            potential_ceiling: Some(DEFAULT_POTENTIAL_CEILING),
            cap: None,
            min_kinetic: None,
            omega_tolerance: 1e-3,
        }
    }
}

impl AssemblyOptions {
    /// No ceiling, no CAP: the exact operator (used by oracles).
    pub fn exact() -> Self {
        Self {
            potential_ceiling: None,
            ..Self::default()
        }
    }

    fn check_grid(&self, kinetic: &KineticOperator) -> Result<()> {
        if let Some(need) = self.min_kinetic {
            if kinetic.max_eigenvalue() < need {
                return Err(Error::InvalidGrid(format!(
                    "grid resolves kinetic energies up to {:.4e} hartree but {:.4e} is required; add points",
                    kinetic.max_eigenvalue(),
                    need
                )));
            }
        }
        Ok(())
    }

    fn clip(&self, v: f64) -> f64 {
        match self.potential_ceiling {
            Some(c) => v.min(c),
            None => v,
        }
    }
}

/// Single-channel partial-wave Hamiltonian `T + V(R) + J(J+1)/2mR²`.
#[derive(Debug, Clone)]
pub struct GroundHamiltonian {
    grid: RadialGrid,
    mass: f64,
    j: u32,
    labels: Arc<[String]>,
    kinetic: KineticOperator,
    v_eff: Vec<f64>,
    cap: Option<Vec<f64>>,
}

impl GroundHamiltonian {
    /// From a ready-made effective potential (centrifugal term included).
    pub fn from_potential(
        grid: RadialGrid,
        mass: f64,
        j: u32,
        v_eff: Vec<f64>,
        boundary: Boundary,
    ) -> Result<Self> {
        if v_eff.len() != grid.n_points() {
            return Err(Error::Layout("potential length differs from grid".into()));
        }
        if v_eff.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite effective potential".into(),
            ));
        }
        Ok(Self {
            grid,
            mass,
            j,
            labels: vec![CHANNEL_LABELS[0].to_string()].into(),
            kinetic: KineticOperator::new(&grid, mass, boundary),
            v_eff,
            cap: None,
        })
    }

    pub fn with_cap(mut self, cap: &Cap) -> Result<Self> {
        self.cap = Some(cap.profile(&self.grid)?);
        Ok(self)
    }

    pub fn v_eff(&self) -> &[f64] {
        &self.v_eff
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn kinetic(&self) -> &KineticOperator {
        &self.kinetic
    }
}

/// Effective ground potential `V_X + J(J+1)/2mR²`, clipped at the ceiling.
pub fn ground_potential(
    j: u32,
    curves: &CurveSet,
    grid: &RadialGrid,
    mass: f64,
    opts: &AssemblyOptions,
) -> Result<Vec<f64>> {
    let v = interpolate(&curves.ground, grid)?;
    let cf = centrifugal_term(grid, j, mass);
    Ok(v.iter().zip(&cf).map(|(a, b)| opts.clip(a + b)).collect())
}

/// Partial-wave ground Hamiltonian for `J`.
pub fn assemble_ground(
    j: u32,
    curves: &CurveSet,
    grid: &RadialGrid,
    mass: f64,
    opts: &AssemblyOptions,
) -> Result<GroundHamiltonian> {
    let h = GroundHamiltonian::from_potential(
        *grid,
        mass,
        j,
        ground_potential(j, curves, grid, mass, opts)?,
        opts.boundary,
    )?;
    opts.check_grid(&h.kinetic)?;
    match &opts.cap {
        Some(cap) => h.with_cap(cap),
        None => Ok(h),
    }
}

impl Hamiltonian for GroundHamiltonian {
    fn grid(&self) -> &RadialGrid {
        &self.grid
    }
    fn labels(&self) -> &Arc<[String]> {
        &self.labels
    }
    fn j(&self) -> u32 {
        self.j
    }

    fn apply(&self, _t: f64, input: &[C64], out: &mut [C64], ws: &mut Workspace) {
        self.kinetic.apply(input, out, &mut ws.kinetic);
        for i in 0..input.len() {
            out[i] += input[i] * self.v_eff[i];
        }
        if let Some(w) = &self.cap {
            for i in 0..input.len() {
                out[i] += input[i] * C64::new(0.0, -w[i]);
            }
        }
    }

    fn range_ingredients(&self) -> RangeIngredients {
        let (lo, hi) = min_max(&self.v_eff);
        RangeIngredients {
            kinetic_max: self.kinetic.max_eigenvalue(),
            diag_min: vec![lo],
            diag_max: vec![hi],
            coupling_row_sum: vec![0.0],
        }
    }

    fn is_hermitian(&self) -> bool {
        self.cap.is_none()
    }

    fn workspace(&self) -> Workspace {
        Workspace {
            kinetic: self.kinetic.scratch(),
        }
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
}

/// Five-channel pump Hamiltonian for one partial wave.
#[derive(Debug, Clone)]
pub struct PaHamiltonian {
    grid: RadialGrid,
    mass: f64,
    j: u32,
    labels: Arc<[String]>,
    pulse: PulseParameters,
    kinetic: KineticOperator,
    /// Field-free diagonal: potential + centrifugal + rotating-frame shift, clipped.
    static_diag: [Vec<f64>; 5],
    /// Contracted polarizability traces for X, Πg, 11, 22.
    alpha: [Vec<f64>; 4],
    alpha12: Vec<f64>,
    moment: Vec<f64>,
    dipoles: [Vec<f64>; 3],
    v12: Vec<f64>,
    cap: Option<Vec<f64>>,
}

/// Assemble the pump Hamiltonian for partial wave `J`.
pub fn assemble_pa(
    j: u32,
    curves: &CurveSet,
    grid: &RadialGrid,
    mass: f64,
    pulse: &PulseParameters,
    opts: &AssemblyOptions,
) -> Result<PaHamiltonian> {
    curves.check_omega(pulse.omega_l, opts.omega_tolerance)?;
    let cf = centrifugal_term(grid, j, mass);
    let eps = &pulse.polarization;
    let on = |c: &crate::curves::PotentialCurve| interpolate(c, grid);

    let (u11, u22, mut v12) = match &curves.nonadiabatic_tau {
        Some(tau) => {
            let b = diabatize(
                &on(&curves.upper[0])?,
                &on(&curves.upper[1])?,
                &on(tau)?,
                grid,
            )?;
            (b.v11, b.v22, b.v12)
        }
        None => (
            on(&curves.upper[0])?,
            on(&curves.upper[1])?,
            vec![0.0; grid.n_points()],
        ),
    };
    for (a, b) in v12.iter_mut().zip(on(&curves.diabatic_coupling)?) {
        *a += b;
    }
    let raw = [
        on(&curves.ground)?,
        on(&curves.excited)?,
        u11,
        u22,
        on(&curves.upper[2])?,
    ];
    let shifts = [
        0.0,
        -2.0 * pulse.omega_l,
        -3.0 * pulse.omega_l,
        -3.0 * pulse.omega_l,
        -3.0 * pulse.omega_l,
    ];
    let static_diag: [Vec<f64>; 5] = std::array::from_fn(|c| {
        raw[c]
            .iter()
            .zip(&cf)
            .map(|(v, k)| opts.clip(v + k + shifts[c]))
            .collect()
    });
    let kinetic = KineticOperator::new(grid, mass, opts.boundary);
    opts.check_grid(&kinetic)?;
    let s = &curves.stark;
    Ok(PaHamiltonian {
        grid: *grid,
        mass,
        j,
        labels: CHANNEL_LABELS
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .into(),
        pulse: pulse.clone(),
        kinetic,
        static_diag,
        alpha: [
            s.ground.contract(eps, grid)?,
            s.excited.contract(eps, grid)?,
            s.upper11.contract(eps, grid)?,
            s.upper22.contract(eps, grid)?,
        ],
        alpha12: s.upper12.contract(eps, grid)?,
        moment: curves.two_photon_moment.contract(eps, grid)?,
        dipoles: [
            on(&curves.dipoles[0])?,
            on(&curves.dipoles[1])?,
            on(&curves.dipoles[2])?,
        ],
        v12,
        cap: opts.cap.as_ref().map(|c| c.profile(grid)).transpose()?,
    })
}

impl PaHamiltonian {
    pub fn pulse(&self) -> &PulseParameters {
        &self.pulse
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }
    /// Field-free diagonal potential of channel `c` (rotating frame).
    pub fn static_potential(&self, c: usize) -> &[f64] {
        &self.static_diag[c]
    }
    /// Contracted two-photon moment on the grid.
    pub fn moment(&self) -> &[f64] {
        &self.moment
    }
    pub fn diabatic_coupling(&self) -> &[f64] {
        &self.v12
    }

    /// Same Hamiltonian with a different peak field (all other data shared).
    pub fn with_field(&self, e0: f64) -> Self {
        Self {
            pulse: self.pulse.with_field(e0),
            ..self.clone()
        }
    }
}

/// `H_PA(t)·ψ` with a layout check.
pub fn apply_pa_hamiltonian(
    state: &ChannelState,
    h: &PaHamiltonian,
    t: f64,
) -> Result<ChannelState> {
    h.apply_state(state, t)
}

impl Hamiltonian for PaHamiltonian {
    fn grid(&self) -> &RadialGrid {
        &self.grid
    }
    fn labels(&self) -> &Arc<[String]> {
        &self.labels
    }
    fn j(&self) -> u32 {
        self.j
    }

    fn apply(&self, t: f64, input: &[C64], out: &mut [C64], ws: &mut Workspace) {
        let n = self.grid.n_points();
        for c in 0..5 {
            self.kinetic.apply(
                &input[c * n..(c + 1) * n],
                &mut out[c * n..(c + 1) * n],
                &mut ws.kinetic,
            );
        }
        let e = self.pulse.envelope(t);
        let stark = -0.25 * e.norm_sqr();
        let chi = 0.25 * e * e;
        let field_on = e != C64::new(0.0, 0.0);
        let (psi, o) = (input, out);
        for i in 0..n {
            let p = [
                psi[i],
                psi[n + i],
                psi[2 * n + i],
                psi[3 * n + i],
                psi[4 * n + i],
            ];
            let mut d = [0.0; 5];
            for c in 0..5 {
                d[c] = self.static_diag[c][i];
            }
            let mut acc = [C64::new(0.0, 0.0); 5];
            let v12 = if field_on {
                self.v12[i] + stark * self.alpha12[i]
            } else {
                self.v12[i]
            };
            acc[2] += p[3] * v12;
            acc[3] += p[2] * v12;
            if field_on {
                for c in 0..4 {
                    d[c] += stark * self.alpha[c][i];
                }
                let x = chi * self.moment[i];
                acc[0] += x.conj() * p[1];
                acc[1] += x * p[0];
                for u in 0..3 {
                    let g = e * self.dipoles[u][i];
                    acc[1] += g.conj() * p[2 + u];
                    acc[2 + u] += g * p[1];
                }
            }
            let absorb = self.cap.as_ref().map_or(0.0, |w| w[i]);
            for c in 0..5 {
                o[c * n + i] += p[c] * C64::new(d[c], -absorb) + acc[c];
            }
        }
    }

    fn range_ingredients(&self) -> RangeIngredients {
        let e0 = self.pulse.e0;
        let s_min = -0.25 * e0 * e0;
        let mut diag_min = Vec::with_capacity(5);
        let mut diag_max = Vec::with_capacity(5);
        for c in 0..5 {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..self.grid.n_points() {
                let v = self.static_diag[c][i];
                let shifted = if c < 4 {
                    v + s_min * self.alpha[c][i]
                } else {
                    v
                };
                lo = lo.min(v.min(shifted));
                hi = hi.max(v.max(shifted));
            }
            diag_min.push(lo);
            diag_max.push(hi);
        }
        let chi = 0.25 * e0 * e0 * max_abs(&self.moment);
        let mu: [f64; 3] = std::array::from_fn(|u| e0 * max_abs(&self.dipoles[u]));
        let v12 = self
            .v12
            .iter()
            .zip(&self.alpha12)
            .fold(0.0f64, |a, (v, al)| {
                a.max(v.abs()).max((v + s_min * al).abs())
            });
        RangeIngredients {
            kinetic_max: self.kinetic.max_eigenvalue(),
            diag_min,
            diag_max,
            coupling_row_sum: vec![
                chi,
                chi + mu[0] + mu[1] + mu[2],
                mu[0] + v12,
                mu[1] + v12,
                mu[2],
            ],
        }
    }

    fn is_hermitian(&self) -> bool {
        self.cap.is_none()
    }

    fn workspace(&self) -> Workspace {
        Workspace {
            kinetic: self.kinetic.scratch(),
        }
    }
}
