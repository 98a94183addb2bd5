//! Thermal random-phase ensembles.
//!
//! A thermal trace over partial wave `J` is replaced by an average over
//! random-phase wavefunctions, `Tr[Aρ] ≈ (1/N)Σₖ Σ_J P_J ⟨ψₖ_J|A|ψₖ_J⟩`. Three
//! constructions are provided:
//!
//! * **grid** — unit-modulus random phase on every grid point, thermalised by
//!   `exp(−βH/2)`; unnormalised, each value carries the factor `1/(Z_J ΔR)`.
//! * **eigen** — `Σₙ e^{−βEₙ/2 + iθₙ}|n⟩/√Z_J` over states with
//!   `e^{−βEₙ/2} > ε`; filters may drop bound and resonance states. `Z_J`
//!   always includes every state above the cutoff, so filtered realizations
//!   have norm below one and filtered curves sit pointwise below the full one.
//! * **gaussian** — a thermal-width Gaussian at `R₀` evolved freely for a
//!   random time τₖ, either through the eigenbasis (projected) or by Chebyshev
//!   propagation.
//!
//! Every realization draws from its own ChaCha stream keyed by (k, J, method),
//! so any single one can be regenerated in isolation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use crate::curves::CHANNEL_LABELS;
use crate::error::{Error, Result};
use crate::grid::{ChannelState, RadialGrid, C64};
use crate::hamiltonian::GroundHamiltonian;
use crate::propagator::{
    chebyshev_imag, estimate_spectral_range, PropagationPlan, SeriesWorkspace, DEFAULT_TOLERANCE,
};
use crate::spectral::{SpectralDecomposition, StateTag};
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Grid,
    Eigen,
    GaussianProjected,
    GaussianPropagated,
}

impl Method {
    fn stream_tag(self) -> u64 {
        match self {
            Method::Grid => 1,
            Method::Eigen => 2,
            Method::GaussianProjected | Method::GaussianPropagated => 3,
        }
    }

    pub fn is_gaussian(self) -> bool {
        matches!(self, Method::GaussianProjected | Method::GaussianPropagated)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Grid => "grid",
            Method::Eigen => "eigen",
            Method::GaussianProjected => "gaussian-projected",
            Method::GaussianPropagated => "gaussian-propagated",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Method::Grid),
            "eigen" => Ok(Method::Eigen),
            "gaussian" | "gaussian-projected" => Ok(Method::GaussianProjected),
            "gaussian-propagated" => Ok(Method::GaussianPropagated),
            _ => Err(Error::Config(format!("unknown method `{s}`"))),
        }
    }
}

/// Which eigenstates enter an eigen-method realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StateFilter {
    #[default]
    All,
    NoBound,
    NoBoundNoResonance,
}

impl StateFilter {
    pub fn admits(self, tag: StateTag) -> bool {
        match (self, tag) {
            (StateFilter::All, _) => true,
            (_, StateTag::Bound) => false,
            (StateFilter::NoBound, _) => true,
            (StateFilter::NoBoundNoResonance, StateTag::Resonance { .. }) => false,
            (StateFilter::NoBoundNoResonance, _) => true,
        }
    }
}

impl fmt::Display for StateFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateFilter::All => "all",
            StateFilter::NoBound => "no-bound",
            StateFilter::NoBoundNoResonance => "no-bound-no-resonance",
        })
    }
}

impl FromStr for StateFilter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(StateFilter::All),
            "no-bound" => Ok(StateFilter::NoBound),
            "no-bound-no-resonance" => Ok(StateFilter::NoBoundNoResonance),
            _ => Err(Error::Config(format!("unknown filter `{s}`"))),
        }
    }
}

/// A sampled partial wave and its stride weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JSample {
    pub j: u32,
    /// How many partial waves this sample stands for.
    pub stride_weight: f64,
}

/// `0, S, 2S, …, ≤ J_max`. Interior samples weigh `S`; `J = 0` weighs
/// `(S+1)/2` (Euler–Maclaurin endpoint of Σ_{J≥0}); the top sample weighs `S`.
pub fn j_samples(j_max: u32, stride: u32) -> Vec<JSample> {
    let s = stride.max(1);
    (0..=j_max / s)
        .map(|i| JSample {
            j: i * s,
            stride_weight: if i == 0 {
                0.5 * (s as f64 + 1.0)
            } else {
                s as f64
            },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub temperature: f64,
    pub n_realizations: usize,
    pub j_max: u32,
    pub j_stride: u32,
    /// Explicit J list (each with weight 1) instead of the stride grid.
    pub j_list: Option<Vec<u32>>,
    pub method: Method,
    pub epsilon: f64,
    pub filter: StateFilter,
    pub seed: u64,
    pub r0: Option<f64>,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            temperature: 1000.0,
            n_realizations: 200,
            j_max: 300,
            j_stride: 5,
            j_list: None,
            method: Method::Eigen,
            epsilon: 1e-8,
            filter: StateFilter::All,
            seed: 0,
            r0: None,
        }
    }
}

impl EnsembleSpec {
    pub fn beta(&self) -> f64 {
        units::beta_from_kelvin(self.temperature)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.temperature > 0.0) {
            return bad(format!(
                "temperature must be positive, got {}",
                self.temperature
            ));
        }
        if self.n_realizations < 1 {
            return bad("need at least one realization".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("ε must lie in (0,1), got {}", self.epsilon));
        }
        if self.j_stride < 1 {
            return bad("J stride must be ≥ 1".into());
        }
        if self.method.is_gaussian() && self.r0.is_none() {
            return bad("gaussian methods need R0".into());
        }
        Ok(())
    }

    pub fn samples(&self) -> Vec<JSample> {
        match &self.j_list {
            Some(list) => list
                .iter()
                .map(|&j| JSample {
                    j,
                    stride_weight: 1.0,
                })
                .collect(),
            None => j_samples(self.j_max, self.j_stride),
        }
    }
}

/// Stream id of realization `(k, J)` for `method`.
pub fn stream_id(k: usize, j: u32, method: Method) -> u64 {
    (method.stream_tag() << 56) | ((j as u64 & 0xFF_FFFF) << 32) | (k as u64 & 0xFFFF_FFFF)
}

/// Counter-based generator for realization `(k, J)` under `seed`.
pub fn realization_rng(seed: u64, k: usize, j: u32, method: Method) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(k, j, method));
    rng
}

/// `n` phases uniform on [0, 2π).
pub fn random_phases(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
        .collect()
}

fn ground_labels() -> Arc<[String]> {
    vec![CHANNEL_LABELS[0].to_string()].into()
}

/// Unit-modulus random phase on every interior point (walls stay zero).
pub fn grid_random_state(j: u32, grid: &RadialGrid, rng: &mut impl Rng) -> ChannelState {
    let n = grid.n_points();
    let phases = random_phases(rng, n - 2);
    let mut amp = vec![C64::new(0.0, 0.0); n];
    for (i, th) in phases.into_iter().enumerate() {
        amp[i + 1] = C64::from_polar(1.0, th);
    }
    ChannelState::from_data(*grid, ground_labels(), j, amp).expect("layout by construction")
}

/// `exp(−βH/2)ψ`, unnormalised.
pub fn thermalize(state: &ChannelState, h: &GroundHamiltonian, beta: f64) -> Result<ChannelState> {
    chebyshev_imag(state, h, 0.5 * beta)
}

/// `Σ e^{−βEₙ}` over states with `e^{−βEₙ/2} > ε`.
pub fn box_z_j(energies: &[f64], beta: f64, epsilon: f64) -> f64 {
    let cut = -2.0 * epsilon.ln() / beta;
    energies
        .iter()
        .filter(|&&e| e < cut)
        .map(|&e| (-beta * e).exp())
        .sum()
}

/// Eigen-method random-phase state, `Σ_{n∈S} e^{−βEₙ/2+iθₙ}|n⟩/√Z_J`.
///
/// Phases are drawn for every state above the ε cutoff in energy order, so the
/// same `(seed, k, J)` gives the same phases under every filter.
pub fn eigen_random_state(
    decomp: &SpectralDecomposition,
    beta: f64,
    epsilon: f64,
    filter: StateFilter,
    rng: &mut impl Rng,
) -> Result<ChannelState> {
    let cut = -2.0 * epsilon.ln() / beta;
    let active: Vec<usize> = (0..decomp.n_states())
        .filter(|&n| decomp.energies[n] < cut)
        .collect();
    let phases = random_phases(rng, active.len());
    let z_j = box_z_j(&decomp.energies, beta, epsilon);
    let norm = 1.0 / z_j.sqrt();
    let (states, coeffs): (Vec<usize>, Vec<C64>) = active
        .iter()
        .zip(&phases)
        .filter(|(&n, _)| filter.admits(decomp.tags[n]))
        .map(|(&n, &th)| {
            (
                n,
                C64::from_polar((-0.5 * beta * decomp.energies[n]).exp() * norm, th),
            )
        })
        .unzip();
    if states.is_empty() {
        return Err(Error::EmptyStateSet(decomp.j));
    }
    let amp = decomp.synthesize(&states, &coeffs);
    ChannelState::from_data(decomp.grid, ground_labels(), decomp.j, amp)
}

/// Thermal width σ = 1/√(2mk_BT) of the Gaussian packet (bohr).
pub fn thermal_width(mass: f64, temperature: f64) -> f64 {
    1.0 / (2.0 * mass * units::kt_hartree(temperature)).sqrt()
}

/// `exp(−(R−R₀)²/(2σ²))`, normalised on the grid (walls zero).
pub fn gaussian_packet(grid: &RadialGrid, r0: f64, sigma: f64) -> Vec<C64> {
    let n = grid.n_points();
    let mut amp: Vec<C64> = grid
        .points()
        .iter()
        .map(|r| C64::new((-(r - r0).powi(2) / (2.0 * sigma * sigma)).exp(), 0.0))
        .collect();
    amp[0] = C64::new(0.0, 0.0);
    amp[n - 1] = C64::new(0.0, 0.0);
    let norm = (amp.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.spacing()).sqrt();
    amp.iter_mut().for_each(|z| *z /= norm);
    amp
}

/// `τ_min = max(10·β/2, 10·R₀√(mβ))`.
pub fn tau_min(beta: f64, r0: f64, mass: f64) -> f64 {
    (5.0 * beta).max(10.0 * r0 * (mass * beta).sqrt())
}

/// τₖ uniform on `[τ_min, 4τ_min]`.
pub fn sample_tau(rng: &mut impl Rng, beta: f64, r0: f64, mass: f64) -> f64 {
    let t = tau_min(beta, r0, mass);
    t + 3.0 * t * rng.random::<f64>()
}

/// Largest |V_X| (in units of k_BT) tolerated at `R₀ − 4σ`.
pub const GAUSSIAN_TAIL_TOLERANCE: f64 = 1e-3;

/// Check that a Gaussian at `r0` starts outside the interaction region and inside the box.
pub fn validate_r0(
    grid: &RadialGrid,
    ground: impl Fn(f64) -> f64,
    r0: f64,
    sigma: f64,
    temperature: f64,
) -> Result<()> {
    let (lo, hi) = (r0 - 4.0 * sigma, r0 + 4.0 * sigma);
    if lo <= grid.r_min() || hi >= grid.r_max() {
        return Err(Error::InvalidParameter(format!(
            "Gaussian at R0 = {r0} does not fit in the box"
        )));
    }
    let v = ground(lo).abs();
    if v > GAUSSIAN_TAIL_TOLERANCE * units::kt_hartree(temperature) {
        return Err(Error::InvalidParameter(format!(
            "R0 = {r0} bohr is inside the interaction region (|V| = {v:e} hartree at R0 − 4σ)"
        )));
    }
    Ok(())
}

/// Route for the free evolution of the Gaussian packet.
pub enum GaussianPath<'a> {
    Projected(&'a SpectralDecomposition),
    Propagated(&'a GroundHamiltonian),
}

/// Largest Chebyshev argument per step for the propagated path.
const MAX_SERIES_ARGUMENT: f64 = 400.0;

/// Gaussian at `r0` evolved freely for `tau`; normalised.
pub fn gaussian_random_state(
    j: u32,
    grid: &RadialGrid,
    temperature: f64,
    mass: f64,
    r0: f64,
    tau: f64,
    path: GaussianPath<'_>,
) -> Result<ChannelState> {
    let g = gaussian_packet(grid, r0, thermal_width(mass, temperature));
    let amp = match path {
        GaussianPath::Projected(decomp) => {
            let c = decomp.project(&g, None);
            let states: Vec<usize> = (0..c.len()).collect();
            let rotated: Vec<C64> = c
                .iter()
                .zip(&decomp.energies)
                .map(|(c, &e)| c * C64::from_polar(1.0, -e * tau))
                .collect();
            decomp.synthesize(&states, &rotated)
        }
        GaussianPath::Propagated(h) => {
            let bounds = estimate_spectral_range(h);
            let steps = (bounds.half_width() * tau / MAX_SERIES_ARGUMENT)
                .ceil()
                .max(1.0) as usize;
            let plan = PropagationPlan::real_time(bounds, tau / steps as f64, DEFAULT_TOLERANCE);
            let mut ws = SeriesWorkspace::new(h);
            let mut psi = g;
            let mut buf = psi.clone();
            for _ in 0..steps {
                plan.apply(h, 0.0, &psi, &mut buf, &mut ws)?;
                std::mem::swap(&mut psi, &mut buf);
            }
            psi
        }
    };
    ChannelState::from_data(*grid, ground_labels(), j, amp)
}

/// Random-phase superposition of free box modes weighted by `e^{−βE/2}`.
///
/// Reproduces the thermal density where the potential is flat but not in the
/// interaction region; kept only as a documented negative reference.
pub fn momentum_delta_state(
    j: u32,
    grid: &RadialGrid,
    temperature: f64,
    mass: f64,
    rng: &mut impl Rng,
) -> ChannelState {
    let beta = units::beta_from_kelvin(temperature);
    let l = grid.length();
    let n_modes = grid.n_points() - 2;
    let phases = random_phases(rng, n_modes);
    let mut amp = vec![C64::new(0.0, 0.0); grid.n_points()];
    let mut z = 0.0;
    for (q, th) in phases.into_iter().enumerate() {
        let k = (q + 1) as f64 * std::f64::consts::PI / l;
        let w = (-0.5 * beta * k * k / (2.0 * mass)).exp();
        z += w * w;
        let c = C64::from_polar(w * (2.0 / l).sqrt(), th);
        for (i, a) in amp.iter_mut().enumerate().skip(1).take(n_modes) {
            *a += c * (k * (grid.point(i) - grid.r_min())).sin();
        }
    }
    let norm = 1.0 / z.sqrt();
    amp.iter_mut().for_each(|a| *a *= norm);
    ChannelState::from_data(*grid, ground_labels(), j, amp).expect("layout by construction")
}

/// Classical `Z_J(R) = ∫₀^R e^{−βJ²/2mr²} dr` in closed form (bohr).
pub fn classical_z_j(j: f64, beta: f64, mass: f64, r: f64) -> f64 {
    let a = beta * j * j / (2.0 * mass);
    if a == 0.0 {
        return r;
    }
    r * (-a / (r * r)).exp() - (std::f64::consts::PI * a).sqrt() * erfc(a.sqrt() / r)
}

/// `√(m/2πβ)`: converts `∫ dR` into a dimensionless state count (h = 2π).
pub fn momentum_factor(beta: f64, mass: f64) -> f64 {
    (mass / (2.0 * std::f64::consts::PI * beta)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalPartition {
    pub temperature: f64,
    pub r_max: f64,
    pub mass: f64,
    /// Dimensionless `Z_cl`.
    pub z: f64,
}

impl ClassicalPartition {
    fn beta(&self) -> f64 {
        units::beta_from_kelvin(self.temperature)
    }

    /// Closed-form `Z_J^{R_max}` (bohr).
    pub fn z_j(&self, j: u32) -> f64 {
        classical_z_j(j as f64, self.beta(), self.mass, self.r_max)
    }

    /// Dimensionless counterpart `√(m/2πβ)·Z_J`, comparable with box sums.
    pub fn z_j_states(&self, j: u32) -> f64 {
        momentum_factor(self.beta(), self.mass) * self.z_j(j)
    }

    /// Classical `P_J = (2J+1)Z_J/Z` (no stride factor).
    pub fn p_j(&self, j: u32) -> f64 {
        (2.0 * j as f64 + 1.0) * self.z_j_states(j) / self.z
    }
}

/// `Z_cl = √(m/2πβ) ∫₀^{J_max} 2J Z_J dJ` by composite Simpson quadrature.
/// With `j_max = None` the integral runs until the integrand is negligible.
pub fn partition_function_classical(
    temperature: f64,
    r_max: f64,
    mass: f64,
    j_max: Option<f64>,
) -> ClassicalPartition {
    let beta = units::beta_from_kelvin(temperature);
    let scale = r_max * (2.0 * mass / beta).sqrt();
    let upper = j_max.unwrap_or(10.0 * scale);
    let panels = 8192;
    let h = upper / panels as f64;
    let f = |j: f64| 2.0 * j * classical_z_j(j, beta, mass, r_max);
    let mut sum = f(0.0) + f(upper);
    for i in 1..panels {
        sum += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let integral = sum * h / 3.0;
    ClassicalPartition {
        temperature,
        r_max,
        mass,
        z: momentum_factor(beta, mass) * integral,
    }
}

/// `P_J = (2J+1)Z_J/Z` (per single J; multiply by the stride weight to sum).
pub fn partial_wave_weight(j: u32, z_j: f64, z: f64) -> f64 {
    (2.0 * j as f64 + 1.0) * z_j / z
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxPartition {
    pub z: f64,
    /// `(sample, Z_J)` per sampled J.
    pub per_j: Vec<(JSample, f64)>,
    /// Share of `Z` carried by the last sample.
    pub tail_fraction: f64,
}

/// `Z = Σ_J w_J (2J+1) Z_J`; errors if the last sample carries more than `tail_tolerance`.
pub fn partition_function_box(
    per_j: &[(JSample, f64)],
    tail_tolerance: f64,
) -> Result<BoxPartition> {
    let term = |(s, z): &(JSample, f64)| s.stride_weight * (2.0 * s.j as f64 + 1.0) * z;
    let z: f64 = per_j.iter().map(term).sum();
    let last = per_j
        .last()
        .ok_or_else(|| Error::InvalidParameter("no partial waves".into()))?;
    let tail_fraction = term(last) / z;
    if per_j.len() > 1 && tail_fraction > tail_tolerance {
        return Err(Error::TruncationNotConverged {
            j: last.0.j,
            fraction: tail_fraction,
            tolerance: tail_tolerance,
        });
    }
    Ok(BoxPartition {
        z,
        per_j: per_j.to_vec(),
        tail_fraction,
    })
}

/// Provenance of a realization's randomness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRecord {
    pub seed: u64,
    pub stream: u64,
    pub tau: Option<f64>,
}

/// One `(k, J)` member of an ensemble, X channel only.
#[derive(Debug, Clone)]
pub struct Realization {
    pub k: usize,
    pub j: u32,
    pub state: ChannelState,
    /// `stride_weight · P_J`.
    pub weight: f64,
    /// Multiplies `⟨ψ|A|ψ⟩`: `1/(Z_J ΔR)` for the grid method, 1 otherwise.
    pub norm_factor: f64,
    pub method: Method,
    pub record: PhaseRecord,
}

/// How `Z` in `P_J = (2J+1)Z_J/Z` is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Classical `Z_cl` over all J (default: the sampled J range is usually far
    /// narrower than the thermal distribution).
    Classical,
    /// Box sum over the sampled J only.
    SampledBox,
    Explicit(f64),
}

/// Per-J data an ensemble needs to generate realizations.
#[derive(Debug, Clone)]
pub enum JSource {
    Eigen(Arc<SpectralDecomposition>),
    Grid(Arc<GroundHamiltonian>),
    Gaussian {
        decomp: Option<Arc<SpectralDecomposition>>,
        hamiltonian: Option<Arc<GroundHamiltonian>>,
    },
}

#[derive(Debug, Clone)]
pub struct JContext {
    pub sample: JSample,
    /// `Z_J` (dimensionless; classical at R₀ for gaussian methods).
    pub z_j: f64,
    /// `P_J` for a single J.
    pub p_j: f64,
    pub source: JSource,
}

impl JContext {
    pub fn weight(&self) -> f64 {
        self.sample.stride_weight * self.p_j
    }
}

/// Lazy ensemble: realizations are generated on demand from per-J data.
#[derive(Debug, Clone)]
pub struct ThermalEnsemble {
    pub spec: EnsembleSpec,
    pub grid: RadialGrid,
    pub mass: f64,
    pub z: f64,
    pub contexts: Vec<JContext>,
}

impl ThermalEnsemble {
    /// Build from per-J sources and `Z_J` values (`contexts[i].p_j` is recomputed).
    pub fn new(
        spec: EnsembleSpec,
        grid: RadialGrid,
        mass: f64,
        mut contexts: Vec<JContext>,
        norm: Normalization,
    ) -> Result<Self> {
        spec.validate()?;
        let z = match norm {
            Normalization::Explicit(z) => z,
            Normalization::SampledBox => contexts
                .iter()
                .map(|c| c.sample.stride_weight * (2.0 * c.sample.j as f64 + 1.0) * c.z_j)
                .sum(),
            Normalization::Classical => {
                let r = if spec.method.is_gaussian() {
                    spec.r0.expect("validated")
                } else {
                    grid.r_max()
                };
                partition_function_classical(spec.temperature, r, mass, None).z
            }
        };
        if !(z > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "partition function must be positive, got {z}"
            )));
        }
        for c in &mut contexts {
            c.p_j = partial_wave_weight(c.sample.j, c.z_j, z);
        }
        Ok(Self {
            spec,
            grid,
            mass,
            z,
            contexts,
        })
    }

    pub fn n_jobs(&self) -> usize {
        self.spec.n_realizations * self.contexts.len()
    }

    /// Job `index` ↦ (k, J-context index), J-major.
    pub fn job(&self, index: usize) -> (usize, usize) {
        (
            index % self.spec.n_realizations,
            index / self.spec.n_realizations,
        )
    }

    /// Generate realization `k` of the `ci`-th partial wave.
    pub fn realization(&self, k: usize, ci: usize) -> Result<Realization> {
        generate_realization(&self.spec, &self.grid, self.mass, &self.contexts[ci], k)
    }

    /// `Σ_J w_J P_J` over the sampled set.
    pub fn weight_sum(&self) -> f64 {
        self.contexts.iter().map(JContext::weight).sum()
    }
}

/// Realization `k` for one partial wave; `ctx.weight()` is copied into it.
pub fn generate_realization(
    spec: &EnsembleSpec,
    grid: &RadialGrid,
    mass: f64,
    ctx: &JContext,
    k: usize,
) -> Result<Realization> {
    let j = ctx.sample.j;
    let beta = spec.beta();
    let stream = stream_id(k, j, spec.method);
    let mut rng = realization_rng(spec.seed, k, j, spec.method);
    let mut tau = None;
    let (state, norm_factor) = match (&ctx.source, spec.method) {
        (JSource::Eigen(d), Method::Eigen) => (
            eigen_random_state(d, beta, spec.epsilon, spec.filter, &mut rng)?,
            1.0,
        ),
        (JSource::Grid(h), Method::Grid) => {
            let raw = grid_random_state(j, grid, &mut rng);
            (thermalize(&raw, h, beta)?, 1.0 / (ctx.z_j * grid.spacing()))
        }
        (
            JSource::Gaussian {
                decomp,
                hamiltonian,
            },
            m,
        ) if m.is_gaussian() => {
            let r0 = spec
                .r0
                .ok_or_else(|| Error::InvalidParameter("gaussian methods need R0".into()))?;
            let t = sample_tau(&mut rng, beta, r0, mass);
            tau = Some(t);
            let path = match (m, decomp, hamiltonian) {
                (Method::GaussianProjected, Some(d), _) => GaussianPath::Projected(d),
                (Method::GaussianPropagated, _, Some(h)) => GaussianPath::Propagated(h),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "J = {j}: no data for method {m}"
                    )))
                }
            };
            (
                gaussian_random_state(j, grid, spec.temperature, mass, r0, t, path)?,
                1.0,
            )
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "J = {j}: source does not match method {}",
                spec.method
            )))
        }
    };
    Ok(Realization {
        k,
        j,
        state,
        weight: ctx.weight(),
        norm_factor,
        method: spec.method,
        record: PhaseRecord {
            seed: spec.seed,
            stream,
            tau,
        },
    })
}

/// Mean and standard error of a thermal average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalAverage {
    pub mean: f64,
    /// Standard deviation of the per-k totals over √N (NaN for N = 1).
    pub std_error: f64,
}

/// `(1/N) Σₖ Σ_J P_J a_{k,J}` from per-k totals `X_k = Σ_J P_J a_{k,J}`.
pub fn thermal_expectation(per_k_totals: &[f64]) -> ThermalAverage {
    let n = per_k_totals.len() as f64;
    let mean = per_k_totals.iter().sum::<f64>() / n;
    let std_error = if per_k_totals.len() < 2 {
        f64::NAN
    } else {
        let var = per_k_totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    ThermalAverage { mean, std_error }
}

/// Group `(k, weight·value)` contributions into per-k totals for `n` realizations.
pub fn per_k_totals(n: usize, contributions: impl IntoIterator<Item = (usize, f64)>) -> Vec<f64> {
    let mut totals = vec![0.0; n];
    for (k, v) in contributions {
        totals[k] += v;
    }
    totals
}

/// Running `Σ weight·norm_factor·|ψ(R)|²`, divided by N at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityAccumulator {
    grid: RadialGrid,
    sum: Vec<f64>,
    /// Per-k densities, kept only when standard errors are requested.
    per_k: Option<Vec<Vec<f64>>>,
}

impl DensityAccumulator {
    pub fn new(grid: RadialGrid, n_realizations: Option<usize>) -> Self {
        Self {
            grid,
            sum: vec![0.0; grid.n_points()],
            per_k: n_realizations.map(|n| vec![vec![0.0; grid.n_points()]; n]),
        }
    }

    pub fn add(&mut self, r: &Realization) {
        let f = r.weight * r.norm_factor;
        for (i, z) in r.state.channel(0).iter().enumerate() {
            let v = f * z.norm_sqr();
            self.sum[i] += v;
            if let Some(p) = &mut self.per_k {
                p[r.k][i] += v;
            }
        }
    }

    /// Add another accumulator's sums (same grid and N).
    pub fn merge(&mut self, other: &DensityAccumulator) {
        self.sum
            .iter_mut()
            .zip(&other.sum)
            .for_each(|(a, b)| *a += b);
        if let (Some(a), Some(b)) = (&mut self.per_k, &other.per_k) {
            for (x, y) in a.iter_mut().zip(b) {
                x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
            }
        }
    }

    /// Multiply every accumulated value (e.g. by `1/Z` once Z is known).
    pub fn scale(&mut self, f: f64) {
        self.sum.iter_mut().for_each(|x| *x *= f);
        if let Some(p) = &mut self.per_k {
            p.iter_mut().flatten().for_each(|x| *x *= f);
        }
    }

    /// `(R, ρ(R)/R², standard error)`; errors are NaN unless per-k data were kept.
    pub fn finish(&self, n_realizations: usize) -> Vec<(f64, f64, f64)> {
        let n = n_realizations as f64;
        self.grid
            .points()
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let se = match &self.per_k {
                    Some(p) => {
                        thermal_expectation(&p.iter().map(|d| d[i]).collect::<Vec<_>>()).std_error
                    }
                    None => f64::NAN,
                };
                (r, self.sum[i] / n / (r * r), se / (r * r))
            })
            .collect()
    }
}

/// `(R, ρ(R)/R²)` from a set of realizations out of `n_realizations` per J.
pub fn thermal_pair_density<'a>(
    realizations: impl IntoIterator<Item = &'a Realization>,
    n_realizations: usize,
) -> Vec<(f64, f64)> {
    let mut it = realizations.into_iter().peekable();
    let Some(first) = it.peek() else {
        return Vec::new();
    };
    let mut acc = DensityAccumulator::new(*first.state.grid(), None);
    for r in it {
        acc.add(r);
    }
    acc.finish(n_realizations)
        .into_iter()
        .map(|(r, d, _)| (r, d))
        .collect()
}

/// Extend a ground-only state to the five-channel layout (X populated).
pub fn embed_in_pump_layout(state: &ChannelState) -> ChannelState {
    let labels: Arc<[String]> = CHANNEL_LABELS
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .into();
    let mut out = ChannelState::zeros(*state.grid(), labels, state.j());
    out.channel_mut(0).copy_from_slice(state.channel(0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_weights() {
        let s = j_samples(20, 5);
        assert_eq!(
            s.iter().map(|x| x.j).collect::<Vec<_>>(),
            vec![0, 5, 10, 15, 20]
        );
        assert_eq!(s[0].stride_weight, 3.0);
        assert_eq!(s[1].stride_weight, 5.0);
        let unit = j_samples(3, 1);
        assert!(unit.iter().all(|x| x.stride_weight == 1.0));
    }

    #[test]
    fn classical_z_j_limits() {
        let (beta, m, r) = (315.775, 21861.0, 200.0);
        assert_eq!(classical_z_j(0.0, beta, m, r), r);
        let mut prev = r;
        for j in [10.0, 100.0, 1000.0, 5000.0, 20000.0] {
            let z = classical_z_j(j, beta, m, r);
            assert!(z < prev && z >= 0.0);
            prev = z;
        }
    }

    #[test]
    fn streams_are_distinct() {
        let mut a = realization_rng(7, 0, 5, Method::Eigen);
        let mut b = realization_rng(7, 1, 5, Method::Eigen);
        let mut c = realization_rng(7, 0, 5, Method::Eigen);
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert_ne!(x, y);
        assert_eq!(x, z);
    }

    #[test]
    fn expectation_of_constants() {
        let avg = thermal_expectation(&[0.3, 0.3, 0.3]);
        assert!((avg.mean - 0.3).abs() < 1e-15);
        assert!(avg.std_error.abs() < 1e-15);
    }

    #[test]
    fn filter_semantics() {
        use StateFilter::*;
        let res = StateTag::Resonance { gamma: 1e-6 };
        assert!(All.admits(StateTag::Bound));
        assert!(!NoBound.admits(StateTag::Bound) && NoBound.admits(res));
        assert!(!NoBoundNoResonance.admits(res) && NoBoundNoResonance.admits(StateTag::Continuum));
    }
}
