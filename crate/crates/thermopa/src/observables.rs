//! Excited-state yield, eigenbasis projection, the excited density matrix and
//! its purity / dynamical coherence.
//!
//! The density matrix is block-diagonal in J: random-phase members of
//! different partial waves never interfere. Its trace is normalised by the
//! yield actually captured in the retained basis, so `Tr ρ = 1` holds exactly;
//! the full `⟨P_e⟩` (including any residual outside the basis) is carried
//! alongside.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{ChannelState, C64};
use crate::spectral::SpectralDecomposition;
use crate::thermal::JSample;
use crate::units;

/// Index of the `(1)¹Πg` channel in the pump layout.
pub const EXCITED_CHANNEL: usize = 1;

/// `‖ψ_Πg‖²` of one realization.
pub fn excited_population(state: &ChannelState) -> f64 {
    if state.n_channels() <= EXCITED_CHANNEL {
        return 0.0;
    }
    state.population(EXCITED_CHANNEL)
}

/// Excited component expanded in the `(1)¹Πg` eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coefficients: Vec<C64>,
    /// `‖ψ_e‖² − Σ|c_m|²`.
    pub residual: f64,
    pub norm_sqr: f64,
}

/// Largest residual (fraction of `‖ψ_e‖²`) tolerated before an error.
pub const PROJECTION_RESIDUAL_LIMIT: f64 = 1e-2;

/// `c_m = ∫ φ_m ψ_e dR` for `m < n_m`, with the residual outside that span.
pub fn project_excited_eigenbasis(
    state: &ChannelState,
    decomp: &SpectralDecomposition,
    n_m: usize,
) -> Projection {
    let psi = state.channel(EXCITED_CHANNEL);
    let coefficients = decomp.project(psi, Some(n_m));
    let norm_sqr = state.population(EXCITED_CHANNEL);
    let captured: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
    Projection {
        coefficients,
        residual: (norm_sqr - captured).max(0.0),
        norm_sqr,
    }
}

/// Like [`project_excited_eigenbasis`], but errors when the residual exceeds
/// `threshold` of the excited norm.
pub fn project_checked(
    state: &ChannelState,
    decomp: &SpectralDecomposition,
    n_m: usize,
    threshold: f64,
) -> Result<Projection> {
    let p = project_excited_eigenbasis(state, decomp, n_m);
    if p.norm_sqr > 0.0 && p.residual > threshold * p.norm_sqr {
        return Err(Error::ProjectionResidual {
            j: decomp.j,
            residual: p.residual / p.norm_sqr,
            threshold,
        });
    }
    Ok(p)
}

/// Default residual target for choosing `N_m`.
pub const N_M_RESIDUAL: f64 = 1e-3;

/// Smallest prefix length whose summed populations leave at most `tolerance`
/// of `total` outside. `populations[m]` is the ensemble-summed `|c_m|²`.
pub fn select_n_m(populations: &[f64], total: f64, tolerance: f64) -> usize {
    if total <= 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (m, p) in populations.iter().enumerate() {
        acc += p;
        if total - acc <= tolerance * total {
            return m + 1;
        }
    }
    populations.len()
}

/// Coefficients of one partial wave across realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitedCoefficients {
    pub j: u32,
    /// Stride weight × `P_J`.
    pub weight: f64,
    pub per_k: Vec<Vec<C64>>,
}

/// One J block of the excited density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityBlock {
    pub j: u32,
    pub matrix: DMatrix<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitedDensityMatrix {
    pub blocks: Vec<DensityBlock>,
    /// Yield captured in the retained basis (the trace normalization).
    pub projected_yield: f64,
    /// Full thermal `⟨P_e⟩`, if known.
    pub total_yield: Option<f64>,
}

/// `ρ = (1/Y)(1/N) Σₖ Σ_J w_J P_J c c†`, block-diagonal in J.
pub fn build_excited_density(
    coefficients: &[ExcitedCoefficients],
    n_realizations: usize,
    total_yield: Option<f64>,
) -> Result<ExcitedDensityMatrix> {
    let inv_n = 1.0 / n_realizations as f64;
    let mut blocks = Vec::with_capacity(coefficients.len());
    let mut trace = 0.0;
    for ec in coefficients {
        let dim = ec.per_k.iter().map(Vec::len).max().unwrap_or(0);
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for c in &ec.per_k {
            let f = ec.weight * inv_n;
            for a in 0..c.len() {
                for b in 0..c.len() {
                    m[(a, b)] += c[a] * c[b].conj() * f;
                }
            }
        }
        trace += m.diagonal().iter().map(|z| z.re).sum::<f64>();
        blocks.push(DensityBlock { j: ec.j, matrix: m });
    }
    if !(trace > 0.0) {
        return Err(Error::ZeroYield);
    }
    for b in &mut blocks {
        b.matrix.unscale_mut(trace);
    }
    Ok(ExcitedDensityMatrix {
        blocks,
        projected_yield: trace,
        total_yield,
    })
}

impl ExcitedDensityMatrix {
    pub fn dimension(&self) -> usize {
        self.blocks.iter().map(|b| b.matrix.nrows()).sum()
    }

    /// `(m, J)` labels in the order of [`to_dense`](Self::to_dense).
    pub fn basis(&self) -> Vec<(usize, u32)> {
        self.blocks
            .iter()
            .flat_map(|b| (0..b.matrix.nrows()).map(move |m| (m, b.j)))
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dimension();
        let mut out = DMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            let d = b.matrix.nrows();
            out.view_mut((off, off), (d, d)).copy_from(&b.matrix);
            off += d;
        }
        out
    }

    pub fn trace(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.matrix.diagonal().iter().map(|z| z.re).sum::<f64>())
            .sum()
    }

    /// Smallest eigenvalue over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .filter(|b| b.matrix.nrows() > 0)
            .map(|b| b.matrix.clone().symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `|ρ − ρ†|` entry.
    pub fn hermiticity_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                (&b.matrix - b.matrix.adjoint())
                    .iter()
                    .fold(0.0f64, |a, z| a.max(z.norm()))
            })
            .fold(0.0, f64::max)
    }

    /// Hermitian, unit trace and PSD to `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.hermiticity_error() > tol {
            return bad(format!(
                "density matrix not Hermitian ({:e})",
                self.hermiticity_error()
            ));
        }
        if (self.trace() - 1.0).abs() > tol {
            return bad(format!("density matrix trace {} ≠ 1", self.trace()));
        }
        if self.min_eigenvalue() < -tol {
            return bad(format!(
                "density matrix has eigenvalue {:e}",
                self.min_eigenvalue()
            ));
        }
        Ok(())
    }

    /// `J,m,J',m',re,im` rows (block-diagonal, so `J' = J`).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("J,m,J_prime,m_prime,re,im\n");
        for b in &self.blocks {
            for a in 0..b.matrix.nrows() {
                for c in 0..b.matrix.ncols() {
                    let z = b.matrix[(a, c)];
                    s.push_str(&format!(
                        "{},{},{},{},{:.12e},{:.12e}\n",
                        b.j, a, b.j, c, z.re, z.im
                    ));
                }
            }
        }
        s
    }
}

/// `Tr ρ² = Σ|ρ_ij|²`.
pub fn purity(dm: &ExcitedDensityMatrix) -> f64 {
    dm.blocks
        .iter()
        .map(|b| b.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum()
}

/// `Σ_{i≠j}|ρ_ij|² = Tr ρ² − Σρ_ii²`.
pub fn dynamical_coherence(dm: &ExcitedDensityMatrix) -> f64 {
    let diag: f64 = dm
        .blocks
        .iter()
        .map(|b| {
            b.matrix
                .diagonal()
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
        })
        .sum();
    (purity(dm) - diag).max(0.0)
}

/// Converts in-box quantities to a gas of given number density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentScaling {
    pub density_cm3: f64,
    pub r_max: f64,
}

impl ExperimentScaling {
    pub fn new(density_cm3: f64, r_max: f64) -> Result<Self> {
        let s = Self { density_cm3, r_max };
        let p = s.p_box();
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p_box = {p} must lie in (0,1)"
            )));
        }
        Ok(s)
    }

    /// `(4/3)πR_max³` in cm³.
    pub fn v_box_cm3(&self) -> f64 {
        let r = self.r_max * units::BOHR_IN_CM;
        4.0 / 3.0 * std::f64::consts::PI * r.powi(3)
    }

    /// Probability of finding a second atom in the box.
    pub fn p_box(&self) -> f64 {
        self.density_cm3 * self.v_box_cm3()
    }

    pub fn p_box2(&self) -> f64 {
        self.p_box().powi(2)
    }
}

/// `(P_g^box, P_g) = (Σ_J P_J², p_box²·Σ_J P_J²)`, the sum over sampled J
/// weighted by stride.
pub fn initial_ground_purity(
    weights: &[(JSample, f64)],
    scaling: &ExperimentScaling,
) -> (f64, f64) {
    let in_box: f64 = weights.iter().map(|(s, p)| s.stride_weight * p * p).sum();
    (in_box, scaling.p_box2() * in_box)
}

/// Purity of a maximally mixed state over the `N·N_J` sampled directions:
/// the floor any finite random-phase estimate of a purity sits on.
pub fn sampling_purity_lower_bound(n_realizations: usize, n_j: usize) -> f64 {
    1.0 / (n_realizations * n_j) as f64
}

/// Purity of `ρ = Σ_J w_J (1/N) Σₖ |ψₖ⟩⟨ψₖ|` normalised to unit trace, from
/// per-J sets of states (Gram-matrix form; exact, no basis needed).
pub fn ensemble_purity(per_j: &[(f64, Vec<&ChannelState>)]) -> f64 {
    let mut trace = 0.0;
    let mut sq = 0.0;
    for (w, states) in per_j {
        let n = states.len() as f64;
        let f = w / n;
        for (a, sa) in states.iter().enumerate() {
            trace += f * sa.norm_sqr();
            for sb in &states[a..] {
                let g = crate::grid::dot(sa.data(), sb.data()).norm_sqr()
                    * (sa.grid().spacing()).powi(2);
                sq += f * f * g * if std::ptr::eq(*sa, *sb) { 1.0 } else { 2.0 };
            }
        }
    }
    sq / (trace * trace)
}
