//! Dense partial-wave eigenproblems and shape resonances.
//!
//! The ground Hamiltonian is diagonalised in the sine DVR of the hard-wall
//! box: interior grid points `R₁ … R_{n−2}`, kinetic matrix in Colbert–Miller
//! closed form. Eigenvectors are stored as grid functions normalised under the
//! rectangle rule, so projections use the same quadrature as everything else.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use ndarray_linalg::EigVals;

use crate::error::{Error, Result};
use crate::grid::{RadialGrid, C64};
use crate::hamiltonian::Cap;
use crate::units;

/// Sine-DVR kinetic matrix on the `n_points − 2` interior points.
pub fn sine_dvr_kinetic(grid: &RadialGrid, mass: f64) -> DMatrix<f64> {
    let intervals = grid.n_points() - 1;
    let n = intervals - 1;
    let nf = intervals as f64;
    let pref = std::f64::consts::PI.powi(2) / (4.0 * mass * grid.length().powi(2));
    let s2 = |x: f64| {
        let s = x.sin();
        1.0 / (s * s)
    };
    let half = std::f64::consts::PI / (2.0 * nf);
    DMatrix::from_fn(n, n, |a, b| {
        let (i, j) = ((a + 1) as f64, (b + 1) as f64);
        if a == b {
            pref * ((2.0 * nf * nf + 1.0) / 3.0 - s2(std::f64::consts::PI * i / nf))
        } else {
            let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
            pref * sign * (s2(half * (i - j)) - s2(half * (i + j)))
        }
    })
}

fn dvr_hamiltonian(v_eff: &[f64], grid: &RadialGrid, mass: f64) -> Result<DMatrix<f64>> {
    if v_eff.len() != grid.n_points() {
        return Err(Error::Layout("potential length differs from grid".into()));
    }
    if grid.n_points() < 3 {
        return Err(Error::InvalidGrid(
            "diagonalization needs at least one interior point".into(),
        ));
    }
    if v_eff.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "non-finite effective potential".into(),
        ));
    }
    let mut h = sine_dvr_kinetic(grid, mass);
    for i in 0..h.nrows() {
        h[(i, i)] += v_eff[i + 1];
    }
    Ok(h)
}

/// Classification of one eigenstate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateTag {
    Bound,
    Continuum,
    /// Box state overlapping a shape resonance of width `gamma` (hartree).
    Resonance {
        gamma: f64,
    },
}

/// Eigenpairs of one partial-wave Hamiltonian.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub j: u32,
    pub grid: RadialGrid,
    pub asymptote: f64,
    /// Ascending.
    pub energies: Vec<f64>,
    /// Column m: eigenvector on interior points, Euclidean-normalised.
    vectors: DMatrix<f64>,
    /// Number of states below the asymptote.
    pub n0: usize,
    pub tags: Vec<StateTag>,
}

/// Full dense eigensolution of `T + V_eff` in the sine DVR.
pub fn diagonalize_partial_wave(
    v_eff: &[f64],
    grid: &RadialGrid,
    mass: f64,
    j: u32,
    asymptote: f64,
) -> Result<SpectralDecomposition> {
    let h = dvr_hamiltonian(v_eff, grid, mass)?;
    let eig = h.symmetric_eigen();
    if eig.eigenvalues.iter().any(|e| !e.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let n = energies.len();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        // Fix the sign so the first significant component is positive.
        let sign = v
            .iter()
            .find(|x| x.abs() > 1e-8)
            .map_or(1.0, |x| x.signum());
        vectors.set_column(col, &(v * sign));
    }
    let n0 = energies.iter().filter(|&&e| e < asymptote).count();
    let tags = (0..n)
        .map(|m| {
            if m < n0 {
                StateTag::Bound
            } else {
                StateTag::Continuum
            }
        })
        .collect();
    Ok(SpectralDecomposition {
        j,
        grid: *grid,
        asymptote,
        energies,
        vectors,
        n0,
        tags,
    })
}

/// Eigenvalues only (ascending); cheaper when vectors are not needed.
pub fn eigenvalues_partial_wave(v_eff: &[f64], grid: &RadialGrid, mass: f64) -> Result<Vec<f64>> {
    let h = dvr_hamiltonian(v_eff, grid, mass)?;
    let mut e: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    e.sort_by(f64::total_cmp);
    Ok(e)
}

pub fn count_bound_states(decomp: &SpectralDecomposition, asymptote: f64) -> usize {
    decomp.energies.iter().filter(|&&e| e < asymptote).count()
}

impl SpectralDecomposition {
    pub fn n_states(&self) -> usize {
        self.energies.len()
    }

    fn weight(&self) -> f64 {
        self.grid.spacing().sqrt()
    }

    /// Eigenfunction `m` on the full grid (zero at the walls).
    pub fn vector(&self, m: usize) -> Vec<f64> {
        let w = 1.0 / self.weight();
        let mut out = vec![0.0; self.grid.n_points()];
        for (i, x) in self.vectors.column(m).iter().enumerate() {
            out[i + 1] = x * w;
        }
        out
    }

    /// Raw interior eigenvector matrix (columns Euclidean-normalised).
    pub fn interior_vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// `c_m = ∫ φ_m(R) ψ(R) dR` for the first `n_m` states (all if `None`).
    pub fn project(&self, psi: &[C64], n_m: Option<usize>) -> Vec<C64> {
        let n_m = n_m.unwrap_or(self.n_states()).min(self.n_states());
        let n = self.vectors.nrows();
        let re = DVector::from_iterator(n, psi[1..=n].iter().map(|z| z.re));
        let im = DVector::from_iterator(n, psi[1..=n].iter().map(|z| z.im));
        let sub = self.vectors.columns(0, n_m);
        let (cr, ci) = (sub.tr_mul(&re), sub.tr_mul(&im));
        let w = self.weight();
        (0..n_m).map(|m| C64::new(cr[m], ci[m]) * w).collect()
    }

    /// `Σ_m c_m φ_m(R)` on the full grid, `coefficients[k]` paired with `states[k]`.
    pub fn synthesize(&self, states: &[usize], coefficients: &[C64]) -> Vec<C64> {
        let n = self.vectors.nrows();
        let mut re = DVector::zeros(n);
        let mut im = DVector::zeros(n);
        for (&m, c) in states.iter().zip(coefficients) {
            let col = self.vectors.column(m);
            re.axpy(c.re, &col, 1.0);
            im.axpy(c.im, &col, 1.0);
        }
        let w = 1.0 / self.weight();
        let mut out = vec![C64::new(0.0, 0.0); self.grid.n_points()];
        for i in 0..n {
            out[i + 1] = C64::new(re[i], im[i]) * w;
        }
        out
    }

    /// Tag box states near accepted resonances shorter-lived than `cutoff_ns`:
    /// the nearest state plus every state within Γ of the position.
    pub fn tag_resonances(&mut self, rows: &[ResonanceRow], cutoff_ns: f64) {
        for r in rows
            .iter()
            .filter(|r| r.j == self.j && r.lifetime_ns() < cutoff_ns)
        {
            let nearest = (0..self.n_states()).min_by(|&a, &b| {
                (self.energies[a] - r.energy)
                    .abs()
                    .total_cmp(&(self.energies[b] - r.energy).abs())
            });
            for m in 0..self.n_states() {
                if Some(m) == nearest || (self.energies[m] - r.energy).abs() < r.gamma {
                    if self.tags[m] != StateTag::Bound {
                        self.tags[m] = StateTag::Resonance { gamma: r.gamma };
                    }
                }
            }
        }
    }
}

/// One shape resonance `E − iΓ/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceRow {
    pub j: u32,
    pub energy: f64,
    pub gamma: f64,
    /// Eigenvalue drift over the η-doubling that accepted it.
    pub drift: f64,
}

impl ResonanceRow {
    pub fn lifetime_au(&self) -> f64 {
        1.0 / self.gamma
    }
    pub fn lifetime_ns(&self) -> f64 {
        self.lifetime_au() * units::AU_TIME_IN_NS
    }
    pub fn energy_kelvin(&self) -> f64 {
        self.energy * units::HARTREE_IN_KELVIN
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResonanceTable {
    pub rows: Vec<ResonanceRow>,
}

impl ResonanceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("J,E_hartree,E_kelvin,gamma_hartree,lifetime_ns\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.12e},{:.9e},{:.6e},{:.6e}",
                r.j,
                r.energy,
                r.energy_kelvin(),
                r.gamma,
                r.lifetime_ns()
            );
        }
        s
    }

    /// Sorted distinct J values carrying at least one resonance.
    pub fn j_values(&self) -> Vec<u32> {
        let mut j: Vec<u32> = self.rows.iter().map(|r| r.j).collect();
        j.dedup();
        j
    }
}

/// Absorbing-potential search settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CapSearch {
    /// CAP onset as a fraction of the box: `r_start = r_min + frac·(r_max − r_min)`.
    pub r_start_fraction: f64,
    pub order: u32,
    /// Strength ladder η₀, 2η₀, 4η₀, …; each consecutive pair is an η-doubling test.
    pub eta_ladder: Vec<f64>,
    /// Asymptote of the open channel (hartree).
    pub asymptote: f64,
}

impl Default for CapSearch {
    fn default() -> Self {
        Self {
            r_start_fraction: 0.85,
            order: 2,
            eta_ladder: doubling_ladder(1e-5, 10),
            asymptote: 0.0,
        }
    }
}

pub fn doubling_ladder(eta0: f64, rungs: usize) -> Vec<f64> {
    (0..rungs).map(|k| eta0 * 2f64.powi(k as i32)).collect()
}

/// Top of the barrier outside the innermost well, if it rises above `asymptote`.
pub fn barrier_top(v_eff: &[f64], asymptote: f64) -> Option<(usize, f64)> {
    let well = (0..v_eff.len()).min_by(|&a, &b| v_eff[a].total_cmp(&v_eff[b]))?;
    let (i, top) = (well..v_eff.len())
        .map(|i| (i, v_eff[i]))
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    // A maximum at the outer wall is not a barrier: nothing is enclosed.
    (top > asymptote && i > well && i + 1 < v_eff.len()).then_some((i, top))
}

/// Complex eigenvalues of `T + V_eff − iηf(R)` in the sine DVR (LAPACK zgeev).
pub fn cap_eigenvalues(v_eff: &[f64], grid: &RadialGrid, mass: f64, cap: &Cap) -> Result<Vec<C64>> {
    let h = dvr_hamiltonian(v_eff, grid, mass)?;
    let w = cap.profile(grid)?;
    let n = h.nrows();
    let a = Array2::from_shape_fn((n, n), |(i, j)| {
        let mut z = C64::new(h[(i, j)], 0.0);
        if i == j {
            z.im -= w[i + 1];
        }
        z
    });
    let ev = a.eigvals().map_err(|e| Error::Eigensolver(e.to_string()))?;
    Ok(ev.to_vec())
}

/// Per-doubling drift, as a fraction of Γ, below which a step counts as stable.
///
/// Box pseudo-continuum states in the strongly absorbing regime drift by
/// about Γ/5 per doubling with a steadily shrinking Γ, so the Γ/4 rule alone
/// admits them; a plateau of true resonances sits well below Γ/8.
pub const CAP_STABLE_DRIFT: f64 = 0.125;
/// Consecutive stable doublings required for acceptance.
pub const CAP_STABLE_RUN: usize = 2;

/// Shape resonances of one partial wave by the η-stability criterion.
///
/// Every admissible eigenvalue on every rung is followed up the η ladder by
/// nearest match. It is accepted when the next [`CAP_STABLE_RUN`] doublings
/// each move `E − iΓ/2` by less than [`CAP_STABLE_DRIFT`]·Γ, with Γ > 0 and
/// asymptote < E < barrier top throughout. Duplicates keep the most stable step.
pub fn find_shape_resonances(
    v_eff: &[f64],
    grid: &RadialGrid,
    mass: f64,
    j: u32,
    search: &CapSearch,
) -> Result<Vec<ResonanceRow>> {
    let Some((_, top)) = barrier_top(v_eff, search.asymptote) else {
        return Ok(Vec::new());
    };
    if search.eta_ladder.len() < CAP_STABLE_RUN + 1 {
        return Err(Error::InvalidParameter(format!(
            "CAP ladder needs at least {} rungs",
            CAP_STABLE_RUN + 1
        )));
    }
    let r_start = grid.r_min() + search.r_start_fraction * grid.length();
    let spectra = search
        .eta_ladder
        .iter()
        .map(|&eta| {
            cap_eigenvalues(
                v_eff,
                grid,
                mass,
                &Cap {
                    r_start,
                    eta,
                    order: search.order,
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let nearest = |set: &[C64], z: C64| {
        set.iter()
            .copied()
            .min_by(|a, b| (*a - z).norm().total_cmp(&(*b - z).norm()))
    };
    let admissible = |z: &C64| z.re > search.asymptote && z.re < top && z.im < 0.0;
    let mut found: Vec<ResonanceRow> = Vec::new();
    for k0 in 0..spectra.len() - CAP_STABLE_RUN {
        for &z0 in spectra[k0].iter().filter(|z| admissible(z)) {
            let mut best: Option<ResonanceRow> = None;
            let mut z = z0;
            for s in &spectra[k0 + 1..=k0 + CAP_STABLE_RUN] {
                let Some(next) = nearest(s, z).filter(admissible) else {
                    best = None;
                    break;
                };
                let row = ResonanceRow {
                    j,
                    energy: z.re,
                    gamma: -2.0 * z.im,
                    drift: (next - z).norm(),
                };
                if row.drift >= CAP_STABLE_DRIFT * row.gamma {
                    best = None;
                    break;
                }
                if best.is_none_or(|b| b.drift / b.gamma > row.drift / row.gamma) {
                    best = Some(row);
                }
                z = next;
            }
            let Some(row) = best else { continue };
            match found
                .iter_mut()
                .find(|r| (r.energy - row.energy).abs() < 0.5 * r.gamma.max(row.gamma))
            {
                Some(prev) if prev.drift / prev.gamma > row.drift / row.gamma => *prev = row,
                Some(_) => {}
                None => found.push(row),
            }
        }
    }
    found.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(found)
}
