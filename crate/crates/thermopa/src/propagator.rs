//! Chebyshev expansions of `exp(−iHΔt)` and `exp(−τH)`.
//!
//! With `H̃ = (H − Ē)/ΔE` scaled into [−1, 1],
//!
//! ```text
//! exp(−iHΔt) = e^{−iĒΔt} Σₖ (2 − δₖ₀)(−i)ᵏ Jₖ(ΔE·Δt) Tₖ(H̃)
//! exp(−τH)   = e^{−τE_min} Σₖ (2 − δₖ₀)(−1)ᵏ e^{−x}Iₖ(x) Tₖ(H̃),  x = τΔE
//! ```
//!
//! Bessel sequences come from Miller's backward recurrence, normalised with
//! `J₀ + 2ΣJ₂ₖ = 1` and `e^{−x}(I₀ + 2ΣIₖ) = 1` respectively.

use crate::error::{Error, Result};
use crate::grid::{ChannelState, C64};
use crate::hamiltonian::{Hamiltonian, Workspace};

/// Interval assumed to contain the whole spectrum of `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub e_min: f64,
    pub e_max: f64,
}

impl SpectralBounds {
    pub fn new(e_min: f64, e_max: f64) -> Result<Self> {
        if !(e_max > e_min) || !e_min.is_finite() || !e_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "spectral bounds need E_max > E_min (got {e_min}, {e_max})"
            )));
        }
        Ok(Self { e_min, e_max })
    }
    pub fn center(&self) -> f64 {
        0.5 * (self.e_max + self.e_min)
    }
    pub fn half_width(&self) -> f64 {
        0.5 * (self.e_max - self.e_min)
    }
}

/// Fractional padding added on both sides of the estimated range.
pub const RANGE_PADDING: f64 = 0.05;

/// Gershgorin-style bounds: kinetic maximum + potential extremes ± coupling row sums, padded 5%.
pub fn estimate_spectral_range<H: Hamiltonian + ?Sized>(h: &H) -> SpectralBounds {
    let ing = h.range_ingredients();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in 0..ing.diag_min.len() {
        lo = lo.min(ing.diag_min[c] - ing.coupling_row_sum[c]);
        hi = hi.max(ing.kinetic_max + ing.diag_max[c] + ing.coupling_row_sum[c]);
    }
    let pad = RANGE_PADDING * (hi - lo);
    SpectralBounds {
        e_min: lo - pad,
        e_max: hi + pad,
    }
}

fn miller_start(x: f64) -> usize {
    (x + 40.0 + 15.0 * x.cbrt()).ceil() as usize
}

/// `J₀(x) … J_K(x)` where `|Jₖ| < tolerance` for every k > K (x ≥ 0).
pub fn bessel_j_sequence(x: f64, tolerance: f64) -> Vec<f64> {
    if x == 0.0 {
        return vec![1.0];
    }
    let m = miller_start(x) | 1; // odd start so the top even index is included below
    let mut vals = vec![0.0; m + 2];
    vals[m] = 1e-300;
    for k in (1..=m).rev() {
        vals[k - 1] = 2.0 * k as f64 / x * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            vals.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    let norm = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    vals.iter_mut().for_each(|v| *v /= norm);
    truncate(vals, tolerance)
}

/// `e^{−x}Iₖ(x)` for k = 0 … K with the tail below `tolerance` (x ≥ 0).
pub fn scaled_bessel_i_sequence(x: f64, tolerance: f64) -> Vec<f64> {
    if x == 0.0 {
        return vec![1.0];
    }
    let m = (x + 40.0 + 15.0 * x.sqrt()).ceil() as usize;
    let mut vals = vec![0.0; m + 2];
    vals[m] = 1e-300;
    for k in (1..=m).rev() {
        vals[k - 1] = 2.0 * k as f64 / x * vals[k] + vals[k + 1];
        if vals[k - 1] > 1e250 {
            vals.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    let norm = vals[0] + 2.0 * vals.iter().skip(1).sum::<f64>();
    vals.iter_mut().for_each(|v| *v /= norm);
    truncate(vals, tolerance)
}

fn truncate(mut vals: Vec<f64>, tolerance: f64) -> Vec<f64> {
    let last = vals.iter().rposition(|v| v.abs() >= tolerance).unwrap_or(0);
    vals.truncate(last + 1);
    vals
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    RealTime,
    ImaginaryTime,
}

/// Precomputed Chebyshev series for one step length.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPlan {
    pub kind: PlanKind,
    /// Δt (real time) or τ = β/2 (imaginary time).
    pub step: f64,
    pub bounds: SpectralBounds,
    pub tolerance: f64,
    coefficients: Vec<C64>,
    prefactor: C64,
}

/// Default truncation threshold on expansion coefficients.
pub const DEFAULT_TOLERANCE: f64 = 1e-14;

impl PropagationPlan {
    pub fn real_time(bounds: SpectralBounds, dt: f64, tolerance: f64) -> Self {
        let j = bessel_j_sequence(bounds.half_width() * dt.abs(), tolerance);
        let sign = if dt < 0.0 { -1.0 } else { 1.0 };
        let mut phase = C64::new(1.0, 0.0);
        let coefficients = j
            .iter()
            .enumerate()
            .map(|(k, &jk)| {
                let c = if k == 0 { jk } else { 2.0 * jk } * phase;
                phase *= C64::new(0.0, -sign);
                c
            })
            .collect();
        Self {
            kind: PlanKind::RealTime,
            step: dt,
            bounds,
            tolerance,
            coefficients,
            prefactor: C64::from_polar(1.0, -bounds.center() * dt),
        }
    }

    pub fn imaginary_time(bounds: SpectralBounds, tau: f64, tolerance: f64) -> Self {
        let i = scaled_bessel_i_sequence(bounds.half_width() * tau, tolerance);
        let coefficients = i
            .iter()
            .enumerate()
            .map(|(k, &ik)| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                C64::new(if k == 0 { ik } else { 2.0 * s * ik }, 0.0)
            })
            .collect();
        Self {
            kind: PlanKind::ImaginaryTime,
            step: tau,
            bounds,
            tolerance,
            coefficients,
            prefactor: C64::new((-tau * bounds.e_min).exp(), 0.0),
        }
    }

    /// Number of Chebyshev terms kept.
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// Apply the series to `psi` with `H` frozen at time `t`, writing into `out`.
    pub fn apply<H: Hamiltonian + ?Sized>(
        &self,
        h: &H,
        t: f64,
        psi: &[C64],
        out: &mut [C64],
        ws: &mut SeriesWorkspace,
    ) -> Result<()> {
        let n = psi.len();
        ws.ensure(n, h);
        let center = self.bounds.center();
        let inv = 1.0 / self.bounds.half_width();
        let limit = if h.is_hermitian() { 1e2 } else { 1e8 };
        let psi_norm = psi
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);

        for (o, p) in out.iter_mut().zip(psi) {
            *o = self.coefficients[0] * p;
        }
        if self.coefficients.len() == 1 {
            out.iter_mut().for_each(|o| *o *= self.prefactor);
            return Ok(());
        }
        let SeriesWorkspace {
            prev,
            cur,
            next,
            hamiltonian,
        } = ws;
        prev.copy_from_slice(psi);
        h.apply(t, psi, cur, hamiltonian);
        for i in 0..n {
            cur[i] = (cur[i] - center * psi[i]) * inv;
            out[i] += self.coefficients[1] * cur[i];
        }
        for k in 2..self.coefficients.len() {
            h.apply(t, cur, next, hamiltonian);
            let a = self.coefficients[k];
            for i in 0..n {
                let v = 2.0 * (next[i] - center * cur[i]) * inv - prev[i];
                next[i] = v;
                out[i] += a * v;
            }
            if k % 16 == 0 {
                let norm = next.iter().map(|z| z.norm_sqr()).sum::<f64>();
                if !(norm <= limit * psi_norm) {
                    return Err(Error::BoundsViolated {
                        order: k,
                        e_min: self.bounds.e_min,
                        e_max: self.bounds.e_max,
                    });
                }
            }
            std::mem::swap(prev, cur);
            std::mem::swap(cur, next);
        }
        out.iter_mut().for_each(|o| *o *= self.prefactor);
        Ok(())
    }
}

/// Worker-local buffers for [`PropagationPlan::apply`].
#[derive(Debug, Clone, Default)]
pub struct SeriesWorkspace {
    prev: Vec<C64>,
    cur: Vec<C64>,
    next: Vec<C64>,
    hamiltonian: Workspace,
}

impl SeriesWorkspace {
    pub fn new<H: Hamiltonian + ?Sized>(h: &H) -> Self {
        let mut ws = Self::default();
        ws.ensure(h.n_channels() * h.grid().n_points(), h);
        ws
    }

    fn ensure<H: Hamiltonian + ?Sized>(&mut self, n: usize, h: &H) {
        if self.prev.len() != n {
            let z = C64::new(0.0, 0.0);
            self.prev = vec![z; n];
            self.cur = vec![z; n];
            self.next = vec![z; n];
            self.hamiltonian = h.workspace();
        }
    }
}

/// `exp(−iH(t)Δt)ψ` for one step with the given plan.
pub fn chebyshev_real_step<H: Hamiltonian + ?Sized>(
    state: &ChannelState,
    h: &H,
    t: f64,
    plan: &PropagationPlan,
) -> Result<ChannelState> {
    let mut out = state.clone();
    let mut ws = SeriesWorkspace::new(h);
    plan.apply(h, t, state.data(), out.data_mut(), &mut ws)?;
    Ok(out)
}

/// `exp(−τH)ψ` (unnormalised) with bounds estimated from `h`.
pub fn chebyshev_imag<H: Hamiltonian + ?Sized>(
    state: &ChannelState,
    h: &H,
    tau: f64,
) -> Result<ChannelState> {
    let plan = PropagationPlan::imaginary_time(estimate_spectral_range(h), tau, DEFAULT_TOLERANCE);
    let mut out = state.clone();
    let mut ws = SeriesWorkspace::new(h);
    plan.apply(h, 0.0, state.data(), out.data_mut(), &mut ws)?;
    Ok(out)
}

/// Settings for [`propagate_pulse`].
#[derive(Debug, Clone, PartialEq)]
pub struct PulseRun {
    pub tolerance: f64,
    /// Abort if `|‖ψ(t_end)‖ − ‖ψ(t_start)‖|` exceeds this (Hermitian H only).
    pub norm_drift_max: f64,
    /// Record the state every this many steps (and at the end).
    pub sample_every: Option<usize>,
    /// Override the estimated spectral bounds.
    pub bounds: Option<SpectralBounds>,
}

impl Default for PulseRun {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            norm_drift_max: 1e-6,
            sample_every: None,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropagationOutcome {
    pub state: ChannelState,
    pub norm_drift: f64,
    pub steps: usize,
    pub order: usize,
    pub trajectory: Vec<(f64, ChannelState)>,
}

/// Step from `t_start` to `t_end` with H frozen at each step midpoint.
///
/// The number of steps is `⌈(t_end − t_start)/dt⌉`; the actual step is the
/// interval divided evenly.
pub fn propagate_pulse<H: Hamiltonian + ?Sized>(
    state: &ChannelState,
    h: &H,
    t_start: f64,
    t_end: f64,
    dt: f64,
    run: &PulseRun,
) -> Result<PropagationOutcome> {
    if !(dt > 0.0) || !(t_end >= t_start) {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and t_end ≥ t_start (dt = {dt})"
        )));
    }
    let steps = ((t_end - t_start) / dt).ceil().max(1.0) as usize;
    let step = (t_end - t_start) / steps as f64;
    let bounds = run.bounds.unwrap_or_else(|| estimate_spectral_range(h));
    let plan = PropagationPlan::real_time(bounds, step, run.tolerance);
    let mut ws = SeriesWorkspace::new(h);
    let norm0 = state.norm();
    let mut psi = state.clone();
    let mut buf = state.data().to_vec();
    let mut trajectory = Vec::new();
    for s in 0..steps {
        let t_mid = t_start + (s as f64 + 0.5) * step;
        plan.apply(h, t_mid, psi.data(), &mut buf, &mut ws)?;
        psi.data_mut().copy_from_slice(&buf);
        if let Some(every) = run.sample_every {
            if (s + 1) % every.max(1) == 0 || s + 1 == steps {
                trajectory.push((t_start + (s + 1) as f64 * step, psi.clone()));
            }
        }
    }
    let norm_drift = (psi.norm() - norm0).abs();
    if h.is_hermitian() && norm_drift > run.norm_drift_max * norm0.max(f64::MIN_POSITIVE) {
        return Err(Error::NormDrift {
            drift: norm_drift,
            limit: run.norm_drift_max,
        });
    }
    Ok(PropagationOutcome {
        state: psi,
        norm_drift,
        steps,
        order: plan.order(),
        trajectory,
    })
}
