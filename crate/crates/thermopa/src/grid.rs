//! Radial grid, multichannel wavefunctions and the spectral kinetic operator.
//!
//! Quadrature is the rectangle rule, `Σ f(Rᵢ)·ΔR`, everywhere in the crate.
//! With the sine (hard-wall) convention the first and last grid points are the
//! walls: amplitudes there are zero and the kinetic operator ignores them.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Equidistant radial mesh `r_min, r_min + ΔR, …, r_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    r_min: f64,
    r_max: f64,
    n_points: usize,
    spacing: f64,
}

/// Alias matching the operation name used in the docs.
pub fn make_grid(r_min: f64, r_max: f64, n_points: usize) -> Result<RadialGrid> {
    RadialGrid::new(r_min, r_max, n_points)
}

impl RadialGrid {
    pub fn new(r_min: f64, r_max: f64, n_points: usize) -> Result<Self> {
        if !(r_min > 0.0) || !r_min.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "r_min must be positive, got {r_min}"
            )));
        }
        if !(r_max > r_min) || !r_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "r_max ({r_max}) must exceed r_min ({r_min})"
            )));
        }
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {n_points}"
            )));
        }
        Ok(Self {
            r_min,
            r_max,
            n_points,
            spacing: (r_max - r_min) / (n_points - 1) as f64,
        })
    }

    /// Grid whose spacing resolves kinetic energies up to `e_kin_max` (hartree),
    /// rounded up so that `n_points − 1` has only factors 2, 3 and 5.
    pub fn resolving(r_min: f64, r_max: f64, mass: f64, e_kin_max: f64) -> Result<Self> {
        if !(e_kin_max > 0.0) {
            return Err(Error::InvalidGrid(
                "kinetic energy target must be positive".into(),
            ));
        }
        let dr = PI / (2.0 * mass * e_kin_max).sqrt();
        let intervals = ((r_max - r_min) / dr).ceil().max(1.0) as usize;
        Self::new(r_min, r_max, fft_friendly(intervals) + 1)
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn n_points(&self) -> usize {
        self.n_points
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn length(&self) -> f64 {
        self.r_max - self.r_min
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.r_max
        } else {
            self.r_min + i as f64 * self.spacing
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Largest kinetic-energy eigenvalue representable with `boundary`.
    pub fn max_kinetic(&self, mass: f64, boundary: Boundary) -> f64 {
        match boundary {
            Boundary::Sine => {
                let n_max = self.n_points.saturating_sub(2) as f64;
                (n_max * PI / self.length()).powi(2) / (2.0 * mass)
            }
            Boundary::Periodic => (PI / self.spacing).powi(2) / (2.0 * mass),
        }
    }
}

/// Smallest `m ≥ n` whose only prime factors are 2, 3, 5.
pub fn fft_friendly(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// `J(J+1)/(2mR²)` on every grid point.
pub fn centrifugal_term(grid: &RadialGrid, j: u32, mass: f64) -> Vec<f64> {
    let jj = j as f64 * (j as f64 + 1.0);
    grid.points()
        .into_iter()
        .map(|r| jj / (2.0 * mass * r * r))
        .collect()
}

/// Boundary convention of the kinetic operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Hard walls at `r_min` and `r_max` (particle in a box).
    #[default]
    Sine,
    /// Period `n_points · ΔR`.
    Periodic,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Sine => "sine",
            Boundary::Periodic => "periodic",
        })
    }
}

/// Multichannel wavefunction: `n_channels × n_points` amplitudes, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    grid: RadialGrid,
    labels: Arc<[String]>,
    j: u32,
    data: Vec<C64>,
}

impl ChannelState {
    pub fn zeros(grid: RadialGrid, labels: Arc<[String]>, j: u32) -> Self {
        let data = vec![C64::new(0.0, 0.0); labels.len() * grid.n_points()];
        Self {
            grid,
            labels,
            j,
            data,
        }
    }

    /// Single-channel state from amplitudes on every grid point.
    pub fn single(grid: RadialGrid, label: &str, j: u32, amplitudes: Vec<C64>) -> Result<Self> {
        Self::from_data(grid, vec![label.to_string()].into(), j, amplitudes)
    }

    pub fn from_data(
        grid: RadialGrid,
        labels: Arc<[String]>,
        j: u32,
        data: Vec<C64>,
    ) -> Result<Self> {
        if data.len() != labels.len() * grid.n_points() {
            return Err(Error::Layout(format!(
                "{} amplitudes for {} channels × {} points",
                data.len(),
                labels.len(),
                grid.n_points()
            )));
        }
        Ok(Self {
            grid,
            labels,
            j,
            data,
        })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }
    pub fn labels(&self) -> &Arc<[String]> {
        &self.labels
    }
    pub fn j(&self) -> u32 {
        self.j
    }
    pub fn n_channels(&self) -> usize {
        self.labels.len()
    }
    pub fn data(&self) -> &[C64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[C64] {
        let n = self.grid.n_points();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [C64] {
        let n = self.grid.n_points();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// `∫|ψ_c|² dR` for one channel.
    pub fn population(&self, c: usize) -> f64 {
        self.channel(c).iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&mut self, factor: C64) {
        self.data.iter_mut().for_each(|z| *z *= factor);
    }

    pub fn same_layout(&self, other: &ChannelState) -> bool {
        self.grid == other.grid && self.labels == other.labels && self.j == other.j
    }
}

/// `Σ_channels Σ_grid conj(a)·b·ΔR`.
pub fn inner_product(a: &ChannelState, b: &ChannelState) -> Result<C64> {
    if !a.same_layout(b) {
        return Err(Error::Layout(
            "inner product of states on different grids, channels or J".into(),
        ));
    }
    Ok(dot(&a.data, &b.data) * a.grid.spacing())
}

/// Plain `Σ conj(a)·b` without the quadrature weight.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Spectral kinetic operator `P²/2m` for one channel.
///
/// The sine convention uses an odd extension of length `2(n_points − 1)`, so a
/// single complex FFT pair diagonalises the hard-wall Laplacian exactly.
#[derive(Clone)]
pub struct KineticOperator {
    boundary: Boundary,
    n_points: usize,
    multipliers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    max_eigenvalue: f64,
}

impl fmt::Debug for KineticOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KineticOperator")
            .field("boundary", &self.boundary)
            .field("n_points", &self.n_points)
            .field("max_eigenvalue", &self.max_eigenvalue)
            .finish()
    }
}

/// Worker-local buffers for [`KineticOperator::apply`].
#[derive(Debug, Clone, Default)]
pub struct KineticScratch {
    buffer: Vec<C64>,
    fft: Vec<C64>,
}

impl KineticOperator {
    pub fn new(grid: &RadialGrid, mass: f64, boundary: Boundary) -> Self {
        let n = grid.n_points();
        let (len, wave_unit) = match boundary {
            Boundary::Sine => (2 * (n - 1), PI / grid.length()),
            Boundary::Periodic => (n, 2.0 * PI / (n as f64 * grid.spacing())),
        };
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let multipliers: Vec<f64> = (0..len)
            .map(|q| {
                let q = q.min(len - q) as f64;
                (q * wave_unit).powi(2) / (2.0 * mass) / len as f64
            })
            .collect();
        Self {
            boundary,
            n_points: n,
            multipliers,
            forward,
            inverse,
            max_eigenvalue: grid.max_kinetic(mass, boundary),
        }
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }

    pub fn scratch(&self) -> KineticScratch {
        let len = self.multipliers.len();
        let s = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        KineticScratch {
            buffer: vec![C64::new(0.0, 0.0); len],
            fft: vec![C64::new(0.0, 0.0); s],
        }
    }

    /// `out = T·input` for one channel.
    pub fn apply(&self, input: &[C64], out: &mut [C64], scratch: &mut KineticScratch) {
        let n = self.n_points;
        debug_assert_eq!(input.len(), n);
        debug_assert_eq!(out.len(), n);
        if scratch.buffer.len() != self.multipliers.len() {
            *scratch = self.scratch();
        }
        let buf = &mut scratch.buffer;
        let zero = C64::new(0.0, 0.0);
        match self.boundary {
            Boundary::Sine => {
                let len = buf.len();
                buf[0] = zero;
                buf[n - 1] = zero;
                for i in 1..n - 1 {
                    buf[i] = input[i];
                    buf[len - i] = -input[i];
                }
            }
            Boundary::Periodic => buf.copy_from_slice(input),
        }
        self.forward.process_with_scratch(buf, &mut scratch.fft);
        buf.iter_mut()
            .zip(&self.multipliers)
            .for_each(|(z, w)| *z *= *w);
        self.inverse.process_with_scratch(buf, &mut scratch.fft);
        match self.boundary {
            Boundary::Sine => {
                out[0] = zero;
                out[n - 1] = zero;
                out[1..n - 1].copy_from_slice(&buf[1..n - 1]);
            }
            Boundary::Periodic => out.copy_from_slice(buf),
        }
    }
}

/// `T̂ψ` for every channel of `state`.
pub fn apply_kinetic(state: &ChannelState, mass: f64, boundary: Boundary) -> ChannelState {
    let op = KineticOperator::new(state.grid(), mass, boundary);
    let mut scratch = op.scratch();
    let mut out = state.clone();
    for c in 0..state.n_channels() {
        op.apply(state.channel(c), out.channel_mut(c), &mut scratch);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_arithmetic() {
        let g = make_grid(1.0, 201.0, 3).unwrap();
        assert_eq!(g.spacing(), 100.0);
        assert_eq!(g.point(0), 1.0);
        assert_eq!(g.point(2), 201.0);
        assert!(make_grid(0.0, 1.0, 4).is_err());
        assert!(make_grid(1.0, 2.0, 1).is_err());
        assert!(make_grid(2.0, 1.0, 5).is_err());
    }

    #[test]
    fn fft_friendly_sizes() {
        assert_eq!(fft_friendly(7), 8);
        assert_eq!(fft_friendly(1889), 1920);
        assert_eq!(fft_friendly(243), 243);
    }

    #[test]
    fn centrifugal_values() {
        let g = make_grid(1.0, 5.0, 5).unwrap();
        assert!(centrifugal_term(&g, 0, 3.0).iter().all(|&v| v == 0.0));
        assert_eq!(centrifugal_term(&g, 1, 1.0)[0], 1.0);
        let c = centrifugal_term(&g, 3, 2.0);
        assert!(c.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn periodic_constant_and_plane_wave() {
        let g = make_grid(1.0, 11.0, 65).unwrap();
        let n = g.n_points();
        let state = ChannelState::single(g, "x", 0, vec![C64::new(1.0, 0.0); n]).unwrap();
        let t = apply_kinetic(&state, 2.0, Boundary::Periodic);
        assert!(t.data().iter().all(|z| z.norm() < 1e-12));

        let period = n as f64 * g.spacing();
        let k = 2.0 * PI * 5.0 / period;
        let wave: Vec<C64> = g
            .points()
            .iter()
            .map(|r| C64::from_polar(1.0, k * r))
            .collect();
        let state = ChannelState::single(g, "x", 0, wave.clone()).unwrap();
        let t = apply_kinetic(&state, 2.0, Boundary::Periodic);
        for (a, b) in t.data().iter().zip(&wave) {
            assert!((a - b * (k * k / 4.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn box_mode_is_eigenfunction() {
        let g = make_grid(2.0, 12.0, 101).unwrap();
        let mass = 3.0;
        for mode in [1usize, 4, 30] {
            let kn = mode as f64 * PI / g.length();
            let psi: Vec<C64> = g
                .points()
                .iter()
                .map(|r| C64::new((kn * (r - g.r_min())).sin(), 0.0))
                .collect();
            let state = ChannelState::single(g, "x", 0, psi.clone()).unwrap();
            let t = apply_kinetic(&state, mass, Boundary::Sine);
            let e = kn * kn / (2.0 * mass);
            for (a, b) in t.data().iter().zip(&psi) {
                assert!((a - b * e).norm() < 1e-10 * e.max(1.0));
            }
        }
    }
}
