//! Acceptance criteria A1–A9 on the model system.
//!
//! `cargo test -p thermopa --test acceptance` runs all of them; trailing
//! arguments (`-- A3 A9`) select a subset. One verdict line is printed per
//! criterion, followed by the individual checks. Expensive criteria run on
//! reduced boxes, supports and realization counts; every such setting is
//! printed next to the number it produced.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use thermopa::config::{CurveSource, NormalizationChoice, RunConfig};
use thermopa::curves::{interpolate, model_mg2, morse_curve, ModelMg2};
use thermopa::grid::{Boundary, ChannelState, RadialGrid, C64};
use thermopa::hamiltonian::{
    assemble_ground, assemble_pa, AssemblyOptions, GroundHamiltonian, Hamiltonian,
};
use thermopa::observables::{
    build_excited_density, initial_ground_purity, purity,
    sampling_purity_lower_bound, ExcitedCoefficients, ExperimentScaling,
};
use thermopa::propagator::{propagate_pulse, PulseRun};
use thermopa::runs::{
    build_context, partition, photoassociate, pulse_from_config, pump_partial_wave,
    resonance_scan, thermal_density, PumpReport, PumpSettings, System,
};
use thermopa::spectral::{
    barrier_top, diagonalize_partial_wave, doubling_ladder, eigenvalues_partial_wave,
    find_shape_resonances, CapSearch,
};
use thermopa::thermal::{
    classical_z_j, gaussian_random_state, generate_realization, partition_function_classical,
    random_phases, tau_min, thermal_expectation, EnsembleSpec, GaussianPath, JSample, Method,
};
use thermopa::units;
use thermopa::validation::{
    box_levels, classical_z_j_quadrature, dense_time_ordered_propagator, explicit_sine_kinetic,
    exact_thermal_density, free_gaussian_width, morse_levels, stabilization_resonances,
    DensePumpModel,
};
use thermopa::Result;

const T: f64 = 1000.0;

/// Reduced pump settings shared by A5–A8: kinetic energies resolved to 0.06 Eh,
/// envelope cut at ±3 FWHM, 20 a.u. steps (under FWHM/200).
const E_KIN: f64 = 0.06;
const SUPPORT_FWHM: f64 = 3.0;
const DT: f64 = 20.0;

struct Criterion {
    lines: Vec<String>,
    pass: bool,
}

impl Criterion {
    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        self.pass &= ok;
        let tag = if ok { "ok  " } else { "FAIL" };
        self.lines.push(format!("    [{tag}] {}", msg.into()));
    }

    fn note(&mut self, msg: impl Into<String>) {
        self.lines.push(format!("    {}", msg.into()));
    }
}

type Body = fn(&mut Criterion) -> Result<()>;

fn main() {
    let selected: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let criteria: [(&str, &str, Body); 9] = [
        ("A1", "partition functions", a1),
        ("A2", "volume and purity arithmetic", a2),
        ("A3", "eigensolver", a3),
        ("A4", "propagator", a4),
        ("A5", "random-phase statistics", a5),
        ("A6", "method cross-validation", a6),
        ("A7", "two-photon physics", a7),
        ("A8", "purity and coherence", a8),
        ("A9", "shape resonances", a9),
    ];
    let mut failed = Vec::new();
    let mut out = std::io::stdout().lock();
    for (id, title, body) in criteria {
        if !selected.is_empty() && !selected.iter().any(|s| s == id) {
            continue;
        }
        let start = Instant::now();
        let mut c = Criterion {
            lines: Vec::new(),
            pass: true,
        };
        if let Err(e) = body(&mut c) {
            c.check(false, format!("aborted: {e}"));
        }
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(
            out,
            "{id}: {verdict} {title} ({:.1} s)",
            start.elapsed().as_secs_f64()
        );
        for l in &c.lines {
            let _ = writeln!(out, "{l}");
        }
        let _ = out.flush();
        if !c.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        let _ = writeln!(out, "failed: {}", failed.join(" "));
        std::process::exit(1);
    }
}

fn mass() -> f64 {
    units::mg2_reduced_mass()
}

fn wavenumber(x: f64) -> f64 {
    x / units::HARTREE_IN_WAVENUMBER
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Model system on `[4, r_max]` resolving [`E_KIN`].
fn reduced_system(r_max: f64) -> Result<System> {
    Ok(System::new(
        model_mg2(),
        RadialGrid::resolving(4.0, r_max, mass(), E_KIN)?,
    ))
}

fn pump_settings(intensities: &[f64]) -> Result<PumpSettings> {
    let mut block = RunConfig::with_required(CurveSource::ModelMg2, T).pulse;
    block.support_fwhm = SUPPORT_FWHM;
    let pulses = intensities
        .iter()
        .map(|&i| pulse_from_config(&block, Some(i)))
        .collect::<Result<Vec<_>>>()?;
    let mut s = PumpSettings::new(pulses[0].clone(), DT);
    s.pulses = pulses;
    Ok(s)
}

fn spec(method: Method, n: usize, js: &[u32], r0: Option<f64>) -> EnsembleSpec {
    EnsembleSpec {
        n_realizations: n,
        j_list: Some(js.to_vec()),
        method,
        r0,
        ..EnsembleSpec::default()
    }
}

fn mean_cv(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (mean, sd / mean, sd / n.sqrt())
}

/// Least-squares slope of `ln y` against `ln x`.
fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    linear_fit(&logs).0
}

fn a1(c: &mut Criterion) -> Result<()> {
    let m = mass();
    let cfg = RunConfig::with_required(CurveSource::ModelMg2, T);
    let grid = RadialGrid::resolving(4.0, 200.0, m, cfg.partition.e_kin_max)?;
    let p = partition(
        &model_mg2(),
        m,
        &grid,
        T,
        cfg.partition.j_stride,
        cfg.partition.j_max,
        cfg.tolerances.tail,
    )?;
    let ratio = p.z_box / p.z_classical;
    c.check(
        (ratio - 1.0).abs() <= 0.02,
        format!(
            "Z_box/Z_cl = {ratio:.5} (R 4..200, {} points, J ≤ {} stride {}, tail share {:.1e})",
            grid.n_points(),
            p.rows.last().map_or(0, |r| r.sample.j),
            cfg.partition.j_stride,
            p.tail_fraction
        ),
    );
    let beta = units::beta_from_kelvin(T);
    for j in [0u32, 10, 100, 300] {
        let closed = classical_z_j(j as f64, beta, m, 200.0);
        let quad = classical_z_j_quadrature(j as f64, beta, m, 200.0);
        c.check(
            rel(closed, quad) <= 1e-8,
            format!(
                "Z_J closed form vs quadrature, J = {j}: rel {:.1e}",
                rel(closed, quad)
            ),
        );
    }
    Ok(())
}

/// `x` rounded to `digits` significant figures, as text.
fn sig(x: f64, digits: usize) -> String {
    format!("{:.*e}", digits - 1, x)
}

fn a2(c: &mut Criterion) -> Result<()> {
    let s = ExperimentScaling::new(4.8e16, 200.0)?;
    let v = s.v_box_cm3();
    c.check(
        sig(v, 3) == sig(4.97e-18, 3),
        format!("V_box = {v:.5e} cm³ → {}", sig(v, 3)),
    );
    // The reference p_box² is quoted with two significant figures.
    let p2 = s.p_box2();
    c.check(
        sig(p2, 2) == sig(5.7e-2, 2),
        format!("p_box² = {p2:.5e} → {} (quoted 5.7e-2)", sig(p2, 2)),
    );
    let m = mass();
    let cl = partition_function_classical(T, 200.0, m, None);
    let j_scale = 200.0 * (2.0 * m / units::beta_from_kelvin(T)).sqrt();
    let weights: Vec<(JSample, f64)> = (0..=(10.0 * j_scale) as u32)
        .map(|j| {
            (
                JSample {
                    j,
                    stride_weight: 1.0,
                },
                cl.p_j(j),
            )
        })
        .collect();
    let total: f64 = weights.iter().map(|w| w.1).sum();
    let (pg_box, pg) = initial_ground_purity(&weights, &s);
    c.check(
        rel(pg_box, 3.3e-4) <= 0.1,
        format!("P_g^box = Σ P_J² = {pg_box:.4e} (Σ P_J = {total:.6}); P_g = {pg:.3e}"),
    );
    Ok(())
}

fn a3(c: &mut Criterion) -> Result<()> {
    let grid = RadialGrid::new(1.0, 11.0, 257)?;
    let d = diagonalize_partial_wave(&vec![0.0; grid.n_points()], &grid, 1.0, 0, 0.0)?;
    let exact = box_levels(10, grid.length(), 1.0);
    let worst = d
        .energies
        .iter()
        .zip(&exact)
        .map(|(a, b)| rel(*a, *b))
        .fold(0.0, f64::max);
    c.check(
        worst <= 1e-8,
        format!("box levels n = 1..10: max rel {worst:.1e}"),
    );

    let m = mass();
    let model = ModelMg2::default();
    let de = wavenumber(430.0);
    let morse = morse_curve("X", de, 7.33, model.x_range(), 0.0)?;
    let grid = RadialGrid::resolving(3.0, 80.0, m, 0.05)?;
    let e = eigenvalues_partial_wave(&interpolate(&morse, &grid)?, &grid, m)?;
    let exact = morse_levels(de, model.x_range(), m);
    let bound: Vec<f64> = e.iter().copied().filter(|&x| x < 0.0).collect();
    let worst = bound
        .iter()
        .zip(&exact)
        .map(|(a, b)| rel(*a, *b))
        .fold(0.0, f64::max);
    c.check(
        bound.len() == exact.len() && worst <= 1e-6,
        format!(
            "Morse levels ({} numerical, {} analytic): max rel {worst:.1e}",
            bound.len(),
            exact.len()
        ),
    );

    let x = eigenvalues_partial_wave(&interpolate(&model.ground(), &grid)?, &grid, m)?;
    let n_bound = x.iter().filter(|&&e| e < 0.0).count();
    c.check(n_bound == 19, format!("model X, J = 0: {n_bound} bound states"));
    Ok(())
}

fn expectation(h: &GroundHamiltonian, psi: &ChannelState) -> Result<f64> {
    let hpsi = h.apply_state(psi, 0.0)?;
    let num: C64 = psi
        .data()
        .iter()
        .zip(hpsi.data())
        .map(|(a, b)| a.conj() * b)
        .sum();
    let den: f64 = psi.data().iter().map(|z| z.norm_sqr()).sum();
    Ok(num.re / den)
}

fn gaussian_state(grid: &RadialGrid, r0: f64, sigma: f64, j: u32) -> Result<ChannelState> {
    let n = grid.n_points();
    let amp = (0..n)
        .map(|i| {
            if i == 0 || i + 1 == n {
                C64::new(0.0, 0.0)
            } else {
                C64::new((-(grid.point(i) - r0).powi(2) / (2.0 * sigma * sigma)).exp(), 0.0)
            }
        })
        .collect();
    ChannelState::single(*grid, "X1Sg+", j, amp)
}

fn a4(c: &mut Criterion) -> Result<()> {
    let m = mass();
    let curves = model_mg2();
    let run = PulseRun::default();

    // Norm per step under the strongest field used anywhere in the suite.
    let sys = reduced_system(30.0)?;
    let pulse = pump_settings(&[2e13])?.pulses.remove(0);
    let h = assemble_pa(0, &curves, &sys.grid, m, &pulse, &sys.opts)?;
    let mut psi0 = h.zero_state();
    let g = gaussian_state(&sys.grid, 8.0, 0.5, 0)?;
    psi0.channel_mut(0).copy_from_slice(g.channel(0));
    let s = 1.0 / psi0.norm();
    psi0.scale(C64::new(s, 0.0));
    let steps = 400;
    let t_start = pulse.t_center - 0.5 * steps as f64 * DT;
    let traj = propagate_pulse(
        &psi0,
        &h,
        t_start,
        t_start + steps as f64 * DT,
        DT,
        &PulseRun {
            sample_every: Some(1),
            ..run.clone()
        },
    )?;
    let mut prev = psi0.norm();
    let mut worst: f64 = 0.0;
    for (_, st) in &traj.trajectory {
        let nrm = st.norm();
        worst = worst.max((nrm - prev).abs());
        prev = nrm;
    }
    let pe = traj.state.population(1);
    c.check(
        worst <= 1e-9,
        format!(
            "norm change per step, {steps} steps of {DT} a.u. at 2e13 W/cm² around the peak: max {worst:.1e} (Πg population {pe:.3e})"
        ),
    );

    // Energy drift of a displaced packet in the X well.
    let opts = AssemblyOptions::exact();
    let hx = assemble_ground(0, &curves, &sys.grid, m, &opts)?;
    let mut psi = gaussian_state(&sys.grid, 7.8, 0.47, 0)?;
    let e0 = expectation(&hx, &psi)?;
    let run_static = PulseRun::default();
    for _ in 0..10 {
        psi = propagate_pulse(&psi, &hx, 0.0, 100.0 * DT, DT, &run_static)?.state;
    }
    let e1 = expectation(&hx, &psi)?;
    let mean_r = |s: &ChannelState| {
        let w: Vec<f64> = s.channel(0).iter().map(|z| z.norm_sqr()).collect();
        w.iter().zip(sys.grid.points()).map(|(p, r)| p * r).sum::<f64>() / w.iter().sum::<f64>()
    };
    c.check(
        rel(e1, e0) <= 1e-8,
        format!(
            "⟨H⟩ over 1000 steps: {e0:.12e} → {e1:.12e} (rel {:.1e}; ⟨R⟩ 7.800 → {:.3})",
            rel(e1, e0),
            mean_r(&psi)
        ),
    );

    // Free Gaussian spreading (m = 1, σ₀ = 1).
    let grid = RadialGrid::new(1.0, 101.0, 1025)?;
    let free = GroundHamiltonian::from_potential(grid, 1.0, 0, vec![0.0; 1025], Boundary::Sine)?;
    let start = gaussian_state(&grid, 51.0, 1.0, 0)?;
    let mut worst: f64 = 0.0;
    let mut psi = start;
    for k in 1..=5 {
        psi = propagate_pulse(&psi, &free, 0.0, 1.0, 0.25, &run_static)?.state;
        let w: Vec<f64> = psi.channel(0).iter().map(|z| z.norm_sqr()).collect();
        let norm: f64 = w.iter().sum();
        let r = grid.points();
        let mean: f64 = w.iter().zip(&r).map(|(p, x)| p * x).sum::<f64>() / norm;
        let var: f64 = w.iter().zip(&r).map(|(p, x)| p * (x - mean).powi(2)).sum::<f64>() / norm;
        let width = (2.0 * var).sqrt();
        worst = worst.max(rel(width, free_gaussian_width(1.0, 1.0, k as f64)));
    }
    c.check(
        worst <= 1e-6,
        format!("free Gaussian width vs analytic, t = 1..5: max rel {worst:.1e}"),
    );

    // Five-channel pump on a 32-point interior grid against dense exponentials.
    let grid = RadialGrid::new(5.0, 11.0, 34)?;
    let pulse = pump_settings(&[1e13])?.pulses.remove(0);
    let h = assemble_pa(0, &curves, &grid, m, &pulse, &opts)?;
    let n = grid.n_points();
    let inner = |v: &[f64]| v[1..n - 1].to_vec();
    let eps = &pulse.polarization;
    let st = &curves.stark;
    let dipoles = [
        inner(&interpolate(&curves.dipoles[0], &grid)?),
        inner(&interpolate(&curves.dipoles[1], &grid)?),
        inner(&interpolate(&curves.dipoles[2], &grid)?),
    ];
    let dense = DensePumpModel {
        kinetic: explicit_sine_kinetic(n, grid.length(), m),
        diag: std::array::from_fn(|ch| inner(h.static_potential(ch))),
        alpha: [
            inner(&st.ground.contract(eps, &grid)?),
            inner(&st.excited.contract(eps, &grid)?),
            inner(&st.upper11.contract(eps, &grid)?),
            inner(&st.upper22.contract(eps, &grid)?),
        ],
        alpha12: inner(&st.upper12.contract(eps, &grid)?),
        moment: inner(h.moment()),
        dipoles,
        v12: inner(h.diabatic_coupling()),
        e0: pulse.e0,
        fwhm: pulse.fwhm,
        t_center: pulse.t_center,
    };
    let x = diagonalize_partial_wave(h.static_potential(0), &grid, m, 0, 0.0)?;
    let mut psi0 = h.zero_state();
    for (i, v) in x.vector(0).iter().enumerate() {
        psi0.channel_mut(0)[i] = C64::new(*v, 0.0);
    }
    let (t0, t1) = pulse.support();
    let dt = 40.0;
    let cheb = propagate_pulse(&psi0, &h, t0, t1, dt, &run)?.state;
    let steps = cheb_steps(t0, t1, dt);
    let mi = n - 2;
    let start = DVector::from_fn(5 * mi, |k, _| psi0.channel(k / mi)[k % mi + 1]);
    let exact = dense_time_ordered_propagator(|t| dense.matrix(t), &start, t0, t1, (t1 - t0) / steps as f64);
    let got = DVector::from_fn(5 * mi, |k, _| cheb.channel(k / mi)[k % mi + 1]);
    let overlap = exact.dotc(&got).norm_sqr() / (exact.norm_squared() * got.norm_squared());
    let pe = got.rows(mi, mi).norm_squared() / got.norm_squared();
    c.check(
        overlap >= 1.0 - 1e-8,
        format!(
            "dense oracle, 5×{mi} states, {steps} steps: 1 − fidelity = {:.1e} (Πg share {pe:.3})",
            1.0 - overlap
        ),
    );
    Ok(())
}

fn cheb_steps(t0: f64, t1: f64, dt: f64) -> usize {
    ((t1 - t0) / dt).ceil().max(1.0) as usize
}

/// Short-range probability `∫_{R<10}|ψ|²` of eigen-method realizations, J = 0.
fn short_range_samples(sys: &System, n: usize, seed: u64) -> Result<Vec<f64>> {
    let s = EnsembleSpec {
        seed,
        ..spec(Method::Eigen, n, &[0], None)
    };
    let ctx = build_context(
        &s,
        sys,
        JSample {
            j: 0,
            stride_weight: 1.0,
        },
        None,
    )?;
    let dr = sys.grid.spacing();
    let cut = sys.grid.points().iter().filter(|&&r| r < 10.0).count();
    (0..n)
        .map(|k| {
            let r = generate_realization(&s, &sys.grid, sys.mass, &ctx, k)?;
            Ok(r.norm_factor
                * r.state.channel(0)[..cut]
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum::<f64>()
                * dr)
        })
        .collect()
}

/// Box and partial waves for the per-realization yield spread.
const SBAR_R_MAX: f64 = 200.0;
const SBAR_R0: f64 = 100.0;
const SBAR_J: u32 = 55;
const SBAR_N: usize = 24;

fn a5(c: &mut Criterion) -> Result<()> {
    // Phase averages (1/N)Σₖ e^{i(θₙ−θₘ)} → δₙₘ.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let states = 40;
    let mut points = Vec::new();
    let mut diag_err: f64 = 0.0;
    for n in [100usize, 400, 1600, 6400] {
        let draws: Vec<Vec<f64>> = (0..n).map(|_| random_phases(&mut rng, states)).collect();
        let (mut sq, mut pairs) = (0.0, 0);
        for a in 0..states {
            for b in 0..states {
                let avg: C64 = draws
                    .iter()
                    .map(|th| C64::from_polar(1.0, th[a] - th[b]))
                    .sum::<C64>()
                    / n as f64;
                if a == b {
                    diag_err = diag_err.max((avg - 1.0).norm());
                } else {
                    sq += avg.norm_sqr();
                    pairs += 1;
                }
            }
        }
        let rms = (sq / pairs as f64).sqrt();
        points.push((n as f64, rms));
    }
    let slope = loglog_slope(&points);
    let scaled: Vec<String> = points
        .iter()
        .map(|(n, r)| format!("{:.3}", r * n.sqrt()))
        .collect();
    c.check(
        diag_err < 1e-12 && (slope + 0.5).abs() <= 0.1,
        format!(
            "phase average: diagonal exact ({diag_err:.0e}), off-diagonal rms ∝ N^{slope:.3}, rms·√N = [{}]",
            scaled.join(", ")
        ),
    );

    // Standard error of a thermal average against N.
    let sys = reduced_system(30.0)?;
    let mut se_points = Vec::new();
    for n in [25usize, 50, 100, 200, 400] {
        let seeds = 12;
        let mut se = 0.0;
        for seed in 0..seeds {
            se += thermal_expectation(&short_range_samples(&sys, n, 1000 + seed)?).std_error;
        }
        se_points.push((n as f64, se / seeds as f64));
    }
    let slope = loglog_slope(&se_points);
    c.check(
        (slope + 0.5).abs() <= 0.1,
        format!("standard error ∝ N^{slope:.3} over N = 25..400 (12 seeds each)"),
    );

    // Per-realization spread s̄ = σ/mean of the J-resolved yield.
    let sys = System::new(
        model_mg2(),
        RadialGrid::resolving(4.0, SBAR_R_MAX, mass(), E_KIN)?,
    );
    let settings = pump_settings(&[5e12])?;
    let mut cv = Vec::new();
    for method in [Method::Eigen, Method::Grid, Method::GaussianProjected] {
        let s = spec(method, SBAR_N, &[SBAR_J], Some(SBAR_R0));
        let o = pump_partial_wave(
            &s,
            &sys,
            JSample {
                j: SBAR_J,
                stride_weight: 1.0,
            },
            None,
            &PumpSettings {
                yields_only: true,
                ..settings.clone()
            },
        )?;
        let (mean, v, _) = mean_cv(&o.per_field[0].populations);
        c.note(format!("{method}: ⟨P_e^J⟩ = {mean:.4e}, s̄ = {v:.3}"));
        cv.push(v);
    }
    c.check(
        cv[0] <= 2.0 * 0.17 && cv[0] >= 0.17 / 2.0,
        format!(
            "eigen s̄ = {:.3} within ×2 of 0.17 (J = {SBAR_J}, R 4..{SBAR_R_MAX}, R₀ = {SBAR_R0}, N = {SBAR_N})",
            cv[0]
        ),
    );
    c.check(
        cv[0] < cv[1] && cv[1] < cv[2],
        format!(
            "ordering eigen < grid < gaussian: {:.3}, {:.3}, {:.3}",
            cv[0], cv[1], cv[2]
        ),
    );
    Ok(())
}

fn a6(c: &mut Criterion) -> Result<()> {
    let m = mass();
    let beta = units::beta_from_kelvin(T);

    // Grid-method density against the exact Boltzmann density, 64 points.
    let grid = RadialGrid::new(5.0, 12.0, 64)?;
    let sys = System::new(model_mg2(), grid);
    let n_real = 400;
    let run = thermal_density(
        &spec(Method::Grid, n_real, &[0], None),
        &sys,
        NormalizationChoice::Box,
        None,
        true,
    )?;
    let v = thermopa::hamiltonian::ground_potential(0, &sys.curves, &grid, m, &sys.opts)?;
    let k = explicit_sine_kinetic(64, grid.length(), m);
    let (exact, _) = exact_thermal_density(&k, &v[1..63], grid.spacing(), beta);
    let mut worst: f64 = 0.0;
    let mut chi2 = 0.0;
    for (i, ex) in exact.iter().enumerate() {
        let (r, d, se) = run.rows[i + 1];
        let z = (d * r * r - ex) / (se * r * r);
        worst = worst.max(z.abs());
        chi2 += z * z;
    }
    // 3σ (two-sided p = 0.27%) held for the 62-point family as a whole:
    // Šidák per-point level, z ≈ 4.08.
    let family_p = statrs::function::erf::erfc(3.0 / 2f64.sqrt());
    let point_p = 1.0 - (1.0 - family_p).powf(1.0 / 62.0);
    let z_max = 2f64.sqrt() * statrs::function::erf::erfc_inv(point_p);
    c.check(
        worst <= z_max,
        format!(
            "grid vs exact density, N = {n_real}: max |Δ|/σ = {worst:.2} (family 3σ: {z_max:.2}), χ²/62 = {:.2}",
            chi2 / 62.0
        ),
    );

    // Projected and propagated Gaussian paths.
    let sys = reduced_system(60.0)?;
    let j = 100;
    let v = thermopa::hamiltonian::ground_potential(j, &sys.curves, &sys.grid, m, &sys.opts)?;
    let d = diagonalize_partial_wave(&v, &sys.grid, m, j, 0.0)?;
    let h = GroundHamiltonian::from_potential(sys.grid, m, j, v, Boundary::Sine)?;
    let tau = tau_min(beta, 30.0, m);
    let a = gaussian_random_state(j, &sys.grid, T, m, 30.0, tau, GaussianPath::Projected(&d))?;
    let b = gaussian_random_state(j, &sys.grid, T, m, 30.0, tau, GaussianPath::Propagated(&h))?;
    let diff: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let norm: f64 = a.data().iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    c.check(
        diff / norm <= 1e-6,
        format!(
            "gaussian projected vs propagated, J = {j}, τ = {tau:.3e}: ‖Δψ‖/‖ψ‖ = {:.1e}",
            diff / norm
        ),
    );

    // Eigen vs gaussian J-resolved yields above the resonance window.
    let settings = PumpSettings {
        yields_only: true,
        ..pump_settings(&[5e12])?
    };
    let n = 24;
    let mut stats = Vec::new();
    for method in [Method::Eigen, Method::GaussianProjected] {
        let o = pump_partial_wave(
            &spec(method, n, &[j], Some(30.0)),
            &sys,
            JSample { j, stride_weight: 1.0 },
            None,
            &settings,
        )?;
        stats.push(mean_cv(&o.per_field[0].populations));
    }
    let ratio = stats[0].0 / stats[1].0;
    let err = ratio * ((stats[0].2 / stats[0].0).powi(2) + (stats[1].2 / stats[1].0).powi(2)).sqrt();
    c.check(
        (ratio - 1.0).abs() <= 2.0 * err,
        format!(
            "eigen/gaussian ⟨P_e^J⟩ at J = {j} (R 4..60, R₀ = 30, N = {n}): {ratio:.3} ± {err:.3}"
        ),
    );
    Ok(())
}

fn a7(c: &mut Criterion) -> Result<()> {
    let sys = reduced_system(30.0)?;
    let one = |j: u32| JSample { j, stride_weight: 1.0 };

    let settings = PumpSettings {
        yields_only: true,
        ..pump_settings(&[1e9, 1e10, 0.0])?
    };
    let o = pump_partial_wave(&spec(Method::Eigen, 2, &[20], None), &sys, one(20), None, &settings)?;
    let y: Vec<f64> = o.per_field.iter().map(|f| f.populations.iter().sum()).collect();
    let slope = (y[1] / y[0]).log10();
    c.check(
        (slope - 2.0).abs() <= 0.05,
        format!("yield log-slope over 1e9..1e10 W/cm²: {slope:.4} ({:.3e} → {:.3e})", y[0], y[1]),
    );
    c.check(
        o.per_field[2].populations.iter().all(|&p| p == 0.0),
        format!("zero field: yields {:?}", o.per_field[2].populations),
    );

    let js: Vec<u32> = (0..=240).step_by(20).collect();
    let n = 16;
    let settings = PumpSettings {
        yields_only: true,
        ..pump_settings(&[5e12])?
    };
    let reports = photoassociate(
        &spec(Method::Eigen, n, &js, None),
        &sys,
        NormalizationChoice::Classical,
        None,
        &settings,
        &ExperimentScaling::new(4.8e16, 30.0)?,
    )?;
    // (J, P_J⟨P_e^J⟩, standard error)
    let curve: Vec<(u32, f64, f64)> = reports[0]
        .rows
        .iter()
        .map(|r| (r.j, r.p_j * r.population.mean, r.p_j * r.population.std_error))
        .collect();
    let peak = curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    // A step against the expected direction must be within 2σ of noise.
    let allowed = |x: &(u32, f64, f64), y: &(u32, f64, f64)| 2.0 * x.2.hypot(y.2);
    let rising = curve[..=peak]
        .windows(2)
        .all(|w| w[1].1 - w[0].1 > -allowed(&w[0], &w[1]));
    let falling = curve[peak..]
        .windows(2)
        .all(|w| w[0].1 - w[1].1 > -allowed(&w[0], &w[1]));
    c.note(format!(
        "P_J⟨P_e^J⟩ (R 4..30, N = {n}): {}",
        curve
            .iter()
            .map(|(j, y, se)| format!("{j}:{y:.2e}±{:.0}%", 100.0 * se / y))
            .collect::<Vec<_>>()
            .join(" ")
    ));
    c.check(
        peak > 0 && peak + 3 < curve.len() && rising && falling,
        format!(
            "rise to a single interior peak at J = {}, then decay (steps within 2σ)",
            curve[peak].0
        ),
    );
    // Exponential tail: ln y linear in J beyond the half maximum.
    let half = curve[peak..]
        .iter()
        .position(|x| x.1 < 0.5 * curve[peak].1)
        .map_or(curve.len(), |i| peak + i);
    let tail: Vec<(f64, f64)> = curve[half..]
        .iter()
        .map(|&(j, y, _)| (j as f64, y.ln()))
        .collect();
    let (slope, r2) = linear_fit(&tail);
    let last = curve.last().map_or(0.0, |x| x.1);
    c.check(
        tail.len() >= 4 && slope < 0.0 && r2 >= 0.9 && last < 1e-2 * curve[peak].1,
        format!(
            "tail from J = {}: d ln y/dJ = {slope:.3e}, R² = {r2:.3}, last/peak = {:.1e}",
            curve.get(half).map_or(0, |x| x.0),
            last / curve[peak].1
        ),
    );
    Ok(())
}

/// Least-squares slope and R² of `y` against `x`.
fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    (sxy / sxx, sxy * sxy / (sxx * syy))
}

fn report_line(r: &PumpReport) -> String {
    format!(
        "{:.0e} W/cm²: ⟨P_e⟩ = {:.3e}, purity {:.4} ± {:.4}, coherence {:.4} ± {:.4}",
        r.intensity_w_cm2, r.total.mean, r.purity, r.purity_se, r.coherence, r.coherence_se
    )
}

fn a8(c: &mut Criterion) -> Result<()> {
    // Identities of the estimator itself.
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let n = 7;
    let orthogonal: Vec<Vec<C64>> = (0..n)
        .map(|k| (0..n).map(|i| if i == k { one } else { z }).collect())
        .collect();
    let dm = build_excited_density(
        &[ExcitedCoefficients {
            j: 0,
            weight: 1.0,
            per_k: orthogonal,
        }],
        n,
        None,
    )?;
    let single = build_excited_density(
        &[ExcitedCoefficients {
            j: 0,
            weight: 1.0,
            per_k: vec![vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]],
        }],
        1,
        None,
    )?;
    c.check(
        (purity(&dm) - 1.0 / n as f64).abs() < 1e-15
            && (purity(&single) - 1.0).abs() < 1e-15
            && (sampling_purity_lower_bound(n, 1) - 1.0 / n as f64).abs() < 1e-15,
        format!(
            "N orthogonal realizations: purity {:.15} = 1/N; one realization: {:.15}",
            purity(&dm),
            purity(&single)
        ),
    );

    let sys = reduced_system(30.0)?;
    let scaling = ExperimentScaling::new(4.8e16, 30.0)?;
    let intensities = [1e10, 1e11, 5e12, 2e13];
    let reports = photoassociate(
        &spec(Method::Eigen, 8, &[0, 20, 60], None),
        &sys,
        NormalizationChoice::Classical,
        None,
        &pump_settings(&intensities)?,
        &scaling,
    )?;
    let mut bounds_ok = true;
    for r in &reports {
        c.note(report_line(r));
        let dm = r.density.as_ref().expect("non-zero yield");
        let lower = sampling_purity_lower_bound(8, 3);
        bounds_ok &= (dm.trace() - 1.0).abs() <= 1e-10
            && dm.min_eigenvalue() >= -1e-10
            && r.purity <= 1.0 + 1e-12
            && r.purity >= lower - 1e-12
            && r.coherence < r.purity;
    }
    c.check(
        bounds_ok,
        "every intensity: trace 1 ± 1e-10, λ_min ≥ −1e-10, 1/(N·N_J) ≤ purity ≤ 1, C_e < P_e",
    );
    let p: Vec<f64> = reports.iter().map(|r| r.purity).collect();
    c.check(
        rel(p[1], p[0]) <= 0.02 && p[3] < 0.9 * p[1],
        format!(
            "purity plateau then drop (R 4..30, N = 8, J ∈ {{0, 20, 60}}): {:.4}, {:.4}, {:.4}, {:.4}",
            p[0], p[1], p[2], p[3]
        ),
    );

    // Thermal run: coherence relative to purity.
    let js: Vec<u32> = (0..=150).step_by(15).collect();
    let n = 48;
    let r = photoassociate(
        &spec(Method::Eigen, n, &js, None),
        &sys,
        NormalizationChoice::Classical,
        None,
        &pump_settings(&[1e11])?,
        &scaling,
    )?
    .remove(0);
    c.note(report_line(&r));
    let decades = (r.purity / r.coherence).log10();
    c.check(
        r.coherence < r.purity && (decades - 1.0).abs() <= 0.5,
        format!(
            "C_e/P_e = {:.3} ({decades:.2} decades; N = {n}, J = 0..150 step 15)",
            r.coherence / r.purity
        ),
    );
    Ok(())
}

fn a9(c: &mut Criterion) -> Result<()> {
    // Synthetic barrier V = 7.5 r² e^{−r}, m = 1.
    let v = |r: f64| 7.5 * r * r * (-r).exp();
    let grid = RadialGrid::new(1e-9, 20.0, 401)?;
    let pot: Vec<f64> = grid.points().iter().map(|&r| v(r)).collect();
    let search = CapSearch {
        r_start_fraction: 0.5,
        order: 2,
        eta_ladder: doubling_ladder(0.01, 10),
        asymptote: 0.0,
    };
    let cap = find_shape_resonances(&pot, &grid, 1.0, 0, &search)?;
    let stab = stabilization_resonances(&v, 1.0, 0.0, 0.05, 300..700, (3.0, 3.8), 0.0);
    match (cap.iter().find(|r| r.energy > 3.0 && r.energy < 3.8), stab) {
        (Some(r), Some(s)) => c.check(
            (r.energy - s.energy).abs() <= 0.5 * s.gamma && (r.gamma - s.gamma).abs() <= 0.5 * s.gamma,
            format!(
                "CAP E = {:.6}, Γ = {:.6}; stabilization E = {:.6}, Γ = {:.6}",
                r.energy, r.gamma, s.energy, s.gamma
            ),
        ),
        (r, s) => c.check(false, format!("missing resonance: CAP {r:?}, stabilization {s:?}")),
    }

    // Model scan.
    let m = mass();
    let cfg = RunConfig::with_required(CurveSource::ModelMg2, T);
    let grid = RadialGrid::resolving(4.0, cfg.cap.r_max, m, 0.03)?;
    let curves = model_mg2();
    let opts = AssemblyOptions::exact();
    let js: Vec<u32> = (0..=100).step_by(5).collect();
    let table = resonance_scan(&curves, m, &grid, &opts, &js, &CapSearch::default())?;
    let with: Vec<u32> = table.j_values();
    let contiguous = with.windows(2).all(|w| w[1] == w[0] + 5);
    // Vibrational label v = (bound states at this J) + rank among resonances.
    let mut families: std::collections::BTreeMap<usize, Vec<(u32, f64)>> = Default::default();
    for &j in &with {
        let v_eff = thermopa::hamiltonian::ground_potential(j, &curves, &grid, m, &opts)?;
        let n0 = eigenvalues_partial_wave(&v_eff, &grid, m)?
            .iter()
            .filter(|&&e| e < 0.0)
            .count();
        let mut rows: Vec<f64> = table.rows.iter().filter(|r| r.j == j).map(|r| r.energy).collect();
        rows.sort_by(f64::total_cmp);
        for (i, e) in rows.into_iter().enumerate() {
            families.entry(n0 + i).or_default().push((j, e));
        }
    }
    let increasing = families
        .values()
        .all(|f| f.windows(2).all(|w| w[1].1 > w[0].1));
    c.note(format!(
        "resonances (J: K): {}",
        table
            .rows
            .iter()
            .map(|r| format!("{}:{:.1}", r.j, r.energy_kelvin()))
            .collect::<Vec<_>>()
            .join(" ")
    ));
    c.check(
        !with.is_empty() && contiguous,
        format!("resonant J window {:?} contiguous in steps of 5", with),
    );
    c.check(
        increasing,
        format!(
            "positions increase with J within each of {} vibrational families",
            families.len()
        ),
    );

    // Barrier-free potentials.
    let flat = find_shape_resonances(&vec![0.0; grid.n_points()], &grid, m, 0, &CapSearch::default())?;
    let x0 = thermopa::hamiltonian::ground_potential(0, &curves, &grid, m, &opts)?;
    let well = find_shape_resonances(&x0, &grid, m, 0, &CapSearch::default())?;
    c.check(
        flat.is_empty() && well.is_empty() && barrier_top(&x0, 0.0).is_none(),
        format!("no barrier: {} (flat), {} (model X, J = 0)", flat.len(), well.len()),
    );
    Ok(())
}
