use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thermopa::curves::{format_curve, model_mg2, parse_curve, PotentialCurve};
use thermopa::grid::{apply_kinetic, dot, Boundary, ChannelState, RadialGrid, C64};
use thermopa::hamiltonian::{
    ground_potential, AssemblyOptions, GroundHamiltonian, Hamiltonian, PulseParameters,
};
use thermopa::observables::{
    build_excited_density, dynamical_coherence, purity, select_n_m, ExcitedCoefficients,
};
use thermopa::propagator::{
    chebyshev_imag, chebyshev_real_step, estimate_spectral_range, PropagationPlan,
    DEFAULT_TOLERANCE,
};
use thermopa::spectral::eigenvalues_partial_wave;
use thermopa::thermal::{
    classical_z_j, momentum_delta_state, realization_rng, stream_id, Method,
};
use thermopa::units::{self, convert, Unit};
use thermopa::validation::{exact_thermal_density, explicit_sine_kinetic};

fn random_state(grid: &RadialGrid, seed: u64) -> ChannelState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n_points();
    let amp = (0..n)
        .map(|i| {
            if i == 0 || i + 1 == n {
                C64::new(0.0, 0.0)
            } else {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            }
        })
        .collect();
    ChannelState::single(*grid, "X1Sg+", 0, amp).unwrap()
}

fn model_hamiltonian(j: u32, n: usize) -> GroundHamiltonian {
    let grid = RadialGrid::new(4.0, 20.0, n).unwrap();
    let m = units::mg2_reduced_mass();
    let v = ground_potential(j, &model_mg2(), &grid, m, &AssemblyOptions::default()).unwrap();
    GroundHamiltonian::from_potential(grid, m, j, v, Boundary::Sine).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn grid_spacing_partitions_length(r_min in 0.1f64..10.0, len in 1.0f64..300.0, n in 2usize..4000) {
        let g = RadialGrid::new(r_min, r_min + len, n).unwrap();
        prop_assert!((g.spacing() * (n - 1) as f64 - len).abs() <= 1e-9 * len);
        prop_assert!((g.point(n - 1) - (r_min + len)).abs() <= 1e-12 * (r_min + len));
    }

    #[test]
    fn resolving_grid_reaches_target(len in 5.0f64..200.0, e in 0.005f64..0.3) {
        let m = units::mg2_reduced_mass();
        let g = RadialGrid::resolving(4.0, 4.0 + len, m, e).unwrap();
        let n = g.n_points() - 1;
        let mut k = n;
        for p in [2, 3, 5] { while k % p == 0 { k /= p; } }
        prop_assert_eq!(k, 1);
        prop_assert!((std::f64::consts::PI / g.spacing()).powi(2) / (2.0 * m) >= e * (1.0 - 1e-12));
    }

    #[test]
    fn kinetic_operator_is_symmetric(seed in any::<u64>(), n in 8usize..200) {
        let g = RadialGrid::new(1.0, 9.0, n).unwrap();
        let a = random_state(&g, seed);
        let b = random_state(&g, seed ^ 0x5a5a);
        let ta = apply_kinetic(&a, 2.0, Boundary::Sine);
        let tb = apply_kinetic(&b, 2.0, Boundary::Sine);
        let lhs = dot(a.data(), tb.data());
        let rhs = dot(ta.data(), b.data());
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0));
        prop_assert!(dot(a.data(), ta.data()).re >= -1e-12);
    }

    #[test]
    fn real_time_step_is_unitary(seed in any::<u64>(), j in 0u32..150, dt in 1.0f64..400.0) {
        let h = model_hamiltonian(j, 161);
        let psi = random_state(h.grid(), seed);
        let plan = PropagationPlan::real_time(estimate_spectral_range(&h), dt, DEFAULT_TOLERANCE);
        let out = chebyshev_real_step(&psi, &h, 0.0, &plan).unwrap();
        prop_assert!((out.norm() - psi.norm()).abs() <= 1e-12 * psi.norm());
        let back = chebyshev_real_step(
            &out,
            &h,
            0.0,
            &PropagationPlan::real_time(estimate_spectral_range(&h), -dt, DEFAULT_TOLERANCE),
        )
        .unwrap();
        let err: f64 = back.data().iter().zip(psi.data()).map(|(a, b)| (a - b).norm_sqr()).sum();
        let raw: f64 = psi.data().iter().map(|a| a.norm_sqr()).sum();
        prop_assert!(err.sqrt() <= 1e-11 * raw.sqrt());
    }

    #[test]
    fn imaginary_time_matches_lowest_level_bound(seed in any::<u64>(), tau in 10.0f64..2000.0) {
        let h = model_hamiltonian(0, 161);
        let e = eigenvalues_partial_wave(h.v_eff(), h.grid(), h.mass()).unwrap();
        let psi = random_state(h.grid(), seed);
        let out = chebyshev_imag(&psi, &h, tau).unwrap();
        // ‖e^{−τH}ψ‖ ≤ e^{−τE₀}‖ψ‖ and ≥ e^{−τE_max}‖ψ‖.
        let ratio = out.norm() / psi.norm();
        prop_assert!(ratio <= (-tau * e[0]).exp() * (1.0 + 1e-10));
        prop_assert!(ratio >= (-tau * e[e.len() - 1]).exp() * (1.0 - 1e-10));
    }

    #[test]
    fn unit_round_trips(x in -1e6f64..1e6) {
        for (a, b) in [
            (Unit::Hartree, Unit::Wavenumber),
            (Unit::Hartree, Unit::Kelvin),
            (Unit::ElectronVolt, Unit::Wavenumber),
            (Unit::Bohr, Unit::Angstrom),
        ] {
            let y = convert(convert(x, a, b).unwrap(), b, a).unwrap();
            prop_assert!((y - x).abs() <= 1e-12 * x.abs().max(1.0));
        }
        prop_assert!(convert(x, Unit::Hartree, Unit::Bohr).is_err());
    }

    #[test]
    fn classical_z_j_is_bounded_and_monotone(j in 0.0f64..5000.0, r in 1.0f64..300.0) {
        let m = units::mg2_reduced_mass();
        let beta = units::beta_from_kelvin(1000.0);
        let z = classical_z_j(j, beta, m, r);
        prop_assert!(z >= 0.0 && z <= r * (1.0 + 1e-12));
        prop_assert!(classical_z_j(j + 10.0, beta, m, r) <= z + 1e-12 * r);
        prop_assert!(classical_z_j(j, beta, m, r + 1.0) >= z);
    }

    #[test]
    fn envelope_is_symmetric_with_half_intensity_at_half_width(
        e0 in 1e-4f64..0.1, fwhm in 100.0f64..8000.0, x in 0.0f64..2.0,
    ) {
        let p = PulseParameters::new(e0, fwhm, 0.05, 10.0 * fwhm).unwrap();
        let a = p.envelope(p.t_center + x * fwhm);
        let b = p.envelope(p.t_center - x * fwhm);
        prop_assert!((a - b).norm() <= 1e-15 * e0);
        let half = p.envelope(p.t_center + 0.5 * fwhm).norm_sqr() / (e0 * e0);
        prop_assert!((half - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn density_matrix_invariants(seed in any::<u64>(), dims in proptest::collection::vec(1usize..6, 1..4), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks: Vec<ExcitedCoefficients> = dims
            .iter()
            .enumerate()
            .map(|(j, &d)| ExcitedCoefficients {
                j: j as u32,
                weight: rng.random::<f64>() + 0.1,
                per_k: (0..n)
                    .map(|_| (0..d).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect())
                    .collect(),
            })
            .collect();
        let dm = build_excited_density(&blocks, n, None).unwrap();
        let total: usize = dims.iter().sum();
        prop_assert!((dm.trace() - 1.0).abs() <= 1e-12);
        prop_assert!(dm.min_eigenvalue() >= -1e-12);
        prop_assert!(dm.hermiticity_error() <= 1e-14);
        let p = purity(&dm);
        prop_assert!(p <= 1.0 + 1e-12 && p >= 1.0 / total as f64 - 1e-12);
        let c = dynamical_coherence(&dm);
        prop_assert!(c >= 0.0 && c <= p);
    }

    #[test]
    fn n_m_prefix_captures_target(pops in proptest::collection::vec(0.0f64..1.0, 1..60), tol in 1e-4f64..0.5) {
        let total: f64 = pops.iter().sum();
        prop_assume!(total > 0.0);
        let k = select_n_m(&pops, total, tol);
        prop_assert!(k <= pops.len());
        prop_assert!(pops[..k].iter().sum::<f64>() >= (1.0 - tol) * total - 1e-12);
        if k > 0 {
            prop_assert!(pops[..k - 1].iter().sum::<f64>() < (1.0 - tol) * total);
        }
    }

    #[test]
    fn streams_are_injective(k1 in 0usize..100_000, k2 in 0usize..100_000, j1 in 0u32..5000, j2 in 0u32..5000) {
        prop_assume!((k1, j1) != (k2, j2));
        for m in [Method::Eigen, Method::Grid, Method::GaussianProjected] {
            prop_assert_ne!(stream_id(k1, j1, m), stream_id(k2, j2, m));
        }
        prop_assert_ne!(stream_id(k1, j1, Method::Eigen), stream_id(k1, j1, Method::Grid));
    }
}

#[test]
fn same_stream_same_draws() {
    let mut a = realization_rng(7, 3, 40, Method::Grid);
    let mut b = realization_rng(7, 3, 40, Method::Grid);
    let x: Vec<u64> = (0..8).map(|_| a.random()).collect();
    let y: Vec<u64> = (0..8).map(|_| b.random()).collect();
    assert_eq!(x, y);
}

#[test]
fn curve_file_round_trip() {
    let r: Vec<f64> = (0..40).map(|i| 3.0 + 0.25 * i as f64).collect();
    let v: Vec<f64> = r.iter().map(|x| 1e-3 * (x - 7.0).powi(2) - 2e-3).collect();
    let c = PotentialCurve::sampled("X1Sg+", r.clone(), v.clone(), Some(0.0)).unwrap();
    let text = format_curve(&c, Unit::Wavenumber).unwrap();
    let back = parse_curve(&text, "round-trip").unwrap();
    for x in [3.3, 5.0, 7.77, 12.1] {
        let (a, b) = (c.evaluate(x).unwrap(), back.evaluate(x).unwrap());
        assert!((a - b).abs() <= 1e-12, "{x}: {a} vs {b}");
    }
}

/// Plane-wave states with thermal weights reproduce the density only where
/// the potential vanishes: in the X well they miss the bound states.
#[test]
fn momentum_delta_states_fail_in_the_well() {
    let m = units::mg2_reduced_mass();
    let beta = units::beta_from_kelvin(1000.0);
    let grid = RadialGrid::new(4.0, 40.0, 321).unwrap();
    let v = ground_potential(0, &model_mg2(), &grid, m, &AssemblyOptions::default()).unwrap();
    let k = explicit_sine_kinetic(321, grid.length(), m);
    let (exact, _) = exact_thermal_density(&k, &v[1..320], grid.spacing(), beta);
    let (flat, _) = exact_thermal_density(&k, &vec![0.0; 319], grid.spacing(), beta);
    let n = 400;
    let mut acc = vec![0.0; 321];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..n {
        let s = momentum_delta_state(0, &grid, 1000.0, m, &mut rng);
        for (a, z) in acc.iter_mut().zip(s.channel(0)) {
            *a += z.norm_sqr() / n as f64;
        }
    }
    // Compare shapes: normalize both to the free-box value deep outside the well.
    let i_far = grid.points().iter().position(|&r| r > 25.0).unwrap();
    let scale_md = flat[i_far - 1] / acc[i_far];
    let i_well = grid.points().iter().position(|&r| r > 7.33).unwrap();
    let md_well = acc[i_well] * scale_md;
    let exact_far = exact[i_far - 1];
    let exact_well = exact[i_well - 1] * flat[i_far - 1] / exact_far;
    assert!(
        exact_well > 1.5 * md_well,
        "well: exact {exact_well:.3e}, momentum-delta {md_well:.3e}"
    );
    let md_far = acc[i_far + 40] * scale_md;
    let ex_far = exact[i_far + 39] * flat[i_far - 1] / exact_far;
    assert!((md_far - ex_far).abs() <= 0.2 * ex_far, "far: {md_far:.3e} vs {ex_far:.3e}");
}

/// Conversion factors appear only in the units module.
#[test]
fn constant_literals() {
    let forbidden = [
        "219474", "219_474", "27.211", "315775", "315_775", "0.529177", "0.529_177", "2.418884",
        "2.418_884", "5.142206", "5.142_206", "1822.888", "1_822.888", "8.854187", "8.854_187",
        "299792458", "299_792_458",
    ];
    let src = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("src");
    let mut offenders = Vec::new();
    for entry in std::fs::read_dir(&src).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().is_some_and(|n| n == "units.rs") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        for (i, line) in text.lines().enumerate() {
            if forbidden.iter().any(|f| line.contains(f)) {
                offenders.push(format!("{}:{}: {line}", path.display(), i + 1));
            }
        }
    }
    assert!(offenders.is_empty(), "{}", offenders.join("\n"));
}
