//! Run orchestration: ensemble construction, the (k, J) fan-out and ordered
//! reductions, plus the file-writing drivers behind each subcommand.
//!
//! Partial waves are processed one at a time per worker and dropped once
//! reduced, so memory stays at a few dense matrices regardless of J_max.
//! Partial-wave weights are carried unnormalised, `(2J+1)Z_J`, and divided by
//! Z after all J are done; every reduction is linear in the weight. Reductions
//! always run in J order, so results do not depend on the worker count.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::config::{CurveSource, FieldStrength, NormalizationChoice, PulseBlock, RunConfig};
use crate::curves::{model_mg2, CurveSet};
use crate::error::{Error, Result};
use crate::grid::{RadialGrid, C64};
use crate::hamiltonian::{
    assemble_pa, ground_potential, AssemblyOptions, GroundHamiltonian, PulseParameters,
};
use crate::observables::{
    build_excited_density, dynamical_coherence, excited_population, initial_ground_purity, purity,
    select_n_m, ExcitedCoefficients, ExcitedDensityMatrix, ExperimentScaling, EXCITED_CHANNEL,
};
use crate::propagator::{propagate_pulse, PulseRun};
use crate::report::{num, sha256_hex, Manifest, Table};
use crate::spectral::{
    diagonalize_partial_wave, doubling_ladder, eigenvalues_partial_wave, find_shape_resonances,
    CapSearch, ResonanceTable,
};
use crate::thermal::{
    box_z_j, classical_z_j, embed_in_pump_layout, generate_realization, momentum_factor,
    partition_function_box, partition_function_classical, thermal_expectation, thermal_width,
    validate_r0, DensityAccumulator, EnsembleSpec, JContext, JSample, JSource, Method,
    Normalization, StateFilter, ThermalAverage, ThermalEnsemble,
};
use crate::units;

/// Curves, mass, grid and assembly options shared by a run.
#[derive(Debug, Clone)]
pub struct System {
    pub curves: CurveSet,
    pub mass: f64,
    pub grid: RadialGrid,
    pub opts: AssemblyOptions,
}

pub fn load_curves(src: &CurveSource) -> Result<CurveSet> {
    match src {
        CurveSource::ModelMg2 => Ok(model_mg2()),
        CurveSource::Manifest(p) => CurveSet::load_manifest(p),
    }
}

fn make_box(
    r_min: f64,
    r_max: f64,
    n: Option<usize>,
    mass: f64,
    e_kin_max: f64,
) -> Result<RadialGrid> {
    match n {
        Some(n) => RadialGrid::new(r_min, r_max, n),
        None => RadialGrid::resolving(r_min, r_max, mass, e_kin_max),
    }
}

impl System {
    pub fn new(curves: CurveSet, grid: RadialGrid) -> Self {
        Self {
            curves,
            mass: units::mg2_reduced_mass(),
            grid,
            opts: AssemblyOptions::default(),
        }
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let curves = load_curves(&cfg.curves)?;
        let mass = units::mg2_reduced_mass();
        let g = &cfg.grid;
        let grid = make_box(g.r_min, g.r_max, g.n_points, mass, g.e_kin_max)?;
        let opts = AssemblyOptions {
            potential_ceiling: cfg.tolerances.potential_ceiling,
            ..AssemblyOptions::default()
        };
        Ok(Self {
            curves,
            mass,
            grid,
            opts,
        })
    }

    pub fn with_grid(&self, grid: RadialGrid) -> Self {
        Self {
            grid,
            ..self.clone()
        }
    }
}

/// Pulse from the config block, optionally at another peak intensity.
pub fn pulse_from_config(p: &PulseBlock, intensity_w_cm2: Option<f64>) -> Result<PulseParameters> {
    let t_c = p.t_center_fs.unwrap_or(p.support_fwhm * p.fwhm_fs);
    let pulse = PulseParameters::from_lab(0.0, p.fwhm_fs, p.lambda_nm, t_c)?
        .with_support(p.support_fwhm)
        .with_phase(p.phase);
    let e0 = match intensity_w_cm2
        .map(FieldStrength::Intensity)
        .unwrap_or_else(|| p.strength.clone())
    {
        FieldStrength::Intensity(i) => units::intensity_to_field(i),
        FieldStrength::Field(f) => f,
    };
    if !(e0 >= 0.0) {
        return Err(Error::Config(format!(
            "pulse field must be non-negative, got {e0}"
        )));
    }
    Ok(pulse.with_field(e0))
}

/// Resonance table and the lifetime cutoff (ns) for tagging box states.
#[derive(Debug, Clone, Copy)]
pub struct ResonanceTags<'a> {
    pub table: &'a ResonanceTable,
    pub cutoff_ns: f64,
}

/// Per-J data for `sample`, weight left unnormalised (`p_j = (2J+1)Z_J`).
pub fn build_context(
    spec: &EnsembleSpec,
    sys: &System,
    sample: JSample,
    tags: Option<ResonanceTags<'_>>,
) -> Result<JContext> {
    let j = sample.j;
    let beta = spec.beta();
    let v = ground_potential(j, &sys.curves, &sys.grid, sys.mass, &sys.opts)?;
    let asymptote = sys.curves.ground.asymptote;
    let classical =
        |r0: f64| momentum_factor(beta, sys.mass) * classical_z_j(j as f64, beta, sys.mass, r0);
    let ham = |v: Vec<f64>| {
        GroundHamiltonian::from_potential(sys.grid, sys.mass, j, v, sys.opts.boundary).map(Arc::new)
    };
    let (source, z_j) = match spec.method {
        Method::Eigen => {
            let mut d = diagonalize_partial_wave(&v, &sys.grid, sys.mass, j, asymptote)?;
            if spec.filter == StateFilter::NoBoundNoResonance {
                let t = tags.ok_or_else(|| {
                    Error::Config("filter no-bound-no-resonance needs a resonance table".into())
                })?;
                d.tag_resonances(&t.table.rows, t.cutoff_ns);
            }
            let z = box_z_j(&d.energies, beta, spec.epsilon);
            (JSource::Eigen(Arc::new(d)), z)
        }
        Method::Grid => {
            let z = box_z_j(
                &eigenvalues_partial_wave(&v, &sys.grid, sys.mass)?,
                beta,
                spec.epsilon,
            );
            (JSource::Grid(ham(v)?), z)
        }
        Method::GaussianProjected => {
            let d = diagonalize_partial_wave(&v, &sys.grid, sys.mass, j, asymptote)?;
            (
                JSource::Gaussian {
                    decomp: Some(Arc::new(d)),
                    hamiltonian: None,
                },
                classical(r0_of(spec)?),
            )
        }
        Method::GaussianPropagated => (
            JSource::Gaussian {
                decomp: None,
                hamiltonian: Some(ham(v)?),
            },
            classical(r0_of(spec)?),
        ),
    };
    Ok(JContext {
        sample,
        z_j,
        p_j: (2.0 * j as f64 + 1.0) * z_j,
        source,
    })
}

fn r0_of(spec: &EnsembleSpec) -> Result<f64> {
    spec.r0
        .ok_or_else(|| Error::Config("gaussian methods need ensemble.r0".into()))
}

/// Check the Gaussian starting point against the ground curve and the box.
pub fn check_gaussian_start(spec: &EnsembleSpec, sys: &System) -> Result<()> {
    if !spec.method.is_gaussian() {
        return Ok(());
    }
    let sigma = thermal_width(sys.mass, spec.temperature);
    let ground = &sys.curves.ground;
    validate_r0(
        &sys.grid,
        |r| ground.evaluate(r).unwrap_or(f64::INFINITY),
        r0_of(spec)?,
        sigma,
        spec.temperature,
    )
}

/// Z for `P_J = (2J+1)Z_J/Z`, given the unnormalised stride-weighted terms.
pub fn normalization_z(
    choice: NormalizationChoice,
    spec: &EnsembleSpec,
    sys: &System,
    terms: &[f64],
) -> Result<f64> {
    let z = match choice {
        NormalizationChoice::Box => terms.iter().sum(),
        NormalizationChoice::Classical => {
            let r = if spec.method.is_gaussian() {
                r0_of(spec)?
            } else {
                sys.grid.r_max()
            };
            partition_function_classical(spec.temperature, r, sys.mass, None).z
        }
    };
    if !(z > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "partition function must be positive, got {z}"
        )));
    }
    Ok(z)
}

/// Fully materialised ensemble (all J held in memory; for small systems).
pub fn build_ensemble(
    spec: &EnsembleSpec,
    sys: &System,
    choice: NormalizationChoice,
    tags: Option<ResonanceTags<'_>>,
) -> Result<ThermalEnsemble> {
    spec.validate()?;
    check_gaussian_start(spec, sys)?;
    let contexts = spec
        .samples()
        .par_iter()
        .map(|&s| build_context(spec, sys, s, tags))
        .collect::<Result<Vec<_>>>()?;
    let norm = match choice {
        NormalizationChoice::Box => Normalization::SampledBox,
        NormalizationChoice::Classical => Normalization::Classical,
    };
    ThermalEnsemble::new(spec.clone(), sys.grid, sys.mass, contexts, norm)
}

/// Map `f` over `items` in parallel and feed results to `sink` in item order.
fn ordered_map<T: Sync, R: Send>(
    items: &[T],
    f: impl Fn(&T) -> Result<R> + Sync,
    mut sink: impl FnMut(R) -> Result<()>,
) -> Result<()> {
    let width = rayon::current_num_threads().max(1);
    for chunk in items.chunks(width) {
        for r in chunk.par_iter().map(&f).collect::<Vec<_>>() {
            sink(r?)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRun {
    /// `(R, ρ(R)/R², standard error)`.
    pub rows: Vec<(f64, f64, f64)>,
    pub z: f64,
    /// `Σ_J w_J P_J` over sampled J.
    pub weight_sum: f64,
    pub j_values: Vec<u32>,
}

/// Thermal pair density `ρ(R)/R²` averaged over the ensemble.
pub fn thermal_density(
    spec: &EnsembleSpec,
    sys: &System,
    choice: NormalizationChoice,
    tags: Option<ResonanceTags<'_>>,
    with_errors: bool,
) -> Result<DensityRun> {
    spec.validate()?;
    check_gaussian_start(spec, sys)?;
    let n = spec.n_realizations;
    let samples = spec.samples();
    let mut acc = DensityAccumulator::new(sys.grid, with_errors.then_some(n));
    let mut terms = Vec::with_capacity(samples.len());
    ordered_map(
        &samples,
        |&s| {
            let ctx = build_context(spec, sys, s, tags)?;
            let mut a = DensityAccumulator::new(sys.grid, with_errors.then_some(n));
            for k in 0..n {
                a.add(&generate_realization(spec, &sys.grid, sys.mass, &ctx, k)?);
            }
            Ok((ctx.weight(), a))
        },
        |(w, a)| {
            acc.merge(&a);
            terms.push(w);
            Ok(())
        },
    )?;
    let z = normalization_z(choice, spec, sys, &terms)?;
    acc.scale(1.0 / z);
    Ok(DensityRun {
        rows: acc.finish(n),
        z,
        weight_sum: terms.iter().sum::<f64>() / z,
        j_values: samples.iter().map(|s| s.j).collect(),
    })
}

/// Propagation settings for the pump step.
#[derive(Debug, Clone)]
pub struct PumpSettings {
    /// One entry per field strength; all share envelope shape and timing.
    pub pulses: Vec<PulseParameters>,
    pub dt: f64,
    pub run: PulseRun,
    /// Residual target for choosing N_m.
    pub n_m_residual: f64,
    /// Skip the eigenbasis projection (yields only).
    pub yields_only: bool,
}

impl PumpSettings {
    pub fn new(pulse: PulseParameters, dt: f64) -> Self {
        Self {
            pulses: vec![pulse],
            dt,
            run: PulseRun::default(),
            n_m_residual: 1e-3,
            yields_only: false,
        }
    }
}

/// Pump outcome of one partial wave at one field strength.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpJField {
    /// `‖ψ_Πg‖²` per realization.
    pub populations: Vec<f64>,
    /// Eigenbasis coefficients per realization, truncated to `n_m`.
    pub coefficients: Vec<Vec<C64>>,
    pub n_m: usize,
    /// Share of the excited norm outside the retained states.
    pub residual_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PumpJOutcome {
    pub sample: JSample,
    /// Stride weight × `(2J+1)Z_J` (divide by Z).
    pub unnormalised_weight: f64,
    pub per_field: Vec<PumpJField>,
}

/// Propagate every realization of one partial wave through each pulse.
pub fn pump_partial_wave(
    spec: &EnsembleSpec,
    sys: &System,
    sample: JSample,
    tags: Option<ResonanceTags<'_>>,
    settings: &PumpSettings,
) -> Result<PumpJOutcome> {
    let j = sample.j;
    let ctx = build_context(spec, sys, sample, tags)?;
    let first = settings
        .pulses
        .first()
        .ok_or_else(|| Error::Config("no pulse given".into()))?;
    let h0 = assemble_pa(j, &sys.curves, &sys.grid, sys.mass, first, &sys.opts)?;
    let hams: Vec<_> = settings
        .pulses
        .iter()
        .map(|p| h0.with_field(p.e0))
        .collect();
    let excited = if settings.yields_only {
        None
    } else {
        let asym = sys.curves.excited.asymptote - 2.0 * first.omega_l;
        Some(diagonalize_partial_wave(
            h0.static_potential(EXCITED_CHANNEL),
            &sys.grid,
            sys.mass,
            j,
            asym,
        )?)
    };
    let (t0, t1) = first.support();
    let n = spec.n_realizations;
    let mut pops = vec![Vec::with_capacity(n); hams.len()];
    let mut coeffs: Vec<Vec<Vec<C64>>> = vec![Vec::with_capacity(n); hams.len()];
    for k in 0..n {
        let r = generate_realization(spec, &sys.grid, sys.mass, &ctx, k)?;
        let psi0 = embed_in_pump_layout(&r.state);
        for (f, h) in hams.iter().enumerate() {
            let out = propagate_pulse(&psi0, h, t0, t1, settings.dt, &settings.run)?;
            let p = excited_population(&out.state) * r.norm_factor;
            pops[f].push(p);
            coeffs[f].push(match &excited {
                Some(d) if p > 0.0 => {
                    let s = r.norm_factor.sqrt();
                    d.project(out.state.channel(EXCITED_CHANNEL), None)
                        .into_iter()
                        .map(|c| c * s)
                        .collect()
                }
                _ => Vec::new(),
            });
        }
    }
    let per_field = pops
        .into_iter()
        .zip(coeffs)
        .map(|(populations, mut coefficients)| {
            let total: f64 = populations.iter().sum();
            let width = coefficients.iter().map(Vec::len).max().unwrap_or(0);
            let mut per_state = vec![0.0; width];
            for c in &coefficients {
                for (m, z) in c.iter().enumerate() {
                    per_state[m] += z.norm_sqr();
                }
            }
            let n_m = if width == 0 {
                0
            } else {
                select_n_m(&per_state, total, settings.n_m_residual)
            };
            let kept: f64 = per_state[..n_m].iter().sum();
            coefficients.iter_mut().for_each(|c| c.truncate(n_m));
            let residual_fraction = if total > 0.0 {
                ((total - kept) / total).max(0.0)
            } else {
                0.0
            };
            PumpJField {
                populations,
                coefficients,
                n_m,
                residual_fraction,
            }
        })
        .collect();
    Ok(PumpJOutcome {
        sample,
        unnormalised_weight: ctx.weight(),
        per_field,
    })
}

/// One row of the per-J yield table.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldRow {
    pub j: u32,
    pub stride_weight: f64,
    /// `P_J` for a single J.
    pub p_j: f64,
    /// `⟨P_e^J⟩` over realizations.
    pub population: ThermalAverage,
    pub n_m: usize,
    pub residual_fraction: f64,
}

/// Thermally averaged pump results at one field strength.
#[derive(Debug, Clone)]
pub struct PumpReport {
    pub intensity_w_cm2: f64,
    pub rows: Vec<YieldRow>,
    /// `⟨P_e⟩ = (1/N)Σₖ Σ_J w_J P_J P_e^{kJ}`.
    pub total: ThermalAverage,
    pub z: f64,
    pub density: Option<ExcitedDensityMatrix>,
    pub purity: f64,
    pub purity_se: f64,
    pub coherence: f64,
    pub coherence_se: f64,
    pub p_box2: f64,
    pub ground_purity_box: f64,
    pub ground_purity: f64,
}

impl PumpReport {
    pub fn purity_scaled(&self) -> f64 {
        self.p_box2 * self.purity
    }
    pub fn coherence_scaled(&self) -> f64 {
        self.p_box2 * self.coherence
    }
}

/// Full pump calculation: all (k, J) propagated, reduced per field strength.
pub fn photoassociate(
    spec: &EnsembleSpec,
    sys: &System,
    choice: NormalizationChoice,
    tags: Option<ResonanceTags<'_>>,
    settings: &PumpSettings,
    scaling: &ExperimentScaling,
) -> Result<Vec<PumpReport>> {
    spec.validate()?;
    check_gaussian_start(spec, sys)?;
    let samples = spec.samples();
    let mut outcomes = Vec::with_capacity(samples.len());
    ordered_map(
        &samples,
        |&s| pump_partial_wave(spec, sys, s, tags, settings),
        |o| {
            outcomes.push(o);
            Ok(())
        },
    )?;
    let terms: Vec<f64> = outcomes.iter().map(|o| o.unnormalised_weight).collect();
    let z = normalization_z(choice, spec, sys, &terms)?;
    let n = spec.n_realizations;
    let ground_weights: Vec<(JSample, f64)> = outcomes
        .iter()
        .map(|o| (o.sample, o.unnormalised_weight / o.sample.stride_weight / z))
        .collect();
    let (ground_purity_box, ground_purity) = initial_ground_purity(&ground_weights, scaling);

    let mut reports = Vec::with_capacity(settings.pulses.len());
    for (f, pulse) in settings.pulses.iter().enumerate() {
        let mut per_k = vec![0.0; n];
        let mut rows = Vec::with_capacity(outcomes.len());
        let mut blocks = Vec::with_capacity(outcomes.len());
        for o in &outcomes {
            let w = o.unnormalised_weight / z;
            let pf = &o.per_field[f];
            for (k, p) in pf.populations.iter().enumerate() {
                per_k[k] += w * p;
            }
            rows.push(YieldRow {
                j: o.sample.j,
                stride_weight: o.sample.stride_weight,
                p_j: w / o.sample.stride_weight,
                population: thermal_expectation(&pf.populations),
                n_m: pf.n_m,
                residual_fraction: pf.residual_fraction,
            });
            if !settings.yields_only {
                blocks.push(ExcitedCoefficients {
                    j: o.sample.j,
                    weight: w,
                    per_k: pf.coefficients.clone(),
                });
            }
        }
        let total = thermal_expectation(&per_k);
        let density = if settings.yields_only {
            None
        } else {
            match build_excited_density(&blocks, n, Some(total.mean)) {
                Ok(dm) => Some(dm),
                Err(Error::ZeroYield) => None,
                Err(e) => return Err(e),
            }
        };
        let (purity_v, coherence_v) = density.as_ref().map_or((f64::NAN, f64::NAN), |d| {
            (purity(d), dynamical_coherence(d))
        });
        let (purity_se, coherence_se) = match &density {
            Some(_) => jackknife(&blocks, n),
            None => (f64::NAN, f64::NAN),
        };
        reports.push(PumpReport {
            intensity_w_cm2: pulse.peak_intensity_w_cm2(),
            rows,
            total,
            z,
            density,
            purity: purity_v,
            purity_se,
            coherence: coherence_v,
            coherence_se,
            p_box2: scaling.p_box2(),
            ground_purity_box,
            ground_purity,
        });
    }
    Ok(reports)
}

/// Delete-a-group jackknife errors of purity and coherence over realizations.
fn jackknife(blocks: &[ExcitedCoefficients], n: usize) -> (f64, f64) {
    let groups = n.min(10);
    if groups < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mut est = Vec::with_capacity(groups);
    for g in 0..groups {
        let reduced: Vec<ExcitedCoefficients> = blocks
            .iter()
            .map(|b| ExcitedCoefficients {
                j: b.j,
                weight: b.weight,
                per_k: b
                    .per_k
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| k % groups != g)
                    .map(|(_, c)| c.clone())
                    .collect(),
            })
            .collect();
        let kept = (0..n).filter(|k| k % groups != g).count();
        if let Ok(dm) = build_excited_density(&reduced, kept, None) {
            est.push((purity(&dm), dynamical_coherence(&dm)));
        }
    }
    let m = est.len() as f64;
    if est.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let se = |sel: fn(&(f64, f64)) -> f64| {
        let mean = est.iter().map(sel).sum::<f64>() / m;
        ((m - 1.0) / m * est.iter().map(|e| (sel(e) - mean).powi(2)).sum::<f64>()).sqrt()
    };
    (se(|e| e.0), se(|e| e.1))
}

/// Shape resonances of the ground channel for each J in `j_values`.
pub fn resonance_scan(
    curves: &CurveSet,
    mass: f64,
    grid: &RadialGrid,
    opts: &AssemblyOptions,
    j_values: &[u32],
    search: &CapSearch,
) -> Result<ResonanceTable> {
    let mut rows = Vec::new();
    ordered_map(
        j_values,
        |&j| {
            let v = ground_potential(j, curves, grid, mass, opts)?;
            find_shape_resonances(&v, grid, mass, j, search)
        },
        |r| {
            rows.extend(r);
            Ok(())
        },
    )?;
    Ok(ResonanceTable { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionRow {
    pub sample: JSample,
    /// Dimensionless box `Z_J = Σₙ e^{−βEₙ}`.
    pub z_j_box: f64,
    /// Dimensionless classical `√(m/2πβ)·Z_J^{R_max}`.
    pub z_j_classical: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionReport {
    pub temperature: f64,
    pub r_max: f64,
    pub z_box: f64,
    pub z_classical: f64,
    pub tail_fraction: f64,
    /// `R_max√(2m/β)`: the J at which the classical `Z_J` starts to fall off.
    pub j_scale: f64,
    pub rows: Vec<PartitionRow>,
}

impl PartitionReport {
    /// Box `P_J` for a single J.
    pub fn p_j(&self, row: &PartitionRow) -> f64 {
        (2.0 * row.sample.j as f64 + 1.0) * row.z_j_box / self.z_box
    }
}

/// Box and classical partition functions. Uses the exact (unclipped)
/// potential and eigenvalues only.
pub fn partition(
    curves: &CurveSet,
    mass: f64,
    grid: &RadialGrid,
    temperature: f64,
    j_stride: u32,
    j_max: Option<u32>,
    tail_tolerance: f64,
) -> Result<PartitionReport> {
    let beta = units::beta_from_kelvin(temperature);
    let j_scale = grid.r_max() * (2.0 * mass / beta).sqrt();
    let j_max = j_max.unwrap_or((3.5 * j_scale).ceil() as u32);
    let samples = crate::thermal::j_samples(j_max, j_stride);
    let opts = AssemblyOptions::exact();
    let e_ref = 0.0;
    let mut per_j = Vec::with_capacity(samples.len());
    ordered_map(
        &samples,
        |s| {
            let v = ground_potential(s.j, curves, grid, mass, &opts)?;
            let e = eigenvalues_partial_wave(&v, grid, mass)?;
            Ok((
                *s,
                e.iter().map(|e| (-beta * (e - e_ref)).exp()).sum::<f64>(),
            ))
        },
        |r| {
            per_j.push(r);
            Ok(())
        },
    )?;
    let bp = partition_function_box(&per_j, tail_tolerance)?;
    let cl = partition_function_classical(temperature, grid.r_max(), mass, None);
    let rows = per_j
        .iter()
        .map(|&(sample, z)| PartitionRow {
            sample,
            z_j_box: z,
            z_j_classical: cl.z_j_states(sample.j),
        })
        .collect();
    Ok(PartitionReport {
        temperature,
        r_max: grid.r_max(),
        z_box: bp.z,
        z_classical: cl.z,
        tail_fraction: bp.tail_fraction,
        j_scale,
        rows,
    })
}

/// Result of a file-writing driver.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

fn within_pool<T: Send>(deterministic: bool, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if deterministic {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(f)
    } else {
        f()
    }
}

fn prepare_out(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    Ok(&cfg.out_dir)
}

fn manifest(
    cfg: &RunConfig,
    command: &str,
    deterministic: bool,
    j_values: Vec<u32>,
    outputs: Vec<PathBuf>,
) -> Manifest {
    Manifest {
        command: command.to_string(),
        config_sha256: sha256_hex(cfg.canonical().as_bytes()),
        seed: cfg.ensemble.seed,
        deterministic,
        method: cfg.ensemble.method.to_string(),
        filter: cfg.ensemble.filter.to_string(),
        n_realizations: cfg.ensemble.n_realizations,
        j_values,
        outputs,
        extra: Vec::new(),
    }
}

fn finish(cfg: &RunConfig, mut m: Manifest, extra: Vec<(String, String)>) -> Result<RunOutput> {
    m.extra = extra;
    let path = cfg.out_dir.join("manifest.txt");
    m.write(&path)?;
    Ok(RunOutput {
        files: m.outputs.clone(),
        manifest: path,
    })
}

/// Resonances needed by the `no-bound-no-resonance` filter (None otherwise).
fn resonances_for_filter(cfg: &RunConfig, sys: &System) -> Result<Option<ResonanceTable>> {
    if cfg.ensemble.filter != StateFilter::NoBoundNoResonance {
        return Ok(None);
    }
    let js: Vec<u32> = cfg.ensemble.samples().iter().map(|s| s.j).collect();
    Ok(Some(scan_with(cfg, sys, &js)?))
}

fn scan_with(cfg: &RunConfig, sys: &System, js: &[u32]) -> Result<ResonanceTable> {
    let c = &cfg.cap;
    let grid = make_box(cfg.grid.r_min, c.r_max, c.n_points, sys.mass, c.e_kin_max)?;
    let search = CapSearch {
        r_start_fraction: c.r_start_fraction,
        order: c.order,
        eta_ladder: doubling_ladder(c.eta0, c.rungs),
        asymptote: sys.curves.ground.asymptote,
    };
    resonance_scan(&sys.curves, sys.mass, &grid, &sys.opts, js, &search)
}

/// `thermal-density`: `(R, ρ/R², σ)` CSV.
pub fn run_thermal_density(cfg: &RunConfig, deterministic: bool) -> Result<RunOutput> {
    let out = prepare_out(cfg)?;
    let sys = System::from_config(cfg)?;
    let res = resonances_for_filter(cfg, &sys)?;
    let tags = res.as_ref().map(|t| ResonanceTags {
        table: t,
        cutoff_ns: cfg.cap.lifetime_cutoff_ns,
    });
    let d = within_pool(deterministic, || {
        thermal_density(&cfg.ensemble, &sys, cfg.normalization, tags, true)
    })?;
    let mut t = Table::new(&["R_bohr", "rho_over_R2", "std_error"])
        .meta("temperature_K", cfg.ensemble.temperature)
        .meta("method", cfg.ensemble.method)
        .meta("filter", cfg.ensemble.filter)
        .meta("n_realizations", cfg.ensemble.n_realizations)
        .meta("seed", cfg.ensemble.seed)
        .meta("Z", num(d.z))
        .meta("weight_sum", num(d.weight_sum));
    for (r, rho, se) in &d.rows {
        t.push(vec![num(*r), num(*rho), num(*se)]);
    }
    let path = out.join("density.csv");
    t.write(&path)?;
    finish(
        cfg,
        manifest(
            cfg,
            "thermal-density",
            deterministic,
            d.j_values,
            vec![path],
        ),
        vec![("Z".into(), num(d.z))],
    )
}

fn pump_settings(cfg: &RunConfig, intensities: Option<&[f64]>) -> Result<PumpSettings> {
    let pulses = match intensities {
        Some(list) => list
            .iter()
            .map(|&i| pulse_from_config(&cfg.pulse, Some(i)))
            .collect::<Result<Vec<_>>>()?,
        None => vec![pulse_from_config(&cfg.pulse, None)?],
    };
    Ok(PumpSettings {
        pulses,
        dt: cfg.pulse.dt,
        run: PulseRun {
            tolerance: cfg.tolerances.propagation,
            norm_drift_max: cfg.tolerances.norm_drift,
            ..PulseRun::default()
        },
        n_m_residual: cfg.tolerances.n_m_residual,
        yields_only: false,
    })
}

fn pump_reports(
    cfg: &RunConfig,
    deterministic: bool,
    intensities: Option<&[f64]>,
) -> Result<(System, Vec<PumpReport>)> {
    let sys = System::from_config(cfg)?;
    let res = resonances_for_filter(cfg, &sys)?;
    let tags = res.as_ref().map(|t| ResonanceTags {
        table: t,
        cutoff_ns: cfg.cap.lifetime_cutoff_ns,
    });
    let settings = pump_settings(cfg, intensities)?;
    let scaling = ExperimentScaling::new(cfg.density_cm3, sys.grid.r_max())?;
    let reports = within_pool(deterministic, || {
        photoassociate(
            &cfg.ensemble,
            &sys,
            cfg.normalization,
            tags,
            &settings,
            &scaling,
        )
    })?;
    Ok((sys, reports))
}

fn yield_table(cfg: &RunConfig, r: &PumpReport) -> Table {
    let mut t = Table::new(&[
        "J",
        "stride_weight",
        "P_J",
        "excited_population",
        "std_error",
        "Z_times_yield",
        "N_m",
        "residual_fraction",
    ])
    .meta("temperature_K", cfg.ensemble.temperature)
    .meta("intensity_W_cm2", num(r.intensity_w_cm2))
    .meta("method", cfg.ensemble.method)
    .meta("n_realizations", cfg.ensemble.n_realizations)
    .meta("Z", num(r.z));
    for row in &r.rows {
        t.push(vec![
            row.j.to_string(),
            num(row.stride_weight),
            num(row.p_j),
            num(row.population.mean),
            num(row.population.std_error),
            num(r.z * row.p_j * row.population.mean),
            row.n_m.to_string(),
            num(row.residual_fraction),
        ]);
    }
    t
}

fn summary_table(r: &PumpReport) -> Table {
    let mut t = Table::new(&["quantity", "value", "std_error"])
        .meta("intensity_W_cm2", num(r.intensity_w_cm2));
    let mut add = |q: &str, v: f64, e: f64| t.push(vec![q.to_string(), num(v), num(e)]);
    add("total_yield", r.total.mean, r.total.std_error);
    add("purity_box", r.purity, r.purity_se);
    add("coherence_box", r.coherence, r.coherence_se);
    add("p_box2", r.p_box2, 0.0);
    add("purity_scaled", r.purity_scaled(), r.p_box2 * r.purity_se);
    add(
        "coherence_scaled",
        r.coherence_scaled(),
        r.p_box2 * r.coherence_se,
    );
    add("ground_purity_box", r.ground_purity_box, f64::NAN);
    add("ground_purity_scaled", r.ground_purity, f64::NAN);
    if let Some(d) = &r.density {
        add("projected_yield", d.projected_yield, f64::NAN);
        add("density_matrix_dimension", d.dimension() as f64, f64::NAN);
    }
    t
}

/// `photoassociate`: per-J yields, scalar summary and the excited density matrix.
pub fn run_photoassociate(cfg: &RunConfig, deterministic: bool) -> Result<RunOutput> {
    let out = prepare_out(cfg)?.to_path_buf();
    let (_, reports) = pump_reports(cfg, deterministic, None)?;
    let r = &reports[0];
    let mut files = vec![out.join("yield_by_j.csv"), out.join("summary.csv")];
    yield_table(cfg, r).write(&files[0])?;
    summary_table(r).write(&files[1])?;
    if let Some(d) = &r.density {
        let p = out.join("density_matrix.csv");
        std::fs::write(
            &p,
            format!(
                "# trace_normalization = {}\n{}",
                num(d.projected_yield),
                d.to_csv()
            ),
        )?;
        files.push(p);
    }
    let js = r.rows.iter().map(|x| x.j).collect();
    finish(
        cfg,
        manifest(cfg, "photoassociate", deterministic, js, files),
        vec![("total_yield".into(), num(r.total.mean))],
    )
}

/// `purity-scan`: purity and coherence against peak intensity.
pub fn run_purity_scan(cfg: &RunConfig, deterministic: bool) -> Result<RunOutput> {
    let out = prepare_out(cfg)?.to_path_buf();
    let (_, reports) = pump_reports(cfg, deterministic, Some(&cfg.intensities_w_cm2))?;
    let mut t = purity_scan_table(&reports).meta("n_realizations", cfg.ensemble.n_realizations);
    t.meta
        .push(("method".into(), cfg.ensemble.method.to_string()));
    let path = out.join("purity_scan.csv");
    t.write(&path)?;
    let js = reports
        .first()
        .map(|r| r.rows.iter().map(|x| x.j).collect())
        .unwrap_or_default();
    finish(
        cfg,
        manifest(cfg, "purity-scan", deterministic, js, vec![path]),
        Vec::new(),
    )
}

pub fn purity_scan_table(reports: &[PumpReport]) -> Table {
    let mut t = Table::new(&[
        "intensity_W_cm2",
        "total_yield",
        "yield_std_error",
        "purity_box",
        "purity_std_error",
        "coherence_box",
        "coherence_std_error",
        "purity_scaled",
        "coherence_scaled",
    ]);
    for r in reports {
        t.push(vec![
            num(r.intensity_w_cm2),
            num(r.total.mean),
            num(r.total.std_error),
            num(r.purity),
            num(r.purity_se),
            num(r.coherence),
            num(r.coherence_se),
            num(r.purity_scaled()),
            num(r.coherence_scaled()),
        ]);
    }
    t
}

/// `resonances`: CAP scan over `cap.j_min..=cap.j_max`.
pub fn run_resonance_scan(cfg: &RunConfig, deterministic: bool) -> Result<RunOutput> {
    let out = prepare_out(cfg)?.to_path_buf();
    let sys = System::from_config(cfg)?;
    let c = &cfg.cap;
    let js: Vec<u32> = (c.j_min..=c.j_max).step_by(c.j_stride as usize).collect();
    let table = within_pool(deterministic, || scan_with(cfg, &sys, &js))?;
    let path = out.join("resonances.csv");
    let header = format!(
        "# r_max_bohr = {}\n# eta0 = {}\n# rungs = {}\n# lifetime_cutoff_ns = {}\n",
        c.r_max, c.eta0, c.rungs, c.lifetime_cutoff_ns
    );
    std::fs::write(&path, header + &table.to_csv())?;
    finish(
        cfg,
        manifest(cfg, "resonances", deterministic, js, vec![path]),
        vec![("n_resonances".into(), table.rows.len().to_string())],
    )
}

/// `partition`: box vs classical partition functions and per-J weights.
pub fn run_partition(cfg: &RunConfig, deterministic: bool) -> Result<RunOutput> {
    let out = prepare_out(cfg)?.to_path_buf();
    let curves = load_curves(&cfg.curves)?;
    let mass = units::mg2_reduced_mass();
    let grid = make_box(
        cfg.grid.r_min,
        cfg.grid.r_max,
        None,
        mass,
        cfg.partition.e_kin_max,
    )?;
    let p = within_pool(deterministic, || {
        partition(
            &curves,
            mass,
            &grid,
            cfg.ensemble.temperature,
            cfg.partition.j_stride,
            cfg.partition.j_max,
            cfg.tolerances.tail,
        )
    })?;
    let mut t = Table::new(&["J", "stride_weight", "Z_J_box", "Z_J_classical", "P_J_box"])
        .meta("temperature_K", p.temperature)
        .meta("r_max_bohr", p.r_max)
        .meta("n_points", grid.n_points())
        .meta("Z_box", num(p.z_box))
        .meta("Z_classical", num(p.z_classical))
        .meta("ratio", num(p.z_box / p.z_classical))
        .meta("tail_fraction", num(p.tail_fraction));
    for row in &p.rows {
        t.push(vec![
            row.sample.j.to_string(),
            num(row.sample.stride_weight),
            num(row.z_j_box),
            num(row.z_j_classical),
            num(p.p_j(row)),
        ]);
    }
    let path = out.join("partition.csv");
    t.write(&path)?;
    let js = p.rows.iter().map(|r| r.sample.j).collect();
    finish(
        cfg,
        manifest(cfg, "partition", deterministic, js, vec![path]),
        vec![
            ("Z_box".into(), num(p.z_box)),
            ("Z_classical".into(), num(p.z_classical)),
        ],
    )
}
