//! Run configuration: flat `block.key = value` lines, `#` comments.
//!
//! Only `curves` and `ensemble.temperature` are required. Lengths and energies
//! accept an optional unit suffix (`grid.r_max = 10.6 angstrom`,
//! `ensemble.temperature = 1000 K`); bare numbers are atomic units, except
//! where the key name carries the unit (`pulse.fwhm_fs`, `pulse.lambda_nm`).
//!
//! | key | default |
//! |---|---|
//! | `curves` | required: `model-mg2` or a manifest path |
//! | `grid.r_min` | 4 bohr |
//! | `grid.r_max` | 200 bohr |
//! | `grid.n_points` | smallest FFT-friendly size resolving `grid.e_kin_max` |
//! | `grid.e_kin_max` | 0.15 hartree |
//! | `pulse.intensity_w_cm2` | 5e12 (or set `pulse.e0` in a.u.) |
//! | `pulse.fwhm_fs` | 100 |
//! | `pulse.lambda_nm` | 840 |
//! | `pulse.support_fwhm` | 6 (field is zero beyond t_center ± this × fwhm) |
//! | `pulse.t_center_fs` | support × fwhm, so the pulse starts at t = 0 |
//! | `pulse.phase` | `transform_limited` (or `quadratic:<chirp a.u.>`) |
//! | `pulse.dt` | 10 a.u. |
//! | `ensemble.temperature` | required |
//! | `ensemble.n_realizations` | 200 |
//! | `ensemble.j_max` / `ensemble.j_stride` | 300 / 5 |
//! | `ensemble.j_list` | unset (comma-separated explicit J values) |
//! | `ensemble.method` | `eigen` |
//! | `ensemble.epsilon` | 1e-8 |
//! | `ensemble.filter` | `all` |
//! | `ensemble.seed` | 0 |
//! | `ensemble.r0` | unset; required for gaussian methods |
//! | `ensemble.normalization` | `classical` (or `box`) |
//! | `scaling.density_cm3` | 4.8e16 |
//! | `outputs.directory` | `out` |
//! | `outputs.formats` | `csv` |
//! | `tolerances.propagation` | 1e-14 |
//! | `tolerances.norm_drift` | 1e-6 |
//! | `tolerances.tail` | 1e-3 |
//! | `tolerances.n_m_residual` | 1e-3 |
//! | `tolerances.potential_ceiling` | 0.06 hartree (`none` disables) |
//! | `cap.r_max` | 40 bohr (separate resonance box) |
//! | `cap.e_kin_max` | 0.03 hartree |
//! | `cap.r_start_fraction` / `cap.order` | 0.85 / 2 |
//! | `cap.eta0` / `cap.rungs` | 1e-5 / 10 |
//! | `cap.j_min` / `cap.j_max` / `cap.j_stride` | 0 / 150 / 5 |
//! | `cap.lifetime_cutoff_ns` | 10 |
//! | `partition.j_stride` | 100 |
//! | `partition.j_max` | 3.5 × the thermal J scale |
//! | `partition.e_kin_max` | 0.025 hartree |
//! | `purity.intensities_w_cm2` | 1e11, 1e12, 5e12, 1e13, 2e13 |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hamiltonian::{PhaseProfile, DEFAULT_POTENTIAL_CEILING, DEFAULT_SUPPORT_FWHM};
use crate::thermal::EnsembleSpec;
use crate::units::{convert, Unit};

#[derive(Debug, Clone, PartialEq)]
pub enum CurveSource {
    ModelMg2,
    Manifest(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridBlock {
    pub r_min: f64,
    pub r_max: f64,
    pub n_points: Option<usize>,
    pub e_kin_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldStrength {
    Intensity(f64),
    Field(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseBlock {
    pub strength: FieldStrength,
    pub fwhm_fs: f64,
    pub lambda_nm: f64,
    pub t_center_fs: Option<f64>,
    pub support_fwhm: f64,
    pub phase: PhaseProfile,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizationChoice {
    Classical,
    Box,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub propagation: f64,
    pub norm_drift: f64,
    pub tail: f64,
    pub n_m_residual: f64,
    pub potential_ceiling: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapBlock {
    pub r_max: f64,
    pub n_points: Option<usize>,
    pub e_kin_max: f64,
    pub r_start_fraction: f64,
    pub order: u32,
    pub eta0: f64,
    pub rungs: usize,
    pub j_min: u32,
    pub j_max: u32,
    pub j_stride: u32,
    pub lifetime_cutoff_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionBlock {
    pub j_stride: u32,
    pub j_max: Option<u32>,
    pub e_kin_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub curves: CurveSource,
    pub grid: GridBlock,
    pub pulse: PulseBlock,
    pub ensemble: EnsembleSpec,
    pub normalization: NormalizationChoice,
    pub density_cm3: f64,
    pub out_dir: PathBuf,
    pub formats: Vec<String>,
    pub tolerances: Tolerances,
    pub cap: CapBlock,
    pub partition: PartitionBlock,
    pub intensities_w_cm2: Vec<f64>,
}

impl RunConfig {
    /// Defaults everywhere, with the two required values supplied.
    pub fn with_required(curves: CurveSource, temperature: f64) -> Self {
        Self {
            curves,
            grid: GridBlock {
                r_min: 4.0,
                r_max: 200.0,
                n_points: None,
                e_kin_max: 0.15,
            },
            pulse: PulseBlock {
                strength: FieldStrength::Intensity(5e12),
                fwhm_fs: 100.0,
                lambda_nm: 840.0,
                t_center_fs: None,
                support_fwhm: DEFAULT_SUPPORT_FWHM,
                phase: PhaseProfile::TransformLimited,
                dt: 10.0,
            },
            ensemble: EnsembleSpec {
                temperature,
                ..EnsembleSpec::default()
            },
            normalization: NormalizationChoice::Classical,
            density_cm3: 4.8e16,
            out_dir: PathBuf::from("out"),
            formats: vec!["csv".into()],
            tolerances: Tolerances {
                propagation: 1e-14,
                norm_drift: 1e-6,
                tail: 1e-3,
                n_m_residual: 1e-3,
                potential_ceiling: Some(DEFAULT_POTENTIAL_CEILING),
            },
            cap: CapBlock {
                r_max: 40.0,
                n_points: None,
                e_kin_max: 0.03,
                r_start_fraction: 0.85,
                order: 2,
                eta0: 1e-5,
                rungs: 10,
                j_min: 0,
                j_max: 150,
                j_stride: 5,
                lifetime_cutoff_ns: 10.0,
            },
            partition: PartitionBlock {
                j_stride: 100,
                j_max: None,
                e_kin_max: 0.025,
            },
            intensities_w_cm2: vec![1e11, 1e12, 5e12, 1e13, 2e13],
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        // Relative manifest paths are resolved against the config's directory.
        if let CurveSource::Manifest(p) = &mut cfg.curves {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}`",
                    i + 1
                )));
            }
        }
        let mut e = Entries(entries);
        let curves = match e.take("curves") {
            Some(v) if v == "model-mg2" => CurveSource::ModelMg2,
            Some(v) => CurveSource::Manifest(PathBuf::from(v)),
            None => return Err(Error::Config("`curves` is required".into())),
        };
        let temperature = match e.take("ensemble.temperature") {
            Some(v) => quantity(&v, Unit::Kelvin, "ensemble.temperature")?,
            None => return Err(Error::Config("`ensemble.temperature` is required".into())),
        };
        let mut c = Self::with_required(curves, temperature);

        e.length("grid.r_min", &mut c.grid.r_min)?;
        e.length("grid.r_max", &mut c.grid.r_max)?;
        e.opt_parse("grid.n_points", &mut c.grid.n_points)?;
        e.energy("grid.e_kin_max", &mut c.grid.e_kin_max)?;

        match (e.take("pulse.intensity_w_cm2"), e.take("pulse.e0")) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either pulse.intensity_w_cm2 or pulse.e0".into(),
                ))
            }
            (Some(i), None) => {
                c.pulse.strength = FieldStrength::Intensity(number(&i, "pulse.intensity_w_cm2")?)
            }
            (None, Some(f)) => c.pulse.strength = FieldStrength::Field(number(&f, "pulse.e0")?),
            (None, None) => {}
        }
        e.parse("pulse.fwhm_fs", &mut c.pulse.fwhm_fs)?;
        e.parse("pulse.lambda_nm", &mut c.pulse.lambda_nm)?;
        e.opt_parse("pulse.t_center_fs", &mut c.pulse.t_center_fs)?;
        e.parse("pulse.support_fwhm", &mut c.pulse.support_fwhm)?;
        if let Some(p) = e.take("pulse.phase") {
            c.pulse.phase = match p.split_once(':') {
                None if p == "transform_limited" => PhaseProfile::TransformLimited,
                Some(("quadratic", chirp)) => PhaseProfile::Quadratic {
                    chirp: number(chirp, "pulse.phase")?,
                },
                _ => return Err(Error::Config(format!("pulse.phase: unknown profile `{p}`"))),
            };
        }
        e.parse("pulse.dt", &mut c.pulse.dt)?;

        let en = &mut c.ensemble;
        e.parse("ensemble.n_realizations", &mut en.n_realizations)?;
        e.parse("ensemble.j_max", &mut en.j_max)?;
        e.parse("ensemble.j_stride", &mut en.j_stride)?;
        if let Some(list) = e.take("ensemble.j_list") {
            en.j_list = Some(
                list.split(',')
                    .map(|s| number::<u32>(s.trim(), "ensemble.j_list"))
                    .collect::<Result<_>>()?,
            );
        }
        if let Some(m) = e.take("ensemble.method") {
            en.method = m.parse()?;
        }
        e.parse("ensemble.epsilon", &mut en.epsilon)?;
        if let Some(f) = e.take("ensemble.filter") {
            en.filter = f.parse()?;
        }
        e.parse("ensemble.seed", &mut en.seed)?;
        if let Some(r) = e.take("ensemble.r0") {
            en.r0 = Some(quantity(&r, Unit::Bohr, "ensemble.r0")?);
        }
        if let Some(n) = e.take("ensemble.normalization") {
            c.normalization = match n.as_str() {
                "classical" => NormalizationChoice::Classical,
                "box" => NormalizationChoice::Box,
                _ => {
                    return Err(Error::Config(format!(
                        "ensemble.normalization: unknown `{n}`"
                    )))
                }
            };
        }

        e.parse("scaling.density_cm3", &mut c.density_cm3)?;
        if let Some(d) = e.take("outputs.directory") {
            c.out_dir = PathBuf::from(d);
        }
        if let Some(f) = e.take("outputs.formats") {
            c.formats = f.split(',').map(|s| s.trim().to_string()).collect();
            if let Some(bad) = c.formats.iter().find(|f| f.as_str() != "csv") {
                return Err(Error::Config(format!(
                    "outputs.formats: unsupported `{bad}`"
                )));
            }
        }

        let t = &mut c.tolerances;
        e.parse("tolerances.propagation", &mut t.propagation)?;
        e.parse("tolerances.norm_drift", &mut t.norm_drift)?;
        e.parse("tolerances.tail", &mut t.tail)?;
        e.parse("tolerances.n_m_residual", &mut t.n_m_residual)?;
        if let Some(v) = e.take("tolerances.potential_ceiling") {
            t.potential_ceiling = if v == "none" {
                None
            } else {
                Some(quantity(&v, Unit::Hartree, "tolerances.potential_ceiling")?)
            };
        }

        let cap = &mut c.cap;
        e.length("cap.r_max", &mut cap.r_max)?;
        e.opt_parse("cap.n_points", &mut cap.n_points)?;
        e.energy("cap.e_kin_max", &mut cap.e_kin_max)?;
        e.parse("cap.r_start_fraction", &mut cap.r_start_fraction)?;
        e.parse("cap.order", &mut cap.order)?;
        e.parse("cap.eta0", &mut cap.eta0)?;
        e.parse("cap.rungs", &mut cap.rungs)?;
        e.parse("cap.j_min", &mut cap.j_min)?;
        e.parse("cap.j_max", &mut cap.j_max)?;
        e.parse("cap.j_stride", &mut cap.j_stride)?;
        e.parse("cap.lifetime_cutoff_ns", &mut cap.lifetime_cutoff_ns)?;

        e.parse("partition.j_stride", &mut c.partition.j_stride)?;
        e.opt_parse("partition.j_max", &mut c.partition.j_max)?;
        e.energy("partition.e_kin_max", &mut c.partition.e_kin_max)?;
        if let Some(list) = e.take("purity.intensities_w_cm2") {
            c.intensities_w_cm2 = list
                .split(',')
                .map(|s| number(s.trim(), "purity.intensities_w_cm2"))
                .collect::<Result<_>>()?;
        }

        if let Some(k) = e.0.keys().next() {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.grid.r_min >= 0.0 && self.grid.r_max > self.grid.r_min) {
            return bad("grid: need 0 ≤ r_min < r_max");
        }
        if !(self.pulse.fwhm_fs > 0.0
            && self.pulse.lambda_nm > 0.0
            && self.pulse.dt > 0.0
            && self.pulse.support_fwhm > 0.0)
        {
            return bad("pulse: fwhm, wavelength, support and dt must be positive");
        }
        if !(self.cap.r_start_fraction > 0.0 && self.cap.r_start_fraction < 1.0) {
            return bad("cap.r_start_fraction must lie in (0,1)");
        }
        if self.cap.j_stride == 0 || self.partition.j_stride == 0 {
            return bad("J strides must be ≥ 1");
        }
        if !(self.density_cm3 > 0.0) {
            return bad("scaling.density_cm3 must be positive");
        }
        self.ensemble
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Stable text form of every resolved setting; hashed into manifests.
    pub fn canonical(&self) -> String {
        format!("{self:?}")
    }
}

struct Entries(BTreeMap<String, String>);

impl Entries {
    fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.take(key) {
            *slot = number(&v, key)?;
        }
        Ok(())
    }

    fn opt_parse<T: std::str::FromStr>(&mut self, key: &str, slot: &mut Option<T>) -> Result<()> {
        if let Some(v) = self.take(key) {
            *slot = Some(number(&v, key)?);
        }
        Ok(())
    }

    fn length(&mut self, key: &str, slot: &mut f64) -> Result<()> {
        if let Some(v) = self.take(key) {
            *slot = quantity(&v, Unit::Bohr, key)?;
        }
        Ok(())
    }

    fn energy(&mut self, key: &str, slot: &mut f64) -> Result<()> {
        if let Some(v) = self.take(key) {
            *slot = quantity(&v, Unit::Hartree, key)?;
        }
        Ok(())
    }
}

fn number<T: std::str::FromStr>(v: &str, key: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
}

/// `value [unit]`, converted into `target`'s unit; bare numbers are taken as `target`.
fn quantity(v: &str, target: Unit, key: &str) -> Result<f64> {
    let mut parts = v.split_whitespace();
    let x: f64 = number(parts.next().unwrap_or(""), key)?;
    let Some(tag) = parts.next() else {
        return Ok(x);
    };
    let unit = Unit::parse_energy(tag).or_else(|_| Unit::parse_length(tag))?;
    convert(x, unit, target).map_err(|e| Error::Config(format!("{key}: {e}")))
}

impl std::str::FromStr for NormalizationChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(Self::Classical),
            "box" => Ok(Self::Box),
            _ => Err(Error::Config(format!("unknown normalization `{s}`"))),
        }
    }
}
