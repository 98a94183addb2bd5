//! Potential curves and R-dependent coupling profiles.
//!
//! Every input function of `R` (potentials, transition moments, two-photon
//! moments, polarizability traces, τ) is a [`PotentialCurve`]: either a sampled
//! table interpolated with a natural cubic spline, or an analytic model.
//!
//! # File format
//!
//! ```text
//! # label = X1Sigmag+
//! # unit_R = bohr          (bohr | angstrom)
//! # unit_V = cm-1          (hartree | au | cm-1 | eV)
//! # asymptote = 0.0        (optional, in unit_V; default: last sample)
//! # C6 = 627.0             (optional dispersion tail, atomic units)
//! # lambda_nm = 840        (optional: wavelength the profile was computed at)
//! 3.0   1520.3
//! 3.1   1302.9
//! ```
//!
//! Beyond the last sample a curve continues as `asymptote − Σ Cₙ/Rⁿ` when
//! dispersion coefficients are given and holds the asymptote otherwise.
//! Evaluation below the first sample is an error.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::units::{self, convert, Unit};

/// Natural cubic spline through `(x, y)` knots.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    y2: Vec<f64>,
}

impl NaturalSpline {
    /// Knots must be strictly increasing (checked by the caller).
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut y2 = vec![0.0; n];
        if n > 2 {
            // Tridiagonal solve for second derivatives with y2[0] = y2[n-1] = 0.
            let mut u = vec![0.0; n];
            for i in 1..n - 1 {
                let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
                let p = sig * y2[i - 1] + 2.0;
                y2[i] = (sig - 1.0) / p;
                let slope =
                    (y[i + 1] - y[i]) / (x[i + 1] - x[i]) - (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
                u[i] = (6.0 * slope / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
            }
            y2[n - 1] = 0.0;
            for k in (0..n - 1).rev() {
                y2[k] = y2[k] * y2[k + 1] + u[k];
            }
            y2[0] = 0.0;
        }
        Self { x, y, y2 }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let n = self.x.len();
        if n == 1 {
            return self.y[0];
        }
        let hi = self.x.partition_point(|&xi| xi < r).clamp(1, n - 1);
        let lo = hi - 1;
        let h = self.x[hi] - self.x[lo];
        let a = (self.x[hi] - r) / h;
        let b = (r - self.x[lo]) / h;
        a * self.y[lo]
            + b * self.y[hi]
            + ((a * a * a - a) * self.y2[lo] + (b * b * b - b) * self.y2[hi]) * h * h / 6.0
    }
}

/// Analytic `R ↦ value` model.
#[derive(Clone)]
pub struct AnalyticFn(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl fmt::Debug for AnalyticFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("AnalyticFn(..)")
    }
}

#[derive(Debug, Clone)]
pub enum CurveModel {
    Sampled {
        r: Vec<f64>,
        v: Vec<f64>,
        spline: NaturalSpline,
    },
    /// `asymptote + D_e[(1 − e^{−a(R−R_e)})² − 1]`
    Morse {
        de: f64,
        re: f64,
        a: f64,
    },
    /// Holds the asymptote everywhere.
    Constant,
    Analytic(AnalyticFn),
}

/// A potential curve or any other real profile of `R`, in atomic units.
#[derive(Debug, Clone)]
pub struct PotentialCurve {
    pub label: String,
    pub model: CurveModel,
    pub asymptote: f64,
    /// Dispersion coefficients `Cₙ` keyed by `n` (hartree·bohrⁿ).
    pub long_range: BTreeMap<u32, f64>,
    /// Photon energy (hartree) at which a frequency-dependent profile was computed.
    pub omega_l: Option<f64>,
}

impl PotentialCurve {
    pub fn sampled(label: &str, r: Vec<f64>, v: Vec<f64>, asymptote: Option<f64>) -> Result<Self> {
        validate_samples(label, &r, &v)?;
        let asymptote = asymptote.unwrap_or(*v.last().expect("validated non-empty"));
        let spline = NaturalSpline::new(r.clone(), v.clone());
        Ok(Self {
            label: label.to_string(),
            model: CurveModel::Sampled { r, v, spline },
            asymptote,
            long_range: BTreeMap::new(),
            omega_l: None,
        })
    }

    pub fn constant(label: &str, value: f64) -> Self {
        Self {
            label: label.to_string(),
            model: CurveModel::Constant,
            asymptote: value,
            long_range: BTreeMap::new(),
            omega_l: None,
        }
    }

    pub fn analytic(
        label: &str,
        asymptote: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.to_string(),
            model: CurveModel::Analytic(AnalyticFn(Arc::new(f))),
            asymptote,
            long_range: BTreeMap::new(),
            omega_l: None,
        }
    }

    pub fn with_long_range(mut self, n: u32, coefficient: f64) -> Self {
        self.long_range.insert(n, coefficient);
        self
    }

    pub fn with_omega(mut self, omega_l: f64) -> Self {
        self.omega_l = Some(omega_l);
        self
    }

    pub fn evaluate(&self, r: f64) -> Result<f64> {
        match &self.model {
            CurveModel::Sampled {
                r: knots, spline, ..
            } => {
                let first = knots[0];
                let last = *knots.last().expect("non-empty");
                if r < first - 1e-12 * first.abs().max(1.0) {
                    return Err(Error::Extrapolation {
                        label: self.label.clone(),
                        r,
                        first,
                    });
                }
                if r <= last {
                    Ok(spline.eval(r.max(first)))
                } else if self.long_range.is_empty() {
                    Ok(self.asymptote)
                } else {
                    Ok(self.asymptote
                        - self
                            .long_range
                            .iter()
                            .map(|(&n, &c)| c / r.powi(n as i32))
                            .sum::<f64>())
                }
            }
            CurveModel::Morse { de, re, a } => {
                let x = 1.0 - (-a * (r - re)).exp();
                Ok(self.asymptote + de * (x * x - 1.0))
            }
            CurveModel::Constant => Ok(self.asymptote),
            CurveModel::Analytic(f) => Ok((f.0)(r)),
        }
    }

    /// Sample the curve on `grid` (see [`interpolate`]).
    pub fn on_grid(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        interpolate(self, grid)
    }

    /// Tabulate an arbitrary curve into a sampled one on the given abscissae.
    pub fn tabulate(&self, r: &[f64]) -> Result<Self> {
        let v = r
            .iter()
            .map(|&x| self.evaluate(x))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Self::sampled(&self.label, r.to_vec(), v, Some(self.asymptote))?;
        out.long_range = self.long_range.clone();
        out.omega_l = self.omega_l;
        Ok(out)
    }
}

fn validate_samples(label: &str, r: &[f64], v: &[f64]) -> Result<()> {
    let err = |message: String| Error::CurveFormat {
        path: label.to_string(),
        message,
    };
    if r.is_empty() || r.len() != v.len() {
        return Err(err(format!(
            "{} R values for {} V values",
            r.len(),
            v.len()
        )));
    }
    if let Some(i) = r.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(err(format!(
            "R not strictly increasing at data row {}",
            i + 2
        )));
    }
    if r.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(err("non-finite sample".into()));
    }
    Ok(())
}

/// Morse curve `asymptote + D_e[(1 − e^{−a(R−R_e)})² − 1]`.
pub fn morse_curve(
    label: &str,
    de: f64,
    re: f64,
    a: f64,
    asymptote: f64,
) -> Result<PotentialCurve> {
    if !(de > 0.0) || !(a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Morse needs D_e > 0 and a > 0 (got {de}, {a})"
        )));
    }
    Ok(PotentialCurve {
        label: label.to_string(),
        model: CurveModel::Morse { de, re, a },
        asymptote,
        long_range: BTreeMap::new(),
        omega_l: None,
    })
}

/// Curve values on every grid point.
pub fn interpolate(curve: &PotentialCurve, grid: &RadialGrid) -> Result<Vec<f64>> {
    grid.points()
        .into_iter()
        .map(|r| curve.evaluate(r))
        .collect()
}

/// Parse a curve file.
pub fn load_curve(path: impl AsRef<Path>) -> Result<PotentialCurve> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_curve(&text, &path.display().to_string())
}

/// Parse curve-file text; `origin` names the source in error messages.
pub fn parse_curve(text: &str, origin: &str) -> Result<PotentialCurve> {
    let err = |message: String| Error::CurveFormat {
        path: origin.to_string(),
        message,
    };
    let mut header: BTreeMap<String, String> = BTreeMap::new();
    let mut r = Vec::new();
    let mut v = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, val)) = rest.split_once('=') {
                let val = val.split_whitespace().next().unwrap_or("").to_string();
                header.insert(k.trim().to_string(), val);
            }
            continue;
        }
        let mut cols = line.split_whitespace();
        let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(err(format!("line {}: expected two columns", lineno + 1)));
        };
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| err(format!("line {}: bad number `{s}`", lineno + 1)))
        };
        let x = parse(a)?;
        if let Some(&prev) = r.last() {
            if !(x > prev) {
                return Err(err(format!(
                    "line {}: R = {x} not above previous {prev}",
                    lineno + 1
                )));
            }
        }
        r.push(x);
        v.push(parse(b)?);
    }
    let label = header
        .get("label")
        .ok_or_else(|| err("missing header key `label`".into()))?
        .clone();
    let unit_r = Unit::parse_length(
        header
            .get("unit_R")
            .ok_or_else(|| err("missing header key `unit_R`".into()))?,
    )?;
    let unit_v = Unit::parse_energy(
        header
            .get("unit_V")
            .ok_or_else(|| err("missing header key `unit_V`".into()))?,
    )?;
    let r: Vec<f64> = r
        .into_iter()
        .map(|x| convert(x, unit_r, Unit::Bohr))
        .collect::<Result<_>>()?;
    let v: Vec<f64> = v
        .into_iter()
        .map(|x| convert(x, unit_v, Unit::Hartree))
        .collect::<Result<_>>()?;
    let number = |key: &str| -> Result<Option<f64>> {
        header
            .get(key)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| err(format!("header `{key}` is not a number")))
            })
            .transpose()
    };
    let asymptote = number("asymptote")?
        .map(|a| convert(a, unit_v, Unit::Hartree))
        .transpose()?;
    let mut curve = PotentialCurve::sampled(&label, r, v, asymptote).map_err(|e| match e {
        Error::CurveFormat { message, .. } => err(message),
        other => other,
    })?;
    for n in [6u32, 8, 10] {
        if let Some(c) = number(&format!("C{n}"))? {
            curve.long_range.insert(n, c);
        }
    }
    if let Some(lambda) = number("lambda_nm")? {
        curve.omega_l = Some(units::wavelength_nm_to_hartree(lambda));
    }
    Ok(curve)
}

/// Write a sampled curve in the file format (R in bohr, V in `unit_v`).
pub fn write_curve(curve: &PotentialCurve, path: impl AsRef<Path>, unit_v: Unit) -> Result<()> {
    std::fs::write(path, format_curve(curve, unit_v)?)?;
    Ok(())
}

pub fn format_curve(curve: &PotentialCurve, unit_v: Unit) -> Result<String> {
    let CurveModel::Sampled { r, v, .. } = &curve.model else {
        return Err(Error::InvalidParameter(format!(
            "curve `{}` is analytic; tabulate it first",
            curve.label
        )));
    };
    let mut out = String::new();
    let _ = writeln!(out, "# label = {}", curve.label);
    let _ = writeln!(out, "# unit_R = bohr");
    let _ = writeln!(out, "# unit_V = {}", unit_v.tag());
    let _ = writeln!(
        out,
        "# asymptote = {:.17e}",
        convert(curve.asymptote, Unit::Hartree, unit_v)?
    );
    for (n, c) in &curve.long_range {
        let _ = writeln!(out, "# C{n} = {c:.17e}");
    }
    if let Some(w) = curve.omega_l {
        let _ = writeln!(
            out,
            "# lambda_nm = {:.17e}",
            1e7 / (w * units::HARTREE_IN_WAVENUMBER)
        );
    }
    for (x, y) in r.iter().zip(v) {
        let _ = writeln!(
            out,
            "{:.17e} {:.17e}",
            x,
            convert(*y, Unit::Hartree, unit_v)?
        );
    }
    Ok(out)
}

/// Diabatic 2×2 block produced by [`diabatize`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiabaticBlock {
    pub v11: Vec<f64>,
    pub v22: Vec<f64>,
    pub v12: Vec<f64>,
    /// Mixing angle ζ(R) on the grid.
    pub zeta: Vec<f64>,
}

/// Largest |τ(r_max)| (1/bohr) accepted as "decayed" at the grid end.
pub const TAU_END_TOLERANCE: f64 = 1e-4;

/// Rotate an adiabatic pair by ζ(R) = ∫_R^{r_max} τ dR′ (trapezoid from the grid end).
pub fn diabatize(
    v_ad_1: &[f64],
    v_ad_2: &[f64],
    tau: &[f64],
    grid: &RadialGrid,
) -> Result<DiabaticBlock> {
    let n = grid.n_points();
    if v_ad_1.len() != n || v_ad_2.len() != n || tau.len() != n {
        return Err(Error::Layout(
            "diabatize: arrays must match the grid".into(),
        ));
    }
    if let Some(i) = (0..n).find(|&i| v_ad_1[i] > v_ad_2[i]) {
        return Err(Error::InvalidParameter(format!(
            "adiabatic curves out of order at R = {} bohr",
            grid.point(i)
        )));
    }
    if tau[n - 1].abs() > TAU_END_TOLERANCE {
        return Err(Error::InvalidParameter(format!(
            "τ has not decayed at the grid end (τ = {:e} 1/bohr)",
            tau[n - 1]
        )));
    }
    let h = grid.spacing();
    let mut zeta = vec![0.0; n];
    for i in (0..n - 1).rev() {
        zeta[i] = zeta[i + 1] + 0.5 * h * (tau[i] + tau[i + 1]);
    }
    let mut block = DiabaticBlock {
        v11: vec![0.0; n],
        v22: vec![0.0; n],
        v12: vec![0.0; n],
        zeta,
    };
    for i in 0..n {
        let (s, c) = block.zeta[i].sin_cos();
        block.v11[i] = c * c * v_ad_1[i] + s * s * v_ad_2[i];
        block.v22[i] = s * s * v_ad_1[i] + c * c * v_ad_2[i];
        block.v12[i] = c * s * (v_ad_2[i] - v_ad_1[i]);
    }
    Ok(block)
}

/// Second-rank tensor profile contracted with the polarization vector.
#[derive(Debug, Clone)]
pub enum TensorProfile {
    /// `M_ij = M δ_ij`: contraction gives `|ε|² M = M`.
    Isotropic(PotentialCurve),
    /// Explicit components `(i, j, M_ij)`; off-diagonal entries are used for both `ij` and `ji`.
    Cartesian(Vec<(usize, usize, PotentialCurve)>),
}

impl TensorProfile {
    /// `Σ_ij ε_i ε_j M_ij(R)` on the grid.
    pub fn contract(&self, polarization: &[f64], grid: &RadialGrid) -> Result<Vec<f64>> {
        match self {
            TensorProfile::Isotropic(c) => {
                let norm: f64 = polarization.iter().map(|e| e * e).sum();
                Ok(interpolate(c, grid)?
                    .into_iter()
                    .map(|x| x * norm)
                    .collect())
            }
            TensorProfile::Cartesian(parts) => {
                let mut out = vec![0.0; grid.n_points()];
                for (i, j, c) in parts {
                    let ei = polarization.get(*i).copied().unwrap_or(0.0);
                    let ej = polarization.get(*j).copied().unwrap_or(0.0);
                    let w = if i == j { ei * ej } else { 2.0 * ei * ej };
                    if w != 0.0 {
                        for (o, x) in out.iter_mut().zip(interpolate(c, grid)?) {
                            *o += w * x;
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn omega_l(&self) -> Option<f64> {
        match self {
            TensorProfile::Isotropic(c) => c.omega_l,
            TensorProfile::Cartesian(parts) => parts.iter().find_map(|(_, _, c)| c.omega_l),
        }
    }
}

/// Polarizability traces entering the dynamic Stark shifts.
#[derive(Debug, Clone)]
pub struct StarkTraces {
    pub ground: TensorProfile,
    pub excited: TensorProfile,
    pub upper11: TensorProfile,
    pub upper22: TensorProfile,
    pub upper12: TensorProfile,
}

/// All R-dependent input data of the five-channel pump model.
///
/// When `nonadiabatic_tau` is present, `upper[0]` and `upper[1]` are read as
/// the adiabatic pair and diabatized at assembly; the resulting coupling is
/// added to `diabatic_coupling`.
#[derive(Debug, Clone)]
pub struct CurveSet {
    pub ground: PotentialCurve,
    pub excited: PotentialCurve,
    /// Diabatic 11, diabatic 22 (or adiabatic pair, see above) and (2)¹Σu⁺.
    pub upper: [PotentialCurve; 3],
    pub two_photon_moment: TensorProfile,
    pub stark: StarkTraces,
    pub dipoles: [PotentialCurve; 3],
    pub diabatic_coupling: PotentialCurve,
    pub nonadiabatic_tau: Option<PotentialCurve>,
    /// Manifest roles accepted but not used by the dynamics (triplets, spin-orbit).
    pub reserved: Vec<(String, PathBuf)>,
}

/// Channel labels in the layout of the five-channel Hamiltonian.
pub const CHANNEL_LABELS: [&str; 5] = ["X1Sg+", "(1)1Pg", "Pu_11", "Pu_22", "(2)1Su+"];

const REQUIRED_ROLES: [&str; 13] = [
    "ground", "excited", "upper1", "upper2", "upper3", "M", "alpha_g", "alpha_e", "alpha_11",
    "alpha_22", "mu1", "mu2", "mu3",
];

fn is_reserved_role(role: &str) -> bool {
    matches!(role, "W1" | "W2" | "W3") || role.starts_with("triplet")
}

impl CurveSet {
    /// Photon energy the frequency-dependent profiles were computed at, if tagged.
    pub fn omega_l(&self) -> Option<f64> {
        self.two_photon_moment
            .omega_l()
            .or_else(|| self.stark.ground.omega_l())
            .or_else(|| self.stark.excited.omega_l())
    }

    /// Refuse to run with a pulse frequency the profiles were not computed at.
    pub fn check_omega(&self, omega_l: f64, relative_tolerance: f64) -> Result<()> {
        if let Some(tag) = self.omega_l() {
            if ((omega_l - tag) / tag).abs() > relative_tolerance {
                return Err(Error::Config(format!(
                    "pulse ω_L = {omega_l:.6} hartree but M/α profiles were computed at {tag:.6} hartree"
                )));
            }
        }
        Ok(())
    }

    /// Load a manifest of `role = path` lines (paths relative to the manifest).
    pub fn load_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        let text = std::fs::read_to_string(path)?;
        let err = |message: String| Error::CurveFormat {
            path: path.display().to_string(),
            message,
        };
        let mut roles: BTreeMap<String, PathBuf> = BTreeMap::new();
        let mut reserved = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (role, file) = line
                .split_once('=')
                .ok_or_else(|| err(format!("line {}: expected `role = path`", lineno + 1)))?;
            let (role, file) = (role.trim().to_string(), base.join(file.trim()));
            if is_reserved_role(&role) {
                reserved.push((role, file));
            } else if REQUIRED_ROLES.contains(&role.as_str())
                || matches!(role.as_str(), "alpha_12" | "V12" | "tau")
            {
                roles.insert(role, file);
            } else {
                return Err(err(format!("line {}: unknown role `{role}`", lineno + 1)));
            }
        }
        for r in REQUIRED_ROLES {
            if !roles.contains_key(r) {
                return Err(err(format!("missing role `{r}`")));
            }
        }
        let get = |r: &str| load_curve(&roles[r]);
        let optional = |r: &str, fallback: &str| match roles.get(r) {
            Some(p) => load_curve(p),
            None => Ok(PotentialCurve::constant(fallback, 0.0)),
        };
        Ok(CurveSet {
            ground: get("ground")?,
            excited: get("excited")?,
            upper: [get("upper1")?, get("upper2")?, get("upper3")?],
            two_photon_moment: TensorProfile::Isotropic(get("M")?),
            stark: StarkTraces {
                ground: TensorProfile::Isotropic(get("alpha_g")?),
                excited: TensorProfile::Isotropic(get("alpha_e")?),
                upper11: TensorProfile::Isotropic(get("alpha_11")?),
                upper22: TensorProfile::Isotropic(get("alpha_22")?),
                upper12: TensorProfile::Isotropic(optional("alpha_12", "alpha_12")?),
            },
            dipoles: [get("mu1")?, get("mu2")?, get("mu3")?],
            diabatic_coupling: optional("V12", "V12")?,
            nonadiabatic_tau: roles.get("tau").map(load_curve).transpose()?,
            reserved,
        })
    }
}

/// Parameters of the analytic model-Mg₂ curve set.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMg2 {
    /// Reduced mass (electron masses); fixes the X-state Morse range parameter.
    pub mass: f64,
    /// Morse λ = √(2mD_e)/a of the X state: ⌊λ − ½⌋ + 1 bound levels.
    pub x_lambda: f64,
    pub two_photon_moment: f64,
    pub alpha_ground: f64,
    pub alpha_excited: f64,
    pub alpha_upper: f64,
    pub dipole: f64,
    /// Wavelength (nm) the M and α constants are tagged with.
    pub lambda_nm: f64,
}

impl Default for ModelMg2 {
    fn default() -> Self {
        Self {
            mass: units::mg2_reduced_mass(),
            x_lambda: 19.25,
            two_photon_moment: 20.0,
            alpha_ground: 130.0,
            alpha_excited: 170.0,
            alpha_upper: 150.0,
            dipole: 0.2,
            lambda_nm: 840.0,
        }
    }
}

fn wavenumber(x: f64) -> f64 {
    x / units::HARTREE_IN_WAVENUMBER
}

/// ¹S + ¹P asymptote of Mg₂, hartree.
pub fn mg_1p_asymptote() -> f64 {
    wavenumber(35_051.264)
}

/// ¹S + 4s ¹S asymptote of Mg₂, hartree.
pub fn mg_4s_asymptote() -> f64 {
    wavenumber(43_503.333)
}

impl ModelMg2 {
    /// Morse range parameter of the X state.
    pub fn x_range(&self) -> f64 {
        (2.0 * self.mass * wavenumber(430.0)).sqrt() / self.x_lambda
    }

    pub fn ground(&self) -> PotentialCurve {
        morse_curve("X1Sg+", wavenumber(430.0), 7.33, self.x_range(), 0.0).expect("valid Morse")
    }

    pub fn excited(&self) -> PotentialCurve {
        morse_curve(
            "(1)1Pg",
            wavenumber(18_077.0),
            5.10,
            0.33,
            mg_1p_asymptote(),
        )
        .expect("valid Morse")
    }

    /// Synthetic Πu pair: diabats d₁ (bound, ¹S+¹P) and d₂ = d₁ − Δ·tanh((R−R_c)/w)
    /// coupled by a constant c; returns (lower adiabat, upper adiabat, τ).
    pub fn upper_pair(&self) -> (PotentialCurve, PotentialCurve, PotentialCurve) {
        let (de, re, a, asym) = (wavenumber(5_395.0), 5.50, 0.6, mg_1p_asymptote());
        let (delta, width, rc, c) = (wavenumber(1_500.0), 0.5, 8.2, wavenumber(150.0));
        let d1 = move |r: f64| {
            let x = 1.0 - (-a * (r - re)).exp();
            asym + de * (x * x - 1.0)
        };
        let gap = move |r: f64| -delta * ((r - rc) / width).tanh();
        let lower = PotentialCurve::analytic("Pu_ad1", asym - delta, move |r| {
            let (m, g) = (d1(r) + 0.5 * gap(r), gap(r));
            m - (0.25 * g * g + c * c).sqrt()
        });
        let upper = PotentialCurve::analytic("Pu_ad2", asym, move |r| {
            let (m, g) = (d1(r) + 0.5 * gap(r), gap(r));
            m + (0.25 * g * g + c * c).sqrt()
        });
        let tau = PotentialCurve::analytic("tau", 0.0, move |r| {
            let x = (r - rc) / width;
            let sech2 = 1.0 / x.cosh().powi(2);
            let g = gap(r);
            c * (delta / width) * sech2 / (g * g + 4.0 * c * c)
        });
        (lower, upper, tau)
    }

    pub fn sigma_u(&self) -> PotentialCurve {
        morse_curve("(2)1Su+", wavenumber(8_262.0), 5.57, 0.5, mg_4s_asymptote())
            .expect("valid Morse")
    }

    pub fn curve_set(&self) -> CurveSet {
        let omega = units::wavelength_nm_to_hartree(self.lambda_nm);
        let iso = |label: &str, v: f64| {
            TensorProfile::Isotropic(PotentialCurve::constant(label, v).with_omega(omega))
        };
        let (lower, upper, tau) = self.upper_pair();
        CurveSet {
            ground: self.ground(),
            excited: self.excited(),
            upper: [lower, upper, self.sigma_u()],
            two_photon_moment: iso("M", self.two_photon_moment),
            stark: StarkTraces {
                ground: iso("alpha_g", self.alpha_ground),
                excited: iso("alpha_e", self.alpha_excited),
                upper11: iso("alpha_11", self.alpha_upper),
                upper22: iso("alpha_22", self.alpha_upper),
                upper12: iso("alpha_12", 0.0),
            },
            dipoles: [
                PotentialCurve::constant("mu1", self.dipole),
                PotentialCurve::constant("mu2", self.dipole),
                PotentialCurve::constant("mu3", self.dipole),
            ],
            diabatic_coupling: PotentialCurve::constant("V12", 0.0),
            nonadiabatic_tau: Some(tau),
            reserved: Vec::new(),
        }
    }
}

/// The shipped analytic model with default parameters.
pub fn model_mg2() -> CurveSet {
    ModelMg2::default().curve_set()
}

/// Lorentzian `τ(R)` centred at `rc` with total area `area`.
pub fn lorentzian_tau(label: &str, rc: f64, half_width: f64, area: f64) -> PotentialCurve {
    PotentialCurve::analytic(label, 0.0, move |r| {
        area * half_width / PI / ((r - rc).powi(2) + half_width * half_width)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn morse_minimum_and_limit() {
        let c = morse_curve("m", 0.01, 3.0, 1.1, 0.2).unwrap();
        assert!((c.evaluate(3.0).unwrap() - 0.19).abs() < 1e-15);
        assert!((c.evaluate(200.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(morse_curve("m", -1.0, 3.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn spline_reproduces_nodes_and_lines() {
        let r: Vec<f64> = (0..12).map(|i| 1.0 + 0.37 * i as f64).collect();
        let v: Vec<f64> = r.iter().map(|x| 2.0 - 0.5 * x).collect();
        let c = PotentialCurve::sampled("lin", r.clone(), v.clone(), None).unwrap();
        for (x, y) in r.iter().zip(&v) {
            assert_eq!(c.evaluate(*x).unwrap(), *y);
        }
        for i in 0..100 {
            let x = 1.0 + 0.0407 * i as f64;
            assert!((c.evaluate(x).unwrap() - (2.0 - 0.5 * x)).abs() < 1e-12);
        }
        assert!(c.evaluate(0.5).is_err());
    }

    #[test]
    fn decreasing_rows_rejected_with_line() {
        let text = "# label = a\n# unit_R = bohr\n# unit_V = hartree\n1 0\n2 0\n1.5 0\n";
        let e = parse_curve(text, "t").unwrap_err().to_string();
        assert!(e.contains("line 6"), "{e}");
    }

    #[test]
    fn missing_header_rejected() {
        assert!(parse_curve("# unit_R = bohr\n# unit_V = hartree\n1 0\n", "t").is_err());
        assert!(parse_curve(
            "# label = a\n# unit_R = bohr\n# unit_V = parsec\n1 0\n",
            "t"
        )
        .is_err());
    }

    #[test]
    fn identity_diabatization() {
        let g = RadialGrid::new(2.0, 20.0, 50).unwrap();
        let v1: Vec<f64> = g.points().iter().map(|r| -1.0 / r).collect();
        let v2: Vec<f64> = g.points().iter().map(|r| 1.0 / r).collect();
        let b = diabatize(&v1, &v2, &vec![0.0; 50], &g).unwrap();
        assert_eq!(b.v11, v1);
        assert_eq!(b.v22, v2);
        assert!(b.v12.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn model_upper_pair_ordered() {
        let m = ModelMg2::default();
        let (lo, hi, _) = m.upper_pair();
        for i in 0..400 {
            let r = 2.0 + 0.1 * i as f64;
            assert!(lo.evaluate(r).unwrap() < hi.evaluate(r).unwrap());
        }
    }
}
