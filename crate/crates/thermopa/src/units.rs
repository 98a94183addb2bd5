//! Physical constants and unit conversions.
//!
//! Everything inside the engine is in atomic units (hartree, bohr, ħ = mₑ = e = 1).
//! This module is the only place numeric conversion factors appear; the
//! `constant_literals` test greps the rest of the crate to keep it that way.

use crate::error::{Error, Result};

/// Revision tag of the constants table, recorded in every run manifest.
pub const CONSTANTS_REVISION: &str = "CODATA-2018";

/// Hartree energy in cm⁻¹.
pub const HARTREE_IN_WAVENUMBER: f64 = 219_474.631_363_2;
/// Hartree energy in eV.
pub const HARTREE_IN_EV: f64 = 27.211_386_245_988;
/// Hartree energy divided by k_B, in kelvin.
pub const HARTREE_IN_KELVIN: f64 = 315_775.024_804_07;
/// Bohr radius in ångström.
pub const BOHR_IN_ANGSTROM: f64 = 0.529_177_210_903;
/// Bohr radius in centimetres.
pub const BOHR_IN_CM: f64 = BOHR_IN_ANGSTROM * 1e-8;
/// Atomic unit of time in femtoseconds.
pub const AU_TIME_IN_FS: f64 = 2.418_884_326_585_7e-2;
/// Atomic unit of time in nanoseconds.
pub const AU_TIME_IN_NS: f64 = AU_TIME_IN_FS * 1e-6;
/// Atomic unit of electric field in V/m.
pub const AU_FIELD_IN_V_PER_M: f64 = 5.142_206_747_63e11;
/// Vacuum permittivity in F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Speed of light in m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Unified atomic mass unit in electron masses.
pub const AMU_IN_ELECTRON_MASS: f64 = 1_822.888_486_209;
/// Mass of ²⁴Mg in unified atomic mass units.
pub const MG24_MASS_AMU: f64 = 23.985_041_697;

/// Cycle-averaged intensity ½ε₀cE² of a field of one atomic unit, in W/cm².
pub fn atomic_intensity_w_cm2() -> f64 {
    0.5 * VACUUM_PERMITTIVITY * SPEED_OF_LIGHT * AU_FIELD_IN_V_PER_M * AU_FIELD_IN_V_PER_M * 1e-4
}

/// Peak field amplitude (a.u.) for a cycle-averaged peak intensity in W/cm².
pub fn intensity_to_field(intensity_w_cm2: f64) -> f64 {
    (intensity_w_cm2.max(0.0) / atomic_intensity_w_cm2()).sqrt()
}

/// Inverse of [`intensity_to_field`].
pub fn field_to_intensity(field_au: f64) -> f64 {
    field_au * field_au * atomic_intensity_w_cm2()
}

/// Photon energy (hartree) of light with vacuum wavelength in nm.
pub fn wavelength_nm_to_hartree(lambda_nm: f64) -> f64 {
    1e7 / lambda_nm / HARTREE_IN_WAVENUMBER
}

/// Inverse temperature β = 1/k_BT in 1/hartree.
pub fn beta_from_kelvin(temperature_k: f64) -> f64 {
    HARTREE_IN_KELVIN / temperature_k
}

/// k_BT in hartree.
pub fn kt_hartree(temperature_k: f64) -> f64 {
    temperature_k / HARTREE_IN_KELVIN
}

/// Reduced mass of a homonuclear dimer, in electron masses.
pub fn homonuclear_reduced_mass(atom_mass_amu: f64) -> f64 {
    0.5 * atom_mass_amu * AMU_IN_ELECTRON_MASS
}

/// Reduced mass of ²⁴Mg₂ in electron masses.
pub fn mg2_reduced_mass() -> f64 {
    homonuclear_reduced_mass(MG24_MASS_AMU)
}

/// Physical dimension of a [`Unit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Energy,
    Length,
    Time,
}

/// Units understood by [`convert`] and by the curve file headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Hartree,
    Wavenumber,
    ElectronVolt,
    Kelvin,
    Bohr,
    Angstrom,
    AtomicTime,
    Femtosecond,
    Nanosecond,
}

impl Unit {
    pub fn dimension(self) -> Dimension {
        match self {
            Unit::Hartree | Unit::Wavenumber | Unit::ElectronVolt | Unit::Kelvin => {
                Dimension::Energy
            }
            Unit::Bohr | Unit::Angstrom => Dimension::Length,
            Unit::AtomicTime | Unit::Femtosecond | Unit::Nanosecond => Dimension::Time,
        }
    }

    /// Size of one of this unit expressed in the atomic unit of its dimension.
    fn in_atomic(self) -> f64 {
        match self {
            Unit::Hartree | Unit::Bohr | Unit::AtomicTime => 1.0,
            Unit::Wavenumber => 1.0 / HARTREE_IN_WAVENUMBER,
            Unit::ElectronVolt => 1.0 / HARTREE_IN_EV,
            Unit::Kelvin => 1.0 / HARTREE_IN_KELVIN,
            Unit::Angstrom => 1.0 / BOHR_IN_ANGSTROM,
            Unit::Femtosecond => 1.0 / AU_TIME_IN_FS,
            Unit::Nanosecond => 1.0 / AU_TIME_IN_NS,
        }
    }

    /// Parse an energy tag as used in curve headers (`hartree|au|cm-1|eV|K`).
    pub fn parse_energy(tag: &str) -> Result<Unit> {
        match tag.trim() {
            "hartree" | "au" | "Eh" => Ok(Unit::Hartree),
            "cm-1" | "cm^-1" => Ok(Unit::Wavenumber),
            "eV" | "ev" => Ok(Unit::ElectronVolt),
            "K" => Ok(Unit::Kelvin),
            other => Err(Error::UnknownUnit(other.to_string())),
        }
    }

    /// Parse a length tag (`bohr|au|angstrom`).
    pub fn parse_length(tag: &str) -> Result<Unit> {
        match tag.trim() {
            "bohr" | "au" => Ok(Unit::Bohr),
            "angstrom" | "Angstrom" | "A" => Ok(Unit::Angstrom),
            other => Err(Error::UnknownUnit(other.to_string())),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Unit::Hartree => "hartree",
            Unit::Wavenumber => "cm-1",
            Unit::ElectronVolt => "eV",
            Unit::Kelvin => "K",
            Unit::Bohr => "bohr",
            Unit::Angstrom => "angstrom",
            Unit::AtomicTime => "au",
            Unit::Femtosecond => "fs",
            Unit::Nanosecond => "ns",
        }
    }
}

/// Convert `value` between two units of the same dimension.
///
/// ```
/// use thermopa::units::{convert, Unit};
/// let cm = convert(1.0, Unit::Hartree, Unit::Wavenumber).unwrap();
/// assert!((cm - 219_474.631_363_2).abs() < 1e-6);
/// assert!(convert(1.0, Unit::Hartree, Unit::Bohr).is_err());
/// ```
pub fn convert(value: f64, from: Unit, to: Unit) -> Result<f64> {
    if from.dimension() != to.dimension() {
        return Err(Error::UnitMismatch {
            from: from.tag(),
            to: to.tag(),
        });
    }
    if from == to {
        return Ok(value);
    }
    Ok(value * from.in_atomic() / to.in_atomic())
}
