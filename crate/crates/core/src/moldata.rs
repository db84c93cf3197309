//! Molecular and cavity constants, system configuration files, and unit
//! conversions.
//!
//! Energies are stored in cm^-1 relative to the sum of the molecular
//! vibrational ground states; the photonic zero-point energy is dropped.
//! Dipole matrix elements are in atomic units. The cavity coupling `g` is
//! quoted for a reference molecule as `mu_00(ref) * sqrt(hbar omega / eps0 V)`,
//! so the field amplitude per unit dipole is `g / mu_00(ref)`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1 hartree in cm^-1 (CODATA 2018).
pub const HARTREE_TO_CM: f64 = 219_474.631_363_20;
/// 1 hartree in eV (CODATA 2018).
pub const HARTREE_TO_EV: f64 = 27.211_386_245_988;
/// Atomic unit of time in fs (CODATA 2018).
pub const AU_TIME_FS: f64 = 0.024_188_843_265_857;
/// Atomic unit of electric field in V/m (CODATA 2018).
pub const AU_FIELD_V_PER_M: f64 = 5.142_206_747_63e11;
/// Speed of light in cm/s.
pub const SPEED_OF_LIGHT_CM_S: f64 = 2.997_924_58e10;
/// Angular frequency (rad/fs) of a 1 cm^-1 energy: 2 pi c.
pub const CM_TO_RAD_PER_FS: f64 = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_CM_S * 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Wavenumber,
    Hartree,
    ElectronVolt,
    Femtosecond,
    Picosecond,
    AuTime,
    AuField,
    VoltPerMeter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    Energy,
    Time,
    Field,
}

impl Unit {
    fn dimension(self) -> Dimension {
        match self {
            Unit::Wavenumber | Unit::Hartree | Unit::ElectronVolt => Dimension::Energy,
            Unit::Femtosecond | Unit::Picosecond | Unit::AuTime => Dimension::Time,
            Unit::AuField | Unit::VoltPerMeter => Dimension::Field,
        }
    }

    /// Size of one unit expressed in the atomic unit of its dimension.
    fn in_atomic_units(self) -> f64 {
        match self {
            Unit::Wavenumber => 1.0 / HARTREE_TO_CM,
            Unit::Hartree => 1.0,
            Unit::ElectronVolt => 1.0 / HARTREE_TO_EV,
            Unit::Femtosecond => 1.0 / AU_TIME_FS,
            Unit::Picosecond => 1e3 / AU_TIME_FS,
            Unit::AuTime => 1.0,
            Unit::AuField => 1.0,
            Unit::VoltPerMeter => 1.0 / AU_FIELD_V_PER_M,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Unit::Wavenumber => "cm-1",
            Unit::Hartree => "hartree",
            Unit::ElectronVolt => "eV",
            Unit::Femtosecond => "fs",
            Unit::Picosecond => "ps",
            Unit::AuTime => "au_time",
            Unit::AuField => "au_field",
            Unit::VoltPerMeter => "V/m",
        };
        f.write_str(s)
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cm-1" | "cm^-1" | "wavenumber" => Unit::Wavenumber,
            "hartree" | "Eh" => Unit::Hartree,
            "eV" | "ev" => Unit::ElectronVolt,
            "fs" => Unit::Femtosecond,
            "ps" => Unit::Picosecond,
            "au_time" | "a.u.-time" => Unit::AuTime,
            "au_field" | "a.u.-field" => Unit::AuField,
            "V/m" => Unit::VoltPerMeter,
            other => {
                return Err(Error::UnitPair {
                    from: other.to_string(),
                    to: "?".to_string(),
                })
            }
        })
    }
}

/// Converts `value` between two units of the same dimension.
pub fn convert(value: f64, from: Unit, to: Unit) -> Result<f64> {
    if from.dimension() != to.dimension() {
        return Err(Error::UnitPair {
            from: from.to_string(),
            to: to.to_string(),
        });
    }
    if from == to {
        return Ok(value);
    }
    Ok(value * from.in_atomic_units() / to.in_atomic_units())
}

/// Per-isotopologue constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSpec {
    pub label: String,
    /// Vibrational term values (cm^-1), offsets from this molecule's v = 0.
    #[serde(rename = "E_vib_cm1")]
    pub e_vib: Vec<f64>,
    /// Rotational constants B_v (cm^-1).
    #[serde(rename = "B_cm1")]
    pub b_rot: Vec<f64>,
    /// Vibrational dipole matrix <v|mu|v'> (a.u.).
    #[serde(rename = "mu_au")]
    pub mu: Vec<Vec<f64>>,
}

impl MoleculeSpec {
    pub fn n_vib(&self) -> usize {
        self.e_vib.len()
    }

    /// Field-free rovibrational energy E_vib(v) + B_v J(J+1).
    pub fn rovib_energy(&self, v: u32, j: u32) -> f64 {
        self.e_vib[v as usize] + crate::angular::rot_energy(self.b_rot[v as usize], j)
    }

    pub fn dipole(&self, v: u32, vp: u32) -> f64 {
        self.mu[v as usize][vp as usize]
    }

    fn validate(&self, path: &str) -> Result<()> {
        let n = self.e_vib.len();
        if n == 0 {
            return Err(Error::config(format!("{path}.E_vib_cm1"), "must not be empty"));
        }
        if self.b_rot.len() != n {
            return Err(Error::config(
                format!("{path}.B_cm1"),
                format!("expected {n} entries, found {}", self.b_rot.len()),
            ));
        }
        for (v, b) in self.b_rot.iter().enumerate() {
            if !(b.is_finite() && *b > 0.0) {
                return Err(Error::config(
                    format!("{path}.B_cm1[{v}]"),
                    format!("rotational constant must be positive, got {b}"),
                ));
            }
        }
        for (v, e) in self.e_vib.iter().enumerate() {
            if !e.is_finite() {
                return Err(Error::config(format!("{path}.E_vib_cm1[{v}]"), "not finite"));
            }
        }
        if self.mu.len() != n {
            return Err(Error::config(
                format!("{path}.mu_au"),
                format!("expected {n} rows, found {}", self.mu.len()),
            ));
        }
        for (r, row) in self.mu.iter().enumerate() {
            if row.len() != n {
                return Err(Error::config(
                    format!("{path}.mu_au[{r}]"),
                    format!("expected {n} columns, found {}", row.len()),
                ));
            }
        }
        for r in 0..n {
            for c in 0..r {
                let (a, b) = (self.mu[r][c], self.mu[c][r]);
                if !a.is_finite() || a != b {
                    return Err(Error::config(
                        format!("{path}.mu_au[{r}][{c}]"),
                        format!("dipole matrix must be symmetric: {a} vs mu_au[{c}][{r}] = {b}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavitySpec {
    /// Photon energy hbar omega_c (cm^-1).
    #[serde(rename = "omega_c_cm1")]
    pub omega_c: f64,
    /// mu_00(reference) * sqrt(hbar omega_c / eps0 V), in cm^-1.
    #[serde(rename = "g_cm1")]
    pub g: f64,
    #[serde(rename = "N_max")]
    pub n_max: u32,
    /// Index of the molecule whose mu_00 defines `g`.
    #[serde(default)]
    pub reference: usize,
    /// Keeps the diagonal (permanent) dipole terms in the cavity coupling.
    #[serde(default = "default_true")]
    pub permanent_dipole_coupling: bool,
}

fn default_true() -> bool {
    true
}

/// Restriction on the space-fixed projections M_i.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MRestriction {
    /// Every M_i = 0.
    AllZero,
    /// sum_i M_i equals the given value.
    Total(i32),
    /// No restriction.
    Free,
}

impl Serialize for MRestriction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MRestriction::AllZero => s.serialize_str("all_zero"),
            MRestriction::Free => s.serialize_str("free"),
            MRestriction::Total(m) => s.serialize_i32(*m),
        }
    }
}

impl<'de> Deserialize<'de> for MRestriction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Total(i32),
            Keyword(String),
        }
        match Raw::deserialize(d)? {
            Raw::Total(m) => Ok(MRestriction::Total(m)),
            Raw::Keyword(k) => match k.as_str() {
                "all_zero" => Ok(MRestriction::AllZero),
                "free" => Ok(MRestriction::Free),
                other => Err(serde::de::Error::custom(format!(
                    "M_total must be an integer, \"all_zero\" or \"free\", got \"{other}\""
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum PerMolecule {
    Uniform(u32),
    List(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct RawTruncation {
    v_max: PerMolecule,
    #[serde(rename = "J_max")]
    j_max: PerMolecule,
    #[serde(rename = "M_total", default = "default_m")]
    m: MRestriction,
}

fn default_m() -> MRestriction {
    MRestriction::AllZero
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truncation {
    pub v_max: Vec<u32>,
    #[serde(rename = "J_max")]
    pub j_max: Vec<u32>,
    #[serde(rename = "M_total")]
    pub m: MRestriction,
}

impl Truncation {
    pub fn uniform(n_mol: usize, v_max: u32, j_max: u32, m: MRestriction) -> Self {
        Self {
            v_max: vec![v_max; n_mol],
            j_max: vec![j_max; n_mol],
            m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct RawSystem {
    molecules: Vec<MoleculeSpec>,
    cavity: CavitySpec,
    truncation: RawTruncation,
}

/// A validated molecules + cavity + basis-truncation description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSpec {
    pub molecules: Vec<MoleculeSpec>,
    pub cavity: CavitySpec,
    pub truncation: Truncation,
}

impl<'de> Deserialize<'de> for SystemSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawSystem::deserialize(d)?;
        SystemSpec::from_raw(raw).map_err(serde::de::Error::custom)
    }
}

impl SystemSpec {
    fn from_raw(raw: RawSystem) -> Result<Self> {
        let n_mol = raw.molecules.len();
        let expand = |p: PerMolecule, field: &str| -> Result<Vec<u32>> {
            match p {
                PerMolecule::Uniform(x) => Ok(vec![x; n_mol]),
                PerMolecule::List(xs) if xs.len() == n_mol => Ok(xs),
                PerMolecule::List(xs) => Err(Error::config(
                    format!("truncation.{field}"),
                    format!("expected {n_mol} entries, found {}", xs.len()),
                )),
            }
        };
        let truncation = Truncation {
            v_max: expand(raw.truncation.v_max, "v_max")?,
            j_max: expand(raw.truncation.j_max, "J_max")?,
            m: raw.truncation.m,
        };
        let spec = SystemSpec {
            molecules: raw.molecules,
            cavity: raw.cavity,
            truncation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.molecules.is_empty() {
            return Err(Error::config("molecules", "at least one molecule is required"));
        }
        for (i, m) in self.molecules.iter().enumerate() {
            m.validate(&format!("molecules[{i}]"))?;
        }
        let c = &self.cavity;
        if !(c.omega_c.is_finite() && c.omega_c > 0.0) {
            return Err(Error::config("cavity.omega_c_cm1", "must be positive"));
        }
        if !(c.g.is_finite() && c.g >= 0.0) {
            return Err(Error::config("cavity.g_cm1", "must be non-negative"));
        }
        if c.n_max < 1 {
            return Err(Error::config("cavity.N_max", "must be at least 1"));
        }
        if c.reference >= self.molecules.len() {
            return Err(Error::config(
                "cavity.reference",
                format!("no molecule with index {}", c.reference),
            ));
        }
        let mu_ref = self.molecules[c.reference].mu[0][0];
        if mu_ref == 0.0 {
            return Err(Error::config(
                format!("molecules[{}].mu_au[0][0]", c.reference),
                "reference molecule needs a nonzero permanent dipole",
            ));
        }
        let t = &self.truncation;
        let n_mol = self.molecules.len();
        if t.v_max.len() != n_mol || t.j_max.len() != n_mol {
            return Err(Error::config("truncation", "per-molecule lists must match molecules"));
        }
        for (i, (&v, m)) in t.v_max.iter().zip(&self.molecules).enumerate() {
            if v as usize >= m.n_vib() {
                return Err(Error::config(
                    format!("truncation.v_max[{i}]"),
                    format!("v_max = {v} but molecule provides {} vibrational levels", m.n_vib()),
                ));
            }
        }
        Ok(())
    }

    pub fn n_mol(&self) -> usize {
        self.molecules.len()
    }

    /// sqrt(hbar omega_c / eps0 V) in cm^-1 per a.u. of dipole.
    pub fn field_per_dipole(&self) -> f64 {
        self.cavity.g / self.molecules[self.cavity.reference].mu[0][0]
    }

    /// Cavity coupling prefactor for molecule `i` between vibrational levels,
    /// i.e. g * mu^(i)_{v v'} / mu_00(ref), in cm^-1. Honors the permanent
    /// dipole switch.
    pub fn cavity_coupling(&self, i: usize, v: u32, vp: u32) -> f64 {
        if v == vp && !self.cavity.permanent_dipole_coupling {
            return 0.0;
        }
        self.field_per_dipole() * self.molecules[i].dipole(v, vp)
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.cavity.g = g;
        self
    }

    pub fn with_truncation(mut self, n_max: u32, v_max: u32, j_max: u32, m: MRestriction) -> Self {
        self.cavity.n_max = n_max;
        self.truncation = Truncation::uniform(self.molecules.len(), v_max, j_max, m);
        self
    }

    /// Two molecules with identical constants (exchange is a symmetry of H).
    pub fn has_identical_pair(&self) -> bool {
        self.molecules.len() == 2
            && self.molecules[0].e_vib == self.molecules[1].e_vib
            && self.molecules[0].b_rot == self.molecules[1].b_rot
            && self.molecules[0].mu == self.molecules[1].mu
            && self.truncation.v_max[0] == self.truncation.v_max[1]
            && self.truncation.j_max[0] == self.truncation.j_max[1]
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawSystem = serde_json::from_str(text)?;
        Self::from_raw(raw)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Reads and validates a system configuration file.
pub fn load_system(path: impl AsRef<Path>) -> Result<SystemSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let raw: RawSystem = serde_json::from_str(&text).map_err(|source| Error::Parse {
        file: path.to_path_buf(),
        source,
    })?;
    SystemSpec::from_raw(raw)
}

/// The bundled HCl isotopologue configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundledSystem {
    /// H35Cl + H37Cl.
    Mixed,
    /// 2 x H35Cl.
    Identical,
    /// 2 x H37Cl.
    Hcl37Pair,
}

impl BundledSystem {
    pub fn file_name(self) -> &'static str {
        match self {
            BundledSystem::Mixed => "hcl35_hcl37.json",
            BundledSystem::Identical => "hcl35_hcl35.json",
            BundledSystem::Hcl37Pair => "hcl37_hcl37.json",
        }
    }

    pub fn json(self) -> &'static str {
        match self {
            BundledSystem::Mixed => include_str!("../data/hcl35_hcl37.json"),
            BundledSystem::Identical => include_str!("../data/hcl35_hcl35.json"),
            BundledSystem::Hcl37Pair => include_str!("../data/hcl37_hcl37.json"),
        }
    }

    pub fn spec(self) -> SystemSpec {
        SystemSpec::from_json_str(self.json()).expect("bundled configuration is valid")
    }
}

impl FromStr for BundledSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(BundledSystem::Mixed),
            "identical" => Ok(BundledSystem::Identical),
            "hcl37" | "hcl37_pair" => Ok(BundledSystem::Hcl37Pair),
            other => Err(Error::InvalidArgument(format!(
                "unknown system `{other}` (expected mixed, identical or hcl37)"
            ))),
        }
    }
}
