//! Light-dressed absorption spectra: first-order transition strengths
//! |<Psi_l| d_z |Psi_k>|^2 between polaritons, colored by the final state's
//! character, and broadened envelopes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{assemble_dipole_z, assemble_h, enumerate_basis};
use crate::moldata::SystemSpec;
use crate::polaritons::{diagonalize_sector, DiagonalizeOptions, PolaritonState, Selection, Solver};
use crate::sparse::SparseSymMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumLine {
    /// E_l - E_k, cm^-1.
    pub wavenumber: f64,
    /// |<Psi_l| d_z |Psi_k>|^2, a.u.^2.
    pub intensity: f64,
    /// Final-state weights (molecule 1, molecule 2, photonic) renormalized
    /// over the excited classes.
    pub character_rgb: [f64; 3],
    /// Index of the final state in the list it came from.
    pub final_index: usize,
}

/// Transition lines from `initial` to each of `states` with E_l - E_k inside
/// `window` (inclusive), in ascending wavenumber.
pub fn stick_spectrum(
    initial: &PolaritonState,
    states: &[PolaritonState],
    dipole: &SparseSymMatrix,
    window: Option<(f64, f64)>,
) -> Vec<SpectrumLine> {
    let mut d_psi = vec![0.0; dipole.dim()];
    dipole.to_csr().matvec(&initial.coeffs, &mut d_psi);
    let mut lines: Vec<SpectrumLine> = states
        .iter()
        .enumerate()
        .filter_map(|(l, s)| {
            let wavenumber = s.energy - initial.energy;
            if let Some((lo, hi)) = window {
                if wavenumber < lo || wavenumber > hi {
                    return None;
                }
            }
            let amp: f64 = s.coeffs.iter().zip(&d_psi).map(|(a, b)| a * b).sum();
            let w = s.character.excited_weights();
            let rgb = [
                w.first().copied().unwrap_or(0.0),
                w.get(1).copied().filter(|_| w.len() > 2).unwrap_or(0.0),
                w.last().copied().unwrap_or(0.0),
            ];
            Some(SpectrumLine {
                wavenumber,
                intensity: amp * amp,
                character_rgb: rgb,
                final_index: l,
            })
        })
        .collect();
    lines.sort_by(|a, b| a.wavenumber.total_cmp(&b.wavenumber));
    lines
}

/// (sum of line intensities over every state, <Psi_k| d_z^2 |Psi_k>).
pub fn sum_rule(initial: &PolaritonState, states: &[PolaritonState], dipole: &SparseSymMatrix) -> (f64, f64) {
    let total: f64 = stick_spectrum(initial, states, dipole, None)
        .iter()
        .map(|l| l.intensity)
        .sum();
    let mut d_psi = vec![0.0; dipole.dim()];
    dipole.to_csr().matvec(&initial.coeffs, &mut d_psi);
    (total, d_psi.iter().map(|x| x * x).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineShape {
    Gaussian,
    Lorentzian,
}

impl std::str::FromStr for LineShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(LineShape::Gaussian),
            "lorentzian" => Ok(LineShape::Lorentzian),
            other => Err(Error::InvalidArgument(format!("unknown line shape `{other}`"))),
        }
    }
}

impl LineShape {
    /// Unit-area profile of width `fwhm` evaluated at offset `x`.
    pub fn profile(self, x: f64, fwhm: f64) -> f64 {
        match self {
            LineShape::Gaussian => {
                let ln2 = std::f64::consts::LN_2;
                2.0 * (ln2 / std::f64::consts::PI).sqrt() / fwhm * (-4.0 * ln2 * x * x / (fwhm * fwhm)).exp()
            }
            LineShape::Lorentzian => {
                let g = 0.5 * fwhm;
                g / (std::f64::consts::PI * (x * x + g * g))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub wavenumbers: Vec<f64>,
    pub values: Vec<f64>,
}

impl Envelope {
    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "wavenumber,intensity")?;
        for (x, y) in self.wavenumbers.iter().zip(&self.values) {
            writeln!(w, "{x:.6},{y:.12e}")?;
        }
        Ok(())
    }
}

/// Sum of intensity-weighted line shapes on the grid lo, lo + step, ..., <= hi.
pub fn envelope(lines: &[SpectrumLine], fwhm: f64, shape: LineShape, range: (f64, f64), step: f64) -> Result<Envelope> {
    if !(fwhm > 0.0 && step > 0.0) || range.1 < range.0 {
        return Err(Error::InvalidArgument(format!(
            "envelope needs fwhm > 0, step > 0 and an ordered range (fwhm {fwhm}, step {step}, range {range:?})"
        )));
    }
    let n = ((range.1 - range.0) / step + 1e-9).floor() as usize + 1;
    let wavenumbers: Vec<f64> = (0..n).map(|i| range.0 + i as f64 * step).collect();
    let values = wavenumbers
        .iter()
        .map(|&x| {
            lines
                .iter()
                .map(|l| l.intensity * shape.profile(x - l.wavenumber, fwhm))
                .sum()
        })
        .collect();
    Ok(Envelope { wavenumbers, values })
}

pub fn write_sticks_csv(lines: &[SpectrumLine], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "wavenumber,intensity,w_mol1,w_mol2,w_phot")?;
    for l in lines {
        writeln!(
            w,
            "{:.6},{:.12e},{:.6},{:.6},{:.6}",
            l.wavenumber, l.intensity, l.character_rgb[0], l.character_rgb[1], l.character_rgb[2]
        )?;
    }
    Ok(())
}

/// Ground polariton and the full parity sector reachable from it by d_z.
#[derive(Debug, Clone)]
pub struct AbsorptionData {
    pub ground: PolaritonState,
    pub finals: Vec<PolaritonState>,
    pub dipole: SparseSymMatrix,
}

impl AbsorptionData {
    pub fn lines(&self, window: Option<(f64, f64)>) -> Vec<SpectrumLine> {
        stick_spectrum(&self.ground, &self.finals, &self.dipole, window)
    }

    pub fn sum_rule(&self) -> (f64, f64) {
        sum_rule(&self.ground, &self.finals, &self.dipole)
    }
}

/// Builds the Hamiltonian of `spec`, finds its ground polariton and fully
/// diagonalizes the opposite-parity sector, which holds every final state d_z
/// connects to.
pub fn absorption_from_ground(spec: &SystemSpec) -> Result<AbsorptionData> {
    let basis = enumerate_basis(spec)?;
    let h = assemble_h(spec, &basis)?;
    let dipole = assemble_dipole_z(spec, &basis)?;
    let lowest = |parity: i8| -> Result<Option<PolaritonState>> {
        let opts = DiagonalizeOptions {
            selection: Selection::Lowest(1),
            solver: Solver::Lanczos,
            ..DiagonalizeOptions::default()
        };
        Ok(diagonalize_sector(&h, &basis, parity, opts)?.into_iter().next())
    };
    let (even, odd) = (lowest(1)?, lowest(-1)?);
    let (ground, parity) = match (even, odd) {
        (Some(e), Some(o)) if o.energy < e.energy => (o, -1),
        (Some(e), _) => (e, 1),
        (None, Some(o)) => (o, -1),
        (None, None) => return Err(Error::EmptyBasis),
    };
    let finals = diagonalize_sector(
        &h,
        &basis,
        -parity,
        DiagonalizeOptions {
            selection: Selection::All,
            solver: Solver::Dense,
            ..DiagonalizeOptions::default()
        },
    )?;
    Ok(AbsorptionData { ground, finals, dipole })
}
