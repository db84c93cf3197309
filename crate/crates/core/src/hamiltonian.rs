//! Direct-product (diabatic) basis |N> prod_i |v_i J_i M_i> and the operators
//! expressed in it: the molecule-cavity Hamiltonian, the space-fixed z
//! dipole, and single-molecule orientation operators.
//!
//! Selection rules: every off-diagonal element changes exactly one molecule,
//! conserves its M, and moves its J by one. Cavity terms also change the
//! photon number by one; dipole and orientation terms keep it.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::CosThetaTable;
use crate::error::{Error, Result};
use crate::moldata::{MRestriction, SystemSpec};
use crate::sparse::SparseSymMatrix;

/// Rovibrational quantum numbers of one molecule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MolState {
    pub v: u32,
    pub j: u32,
    pub m: i32,
}

/// One product ket |N> prod_i |v_i J_i M_i>.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisState {
    pub n: u32,
    pub mols: Vec<MolState>,
}

impl BasisState {
    /// (-1)^(N + sum J): conserved by the cavity Hamiltonian, flipped by the dipole.
    pub fn parity(&self) -> i8 {
        let s = self.n + self.mols.iter().map(|m| m.j).sum::<u32>();
        if s.is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    pub fn total_m(&self) -> i32 {
        self.mols.iter().map(|m| m.m).sum()
    }

    /// Sum of vibrational quanta plus photons.
    pub fn excitation(&self) -> u32 {
        self.n + self.mols.iter().map(|m| m.v).sum::<u32>()
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={}", self.n)?;
        for m in &self.mols {
            write!(f, ";v={},J={},M={}", m.v, m.j, m.m)?;
        }
        Ok(())
    }
}

/// Ordinal of a state within a [`Basis`].
pub type BasisIndex = usize;

/// Enumerated product basis with reverse lookup.
#[derive(Debug, Clone)]
pub struct Basis {
    states: Vec<BasisState>,
    index: HashMap<BasisState, BasisIndex>,
    n_max: u32,
    v_max: Vec<u32>,
    j_max: Vec<u32>,
}

impl Basis {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn state(&self, i: BasisIndex) -> &BasisState {
        &self.states[i]
    }

    pub fn index_of(&self, s: &BasisState) -> Option<BasisIndex> {
        self.index.get(s).copied()
    }

    pub fn n_mol(&self) -> usize {
        self.v_max.len()
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn v_max(&self) -> &[u32] {
        &self.v_max
    }

    pub fn j_max(&self) -> &[u32] {
        &self.j_max
    }

    /// Index of the state with molecules `a` and `b` swapped, for every state.
    /// `None` when some swapped state lies outside the basis.
    pub fn exchange_map(&self, a: usize, b: usize) -> Option<Vec<BasisIndex>> {
        self.states
            .iter()
            .map(|s| {
                let mut t = s.clone();
                t.mols.swap(a, b);
                self.index_of(&t)
            })
            .collect()
    }

    fn check_against(&self, spec: &SystemSpec) -> Result<()> {
        if self.n_mol() != spec.n_mol()
            || self.n_max != spec.cavity.n_max
            || self.v_max != spec.truncation.v_max
            || self.j_max != spec.truncation.j_max
        {
            return Err(Error::InconsistentBasis(
                "basis truncation differs from the system specification".into(),
            ));
        }
        Ok(())
    }
}

/// Enumerates the truncated product basis in lexicographic order of
/// (N, v_1, J_1, M_1, v_2, J_2, M_2, ...).
pub fn enumerate_basis(spec: &SystemSpec) -> Result<Basis> {
    let t = &spec.truncation;
    let n_mol = spec.n_mol();

    // Single-molecule ladders in (v, J, M) order.
    let ladders: Vec<Vec<MolState>> = (0..n_mol)
        .map(|i| {
            let mut out = Vec::new();
            for v in 0..=t.v_max[i] {
                for j in 0..=t.j_max[i] {
                    let ms: Vec<i32> = match t.m {
                        MRestriction::AllZero => vec![0],
                        _ => (-(j as i32)..=j as i32).collect(),
                    };
                    for m in ms {
                        out.push(MolState { v, j, m });
                    }
                }
            }
            out
        })
        .collect();

    let mut states = Vec::new();
    let mut current: Vec<MolState> = Vec::with_capacity(n_mol);
    fn recurse(
        depth: usize,
        ladders: &[Vec<MolState>],
        current: &mut Vec<MolState>,
        n: u32,
        m_rule: MRestriction,
        out: &mut Vec<BasisState>,
    ) {
        if depth == ladders.len() {
            if let MRestriction::Total(total) = m_rule {
                if current.iter().map(|m| m.m).sum::<i32>() != total {
                    return;
                }
            }
            out.push(BasisState {
                n,
                mols: current.clone(),
            });
            return;
        }
        for s in &ladders[depth] {
            current.push(*s);
            recurse(depth + 1, ladders, current, n, m_rule, out);
            current.pop();
        }
    }
    for n in 0..=spec.cavity.n_max {
        recurse(0, &ladders, &mut current, n, t.m, &mut states);
    }
    if states.is_empty() {
        return Err(Error::EmptyBasis);
    }
    let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    Ok(Basis {
        states,
        index,
        n_max: spec.cavity.n_max,
        v_max: t.v_max.clone(),
        j_max: t.j_max.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PhotonRule {
    /// <N| a^dagger + a |N'>.
    Ladder,
    /// delta_{N N'}.
    Diagonal,
}

/// Shared assembly of one-molecule-at-a-time operators of the form
/// sum_i f_i(v, v') cos(theta_i) x photon factor.
fn assemble_coupling(
    basis: &Basis,
    cos: &CosThetaTable,
    molecules: &[usize],
    coeff: impl Fn(usize, u32, u32) -> f64 + Sync,
    photon: PhotonRule,
    diagonal: impl Fn(&BasisState) -> f64 + Sync,
) -> SparseSymMatrix {
    let triplets: Vec<(usize, usize, f64)> = (0..basis.len())
        .into_par_iter()
        .flat_map_iter(|r| {
            let s = basis.state(r);
            let mut row = Vec::new();
            let d = diagonal(s);
            if d != 0.0 {
                row.push((r, r, d));
            }
            let photon_moves: &[i64] = match photon {
                PhotonRule::Diagonal => &[0],
                PhotonRule::Ladder => &[-1, 1],
            };
            for &i in molecules {
                let ms = s.mols[i];
                for vp in 0..=basis.v_max[i] {
                    let c_vib = coeff(i, ms.v, vp);
                    if c_vib == 0.0 {
                        continue;
                    }
                    for jp in [ms.j.wrapping_sub(1), ms.j + 1] {
                        if jp > basis.j_max[i] || ms.m.unsigned_abs() > jp {
                            continue;
                        }
                        let c_rot = cos.get(ms.j, jp, ms.m);
                        if c_rot == 0.0 {
                            continue;
                        }
                        for &dn in photon_moves {
                            let np = s.n as i64 + dn;
                            if np < 0 || np > basis.n_max as i64 {
                                continue;
                            }
                            let np = np as u32;
                            // <N| a^+ + a |N'> = sqrt(N) delta_{N,N'+1} + sqrt(N+1) delta_{N,N'-1}
                            let c_ph = match photon {
                                PhotonRule::Diagonal => 1.0,
                                PhotonRule::Ladder if np + 1 == s.n => (s.n as f64).sqrt(),
                                PhotonRule::Ladder => (s.n as f64 + 1.0).sqrt(),
                            };
                            let mut t = s.clone();
                            t.n = np;
                            t.mols[i] = MolState { v: vp, j: jp, m: ms.m };
                            if let Some(c) = basis.index_of(&t) {
                                if c < r {
                                    row.push((r, c, c_vib * c_rot * c_ph));
                                }
                            }
                        }
                    }
                }
            }
            row
        })
        .collect();
    SparseSymMatrix::from_triplets(basis.len(), triplets)
}

fn cos_table(basis: &Basis) -> CosThetaTable {
    CosThetaTable::new(basis.j_max.iter().copied().max().unwrap_or(0))
}

/// Molecule-cavity Hamiltonian in cm^-1.
///
/// Diagonal: sum_i E_rovib(v_i, J_i) + N hbar omega_c. Off-diagonal:
/// -g mu^(i)_{v v'} / mu_00(ref) <J M|cos|J' M> <N|a^+ + a|N'>, counter-rotating
/// terms included.
pub fn assemble_h(spec: &SystemSpec, basis: &Basis) -> Result<SparseSymMatrix> {
    basis.check_against(spec)?;
    let molecules: Vec<usize> = (0..spec.n_mol()).collect();
    Ok(assemble_coupling(
        basis,
        &cos_table(basis),
        &molecules,
        |i, v, vp| -spec.cavity_coupling(i, v, vp),
        PhotonRule::Ladder,
        |s| {
            s.mols
                .iter()
                .zip(&spec.molecules)
                .map(|(ms, mol)| mol.rovib_energy(ms.v, ms.j))
                .sum::<f64>()
                + s.n as f64 * spec.cavity.omega_c
        },
    ))
}

/// Space-fixed z dipole sum_i mu^(i)(R_i) cos(theta_i), in a.u., photon-diagonal.
pub fn assemble_dipole_z(spec: &SystemSpec, basis: &Basis) -> Result<SparseSymMatrix> {
    basis.check_against(spec)?;
    let molecules: Vec<usize> = (0..spec.n_mol()).collect();
    Ok(assemble_coupling(
        basis,
        &cos_table(basis),
        &molecules,
        |i, v, vp| spec.molecules[i].dipole(v, vp),
        PhotonRule::Diagonal,
        |_| 0.0,
    ))
}

/// cos(theta_i) of a single molecule, identity on everything else.
pub fn assemble_cos_theta(basis: &Basis, molecule: usize) -> SparseSymMatrix {
    assemble_coupling(
        basis,
        &cos_table(basis),
        &[molecule],
        |_, v, vp| if v == vp { 1.0 } else { 0.0 },
        PhotonRule::Diagonal,
        |_| 0.0,
    )
}

/// Bare (uncoupled) energy of each basis state, cm^-1.
pub fn diabatic_energies(spec: &SystemSpec, basis: &Basis) -> Vec<f64> {
    basis
        .states()
        .iter()
        .map(|s| {
            s.mols
                .iter()
                .zip(&spec.molecules)
                .map(|(ms, mol)| mol.rovib_energy(ms.v, ms.j))
                .sum::<f64>()
                + s.n as f64 * spec.cavity.omega_c
        })
        .collect()
}
