//! Polariton eigenstates of the molecule-cavity Hamiltonian and their
//! ground / molecular / photonic character.

use serde::{Deserialize, Serialize};

use crate::eigensolver::{dense_eigh, lanczos_lowest, small_eigh, EigenPairs, LanczosOptions};
use crate::error::Result;
use crate::hamiltonian::Basis;
use crate::sparse::SparseSymMatrix;

/// Dimension above which `Solver::Auto` switches to Lanczos.
pub const DENSE_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    All,
    Lowest(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy)]
pub struct DiagonalizeOptions {
    pub selection: Selection,
    pub solver: Solver,
    /// Diagonalize the (-1)^(N + sum J) sectors separately.
    pub split_parity: bool,
    pub lanczos: LanczosOptions,
}

impl Default for DiagonalizeOptions {
    fn default() -> Self {
        Self {
            selection: Selection::All,
            solver: Solver::Auto,
            split_parity: true,
            lanczos: LanczosOptions::default(),
        }
    }
}

impl DiagonalizeOptions {
    pub fn lowest(k: usize) -> Self {
        Self {
            selection: Selection::Lowest(k),
            ..Self::default()
        }
    }
}

/// Squared-amplitude decomposition of a state over basis classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Character {
    /// All v_i = 0 and N = 0.
    pub ground: f64,
    /// v_i >= 1, for each molecule i. States with several molecules excited
    /// share their weight equally between them.
    pub molecules: Vec<f64>,
    /// N >= 1 with all v_i = 0.
    pub photonic: f64,
}

impl Character {
    pub fn total(&self) -> f64 {
        self.ground + self.molecules.iter().sum::<f64>() + self.photonic
    }

    /// (molecule 1, molecule 2, ..., photonic) renormalized over the excited
    /// classes; all zeros for a pure ground-class state.
    pub fn excited_weights(&self) -> Vec<f64> {
        let mut w: Vec<f64> = self.molecules.clone();
        w.push(self.photonic);
        let s: f64 = w.iter().sum();
        if s > 0.0 {
            w.iter_mut().for_each(|x| *x /= s);
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolaritonState {
    /// cm^-1.
    pub energy: f64,
    pub coeffs: Vec<f64>,
    pub character: Character,
}

pub fn character(coeffs: &[f64], basis: &Basis) -> Character {
    let n_mol = basis.n_mol();
    let mut ch = Character {
        ground: 0.0,
        molecules: vec![0.0; n_mol],
        photonic: 0.0,
    };
    for (c, s) in coeffs.iter().zip(basis.states()) {
        let w = c * c;
        let excited: Vec<usize> = (0..n_mol).filter(|&i| s.mols[i].v > 0).collect();
        if excited.is_empty() {
            if s.n == 0 {
                ch.ground += w;
            } else {
                ch.photonic += w;
            }
        } else {
            let share = w / excited.len() as f64;
            for i in excited {
                ch.molecules[i] += share;
            }
        }
    }
    ch
}

/// <state| P_ab |state> for the molecule exchange given as an index map.
pub fn exchange_expectation(coeffs: &[f64], exchange: &[usize]) -> f64 {
    coeffs.iter().enumerate().map(|(r, c)| c * coeffs[exchange[r]]).sum()
}

fn commutes_with(h: &SparseSymMatrix, perm: &[usize]) -> bool {
    h.lower_entries().iter().all(|&(r, c, v)| h.get(perm[r], perm[c]) == v)
}

fn submatrix(h: &SparseSymMatrix, keep: &[usize]) -> SparseSymMatrix {
    let mut local = vec![usize::MAX; h.dim()];
    for (k, &g) in keep.iter().enumerate() {
        local[g] = k;
    }
    let t = h.lower_entries().iter().filter_map(|&(r, c, v)| {
        let (lr, lc) = (local[r], local[c]);
        (lr != usize::MAX && lc != usize::MAX).then_some((lr, lc, v))
    });
    SparseSymMatrix::from_triplets(keep.len(), t)
}

fn solve_block(h: &SparseSymMatrix, opts: &DiagonalizeOptions) -> Result<EigenPairs> {
    let n = h.dim();
    let want = match opts.selection {
        Selection::All => n,
        Selection::Lowest(k) => k.min(n),
    };
    let use_dense = match opts.solver {
        Solver::Dense => true,
        Solver::Lanczos => false,
        Solver::Auto => n <= DENSE_LIMIT || want == n,
    };
    if use_dense || want == n {
        let mut eig = if n <= 16 {
            small_eigh(&h.to_dense())
        } else {
            dense_eigh(&h.to_dense())
        };
        eig.values.truncate(want);
        eig.vectors.truncate(want);
        Ok(eig)
    } else {
        lanczos_lowest(h, want, opts.lanczos)
    }
}

fn sector_pairs(
    h: &SparseSymMatrix,
    basis: &Basis,
    parity: i8,
    opts: &DiagonalizeOptions,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = h.dim();
    let keep: Vec<usize> = (0..n).filter(|&i| basis.state(i).parity() == parity).collect();
    if keep.is_empty() {
        return Ok(Vec::new());
    }
    let block = submatrix(h, &keep);
    let eig = solve_block(&block, opts)?;
    Ok(eig
        .values
        .into_iter()
        .zip(eig.vectors)
        .map(|(val, local)| {
            let mut full = vec![0.0; n];
            for (k, &g) in keep.iter().enumerate() {
                full[g] = local[k];
            }
            (val, full)
        })
        .collect())
}

/// Eigenstates of `h` in ascending energy.
///
/// When molecules 1 and 2 can be exchanged without changing `h`, degenerate
/// eigenvectors are rotated onto exchange-symmetric / antisymmetric
/// combinations. Every vector's largest-magnitude component is made positive.
pub fn diagonalize(h: &SparseSymMatrix, basis: &Basis, opts: DiagonalizeOptions) -> Result<Vec<PolaritonState>> {
    assert_eq!(h.dim(), basis.len(), "matrix and basis dimensions differ");
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::new();
    if opts.split_parity {
        for parity in [1i8, -1] {
            pairs.extend(sector_pairs(h, basis, parity, &opts)?);
        }
    } else {
        let eig = solve_block(h, &opts)?;
        pairs.extend(eig.values.into_iter().zip(eig.vectors));
    }
    finish(pairs, h, basis, opts.selection)
}

/// Eigenstates of `h` restricted to basis states of parity (-1)^(N + sum J)
/// equal to `parity`; `h` conserves this parity.
pub fn diagonalize_sector(
    h: &SparseSymMatrix,
    basis: &Basis,
    parity: i8,
    opts: DiagonalizeOptions,
) -> Result<Vec<PolaritonState>> {
    assert_eq!(h.dim(), basis.len(), "matrix and basis dimensions differ");
    let pairs = sector_pairs(h, basis, parity, &opts)?;
    finish(pairs, h, basis, opts.selection)
}

fn finish(
    mut pairs: Vec<(f64, Vec<f64>)>,
    h: &SparseSymMatrix,
    basis: &Basis,
    selection: Selection,
) -> Result<Vec<PolaritonState>> {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Selection::Lowest(k) = selection {
        pairs.truncate(k);
    }

    if basis.n_mol() == 2 {
        if let Some(perm) = basis.exchange_map(0, 1) {
            if commutes_with(h, &perm) {
                fix_exchange_gauge(&mut pairs, &perm, h.norm_bound());
            }
        }
    }

    Ok(pairs
        .into_iter()
        .map(|(energy, mut coeffs)| {
            let (imax, _) =
                coeffs.iter().enumerate().fold(
                    (0, 0.0),
                    |acc, (i, c)| if c.abs() > acc.1 + 1e-12 { (i, c.abs()) } else { acc },
                );
            if coeffs[imax] < 0.0 {
                coeffs.iter_mut().for_each(|c| *c = -*c);
            }
            let character = character(&coeffs, basis);
            PolaritonState {
                energy,
                coeffs,
                character,
            }
        })
        .collect())
}

fn fix_exchange_gauge(pairs: &mut [(f64, Vec<f64>)], perm: &[usize], scale: f64) {
    let tol = 1e-9 * scale.max(1.0);
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end].0 - pairs[end - 1].0 <= tol {
            end += 1;
        }
        let size = end - start;
        if size > 1 {
            let block = &pairs[start..end];
            let mut p = nalgebra::DMatrix::zeros(size, size);
            for a in 0..size {
                for b in 0..size {
                    p[(a, b)] = block[a]
                        .1
                        .iter()
                        .enumerate()
                        .map(|(r, x)| x * block[b].1[perm[r]])
                        .sum();
                }
            }
            let p = (&p + p.transpose()) * 0.5;
            let eig = small_eigh(&p);
            let dim = block[0].1.len();
            let rotated: Vec<Vec<f64>> = eig
                .vectors
                .iter()
                .rev() // symmetric (+1) first
                .map(|s| {
                    let mut v = vec![0.0; dim];
                    for (a, w) in s.iter().enumerate() {
                        for (vi, xi) in v.iter_mut().zip(&block[a].1) {
                            *vi += w * xi;
                        }
                    }
                    v
                })
                .collect();
            for (slot, v) in pairs[start..end].iter_mut().zip(rotated) {
                slot.1 = v;
            }
        }
        start = end;
    }
}

/// Serializable summary of a set of polaritons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenReport {
    pub states: Vec<EigenReportEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenReportEntry {
    pub index: usize,
    pub energy_cm1: f64,
    pub character: Character,
    /// Largest-amplitude basis states as (label, coefficient).
    pub leading: Vec<(String, f64)>,
}

pub fn eigen_report(states: &[PolaritonState], basis: &Basis, n_leading: usize) -> EigenReport {
    EigenReport {
        states: states
            .iter()
            .enumerate()
            .map(|(index, s)| {
                let mut order: Vec<usize> = (0..s.coeffs.len()).collect();
                order.sort_by(|&a, &b| s.coeffs[b].abs().total_cmp(&s.coeffs[a].abs()));
                EigenReportEntry {
                    index,
                    energy_cm1: s.energy,
                    character: s.character.clone(),
                    leading: order
                        .into_iter()
                        .take(n_leading)
                        .map(|i| (basis.state(i).to_string(), s.coeffs[i]))
                        .collect(),
                }
            })
            .collect(),
    }
}
