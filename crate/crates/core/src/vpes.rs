//! Vibrational polaritonic energy surfaces: the angle-dependent vibro-photonic
//! potential matrix V_rot(theta_1, theta_2), its eigenvalue surfaces, and the
//! search for their degeneracies.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolver::small_eigh;
use crate::error::{Error, Result};
use crate::moldata::{MRestriction, SystemSpec};
use crate::quadrature::{gauss_legendre, normalized_legendre};
use crate::sparse::SparseSymMatrix;

/// Gaps below this (cm^-1) count as true degeneracies.
pub const DEGENERACY_THRESHOLD: f64 = 1e-6;

/// Default surface grid points per axis.
pub const DEFAULT_GRID: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePoint {
    pub theta1: f64,
    pub theta2: f64,
}

impl AnglePoint {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        let ok = |t: f64| (0.0..=PI).contains(&t);
        if !ok(theta1) || !ok(theta2) {
            return Err(Error::InvalidArgument(format!(
                "angles ({theta1}, {theta2}) outside [0, pi]"
            )));
        }
        Ok(Self { theta1, theta2 })
    }

    pub fn distance(&self, other: &AnglePoint) -> f64 {
        (self.theta1 - other.theta1).hypot(self.theta2 - other.theta2)
    }

    fn clamped(theta1: f64, theta2: f64) -> Self {
        Self {
            theta1: theta1.clamp(0.0, PI),
            theta2: theta2.clamp(0.0, PI),
        }
    }
}

/// A vibro-photonic basis function |N> |v_1 v_2 ...>.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VibPhotonState {
    pub n: u32,
    pub v: Vec<u32>,
}

impl VibPhotonState {
    fn excitation(&self) -> u32 {
        self.n + self.v.iter().sum::<u32>()
    }
}

/// All vibro-photonic states of the truncation, ordered by total excitation,
/// then photon number first, then molecule 1 excited before molecule 2.
///
/// The first four are |00,N=0>, |00,N=1>, |10,N=0>, |01,N=0>.
pub fn vibro_photonic_states(spec: &SystemSpec) -> Vec<VibPhotonState> {
    let n_mol = spec.n_mol();
    let mut out = Vec::new();
    let mut v = vec![0u32; n_mol];
    for n in 0..=spec.cavity.n_max {
        loop {
            out.push(VibPhotonState { n, v: v.clone() });
            // odometer over v_i <= v_max_i
            let mut k = 0;
            while k < n_mol {
                if v[k] < spec.truncation.v_max[k] {
                    v[k] += 1;
                    break;
                }
                v[k] = 0;
                k += 1;
            }
            if k == n_mol {
                break;
            }
        }
    }
    out.sort_by(|a, b| {
        a.excitation()
            .cmp(&b.excitation())
            .then(b.n.cmp(&a.n))
            .then(b.v.cmp(&a.v))
    });
    out
}

/// V_rot for the given states with cos(theta_i) supplied directly.
pub(crate) fn vrot_from_cos(spec: &SystemSpec, states: &[VibPhotonState], cos: &[f64]) -> DMatrix<f64> {
    let n = states.len();
    let mut m = DMatrix::zeros(n, n);
    for (a, sa) in states.iter().enumerate() {
        m[(a, a)] =
            sa.v.iter()
                .zip(&spec.molecules)
                .map(|(&v, mol)| mol.e_vib[v as usize])
                .sum::<f64>()
                + sa.n as f64 * spec.cavity.omega_c;
        for (b, sb) in states.iter().enumerate().skip(a + 1) {
            let photon = match (sa.n, sb.n) {
                (x, y) if x == y + 1 => (x as f64).sqrt(),
                (x, y) if y == x + 1 => (y as f64).sqrt(),
                _ => continue,
            };
            let changed: Vec<usize> = (0..sa.v.len()).filter(|&i| sa.v[i] != sb.v[i]).collect();
            let value = match changed.as_slice() {
                [] => (0..sa.v.len())
                    .map(|i| spec.cavity_coupling(i, sa.v[i], sb.v[i]) * cos[i])
                    .sum::<f64>(),
                [i] => spec.cavity_coupling(*i, sa.v[*i], sb.v[*i]) * cos[*i],
                _ => 0.0,
            };
            m[(a, b)] = -value * photon;
            m[(b, a)] = -value * photon;
        }
    }
    m
}

/// The n_block x n_block leading block of V_rot at `point`, cm^-1.
pub fn build_vrot(spec: &SystemSpec, point: AnglePoint, n_block: usize) -> Result<DMatrix<f64>> {
    let states = vibro_photonic_states(spec);
    if n_block > states.len() || n_block == 0 {
        return Err(Error::BlockTooLarge {
            requested: n_block,
            available: states.len(),
        });
    }
    if spec.n_mol() != 2 {
        return Err(Error::InvalidArgument(format!(
            "surfaces need exactly two molecules, system has {}",
            spec.n_mol()
        )));
    }
    Ok(vrot_from_cos(
        spec,
        &states[..n_block],
        &[point.theta1.cos(), point.theta2.cos()],
    ))
}

/// Ascending eigenvalues of V_rot at a point. The diagonal is shifted to its
/// mean before diagonalizing.
fn vrot_eigen(spec: &SystemSpec, point: AnglePoint, n_block: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut m = build_vrot(spec, point, n_block).expect("block size validated by caller");
    let shift = m.diagonal().mean();
    for i in 0..n_block {
        m[(i, i)] -= shift;
    }
    let eig = small_eigh(&m);
    (eig.values.iter().map(|v| v + shift).collect(), eig.vectors)
}

/// Eigenvalue surfaces of V_rot on a uniform grid over [0, pi]^2.
#[derive(Debug, Clone)]
pub struct SurfaceField {
    pub spec: SystemSpec,
    pub n_block: usize,
    /// Grid coordinates shared by both axes.
    pub thetas: Vec<f64>,
    /// `values[i1 * n + i2]` ascending eigenvalues at (thetas[i1], thetas[i2]).
    pub values: Vec<Vec<f64>>,
    /// `vectors[i1 * n + i2][k]` eigenvector of `values[..][k]`.
    pub vectors: Vec<Vec<Vec<f64>>>,
    /// Grid links (child, parent) where some eigenvector overlap fell below 0.5,
    /// i.e. the sweep crossed a degeneracy.
    pub gauge_breaks: Vec<(usize, usize)>,
}

impl SurfaceField {
    pub fn resolution(&self) -> usize {
        self.thetas.len()
    }

    pub fn point(&self, idx: usize) -> AnglePoint {
        let n = self.resolution();
        AnglePoint {
            theta1: self.thetas[idx / n],
            theta2: self.thetas[idx % n],
        }
    }

    /// Surface `k` as a row-major grid.
    pub fn surface(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[k]).collect()
    }

    /// CSV rows: theta1, theta2, E0 .. E(n_block - 1).
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.n_block).map(|k| format!("E{k}")).collect();
        writeln!(w, "theta1,theta2,{}", header.join(","))?;
        for (idx, vals) in self.values.iter().enumerate() {
            let p = self.point(idx);
            let cols: Vec<String> = vals.iter().map(|v| format!("{v:.12}")).collect();
            writeln!(w, "{:.10},{:.10},{}", p.theta1, p.theta2, cols.join(","))?;
        }
        Ok(())
    }
}

/// Evaluates the surfaces on a `resolution` x `resolution` grid with a smooth
/// eigenvector gauge: along theta2 on the first row, then along theta1.
pub fn surfaces(spec: &SystemSpec, resolution: usize, n_block: usize) -> Result<SurfaceField> {
    if resolution < 2 {
        return Err(Error::InvalidArgument(format!("grid resolution {resolution} below 2")));
    }
    build_vrot(spec, AnglePoint::new(0.0, 0.0)?, n_block)?;
    let thetas: Vec<f64> = (0..resolution)
        .map(|i| PI * i as f64 / (resolution - 1) as f64)
        .collect();
    let (values, mut vectors): (Vec<_>, Vec<_>) = (0..resolution * resolution)
        .into_par_iter()
        .map(|idx| {
            let p = AnglePoint {
                theta1: thetas[idx / resolution],
                theta2: thetas[idx % resolution],
            };
            vrot_eigen(spec, p, n_block)
        })
        .unzip();

    let mut gauge_breaks = Vec::new();
    let parent = |idx: usize| -> Option<usize> {
        let (i1, i2) = (idx / resolution, idx % resolution);
        match (i1, i2) {
            (0, 0) => None,
            (0, _) => Some(idx - 1),
            _ => Some(idx - resolution),
        }
    };
    for idx in 1..resolution * resolution {
        let p = parent(idx).expect("only the origin lacks a parent");
        let mut broken = false;
        let (done, rest) = vectors.split_at_mut(idx);
        for (cur, prev) in rest[0].iter_mut().zip(&done[p]) {
            let ov: f64 = cur.iter().zip(prev).map(|(a, b)| a * b).sum();
            if ov < 0.0 {
                cur.iter_mut().for_each(|x| *x = -*x);
            }
            broken |= ov.abs() < 0.5;
        }
        if broken {
            gauge_breaks.push((idx, p));
        }
    }

    Ok(SurfaceField {
        spec: spec.clone(),
        n_block,
        thetas,
        values,
        vectors,
        gauge_breaks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneracyKind {
    /// Gap grows linearly in every direction.
    Conical,
    /// Gap grows quadratically in every direction.
    SecondOrder,
    /// Refined gap stays above the degeneracy threshold.
    Avoided,
    Unclassified,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Degeneracy {
    pub pair: (usize, usize),
    pub point: AnglePoint,
    /// cm^-1.
    pub gap: f64,
    /// Local growth exponents of the gap along several directions.
    pub exponents: Vec<f64>,
    pub kind: DegeneracyKind,
}

fn gap_at(spec: &SystemSpec, n_block: usize, pair: (usize, usize), p: AnglePoint) -> f64 {
    let (vals, _) = vrot_eigen(spec, p, n_block);
    vals[pair.1] - vals[pair.0]
}

/// Minimal Nelder-Mead in two dimensions.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, x0: [f64; 2], step: f64, max_iter: usize) -> ([f64; 2], f64) {
    let mut simplex = [x0, [x0[0] + step, x0[1]], [x0[0], x0[1] + step]];
    let mut fv = simplex.map(&f);
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
    for _ in 0..max_iter {
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        simplex = order.map(|i| simplex[i]);
        fv = order.map(|i| fv[i]);
        let size = (simplex[1][0] - simplex[0][0])
            .hypot(simplex[1][1] - simplex[0][1])
            .max((simplex[2][0] - simplex[0][0]).hypot(simplex[2][1] - simplex[0][1]));
        if size < 1e-14 || fv[0] < 1e-28 {
            break;
        }
        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let xr = add(centroid, simplex[2], -1.0);
        let fr = f(xr);
        if fr < fv[0] {
            let xe = add(centroid, simplex[2], -2.0);
            let fe = f(xe);
            if fe < fr {
                simplex[2] = xe;
                fv[2] = fe;
            } else {
                simplex[2] = xr;
                fv[2] = fr;
            }
        } else if fr < fv[1] {
            simplex[2] = xr;
            fv[2] = fr;
        } else {
            let (xc, fc) = if fr < fv[2] {
                let x = add(centroid, xr, 0.5);
                (x, f(x))
            } else {
                let x = add(centroid, simplex[2], 0.5);
                (x, f(x))
            };
            if fc < fv[2].min(fr) {
                simplex[2] = xc;
                fv[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = add(simplex[0], simplex[k], 0.5);
                    fv[k] = f(simplex[k]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| fv[a].total_cmp(&fv[b])).expect("three vertices");
    (simplex[best], fv[best])
}

/// Local growth exponents log2(gap(2h) / gap(h)) along eight directions.
fn gap_exponents(spec: &SystemSpec, n_block: usize, pair: (usize, usize), p: AnglePoint) -> Vec<f64> {
    let h = 1e-3;
    (0..8)
        .filter_map(|k| {
            let a = k as f64 * PI / 4.0;
            let (dx, dy) = (a.cos(), a.sin());
            let at = |s: f64| {
                let (t1, t2) = (p.theta1 + s * dx, p.theta2 + s * dy);
                ((0.0..=PI).contains(&t1) && (0.0..=PI).contains(&t2))
                    .then(|| gap_at(spec, n_block, pair, AnglePoint { theta1: t1, theta2: t2 }))
            };
            let (g1, g2) = (at(h)?, at(2.0 * h)?);
            (g1 > 0.0 && g2 > 0.0).then(|| (g2 / g1).log2())
        })
        .collect()
}

fn classify(gap: f64, exponents: &[f64]) -> DegeneracyKind {
    if gap >= DEGENERACY_THRESHOLD {
        DegeneracyKind::Avoided
    } else if exponents.is_empty() {
        DegeneracyKind::Unclassified
    } else if exponents.iter().all(|e| (e - 1.0).abs() <= 0.1) {
        DegeneracyKind::Conical
    } else if exponents.iter().all(|e| (e - 2.0).abs() <= 0.2) {
        DegeneracyKind::SecondOrder
    } else {
        DegeneracyKind::Unclassified
    }
}

/// Grid indices that are local minima of `gap` over their 8-neighborhood.
/// Ties are broken by index so a flat region yields at most one candidate, and
/// completely flat neighborhoods are skipped.
fn grid_minima(gap: &[f64], n: usize) -> Vec<usize> {
    let tol = 1e-9;
    let mut out = Vec::new();
    for idx in 0..n * n {
        let (i, j) = ((idx / n) as i64, (idx % n) as i64);
        let mut is_min = true;
        let mut any_higher = false;
        for di in -1..=1 {
            for dj in -1..=1 {
                let (a, b) = (i + di, j + dj);
                if (di, dj) == (0, 0) || a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                    continue;
                }
                let q = (a * n as i64 + b) as usize;
                if gap[q] < gap[idx] - tol || ((gap[q] - gap[idx]).abs() <= tol && q < idx) {
                    is_min = false;
                }
                any_higher |= gap[q] > gap[idx] + tol;
            }
        }
        if is_min && any_higher {
            out.push(idx);
        }
    }
    out
}

/// Locates minima of the gap between surfaces `pair.0 < pair.1`, refines them
/// with Nelder-Mead on the squared gap and classifies each.
///
/// Returns every refined minimum; fails only if none falls below
/// [`DEGENERACY_THRESHOLD`].
pub fn locate_degeneracies(field: &SurfaceField, pair: (usize, usize)) -> Result<Vec<Degeneracy>> {
    if pair.0 >= pair.1 || pair.1 >= field.n_block {
        return Err(Error::InvalidArgument(format!(
            "surface pair {pair:?} invalid for a block of {}",
            field.n_block
        )));
    }
    let n = field.resolution();
    let gap: Vec<f64> = field.values.iter().map(|v| v[pair.1] - v[pair.0]).collect();
    let step = field.thetas[1] - field.thetas[0];
    let spec = &field.spec;
    let nb = field.n_block;

    let refined: Vec<(AnglePoint, f64)> = grid_minima(&gap, n)
        .into_par_iter()
        .map(|idx| {
            let p0 = field.point(idx);
            let f = |x: [f64; 2]| gap_at(spec, nb, pair, AnglePoint::clamped(x[0], x[1])).powi(2);
            let (x, fx) = nelder_mead(f, [p0.theta1, p0.theta2], 0.5 * step, 4000);
            (AnglePoint::clamped(x[0], x[1]), fx.sqrt())
        })
        .collect();

    let mut unique: Vec<(AnglePoint, f64)> = Vec::new();
    for (p, g) in refined {
        match unique.iter_mut().find(|(q, _)| q.distance(&p) < 1e-5) {
            Some(slot) if g < slot.1 => *slot = (p, g),
            Some(_) => {}
            None => unique.push((p, g)),
        }
    }
    let min_gap = unique
        .iter()
        .map(|u| u.1)
        .chain(gap.iter().copied())
        .fold(f64::INFINITY, f64::min);
    if !unique.iter().any(|u| u.1 < DEGENERACY_THRESHOLD) {
        return Err(Error::NoDegeneracy {
            threshold: DEGENERACY_THRESHOLD,
            min_gap,
        });
    }
    let mut out: Vec<Degeneracy> = unique
        .into_iter()
        .map(|(point, gap)| {
            let exponents = if gap < DEGENERACY_THRESHOLD {
                gap_exponents(spec, nb, pair, point)
            } else {
                Vec::new()
            };
            Degeneracy {
                pair,
                point,
                gap,
                kind: classify(gap, &exponents),
                exponents,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (a.point.theta1, a.point.theta2)
            .partial_cmp(&(b.point.theta1, b.point.theta2))
            .expect("finite angles")
    });
    Ok(out)
}

/// Metadata written next to the surface CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceMetadata {
    pub resolution: usize,
    pub n_block: usize,
    pub omega_c_cm1: f64,
    pub g_cm1: f64,
    pub molecules: Vec<String>,
    pub degeneracies: Vec<Degeneracy>,
    pub gauge_breaks: usize,
}

impl SurfaceMetadata {
    pub fn new(field: &SurfaceField, degeneracies: Vec<Degeneracy>) -> Self {
        Self {
            resolution: field.resolution(),
            n_block: field.n_block,
            omega_c_cm1: field.spec.cavity.omega_c,
            g_cm1: field.spec.cavity.g,
            molecules: field.spec.molecules.iter().map(|m| m.label.clone()).collect(),
            degeneracies,
            gauge_breaks: field.gauge_breaks.len(),
        }
    }
}

/// Full rotational Hamiltonian T_rot + V_rot in a Legendre discrete variable
/// representation: J_max + 1 Gauss-Legendre nodes in cos(theta_i) per molecule
/// and every vibro-photonic state of the truncation.
///
/// Row index is `(s * n1 + a1) * n2 + a2` for vibro-photonic state `s` and
/// nodes `a1`, `a2`. Only the M = 0 manifold is representable.
pub fn legendre_dvr_hamiltonian(spec: &SystemSpec) -> Result<SparseSymMatrix> {
    if spec.n_mol() != 2 {
        return Err(Error::InvalidArgument(format!(
            "the rotational grid needs exactly two molecules, system has {}",
            spec.n_mol()
        )));
    }
    if spec.truncation.m != MRestriction::AllZero {
        return Err(Error::InvalidArgument(
            "the rotational grid represents the M = 0 manifold only".into(),
        ));
    }
    let states = vibro_photonic_states(spec);
    let j_max = &spec.truncation.j_max;
    let grids: Vec<(Vec<f64>, DMatrix<f64>)> = j_max
        .iter()
        .map(|&jm| {
            let n = jm as usize + 1;
            let (x, w) = gauss_legendre(n);
            // U[a, J] = sqrt(w_a) P~_J(x_a) is orthogonal for n = J_max + 1.
            let mut u = DMatrix::zeros(n, n);
            for a in 0..n {
                let p = normalized_legendre(jm, x[a]);
                for j in 0..n {
                    u[(a, j)] = w[a].sqrt() * p[j];
                }
            }
            let jj = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |j, _| (j * (j + 1)) as f64));
            let t = &u * jj * u.transpose();
            (x, t)
        })
        .collect();
    let (n1, n2) = (grids[0].0.len(), grids[1].0.len());
    let idx = |s: usize, a1: usize, a2: usize| (s * n1 + a1) * n2 + a2;
    let dim = states.len() * n1 * n2;

    let mut triplets = Vec::new();
    for (s, st) in states.iter().enumerate() {
        let b1 = spec.molecules[0].b_rot[st.v[0] as usize];
        let b2 = spec.molecules[1].b_rot[st.v[1] as usize];
        for a1 in 0..n1 {
            for a2 in 0..n2 {
                let r = idx(s, a1, a2);
                for c1 in 0..=a1 {
                    let v = b1 * grids[0].1[(a1, c1)];
                    if v != 0.0 {
                        triplets.push((r, idx(s, c1, a2), v));
                    }
                }
                for c2 in 0..a2 {
                    let v = b2 * grids[1].1[(a2, c2)];
                    if v != 0.0 {
                        triplets.push((r, idx(s, a1, c2), v));
                    }
                }
                // diagonal b2 * T2[a2, a2] term
                triplets.push((r, r, b2 * grids[1].1[(a2, a2)]));
            }
        }
    }
    for a1 in 0..n1 {
        for a2 in 0..n2 {
            let v = vrot_from_cos(spec, &states, &[grids[0].0[a1], grids[1].0[a2]]);
            for s in 0..states.len() {
                for sp in 0..=s {
                    if v[(s, sp)] != 0.0 {
                        triplets.push((idx(s, a1, a2), idx(sp, a1, a2), v[(s, sp)]));
                    }
                }
            }
        }
    }
    Ok(SparseSymMatrix::from_triplets(dim, triplets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moldata::BundledSystem;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn state_ordering() {
        let spec = BundledSystem::Mixed.spec();
        let s = vibro_photonic_states(&spec);
        assert_eq!(s.len(), 12);
        let expect = [(0, [0, 0]), (1, [0, 0]), (0, [1, 0]), (0, [0, 1])];
        for (st, (n, v)) in s.iter().zip(expect) {
            assert_eq!((st.n, st.v.as_slice()), (n, &v[..]));
        }
    }

    #[test]
    fn decoupled_at_right_angles() {
        let spec = BundledSystem::Mixed.spec();
        let m = build_vrot(&spec, AnglePoint::new(FRAC_PI_2, FRAC_PI_2).unwrap(), 4).unwrap();
        let (vals, _) = vrot_eigen(&spec, AnglePoint::new(FRAC_PI_2, FRAC_PI_2).unwrap(), 4);
        let mut diag: Vec<f64> = m.diagonal().iter().copied().collect();
        assert_eq!(diag, vec![0.0, 2904.5, 2905.9, 2903.7]);
        diag.sort_by(f64::total_cmp);
        for (a, b) in vals.iter().zip(&diag) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn block_layout() {
        let spec = BundledSystem::Mixed.spec();
        let (c1, c2) = (0.3f64.cos(), 1.1f64.cos());
        let m = build_vrot(&spec, AnglePoint::new(0.3, 1.1).unwrap(), 4).unwrap();
        let g = spec.field_per_dipole();
        let mu1 = &spec.molecules[0].mu;
        let mu2 = &spec.molecules[1].mu;
        assert_abs_diff_eq!(m[(0, 1)], -g * (mu1[0][0] * c1 + mu2[0][0] * c2), epsilon = 1e-12);
        assert_abs_diff_eq!(m[(1, 2)], -g * mu1[0][1] * c1, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(1, 3)], -g * mu2[0][1] * c2, epsilon = 1e-12);
        assert_eq!(m[(0, 2)], 0.0);
        assert_eq!(m[(2, 3)], 0.0);
        assert!(build_vrot(&spec, AnglePoint::new(0.3, 1.1).unwrap(), 13).is_err());
    }

    #[test]
    fn identical_middle_surface_is_flat() {
        let spec = BundledSystem::Identical.spec();
        let field = surfaces(&spec, 21, 4).unwrap();
        for v in &field.values {
            assert_abs_diff_eq!(v[2], 2905.9, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_coupling_has_no_degeneracy() {
        let spec = BundledSystem::Mixed.spec().with_coupling(0.0);
        let field = surfaces(&spec, 11, 4).unwrap();
        for v in &field.values {
            assert_abs_diff_eq!(v[1], 2903.7, epsilon = 1e-12);
            assert_abs_diff_eq!(v[3], 2905.9, epsilon = 1e-12);
        }
        let err = locate_degeneracies(&field, (1, 2)).unwrap_err();
        assert!(matches!(err, Error::NoDegeneracy { .. }));
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let (x, f) = nelder_mead(
            |p| (p[0] - 1.2).powi(2) + 3.0 * (p[1] + 0.4).powi(2),
            [0.0, 0.0],
            0.1,
            2000,
        );
        assert!(f < 1e-20);
        assert_abs_diff_eq!(x[0], 1.2, epsilon = 1e-9);
        assert_abs_diff_eq!(x[1], -0.4, epsilon = 1e-9);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let spec = BundledSystem::Mixed.spec();
        let field = surfaces(&spec, 3, 4).unwrap();
        let mut buf = Vec::new();
        field.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "theta1,theta2,E0,E1,E2,E3");
        assert_eq!(text.lines().count(), 10);
    }
}
