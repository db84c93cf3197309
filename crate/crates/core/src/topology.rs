//! Nonadiabatic couplings along closed contours in (theta_1, theta_2),
//! adiabatic-to-diabatic (ADT) angles, topological phases and the
//! topological D matrix.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolver::small_eigh;
use crate::error::{Error, Result};
use crate::moldata::SystemSpec;
use crate::vpes::{build_vrot, AnglePoint};

/// Minimum samples per contour.
pub const MIN_SAMPLES: usize = 64;

/// Contours closer than this (rad) to a known degeneracy are rejected.
pub const MIN_DEGENERACY_DISTANCE: f64 = 1e-4;

/// Closed circle theta(phi) = center + radius (cos phi, +-sin phi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub center: AnglePoint,
    pub radius: f64,
    pub n_samples: usize,
    /// Traverse clockwise in the (theta1, theta2) plane.
    #[serde(default)]
    pub clockwise: bool,
}

impl Contour {
    pub fn new(center: AnglePoint, radius: f64, n_samples: usize) -> Result<Self> {
        let c = Self {
            center,
            radius,
            n_samples,
            clockwise: false,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if n_ok(self.n_samples) && self.radius > 0.0 {
            let (c1, c2, r) = (self.center.theta1, self.center.theta2, self.radius);
            if c1 - r >= 0.0 && c1 + r <= PI && c2 - r >= 0.0 && c2 + r <= PI {
                return Ok(());
            }
            return Err(Error::InvalidContour(format!(
                "circle of radius {r} around ({c1}, {c2}) leaves [0, pi]^2"
            )));
        }
        Err(Error::InvalidContour(format!(
            "need radius > 0 and at least {MIN_SAMPLES} samples, got radius {} with {} samples",
            self.radius, self.n_samples
        )))
    }

    pub fn reversed(mut self) -> Self {
        self.clockwise = !self.clockwise;
        self
    }

    pub fn with_samples(mut self, n_samples: usize) -> Self {
        self.n_samples = n_samples;
        self
    }

    pub fn step(&self) -> f64 {
        2.0 * PI / self.n_samples as f64
    }

    /// Sample angles phi_k = k * 2 pi / n.
    pub fn phis(&self) -> Vec<f64> {
        (0..self.n_samples).map(|k| k as f64 * self.step()).collect()
    }

    pub fn point_at(&self, phi: f64) -> AnglePoint {
        let s = if self.clockwise { -1.0 } else { 1.0 };
        AnglePoint {
            theta1: self.center.theta1 + self.radius * phi.cos(),
            theta2: self.center.theta2 + s * self.radius * phi.sin(),
        }
    }

    /// Signed distance of `p` from the circle (negative inside).
    pub fn distance_to(&self, p: &AnglePoint) -> f64 {
        self.center.distance(p) - self.radius
    }

    pub fn encloses(&self, p: &AnglePoint) -> bool {
        self.distance_to(p) < 0.0
    }
}

fn n_ok(n: usize) -> bool {
    n >= MIN_SAMPLES
}

/// Largest radius around `target` that keeps every other degeneracy at least
/// three radii away and the circle inside [0, pi]^2.
pub fn default_radius(target: AnglePoint, others: &[AnglePoint]) -> f64 {
    let clearance = others
        .iter()
        .map(|p| target.distance(p))
        .filter(|d| *d > 1e-9)
        .fold(f64::INFINITY, f64::min)
        / 3.0;
    let wall = [target.theta1, PI - target.theta1, target.theta2, PI - target.theta2]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    clearance.min(0.95 * wall)
}

/// Knobs for contour evaluations.
#[derive(Debug, Clone)]
pub struct ContourOptions {
    /// Leading V_rot block used for the eigenvectors.
    pub n_block: usize,
    /// Known degeneracies the contour must avoid.
    pub degeneracies: Vec<AnglePoint>,
    /// Double the sampling until every alpha changes by less than
    /// `refine_tol` (units of pi), up to `max_samples`.
    pub refine: bool,
    pub refine_tol: f64,
    pub max_samples: usize,
    /// Randomly flip raw eigenvector signs before gauge smoothing.
    pub gauge_seed: Option<u64>,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            n_block: 4,
            degeneracies: Vec::new(),
            refine: false,
            refine_tol: 1e-3,
            max_samples: 1 << 15,
            gauge_seed: None,
        }
    }
}

/// Angular nonadiabatic couplings tau_ij(phi_k) = <psi_i | d/dphi psi_j>.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TauTrace {
    pub contour: Contour,
    pub states: Vec<usize>,
    pub phis: Vec<f64>,
    /// `tau[k]` is the |states| x |states| matrix at phi_k, row-major.
    pub tau: Vec<Vec<f64>>,
    /// Whether sampling refinement met its tolerance.
    pub converged: bool,
}

impl TauTrace {
    pub fn get(&self, k: usize, a: usize, b: usize) -> f64 {
        self.tau[k][a * self.states.len() + b]
    }

    /// Position of a V_rot state index inside `states`.
    fn slot(&self, state: usize) -> Option<usize> {
        self.states.iter().position(|&s| s == state)
    }

    /// Largest |tau_ij + tau_ji| over the trace.
    pub fn antisymmetry_error(&self) -> f64 {
        let m = self.states.len();
        let mut worst = 0.0f64;
        for t in &self.tau {
            for a in 0..m {
                for b in 0..m {
                    worst = worst.max((t[a * m + b] + t[b * m + a]).abs());
                }
            }
        }
        worst
    }
}

/// Raw eigenvector frames along a contour, as columns of the selected states.
struct Frames {
    /// Frames at phi_{-1}, phi_0, ..., phi_n (n + 2 entries); frame k + 1
    /// belongs to phi_k.
    psi: Vec<DMatrix<f64>>,
    /// Eigenvalues of the full block at phi_0 .. phi_{n-1}.
    values: Vec<Vec<f64>>,
    /// Full eigenvector sets at phi_0 .. phi_{n-1}.
    full: Vec<DMatrix<f64>>,
}

fn frames(
    matrix_at: &(dyn Fn(AnglePoint) -> DMatrix<f64> + Sync),
    contour: &Contour,
    states: &[usize],
    gauge_seed: Option<u64>,
) -> Frames {
    let n = contour.n_samples;
    let h = contour.step();
    let eigs: Vec<(Vec<f64>, DMatrix<f64>)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let m = matrix_at(contour.point_at(k as f64 * h));
            let shift = m.diagonal().mean();
            let shifted = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
                m[(i, j)] - if i == j { shift } else { 0.0 }
            });
            let eig = small_eigh(&shifted);
            let dim = m.nrows();
            let vecs = DMatrix::from_fn(dim, dim, |i, j| eig.vectors[j][i]);
            (eig.values.iter().map(|v| v + shift).collect(), vecs)
        })
        .collect();
    let (values, mut full): (Vec<_>, Vec<_>) = eigs.into_iter().unzip();
    if let Some(seed) = gauge_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for f in full.iter_mut() {
            for j in 0..f.ncols() {
                if rng.gen::<bool>() {
                    f.column_mut(j).neg_mut();
                }
            }
        }
    }
    let pick = |f: &DMatrix<f64>| DMatrix::from_fn(f.nrows(), states.len(), |i, a| f[(i, states[a])]);
    let mut psi = Vec::with_capacity(n + 2);
    psi.push(pick(&full[n - 1]));
    for f in &full {
        psi.push(pick(f));
    }
    psi.push(pick(&full[0]));
    Frames { psi, values, full }
}

/// Sign fixing: at phi_0 (`psi[1]`) each column has its largest component
/// positive; every other frame overlaps its neighbor toward phi_0
/// non-negatively.
fn smooth_gauge(psi: &mut [DMatrix<f64>]) {
    let align = |cur: &mut DMatrix<f64>, reference: &DMatrix<f64>| {
        for j in 0..cur.ncols() {
            if cur.column(j).dot(&reference.column(j)) < 0.0 {
                cur.column_mut(j).neg_mut();
            }
        }
    };
    for j in 0..psi[1].ncols() {
        let col = psi[1].column(j);
        let lead = col.iamax();
        if col[lead] < 0.0 {
            psi[1].column_mut(j).neg_mut();
        }
    }
    let (head, tail) = psi.split_at_mut(1);
    align(&mut head[0], &tail[0]);
    for k in 2..psi.len() {
        let (prev, cur) = psi.split_at_mut(k);
        align(&mut cur[0], &prev[k - 1]);
    }
}

fn tau_from_frames(mut psi: Vec<DMatrix<f64>>, h: f64) -> Vec<Vec<f64>> {
    smooth_gauge(&mut psi);
    let m = psi[0].ncols();
    (1..psi.len() - 1)
        .map(|k| {
            let d = (&psi[k + 1] - &psi[k - 1]) / (2.0 * h);
            let t = psi[k].transpose() * d;
            let mut out = vec![0.0; m * m];
            for a in 0..m {
                for b in 0..m {
                    out[a * m + b] = t[(a, b)];
                }
            }
            out
        })
        .collect()
}

fn check_clearance(contour: &Contour, degeneracies: &[AnglePoint]) -> Result<()> {
    for p in degeneracies {
        let d = contour.distance_to(p).abs();
        if d < MIN_DEGENERACY_DISTANCE {
            let s = if contour.clockwise { -1.0 } else { 1.0 };
            let phi = (s * (p.theta2 - contour.center.theta2))
                .atan2(p.theta1 - contour.center.theta1)
                .rem_euclid(2.0 * PI);
            return Err(Error::ContourTooClose { phi, distance: d });
        }
    }
    Ok(())
}

fn check_states(states: &[usize], dim: usize) -> Result<()> {
    if states.is_empty() || states.iter().any(|&s| s >= dim) {
        return Err(Error::InvalidArgument(format!(
            "state set {states:?} outside a block of {dim}"
        )));
    }
    Ok(())
}

/// tau along `contour` for an arbitrary real-symmetric matrix field.
pub fn tau_along_contour_with(
    matrix_at: &(dyn Fn(AnglePoint) -> DMatrix<f64> + Sync),
    contour: &Contour,
    states: &[usize],
    opts: &ContourOptions,
) -> Result<TauTrace> {
    contour.validate()?;
    check_clearance(contour, &opts.degeneracies)?;
    check_states(states, matrix_at(contour.center).nrows())?;

    let eval = |c: &Contour| -> Result<TauTrace> {
        let f = frames(matrix_at, c, states, opts.gauge_seed);
        reject_touching(&f.values, states, c)?;
        Ok(TauTrace {
            contour: *c,
            states: states.to_vec(),
            phis: c.phis(),
            tau: tau_from_frames(f.psi, c.step()),
            converged: !opts.refine,
        })
    };
    let mut trace = eval(contour)?;
    if opts.refine {
        loop {
            let next_n = trace.contour.n_samples * 2;
            if next_n > opts.max_samples {
                break;
            }
            let finer = eval(&trace.contour.with_samples(next_n))?;
            let change = alpha_change(&trace, &finer);
            trace = finer;
            if change < opts.refine_tol {
                trace.converged = true;
                break;
            }
        }
    }
    Ok(trace)
}

/// Rejects contours that run through a degeneracy of the selected states.
fn reject_touching(values: &[Vec<f64>], states: &[usize], contour: &Contour) -> Result<()> {
    for (k, v) in values.iter().enumerate() {
        let scale = v.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        for w in states.windows(2) {
            if w[1] == w[0] + 1 && (v[w[1]] - v[w[0]]).abs() < 1e-10 * scale {
                return Err(Error::ContourTooClose {
                    phi: k as f64 * contour.step(),
                    distance: 0.0,
                });
            }
        }
    }
    Ok(())
}

fn alpha_change(a: &TauTrace, b: &TauTrace) -> f64 {
    let m = a.states.len();
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            let pa = integrate(a, i, j);
            let pb = integrate(b, i, j);
            worst = worst.max((pa - pb).abs() / PI);
        }
    }
    worst
}

fn integrate(trace: &TauTrace, a: usize, b: usize) -> f64 {
    (0..trace.tau.len()).map(|k| trace.get(k, a, b)).sum::<f64>() * trace.contour.step()
}

/// tau along `contour` for the V_rot eigenvectors of `spec`.
pub fn tau_along_contour(
    spec: &SystemSpec,
    contour: &Contour,
    states: &[usize],
    opts: &ContourOptions,
) -> Result<TauTrace> {
    build_vrot(spec, contour.center, opts.n_block)?;
    let nb = opts.n_block;
    let f = move |p: AnglePoint| build_vrot(spec, p, nb).expect("block size checked");
    tau_along_contour_with(&f, contour, states, opts)
}

/// Topological phase of one state pair with its ADT angle curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairPhase {
    pub pair: (usize, usize),
    /// Closed-contour integral of tau_ij, in units of pi.
    pub alpha_over_pi: f64,
    /// Partial integrals gamma(phi_k) from phi_0 (radians), k = 0..=n.
    pub gamma: Vec<f64>,
}

/// Trapezoidal closed-contour integral of tau for `pair` (V_rot state indices).
pub fn topological_phase(trace: &TauTrace, pair: (usize, usize)) -> Result<PairPhase> {
    let (a, b) = match (trace.slot(pair.0), trace.slot(pair.1)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "pair {pair:?} not in traced states {:?}",
                trace.states
            )))
        }
    };
    let h = trace.contour.step();
    let n = trace.tau.len();
    let mut gamma = Vec::with_capacity(n + 1);
    gamma.push(0.0);
    for k in 0..n {
        let next = trace.get((k + 1) % n, a, b);
        let last = *gamma.last().expect("seeded");
        gamma.push(last + 0.5 * h * (trace.get(k, a, b) + next));
    }
    Ok(PairPhase {
        pair,
        alpha_over_pi: gamma[n] / PI,
        gamma,
    })
}

/// Everything computed for one contour and one state group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyReport {
    pub contour: Contour,
    pub states: Vec<usize>,
    pub phis: Vec<f64>,
    /// Adjacent-pair phases within the group.
    pub phases: Vec<PairPhase>,
    /// Row-major D matrix.
    pub d_matrix: Vec<Vec<f64>>,
    pub d_diagonal: Vec<f64>,
    pub max_off_diagonal: f64,
    /// Number of -1 diagonal entries.
    pub k: usize,
    /// Diagonal entries within 0.02 of +-1 and off-diagonals below 0.05.
    pub quantized: bool,
    /// Smallest gap to the excluded states over the largest derivative
    /// coupling (cm^-1 / rad) into them.
    pub isolation_ratio: f64,
    pub warnings: Vec<String>,
}

impl TopologyReport {
    /// CSV: phi then one gamma column per adjacent pair.
    pub fn write_gamma_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let cols: Vec<String> = self
            .phases
            .iter()
            .map(|p| format!("gamma_{}_{}", p.pair.0, p.pair.1))
            .collect();
        writeln!(w, "phi,{}", cols.join(","))?;
        let n = self.phis.len();
        for k in 0..=n {
            let phi = k as f64 * 2.0 * PI / n as f64;
            let vals: Vec<String> = self.phases.iter().map(|p| format!("{:.12}", p.gamma[k])).collect();
            writeln!(w, "{phi:.10},{}", vals.join(","))?;
        }
        Ok(())
    }
}

/// Polar factor U V^T of a square matrix.
fn polar_orthonormalize(s: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = s.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    u * vt
}

/// D matrix of `states` around `contour` for an arbitrary matrix field, with
/// the adjacent-pair topological phases.
///
/// D is the ordered product of polar-orthonormalized overlaps
/// S_k = Psi(phi_{k+1})^T Psi(phi_k) of sign-continued eigenvector frames,
/// ending on the frame continued once around the contour. Only the
/// continuation enters, so D does not depend on the initial eigenvector signs.
pub fn d_matrix_with(
    matrix_at: &(dyn Fn(AnglePoint) -> DMatrix<f64> + Sync),
    contour: &Contour,
    states: &[usize],
    opts: &ContourOptions,
) -> Result<TopologyReport> {
    let trace = tau_along_contour_with(matrix_at, contour, states, opts)?;
    let contour = trace.contour;
    let f = frames(matrix_at, &contour, states, opts.gauge_seed);
    let n = contour.n_samples;
    let m = states.len();

    let mut psi = f.psi.clone();
    smooth_gauge(&mut psi);
    let mut d = DMatrix::<f64>::identity(m, m);
    for k in 0..n {
        let (cur, next) = (&psi[k + 1], &psi[k + 2]);
        let s = next.transpose() * cur;
        d = polar_orthonormalize(&s) * d;
    }

    let mut isolation_ratio = f64::INFINITY;
    let dim = f.full[0].nrows();
    let excluded: Vec<usize> = (0..dim).filter(|j| !states.contains(j)).collect();
    if !excluded.is_empty() {
        let mut min_gap = f64::INFINITY;
        let mut max_coupling = 0.0f64;
        let h = contour.step();
        for k in 0..n {
            let vals = &f.values[k];
            for &i in states {
                for &j in &excluded {
                    min_gap = min_gap.min((vals[i] - vals[j]).abs());
                    let next = &f.full[(k + 1) % n];
                    let prev = &f.full[(k + n - 1) % n];
                    // |<psi_i| dV/dphi |psi_j>| = |tau_ij| |E_j - E_i|, gauge-free in magnitude
                    let sgn = |a: &DMatrix<f64>, c: usize| {
                        if a.column(c).dot(&f.full[k].column(c)) < 0.0 {
                            -1.0
                        } else {
                            1.0
                        }
                    };
                    let dj = (next.column(j) * sgn(next, j) - prev.column(j) * sgn(prev, j)) / (2.0 * h);
                    let tau = f.full[k].column(i).dot(&dj);
                    max_coupling = max_coupling.max((tau * (vals[j] - vals[i])).abs());
                }
            }
        }
        isolation_ratio = if max_coupling > 0.0 {
            min_gap / max_coupling
        } else {
            f64::INFINITY
        };
        if min_gap <= max_coupling {
            return Err(Error::NotIsolated {
                gap: min_gap,
                coupling: max_coupling,
            });
        }
    }

    let diag: Vec<f64> = (0..m).map(|i| d[(i, i)]).collect();
    let mut max_off = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                max_off = max_off.max(d[(i, j)].abs());
            }
        }
    }
    let quantized = diag.iter().all(|x| (x.abs() - 1.0).abs() <= 0.02) && max_off < 0.05;
    let mut warnings = Vec::new();
    if isolation_ratio < 10.0 {
        warnings.push(format!(
            "state group weakly isolated: gap / coupling = {isolation_ratio:.2}"
        ));
    }
    if !quantized {
        warnings.push(format!(
            "D matrix not quantized: diagonal {diag:?}, largest off-diagonal {max_off:.3}"
        ));
    }
    if !trace.converged && opts.refine {
        warnings.push("alpha refinement hit the sample cap".into());
    }

    let phases = states
        .windows(2)
        .map(|w| topological_phase(&trace, (w[0], w[1])))
        .collect::<Result<Vec<_>>>()?;

    Ok(TopologyReport {
        contour,
        states: states.to_vec(),
        phis: trace.phis.clone(),
        phases,
        d_matrix: (0..m).map(|i| (0..m).map(|j| d[(i, j)]).collect()).collect(),
        k: diag.iter().filter(|x| **x < 0.0).count(),
        d_diagonal: diag,
        max_off_diagonal: max_off,
        quantized,
        isolation_ratio,
        warnings,
    })
}

/// D matrix and phases for the V_rot eigenvectors of `spec`.
pub fn d_matrix(
    spec: &SystemSpec,
    contour: &Contour,
    states: &[usize],
    opts: &ContourOptions,
) -> Result<TopologyReport> {
    build_vrot(spec, contour.center, opts.n_block)?;
    let nb = opts.n_block;
    let f = move |p: AnglePoint| build_vrot(spec, p, nb).expect("block size checked");
    d_matrix_with(&f, contour, states, opts)
}
