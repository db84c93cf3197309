//! Laser-driven wavepacket propagation in the diabatic product basis,
//! adiabatic-surface populations and orientation.
//!
//! Time is in fs, energies in cm^-1, fields in atomic units. The generator is
//! 2 pi c (H - E(t) d_z E_h), with E_h converting hartree to cm^-1.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolver::small_eigh;
use crate::error::{Error, Result};
use crate::hamiltonian::{assemble_cos_theta, Basis};
use crate::moldata::{MRestriction, SystemSpec, CM_TO_RAD_PER_FS, HARTREE_TO_CM};
use crate::quadrature::{gauss_legendre, normalized_legendre};
use crate::sparse::{Csr, SparseSymMatrix};
use crate::vpes::vibro_photonic_states;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Envelope {
    /// sin^2(pi t / T) on [0, T].
    Sin2 { duration_fs: f64 },
    /// 1 on [0, T].
    Flat { duration_fs: f64 },
}

impl Envelope {
    pub fn duration(&self) -> f64 {
        match *self {
            Envelope::Sin2 { duration_fs } | Envelope::Flat { duration_fs } => duration_fs,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let d = self.duration();
        if !(0.0..=d).contains(&t) {
            return 0.0;
        }
        match self {
            Envelope::Sin2 { .. } => (PI * t / d).sin().powi(2),
            Envelope::Flat { .. } => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    /// Peak field, a.u.
    pub e0_au: f64,
    /// Carrier wavenumber, cm^-1.
    pub carrier_cm1: f64,
    pub envelope: Envelope,
    /// Carrier phase, rad.
    pub phase: f64,
}

impl Pulse {
    /// sin^2 pulse of 60 fs at 0.1/sqrt(2) a.u. resonant with the H35Cl R(0)
    /// line at 2926.1 cm^-1.
    pub fn default_pump() -> Self {
        Self {
            e0_au: 0.1 / 2f64.sqrt(),
            carrier_cm1: 2926.1,
            envelope: Envelope::Sin2 { duration_fs: 60.0 },
            phase: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e0_au >= 0.0 && self.envelope.duration() > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "pulse needs E0 >= 0 and a positive duration, got {self:?}"
            )));
        }
        Ok(())
    }

    /// E(t) in a.u.
    pub fn field(&self, t: f64) -> f64 {
        if self.e0_au == 0.0 {
            return 0.0;
        }
        self.e0_au * self.envelope.value(t) * (CM_TO_RAD_PER_FS * self.carrier_cm1 * t + self.phase).cos()
    }

    /// Time after which the field is identically zero.
    pub fn end(&self) -> f64 {
        if self.e0_au == 0.0 {
            0.0
        } else {
            self.envelope.duration()
        }
    }

    /// Optical period of the carrier, fs.
    pub fn period(&self) -> f64 {
        if self.carrier_cm1 > 0.0 {
            2.0 * PI / (CM_TO_RAD_PER_FS * self.carrier_cm1)
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    pub coeffs: Vec<Complex64>,
    pub time_fs: f64,
}

impl WavePacket {
    pub fn from_real(coeffs: &[f64], time_fs: f64) -> Self {
        Self {
            coeffs: coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect(),
            time_fs,
        }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coeffs)
    }
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[derive(Debug, Clone, Copy)]
pub struct PropagationOptions {
    /// Step while the pulse is on, fs.
    pub dt: f64,
    /// Step once the field has vanished, fs.
    pub dt_free: f64,
    /// Sampling interval, fs; a multiple of both steps.
    pub stride: f64,
    /// Krylov residual tolerance per exponential.
    pub krylov_tol: f64,
    pub max_krylov: usize,
    /// Compare one step against two half steps at the start of each stage.
    pub check_step: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            dt: 0.1,
            dt_free: 0.5,
            stride: 5.0,
            krylov_tol: 1e-12,
            max_krylov: 60,
            check_step: true,
        }
    }
}

/// Sampled propagation result.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    pub norms: Vec<f64>,
    /// <Psi| H |Psi> of the field-free Hamiltonian, cm^-1.
    pub energies: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// H and d_z in compressed form; the generator is a H + b d.
struct Generator {
    h: Csr,
    d: Csr,
}

impl Generator {
    fn apply(&self, a: f64, b: f64, x: &[Complex64], y: &mut [Complex64], scratch: &mut [Complex64]) {
        self.h.matvec_complex(x, y);
        if b != 0.0 {
            self.d.matvec_complex(x, scratch);
            y.par_iter_mut()
                .zip(scratch.par_iter())
                .for_each(|(yi, si)| *yi = *yi * a + *si * b);
        } else if a != 1.0 {
            y.iter_mut().for_each(|yi| *yi *= a);
        }
    }

    /// x <- exp(-i tau (a H + b d)) x by a Lanczos subspace.
    fn expm(&self, tau: f64, a: f64, b: f64, x: &mut [Complex64], tol: f64, max_m: usize) -> Result<()> {
        let n = x.len();
        let beta0 = norm(x);
        if beta0 == 0.0 {
            return Ok(());
        }
        let mut basis: Vec<Vec<Complex64>> = vec![x.iter().map(|c| c / beta0).collect()];
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); n];
        loop {
            let m = basis.len();
            self.apply(a, b, &basis[m - 1], &mut w, &mut scratch);
            let al = cdot(&basis[m - 1], &w).re;
            alpha.push(al);
            for q in &basis {
                let c = cdot(q, &w);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= qi * c);
            }
            let bt = norm(&w);
            // exp(-i tau T) e1 in the current subspace
            let mut t = DMatrix::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alpha[i];
                if i + 1 < m {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = small_eigh(&t);
            let coef: Vec<Complex64> = (0..m)
                .map(|r| {
                    eig.values
                        .iter()
                        .zip(&eig.vectors)
                        .map(|(lam, s)| Complex64::from_polar(1.0, -tau * lam) * s[0] * s[r])
                        .sum()
                })
                .collect();
            let err = bt * coef[m - 1].norm();
            if err <= tol || bt <= 1e-14 * beta0.max(1.0) {
                x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                for (q, c) in basis.iter().zip(&coef) {
                    let c = c * beta0;
                    x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += qi * c);
                }
                return Ok(());
            }
            if m >= max_m.min(n) {
                return Err(Error::StepTooCoarse {
                    dt: tau,
                    reason: format!("Krylov space of {m} vectors left error estimate {err:.2e}"),
                });
            }
            beta.push(bt);
            basis.push(w.iter().map(|c| c / bt).collect());
        }
    }
}

/// Fourth-order commutator-free Magnus step from t to t + dt.
fn cfm4_step(
    gen: &Generator,
    pulse: &Pulse,
    t: f64,
    dt: f64,
    x: &mut [Complex64],
    opts: &PropagationOptions,
) -> Result<()> {
    let s3 = 3f64.sqrt();
    let (c1, c2) = (0.5 - s3 / 6.0, 0.5 + s3 / 6.0);
    let (a1, a2) = ((3.0 - 2.0 * s3) / 12.0, (3.0 + 2.0 * s3) / 12.0);
    let (e1, e2) = (pulse.field(t + c1 * dt), pulse.field(t + c2 * dt));
    let k = CM_TO_RAD_PER_FS;
    if e1 == 0.0 && e2 == 0.0 {
        return gen.expm(k * dt, 1.0, 0.0, x, opts.krylov_tol, opts.max_krylov);
    }
    // each exponent is (a_i + a_j) H - (a_i E1 + a_j E2) E_h d with a_i + a_j = 1/2
    let first = -(a2 * e1 + a1 * e2) * HARTREE_TO_CM;
    let second = -(a1 * e1 + a2 * e2) * HARTREE_TO_CM;
    gen.expm(k * dt, 0.5, first, x, opts.krylov_tol, opts.max_krylov)?;
    gen.expm(k * dt, 0.5, second, x, opts.krylov_tol, opts.max_krylov)
}

fn step_halving_check(
    gen: &Generator,
    pulse: &Pulse,
    t: f64,
    dt: f64,
    x: &[Complex64],
    opts: &PropagationOptions,
) -> Result<()> {
    let mut full = x.to_vec();
    cfm4_step(gen, pulse, t, dt, &mut full, opts)?;
    let mut half = x.to_vec();
    cfm4_step(gen, pulse, t, 0.5 * dt, &mut half, opts)?;
    cfm4_step(gen, pulse, t + 0.5 * dt, 0.5 * dt, &mut half, opts)?;
    let diff: f64 = full
        .iter()
        .zip(&half)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if diff > 1e-6 {
        return Err(Error::StepTooCoarse {
            dt,
            reason: format!("one step and two half steps differ by {diff:.2e}"),
        });
    }
    Ok(())
}

fn is_multiple(x: f64, of: f64) -> bool {
    let r = x / of;
    (r - r.round()).abs() < 1e-9
}

/// Integrates i dC/dt = 2 pi c (H - E(t) d_z) C from `psi0` to `t_end`.
///
/// The propagator is unitary up to the Krylov tolerance; no renormalization
/// is applied.
pub fn propagate(
    h: &SparseSymMatrix,
    d_z: &SparseSymMatrix,
    pulse: &Pulse,
    psi0: &WavePacket,
    t_end: f64,
    opts: &PropagationOptions,
) -> Result<Trajectory> {
    pulse.validate()?;
    if h.dim() != d_z.dim() || h.dim() != psi0.coeffs.len() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: H {}, d_z {}, psi0 {}",
            h.dim(),
            d_z.dim(),
            psi0.coeffs.len()
        )));
    }
    if (psi0.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "initial state norm {} differs from 1",
            psi0.norm()
        )));
    }
    let pulse_end = pulse.end().min(t_end);
    if pulse_end > psi0.time_fs && opts.dt > pulse.period() / 20.0 {
        return Err(Error::StepTooCoarse {
            dt: opts.dt,
            reason: format!("fewer than 20 steps per {:.3} fs optical cycle", pulse.period()),
        });
    }
    if !is_multiple(opts.stride, opts.dt) || !is_multiple(opts.stride, opts.dt_free) {
        return Err(Error::InvalidArgument(format!(
            "stride {} must be a multiple of dt {} and dt_free {}",
            opts.stride, opts.dt, opts.dt_free
        )));
    }

    let gen = Generator {
        h: h.to_csr(),
        d: d_z.to_csr(),
    };
    let mut x = psi0.coeffs.clone();
    let mut t = psi0.time_fs;
    let mut traj = Trajectory {
        times: Vec::new(),
        fields: Vec::new(),
        states: Vec::new(),
        norms: Vec::new(),
        energies: Vec::new(),
    };
    let record = |traj: &mut Trajectory, t: f64, x: &[Complex64]| {
        traj.times.push(t);
        traj.fields.push(pulse.field(t));
        traj.norms.push(norm(x));
        traj.energies.push(gen.h.expectation(x));
        traj.states.push(x.to_vec());
    };
    record(&mut traj, t, &x);

    let mut checked_pulse = !opts.check_step;
    let mut checked_free = !opts.check_step;
    let mut next_sample = t + opts.stride;
    while t < t_end - 1e-9 {
        let in_pulse = t < pulse_end - 1e-9;
        let mut dt = if in_pulse { opts.dt } else { opts.dt_free };
        if in_pulse {
            dt = dt.min(pulse_end - t);
        }
        dt = dt.min(next_sample - t).min(t_end - t);
        if in_pulse && !checked_pulse {
            step_halving_check(&gen, pulse, t, dt, &x, opts)?;
            checked_pulse = true;
        }
        if !in_pulse && !checked_free {
            step_halving_check(&gen, pulse, t, dt, &x, opts)?;
            checked_free = true;
        }
        cfm4_step(&gen, pulse, t, dt, &mut x, opts)?;
        t += dt;
        if t >= next_sample - 1e-9 || t >= t_end - 1e-9 {
            record(&mut traj, t, &x);
            next_sample += opts.stride;
        }
    }
    Ok(traj)
}

/// <cos theta_i>(t) at every trajectory sample.
pub fn orientation(traj: &Trajectory, basis: &Basis, molecule: usize) -> Vec<f64> {
    let cos = assemble_cos_theta(basis, molecule).to_csr();
    traj.states.iter().map(|x| cos.expectation(x)).collect()
}

/// Projects product-basis wavepackets onto the local eigenvectors of the full
/// vibro-photonic V_rot on a Gauss-Legendre grid in (cos theta_1, cos theta_2).
pub struct AdiabaticProjector {
    n_nodes: usize,
    n_vp: usize,
    j_max: [usize; 2],
    /// Synthesis matrices L_i[a, J] = sqrt(w_a) P~_J(x_a).
    synth: [DMatrix<f64>; 2],
    /// `vectors[a * n + b]` columns are V_rot eigenvectors at node (a, b).
    vectors: Vec<DMatrix<f64>>,
    /// For each basis state: (vibro-photonic index, J_1, J_2).
    layout: Vec<(usize, usize, usize)>,
}

impl AdiabaticProjector {
    /// `n_nodes` Gauss-Legendre nodes per axis; must be at least J_max + 1.
    pub fn new(spec: &SystemSpec, basis: &Basis, n_nodes: usize) -> Result<Self> {
        if spec.n_mol() != 2 || spec.truncation.m != MRestriction::AllZero {
            return Err(Error::InvalidArgument(
                "adiabatic projection needs two molecules in the M = 0 manifold".into(),
            ));
        }
        let j_max = [basis.j_max()[0] as usize, basis.j_max()[1] as usize];
        if n_nodes < j_max[0].max(j_max[1]) + 1 {
            return Err(Error::QuadratureUnderResolved { change: f64::NAN });
        }
        let vp = vibro_photonic_states(spec);
        let (x, w) = gauss_legendre(n_nodes);
        let synth = [0, 1].map(|i| {
            let mut l = DMatrix::zeros(n_nodes, j_max[i] + 1);
            for a in 0..n_nodes {
                let p = normalized_legendre(j_max[i] as u32, x[a]);
                for j in 0..=j_max[i] {
                    l[(a, j)] = w[a].sqrt() * p[j];
                }
            }
            l
        });
        let vectors = (0..n_nodes * n_nodes)
            .into_par_iter()
            .map(|idx| {
                let (a, b) = (idx / n_nodes, idx % n_nodes);
                let m = crate::vpes::vrot_from_cos(spec, &vp, &[x[a], x[b]]);
                let shift = m.diagonal().mean();
                let m = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
                    m[(i, j)] - if i == j { shift } else { 0.0 }
                });
                let eig = small_eigh(&m);
                DMatrix::from_fn(vp.len(), vp.len(), |s, k| eig.vectors[k][s])
            })
            .collect();
        let layout = basis
            .states()
            .iter()
            .map(|s| {
                let v: Vec<u32> = s.mols.iter().map(|m| m.v).collect();
                let k = vp
                    .iter()
                    .position(|q| q.n == s.n && q.v == v)
                    .expect("every basis state has a vibro-photonic label");
                (k, s.mols[0].j as usize, s.mols[1].j as usize)
            })
            .collect();
        Ok(Self {
            n_nodes,
            n_vp: vp.len(),
            j_max,
            synth,
            vectors,
            layout,
        })
    }

    pub fn n_surfaces(&self) -> usize {
        self.n_vp
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Populations of every V_rot surface, ascending in energy.
    pub fn project(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let (n1, n2) = (self.j_max[0] + 1, self.j_max[1] + 1);
        let n = self.n_nodes;
        // grid amplitudes psi_s(a, b), real and imaginary parts separately
        let mut grids = Vec::with_capacity(2 * self.n_vp);
        for part in 0..2 {
            let mut c = vec![DMatrix::<f64>::zeros(n1, n2); self.n_vp];
            for (coef, &(s, j1, j2)) in coeffs.iter().zip(&self.layout) {
                c[s][(j1, j2)] = if part == 0 { coef.re } else { coef.im };
            }
            for cs in c {
                grids.push(&self.synth[0] * cs * self.synth[1].transpose());
            }
        }
        let mut pops = vec![0.0; self.n_vp];
        for a in 0..n {
            for b in 0..n {
                let u = &self.vectors[a * n + b];
                for k in 0..self.n_vp {
                    let (mut re, mut im) = (0.0, 0.0);
                    for s in 0..self.n_vp {
                        re += u[(s, k)] * grids[s][(a, b)];
                        im += u[(s, k)] * grids[self.n_vp + s][(a, b)];
                    }
                    pops[k] += re * re + im * im;
                }
            }
        }
        pops
    }
}

/// p^(a)(t) for every trajectory sample.
pub fn adiabatic_populations(traj: &Trajectory, projector: &AdiabaticProjector) -> Vec<Vec<f64>> {
    traj.states.par_iter().map(|x| projector.project(x)).collect()
}

/// Largest population change when the node count per axis doubles from
/// `n_nodes`; fails when it exceeds `tol`.
pub fn check_quadrature(
    spec: &SystemSpec,
    basis: &Basis,
    coeffs: &[Complex64],
    n_nodes: usize,
    tol: f64,
) -> Result<f64> {
    let coarse = AdiabaticProjector::new(spec, basis, n_nodes)?.project(coeffs);
    let fine = AdiabaticProjector::new(spec, basis, 2 * n_nodes)?.project(coeffs);
    let change = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if change > tol {
        return Err(Error::QuadratureUnderResolved { change });
    }
    Ok(change)
}

/// Trajectory CSV: time, field, p_0.., <cos theta_1>, <cos theta_2>, norm, energy.
pub fn write_trajectory_csv(
    traj: &Trajectory,
    populations: &[Vec<f64>],
    orientations: &[Vec<f64>],
    mut w: impl Write,
) -> std::io::Result<()> {
    let n_pop = populations.first().map_or(0, |p| p.len());
    let mut header = vec!["time_fs".to_string(), "field_au".to_string()];
    header.extend((0..n_pop).map(|k| format!("p{k}")));
    header.extend((0..orientations.len()).map(|i| format!("cos_theta{}", i + 1)));
    header.push("norm".into());
    header.push("energy_cm1".into());
    writeln!(w, "{}", header.join(","))?;
    for k in 0..traj.len() {
        let mut row = vec![format!("{:.6}", traj.times[k]), format!("{:.10e}", traj.fields[k])];
        if let Some(p) = populations.get(k) {
            row.extend(p.iter().map(|v| format!("{v:.12}")));
        }
        row.extend(orientations.iter().map(|o| format!("{:.12}", o[k])));
        row.push(format!("{:.15}", traj.norms[k]));
        row.push(format!("{:.10}", traj.energies[k]));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
