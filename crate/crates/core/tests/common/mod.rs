//! Independent reference implementations used by the oracle and acceptance
//! tests. Nothing here calls into the library's numerics.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rovpol::moldata::SystemSpec;

/// Clebsch-Gordan coefficients of one (j1, j2) pair built by lowering from
/// highest-weight states and Gram-Schmidt, Condon-Shortley phases.
pub struct CgTable {
    j1: i32,
    j2: i32,
    /// coupled[J - |j1 - j2|][M + J] = vector over (m1, m2)
    coupled: Vec<Vec<Vec<f64>>>,
}

impl CgTable {
    fn idx(&self, m1: i32, m2: i32) -> usize {
        ((m1 + self.j1) * (2 * self.j2 + 1) + (m2 + self.j2)) as usize
    }

    pub fn new(j1: i32, j2: i32) -> Self {
        let dim = ((2 * j1 + 1) * (2 * j2 + 1)) as usize;
        let mut table = Self {
            j1,
            j2,
            coupled: Vec::new(),
        };
        let jmin = (j1 - j2).abs();
        let mut by_j: Vec<Vec<Vec<f64>>> = vec![Vec::new(); (j1 + j2 - jmin + 1) as usize];
        for jj in (jmin..=j1 + j2).rev() {
            let mut v = vec![0.0; dim];
            v[table.idx(j1, jj - j1)] = 1.0;
            // highest J components already found, indexed by M
            let clean = |v: &mut Vec<f64>, mm: i32| {
                for _pass in 0..2 {
                    for higher in jj + 1..=j1 + j2 {
                        let u = &by_j[(higher - jmin) as usize][(mm + higher) as usize];
                        let c: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                        v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
                    }
                }
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= n);
            };
            clean(&mut v, jj);
            if v[table.idx(j1, jj - j1)] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            // descending M, stored ascending
            let mut ladder = vec![v];
            for mm in (-jj + 1..=jj).rev() {
                let cur = ladder.last().unwrap();
                let mut next = vec![0.0; dim];
                for m1 in -j1..=j1 {
                    for m2 in -j2..=j2 {
                        let c = cur[table.idx(m1, m2)];
                        if c == 0.0 {
                            continue;
                        }
                        if m1 > -j1 {
                            let f = ((j1 * (j1 + 1) - m1 * (m1 - 1)) as f64).sqrt();
                            next[table.idx(m1 - 1, m2)] += f * c;
                        }
                        if m2 > -j2 {
                            let f = ((j2 * (j2 + 1) - m2 * (m2 - 1)) as f64).sqrt();
                            next[table.idx(m1, m2 - 1)] += f * c;
                        }
                    }
                }
                clean(&mut next, mm - 1);
                ladder.push(next);
            }
            ladder.reverse();
            by_j[(jj - jmin) as usize] = ladder;
        }
        table.coupled = by_j;
        table
    }

    /// <j1 m1 j2 m2 | J M>
    pub fn get(&self, m1: i32, m2: i32, jj: i32, mm: i32) -> f64 {
        let jmin = (self.j1 - self.j2).abs();
        if jj < jmin || jj > self.j1 + self.j2 || mm.abs() > jj || m1 + m2 != mm {
            return 0.0;
        }
        self.coupled[(jj - jmin) as usize][(mm + jj) as usize][self.idx(m1, m2)]
    }

    /// 3-j symbol from the Clebsch-Gordan coefficient.
    pub fn three_j(&self, j3: i32, m1: i32, m2: i32, m3: i32) -> f64 {
        let phase = if (self.j1 - self.j2 - m3).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
        phase / ((2 * j3 + 1) as f64).sqrt() * self.get(m1, m2, j3, -m3)
    }
}

/// Worst |3-j(library) - 3-j(brute force)| over every symbol with j <= j_max.
pub fn max_three_j_error(j_max: i32) -> f64 {
    let mut worst = 0.0f64;
    for j1 in 0..=j_max {
        for j2 in 0..=j_max {
            let cg = CgTable::new(j1, j2);
            for j3 in (j1 - j2).abs()..=(j1 + j2).min(j_max) {
                for m1 in -j1..=j1 {
                    for m2 in -j2..=j2 {
                        let m3 = -m1 - m2;
                        if m3.abs() > j3 {
                            continue;
                        }
                        let lib = rovpol::angular::wigner3j(j1, j2, j3, m1, m2, m3);
                        worst = worst.max((lib - cg.three_j(j3, m1, m2, m3)).abs());
                    }
                }
            }
        }
    }
    worst
}

/// <J 0| cos |J+1 0> in closed form.
pub fn cos_up_m0(j: u32) -> f64 {
    let j = j as f64;
    (j + 1.0) / ((2.0 * j + 1.0) * (2.0 * j + 3.0)).sqrt()
}

/// Product state label (N, v1, J1, v2, J2).
pub type Label = (u32, u32, u32, u32, u32);

/// Dense molecule-cavity Hamiltonian for two molecules with all M = 0.
pub fn dense_h(spec: &SystemSpec, n_max: u32, v_max: u32, j_max: u32) -> (Vec<Label>, DMatrix<f64>) {
    let mut labels = Vec::new();
    for n in 0..=n_max {
        for v1 in 0..=v_max {
            for j1 in 0..=j_max {
                for v2 in 0..=v_max {
                    for j2 in 0..=j_max {
                        labels.push((n, v1, j1, v2, j2));
                    }
                }
            }
        }
    }
    let mol = &spec.molecules;
    let scale = spec.cavity.g / mol[spec.cavity.reference].mu[0][0];
    let cos = |a: u32, b: u32| -> f64 {
        if b == a + 1 {
            cos_up_m0(a)
        } else if a == b + 1 {
            cos_up_m0(b)
        } else {
            0.0
        }
    };
    let dim = labels.len();
    let mut h = DMatrix::zeros(dim, dim);
    for (r, &(n, v1, j1, v2, j2)) in labels.iter().enumerate() {
        let e = |i: usize, v: u32, j: u32| mol[i].e_vib[v as usize] + mol[i].b_rot[v as usize] * (j * (j + 1)) as f64;
        h[(r, r)] = e(0, v1, j1) + e(1, v2, j2) + n as f64 * spec.cavity.omega_c;
        for (c, &(np, w1, k1, w2, k2)) in labels.iter().enumerate() {
            let photon = if np == n + 1 {
                (np as f64).sqrt()
            } else if n == np + 1 {
                (n as f64).sqrt()
            } else {
                continue;
            };
            let mut x = 0.0;
            if v2 == w2 && j2 == k2 {
                x += mol[0].mu[v1 as usize][w1 as usize] * cos(j1, k1);
            }
            if v1 == w1 && j1 == k1 {
                x += mol[1].mu[v2 as usize][w2 as usize] * cos(j2, k2);
            }
            h[(r, c)] = -scale * x * photon;
        }
    }
    (labels, h)
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-26 * (1.0 + a.norm_squared()) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut v: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Four-state V_rot over |00,0>, |00,1>, |10,0>, |01,0> at given cosines.
pub fn vrot4(spec: &SystemSpec, c1: f64, c2: f64) -> DMatrix<f64> {
    let mol = &spec.molecules;
    let scale = spec.cavity.g / mol[spec.cavity.reference].mu[0][0];
    let mut m = DMatrix::zeros(4, 4);
    m[(1, 1)] = spec.cavity.omega_c;
    m[(2, 2)] = mol[0].e_vib[1];
    m[(3, 3)] = mol[1].e_vib[1];
    m[(0, 1)] = -scale * (mol[0].mu[0][0] * c1 + mol[1].mu[0][0] * c2);
    m[(1, 2)] = -scale * mol[0].mu[0][1] * c1;
    m[(1, 3)] = -scale * mol[1].mu[0][1] * c2;
    for i in 0..4 {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}

/// Grid-local minima of the (a, b) gap of `vrot4` below `threshold` on an
/// n x n grid over [0, pi]^2, with the diagonal mean shifted out.
pub fn scan_gap_minima(spec: &SystemSpec, pair: (usize, usize), n: usize, threshold: f64) -> Vec<(f64, f64)> {
    let h = std::f64::consts::PI / (n - 1) as f64;
    let mut gap = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let m = vrot4(spec, (i as f64 * h).cos(), (j as f64 * h).cos());
            let e = jacobi_eigenvalues(&m);
            gap[i * n + j] = e[pair.1] - e[pair.0];
        }
    }
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let g = gap[i * n + j];
            if g >= threshold {
                continue;
            }
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                        continue;
                    }
                    if gap[a as usize * n + b as usize] < g {
                        is_min = false;
                    }
                }
            }
            if is_min {
                out.push((i as f64 * h, j as f64 * h));
            }
        }
    }
    out
}

/// Simpson rule on [a, b] with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Normalized associated Legendre function Theta_J^M(x), M >= 0, with the
/// Condon-Shortley phase.
pub fn theta_jm(j: u32, m: u32, x: f64) -> f64 {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= -((2 * k - 1) as f64) * s;
    }
    let p = if j == m {
        pmm
    } else {
        let mut a = pmm;
        let mut b = x * (2 * m + 1) as f64 * pmm;
        for l in m + 2..=j {
            let c = (x * (2 * l - 1) as f64 * b - (l + m - 1) as f64 * a) / (l - m) as f64;
            a = b;
            b = c;
        }
        b
    };
    let ratio: f64 = ((j - m + 1)..=(j + m)).map(|k| k as f64).product::<f64>();
    ((2 * j + 1) as f64 / 2.0 / ratio).sqrt() * p
}

/// Two-level population period under a static field, from a propagated
/// trajectory, by parabolic refinement of the first return of P_2 to zero.
pub fn rabi_period(delta: f64, mu: f64, e0: f64, dt: f64) -> (f64, f64) {
    use num_complex::Complex64;
    use rovpol::dynamics::{propagate, Envelope, PropagationOptions, Pulse, WavePacket};
    use rovpol::moldata::{CM_TO_RAD_PER_FS, HARTREE_TO_CM};
    use rovpol::sparse::SparseSymMatrix;

    let v = -e0 * mu * HARTREE_TO_CM;
    let omega = (delta * delta + 4.0 * v * v).sqrt();
    let analytic = 2.0 * std::f64::consts::PI / (CM_TO_RAD_PER_FS * omega);
    let h = SparseSymMatrix::from_triplets(2, [(1, 1, delta)]);
    let d = SparseSymMatrix::from_triplets(2, [(1, 0, mu)]);
    let pulse = Pulse {
        e0_au: e0,
        carrier_cm1: 0.0,
        envelope: Envelope::Flat {
            duration_fs: 10.0 * analytic,
        },
        phase: 0.0,
    };
    let psi0 = WavePacket {
        coeffs: vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        time_fs: 0.0,
    };
    let opts = PropagationOptions {
        dt,
        dt_free: dt,
        stride: dt,
        ..PropagationOptions::default()
    };
    let traj = propagate(&h, &d, &pulse, &psi0, 1.5 * analytic, &opts).expect("two-level propagation");
    let p2: Vec<f64> = traj.states.iter().map(|x| x[1].norm_sqr()).collect();
    let start = traj.times.iter().position(|&t| t > 0.5 * analytic).unwrap();
    let k = (start..p2.len() - 1).min_by(|&a, &b| p2[a].total_cmp(&p2[b])).unwrap();
    let (y0, y1, y2) = (p2[k - 1], p2[k], p2[k + 1]);
    let shift = 0.5 * (y0 - y2) / (y0 - 2.0 * y1 + y2);
    (traj.times[k] + shift * dt, analytic)
}
