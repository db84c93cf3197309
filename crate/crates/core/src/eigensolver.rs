//! Real symmetric eigensolvers: dense (faer) and Lanczos with full
//! reorthogonalization for the low end of large sparse spectra.

use faer::{Mat, Side};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::{Csr, SparseSymMatrix};

/// Eigenpairs sorted by ascending eigenvalue; `vectors[k]` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Dense symmetric eigendecomposition of a nalgebra matrix (lower triangle read).
pub fn dense_eigh(m: &DMatrix<f64>) -> EigenPairs {
    let n = m.nrows();
    let a = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let eig = a
        .self_adjoint_eigen(Side::Lower)
        .expect("self-adjoint eigendecomposition of a finite matrix");
    let s = eig.S();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| s[x].total_cmp(&s[y]));
    EigenPairs {
        values: order.iter().map(|&k| s[k]).collect(),
        vectors: order.iter().map(|&k| (0..n).map(|i| u[(i, k)]).collect()).collect(),
    }
}

/// Small dense problems (surface points, Krylov projections) go through
/// nalgebra to avoid the faer setup cost.
pub fn small_eigh(m: &DMatrix<f64>) -> EigenPairs {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    EigenPairs {
        values: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        vectors: order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect(),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Krylov dimension cap.
    pub max_dim: usize,
    /// Residual tolerance relative to the matrix norm bound.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_dim: 3000,
            tol: 1e-10,
            seed: 0x5eed,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Lowest `k` eigenpairs of a sparse symmetric matrix.
///
/// Single-vector Lanczos with full (twice-applied) Gram-Schmidt
/// reorthogonalization. The Krylov space grows until every requested Ritz
/// pair has residual `||H x - lambda x|| <= tol * ||H||`. Exactly degenerate
/// eigenvalues are resolved only up to the multiplicity the start vector
/// reaches.
pub fn lanczos_lowest(h: &SparseSymMatrix, k: usize, opts: LanczosOptions) -> Result<EigenPairs> {
    let n = h.dim();
    assert!(k >= 1 && k <= n, "requested {k} eigenpairs of a {n}x{n} matrix");
    let csr = h.to_csr();
    let norm = h.norm_bound().max(f64::MIN_POSITIVE);
    let cap = opts.max_dim.min(n);
    let check_every = 20;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random_unit = |basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..4 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            for _ in 0..2 {
                for q in basis {
                    let c = dot(q, &v);
                    axpy(-c, q, &mut v);
                }
            }
            let nv = dot(&v, &v).sqrt();
            if nv > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nv);
                return Some(v);
            }
        }
        None
    };

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut q = random_unit(&basis).expect("nonempty space");
    let mut w = vec![0.0; n];
    let mut last_residual = f64::INFINITY;

    loop {
        basis.push(q.clone());
        csr.matvec(&q, &mut w);
        let a = dot(&q, &w);
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                axpy(-c, v, &mut w);
            }
        }
        let b = dot(&w, &w).sqrt();
        let m = basis.len();

        let done_space = m >= cap;
        if m >= k && (m.is_multiple_of(check_every) || done_space || b <= 1e-12 * norm) {
            let ritz = ritz_pairs(&alpha, &beta, &basis, k);
            let mut worst = 0.0f64;
            let mut y = vec![0.0; n];
            for (val, vec) in ritz.values.iter().zip(&ritz.vectors) {
                csr.matvec(vec, &mut y);
                axpy(-val, vec, &mut y);
                worst = worst.max(dot(&y, &y).sqrt());
            }
            last_residual = worst;
            if worst <= opts.tol * norm {
                return Ok(ritz);
            }
            if done_space {
                return Err(Error::NoConvergence {
                    iterations: m,
                    residual: worst / norm,
                });
            }
        }
        if done_space {
            return Err(Error::NoConvergence {
                iterations: m,
                residual: last_residual / norm,
            });
        }

        if b <= 1e-12 * norm {
            // Invariant subspace: restart with a fresh direction.
            match random_unit(&basis) {
                Some(v) => {
                    beta.push(0.0);
                    q = v;
                }
                None => {
                    return Ok(ritz_pairs(&alpha, &beta, &basis, k));
                }
            }
        } else {
            beta.push(b);
            q = w.iter().map(|x| x / b).collect();
        }
    }
}

fn ritz_pairs(alpha: &[f64], beta: &[f64], basis: &[Vec<f64>], k: usize) -> EigenPairs {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i + 1, i)] = beta[i];
            t[(i, i + 1)] = beta[i];
        }
    }
    let eig = small_eigh(&t);
    let n = basis[0].len();
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for idx in 0..k.min(m) {
        let s = &eig.vectors[idx];
        let mut x = vec![0.0; n];
        for (j, q) in basis.iter().enumerate() {
            axpy(s[j], q, &mut x);
        }
        let nx = dot(&x, &x).sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
        values.push(eig.values[idx]);
        vectors.push(x);
    }
    EigenPairs { values, vectors }
}

/// ||H x - lambda x|| for each pair.
pub fn residuals(h: &Csr, pairs: &EigenPairs) -> Vec<f64> {
    let mut y = vec![0.0; h.dim()];
    pairs
        .values
        .iter()
        .zip(&pairs.vectors)
        .map(|(&val, vec)| {
            h.matvec(vec, &mut y);
            axpy(-val, vec, &mut y);
            dot(&y, &y).sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_by_two_closed_form() {
        let (c, delta) = (1.3f64, 2.0f64);
        let m = DMatrix::from_row_slice(2, 2, &[0.0, c, c, delta]);
        let root = (delta * delta / 4.0 + c * c).sqrt();
        for eig in [dense_eigh(&m), small_eigh(&m)] {
            assert_abs_diff_eq!(eig.values[0], delta / 2.0 - root, epsilon = 1e-14);
            assert_abs_diff_eq!(eig.values[1], delta / 2.0 + root, epsilon = 1e-14);
        }
    }

    #[test]
    fn lanczos_matches_dense_on_random_sparse() {
        let n = 400;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, i as f64 * 0.37 + rng.gen::<f64>()));
            for _ in 0..3 {
                let j = rng.gen_range(0..n);
                if j != i {
                    t.push((i, j, rng.gen::<f64>() - 0.5));
                }
            }
        }
        let h = SparseSymMatrix::from_triplets(n, t);
        let dense = dense_eigh(&h.to_dense());
        let lz = lanczos_lowest(&h, 6, LanczosOptions::default()).unwrap();
        for k in 0..6 {
            assert_abs_diff_eq!(lz.values[k], dense.values[k], epsilon = 1e-8);
        }
        let res = residuals(&h.to_csr(), &lz);
        assert!(res.iter().all(|&r| r <= 1e-9 * h.norm_bound()));
    }

    #[test]
    fn lanczos_reports_nonconvergence() {
        let n = 200;
        let t: Vec<_> = (0..n)
            .flat_map(|i| {
                let mut v = vec![(i, i, (i as f64).sqrt())];
                if i > 0 {
                    v.push((i, i - 1, 1.0));
                }
                v
            })
            .collect();
        let h = SparseSymMatrix::from_triplets(n, t);
        let err = lanczos_lowest(
            &h,
            3,
            LanczosOptions {
                max_dim: 8,
                tol: 1e-14,
                seed: 1,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 8, .. }));
    }
}
