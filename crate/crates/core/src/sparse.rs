//! Sparse symmetric matrices.
//!
//! Operators are assembled as the lower triangle in coordinate form and
//! expanded to full compressed-row storage for products.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

/// Rows per rayon task in matrix-vector products.
const ROW_CHUNK: usize = 512;

/// Real symmetric matrix stored as sorted lower-triangle triplets (row >= col).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSymMatrix {
    /// Builds from triplets. Entries above the diagonal are mirrored into the
    /// lower triangle, duplicates are summed and exact zeros dropped.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets
            .into_iter()
            .map(|(r, c, v)| {
                assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
                assert!(v.is_finite(), "non-finite matrix entry at ({r}, {c})");
                if r >= c {
                    (r, c, v)
                } else {
                    (c, r, v)
                }
            })
            .collect();
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        Self { dim, entries: merged }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        let mut t = Vec::new();
        for r in 0..n {
            for c in 0..=r {
                if m[(r, c)] != 0.0 {
                    t.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(n, t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored (lower-triangle) entries.
    pub fn lower_entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz_lower(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let key = if r >= c { (r, c) } else { (c, r) };
        match self.entries.binary_search_by(|e| (e.0, e.1).cmp(&key)) {
            Ok(i) => self.entries[i].2,
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for &(r, c, v) in &self.entries {
            if r == c {
                d[r] = v;
            }
        }
        d
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// Largest absolute row sum, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        let mut rows = vec![0.0; self.dim];
        for &(r, c, v) in &self.entries {
            rows[r] += v.abs();
            if r != c {
                rows[c] += v.abs();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
        m
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|&(r, c, v)| (r, c, v * factor))
            .filter(|e| e.2 != 0.0)
            .collect();
        Self { dim: self.dim, entries }
    }

    /// Full (both triangles) compressed-row copy for fast products.
    pub fn to_csr(&self) -> Csr {
        let mut counts = vec![0usize; self.dim];
        for &(r, c, _) in &self.entries {
            counts[r] += 1;
            if r != c {
                counts[c] += 1;
            }
        }
        let mut indptr = vec![0usize; self.dim + 1];
        for i in 0..self.dim {
            indptr[i + 1] = indptr[i] + counts[i];
        }
        let nnz = indptr[self.dim];
        let mut indices = vec![0usize; nnz];
        let mut data = vec![0.0; nnz];
        let mut fill = indptr.clone();
        let mut push = |r: usize, c: usize, v: f64| {
            indices[fill[r]] = c;
            data[fill[r]] = v;
            fill[r] += 1;
        };
        for &(r, c, v) in &self.entries {
            push(r, c, v);
            if r != c {
                push(c, r, v);
            }
        }
        let mut csr = Csr {
            dim: self.dim,
            indptr,
            indices,
            data,
        };
        csr.sort_rows();
        csr
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
    }

    /// Writes the lower triangle in Matrix Market `coordinate real symmetric` form.
    pub fn write_matrix_market(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "{} {} {}", self.dim, self.dim, self.entries.len())?;
        for &(r, c, v) in &self.entries {
            writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
        }
        Ok(())
    }
}

/// Compressed sparse rows with both triangles stored.
#[derive(Debug, Clone)]
pub struct Csr {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl Csr {
    fn sort_rows(&mut self) {
        for r in 0..self.dim {
            let (a, b) = (self.indptr[r], self.indptr[r + 1]);
            let mut row: Vec<(usize, f64)> = self.indices[a..b]
                .iter()
                .copied()
                .zip(self.data[a..b].iter().copied())
                .collect();
            row.sort_by_key(|e| e.0);
            for (k, (c, v)) in row.into_iter().enumerate() {
                self.indices[a + k] = c;
                self.data[a + k] = v;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].iter().copied().zip(self.data[a..b].iter().copied())
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        y.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(chunk, ys)| {
            let base = chunk * ROW_CHUNK;
            for (k, yr) in ys.iter_mut().enumerate() {
                *yr = self.row(base + k).map(|(c, v)| v * x[c]).sum();
            }
        });
    }

    /// y = A x for complex x.
    pub fn matvec_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        y.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(chunk, ys)| {
            let base = chunk * ROW_CHUNK;
            for (k, yr) in ys.iter_mut().enumerate() {
                *yr = self.row(base + k).map(|(c, v)| x[c] * v).sum();
            }
        });
    }

    /// <x|A|x> for a complex vector (real because A is symmetric).
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        (0..self.dim)
            .into_par_iter()
            .with_min_len(ROW_CHUNK)
            .map(|r| {
                let ax: Complex64 = self.row(r).map(|(c, v)| x[c] * v).sum();
                (x[r].conj() * ax).re
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseSymMatrix {
        SparseSymMatrix::from_triplets(3, [(0, 0, 1.0), (0, 1, 2.0), (2, 1, -1.0), (2, 2, 4.0), (1, 0, 0.5)])
    }

    #[test]
    fn triplets_mirror_and_merge() {
        let m = sample();
        assert_eq!(m.get(1, 0), 2.5);
        assert_eq!(m.get(0, 1), 2.5);
        assert_eq!(m.get(1, 2), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz_lower(), 4);
        assert_eq!(m.trace(), 5.0);
    }

    #[test]
    fn products_agree() {
        let m = sample();
        let d = m.to_dense();
        assert_eq!(d, d.transpose());
        let x = [1.0, -2.0, 0.5];
        let mut y1 = [0.0; 3];
        let mut y2 = [0.0; 3];
        m.matvec(&x, &mut y1);
        m.to_csr().matvec(&x, &mut y2);
        let y3 = &d * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert!((y1[i] - y3[i]).abs() < 1e-14);
            assert!((y2[i] - y3[i]).abs() < 1e-14);
        }
        let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.3 * v)).collect();
        let e = m.to_csr().expectation(&xc);
        let dense_e: f64 = (0..3)
            .map(|r| (0..3).map(|c| (xc[r].conj() * xc[c] * d[(r, c)]).re).sum::<f64>())
            .sum();
        assert!((e - dense_e).abs() < 1e-12);
    }

    #[test]
    fn matrix_market_header() {
        let mut buf = Vec::new();
        sample().write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "%%MatrixMarket matrix coordinate real symmetric");
        assert_eq!(lines.next().unwrap(), "3 3 4");
        assert_eq!(text.lines().count(), 6);
    }
}
