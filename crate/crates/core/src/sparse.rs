//! Compressed sparse row storage for complex Hermitian affinity matrices.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::{Error, Result};

/// Rows per parallel work unit in matrix-vector products.
const ROW_CHUNK: usize = 1024;

/// Sparse `n x n` complex Hermitian matrix in CSR form.
///
/// Entries within a row are sorted by column, with no duplicates and no
/// diagonal entries required. For every stored `(p, q, w)` the entry
/// `(q, p, conj(w))` is stored too, bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHermitianMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<Complex64>,
}

impl SparseHermitianMatrix {
    /// Builds a matrix from per-row `(column, value)` lists, validating the
    /// Hermitian structure exactly.
    pub fn from_rows(rows: Vec<Vec<(u32, Complex64)>>) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (p, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            for pair in row.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(Error::NotHermitian { row: p, col: pair[0].0 as usize });
                }
            }
            for (c, v) in row {
                if c as usize >= n {
                    return Err(Error::NotHermitian { row: p, col: c as usize });
                }
                cols.push(c);
                values.push(v);
            }
            row_ptr.push(cols.len());
        }
        let m = Self { n, row_ptr, cols, values };
        m.check_hermitian()?;
        Ok(m)
    }

    /// Builds a matrix from a dense row-major array, keeping nonzero entries.
    pub fn from_dense(n: usize, dense: &[Complex64]) -> Result<Self> {
        assert_eq!(dense.len(), n * n);
        let rows = (0..n)
            .map(|p| {
                (0..n)
                    .filter(|&q| dense[p * n + q] != Complex64::new(0.0, 0.0))
                    .map(|q| (q as u32, dense[p * n + q]))
                    .collect()
            })
            .collect();
        Self::from_rows(rows)
    }

    fn check_hermitian(&self) -> Result<()> {
        for p in 0..self.n {
            for (q, w) in self.row(p) {
                match self.get(q, p) {
                    Some(v) if v == w.conj() => {}
                    _ => return Err(Error::NotHermitian { row: p, col: q }),
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `p`.
    pub fn row(&self, p: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[p]..self.row_ptr[p + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.values[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, p: usize, q: usize) -> Option<Complex64> {
        let span = self.row_ptr[p]..self.row_ptr[p + 1];
        self.cols[span.clone()]
            .binary_search(&(q as u32))
            .ok()
            .map(|i| self.values[span.start + i])
    }

    /// `(row, column, value)` for every stored entry, row-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.n).flat_map(move |p| self.row(p).map(move |(q, v)| (p, q, v)))
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Applies `f(row, col, value)` to every stored entry. `f` must commute
    /// with conjugation (`f(q, p, conj w) == conj f(p, q, w)`) to keep the
    /// matrix Hermitian; this is enforced by evaluating `f` on the upper
    /// triangle only and mirroring.
    pub fn map_hermitian(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        let values = self
            .entries()
            .map(|(p, q, w)| if q >= p { f(w) } else { f(w.conj()).conj() })
            .collect();
        Self { n: self.n, row_ptr: self.row_ptr.clone(), cols: self.cols.clone(), values }
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n * self.n];
        for (p, q, v) in self.entries() {
            out[p * self.n + q] = v;
        }
        out
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(chunk, ys)| {
            let base = chunk * ROW_CHUNK;
            for (i, yi) in ys.iter_mut().enumerate() {
                let p = base + i;
                let mut acc = Complex64::new(0.0, 0.0);
                for k in self.row_ptr[p]..self.row_ptr[p + 1] {
                    acc += self.values[k] * x[self.cols[k] as usize];
                }
                *yi = acc;
            }
        });
    }

    /// Row sums of entry magnitudes, `D = Diag(|W| 1)`.
    pub fn degrees(&self) -> DegreeVector {
        DegreeVector(
            (0..self.n)
                .map(|p| self.row(p).map(|(_, v)| v.norm()).sum())
                .collect(),
        )
    }
}

/// Diagonal of the degree matrix `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeVector(pub Vec<f64>);

impl DegreeVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}
