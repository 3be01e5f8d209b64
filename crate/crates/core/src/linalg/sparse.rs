use std::fmt::Write as _;
use std::io;

use super::SolverError;
use crate::runtime::Runtime;

/// Compressed sparse row matrix with sorted, duplicate-free rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    /// `Some(true)` when the producer guarantees symmetry, `Some(false)`
    /// when it is known not to hold.
    pub symmetric_hint: Option<bool>,
}

impl SparseMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self, SolverError> {
        for &(r, c, v) in &triplets {
            if r >= rows || c >= cols {
                return Err(SolverError::OutOfBounds { row: r, col: c, rows, cols });
            }
            if !v.is_finite() {
                return Err(SolverError::NonFinite { row: r, col: c });
            }
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0; rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(SparseMatrix {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
            symmetric_hint: None,
        })
    }

    /// Keeps the non-zero entries of a row-major dense matrix.
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Result<Self, SolverError> {
        if data.len() != rows * cols {
            return Err(SolverError::DimensionMismatch { rows, cols, len: data.len() });
        }
        let triplets = data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(k, &v)| (k / cols, k % cols, v))
            .collect();
        Self::from_triplets(rows, cols, triplets)
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        SparseMatrix {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
            symmetric_hint: Some(true),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|k| vals[k]).unwrap_or(0.0)
    }

    /// `y = K x`.
    pub fn spmv(&self, x: &[f64], rt: &Runtime) -> Result<Vec<f64>, SolverError> {
        let mut y = vec![0.0; self.rows];
        self.spmv_into(x, &mut y, rt)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64], rt: &Runtime) -> Result<(), SolverError> {
        if x.len() != self.cols || y.len() != self.rows {
            return Err(SolverError::DimensionMismatch {
                rows: self.rows,
                cols: self.cols,
                len: if x.len() != self.cols { x.len() } else { y.len() },
            });
        }
        rt.for_each_row(y, 1, |r, out| {
            let (cols, vals) = self.row(r);
            out[0] = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        });
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let triplets = (0..self.rows)
            .flat_map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(move |(&c, &v)| (c, r, v))
            })
            .collect();
        let mut t = Self::from_triplets(self.cols, self.rows, triplets).expect("transpose of a valid matrix");
        t.symmetric_hint = self.symmetric_hint;
        t
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `||K - K^T||_F / ||K||_F`.
    pub fn asymmetry(&self) -> f64 {
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        let t = self.transpose();
        let mut diff = 0.0;
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                diff += (v - t.get(r, c)).powi(2);
            }
        }
        for r in 0..t.rows {
            let (cols, vals) = t.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if r >= self.rows || self.row(r).0.binary_search(&c).is_err() {
                    diff += v * v;
                }
            }
        }
        diff.sqrt() / norm
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[r * self.cols + c] = v;
            }
        }
        out
    }

    /// Principal submatrix on the given sorted index set.
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.cols.max(self.rows)];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut triplets = Vec::new();
        for (new_r, &r) in keep.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if map[c] != usize::MAX {
                    triplets.push((new_r, map[c], v));
                }
            }
        }
        let mut sub = Self::from_triplets(keep.len(), keep.len(), triplets).expect("indices are in range");
        sub.symmetric_hint = self.symmetric_hint;
        sub
    }

    /// MatrixMarket coordinate text, one-based indices.
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::new();
        out.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(out, "{} {} {}", self.rows, self.cols, self.nnz());
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let _ = writeln!(out, "{} {} {}", r + 1, c + 1, v);
            }
        }
        out
    }

    pub fn write_matrix_market<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_matrix_market().as_bytes())
    }
}
