//! Compressed sparse row matrices, deterministic triplet assembly and
//! MatrixMarket coordinate I/O.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::io::{BufRead, Write};

/// Row-major compressed sparse matrix with sorted, duplicate-free columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

/// Unordered (row, col, value) triplets; duplicates are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sums duplicates in insertion order, which makes the result independent
    /// of how the triplets were produced as long as the insertion order is fixed.
    pub fn to_csr(&self) -> CsrMatrix {
        let mut count = vec![0usize; self.nrows + 1];
        for &(i, _, _) in &self.entries {
            count[i + 1] += 1;
        }
        for i in 0..self.nrows {
            count[i + 1] += count[i];
        }
        let mut fill = count.clone();
        let mut cols = vec![0usize; self.entries.len()];
        let mut vals = vec![0.0; self.entries.len()];
        for &(i, j, v) in &self.entries {
            cols[fill[i]] = j;
            vals[fill[i]] = v;
            fill[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            let (a, b) = (count[i], count[i + 1]);
            order.clear();
            order.extend(a..b);
            // stable sort keeps insertion order among equal columns
            order.sort_by_key(|&p| cols[p]);
            let mut last = usize::MAX;
            for &p in &order {
                if cols[p] == last {
                    *values.last_mut().unwrap() += vals[p];
                } else {
                    col_idx.push(cols[p]);
                    values.push(vals[p]);
                    last = cols[p];
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, 1.0);
        }
        t.to_csr()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            *yi = s;
        }
    }

    /// y = Aᵀ x
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, xi) in x.iter().enumerate() {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[p]] += self.values[p] * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Triplets::new(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push(j, i, v);
            }
        }
        t.to_csr()
    }

    /// Sub-matrix `A[rows, cols]`.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.ncols];
        for (c, &j) in cols.iter().enumerate() {
            map[j] = c;
        }
        let mut t = Triplets::new(rows.len(), cols.len());
        for (r, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                if map[j] != usize::MAX {
                    t.push(r, map[j], v);
                }
            }
        }
        t.to_csr()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[(i, j)] += v;
            }
        }
        d
    }

    pub fn from_dense(d: &DMatrix<f64>, drop_tol: f64) -> CsrMatrix {
        let mut t = Triplets::new(d.nrows(), d.ncols());
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if d[(i, j)].abs() > drop_tol {
                    t.push(i, j, d[(i, j)]);
                }
            }
        }
        t.to_csr()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Largest absolute entry of A - Aᵀ.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut m: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m = m.max((v - t.get(i, j)).abs());
            }
            for (j, v) in t.row(i) {
                m = m.max((v - self.get(i, j)).abs());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes the matrix in MatrixMarket coordinate real general format.
    ///
    /// Values use Rust's shortest round-trip decimal representation, so a
    /// re-read reproduces every entry bit for bit.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                writeln!(w, "{} {} {:?}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }

    pub fn read_matrix_market<R: BufRead>(r: R) -> Result<CsrMatrix> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MatrixMarket("empty input".into()))??;
        if !header.starts_with("%%MatrixMarket matrix coordinate real") {
            return Err(Error::MatrixMarket(format!("unsupported header: {header}")));
        }
        let symmetric = header.contains("symmetric");
        let mut size: Option<(usize, usize, usize)> = None;
        let mut t = Triplets::default();
        for line in lines {
            let line = line?;
            let s = line.trim();
            if s.is_empty() || s.starts_with('%') {
                continue;
            }
            let parts: Vec<&str> = s.split_whitespace().collect();
            let bad = || Error::MatrixMarket(format!("malformed line: {s}"));
            if size.is_none() {
                if parts.len() != 3 {
                    return Err(bad());
                }
                let p = |i: usize| parts[i].parse::<usize>().map_err(|_| bad());
                size = Some((p(0)?, p(1)?, p(2)?));
                t = Triplets::new(p(0)?, p(1)?);
                continue;
            }
            if parts.len() != 3 {
                return Err(bad());
            }
            let i: usize = parts[0].parse().map_err(|_| bad())?;
            let j: usize = parts[1].parse().map_err(|_| bad())?;
            let v: f64 = parts[2].parse().map_err(|_| bad())?;
            if i == 0 || j == 0 || i > t.nrows || j > t.ncols {
                return Err(bad());
            }
            t.push(i - 1, j - 1, v);
            if symmetric && i != j {
                t.push(j - 1, i - 1, v);
            }
        }
        let (_, _, nnz) = size.ok_or_else(|| Error::MatrixMarket("missing size line".into()))?;
        if !symmetric && t.len() != nnz {
            return Err(Error::MatrixMarket(format!(
                "expected {nnz} entries, found {}",
                t.len()
            )));
        }
        Ok(t.to_csr())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let mut t = Triplets::new(2, 3);
        t.push(1, 2, 1.0);
        t.push(0, 1, 2.0);
        t.push(1, 0, 3.0);
        t.push(1, 2, 0.5);
        let a = t.to_csr();
        assert_eq!(a.row_ptr, vec![0, 1, 3]);
        assert_eq!(a.col_idx, vec![1, 0, 2]);
        assert_eq!(a.values, vec![2.0, 3.0, 1.5]);
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]), vec![2.0, 4.5]);
        assert_eq!(a.matvec_transpose(&[1.0, 2.0]), vec![6.0, 2.0, 3.0]);
    }

    #[test]
    fn matrix_market_round_trip_is_exact() {
        let mut t = Triplets::new(3, 3);
        t.push(0, 0, 1.0 / 3.0);
        t.push(2, 1, -std::f64::consts::PI * 1e-17);
        t.push(1, 2, 12345.678901234567);
        let a = t.to_csr();
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let b = CsrMatrix::read_matrix_market(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn submatrix_and_dense() {
        let d = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 3.0, 4.0, 5.0, 0.0, 6.0]);
        let a = CsrMatrix::from_dense(&d, 0.0);
        let s = a.submatrix(&[2, 0], &[0, 2]);
        assert_eq!(s.to_dense(), DMatrix::from_row_slice(2, 2, &[5.0, 6.0, 1.0, 0.0]));
        assert_eq!(a.transpose().to_dense(), d.transpose());
    }
}
