//! Direct solvers: an envelope (skyline) sparse Cholesky factorization with
//! reverse Cuthill-McKee ordering, and small dense helpers built on nalgebra.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use nalgebra::{DMatrix, DVector};
use std::collections::VecDeque;

/// Reverse Cuthill-McKee permutation of the symmetric sparsity graph of `a`.
///
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows;
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|(j, _)| *j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs = |start: usize, visited: &mut Vec<bool>, out: &mut Vec<usize>| -> usize {
        // returns the last vertex reached (a far vertex)
        let mut queue = VecDeque::new();
        queue.push_back(start);
        visited[start] = true;
        let mut last = start;
        let mut nbrs = Vec::new();
        while let Some(v) = queue.pop_front() {
            out.push(v);
            last = v;
            nbrs.clear();
            nbrs.extend(a.row(v).map(|(j, _)| j).filter(|&j| j != v && !visited[j]));
            nbrs.sort_by_key(|&j| (degree[j], j));
            for &j in &nbrs {
                if !visited[j] {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
        last
    };
    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .expect("unvisited vertex exists");
        // one sweep to find a pseudo-peripheral start
        let mut scratch_visited = visited.clone();
        let mut scratch = Vec::new();
        let far = bfs(seed, &mut scratch_visited, &mut scratch);
        bfs(far, &mut visited, &mut order);
    }
    order.reverse();
    order
}

/// Envelope Cholesky factor `P A Pᵀ = L Lᵀ` of a sparse SPD matrix.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    perm: Vec<usize>,
    /// first column of the envelope of each (permuted) row
    first: Vec<usize>,
    /// offset of each row's envelope in `data`
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl SparseCholesky {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Dimension("Cholesky needs a square matrix".into()));
        }
        let n = a.nrows;
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for (jold, _) in a.row(old) {
                let j = inv[jold];
                if j < i {
                    first[i] = first[i].min(j);
                } else if i < j {
                    first[j] = first[j].min(i);
                }
            }
        }
        let mut offset = vec![0; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for old in 0..n {
            let i = inv[old];
            for (jold, v) in a.row(old) {
                let j = inv[jold];
                if j <= i {
                    data[offset[i] + j - first[i]] += v;
                }
            }
        }
        let mut f = SparseCholesky {
            n,
            perm,
            first,
            offset,
            data,
        };
        f.factor()?;
        Ok(f)
    }

    fn factor(&mut self) -> Result<()> {
        for i in 0..self.n {
            let fi = self.first[i];
            let oi = self.offset[i];
            for j in fi..i {
                let fj = self.first[j];
                let oj = self.offset[j];
                let start = fi.max(fj);
                let mut s = self.data[oi + j - fi];
                let (ri, rj) = (
                    &self.data[oi + start - fi..oi + j - fi],
                    &self.data[oj + start - fj..oj + j - fj],
                );
                s -= ri.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>();
                self.data[oi + j - fi] = s / self.data[oj + j - fj];
            }
            let row = &self.data[oi..oi + i - fi];
            let d = self.data[oi + i - fi] - row.iter().map(|a| a * a).sum::<f64>();
            if !(d > 0.0) {
                return Err(Error::Singular(format!(
                    "matrix is not positive definite (pivot {i}: {d:e})"
                )));
            }
            self.data[oi + i - fi] = d.sqrt();
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn fill(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offset[i];
            let s: f64 = self.data[oi..oi + i - fi]
                .iter()
                .zip(&y[fi..i])
                .map(|(a, b)| a * b)
                .sum();
            y[i] = (y[i] - s) / self.data[oi + i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let oi = self.offset[i];
            y[i] /= self.data[oi + i - fi];
            let yi = y[i];
            for j in fi..i {
                y[j] -= self.data[oi + j - fi] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Eigenvalues of the symmetric-definite pencil (A, B), ascending.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let l = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("generalized eigenproblem: B is not positive definite".into()))?
        .l();
    let x = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Singular("triangular solve".into()))?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Singular("triangular solve".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(ev)
}

/// Orthonormal basis of the numerical kernel of a symmetric PSD matrix.
pub fn psd_kernel(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let mx = eig.eigenvalues.amax();
    let cols: Vec<DVector<f64>> = (0..a.nrows())
        .filter(|&i| eig.eigenvalues[i].abs() <= rel_tol * mx)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(a.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis of the orthogonal complement of the columns of `z` (assumed orthonormal).
pub fn orthogonal_complement(z: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let p = DMatrix::<f64>::identity(n, n) - z * z.transpose();
    let eig = p.symmetric_eigen();
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > 0.5)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    DMatrix::from_columns(&cols)
}

/// Schur complement `A[keep, keep] - A[keep, elim] A[elim, elim]^{-1} A[elim, keep]` of an SPD matrix.
pub fn schur_complement(a: &DMatrix<f64>, keep: &[usize], elim: &[usize]) -> Result<DMatrix<f64>> {
    let akk = a.select_rows(keep).select_columns(keep);
    if elim.is_empty() {
        return Ok(akk);
    }
    let ake = a.select_rows(keep).select_columns(elim);
    let aee = a.select_rows(elim).select_columns(elim);
    let chol = aee
        .cholesky()
        .ok_or_else(|| Error::Singular("Schur complement: eliminated block not SPD".into()))?;
    let x = chol.solve(&ake.transpose());
    Ok(akk - ake * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Triplets;

    fn laplacian_2d(n: usize) -> CsrMatrix {
        let mut t = Triplets::new(n * n, n * n);
        for j in 0..n {
            for i in 0..n {
                let p = j * n + i;
                t.push(p, p, 4.0);
                if i > 0 {
                    t.push(p, p - 1, -1.0);
                }
                if i + 1 < n {
                    t.push(p, p + 1, -1.0);
                }
                if j > 0 {
                    t.push(p, p - n, -1.0);
                }
                if j + 1 < n {
                    t.push(p, p + n, -1.0);
                }
            }
        }
        t.to_csr()
    }

    #[test]
    fn sparse_cholesky_solves_against_dense_oracle() {
        let a = laplacian_2d(9);
        let f = SparseCholesky::new(&a).unwrap();
        let b: Vec<f64> = (0..81).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = f.solve(&b);
        let dense = a.to_dense().lu().solve(&DVector::from_vec(b.clone())).unwrap();
        for i in 0..81 {
            assert!((x[i] - dense[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = laplacian_2d(6);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort();
        assert_eq!(p, (0..36).collect::<Vec<_>>());
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(SparseCholesky::new(&CsrMatrix::from_dense(&d, 0.0)).is_err());
    }

    #[test]
    fn generalized_eigenvalues_of_scaled_pencil() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 6.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let ev = generalized_eigenvalues(&a, &b).unwrap();
        assert!((ev[0] - 2.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }
}
