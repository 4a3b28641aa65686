//! Minimal sparse kernels: CSR storage, a preconditioned conjugate
//! gradient solver for SPD systems, and the Thomas tridiagonal solve used
//! by the Crank–Nicolson diffusion step.

use crate::error::{Error, Result};
use crate::exec;

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub data: Vec<f64>,
}

impl Csr {
    /// Build from (row, col, value) triplets; duplicate entries are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &mut Vec<(u32, u32, f64)>,
    ) -> Csr {
        triplets.sort_unstable_by_key(|&(r, c, _)| ((r as u64) << 32) | c as u64);
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices: Vec<u32> = Vec::with_capacity(triplets.len());
        let mut data: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut row = 0usize;
        for &(r, c, v) in triplets.iter() {
            let r = r as usize;
            while row < r {
                row += 1;
                indptr[row] = indices.len();
            }
            if indices.len() > indptr[row] && *indices.last().unwrap() == c {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
            }
        }
        while row < nrows {
            row += 1;
            indptr[row] = indices.len();
        }
        Csr {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// `y = A x` (rows in parallel).
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        let (indptr, indices, data) = (&self.indptr, &self.indices, &self.data);
        exec::fill_indexed(y, |r| {
            let mut acc = 0.0;
            for k in indptr[r]..indptr[r + 1] {
                acc += data[k] * x[indices[k] as usize];
            }
            acc
        });
    }

    /// Transposed matrix as a new CSR.
    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c as usize + 1] += 1;
        }
        for i in 1..=self.ncols {
            counts[i] += counts[i - 1];
        }
        let indptr = counts.clone();
        let mut pos = counts;
        let mut indices = vec![0u32; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k] as usize;
                indices[pos[c]] = r as u32;
                data[pos[c]] = self.data[k];
                pos[c] += 1;
            }
        }
        Csr {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            data,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients for an SPD operator given as a
/// closure; `precond_diag`, when present, is the diagonal of the operator
/// (Jacobi preconditioning).
pub fn conjugate_gradient<F>(
    apply: F,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    precond_diag: Option<&[f64]>,
) -> Result<CgOutcome>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];

    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    let apply_precond = |r: &[f64], z: &mut [f64]| match precond_diag {
        Some(d) => {
            for i in 0..r.len() {
                z[i] = r[i] / d[i].max(1e-300);
            }
        }
        None => z.copy_from_slice(r),
    };
    apply_precond(&r, &mut z);
    p.copy_from_slice(&z);
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();

    for it in 0..max_iter {
        if rnorm <= tol * bnorm {
            return Ok(CgOutcome {
                iterations: it,
                residual: rnorm / bnorm,
                converged: true,
            });
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::SolverDiverged(format!(
                "CG breakdown: p^T A p = {pap} at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        apply_precond(&r, &mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    if rnorm <= tol * bnorm {
        Ok(CgOutcome {
            iterations: max_iter,
            residual: rnorm / bnorm,
            converged: true,
        })
    } else {
        Err(Error::SolverDiverged(format!(
            "CG did not reach tolerance {tol} in {max_iter} iterations (rel residual {:.3e})",
            rnorm / bnorm
        )))
    }
}

/// Solve a tridiagonal system in place. `lower[0]` and `upper[n-1]` are
/// ignored. Overwrites `rhs` with the solution.
pub fn thomas_solve(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut Vec<f64>,
) -> Result<()> {
    let n = diag.len();
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut piv = diag[0];
    if piv == 0.0 {
        return Err(Error::SolverDiverged("zero pivot in tridiagonal solve".into()));
    }
    rhs[0] /= piv;
    for i in 1..n {
        scratch[i] = upper[i - 1] / piv;
        piv = diag[i] - lower[i] * scratch[i];
        if piv == 0.0 {
            return Err(Error::SolverDiverged("zero pivot in tridiagonal solve".into()));
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_matvec_identity_plus() {
        let mut t = vec![(0u32, 0u32, 2.0), (0, 1, -1.0), (1, 1, 2.0), (1, 0, -1.0)];
        let a = Csr::from_triplets(2, 2, &mut t);
        let mut y = vec![0.0; 2];
        a.matvec(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![1.0, 1.0]);
    }

    #[test]
    fn csr_duplicates_summed_and_transpose() {
        let mut t = vec![(0u32, 1u32, 1.0), (0, 1, 2.0), (2, 0, 5.0)];
        let a = Csr::from_triplets(3, 2, &mut t);
        assert_eq!(a.nnz(), 2);
        let at = a.transpose();
        let mut y = vec![0.0; 2];
        at.matvec(&[1.0, 0.0, 1.0], &mut y);
        assert_eq!(y, vec![5.0, 3.0]);
    }

    #[test]
    fn cg_solves_laplacian() {
        // 1-D Dirichlet Laplacian, n=50
        let n = 50;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 2.0 * x[i] - l - r;
            }
        };
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let out = conjugate_gradient(apply, &b, &mut x, 1e-12, 1000, None).unwrap();
        assert!(out.converged);
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn thomas_matches_dense() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let mut rhs = vec![1.0, 0.0, 0.0, 1.0];
        let mut scratch = Vec::new();
        thomas_solve(&lower, &diag, &upper, &mut rhs, &mut scratch).unwrap();
        // verify A x = b
        let x = rhs;
        let b = [
            2.0 * x[0] - x[1],
            -x[0] + 2.0 * x[1] - x[2],
            -x[1] + 2.0 * x[2] - x[3],
            -x[2] + 2.0 * x[3],
        ];
        assert!((b[0] - 1.0).abs() < 1e-12);
        assert!(b[1].abs() < 1e-12);
        assert!(b[2].abs() < 1e-12);
        assert!((b[3] - 1.0).abs() < 1e-12);
    }
}
