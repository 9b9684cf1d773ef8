//! Minimal CSR storage and a Jacobi-preconditioned conjugate gradient for
//! the symmetric positive definite systems assembled by the solver.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Assemble from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &mut Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in triplets.iter() {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    d[r] += self.values[k];
                }
            }
        }
        d
    }
}

/// CG with Jacobi preconditioning to a relative residual, starting from `x0`.
/// Deterministic: fixed sequential reductions, no reordering.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::LinearSolve(
            "nonpositive diagonal entry; system is not SPD".into(),
        ));
    }
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for iter in 0..max_iter {
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= rel_tol * b_norm {
            return Ok((x, iter));
        }
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::LinearSolve(format!(
                "indefinite direction encountered (p'Ap = {pap})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r_norm <= rel_tol * b_norm {
        Ok((x, max_iter))
    } else {
        Err(Error::LinearSolve(format!(
            "CG stalled at relative residual {:.3e} after {max_iter} iterations",
            r_norm / b_norm
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &mut t)
    }

    #[test]
    fn duplicates_are_summed() {
        let mut t = vec![(0, 0, 1.0), (0, 0, 1.5), (1, 1, 2.0)];
        let a = CsrMatrix::from_triplets(2, &mut t);
        assert_eq!(a.diagonal(), vec![2.5, 2.0]);
    }

    #[test]
    fn solves_poisson_chain() {
        let n = 50;
        let a = laplacian_1d(n);
        let b = vec![1.0; n];
        let (x, _) = conjugate_gradient(&a, &b, &vec![0.0; n], 1e-12, 10_000).unwrap();
        // residual check
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        for i in 0..n {
            assert_abs_diff_eq!(ax[i], 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let a = laplacian_1d(8);
        let (x, iters) = conjugate_gradient(&a, &vec![0.0; 8], &vec![1.0; 8], 1e-12, 100).unwrap();
        assert_eq!(iters, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn warm_start_converges_immediately() {
        let n = 30;
        let a = laplacian_1d(n);
        let b = vec![1.0; n];
        let (x, _) = conjugate_gradient(&a, &b, &vec![0.0; n], 1e-12, 10_000).unwrap();
        let (_, iters) = conjugate_gradient(&a, &b, &x, 1e-12, 10_000).unwrap();
        assert!(iters <= 1);
    }
}
