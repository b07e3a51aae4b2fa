//! Dense complex least squares with Tikhonov damping, via an orthogonal
//! factorisation of the column-equilibrated, augmented matrix [A; λI].

use std::sync::Once;

use faer::linalg::solvers::{Qr, SolveLstsq};
use faer::{Mat, Par};
use num_complex::Complex64 as C64;

static SEQUENTIAL: Once = Once::new();

/// Dense kernels run sequentially so results do not depend on the pool size.
pub fn force_sequential_dense() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));
}

pub struct RegularizedLstsq {
    qr: Qr<C64>,
    col_scale: Vec<f64>,
    rows: usize,
    cols: usize,
    pub sigma_max: f64,
    pub lambda: f64,
    /// Ratio of extreme diagonal entries of the triangular factor.
    pub condition: f64,
}

impl RegularizedLstsq {
    /// `rel_lambda` is the damping relative to the largest singular value
    /// of the equilibrated matrix.
    pub fn new(mut a: Mat<C64>, rel_lambda: f64) -> Self {
        force_sequential_dense();
        let (rows, cols) = (a.nrows(), a.ncols());
        let mut col_scale = vec![1.0; cols];
        for j in 0..cols {
            let n: f64 = (0..rows).map(|i| a[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            let s = if n > 0.0 { 1.0 / n } else { 1.0 };
            col_scale[j] = s;
            for i in 0..rows {
                a[(i, j)] *= s;
            }
        }
        let sigma_max = spectral_norm(&a);
        let lambda = rel_lambda * sigma_max;
        let mut aug = Mat::<C64>::zeros(rows + cols, cols);
        aug.as_mut().get_mut(..rows, ..).copy_from(a.as_ref());
        for j in 0..cols {
            aug[(rows + j, j)] = C64::new(lambda, 0.0);
        }
        drop(a);
        let qr = aug.as_ref().qr();
        let r = qr.thin_R();
        let diag: Vec<f64> = (0..cols).map(|i| r[(i, i)].norm()).collect();
        let dmax = diag.iter().cloned().fold(0.0, f64::max);
        let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        RegularizedLstsq {
            qr,
            col_scale,
            rows,
            cols,
            sigma_max,
            lambda,
            condition: if dmin > 0.0 { dmax / dmin } else { f64::INFINITY },
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        assert_eq!(b.len(), self.rows);
        let mut rhs = Mat::<C64>::zeros(self.rows + self.cols, 1);
        for (i, v) in b.iter().enumerate() {
            rhs[(i, 0)] = *v;
        }
        let x = self.qr.solve_lstsq(rhs.as_ref());
        (0..self.cols).map(|j| x[(j, 0)] * self.col_scale[j]).collect()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

fn spectral_norm(a: &Mat<C64>) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut v = Mat::<C64>::from_fn(n, 1, |i, _| C64::new(1.0 + 0.01 * (i % 7) as f64, 0.0));
    let mut est = 0.0;
    for _ in 0..30 {
        let norm = (0..n).map(|i| v[(i, 0)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v /= faer::Scale(C64::new(norm, 0.0));
        let w = a * &v;
        let next = a.adjoint() * &w;
        let wn = (0..w.nrows()).map(|i| w[(i, 0)].norm_sqr()).sum::<f64>().sqrt();
        let converged = (wn - est).abs() <= 1e-6 * wn;
        est = wn;
        v = next;
        if converged {
            break;
        }
    }
    est
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_consistent_solution() {
        let a = Mat::<C64>::from_fn(40, 6, |i, j| C64::new(((i * 7 + j * 3) % 11) as f64 - 5.0, (i as f64 * 0.3 - j as f64).sin()));
        let x: Vec<C64> = (0..6).map(|j| C64::new(j as f64, -0.5 * j as f64)).collect();
        let b: Vec<C64> = (0..40).map(|i| (0..6).map(|j| a[(i, j)] * x[j]).sum()).collect();
        let ls = RegularizedLstsq::new(a, 1e-14);
        let got = ls.solve(&b);
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).norm() < 1e-9);
        }
        assert!(ls.condition.is_finite());
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = Mat::<C64>::from_fn(5, 3, |i, j| if i == j { C64::new((j + 1) as f64, 0.0) } else { C64::new(0.0, 0.0) });
        assert!((spectral_norm(&a) - 3.0).abs() < 1e-5);
    }
}
