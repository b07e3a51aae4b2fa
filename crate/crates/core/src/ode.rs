//! Periodic solutions of α' + Aα = G in the real basis ψ₀ = 1,
//! ψ_k^c = √2 cos ω_k t, ψ_k^s = √2 sin ω_k t, which splits into one system
//! A α₀ = G₀ and, for each k ≥ 1, the 2M × 2M block
//!
//!   [ A    −ω_k I ] [α_k^s]   [G_k^s]
//!   [ ω_k I   A   ] [α_k^c] = [G_k^c].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TimeFourierBasis {
    pub period: f64,
    pub kmax: usize,
}

impl TimeFourierBasis {
    pub fn new(period: f64, kmax: usize) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::Config(format!("period must be positive, got {period}")));
        }
        Ok(TimeFourierBasis { period, kmax })
    }

    pub fn omega(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.period
    }

    /// [ψ₀, ψ₁^c, ψ₁^s, …, ψ_K^c, ψ_K^s] at time t.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.kmax + 1);
        out.push(1.0);
        for k in 1..=self.kmax {
            let a = self.omega(k) * t;
            out.push(2f64.sqrt() * a.cos());
            out.push(2f64.sqrt() * a.sin());
        }
        out
    }

    /// Gram matrix (1/N) Σ_j ψ_a(t_j) ψ_b(t_j) on the uniform grid of N points.
    pub fn discrete_gram(&self, n: usize) -> DMatrix<f64> {
        let m = 2 * self.kmax + 1;
        let mut g = DMatrix::zeros(m, m);
        for j in 0..n {
            let v = DVector::from_vec(self.eval(self.period * j as f64 / n as f64));
            g += &v * v.transpose();
        }
        g / n as f64
    }
}

pub fn assemble_block_system(a: &DMatrix<f64>, k: usize, period: f64) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::Config("block system needs a square matrix".into()));
    }
    let m = a.nrows();
    let w = 2.0 * PI * k as f64 / period;
    let mut b = DMatrix::zeros(2 * m, 2 * m);
    b.view_mut((0, 0), (m, m)).copy_from(a);
    b.view_mut((m, m), (m, m)).copy_from(a);
    for i in 0..m {
        b[(i, m + i)] = -w;
        b[(m + i, i)] = w;
    }
    Ok(b)
}

/// Coefficients of a real periodic vector function in the basis above.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicCoefficients {
    pub mean: DVector<f64>,
    /// (cos, sin) coefficients for k = 1..K.
    pub harmonics: Vec<(DVector<f64>, DVector<f64>)>,
}

impl PeriodicCoefficients {
    pub fn eval(&self, basis: &TimeFourierBasis, t: f64) -> DVector<f64> {
        let psi = basis.eval(t);
        let mut v = self.mean.clone();
        for (k, (c, s)) in self.harmonics.iter().enumerate() {
            v += c * psi[2 * k + 1] + s * psi[2 * k + 2];
        }
        v
    }

    /// Projection of samples on the uniform grid of n ≥ 2K+1 points.
    pub fn from_samples(basis: &TimeFourierBasis, samples: &[DVector<f64>]) -> Self {
        let n = samples.len();
        let m = samples[0].len();
        let mut mean = DVector::zeros(m);
        let mut harmonics = vec![(DVector::zeros(m), DVector::zeros(m)); basis.kmax];
        for (j, g) in samples.iter().enumerate() {
            let psi = basis.eval(basis.period * j as f64 / n as f64);
            mean += g / n as f64;
            for (k, (c, s)) in harmonics.iter_mut().enumerate() {
                *c += g * (psi[2 * k + 1] / n as f64);
                *s += g * (psi[2 * k + 2] / n as f64);
            }
        }
        PeriodicCoefficients { mean, harmonics }
    }
}

/// Periodic solution of α' + Aα = G mode by mode.
pub fn solve_periodic_ode(a: &DMatrix<f64>, g: &PeriodicCoefficients, period: f64) -> Result<PeriodicCoefficients> {
    let m = a.nrows();
    let tiny = 1e-13 * a.norm().max(1.0);
    let lu = a.clone().lu();
    if !lu.is_invertible() || min_pivot(lu.u()) < tiny {
        return Err(Error::SingularBlock {
            k: 0,
            pivot: min_pivot(lu.u()),
        });
    }
    let mean = lu.solve(&g.mean).ok_or(Error::SingularBlock { k: 0, pivot: 0.0 })?;
    let mut harmonics = Vec::with_capacity(g.harmonics.len());
    for (i, (gc, gs)) in g.harmonics.iter().enumerate() {
        let k = i + 1;
        let blk = assemble_block_system(a, k, period)?;
        let lu = blk.lu();
        let pivot = min_pivot(lu.u());
        if pivot < tiny {
            return Err(Error::SingularBlock { k, pivot });
        }
        let mut rhs = DVector::zeros(2 * m);
        rhs.rows_mut(0, m).copy_from(gs);
        rhs.rows_mut(m, m).copy_from(gc);
        let x = lu.solve(&rhs).ok_or(Error::SingularBlock { k, pivot })?;
        harmonics.push((x.rows(m, m).into_owned(), x.rows(0, m).into_owned()));
    }
    Ok(PeriodicCoefficients { mean, harmonics })
}

/// Classical RK4 for α' = G(t) − Aα from α(0) = 0 over `periods` periods
/// with `steps` steps per period; returns α on the uniform grid of `steps`
/// points in the last period. For positive definite A this approaches the
/// periodic solution independently of the block solve.
pub fn periodic_state_by_stepping(
    a: &DMatrix<f64>,
    g: &PeriodicCoefficients,
    basis: &TimeFourierBasis,
    periods: usize,
    steps: usize,
) -> Vec<DVector<f64>> {
    let h = basis.period / steps as f64;
    let rhs = |t: f64, y: &DVector<f64>| g.eval(basis, t) - a * y;
    let mut y = DVector::zeros(a.nrows());
    let mut last = Vec::with_capacity(steps);
    for p in 0..periods {
        for j in 0..steps {
            if p + 1 == periods {
                last.push(y.clone());
            }
            let t = basis.period * (p as f64 + j as f64 / steps as f64);
            let k1 = rhs(t, &y);
            let k2 = rhs(t + 0.5 * h, &(&y + &k1 * (0.5 * h)));
            let k3 = rhs(t + 0.5 * h, &(&y + &k2 * (0.5 * h)));
            let k4 = rhs(t + h, &(&y + &k3 * h));
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    last
}

fn min_pivot(u: DMatrix<f64>) -> f64 {
    (0..u.nrows()).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_block_example() {
        let a = DMatrix::from_element(1, 1, 1.0);
        let b = assemble_block_system(&a, 1, 2.0 * PI).unwrap();
        let x = b.lu().solve(&DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn basis_is_orthonormal_on_grid() {
        let b = TimeFourierBasis::new(3.0, 5).unwrap();
        let g = b.discrete_gram(20);
        assert!((g - DMatrix::identity(11, 11)).abs().max() < 1e-12);
    }

    #[test]
    fn constant_forcing_gives_constant_solution() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let g = PeriodicCoefficients {
            mean: DVector::from_vec(vec![1.0, -1.0]),
            harmonics: vec![(DVector::zeros(2), DVector::zeros(2)); 3],
        };
        let s = solve_periodic_ode(&a, &g, 1.0).unwrap();
        let want = a.clone().lu().solve(&g.mean).unwrap();
        assert!((s.mean - want).norm() < 1e-14);
        assert!(s.harmonics.iter().all(|(c, s)| c.norm() == 0.0 && s.norm() == 0.0));
    }
}
