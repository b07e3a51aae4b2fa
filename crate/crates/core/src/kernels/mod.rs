//! Fundamental solutions of the Laplace, Stokes, steady Oseen and
//! time-periodic Oseen operators, the wake weight and a few decay tools.
//!
//! Convention: column j of a velocity kernel is the flow due to a unit
//! point force along e_j; the PDE is −Δu − ζ·∇u + ∇p = f, so the wake
//! trails along −ζ where s_ζ vanishes.

mod mode;

pub use mode::{
    gamma_perp, mode_scalar_kernel, newtonian_potential_mode, oseenlet_mode, oseenlet_mode_jet, NewtonianPotentialGrid,
};

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SphereQuadrature;
pub use crate::geometry::Vec3;

pub type C64 = Complex64;
pub type CVec3 = Vector3<C64>;
pub type CMat3 = Matrix3<C64>;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct WakeWeight {
    pub alpha: f64,
    pub beta: f64,
    pub zeta: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelValue {
    pub velocity: CMat3,
    pub pressure: CVec3,
}

/// Kernel value together with spatial derivatives: `grad[m][(i, j)]` is
/// ∂_m of the velocity entry (i, j), `pressure_grad[(m, j)]` is ∂_m P_j.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelJet {
    pub value: KernelValue,
    pub grad: [CMat3; 3],
    pub pressure_grad: CMat3,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ModeSpec {
    pub k: i64,
    pub period: f64,
    pub zeta: Vec3,
}

impl ModeSpec {
    pub fn new(k: i64, period: f64, zeta: Vec3) -> Self {
        assert!(period > 0.0, "period must be positive");
        ModeSpec { k, period, zeta }
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.k as f64 / self.period
    }
}

fn nonzero(x: &Vec3, what: &str) -> Result<f64> {
    let r = x.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::Domain(format!("{what} evaluated at x = {:?}", x.as_slice())));
    }
    Ok(r)
}

fn complexify(m: &Matrix3<f64>) -> CMat3 {
    m.map(|v| C64::new(v, 0.0))
}

fn cvec(v: &Vec3) -> CVec3 {
    v.map(|c| C64::new(c, 0.0))
}

pub fn s_wake(x: &Vec3, zeta: &Vec3) -> f64 {
    (0.5 * (zeta.norm() * x.norm() + zeta.dot(x))).max(0.0)
}

pub fn weight_nu(w: &WakeWeight, x: &Vec3) -> Result<f64> {
    let r = x.norm();
    if r == 0.0 && w.alpha < 0.0 {
        return Err(Error::Domain("weight with negative exponent at the origin".into()));
    }
    Ok(r.powf(w.alpha) * (1.0 + s_wake(x, &w.zeta)).powf(w.beta))
}

pub fn laplace_e(x: &Vec3) -> Result<f64> {
    let r = nonzero(x, "E")?;
    Ok(1.0 / (4.0 * PI * r))
}

/// P = x̂/(4π|x|²) = −∇E.
pub fn pressure_p(x: &Vec3) -> Result<Vec3> {
    let r = nonzero(x, "P")?;
    Ok(x / (4.0 * PI * r * r * r))
}

/// ∂_m P_j = (δ_mj − 3 x̂_m x̂_j)/(4π|x|³).
pub fn pressure_p_grad(x: &Vec3) -> Result<Matrix3<f64>> {
    let r = nonzero(x, "∇P")?;
    let xh = x / r;
    Ok((Matrix3::identity() - xh * xh.transpose() * 3.0) / (4.0 * PI * r * r * r))
}

pub fn stokeslet(x: &Vec3) -> Result<KernelValue> {
    let r = nonzero(x, "Stokeslet")?;
    let xh = x / r;
    let v = (Matrix3::identity() + xh * xh.transpose()) / (8.0 * PI * r);
    Ok(KernelValue {
        velocity: complexify(&v),
        pressure: cvec(&pressure_p(x)?),
    })
}

pub fn stokeslet_jet(x: &Vec3) -> Result<KernelJet> {
    let r = nonzero(x, "Stokeslet")?;
    let xh = x / r;
    let value = stokeslet(x)?;
    // ∂_m [(δ_ij + x̂_i x̂_j)/r] = [−x̂_m δ_ij + δ_im x̂_j + δ_jm x̂_i − 3 x̂_i x̂_j x̂_m]/r²
    let mut grad = [CMat3::zeros(); 3];
    for (m, g) in grad.iter_mut().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                let v = -xh[m] * d(i, j) + d(i, m) * xh[j] + d(j, m) * xh[i] - 3.0 * xh[i] * xh[j] * xh[m];
                g[(i, j)] = C64::new(v / (8.0 * PI * r * r), 0.0);
            }
        }
    }
    Ok(KernelJet {
        value,
        grad,
        pressure_grad: complexify(&pressure_p_grad(x)?),
    })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// I_m(s) = ∫₀¹ tᵐ e^{−ts} dt. The m = 0 moment is (1−e^{−s})/s and
/// m = 1 is (1 − e^{−s}(1+s))/s², the two factors of the Oseenlet.
pub fn wake_moment(m: usize, s: f64) -> f64 {
    if m == 0 {
        if s < 1e-4 {
            // six-term Taylor series of (1 − e^{−s})/s
            let mut acc = 0.0;
            for n in (0..6).rev() {
                acc = acc * (-s) + 1.0 / factorial(n + 1);
            }
            return acc;
        }
        return -(-s).exp_m1() / s;
    }
    if s < 2.0 {
        let mut term = 1.0;
        let mut acc = 1.0 / (m as f64 + 1.0);
        for n in 1..40 {
            term *= -s / n as f64;
            let t = term / (m + n + 1) as f64;
            acc += t;
            if t.abs() < 1e-18 * acc.abs() {
                break;
            }
        }
        return acc;
    }
    let es = (-s).exp();
    let mut i = -(-s).exp_m1() / s;
    for j in 1..=m {
        i = (j as f64 * i - es) / s;
    }
    i
}

/// Steady Oseenlet for a body translating with velocity ζ ≠ 0.
pub fn oseenlet_steady(x: &Vec3, zeta: &Vec3) -> Result<KernelValue> {
    let r = nonzero(x, "Oseenlet")?;
    let zn = zeta.norm();
    if zn == 0.0 {
        return Err(Error::Domain("Oseenlet needs ζ ≠ 0; use the Stokeslet".into()));
    }
    let xh = x / r;
    let s = s_wake(x, zeta);
    let b = xh + zeta / zn;
    let q = Matrix3::identity() - xh * xh.transpose();
    let v = Matrix3::identity() * ((-s).exp() / (4.0 * PI * r)) - q * (wake_moment(0, s) / (8.0 * PI * r))
        + b * b.transpose() * (zn / (16.0 * PI) * wake_moment(1, s));
    Ok(KernelValue {
        velocity: complexify(&v),
        pressure: cvec(&pressure_p(x)?),
    })
}

/// Steady Oseenlet with analytic first derivatives.
pub fn oseenlet_steady_jet(x: &Vec3, zeta: &Vec3) -> Result<KernelJet> {
    let value = oseenlet_steady(x, zeta)?;
    let r = x.norm();
    let zn = zeta.norm();
    let a = 0.5 * zn;
    let xh = x / r;
    let s = s_wake(x, zeta);
    // ∇s = ζ/2 + a x̂
    let b = zeta * 0.5 + xh * a;
    let (i0, i1, i2) = (wake_moment(0, s), wake_moment(1, s), wake_moment(2, s));
    let phi0 = (-s).exp() / (4.0 * PI * r);
    let dphi = -(b + xh / r) * phi0;
    let d = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
    let qm = |p: usize, q: usize| d(p, q) - xh[p] * xh[q];
    let c = 1.0 / (8.0 * PI);
    let mut grad = [CMat3::zeros(); 3];
    for (k, g) in grad.iter_mut().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                let t = d(i, j) * xh[k] + d(i, k) * xh[j] + d(j, k) * xh[i] - 3.0 * xh[i] * xh[j] * xh[k];
                let third = -(b[i] * b[j] * b[k] / a) * i2
                    + (qm(i, j) * b[k] + qm(i, k) * b[j] + qm(j, k) * b[i]) * i1 / r
                    + t * i0 / (r * r);
                g[(i, j)] = C64::new(d(i, j) * dphi[k] + c * third, 0.0);
            }
        }
    }
    Ok(KernelJet {
        value,
        grad,
        pressure_grad: complexify(&pressure_p_grad(x)?),
    })
}

/// Steady kernel with the ζ = 0 case routed to the Stokeslet.
pub fn steady_kernel(x: &Vec3, zeta: &Vec3) -> Result<KernelValue> {
    if zeta.norm() == 0.0 {
        stokeslet(x)
    } else {
        oseenlet_steady(x, zeta)
    }
}

pub fn steady_kernel_jet(x: &Vec3, zeta: &Vec3) -> Result<KernelJet> {
    if zeta.norm() == 0.0 {
        stokeslet_jet(x)
    } else {
        oseenlet_steady_jet(x, zeta)
    }
}

/// ∫_{∂B_R} |x|^{−a} (1+s_ζ)^{−b} dS by quadrature.
pub fn surface_j(a: f64, b: f64, radius: f64, zeta: &Vec3, quad: &SphereQuadrature) -> f64 {
    crate::geometry::surface_integral(quad, radius, |x: &Vec3| {
        x.norm().powf(-a) * (1.0 + s_wake(x, zeta)).powf(-b)
    })
}

/// Least-squares slope and intercept of log y against log x.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return Err(Error::DegenerateFit("need at least two samples".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::DegenerateFit("samples must be positive and finite".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, intercept, r2))
}

/// Fitted exponent p of `field(r·d̂) ≈ C r^p`.
pub fn decay_slope<F: Fn(&Vec3) -> f64>(field: F, direction: &Vec3, radii: &[f64]) -> Result<f64> {
    if radii.len() < 3 {
        return Err(Error::DegenerateFit("decay fit needs at least three radii".into()));
    }
    let d = direction.normalize();
    let ys: Vec<f64> = radii.iter().map(|r| field(&(d * *r))).collect();
    if let Some(i) = ys.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateFit(format!("field vanishes at r = {}", radii[i])));
    }
    Ok(loglog_fit(radii, &ys)?.0)
}

/// Frobenius norm of a complex matrix.
pub fn frobenius(m: &CMat3) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
