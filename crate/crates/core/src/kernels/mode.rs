//! Time-periodic Oseen kernels for a single frequency ω_k = 2πk/𝒯 ≠ 0.
//!
//! The scalar kernel Φ_k = e^{−ζ·x/2} e^{−μ|x|}/(4π|x|), μ² = |ζ|²/4 + iω,
//! inverts −Δ + iω − ζ·∇. The velocity kernel is Φ_k I + ∇⊗∇N with
//! N = E ∗ Φ_k. Combining the two symbols with a Feynman parameter and
//! substituting s = u² gives the one-dimensional representation
//!
//!   N(x) = (1/4π) ∫₀¹ e^{φ(u)}/ν(u) du,  ν = √(u²|ζ|²/4 + iω),
//!   φ = −u²(ζ·x)/2 − uν|x|,
//!
//! whose integrand is smooth, so second and third derivatives of N are
//! obtained by differentiating under the integral. The pressure kernel is
//! P for every mode, because δ_T has unit Fourier coefficients.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use super::{nonzero, pressure_p, pressure_p_grad, CMat3, CVec3, KernelJet, KernelValue, ModeSpec, Vec3};
use crate::error::{Error, Result};
use crate::geometry::gauss_legendre_on;

/// Quadrature configuration for the parameter integral behind N[Φ_k].
#[derive(Clone, Debug)]
pub struct NewtonianPotentialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Largest |x| the configuration is certified for.
    pub r_max: f64,
    /// Upper bound on the phase change of e^{φ} across one panel.
    pub panel_phase: f64,
    /// Exponent below which the integrand tail is dropped.
    pub tail_exponent: f64,
}

impl Default for NewtonianPotentialGrid {
    fn default() -> Self {
        Self::new(24, 16.0, 1.0e3)
    }
}

impl NewtonianPotentialGrid {
    pub fn new(nodes_per_panel: usize, panel_phase: f64, r_max: f64) -> Self {
        let (nodes, weights) = gauss_legendre_on(nodes_per_panel, 0.0, 1.0);
        NewtonianPotentialGrid {
            nodes,
            weights,
            r_max,
            panel_phase,
            tail_exponent: 40.0,
        }
    }

    /// Grid certified up to four times the largest requested radius.
    pub fn enclosing(largest_radius: f64) -> Self {
        Self::new(24, 16.0, 4.0 * largest_radius)
    }
}

pub fn mode_scalar_kernel(x: &Vec3, m: &ModeSpec) -> Result<C64> {
    let r = nonzero(x, "Φ_k")?;
    let mu = mode_mu(m);
    Ok((C64::new(-0.5 * m.zeta.dot(x), 0.0) - mu * r).exp() / (4.0 * PI * r))
}

fn mode_mu(m: &ModeSpec) -> C64 {
    let a = 0.5 * m.zeta.norm();
    C64::new(a * a, m.omega()).sqrt()
}

pub fn oseenlet_mode(x: &Vec3, m: &ModeSpec, grid: &NewtonianPotentialGrid) -> Result<KernelValue> {
    Ok(oseenlet_mode_jet(x, m, grid)?.value)
}

/// Moments ∫ w pⁱ qʲ du of the parameter integral, with w = e^φ/(4πν),
/// p = −u²/2 and q = −uν.
#[derive(Default)]
struct Moments {
    m00: C64,
    m01: C64,
    m02: C64,
    m03: C64,
    m11: C64,
    m12: C64,
    m20: C64,
    m21: C64,
    m30: C64,
}

fn parameter_moments(r: f64, zx: f64, a: f64, omega: f64, grid: &NewtonianPotentialGrid) -> Moments {
    let nu1 = C64::new(a * a, omega).sqrt();
    let kappa = nu1.re - a;
    let u_end = (grid.tail_exponent / (kappa * r)).min(1.0);
    let speed = r * (nu1.norm() + 2.0 * a);
    let min_panels = (2.0 * a / omega.abs().sqrt()).ceil().max(1.0);
    let panels = (u_end * speed / grid.panel_phase).ceil().max(min_panels) as usize;
    let h = u_end / panels as f64;
    let mut mo = Moments::default();
    let scale = 1.0 / (4.0 * PI);
    for p in 0..panels {
        let u0 = p as f64 * h;
        for (t, w) in grid.nodes.iter().zip(&grid.weights) {
            let u = u0 + h * t;
            let nu = C64::new(u * u * a * a, omega).sqrt();
            let pp = -0.5 * u * u;
            let q = -nu * u;
            let phi = C64::new(pp * zx, 0.0) + q * r;
            let wt = phi.exp() / nu * (w * h * scale);
            let wq = wt * q;
            mo.m00 += wt;
            let wq2 = wq * q;
            mo.m01 += wq;
            mo.m02 += wq2;
            mo.m03 += wq2 * q;
            mo.m11 += wq * pp;
            mo.m12 += wq2 * pp;
            mo.m20 += wt * (pp * pp);
            mo.m21 += wq * (pp * pp);
            mo.m30 += wt * (pp * pp * pp);
        }
    }
    mo
}

/// N[Φ_k] = E ∗ Φ_k itself, mostly useful for checking.
pub fn newtonian_potential_mode(x: &Vec3, m: &ModeSpec, grid: &NewtonianPotentialGrid) -> Result<C64> {
    let r = nonzero(x, "N[Φ_k]")?;
    if m.k <= 0 {
        return Err(Error::Domain("N[Φ_k] is evaluated for k > 0".into()));
    }
    let a = 0.5 * m.zeta.norm();
    Ok(parameter_moments(r, m.zeta.dot(x), a, m.omega(), grid).m00)
}

/// Mode kernel Γ_k with its first derivatives.
pub fn oseenlet_mode_jet(x: &Vec3, m: &ModeSpec, grid: &NewtonianPotentialGrid) -> Result<KernelJet> {
    let r = nonzero(x, "Γ_k")?;
    if m.k == 0 {
        return Err(Error::Domain("mode kernel needs k ≠ 0; use the steady kernel".into()));
    }
    if r > grid.r_max {
        return Err(Error::Accuracy(format!(
            "|x| = {r} outside the certified radius {}",
            grid.r_max
        )));
    }
    if m.k < 0 {
        let mut pos = *m;
        pos.k = -m.k;
        let j = oseenlet_mode_jet(x, &pos, grid)?;
        return Ok(KernelJet {
            value: KernelValue {
                velocity: j.value.velocity.map(|z| z.conj()),
                pressure: j.value.pressure,
            },
            grad: j.grad.map(|g| g.map(|z| z.conj())),
            pressure_grad: j.pressure_grad,
        });
    }
    let zeta = m.zeta;
    let omega = m.omega();
    let a = 0.5 * zeta.norm();
    let xh = x / r;
    let zx = zeta.dot(x);
    let mo = parameter_moments(r, zx, a, omega, grid);

    let phi = mode_scalar_kernel(x, m)?;
    let mu = mode_mu(m);
    let dphi: [C64; 3] = std::array::from_fn(|k| phi * (-(mu + 1.0 / r) * xh[k] - 0.5 * zeta[k]));

    let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let qm = |i: usize, j: usize| d(i, j) - xh[i] * xh[j];
    let mut vel = CMat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let hess = mo.m20 * (zeta[i] * zeta[j])
                + mo.m11 * (zeta[i] * xh[j] + xh[i] * zeta[j])
                + mo.m02 * (xh[i] * xh[j])
                + mo.m01 * (qm(i, j) / r);
            vel[(i, j)] = hess + phi * d(i, j);
        }
    }
    let mut grad = [CMat3::zeros(); 3];
    for (k, g) in grad.iter_mut().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                let (zi, zj, zk) = (zeta[i], zeta[j], zeta[k]);
                let (xi, xj, xk) = (xh[i], xh[j], xh[k]);
                let t = d(i, j) * xk + d(i, k) * xj + d(j, k) * xi - 3.0 * xi * xj * xk;
                let third = mo.m30 * (zi * zj * zk)
                    + mo.m21 * (zi * zj * xk + zi * xj * zk + xi * zj * zk)
                    + mo.m12 * (zi * xj * xk + xi * zj * xk + xi * xj * zk)
                    + mo.m03 * (xi * xj * xk)
                    + (mo.m11 * (qm(i, j) * zk + qm(i, k) * zj + qm(j, k) * zi)
                        + mo.m02 * (qm(i, j) * xk + qm(i, k) * xj + qm(j, k) * xi))
                        / r
                    - mo.m01 * (t / (r * r));
                g[(i, j)] = third + dphi[k] * d(i, j);
            }
        }
    }
    let p = pressure_p(x)?;
    Ok(KernelJet {
        value: KernelValue {
            velocity: vel,
            pressure: CVec3::new(p.x.into(), p.y.into(), p.z.into()),
        },
        grad,
        pressure_grad: pressure_p_grad(x)?.map(|v| C64::new(v, 0.0)),
    })
}

/// Purely periodic part Σ_{0<|k|≤K} e^{iω_k t} Γ_k(x) of the time-periodic
/// Oseen kernel.
pub fn gamma_perp(
    t: f64,
    x: &Vec3,
    m_base: &ModeSpec,
    kmax: usize,
    grid: &NewtonianPotentialGrid,
) -> Result<nalgebra::Matrix3<f64>> {
    if kmax == 0 {
        return Err(Error::Domain("Γ⊥ needs K ≥ 1".into()));
    }
    let mut acc = nalgebra::Matrix3::zeros();
    for k in 1..=kmax as i64 {
        let m = ModeSpec { k, ..*m_base };
        let g = oseenlet_mode(x, &m, grid)?.velocity;
        let ph = C64::from_polar(1.0, m.omega() * t);
        acc += g.map(|z| 2.0 * (z * ph).re);
    }
    Ok(acc)
}
