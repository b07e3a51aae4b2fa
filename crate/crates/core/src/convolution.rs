//! Space-time convolutions of the kernels with boundary densities on Σ and
//! with volume forcings on Ω, used to check the decay of the terms in the
//! representation formulas.
//!
//! Densities and forcings are given by their time modes k = 0..K; a kernel
//! of the form K ⊗ δ_T acts on every mode, Γ⊥ acts on k ≥ 1 only.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FlowParams;
use crate::geometry::{gauss_legendre_on, BodyGeometry, SphereQuadrature, Vec3};
use crate::kernels::{laplace_e, pressure_p, CMat3, CVec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvKernel {
    /// E ⊗ δ_T, componentwise on a vector density.
    Laplace,
    /// P ⊗ δ_T contracted with the density.
    Pressure,
    /// Γ₀ ⊗ 1_T on the time mean.
    Steady,
    /// ∇Γ₀ ⊗ 1_T on the time mean.
    SteadyGrad,
    /// Γ⊥ on the purely periodic part.
    Perp,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConvValue {
    Scalar(f64),
    Vector(Vec3),
    Matrix(Matrix3<f64>),
}

impl ConvValue {
    pub fn norm(&self) -> f64 {
        match self {
            ConvValue::Scalar(s) => s.abs(),
            ConvValue::Vector(v) => v.norm(),
            ConvValue::Matrix(m) => m.norm(),
        }
    }
}

/// Complex accumulator for one mode: a scalar, vector and matrix slot.
#[derive(Clone, Copy)]
struct Acc {
    s: C64,
    v: CVec3,
    m: CMat3,
}

impl Acc {
    fn zero() -> Self {
        Acc {
            s: C64::new(0.0, 0.0),
            v: CVec3::zeros(),
            m: CMat3::zeros(),
        }
    }
    fn add(&mut self, o: &Acc) {
        self.s += o.s;
        self.v += o.v;
        self.m += o.m;
    }
    fn scaled(&self, w: f64) -> Acc {
        let c = C64::new(w, 0.0);
        Acc {
            s: self.s * c,
            v: self.v * c,
            m: self.m * c,
        }
    }
    fn size(&self) -> f64 {
        (self.s.norm_sqr() + self.v.norm_squared() + self.m.norm_squared()).sqrt()
    }
}

fn kernel_applies(kernel: ConvKernel, k: usize) -> bool {
    match kernel {
        ConvKernel::Steady | ConvKernel::SteadyGrad => k == 0,
        ConvKernel::Perp => k > 0,
        ConvKernel::Laplace | ConvKernel::Pressure => true,
    }
}

/// K_k(z) applied to the density value ψ.
fn kernel_times(params: &FlowParams, kernel: ConvKernel, k: usize, z: &Vec3, psi: &CVec3) -> Result<Acc> {
    let mut a = Acc::zero();
    match kernel {
        ConvKernel::Laplace => a.v = psi * C64::new(laplace_e(z)?, 0.0),
        ConvKernel::Pressure => {
            let p = pressure_p(z)?;
            a.s = psi[0] * p[0] + psi[1] * p[1] + psi[2] * p[2];
        }
        ConvKernel::Steady | ConvKernel::Perp => a.v = params.kernel_jet(k, z)?.value.velocity * psi,
        ConvKernel::SteadyGrad => {
            let j = params.kernel_jet(k, z)?;
            for m in 0..3 {
                let g = j.grad[m] * psi;
                for i in 0..3 {
                    a.m[(m, i)] = g[i];
                }
            }
        }
    }
    Ok(a)
}

fn synthesize(kernel: ConvKernel, modes: &[Acc], period: f64, t: f64) -> ConvValue {
    let mut s = 0.0;
    let mut v = Vec3::zeros();
    let mut m = Matrix3::zeros();
    for (k, a) in modes.iter().enumerate() {
        let (f, ph) = if k == 0 {
            (1.0, C64::new(1.0, 0.0))
        } else {
            (2.0, C64::from_polar(1.0, 2.0 * PI * k as f64 * t / period))
        };
        s += f * (a.s * ph).re;
        v += (a.v * ph).map(|z| f * z.re);
        m += (a.m * ph).map(|z| f * z.re);
    }
    match kernel {
        ConvKernel::Pressure => ConvValue::Scalar(s),
        ConvKernel::SteadyGrad => ConvValue::Matrix(m),
        _ => ConvValue::Vector(v),
    }
}

/// (K ∗ (ψ δ_Σ))(t, x) by the sphere quadrature on Σ. `density(k, y)` is
/// the mode k of ψ at y ∈ Σ.
pub fn conv_boundary<F>(
    params: &FlowParams,
    kernel: ConvKernel,
    body: &BodyGeometry,
    quad: &SphereQuadrature,
    density: F,
    x: &Vec3,
    t: f64,
) -> Result<ConvValue>
where
    F: Fn(usize, &Vec3) -> CVec3,
{
    if x.norm() <= body.radius {
        return Err(Error::Geometry(format!("|x| = {} is not outside Σ", x.norm())));
    }
    let (nodes, weights) = quad.scaled(body.radius);
    let mut modes = vec![Acc::zero(); params.kmax + 1];
    for (k, acc) in modes.iter_mut().enumerate() {
        if !kernel_applies(kernel, k) {
            continue;
        }
        for (y, w) in nodes.iter().zip(&weights) {
            let psi = density(k, y);
            if psi.iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            acc.add(&kernel_times(params, kernel, k, &(x - y), &psi)?.scaled(*w));
        }
    }
    Ok(synthesize(kernel, &modes, params.period, t))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VolumeConvConfig {
    /// Gauss nodes per radial panel.
    pub radial_nodes: usize,
    /// Order of the direction quadratures.
    pub sphere_order: usize,
    /// Relative size below which a far panel counts as tail.
    pub tail_tol: f64,
    pub max_radius: f64,
}

impl Default for VolumeConvConfig {
    fn default() -> Self {
        VolumeConvConfig {
            radial_nodes: 12,
            sphere_order: 24,
            tail_tol: 1e-8,
            max_radius: 1e6,
        }
    }
}

/// C^∞ step from 1 at s = 0 to 0 on [1, ∞), flat to all orders at both ends.
fn cutoff(s: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    if s >= 1.0 {
        return 0.0;
    }
    let u = s;
    let f = |v: f64| if v > 0.0 { (-1.0 / v).exp() } else { 0.0 };
    f(1.0 - u) / (f(1.0 - u) + f(u))
}

/// (K ∗ g)(t, x) over Ω = {|y| > r_b}. The integral is split with a smooth
/// partition of unity into a ball around x, done in spherical coordinates
/// centred at x so the kernel singularity is absorbed by the Jacobian, and
/// the rest, done on origin-centred doubling shells until a shell adds less
/// than `tail_tol` of the accumulated value twice in a row.
pub fn conv_volume<F>(
    params: &FlowParams,
    kernel: ConvKernel,
    body: &BodyGeometry,
    forcing: F,
    x: &Vec3,
    t: f64,
    cfg: &VolumeConvConfig,
) -> Result<ConvValue>
where
    F: Fn(usize, &Vec3) -> CVec3 + Sync,
{
    let rx = x.norm();
    if rx <= body.radius {
        return Err(Error::Geometry(format!("|x| = {rx} is not in the fluid")));
    }
    let d = (0.5 * rx).min(rx - body.radius);
    let axis = x / rx;
    let dirs = SphereQuadrature::new(cfg.sphere_order, axis);
    // Shells crossing the near ball see the partition-of-unity transition
    // at angular scale d/|x| and get a finer direction rule.
    let fine_order = cfg.sphere_order.max((4.0 * cfg.sphere_order as f64 * rx / (2.0 * d)).ceil() as usize / 2);
    let fine = SphereQuadrature::new(fine_order, axis);
    let modes: Vec<usize> = (0..=params.kmax).filter(|k| kernel_applies(kernel, *k)).collect();
    let eval_point = |y: &Vec3, w: f64, acc: &mut Vec<Acc>| -> Result<()> {
        for &k in &modes {
            let g = forcing(k, y);
            if g.iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            acc[k].add(&kernel_times(params, kernel, k, &(x - y), &g)?.scaled(w));
        }
        Ok(())
    };
    let merge = |mut a: Vec<Acc>, b: Vec<Acc>| {
        for (x, y) in a.iter_mut().zip(&b) {
            x.add(y);
        }
        a
    };
    let nk = params.kmax + 1;

    // Near part.
    let (rn, rw) = gauss_legendre_on(cfg.radial_nodes, 0.0, d);
    let near = rn
        .par_iter()
        .zip(&rw)
        .map(|(r, wr)| {
            let mut acc = vec![Acc::zero(); nk];
            let chi = cutoff(r / d);
            for (u, wu) in dirs.nodes.iter().zip(&dirs.weights) {
                eval_point(&(x + u * *r), wr * wu * r * r * chi, &mut acc)?;
            }
            Ok(acc)
        })
        .try_reduce(|| vec![Acc::zero(); nk], |a, b| Ok(merge(a, b)))?;

    // Far part on shells with breakpoints at the near ball.
    let mut breaks = vec![body.radius];
    for b in [rx - d, rx - 0.5 * d, rx, rx + 0.5 * d, rx + d] {
        if b > *breaks.last().expect("nonempty") {
            breaks.push(b);
        }
    }
    let shell = |lo: f64, hi: f64| -> Result<Vec<Acc>> {
        let (sn, sw) = gauss_legendre_on(cfg.radial_nodes, lo, hi);
        let dirs = if hi > rx - d && lo < rx + d { &fine } else { &dirs };
        sn.par_iter()
            .zip(&sw)
            .map(|(s, ws)| {
                let mut acc = vec![Acc::zero(); nk];
                for (u, wu) in dirs.nodes.iter().zip(&dirs.weights) {
                    let y = u * *s;
                    let chi = 1.0 - cutoff((y - x).norm() / d);
                    if chi == 0.0 {
                        continue;
                    }
                    eval_point(&y, ws * wu * s * s * chi, &mut acc)?;
                }
                Ok(acc)
            })
            .try_reduce(|| vec![Acc::zero(); nk], |a, b| Ok(merge(a, b)))
    };
    let mut total = near;
    // Inner panels: between consecutive breaks, split so no panel exceeds a
    // ratio of 2.
    let mut lo = breaks[0];
    for &b in &breaks[1..] {
        while lo < b {
            let hi = (2.0 * lo).min(b);
            total = merge(total, shell(lo, hi)?);
            lo = hi;
        }
    }
    let size = |a: &[Acc]| a.iter().map(|x| x.size()).sum::<f64>();
    let mut quiet = 0;
    while quiet < 2 {
        if lo >= cfg.max_radius {
            return Err(Error::TailBound {
                radius: lo,
                tolerance: cfg.tail_tol,
            });
        }
        let hi = 2.0 * lo;
        let part = shell(lo, hi)?;
        let ps = size(&part);
        total = merge(total, part);
        let ts = size(&total);
        if ps <= cfg.tail_tol * ts || ts == 0.0 {
            quiet += 1;
        } else {
            quiet = 0;
        }
        lo = hi;
    }
    Ok(synthesize(kernel, &total, params.period, t))
}
