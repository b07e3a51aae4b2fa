//! Solenoidal extension h̃ of boundary data into the fluid.
//!
//! h = h⁽¹⁾ + Φσ|_Σ with σ = ∇E and Φ the flux of h. The flux-free part is
//! fitted on Σ by Stokeslets placed inside the body, U = Σ S(x − y_j)a_j,
//! which has the explicit vector potential A = −(1/8π) Σ (x − y_j)^ × a_j
//! (curl A = U). The extension is then
//!
//!   h̃ = Φσ + curl(χ A) = Φσ + χU + χ'(r) x̂ × A,
//!
//! with χ(r) = 1 at Σ, flat there, and 0 beyond twice the body radius.

use std::f64::consts::PI;

use faer::Mat;
use nalgebra::Matrix3;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::exterior::{cnorm3, BoundaryDataModes};
use crate::field::{apply_jet, flux_carrier_mode, ModalField, ModeSample};
use crate::geometry::{place_sources, BodyGeometry, Vec3};
use crate::kernels::{stokeslet, stokeslet_jet, CMat3, CVec3};
use crate::linalg::RegularizedLstsq;

/// Flat C^∞ step with derivatives: (χ, χ', χ'') in u, 1 at u ≤ 0 and 0 at u ≥ 1.
fn step(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let f = |v: f64| (-1.0 / v).exp();
    let f1 = |v: f64| f(v) / (v * v);
    let f2 = |v: f64| f(v) * (1.0 / v.powi(4) - 2.0 / v.powi(3));
    let (g, g1, g2) = (f(1.0 - u), -f1(1.0 - u), f2(1.0 - u));
    let (h, h1, h2) = (f(u), f1(u), f2(u));
    let d = g + h;
    let d1 = g1 + h1;
    let n = g1 * h - g * h1;
    let n1 = g2 * h - g * h2;
    (g / d, n / (d * d), (n1 * d - 2.0 * n * d1) / (d * d * d))
}

pub struct FluxExtension {
    pub body: BodyGeometry,
    pub period: f64,
    pub flux: Vec<C64>,
    pub sources: Vec<Vec3>,
    /// `strengths[k][j]`.
    pub strengths: Vec<Vec<CVec3>>,
    /// Relative trace mismatch max|h̃ − h|/max|h| on Σ, per mode.
    pub trace_residual: Vec<f64>,
}

impl FluxExtension {
    /// Radius beyond which only the flux carrier remains.
    pub fn collar_radius(&self) -> f64 {
        2.0 * self.body.radius
    }

    fn cutoff(&self, r: f64) -> (f64, f64, f64) {
        let rb = self.body.radius;
        let (c, c1, c2) = step((r - rb) / rb);
        (c, c1 / rb, c2 / (rb * rb))
    }
}

pub fn flux_extension(data: &BoundaryDataModes, sources: usize, offset: f64) -> Result<FluxExtension> {
    let body = data.body;
    if data.nodes.len() < 2 * sources {
        return Err(Error::Config("extension fit needs twice as many nodes as sources".into()));
    }
    let flux = data.flux_modes();
    let points = place_sources(body.radius, sources, offset, &Vec3::z());
    let sqrt_w: Vec<f64> = data.weights.iter().map(|w| w.sqrt()).collect();
    let kernel: Vec<Vec<Matrix3<f64>>> = data
        .nodes
        .iter()
        .map(|x| {
            points
                .iter()
                .map(|y| Ok(stokeslet(&(x - y))?.velocity.map(|z| z.re)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let a = Mat::from_fn(3 * data.nodes.len(), 3 * points.len(), |r, c| {
        C64::new(kernel[r / 3][c / 3][(r % 3, c % 3)] * sqrt_w[r / 3], 0.0)
    });
    let ls = RegularizedLstsq::new(a, 1e-13);
    let mut strengths = Vec::new();
    let mut trace_residual = Vec::new();
    for (k, m) in data.modes.iter().enumerate() {
        let targets: Vec<[C64; 3]> = m
            .iter()
            .zip(&data.nodes)
            .map(|(h, x)| {
                let c = flux_carrier_mode(flux[k], 0.0, &Vec3::zeros(), x).u;
                [h[0] - c[0], h[1] - c[1], h[2] - c[2]]
            })
            .collect();
        let rhs: Vec<C64> = targets
            .iter()
            .zip(&sqrt_w)
            .flat_map(|(t, s)| t.map(|z| z * *s))
            .collect();
        let x = if rhs.iter().all(|z| z.norm() == 0.0) {
            vec![C64::new(0.0, 0.0); 3 * points.len()]
        } else {
            ls.solve(&rhs)
        };
        let s: Vec<CVec3> = x.chunks(3).map(|c| CVec3::new(c[0], c[1], c[2])).collect();
        let scale = m.iter().map(cnorm3).fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for (row, t) in kernel.iter().zip(&targets) {
            let mut u = CVec3::zeros();
            for (g, sj) in row.iter().zip(&s) {
                u += g.map(|v| C64::new(v, 0.0)) * sj;
            }
            worst = worst.max(((u[0] - t[0]).norm_sqr() + (u[1] - t[1]).norm_sqr() + (u[2] - t[2]).norm_sqr()).sqrt());
        }
        trace_residual.push(if scale > 0.0 { worst / scale } else { 0.0 });
        strengths.push(s);
    }
    Ok(FluxExtension {
        body,
        period: data.period,
        flux,
        sources: points,
        strengths,
        trace_residual,
    })
}

impl ModalField for FluxExtension {
    fn kmax(&self) -> usize {
        self.flux.len() - 1
    }
    fn period(&self) -> f64 {
        self.period
    }
    /// Velocity and gradient of h̃_k; the pressure slot is left at zero.
    fn mode(&self, k: usize, x: &Vec3) -> Result<ModeSample> {
        let mut out = flux_carrier_mode(self.flux[k], 0.0, &Vec3::zeros(), x);
        out.p = C64::new(0.0, 0.0);
        let r = x.norm();
        let (chi, chi1, chi2) = self.cutoff(r);
        if chi == 0.0 && chi1 == 0.0 {
            return Ok(out);
        }
        let xh = x / r;
        let mut u = ModeSample::zero();
        let mut pot = CVec3::zeros();
        let mut dpot = CMat3::zeros(); // (m, l) = ∂_m A_l
        for (y, a) in self.sources.iter().zip(&self.strengths[k]) {
            let rho = x - y;
            let d = rho.norm();
            let rh = rho / d;
            u += apply_jet(&stokeslet_jet(&rho)?, a);
            let rhc = rh.map(|c| C64::new(c, 0.0));
            pot -= rhc.cross(a) / C64::new(8.0 * PI, 0.0);
            for m in 0..3 {
                let drh: CVec3 = Vec3::from_fn(|p, _| (if m == p { 1.0 } else { 0.0 } - rh[m] * rh[p]) / d)
                    .map(|c| C64::new(c, 0.0));
                let dl = drh.cross(a) / C64::new(-8.0 * PI, 0.0);
                for l in 0..3 {
                    dpot[(m, l)] += dl[l];
                }
            }
        }
        // B = χ'(r) x̂ and its gradient.
        let b = xh * chi1;
        let db = Matrix3::from_fn(|m, kk| chi2 * xh[m] * xh[kk] + chi1 * ((if m == kk { 1.0 } else { 0.0 }) - xh[m] * xh[kk]) / r);
        let bc = b.map(|c| C64::new(c, 0.0));
        let val = u.u * C64::new(chi, 0.0) + bc.cross(&pot);
        let mut grad = CMat3::zeros();
        for m in 0..3 {
            let dbm: CVec3 = Vec3::from_fn(|kk, _| db[(m, kk)]).map(|c| C64::new(c, 0.0));
            let dam: CVec3 = CVec3::new(dpot[(m, 0)], dpot[(m, 1)], dpot[(m, 2)]);
            let term = dbm.cross(&pot) + bc.cross(&dam);
            for j in 0..3 {
                grad[(m, j)] = u.u[j] * (chi1 * xh[m]) + u.grad[(m, j)] * chi + term[j];
            }
        }
        out.u += val;
        out.grad += grad;
        Ok(out)
    }
}
