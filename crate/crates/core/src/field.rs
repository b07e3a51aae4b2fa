//! Time-periodic fields stored by their time-Fourier modes k = 0..K.
//!
//! A real field is u(t,x) = Re û₀(x) + 2 Σ_{k≥1} Re(e^{iω_k t} û_k(x)),
//! using û_{−k} = conj(û_k).

use std::f64::consts::PI;

use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::kernels::{
    oseenlet_mode_jet, steady_kernel_jet, CMat3, CVec3, KernelJet, ModeSpec, NewtonianPotentialGrid,
};

/// Velocity, velocity gradient (`grad[(m, i)] = ∂_m u_i`) and pressure of one mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeSample {
    pub u: CVec3,
    pub grad: CMat3,
    pub p: C64,
}

impl ModeSample {
    pub fn zero() -> Self {
        ModeSample {
            u: CVec3::zeros(),
            grad: CMat3::zeros(),
            p: C64::new(0.0, 0.0),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        ModeSample {
            u: self.u * s,
            grad: self.grad * s,
            p: self.p * s,
        }
    }
}

impl std::ops::Add for ModeSample {
    type Output = ModeSample;
    fn add(self, o: ModeSample) -> ModeSample {
        ModeSample {
            u: self.u + o.u,
            grad: self.grad + o.grad,
            p: self.p + o.p,
        }
    }
}

impl std::ops::AddAssign for ModeSample {
    fn add_assign(&mut self, o: ModeSample) {
        self.u += o.u;
        self.grad += o.grad;
        self.p += o.p;
    }
}

impl std::ops::Sub for ModeSample {
    type Output = ModeSample;
    fn sub(self, o: ModeSample) -> ModeSample {
        ModeSample {
            u: self.u - o.u,
            grad: self.grad - o.grad,
            p: self.p - o.p,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealSample {
    pub u: Vec3,
    pub grad: Matrix3<f64>,
    pub p: f64,
}

impl RealSample {
    pub fn zero() -> Self {
        RealSample {
            u: Vec3::zeros(),
            grad: Matrix3::zeros(),
            p: 0.0,
        }
    }
}

/// Physical parameters shared by every mode of a flow.
#[derive(Clone, Debug)]
pub struct FlowParams {
    pub zeta: Vec3,
    pub period: f64,
    pub kmax: usize,
    pub grid: NewtonianPotentialGrid,
}

impl FlowParams {
    pub fn new(zeta: Vec3, period: f64, kmax: usize, grid: NewtonianPotentialGrid) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::Config(format!("period must be positive, got {period}")));
        }
        Ok(FlowParams {
            zeta,
            period,
            kmax,
            grid,
        })
    }

    pub fn omega(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.period
    }

    pub fn mode(&self, k: usize) -> ModeSpec {
        ModeSpec::new(k as i64, self.period, self.zeta)
    }

    /// Kernel jet of mode k: steady Oseen/Stokes for k = 0, Γ_k otherwise.
    pub fn kernel_jet(&self, k: usize, x: &Vec3) -> Result<KernelJet> {
        if k == 0 {
            steady_kernel_jet(x, &self.zeta)
        } else {
            oseenlet_mode_jet(x, &self.mode(k), &self.grid)
        }
    }

    pub fn time_grid(&self, n: usize) -> Vec<f64> {
        (0..n).map(|j| self.period * j as f64 / n as f64).collect()
    }
}

/// Flow at x due to a point force c in mode k.
pub fn apply_jet(jet: &KernelJet, c: &CVec3) -> ModeSample {
    let u = jet.value.velocity * c;
    let mut grad = CMat3::zeros();
    for m in 0..3 {
        let gm = jet.grad[m] * c;
        for i in 0..3 {
            grad[(m, i)] = gm[i];
        }
    }
    ModeSample {
        u,
        grad,
        p: jet.value.pressure.dot(c),
    }
}

pub trait ModalField: Sync {
    fn kmax(&self) -> usize;
    fn period(&self) -> f64;
    fn mode(&self, k: usize, x: &Vec3) -> Result<ModeSample>;

    fn modes(&self, x: &Vec3) -> Result<Vec<ModeSample>> {
        (0..=self.kmax()).map(|k| self.mode(k, x)).collect()
    }

    fn sample(&self, t: f64, x: &Vec3) -> Result<RealSample> {
        Ok(synthesize(&self.modes(x)?, self.period(), t))
    }
}

/// Real value at time t from the modes k = 0..K.
pub fn synthesize(modes: &[ModeSample], period: f64, t: f64) -> RealSample {
    let mut out = RealSample::zero();
    for (k, m) in modes.iter().enumerate() {
        let (f, ph) = if k == 0 {
            (1.0, C64::new(1.0, 0.0))
        } else {
            (2.0, C64::from_polar(1.0, 2.0 * PI * k as f64 * t / period))
        };
        out.u += (m.u * ph).map(|z| f * z.re);
        out.grad += (m.grad * ph).map(|z| f * z.re);
        out.p += f * (m.p * ph).re;
    }
    out
}

/// Modes 0..=kmax of real samples on the uniform grid t_j = j𝒯/n.
pub fn analyze<T, F>(values: &[T], kmax: usize, mut lift: F) -> Vec<Vec<C64>>
where
    F: FnMut(&T) -> Vec<f64>,
{
    let n = values.len();
    let lifted: Vec<Vec<f64>> = values.iter().map(&mut lift).collect();
    let width = lifted.first().map_or(0, |v| v.len());
    (0..=kmax)
        .map(|k| {
            let mut acc = vec![C64::new(0.0, 0.0); width];
            for (j, v) in lifted.iter().enumerate() {
                let ph = C64::from_polar(1.0 / n as f64, -2.0 * PI * (k * j) as f64 / n as f64);
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += ph * *x;
                }
            }
            acc
        })
        .collect()
}

/// Modes 0..=K of u·∇u from the modes of u, on a time grid of 4K points
/// (exact for products of two K-band fields).
pub fn convection_modes(modes: &[ModeSample], period: f64) -> Vec<CVec3> {
    let kmax = modes.len().saturating_sub(1);
    let n = (4 * kmax).max(1);
    let samples: Vec<Vec3> = (0..n)
        .map(|j| {
            let r = synthesize(modes, period, period * j as f64 / n as f64);
            r.grad.transpose() * r.u
        })
        .collect();
    analyze(&samples, kmax, |v| vec![v.x, v.y, v.z])
        .into_iter()
        .map(|m| CVec3::new(m[0], m[1], m[2]))
        .collect()
}

/// Time L² norm squared of a real field from its modes (Parseval):
/// 𝒯(|û₀|² + 2Σ|û_k|²).
pub fn parseval(mode_norms_sq: &[f64], period: f64) -> f64 {
    mode_norms_sq
        .iter()
        .enumerate()
        .map(|(k, v)| if k == 0 { *v } else { 2.0 * v })
        .sum::<f64>()
        * period
}

/// Sum of two modal fields; the shorter one is padded with zeros.
pub struct FieldSum<'a> {
    pub a: &'a dyn ModalField,
    pub b: &'a dyn ModalField,
    pub b_sign: f64,
}

impl ModalField for FieldSum<'_> {
    fn kmax(&self) -> usize {
        self.a.kmax().max(self.b.kmax())
    }
    fn period(&self) -> f64 {
        self.a.period()
    }
    fn mode(&self, k: usize, x: &Vec3) -> Result<ModeSample> {
        let mut s = if k <= self.a.kmax() {
            self.a.mode(k, x)?
        } else {
            ModeSample::zero()
        };
        if k <= self.b.kmax() {
            s += self.b.mode(k, x)?.scale(C64::new(self.b_sign, 0.0));
        }
        Ok(s)
    }
}

/// The identically zero field.
pub struct ZeroField {
    pub kmax: usize,
    pub period: f64,
}

impl ModalField for ZeroField {
    fn kmax(&self) -> usize {
        self.kmax
    }
    fn period(&self) -> f64 {
        self.period
    }
    fn mode(&self, _k: usize, _x: &Vec3) -> Result<ModeSample> {
        Ok(ModeSample::zero())
    }
}

/// Superposition of point forces located at `points`, with complex
/// strengths per mode; optionally plus a flux carrier q_k σ.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SourceModes {
    pub points: Vec<Vec3>,
    /// `strengths[k][j]` is the force at `points[j]` in mode k.
    pub strengths: Vec<Vec<[C64; 3]>>,
}

impl SourceModes {
    pub fn zeros(points: Vec<Vec3>, kmax: usize) -> Self {
        let n = points.len();
        SourceModes {
            points,
            strengths: vec![vec![[C64::new(0.0, 0.0); 3]; n]; kmax + 1],
        }
    }

    pub fn eval(&self, params: &FlowParams, k: usize, x: &Vec3) -> Result<ModeSample> {
        let mut acc = ModeSample::zero();
        for (y, c) in self.points.iter().zip(&self.strengths[k]) {
            if c.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                continue;
            }
            let jet = params.kernel_jet(k, &(x - y))?;
            acc += apply_jet(&jet, &CVec3::new(c[0], c[1], c[2]));
        }
        Ok(acc)
    }
}

/// Flux carrier σ = ∇E = −x/(4π|x|³) with the pressure that makes q σ an
/// Oseen mode: p = q(−iω E + ζ·σ).
pub fn flux_carrier_mode(q: C64, omega: f64, zeta: &Vec3, x: &Vec3) -> ModeSample {
    let r = x.norm();
    let r3 = r * r * r;
    let sigma = -x / (4.0 * PI * r3);
    let xh = x / r;
    let dsigma = -(Matrix3::identity() - xh * xh.transpose() * 3.0) / (4.0 * PI * r3);
    let e = 1.0 / (4.0 * PI * r);
    ModeSample {
        u: sigma.map(|v| q * v),
        grad: dsigma.map(|v| q * v),
        p: q * (C64::new(0.0, -omega * e) + zeta.dot(&sigma)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthesis_and_analysis_round_trip() {
        let period = 3.0;
        let modes = vec![
            ModeSample {
                u: CVec3::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(2.0, 0.0)),
                grad: CMat3::zeros(),
                p: C64::new(0.5, 0.0),
            },
            ModeSample {
                u: CVec3::new(C64::new(0.3, -0.2), C64::new(0.1, 0.4), C64::new(0.0, 0.0)),
                grad: CMat3::zeros(),
                p: C64::new(-0.1, 0.2),
            },
        ];
        let n = 8;
        let samples: Vec<RealSample> = (0..n)
            .map(|j| synthesize(&modes, period, period * j as f64 / n as f64))
            .collect();
        let back = analyze(&samples, 1, |s| vec![s.u.x, s.u.y, s.p]);
        assert!((back[0][0] - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((back[1][0] - C64::new(0.3, -0.2)).norm() < 1e-14);
        assert!((back[1][1] - C64::new(0.1, 0.4)).norm() < 1e-14);
        assert!((back[1][2] - C64::new(-0.1, 0.2)).norm() < 1e-14);
    }

    #[test]
    fn parseval_matches_time_average() {
        let modes = [
            ModeSample {
                u: CVec3::new(C64::new(0.7, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
                grad: CMat3::zeros(),
                p: C64::new(0.0, 0.0),
            },
            ModeSample {
                u: CVec3::new(C64::new(0.2, 0.5), C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
                grad: CMat3::zeros(),
                p: C64::new(0.0, 0.0),
            },
        ];
        let n = 16;
        let period = 2.0;
        let direct: f64 = (0..n)
            .map(|j| synthesize(&modes, period, period * j as f64 / n as f64).u.norm_squared())
            .sum::<f64>()
            * period
            / n as f64;
        let norms: Vec<f64> = modes.iter().map(|m| m.u.norm_squared()).collect();
        assert!((parseval(&norms, period) - direct).abs() < 1e-13);
    }

    #[test]
    fn flux_carrier_is_divergence_free() {
        let s = flux_carrier_mode(C64::new(1.0, 0.0), 0.0, &Vec3::zeros(), &Vec3::new(0.3, 1.1, -0.7));
        assert!(s.grad.trace().norm() < 1e-15);
    }
}
