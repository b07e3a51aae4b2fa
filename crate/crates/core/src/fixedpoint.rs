//! Weighted sup norms of exterior flows, the convection term in those
//! norms, and the small-data Picard iteration for the exterior problem.
//!
//! Only the pointwise parts of the solution norm are measured: the
//! maximal-regularity terms (∇²v and ∂_t v in L^p(L^q)) are not modelled.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{solve_exterior, BoundaryDataModes, ExteriorConfig, ExteriorSolution};
use crate::field::{convection_modes, synthesize, FlowParams, ModalField, ModeSample, RealSample};
use crate::geometry::{frame_about, AnnulusQuadrature, SphereQuadrature, Vec3};
use crate::kernels::{s_wake, CVec3};
use crate::truncated::Forcing;
use crate::volume::PointForceField;

/// Shells × directions × times on which the weighted suprema are taken.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleSet {
    pub radii: Vec<f64>,
    pub directions: Vec<Vec3>,
    pub times: usize,
}

impl SampleSet {
    /// Radii {2,3,5,8,13,21,34}, the 26 cube directions in a frame whose
    /// first axis is ζ̂, and 16 times.
    pub fn standard(zeta: &Vec3) -> Self {
        Self::new(vec![2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0], zeta, 16)
    }

    pub fn new(radii: Vec<f64>, zeta: &Vec3, times: usize) -> Self {
        let axis = if zeta.norm() > 0.0 { *zeta } else { Vec3::x() };
        let f = frame_about(&axis);
        let mut directions = Vec::with_capacity(26);
        for a in -1i32..=1 {
            for b in -1i32..=1 {
                for c in -1i32..=1 {
                    if (a, b, c) != (0, 0, 0) {
                        directions.push((f[0] * a as f64 + f[1] * b as f64 + f[2] * c as f64).normalize());
                    }
                }
            }
        }
        SampleSet { radii, directions, times }
    }

    pub fn points(&self) -> Vec<Vec3> {
        self.radii
            .iter()
            .flat_map(|r| self.directions.iter().map(move |d| d * *r))
            .collect()
    }

    pub fn describe(&self) -> String {
        format!(
            "radii {:?} x {} directions x {} times",
            self.radii,
            self.directions.len(),
            self.times
        )
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct WeightedNormReport {
    /// sup ν^1_1 |𝒫u|.
    pub steady: f64,
    /// sup ν^{3/2}_{3/2} |∇𝒫u|.
    pub steady_grad: f64,
    /// sup |x|² |𝒫p|; reported, not part of the norm.
    pub steady_pressure: f64,
    /// sup |x|² |𝒫_⊥u| (k = 0) or sup |x|³ |𝒫_⊥u| (k = 1).
    pub perp: f64,
    /// sup |x|³ |∇𝒫_⊥u| (k = 0) or sup |x|^{3+δ} |∇𝒫_⊥u| (k = 1).
    pub perp_grad: f64,
    pub k: usize,
    pub delta: f64,
    pub samples: String,
}

impl WeightedNormReport {
    /// steady + steady_grad + N_k.
    pub fn total(&self) -> f64 {
        self.steady + self.steady_grad + self.perp + self.perp_grad
    }
}

fn nu(x: &Vec3, zeta: &Vec3, alpha: f64, beta: f64) -> f64 {
    x.norm().powf(alpha) * (1.0 + s_wake(x, zeta)).powf(beta)
}

fn perp_exponents(k: usize, delta: f64) -> (f64, f64) {
    if k == 0 {
        (2.0, 3.0)
    } else {
        (3.0, 3.0 + delta)
    }
}

/// Norms from modes already sampled at `set.points()`.
pub fn xk_norm_from_samples(samples: &[Vec<ModeSample>], period: f64, zeta: &Vec3, k: usize, delta: f64, set: &SampleSet) -> WeightedNormReport {
    let (a, b) = perp_exponents(k, delta);
    let points = set.points();
    let per: Vec<[f64; 5]> = points
        .par_iter()
        .zip(samples)
        .map(|(x, m)| {
            let mut out = [0.0; 5];
            if let Some(m0) = m.first() {
                let u0 = m0.u.map(|z| z.re);
                let g0 = m0.grad.map(|z| z.re);
                out[0] = nu(x, zeta, 1.0, 1.0) * u0.norm();
                out[1] = nu(x, zeta, 1.5, 1.5) * g0.norm();
                out[2] = x.norm_squared() * m0.p.re.abs();
            }
            let mut rest = m.clone();
            if let Some(m0) = rest.first_mut() {
                *m0 = ModeSample::zero();
            }
            let r = x.norm();
            for j in 0..set.times {
                let s = synthesize(&rest, period, period * j as f64 / set.times as f64);
                out[3] = out[3].max(r.powf(a) * s.u.norm());
                out[4] = out[4].max(r.powf(b) * s.grad.norm());
            }
            out
        })
        .collect();
    let sup = |i: usize| per.iter().map(|v| v[i]).fold(0.0, f64::max);
    WeightedNormReport {
        steady: sup(0),
        steady_grad: sup(1),
        steady_pressure: sup(2),
        perp: sup(3),
        perp_grad: sup(4),
        k,
        delta,
        samples: set.describe(),
    }
}

/// Discrete weighted norm of `u` on the sample set; gradients are the
/// Frobenius norms of the analytic gradients.
pub fn xk_norm(u: &dyn ModalField, zeta: &Vec3, k: usize, delta: f64, set: &SampleSet) -> Result<WeightedNormReport> {
    let samples = set.points().par_iter().map(|x| u.modes(x)).collect::<Result<Vec<_>>>()?;
    Ok(xk_norm_from_samples(&samples, u.period(), zeta, k, delta, set))
}

/// 𝒩(v₁, v₂) = v₁·∇v₂ at one point and time.
pub fn nonlinear_term(v1: &RealSample, v2: &RealSample) -> Vec3 {
    v2.grad.transpose() * v1.u
}

pub fn nonlinear_term_at(v1: &dyn ModalField, v2: &dyn ModalField, t: f64, x: &Vec3) -> Result<Vec3> {
    Ok(nonlinear_term(&v1.sample(t, x)?, &v2.sample(t, x)?))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonlinearBoundReport {
    /// sup ν^{5/2}_1 |𝒫𝒩(v₁,v₂)|.
    pub steady: f64,
    /// sup |x|^{7/2+k/2} |𝒫_⊥𝒩(v₁,v₂)|.
    pub perp: f64,
    pub norm1: f64,
    pub norm2: f64,
    /// (steady + perp) / (‖v₁‖‖v₂‖): the smallest constant the samples allow.
    pub constant: f64,
    pub k: usize,
}

/// Weighted sizes of the steady and purely periodic parts of v₁·∇v₂,
/// compared with the product of the discrete norms.
pub fn nonlinear_weighted_bound(
    v1: &dyn ModalField,
    v2: &dyn ModalField,
    zeta: &Vec3,
    k: usize,
    delta: f64,
    set: &SampleSet,
) -> Result<NonlinearBoundReport> {
    let period = v1.period();
    let points = set.points();
    let s1 = points.par_iter().map(|x| v1.modes(x)).collect::<Result<Vec<_>>>()?;
    let s2 = points.par_iter().map(|x| v2.modes(x)).collect::<Result<Vec<_>>>()?;
    let power = 3.5 + 0.5 * k as f64;
    // Time average needs a grid exact for products of the two bands.
    let nt = set.times.max(2 * (v1.kmax() + v2.kmax()) + 1);
    let per: Vec<(f64, f64)> = points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let vals: Vec<Vec3> = (0..nt)
                .map(|j| {
                    let t = period * j as f64 / nt as f64;
                    nonlinear_term(&synthesize(&s1[i], period, t), &synthesize(&s2[i], period, t))
                })
                .collect();
            let mean = vals.iter().sum::<Vec3>() / nt as f64;
            let perp = vals.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max);
            (nu(x, zeta, 2.5, 1.0) * mean.norm(), x.norm().powf(power) * perp)
        })
        .collect();
    let steady = per.iter().map(|p| p.0).fold(0.0, f64::max);
    let perp = per.iter().map(|p| p.1).fold(0.0, f64::max);
    let norm1 = xk_norm_from_samples(&s1, period, zeta, k, delta, set).total();
    let norm2 = xk_norm_from_samples(&s2, period, zeta, k, delta, set).total();
    let denom = norm1 * norm2;
    Ok(NonlinearBoundReport {
        steady,
        perp,
        norm1,
        norm2,
        constant: if denom > 0.0 { (steady + perp) / denom } else { 0.0 },
        k,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExteriorPicardConfig {
    pub exterior: ExteriorConfig,
    /// The convection term is carried on r_b < |x| < volume_radius.
    pub volume_radius: f64,
    pub volume_order: usize,
    pub volume_nodes_per_panel: usize,
    pub volume_ratio: f64,
    pub max_iter: usize,
    /// Stop once ‖u^{n+1} − u^n‖ ≤ tol ‖u^{n+1}‖.
    pub tol: f64,
    pub k: usize,
    pub delta: f64,
}

impl Default for ExteriorPicardConfig {
    fn default() -> Self {
        ExteriorPicardConfig {
            exterior: ExteriorConfig::default(),
            volume_radius: 12.0,
            volume_order: 4,
            volume_nodes_per_panel: 3,
            volume_ratio: 1.6,
            max_iter: 30,
            tol: 1e-10,
            k: 0,
            delta: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionReport {
    pub iterations: usize,
    /// ‖u^{n+1} − u^n‖ in the discrete weighted norm.
    pub increments: Vec<f64>,
    pub ratios: Vec<f64>,
    pub converged: bool,
    pub final_norm: WeightedNormReport,
    pub eps_target: f64,
    pub within_target: bool,
}

/// u^{n+1} solves the linear exterior problem with forcing f − u^n·∇u^n,
/// starting from u⁰ = 0. The volume term is a regularized point-force sum
/// on an annulus around the body.
pub fn exterior_picard(
    data: &BoundaryDataModes,
    params: &FlowParams,
    forcing: Option<Forcing>,
    cfg: &ExteriorPicardConfig,
    eps_target: f64,
) -> Result<(ExteriorSolution, ContractionReport)> {
    let rb = data.body.radius;
    let grid = AnnulusQuadrature::graded(
        rb,
        cfg.volume_radius * rb,
        cfg.volume_nodes_per_panel,
        cfg.volume_ratio,
        SphereQuadrature::new(cfg.volume_order, params.zeta),
    )?;
    let (nodes, weights) = grid.points();
    let set = SampleSet::standard(&params.zeta);
    let points = set.points();
    let kmax = params.kmax;
    let f_values: Option<Vec<Vec<CVec3>>> = forcing.as_ref().map(|f| {
        (0..=kmax)
            .map(|k| nodes.par_iter().map(|x| f(k, x)).collect())
            .collect()
    });

    let mut prev_volume: Vec<Vec<ModeSample>> = vec![vec![ModeSample::zero(); kmax + 1]; nodes.len()];
    let mut prev_samples: Vec<Vec<ModeSample>> = vec![vec![ModeSample::zero(); kmax + 1]; points.len()];
    let mut increments = Vec::new();
    let mut ratios = Vec::new();
    let mut last: Option<ExteriorSolution> = None;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let conv: Vec<Vec<CVec3>> = prev_volume.par_iter().map(|m| convection_modes(m, params.period)).collect();
        let values: Vec<Vec<CVec3>> = (0..=kmax)
            .map(|k| {
                (0..nodes.len())
                    .map(|i| {
                        let f = f_values.as_ref().map_or(CVec3::zeros(), |v| v[k][i]);
                        f - conv[i][k]
                    })
                    .collect()
            })
            .collect();
        let particular = PointForceField::new(params, nodes.clone(), &weights, values);
        let volume: Option<Arc<dyn ModalField + Send>> = if particular.is_zero() {
            None
        } else {
            Some(Arc::new(particular))
        };
        let sol = solve_exterior(data, params, &cfg.exterior, volume)?;
        let samples = points.par_iter().map(|x| sol.modes(x)).collect::<Result<Vec<_>>>()?;
        let diff: Vec<Vec<ModeSample>> = samples
            .iter()
            .zip(&prev_samples)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| *x - *y).collect())
            .collect();
        let incr = xk_norm_from_samples(&diff, params.period, &params.zeta, cfg.k, cfg.delta, &set).total();
        let size = xk_norm_from_samples(&samples, params.period, &params.zeta, cfg.k, cfg.delta, &set).total();
        if let Some(p) = increments.last() {
            if *p > 0.0 {
                ratios.push(incr / p);
            }
        }
        increments.push(incr);
        prev_volume = nodes.par_iter().map(|x| sol.modes(x)).collect::<Result<Vec<_>>>()?;
        prev_samples = samples;
        last = Some(sol);
        if incr == 0.0 || incr <= cfg.tol * size {
            converged = true;
            break;
        }
        if ratios.len() >= 2 && ratios[ratios.len() - 2..].iter().all(|r| *r >= 1.0) {
            break;
        }
    }
    if !converged {
        return Err(Error::Divergence { ratios });
    }
    let sol = last.expect("at least one iteration ran");
    let final_norm = xk_norm_from_samples(&prev_samples, params.period, &params.zeta, cfg.k, cfg.delta, &set);
    let within_target = final_norm.total() <= eps_target;
    Ok((
        sol,
        ContractionReport {
            iterations: increments.len(),
            increments,
            ratios,
            converged,
            final_norm,
            eps_target,
            within_target,
        },
    ))
}

/// Splits the modes at a point into the steady part and the purely
/// periodic part; their sum reproduces the field.
pub fn split_steady(modes: &[ModeSample]) -> (Vec<ModeSample>, Vec<ModeSample>) {
    let mut steady = vec![ModeSample::zero(); modes.len()];
    let mut perp = modes.to_vec();
    if let (Some(s), Some(p)) = (steady.first_mut(), perp.first_mut()) {
        *s = *p;
        *p = ModeSample::zero();
    }
    (steady, perp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::CMat3;
    use num_complex::Complex64 as C64;

    fn sample(u: [f64; 3], g: [[f64; 3]; 3]) -> RealSample {
        RealSample {
            u: Vec3::new(u[0], u[1], u[2]),
            grad: nalgebra::Matrix3::from_fn(|m, i| g[m][i]),
            p: 0.0,
        }
    }

    #[test]
    fn convection_of_constant_field_vanishes() {
        let v1 = sample([1.0, -2.0, 0.5], [[0.3, 0.1, 0.0], [0.0, 0.2, 0.1], [1.0, 0.0, 0.0]]);
        let v2 = sample([3.0, 1.0, 1.0], [[0.0; 3]; 3]);
        assert_eq!(nonlinear_term(&v1, &v2), Vec3::zeros());
    }

    #[test]
    fn convection_uses_gradient_rows_as_derivatives() {
        // v₂ = (x₂, 0, 0): ∂₂v₂,₁ = 1, so v₁·∇v₂ = (v₁,₂, 0, 0).
        let v1 = sample([0.0, 2.0, 0.0], [[0.0; 3]; 3]);
        let mut g = [[0.0; 3]; 3];
        g[1][0] = 1.0;
        let v2 = sample([0.0; 3], g);
        assert_eq!(nonlinear_term(&v1, &v2), Vec3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn standard_sample_set_shape() {
        let s = SampleSet::standard(&Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(s.directions.len(), 26);
        assert_eq!(s.points().len(), 7 * 26);
        assert!(s.directions.iter().any(|d| (d - Vec3::x()).norm() < 1e-12));
    }

    #[test]
    fn split_reconstructs_modes() {
        let m = |a: f64| ModeSample {
            u: CVec3::new(C64::new(a, 0.1), C64::new(0.0, a), C64::new(1.0, 0.0)),
            grad: CMat3::identity() * C64::new(a, -a),
            p: C64::new(a, 0.0),
        };
        let modes = vec![m(1.0), m(0.5), m(-0.25)];
        let (s, p) = split_steady(&modes);
        for t in [0.0, 0.3, 1.7] {
            let a = synthesize(&modes, 2.0, t);
            let b = synthesize(&s, 2.0, t);
            let c = synthesize(&p, 2.0, t);
            assert!((a.u - b.u - c.u).norm() < 1e-12);
            assert!((a.grad - b.grad - c.grad).norm() < 1e-12);
        }
    }
}
