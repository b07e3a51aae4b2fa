//! Particular solutions of volume forcings sampled on a quadrature grid.
//!
//! Each node carries the force w_m g(y_m) spread uniformly over a ball of
//! volume w_m. The Stokes part of the kernel is replaced by its exact ball
//! average, which keeps the field bounded and continuous at the nodes; the
//! smoother remainder Γ − S is used as is.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::Result;
use crate::field::{apply_jet, FlowParams, ModalField, ModeSample};
use crate::geometry::Vec3;
use crate::kernels::{stokeslet_jet, CMat3, CVec3, KernelJet, KernelValue};

pub struct PointForceField {
    pub params: FlowParams,
    pub nodes: Vec<Vec3>,
    /// Ball radius attached to each node, (3w/4π)^{1/3}.
    pub radii: Vec<f64>,
    /// `forces[k][m]` = w_m ĝ_k(y_m).
    pub forces: Vec<Vec<CVec3>>,
}

impl PointForceField {
    /// `values[k][m]` is the forcing mode k at node m.
    pub fn new(params: &FlowParams, nodes: Vec<Vec3>, weights: &[f64], values: Vec<Vec<CVec3>>) -> Self {
        let radii = weights.iter().map(|w| (3.0 * w / (4.0 * PI)).cbrt()).collect();
        let forces = values
            .into_iter()
            .map(|v| v.into_iter().zip(weights).map(|(g, w)| g * C64::new(*w, 0.0)).collect())
            .collect();
        PointForceField {
            params: params.clone(),
            nodes,
            radii,
            forces,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.forces.iter().all(|m| m.iter().all(|f| f.iter().all(|z| z.norm() == 0.0)))
    }
}

impl ModalField for PointForceField {
    fn kmax(&self) -> usize {
        self.forces.len().saturating_sub(1)
    }
    fn period(&self) -> f64 {
        self.params.period
    }
    fn mode(&self, k: usize, x: &Vec3) -> Result<ModeSample> {
        let mut acc = ModeSample::zero();
        if k >= self.forces.len() {
            return Ok(acc);
        }
        for ((y, eps), f) in self.nodes.iter().zip(&self.radii).zip(&self.forces[k]) {
            if f.iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            let jet = regularized_jet(&self.params, k, &(x - y), *eps)?;
            acc += apply_jet(&jet, f);
        }
        Ok(acc)
    }
}

fn real_jet(v: Matrix3<f64>, g: [Matrix3<f64>; 3], p: Vec3, pg: Matrix3<f64>) -> KernelJet {
    let c = |m: &Matrix3<f64>| m.map(|x| C64::new(x, 0.0));
    KernelJet {
        value: KernelValue {
            velocity: c(&v),
            pressure: p.map(|x| C64::new(x, 0.0)),
        },
        grad: [c(&g[0]), c(&g[1]), c(&g[2])],
        pressure_grad: c(&pg),
    }
}

/// Ball average over radius ε of the Stokeslet and its pressure minus the
/// point values, valid for |z| ≥ ε: (ε²/10)ΔS, zero pressure change.
fn ball_correction_outside(z: &Vec3, eps: f64) -> KernelJet {
    let r = z.norm();
    let c = eps * eps / (40.0 * PI);
    let r3 = r * r * r;
    let r5 = r3 * r * r;
    let r7 = r5 * r * r;
    let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let v = Matrix3::from_fn(|i, j| c * (d(i, j) / r3 - 3.0 * z[i] * z[j] / r5));
    let g: [Matrix3<f64>; 3] = std::array::from_fn(|m| {
        Matrix3::from_fn(|i, j| {
            c * (-3.0 * d(i, j) * z[m] / r5 - 3.0 * (d(m, i) * z[j] + z[i] * d(m, j)) / r5
                + 15.0 * z[i] * z[j] * z[m] / r7)
        })
    });
    real_jet(v, g, Vec3::zeros(), Matrix3::zeros())
}

/// Ball-averaged Stokeslet and pressure for |z| < ε.
fn ball_stokeslet_inside(z: &Vec3, eps: f64) -> KernelJet {
    let e3 = eps * eps * eps;
    let rho2 = z.norm_squared();
    let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let s = 1.0 / (8.0 * PI);
    let v = Matrix3::from_fn(|i, j| s * (d(i, j) * (2.0 / eps - 0.8 * rho2 / e3) + 0.4 * z[i] * z[j] / e3));
    let g: [Matrix3<f64>; 3] = std::array::from_fn(|m| {
        Matrix3::from_fn(|i, j| s * (-1.6 * z[m] * d(i, j) + 0.4 * (d(m, i) * z[j] + z[i] * d(m, j))) / e3)
    });
    let p = z / (4.0 * PI * e3);
    let pg = Matrix3::identity() / (4.0 * PI * e3);
    real_jet(v, g, p, pg)
}

fn add_jets(a: &KernelJet, b: &KernelJet, sb: f64) -> KernelJet {
    let s = C64::new(sb, 0.0);
    KernelJet {
        value: KernelValue {
            velocity: a.value.velocity + b.value.velocity * s,
            pressure: a.value.pressure + b.value.pressure * s,
        },
        grad: std::array::from_fn(|m| a.grad[m] + b.grad[m] * s),
        pressure_grad: a.pressure_grad + b.pressure_grad * s,
    }
}

/// Kernel of mode k for a force spread over the ball of radius ε.
pub fn regularized_jet(params: &FlowParams, k: usize, z: &Vec3, eps: f64) -> Result<KernelJet> {
    let r = z.norm();
    if r >= eps {
        let j = params.kernel_jet(k, z)?;
        return Ok(add_jets(&j, &ball_correction_outside(z, eps), 1.0));
    }
    let core = ball_stokeslet_inside(z, eps);
    // Γ − S is bounded at the origin but direction dependent; average it
    // over six points at radius ε/2 when z is (numerically) the centre.
    let rest = if r > 1e-6 * eps {
        let full = params.kernel_jet(k, z)?;
        let s = stokeslet_jet(z)?;
        let mut d = add_jets(&full, &s, -1.0);
        d.value.pressure = CVec3::zeros();
        d.pressure_grad = CMat3::zeros();
        d
    } else {
        let mut acc: Option<KernelJet> = None;
        for i in 0..3 {
            for sgn in [-1.0, 1.0] {
                let mut h = Vec3::zeros();
                h[i] = sgn * 0.5 * eps;
                let full = params.kernel_jet(k, &h)?;
                let s = stokeslet_jet(&h)?;
                let d = add_jets(&full, &s, -1.0);
                acc = Some(match acc {
                    None => d,
                    Some(a) => add_jets(&a, &d, 1.0),
                });
            }
        }
        let mut d = acc.expect("six samples");
        let sixth = C64::new(1.0 / 6.0, 0.0);
        d.value.velocity *= sixth;
        for g in d.grad.iter_mut() {
            *g = CMat3::zeros();
        }
        d.value.pressure = CVec3::zeros();
        d.pressure_grad = CMat3::zeros();
        d
    };
    Ok(add_jets(&core, &rest, 1.0))
}

/// Evaluates a modal field at many points in parallel.
pub fn sample_modes(field: &dyn ModalField, points: &[Vec3]) -> Result<Vec<Vec<ModeSample>>> {
    points.par_iter().map(|x| field.modes(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::NewtonianPotentialGrid;

    #[test]
    fn ball_stokeslet_is_continuous_at_the_ball_surface() {
        let eps = 0.3;
        let z = Vec3::new(0.1, -0.2, 0.2).normalize() * eps;
        let inside = ball_stokeslet_inside(&(z * (1.0 - 1e-12)), eps);
        let s = stokeslet_jet(&z).unwrap();
        let outside = add_jets(&s, &ball_correction_outside(&z, eps), 1.0);
        assert!((inside.value.velocity - outside.value.velocity).norm() < 1e-10);
        assert!((inside.value.pressure - outside.value.pressure).norm() < 1e-10);
        for m in 0..3 {
            assert!((inside.grad[m] - outside.grad[m]).norm() < 1e-9);
        }
    }

    #[test]
    fn ball_stokeslet_is_solenoidal() {
        let z = Vec3::new(0.05, 0.02, -0.04);
        let j = ball_stokeslet_inside(&z, 0.2);
        for col in 0..3 {
            let div: C64 = (0..3).map(|m| j.grad[m][(m, col)]).sum();
            assert!(div.norm() < 1e-12);
        }
    }

    #[test]
    fn far_field_matches_point_force() {
        let params = FlowParams::new(Vec3::new(0.5, 0.0, 0.0), 6.0, 1, NewtonianPotentialGrid::default()).unwrap();
        let z = Vec3::new(3.0, 1.0, -2.0);
        let a = regularized_jet(&params, 1, &z, 1e-3).unwrap();
        let b = params.kernel_jet(1, &z).unwrap();
        assert!((a.value.velocity - b.value.velocity).norm() < 1e-8);
    }
}
