//! The artificial boundary operator on ∂B_R,
//!
//!   𝔅(v, p) = (x/R)·(∇v − p I − ½ v⊗v) + ((1 + s_ζ(x))/R) v,
//!
//! with (∇v)_{ij} = ∂_i v_j, so (x/R)·∇v is the radial derivative of v.

use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{ModalField, ModeSample, RealSample};
use crate::geometry::Vec3;
use crate::kernels::{s_wake, CVec3};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct AbcOperator {
    pub radius: f64,
    pub zeta: Vec3,
    pub include_quadratic: bool,
}

impl AbcOperator {
    pub fn new(radius: f64, zeta: Vec3, include_quadratic: bool) -> Self {
        AbcOperator {
            radius,
            zeta,
            include_quadratic,
        }
    }

    fn robin(&self, x: &Vec3) -> f64 {
        (1.0 + s_wake(x, &self.zeta)) / self.radius
    }

    pub fn apply(&self, x: &Vec3, v: &Vec3, grad: &Matrix3<f64>, p: f64) -> Vec3 {
        let n = x / self.radius;
        let mut out = grad.transpose() * n - n * p + v * self.robin(x);
        if self.include_quadratic {
            out -= v * (0.5 * n.dot(v));
        }
        out
    }

    /// Linear part applied to one time mode.
    pub fn apply_linear_mode(&self, x: &Vec3, s: &ModeSample) -> CVec3 {
        let n = x / self.radius;
        let nc = n.map(|c| C64::new(c, 0.0));
        s.grad.transpose() * nc - nc * s.p + s.u * C64::new(self.robin(x), 0.0)
    }

    pub fn apply_sample(&self, x: &Vec3, s: &RealSample) -> Vec3 {
        self.apply(x, &s.u, &s.grad, s.p)
    }

    /// Size of the individual terms, used to make residuals relative.
    pub fn term_scale(&self, x: &Vec3, s: &RealSample) -> f64 {
        let n = x / self.radius;
        let mut scale = (s.grad.transpose() * n).norm() + s.p.abs() + self.robin(x) * s.u.norm();
        if self.include_quadratic {
            scale += 0.5 * n.dot(&s.u).abs() * s.u.norm();
        }
        scale
    }
}

pub fn abc_residual(op: &AbcOperator, field: &dyn ModalField, x: &Vec3, t: f64) -> Result<Vec3> {
    Ok(op.apply_sample(x, &field.sample(t, x)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_gives_zero() {
        let op = AbcOperator::new(4.0, Vec3::x(), true);
        let r = op.apply(&Vec3::new(0.0, 4.0, 0.0), &Vec3::zeros(), &Matrix3::zeros(), 0.0);
        assert_eq!(r, Vec3::zeros());
    }

    #[test]
    fn uniform_flow_without_translation() {
        let op = AbcOperator::new(5.0, Vec3::zeros(), false);
        let r = op.apply(&Vec3::new(3.0, 4.0, 0.0), &Vec3::x(), &Matrix3::zeros(), 0.0);
        assert!((r - Vec3::x() / 5.0).norm() < 1e-15);
    }

    #[test]
    fn radial_derivative_convention() {
        // v = (x₁, 0, 0): ∂_1 v_1 = 1, so (x/R)·∇v = (x₁/R) e₁.
        let op = AbcOperator::new(2.0, Vec3::zeros(), false);
        let mut g = Matrix3::zeros();
        g[(0, 0)] = 1.0;
        let x = Vec3::new(2.0, 0.0, 0.0);
        let r = op.apply(&x, &Vec3::zeros(), &g, 0.0);
        assert!((r - Vec3::x()).norm() < 1e-15);
    }
}
