use std::f64::consts::PI;

use nalgebra::Matrix3;
use proptest::prelude::*;
use tposeen::exterior::BoundaryDataModes;
use tposeen::field::{FlowParams, RealSample, ZeroField};
use tposeen::fixedpoint::{
    exterior_picard, nonlinear_term, nonlinear_weighted_bound, xk_norm, ExteriorPicardConfig, SampleSet,
};
use tposeen::geometry::{BodyGeometry, SphereQuadrature, Vec3};
use tposeen::harness::{DataSpec, ManufacturedFlow};
use tposeen::kernels::{CVec3, NewtonianPotentialGrid};

fn zeta() -> Vec3 {
    Vec3::new(0.5, 0.0, 0.0)
}

fn params(kmax: usize) -> FlowParams {
    FlowParams::new(zeta(), 2.0 * PI, kmax, NewtonianPotentialGrid::default()).unwrap()
}

fn sample(v: [f64; 3], g: [f64; 9]) -> RealSample {
    RealSample {
        u: Vec3::from(v),
        grad: Matrix3::from_row_slice(&g),
        p: 0.0,
    }
}

fn arr3() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-2.0f64..2.0)
}

fn arr9() -> impl Strategy<Value = [f64; 9]> {
    prop::array::uniform9(-2.0f64..2.0)
}

proptest! {
    #[test]
    fn nonlinear_term_is_bilinear(u1 in arr3(), g1 in arr9(), u2 in arr3(), g2 in arr9(), g3 in arr9(), a in -3.0f64..3.0) {
        let v1 = sample(u1, g1);
        let v2 = sample(u2, g2);
        let v3 = sample(u2, g3);
        let lhs = nonlinear_term(&v1, &RealSample { u: v2.u + v3.u * a, grad: v2.grad + v3.grad * a, p: 0.0 });
        let rhs = nonlinear_term(&v1, &v2) + nonlinear_term(&v1, &v3) * a;
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        let lhs = nonlinear_term(&RealSample { u: v1.u * a + v2.u, grad: v1.grad, p: 0.0 }, &v3);
        let rhs = nonlinear_term(&v1, &v3) * a + nonlinear_term(&v2, &v3);
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }
}

#[test]
fn zero_field_has_zero_norms() {
    let r = xk_norm(&ZeroField { kmax: 2, period: 1.0 }, &zeta(), 1, 0.5, &SampleSet::standard(&zeta())).unwrap();
    assert_eq!(r.total(), 0.0);
    assert_eq!(r.steady_pressure, 0.0);
}

#[test]
fn weighted_norm_settles_under_time_refinement() {
    let flow = ManufacturedFlow::new(&params(2), &BodyGeometry::default(), DataSpec::OscillatingFlux, 1.0);
    let radii = vec![2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0];
    let coarse = xk_norm(&flow, &zeta(), 0, 1.0, &SampleSet::new(radii.clone(), &zeta(), 16)).unwrap();
    let fine = xk_norm(&flow, &zeta(), 0, 1.0, &SampleSet::new(radii, &zeta(), 64)).unwrap();
    assert!(coarse.total() > 0.0);
    assert!((fine.total() / coarse.total() - 1.0).abs() < 0.05, "{coarse:?} {fine:?}");
}

#[test]
fn nonlinear_bound_constant_is_scale_free() {
    let p = params(1);
    let body = BodyGeometry::default();
    let v1 = ManufacturedFlow::new(&p, &body, DataSpec::Manufactured, 1.0);
    let v2 = ManufacturedFlow::new(&p, &body, DataSpec::OscillatingFlux, 1.0);
    let v2s = ManufacturedFlow::new(&p, &body, DataSpec::OscillatingFlux, 3.0);
    let set = SampleSet::standard(&zeta());
    let a = nonlinear_weighted_bound(&v1, &v2, &zeta(), 1, 0.5, &set).unwrap();
    let b = nonlinear_weighted_bound(&v1, &v2s, &zeta(), 1, 0.5, &set).unwrap();
    assert!(a.constant.is_finite() && a.constant > 0.0);
    assert!((a.constant - b.constant).abs() <= 1e-10 * a.constant);
    assert!(((b.steady + b.perp) / (a.steady + a.perp) - 3.0).abs() < 1e-10);
}

#[test]
fn exterior_picard_with_zero_data_stops_at_once() {
    let p = params(1);
    let data = BoundaryDataModes::from_fn(&BodyGeometry::default(), &SphereQuadrature::new(16, zeta()), p.period, 1, |_, _| {
        CVec3::zeros()
    });
    let (_, rep) = exterior_picard(&data, &p, None, &ExteriorPicardConfig::default(), 1.0).unwrap();
    assert_eq!(rep.iterations, 1);
    assert!(rep.converged);
    assert_eq!(rep.final_norm.total(), 0.0);
}

#[test]
fn exterior_picard_contracts_for_small_data() {
    let p = params(1);
    let body = BodyGeometry::default();
    let flow = ManufacturedFlow::new(&p, &body, DataSpec::Manufactured, 1e-3);
    let data = BoundaryDataModes::from_field(&flow, &body, &SphereQuadrature::new(20, zeta())).unwrap();
    let (_, rep) = exterior_picard(&data, &p, None, &ExteriorPicardConfig::default(), 1.0).unwrap();
    assert!(rep.converged);
    assert!(!rep.ratios.is_empty());
    assert!(rep.ratios.iter().all(|r| *r < 0.2), "{:?}", rep.ratios);
    assert!(rep.within_target);
}
