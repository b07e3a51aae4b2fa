mod common;

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use tposeen::exterior::BoundaryDataModes;
use tposeen::field::{flux_carrier_mode, FlowParams, ModalField};
use tposeen::geometry::{BodyGeometry, SphereQuadrature, Vec3};
use tposeen::harness::{DataSpec, ManufacturedFlow};
use tposeen::kernels::{loglog_fit, CMat3, CVec3, NewtonianPotentialGrid};
use tposeen::truncated::extension::flux_extension;
use tposeen::truncated::{
    abc_residual, picard_solve, solve_truncated_linear, AbcOperator, TruncatedDiscretization, TruncatedProblem,
};

fn params(zeta: Vec3, kmax: usize) -> FlowParams {
    FlowParams::new(zeta, 2.0 * PI, kmax, NewtonianPotentialGrid::default()).unwrap()
}

fn zeta() -> Vec3 {
    Vec3::new(0.5, 0.0, 0.0)
}

fn small_disc() -> TruncatedDiscretization {
    TruncatedDiscretization {
        inner_sources: 64,
        outer_sources: 144,
        outer_order: 12,
        outer_order_growth: 0.0,
        residual_tol: 1.0,
        ..Default::default()
    }
}

fn manufactured_data(p: &FlowParams, spec: DataSpec, amplitude: f64, order: usize) -> (ManufacturedFlow, BoundaryDataModes) {
    let body = BodyGeometry::default();
    let flow = ManufacturedFlow::new(p, &body, spec, amplitude);
    let data = BoundaryDataModes::from_field(&flow, &body, &SphereQuadrature::new(order, p.zeta)).unwrap();
    (flow, data)
}

fn field_divergence(f: &dyn ModalField, x: &Vec3, t: f64) -> f64 {
    let h = 1e-4;
    (0..3)
        .map(|i| {
            let e = common::e(i) * h;
            (f.sample(t, &(x + e)).unwrap().u[i] - f.sample(t, &(x - e)).unwrap().u[i]) / (2.0 * h)
        })
        .sum::<f64>()
}

#[test]
fn solver_satisfies_its_own_boundary_conditions() {
    let p = params(zeta(), 0);
    let (_, data) = manufactured_data(&p, DataSpec::Manufactured, 1.0, 16);
    let disc = TruncatedDiscretization {
        inner_sources: 256,
        outer_sources: 576,
        outer_offset: 1.8,
        outer_order: 24,
        residual_tol: 1.0,
        ..Default::default()
    };
    let sol = solve_truncated_linear(&TruncatedProblem::new(p, 8.0, data, disc).unwrap()).unwrap();
    assert!(sol.max_sigma_residual() <= 1e-6, "{:?}", sol.reports);
    assert!(sol.max_abc_residual() <= 1e-6, "{:?}", sol.reports);
}

#[test]
fn zero_data_gives_zero_solution() {
    let p = params(zeta(), 1);
    let data = BoundaryDataModes::from_fn(&BodyGeometry::default(), &SphereQuadrature::new(12, zeta()), p.period, 1, |_, _| {
        CVec3::zeros()
    });
    let sol = solve_truncated_linear(&TruncatedProblem::new(p, 4.0, data, small_disc()).unwrap()).unwrap();
    let x = Vec3::new(2.0, -1.0, 0.5);
    for k in 0..=1 {
        assert_eq!(sol.mode(k, &x).unwrap().u.norm(), 0.0);
    }
}

#[test]
fn steady_stokes_data_leaves_the_oscillating_modes_empty() {
    let p = params(Vec3::zeros(), 2);
    let data = BoundaryDataModes::from_fn(&BodyGeometry::default(), &SphereQuadrature::new(12, Vec3::z()), p.period, 2, |k, x| {
        if k == 0 {
            CVec3::new(C64::new(1.0 + x[2], 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0))
        } else {
            CVec3::zeros()
        }
    });
    let sol = solve_truncated_linear(&TruncatedProblem::new(p, 4.0, data, small_disc()).unwrap()).unwrap();
    let x = Vec3::new(2.0, 1.0, -0.5);
    assert!(sol.mode(0, &x).unwrap().u.norm() > 1e-2);
    for k in 1..=2 {
        assert_eq!(sol.mode(k, &x).unwrap().u.norm(), 0.0);
    }
}

#[test]
fn truncation_radius_must_exceed_the_body() {
    let p = params(zeta(), 0);
    let data = BoundaryDataModes::from_fn(&BodyGeometry::default(), &SphereQuadrature::new(8, zeta()), p.period, 0, |_, _| {
        CVec3::zeros()
    });
    assert!(TruncatedProblem::new(p, 0.9, data, small_disc()).is_err());
}

/// The ABC is consistent, not exact: the exterior flow leaves a residual
/// on ∂B_R that shrinks as R grows.
#[test]
fn exterior_flow_abc_residual_decays() {
    let p = params(zeta(), 1);
    let (flow, _) = manufactured_data(&p, DataSpec::Manufactured, 1.0, 8);
    let sphere = SphereQuadrature::new(10, zeta());
    let radii = [4.0, 8.0, 16.0, 32.0];
    let sups: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let op = AbcOperator::new(r, zeta(), false);
            let mut worst: f64 = 0.0;
            for n in &sphere.nodes {
                for t in [0.0, 1.5, 3.0, 4.5] {
                    worst = worst.max(abc_residual(&op, &flow, &(n * r), t).unwrap().norm());
                }
            }
            worst
        })
        .collect();
    let (slope, _, _) = loglog_fit(&radii, &sups).unwrap();
    assert!(slope < 0.0, "slope {slope}, {sups:?}");
}

#[test]
fn constant_flux_data_extends_by_the_carrier_alone() {
    let p = params(zeta(), 0);
    let q = C64::new(0.7, 0.0);
    let data = BoundaryDataModes::from_fn(&BodyGeometry::default(), &SphereQuadrature::new(12, zeta()), p.period, 0, |_, x| {
        flux_carrier_mode(q, 0.0, &Vec3::zeros(), x).u
    });
    let ext = flux_extension(&data, 64, 0.4).unwrap();
    assert!((ext.flux[0] - q).norm() < 1e-13);
    assert!(ext.strengths[0].iter().all(|s| s.norm() < 1e-10));
    let x = Vec3::new(1.2, 0.3, -0.4);
    let want = flux_carrier_mode(q, 0.0, &Vec3::zeros(), &x).u;
    assert!((ext.mode(0, &x).unwrap().u - want).norm() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn extension_is_solenoidal_and_carrier_only_beyond_the_collar(seed in any::<u64>()) {
        let field = common::CollarCurl::random(seed, 1, 0.0, 2.0 * PI);
        let mut shift = [CVec3::zeros(); 2];
        shift[0] = CVec3::new(C64::new(0.3, 0.0), C64::new(-0.1, 0.0), C64::new(0.2, 0.0));
        let data = BoundaryDataModes::from_fn(&BodyGeometry::default(), &SphereQuadrature::new(12, zeta()), 2.0 * PI, 1, |k, x| {
            field.mode(k, x).unwrap().u + shift[k]
        });
        let ext = flux_extension(&data, 64, 0.4).unwrap();
        let div = |x: &Vec3, k: usize| {
            let h = 1e-5;
            (0..3)
                .map(|i| {
                    let e = common::e(i) * h;
                    (ext.mode(k, &(x + e)).unwrap().u[i] - ext.mode(k, &(x - e)).unwrap().u[i]) / C64::new(2.0 * h, 0.0)
                })
                .sum::<C64>()
        };
        let dirs = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.3, -0.8, 0.5), Vec3::new(-0.6, 0.2, -0.7)];
        for d in &dirs {
            let d = d.normalize();
            for r in [1.05, 1.3, 1.6, 1.9] {
                for k in 0..=1 {
                    prop_assert!(div(&(d * r), k).norm() <= 1e-6, "div at r = {r}");
                }
            }
            let x = d * 2.5;
            for k in 0..=1 {
                let carrier = flux_carrier_mode(ext.flux[k], 0.0, &Vec3::zeros(), &x);
                let m = ext.mode(k, &x).unwrap();
                prop_assert!((m.u - carrier.u).norm() < 1e-14);
                let g: CMat3 = m.grad - carrier.grad;
                prop_assert!(g.iter().all(|z| z.norm() < 1e-14));
            }
        }
    }
}

#[test]
fn picard_with_zero_data_stops_after_one_iteration() {
    let p = params(zeta(), 1);
    let data = BoundaryDataModes::from_fn(&BodyGeometry::default(), &SphereQuadrature::new(12, zeta()), p.period, 1, |_, _| {
        CVec3::zeros()
    });
    let sol = picard_solve(&TruncatedProblem::new(p, 4.0, data, small_disc()).unwrap(), 10, 1e-10).unwrap();
    let rep = sol.picard.as_ref().unwrap();
    assert_eq!(rep.iterations, 1);
    assert!(rep.converged);
    assert_eq!(sol.sample(0.3, &Vec3::new(2.0, 0.0, 1.0)).unwrap().u.norm(), 0.0);
}

#[test]
fn picard_iterates_are_solenoidal() {
    let p = params(zeta(), 1);
    let (_, data) = manufactured_data(&p, DataSpec::OscillatingFlux, 0.05, 12);
    let problem = TruncatedProblem::new(p, 4.0, data, small_disc()).unwrap();
    // A loose tolerance stops after the first iterate, a tight one at the last.
    let first = picard_solve(&problem, 1, f64::INFINITY).unwrap();
    let last = picard_solve(&problem, 30, 1e-10).unwrap();
    assert!(last.picard.as_ref().unwrap().iterations > 2);
    let pts = [Vec3::new(1.5, 0.2, 0.0), Vec3::new(-0.5, 2.5, 1.0), Vec3::new(0.0, -1.0, 3.2)];
    for sol in [&first, &last] {
        let scale = sol.sample(0.0, &pts[0]).unwrap().grad.norm();
        for x in &pts {
            for t in [0.0, 2.0, 4.0] {
                let d = field_divergence(sol, x, t);
                assert!(d.abs() <= 1e-6 * scale.max(1.0), "div {d} at {x:?}");
            }
        }
    }
}
