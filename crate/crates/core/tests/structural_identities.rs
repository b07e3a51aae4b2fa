mod common;

use std::f64::consts::PI;

use common::CollarCurl;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use tposeen::field::{FlowParams, ModalField};
use tposeen::geometry::{BodyGeometry, SphereQuadrature, Vec3};
use tposeen::harness::{DataSpec, ManufacturedFlow};
use tposeen::kernels::NewtonianPotentialGrid;
use tposeen::truncated::forms::{
    dirichlet_form, form_a, form_b, form_c, hardy_ratio, inner_r_zeta, sample_field, DomainQuadrature,
};

fn zeta() -> Vec3 {
    Vec3::new(0.5, 0.0, 0.0)
}

fn quadrature(radius: f64) -> DomainQuadrature {
    let s = SphereQuadrature::new(8, zeta());
    DomainQuadrature::new(&[1.0, radius], 8, 1.5, &s, &s).unwrap()
}

#[test]
fn collar_curl_field_is_solenoidal_and_vanishes_on_the_body() {
    let v = CollarCurl::random(3, 2, 1.0, 2.0 * PI);
    for x in [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.6, 0.8)] {
        for k in 0..=2 {
            assert!(v.mode(k, &x).unwrap().u.norm() < 1e-14);
        }
    }
    let x = Vec3::new(1.3, -0.4, 2.1);
    for k in 0..=2 {
        let m = v.mode(k, &x).unwrap();
        assert!(m.grad.trace().norm() < 1e-12);
        let h = 1e-5;
        for j in 0..3 {
            let d = (v.mode(k, &(x + common::e(j) * h)).unwrap().u - v.mode(k, &(x - common::e(j) * h)).unwrap().u) / C64::new(2.0 * h, 0.0);
            for i in 0..3 {
                assert!((d[i] - m.grad[(j, i)]).norm() < 1e-8);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn skew_and_norm_identities(seed in any::<u64>()) {
        let q = quadrature(4.0);
        let period = 2.0 * PI;
        let u = sample_field(&CollarCurl::random(seed, 2, 1.0, period), &q).unwrap();
        let v = sample_field(&CollarCurl::random(seed ^ 0x9e37, 2, 1.0, period), &q).unwrap();
        let z = zeta();
        let avv = form_a(&v, &v, &z, &q);
        let nvv = inner_r_zeta(&v, &v, &z, &q);
        prop_assert!((avv - nvv).abs() <= 1e-10 * nvv, "a(v,v) {avv} vs norm² {nvv}");
        // Each of the two integrals in c(u, v, v) is of size ‖u‖‖v‖²; they cancel.
        let scale = inner_r_zeta(&u, &u, &z, &q).sqrt() * dirichlet_form(&v, &v, &q);
        let c = form_c(&u, &v, &v, &q);
        prop_assert!(c.abs() <= 1e-10 * scale, "c(u,v,v) = {c}, scale {scale}");
        let cross = form_c(&u, &v, &u, &q);
        prop_assert!(cross.abs() > 1e-6 * scale, "c(u,v,u) = {cross} should not cancel");
        let b = form_b(&v, &u, &q);
        prop_assert!(b.abs() <= 1e-10 * scale, "b(v,p) = {b}");
    }
}

#[test]
fn hardy_ratio_is_stable_across_radii() {
    let params = FlowParams::new(zeta(), 2.0 * PI, 1, NewtonianPotentialGrid::default()).unwrap();
    let flow = ManufacturedFlow::new(&params, &BodyGeometry::default(), DataSpec::Manufactured, 1.0);
    let ratios: Vec<f64> = [4.0, 8.0, 16.0]
        .iter()
        .map(|&r| {
            let q = quadrature(r);
            hardy_ratio(&sample_field(&flow, &q).unwrap(), &zeta(), &q)
        })
        .collect();
    let c = ratios.iter().sum::<f64>() / ratios.len() as f64;
    for r in &ratios {
        assert!((r / c - 1.0).abs() <= 0.2, "{ratios:?}");
    }
}
