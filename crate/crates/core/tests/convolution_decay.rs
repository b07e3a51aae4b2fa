use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use tposeen::convolution::{conv_boundary, ConvKernel};
use tposeen::field::FlowParams;
use tposeen::geometry::{BodyGeometry, SphereQuadrature, Vec3};
use tposeen::kernels::{loglog_fit, CVec3, NewtonianPotentialGrid};

fn slope(kernel: ConvKernel, density: impl Fn(usize, &Vec3) -> CVec3 + Copy) -> f64 {
    let p = FlowParams::new(Vec3::new(0.5, 0.0, 0.0), 2.0 * PI, 0, NewtonianPotentialGrid::default()).unwrap();
    let body = BodyGeometry::default();
    let quad = SphereQuadrature::new(16, Vec3::z());
    let dir = Vec3::new(0.6, 0.48, 0.64).normalize();
    let radii = [10.0, 20.0, 40.0, 80.0];
    let vals: Vec<f64> = radii
        .iter()
        .map(|r| conv_boundary(&p, kernel, &body, &quad, density, &(dir * *r), 0.0).unwrap().norm())
        .collect();
    loglog_fit(&radii, &vals).unwrap().0
}

fn constant(_: usize, _: &Vec3) -> CVec3 {
    CVec3::new(C64::new(1.0, 0.0), C64::new(-0.5, 0.0), C64::new(0.25, 0.0))
}

fn mean_free(_: usize, y: &Vec3) -> CVec3 {
    CVec3::new(C64::new(y[0] + 0.3 * y[2], 0.0), C64::new(-0.5 * y[0], 0.0), C64::new(0.25 * y[1], 0.0))
}

#[test]
fn mean_free_density_gains_one_order_for_the_laplace_kernel() {
    let a = slope(ConvKernel::Laplace, constant);
    let b = slope(ConvKernel::Laplace, mean_free);
    assert!((a + 1.0).abs() <= 0.15, "{a}");
    assert!((b + 2.0).abs() <= 0.15, "{b}");
}

#[test]
fn mean_free_density_gains_one_order_for_the_pressure_kernel() {
    let a = slope(ConvKernel::Pressure, constant);
    let b = slope(ConvKernel::Pressure, mean_free);
    assert!((a + 2.0).abs() <= 0.15, "{a}");
    assert!((b + 3.0).abs() <= 0.15, "{b}");
}

#[test]
fn points_on_or_inside_the_body_are_rejected() {
    let p = FlowParams::new(Vec3::x(), 1.0, 0, NewtonianPotentialGrid::default()).unwrap();
    let r = conv_boundary(&p, ConvKernel::Laplace, &BodyGeometry::default(), &SphereQuadrature::new(4, Vec3::z()), constant, &Vec3::new(0.5, 0.0, 0.0), 0.0);
    assert!(r.is_err());
}
