//! Sphere and annulus quadrature, the spherical body, and source placement.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    (
        x.iter().map(|t| c + h * t).collect(),
        w.iter().map(|t| h * t).collect(),
    )
}

/// Orthonormal frame whose third vector is `axis` (e_z for a zero axis).
pub fn frame_about(axis: &Vec3) -> [Vec3; 3] {
    let e3 = if axis.norm() > 0.0 { axis.normalize() } else { Vec3::z() };
    let helper = if e3.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = (helper - e3 * helper.dot(&e3)).normalize();
    let e2 = e3.cross(&e1);
    [e1, e2, e3]
}

/// Product rule on the unit sphere: Gauss–Legendre in cos θ times the
/// trapezoid rule in azimuth. With `order` polar nodes it integrates
/// spherical harmonics of degree below 2·order exactly.
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub order: usize,
    pub axis: Vec3,
}

pub fn make_sphere_quadrature(order: usize) -> SphereQuadrature {
    SphereQuadrature::new(order, Vec3::z())
}

impl SphereQuadrature {
    /// Polar axis along `axis`; aligning it with ζ clusters nodes near the wake.
    pub fn new(order: usize, axis: Vec3) -> Self {
        assert!(order >= 2, "sphere quadrature order must be at least 2");
        let (c, wc) = gauss_legendre(order);
        let nphi = 2 * order;
        let [e1, e2, e3] = frame_about(&axis);
        let mut nodes = Vec::with_capacity(order * nphi);
        let mut weights = Vec::with_capacity(order * nphi);
        let dphi = 2.0 * PI / nphi as f64;
        for (ci, wi) in c.iter().zip(&wc) {
            let st = (1.0 - ci * ci).max(0.0).sqrt();
            for j in 0..nphi {
                let phi = (j as f64 + 0.5) * dphi;
                nodes.push(e1 * (st * phi.cos()) + e2 * (st * phi.sin()) + e3 * *ci);
                weights.push(wi * dphi);
            }
        }
        SphereQuadrature {
            nodes,
            weights,
            order,
            axis: e3,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Points and area weights on the sphere of radius `r`.
    pub fn scaled(&self, r: f64) -> (Vec<Vec3>, Vec<f64>) {
        (
            self.nodes.iter().map(|n| n * r).collect(),
            self.weights.iter().map(|w| w * r * r).collect(),
        )
    }
}

/// ∫_{∂B_R} f dS.
pub fn surface_integral<T, F>(q: &SphereQuadrature, r: f64, f: F) -> T
where
    T: Zero + std::ops::Mul<f64, Output = T>,
    F: Fn(&Vec3) -> T,
{
    let mut acc = T::zero();
    for (n, w) in q.nodes.iter().zip(&q.weights) {
        acc = acc + f(&(n * r)) * (w * r * r);
    }
    acc
}

/// Volume rule on S ≤ |x| ≤ R: Gauss–Legendre on geometrically graded
/// radial panels times a sphere rule.
#[derive(Clone, Debug)]
pub struct AnnulusQuadrature {
    pub inner: f64,
    pub outer: f64,
    pub radii: Vec<f64>,
    pub radial_weights: Vec<f64>,
    pub sphere: SphereQuadrature,
}

impl AnnulusQuadrature {
    /// Panels grow geometrically with ratio at most `max_ratio`.
    pub fn graded(
        inner: f64,
        outer: f64,
        nodes_per_panel: usize,
        max_ratio: f64,
        sphere: SphereQuadrature,
    ) -> Result<Self> {
        if !(inner > 0.0 && outer > inner) {
            return Err(Error::Geometry(format!(
                "annulus needs 0 < S < R, got S={inner}, R={outer}"
            )));
        }
        let ratio = outer / inner;
        let panels = (ratio.ln() / max_ratio.max(1.0 + 1e-9).ln()).ceil().max(1.0) as usize;
        let breaks: Vec<f64> = (0..=panels)
            .map(|i| inner * ratio.powf(i as f64 / panels as f64))
            .collect();
        Ok(Self::with_breaks(&breaks, nodes_per_panel, sphere))
    }

    pub fn with_breaks(breaks: &[f64], nodes_per_panel: usize, sphere: SphereQuadrature) -> Self {
        let mut radii = Vec::new();
        let mut radial_weights = Vec::new();
        for pair in breaks.windows(2) {
            let (r, w) = gauss_legendre_on(nodes_per_panel, pair[0], pair[1]);
            for (ri, wi) in r.into_iter().zip(w) {
                radial_weights.push(wi * ri * ri);
                radii.push(ri);
            }
        }
        AnnulusQuadrature {
            inner: breaks[0],
            outer: *breaks.last().unwrap(),
            radii,
            radial_weights,
            sphere,
        }
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.sphere.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All nodes and volume weights, radial index outermost.
    pub fn points(&self) -> (Vec<Vec3>, Vec<f64>) {
        let mut pts = Vec::with_capacity(self.len());
        let mut wts = Vec::with_capacity(self.len());
        for (r, wr) in self.radii.iter().zip(&self.radial_weights) {
            for (n, wn) in self.sphere.nodes.iter().zip(&self.sphere.weights) {
                pts.push(n * *r);
                wts.push(wr * wn);
            }
        }
        (pts, wts)
    }

    pub fn total_weight(&self) -> f64 {
        let s: f64 = self.sphere.weights.iter().sum();
        self.radial_weights.iter().sum::<f64>() * s
    }
}

/// ∫_{S<|x|<R} f dx.
pub fn volume_integral<T, F>(q: &AnnulusQuadrature, f: F) -> T
where
    T: Zero + std::ops::Mul<f64, Output = T>,
    F: Fn(&Vec3) -> T,
{
    let mut acc = T::zero();
    for (r, wr) in q.radii.iter().zip(&q.radial_weights) {
        for (n, wn) in q.sphere.nodes.iter().zip(&q.sphere.weights) {
            acc = acc + f(&(n * *r)) * (wr * wn);
        }
    }
    acc
}

/// The spherical body centred at the origin.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct BodyGeometry {
    pub radius: f64,
    /// When true the normal on Σ points out of the fluid, into the body.
    pub normal_into_body: bool,
}

impl Default for BodyGeometry {
    fn default() -> Self {
        BodyGeometry {
            radius: 1.0,
            normal_into_body: true,
        }
    }
}

impl BodyGeometry {
    pub fn new(radius: f64) -> Self {
        BodyGeometry {
            radius,
            ..Default::default()
        }
    }

    /// Unit normal on Σ at the surface point `x`.
    pub fn normal(&self, x: &Vec3) -> Vec3 {
        let n = x.normalize();
        if self.normal_into_body {
            -n
        } else {
            n
        }
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        x.norm() < self.radius
    }
}

/// Spiral points on the sphere of radius `offset_factor·surface_radius`,
/// running pole to pole along `axis`. A single point sits on the axis.
pub fn place_sources(surface_radius: f64, count: usize, offset_factor: f64, axis: &Vec3) -> Vec<Vec3> {
    let rho = surface_radius * offset_factor;
    let [e1, e2, e3] = frame_about(axis);
    if count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![e3 * rho];
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * i as f64 / (count - 1) as f64;
            let st = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            let p = e1 * (st * phi.cos()) + e2 * (st * phi.sin()) + e3 * z;
            p.normalize() * rho
        })
        .collect()
}
