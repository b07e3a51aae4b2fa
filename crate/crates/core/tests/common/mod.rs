#![allow(dead_code)]

use num_complex::Complex64 as C64;
use tposeen::geometry::{gauss_legendre_on, Vec3};
use tposeen::exterior::{solve_exterior, BoundaryDataModes, ExteriorConfig};
use tposeen::field::{apply_jet, FlowParams, ModalField, ModeSample};
use tposeen::geometry::{BodyGeometry, SphereQuadrature};
use tposeen::kernels::NewtonianPotentialGrid;
use tposeen::kernels::{CMat3, CVec3};

pub fn e(i: usize) -> Vec3 {
    let mut v = Vec3::zeros();
    v[i] = 1.0;
    v
}

pub fn cnorm(m: &CMat3) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[allow(unused_imports)]
pub use tposeen::verify::{fd_directional, fd_divergence, fd_laplacian, resolvent_kernel_zero_zeta};

/// Newtonian potential of Φ_k by an axisymmetric Legendre expansion about
/// the ζ axis: N = Σ_l P_l(cos θ)/(2l+1) ∫ s² r_<^l/r_>^{l+1} f_l(s) ds.
pub fn newtonian_potential_multipole(x: &Vec3, zeta: &Vec3, omega: f64) -> C64 {
    let pi = std::f64::consts::PI;
    let zn = zeta.norm();
    let axis = zeta / zn;
    let a = 0.5 * zn;
    let mu = C64::new(a * a, omega).sqrt();
    let kappa = mu.re - a;
    let r = x.norm();
    let cx = axis.dot(x) / r;
    let lmax = 70;
    let (cn, cw) = gauss_legendre_on(140, -1.0, 1.0);
    let legendre = |c: f64| {
        let mut p = vec![0.0; lmax + 1];
        p[0] = 1.0;
        p[1] = c;
        for l in 2..=lmax {
            p[l] = ((2 * l - 1) as f64 * c * p[l - 1] - (l - 1) as f64 * p[l - 2]) / l as f64;
        }
        p
    };
    let pc: Vec<Vec<f64>> = cn.iter().map(|c| legendre(*c)).collect();
    let px = legendre(cx);
    let s_max = r + 90.0 / kappa;
    let mut panels = Vec::new();
    let inner = 8;
    for i in 0..inner {
        panels.push((r * i as f64 / inner as f64, r * (i + 1) as f64 / inner as f64));
    }
    let mut s0 = r;
    while s0 < s_max {
        let s1 = (s0 + 1.0).min(s_max);
        panels.push((s0, s1));
        s0 = s1;
    }
    let mut total = C64::new(0.0, 0.0);
    for (lo, hi) in panels {
        let (sn, sw) = gauss_legendre_on(24, lo, hi);
        for (s, w) in sn.iter().zip(&sw) {
            let mut fl = vec![C64::new(0.0, 0.0); lmax + 1];
            for (j, c) in cn.iter().enumerate() {
                let phi = (C64::new(-a * s * c, 0.0) - mu * *s).exp() / (4.0 * pi * s);
                for l in 0..=lmax {
                    fl[l] += phi * (cw[j] * pc[j][l]);
                }
            }
            for l in 0..=lmax {
                let lf = l as f64;
                let radial = if *s < r {
                    (s / r).powi(l as i32) / r
                } else {
                    (r / s).powi(l as i32) / s
                };
                total += fl[l] * ((2.0 * lf + 1.0) / 2.0 * w * s * s * radial * px[l] / (2.0 * lf + 1.0));
            }
        }
    }
    total
}

/// v = curl((|x| − r_b)² w) with w_k(x) = A_k x + b_k per time mode:
/// solenoidal, zero on |x| = r_b, with closed-form gradient.
pub struct CollarCurl {
    pub rb: f64,
    pub period: f64,
    pub a: Vec<[[C64; 3]; 3]>,
    pub b: Vec<CVec3>,
    /// Pressure mode amplitude, p_k = q_k x₁.
    pub q: Vec<C64>,
}

impl CollarCurl {
    pub fn random(seed: u64, kmax: usize, rb: f64, period: f64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |real: bool| {
            let re = rng.gen_range(-1.0..1.0);
            let im = if real { 0.0 } else { rng.gen_range(-1.0..1.0) };
            C64::new(re, im)
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut q = Vec::new();
        for k in 0..=kmax {
            let real = k == 0;
            let mut m = [[C64::new(0.0, 0.0); 3]; 3];
            for row in m.iter_mut() {
                for z in row.iter_mut() {
                    *z = draw(real);
                }
            }
            a.push(m);
            b.push(CVec3::new(draw(real), draw(real), draw(real)));
            q.push(draw(real));
        }
        CollarCurl { rb, period, a, b, q }
    }
}

impl ModalField for CollarCurl {
    fn kmax(&self) -> usize {
        self.a.len() - 1
    }
    fn period(&self) -> f64 {
        self.period
    }
    fn mode(&self, k: usize, x: &Vec3) -> tposeen::Result<ModeSample> {
        let a = &self.a[k];
        let c = |v: f64| C64::new(v, 0.0);
        let r = x.norm();
        let g = (x * (1.0 - self.rb / r)).map(c);
        let xc = x.map(c);
        let w = CVec3::from_fn(|i, _| (0..3).map(|j| a[i][j] * xc[j]).sum::<C64>()) + self.b[k];
        let curl = CVec3::new(a[2][1] - a[1][2], a[0][2] - a[2][0], a[1][0] - a[0][1]);
        let phi = (r - self.rb).powi(2);
        let u = g.cross(&w) * c(2.0) + curl * c(phi);
        let mut grad = CMat3::zeros();
        for m in 0..3 {
            let dg = (e(m) * (1.0 - self.rb / r) + x * (self.rb * x[m] / (r * r * r))).map(c);
            let am = CVec3::new(a[0][m], a[1][m], a[2][m]);
            let d = (dg.cross(&w) + g.cross(&am)) * c(2.0) + curl * (g[m] * 2.0);
            for i in 0..3 {
                grad[(m, i)] = d[i];
            }
        }
        Ok(ModeSample {
            u,
            grad,
            p: self.q[k] * x[0],
        })
    }
}

/// Relative far-field error of the exterior solve for data generated by a
/// point force inside the body, for each source count.
pub fn interior_force_errors(counts: &[usize]) -> Vec<f64> {
    let p = FlowParams::new(Vec3::new(0.5, 0.0, 0.0), 2.0 * std::f64::consts::PI, 1, NewtonianPotentialGrid::default()).unwrap();
    let ystar = Vec3::new(0.0, 0.0, 0.3);
    let a = [
        CVec3::new(C64::new(1.0, 0.0), C64::new(0.5, 0.0), C64::new(-0.3, 0.0)),
        CVec3::new(C64::new(0.2, 0.4), C64::new(0.0, 0.5), C64::new(-0.3, 0.1)),
    ];
    let truth = |k: usize, x: &Vec3| apply_jet(&p.kernel_jet(k, &(x - ystar)).unwrap(), &a[k]);
    let body = BodyGeometry::default();
    let quad = SphereQuadrature::new(20, p.zeta.normalize());
    let data = BoundaryDataModes::from_fn(&body, &quad, p.period, 1, |k, x| truth(k, x).u);
    let far = [Vec3::new(5.0, 0.0, 0.0), Vec3::new(-3.0, 4.0, 0.0), Vec3::new(0.0, 2.0, -4.5)];
    counts
        .iter()
        .map(|&n| {
            let sol = solve_exterior(&data, &p, &ExteriorConfig { sources: n, residual_tol: 1.0, ..Default::default() }, None).unwrap();
            let mut worst: f64 = 0.0;
            for x in &far {
                for k in 0..=1 {
                    let want = truth(k, x).u;
                    worst = worst.max((sol.mode(k, x).unwrap().u - want).norm() / want.norm());
                }
            }
            worst
        })
        .collect()
}
