mod common;

use std::f64::consts::PI;

use common::*;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use tposeen::geometry::Vec3;
use tposeen::kernels::*;

fn grid() -> NewtonianPotentialGrid {
    NewtonianPotentialGrid::default()
}

#[test]
fn zero_zeta_mode_kernel_matches_closed_form() {
    let g = grid();
    let dirs = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.3, -0.8, 0.52), Vec3::new(-0.2, 0.1, -1.0)];
    for k in [1, 3] {
        let m = ModeSpec::new(k, 2.0 * PI, Vec3::zeros());
        for r in [1.0, 3.0, 10.0] {
            for d in &dirs {
                let x = d.normalize() * r;
                let got = oseenlet_mode(&x, &m, &g).unwrap().velocity;
                let want = resolvent_kernel_zero_zeta(&x, m.omega());
                let rel = cnorm(&(got - want)) / cnorm(&want);
                assert!(rel < 1e-10, "k={k} r={r}: rel {rel:e}");
            }
        }
    }
}

#[test]
fn potential_matches_multipole_expansion() {
    let g = grid();
    let zeta = Vec3::new(0.5, 0.0, 0.0);
    for (k, period) in [(1, 2.0 * PI), (2, 2.0 * PI), (1, 20.0)] {
        let m = ModeSpec::new(k, period, zeta);
        for x in [Vec3::new(1.0, 0.5, 0.0), Vec3::new(-3.0, 0.2, 1.0), Vec3::new(4.0, -2.0, 3.0), Vec3::new(-8.0, 0.0, 1.0)] {
            let got = newtonian_potential_mode(&x, &m, &g).unwrap();
            let want = newtonian_potential_multipole(&x, &zeta, m.omega());
            let rel = (got - want).norm() / want.norm();
            assert!(rel < 1e-8, "k={k} T={period} x={x:?}: {got} vs {want} rel {rel:e}");
        }
    }
}

#[test]
fn velocity_is_phi_plus_hessian_of_potential() {
    let g = grid();
    let m = ModeSpec::new(1, 2.0 * PI, Vec3::new(0.5, 0.2, 0.0));
    for x in [Vec3::new(1.2, 0.3, -0.4), Vec3::new(-2.5, 1.0, 0.5), Vec3::new(0.0, 6.0, 2.0)] {
        let h = 5e-4 * x.norm();
        let n = |y: &Vec3| newtonian_potential_mode(y, &m, &g).unwrap();
        let phi = mode_scalar_kernel(&x, &m).unwrap();
        let vel = oseenlet_mode(&x, &m, &g).unwrap().velocity;
        let mut lap = C64::new(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                let hij = (n(&(x + (e(i) + e(j)) * h)) - n(&(x + (e(i) - e(j)) * h)) - n(&(x + (e(j) - e(i)) * h))
                    + n(&(x - (e(i) + e(j)) * h)))
                    / (4.0 * h * h);
                let want = if i == j { phi + hij } else { hij };
                assert!((vel[(i, j)] - want).norm() < 1e-6 * cnorm(&vel), "({i},{j}) at {x:?}");
                if i == j {
                    lap += hij;
                }
            }
        }
        // ΔN = −Φ
        assert!((lap + phi).norm() < 1e-5 * phi.norm().max(1e-3));
    }
}

#[test]
fn mode_jet_matches_differences() {
    let g = grid();
    let m = ModeSpec::new(2, 2.0 * PI, Vec3::new(0.4, -0.3, 0.1));
    for x in [Vec3::new(1.1, 0.2, 0.3), Vec3::new(-4.0, 1.0, -2.0), Vec3::new(12.0, -5.0, 3.0)] {
        let jet = oseenlet_mode_jet(&x, &m, &g).unwrap();
        let h = 1e-5 * x.norm();
        for k in 0..3 {
            let fp = oseenlet_mode(&(x + e(k) * h), &m, &g).unwrap().velocity;
            let fm = oseenlet_mode(&(x - e(k) * h), &m, &g).unwrap().velocity;
            let fd = (fp - fm) / C64::new(2.0 * h, 0.0);
            assert!(cnorm(&(fd - jet.grad[k])) < 1e-7 * cnorm(&jet.grad[k]), "k={k} x={x:?}");
        }
    }
}

#[test]
fn mode_kernel_solves_mode_equation() {
    let g = grid();
    let zeta = Vec3::new(0.5, 0.0, 0.0);
    for k in [1i64, 3] {
        let m = ModeSpec::new(k, 2.0 * PI, zeta);
        let f = |y: &Vec3| oseenlet_mode(y, &m, &g).unwrap().velocity;
        for x in [Vec3::new(1.5, 0.5, 0.0), Vec3::new(-2.0, 1.0, 1.0), Vec3::new(0.3, -3.0, 2.0)] {
            let h = 1e-3;
            let lap = fd_laplacian(&f, &x, h);
            let adv = fd_directional(&f, &x, &zeta, h);
            let gp = pressure_p_grad(&x).unwrap();
            let mut res = f(&x) * C64::new(0.0, m.omega()) - lap - adv;
            for i in 0..3 {
                for j in 0..3 {
                    res[(i, j)] += gp[(i, j)];
                }
            }
            let scale = cnorm(&lap).max(cnorm(&f(&x)));
            assert!(cnorm(&res) < 1e-3 * scale, "k={k} x={x:?} residual {:e}", cnorm(&res));
            let div = fd_divergence(&f, &x, 1e-4);
            assert!(div.iter().all(|d| d.norm() < 1e-4), "divergence {div:?}");
        }
    }
}

#[test]
fn scalar_kernel_solves_scalar_equation() {
    let m = ModeSpec::new(1, 2.0 * PI, Vec3::zeros());
    let f = |y: &Vec3| {
        let v = mode_scalar_kernel(y, &m).unwrap();
        CMat3::from_diagonal_element(v)
    };
    let x = Vec3::x();
    let lap = fd_laplacian(&f, &x, 1e-3);
    let res = f(&x) * C64::new(0.0, m.omega()) - lap;
    assert!(cnorm(&res) < 1e-4);
    let tiny = ModeSpec::new(1, 1e12, Vec3::zeros());
    let v = mode_scalar_kernel(&Vec3::new(0.0, 2.0, 0.0), &tiny).unwrap();
    assert!((v.re - laplace_e(&Vec3::new(0.0, 2.0, 0.0)).unwrap()).abs() < 1e-6);
}

#[test]
fn low_frequency_mode_tends_to_steady_oseenlet() {
    let g = grid();
    let zeta = Vec3::new(0.5, 0.0, 0.0);
    let x = Vec3::new(-1.0, 1.5, 0.5);
    let steady = oseenlet_steady(&x, &zeta).unwrap().velocity;
    let mut prev = f64::INFINITY;
    for period in [1e3, 1e4, 1e5] {
        let m = ModeSpec::new(1, period, zeta);
        let slow = oseenlet_mode(&x, &m, &g).unwrap().velocity;
        let rel = cnorm(&(slow - steady)) / cnorm(&steady);
        assert!(rel < prev);
        prev = rel;
    }
    assert!(prev < 1e-3, "ω→0 limit off by {prev:e}");
}

#[test]
fn steady_oseenlet_tends_to_stokeslet_linearly() {
    let x = Vec3::y();
    let st = stokeslet(&x).unwrap().velocity;
    let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|t| cnorm(&(oseenlet_steady(&x, &(Vec3::x() * *t)).unwrap().velocity - st)))
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 10.0).abs() < 0.5, "ratio {ratio}");
    }
}

#[test]
fn steady_oseenlet_residual_and_divergence() {
    let zeta = Vec3::new(1.0, 0.0, 0.0);
    let f = |y: &Vec3| oseenlet_steady(y, &zeta).unwrap().velocity;
    let div = fd_divergence(&f, &Vec3::new(0.0, 3.0, 0.0), 1e-4);
    assert!(div.iter().all(|d| d.norm() < 1e-6));
    for x in [Vec3::new(1.0, 0.2, 0.1), Vec3::new(-3.0, 0.5, 0.0), Vec3::new(0.5, 5.0, -2.0)] {
        let lap = fd_laplacian(&f, &x, 1e-3);
        let adv = fd_directional(&f, &x, &zeta, 1e-3);
        let gp = pressure_p_grad(&x).unwrap();
        let mut res = -lap - adv;
        for i in 0..3 {
            for j in 0..3 {
                res[(i, j)] += gp[(i, j)];
            }
        }
        assert!(cnorm(&res) < 1e-3, "residual {:e} at {x:?}", cnorm(&res));
    }
}

#[test]
fn steady_oseenlet_wake_slopes() {
    let zeta = Vec3::x();
    let radii: Vec<f64> = (0..6).map(|i| 10.0 * 10f64.powf(i as f64 / 5.0)).collect();
    let f = |x: &Vec3| frobenius(&oseenlet_steady(x, &zeta).unwrap().velocity);
    let wake = decay_slope(f, &-Vec3::x(), &radii).unwrap();
    let front = decay_slope(f, &Vec3::x(), &radii).unwrap();
    assert!((wake + 1.0).abs() < 0.1, "wake {wake}");
    assert!((front + 2.0).abs() < 0.1, "front {front}");
}

#[test]
fn stokeslet_slope_along_axis() {
    let s = decay_slope(|x| frobenius(&stokeslet(x).unwrap().velocity), &Vec3::z(), &[1.0, 2.0, 4.0, 8.0]).unwrap();
    assert!((s + 1.0).abs() < 1e-10);
    let e = decay_slope(|x| laplace_e(x).unwrap(), &Vec3::x(), &[1.0, 2.0, 4.0, 8.0]).unwrap();
    assert!((e + 1.0).abs() < 1e-12);
}

#[test]
fn gamma_perp_is_mean_free_and_decays() {
    let g = grid();
    let m = ModeSpec::new(1, 2.0 * PI, Vec3::new(0.5, 0.0, 0.0));
    let x = Vec3::new(0.3, 2.0, -0.5);
    let mut mean = nalgebra::Matrix3::<f64>::zeros();
    for i in 0..64 {
        mean += gamma_perp(2.0 * PI * i as f64 / 64.0, &x, &m, 4, &g).unwrap() / 64.0;
    }
    assert!(mean.norm() < 1e-10);
    let sup = |x: &Vec3| {
        (0..32)
            .map(|i| gamma_perp(2.0 * PI * i as f64 / 32.0, x, &m, 8, &g).unwrap().norm())
            .fold(0.0, f64::max)
    };
    let radii = [2.0, 3.0, 5.0, 8.0, 12.0, 20.0];
    let slope = decay_slope(sup, &Vec3::y(), &radii).unwrap();
    assert!((slope + 3.0).abs() < 0.3, "slope {slope}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernels_are_solenoidal(
        theta in 0.0..PI, phi in 0.0..(2.0 * PI), r in 0.5f64..20.0,
        zx in 0.05f64..1.0, k in 1i64..4,
    ) {
        let x = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()) * r;
        let zeta = Vec3::new(zx, 0.0, 0.0);
        let st = |y: &Vec3| stokeslet(y).unwrap().velocity;
        let os = |y: &Vec3| oseenlet_steady(y, &zeta).unwrap().velocity;
        for d in fd_divergence(&st, &x, 1e-4).iter().chain(fd_divergence(&os, &x, 1e-4).iter()) {
            prop_assert!(d.norm() < 1e-6);
        }
        let g = grid();
        let m = ModeSpec::new(k, 2.0 * PI, zeta);
        let md = |y: &Vec3| oseenlet_mode(y, &m, &g).unwrap().velocity;
        for d in fd_divergence(&md, &x, 1e-4) {
            prop_assert!(d.norm() < 1e-4);
        }
    }

    #[test]
    fn stokeslet_is_even(x in -5.0f64..5.0, y in -5.0f64..5.0, z in 0.1f64..5.0) {
        let p = Vec3::new(x, y, z);
        let a = stokeslet(&p).unwrap().velocity;
        let b = stokeslet(&-p).unwrap().velocity;
        prop_assert!(cnorm(&(a - b)) < 1e-15);
    }

    #[test]
    fn scalar_kernel_bounded_by_laplace_upstream(x in 0.0f64..5.0, y in -5.0f64..5.0, z in -5.0f64..5.0, k in 1i64..5) {
        let p = Vec3::new(x + 0.1, y, z);
        let m = ModeSpec::new(k, 2.0 * PI, Vec3::new(0.5, 0.0, 0.0));
        prop_assert!(mode_scalar_kernel(&p, &m).unwrap().norm() <= laplace_e(&p).unwrap());
    }

    #[test]
    fn pressure_is_minus_gradient_of_e(x in -5.0f64..5.0, y in -5.0f64..5.0, z in 0.5f64..5.0) {
        let p = Vec3::new(x, y, z);
        let h = 1e-5;
        let p_fd = Vec3::from_fn(|i, _| -(laplace_e(&(p + e(i) * h)).unwrap() - laplace_e(&(p - e(i) * h)).unwrap()) / (2.0 * h));
        prop_assert!((p_fd - pressure_p(&p).unwrap()).norm() < 1e-6);
    }
}
