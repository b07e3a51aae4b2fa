//! Energy balance for ϑ = v − h̃, integrated over one period:
//!
//!   ∫‖ϑ‖²_{(R,|ζ|)} ≤ −∫∇h̃:∇ϑ + ∫(ζ·∇h̃)·ϑ − ∫_{∂B_R}(1+s_ζ)/R h̃·ϑ
//!                    + ∫(f − ∂_t h̃ − v·∇h̃)·ϑ + ½∫_{∂B_R}(x/R·v)(h̃·ϑ).
//!
//! A smooth solution satisfies it with equality, so the slack measures
//! both the inequality and the quality of the discrete solution. For the
//! linear problem the two convective terms are absent.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::forms::{
    boundary_l2, dirichlet_form, inner_r_zeta, product_time_grid, volume_convect, volume_l2, DomainQuadrature,
    SampledField,
};
use crate::exterior::real_from_modes;
use crate::field::{synthesize, ModeSample};
use crate::geometry::Vec3;
use crate::kernels::s_wake;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

/// Best constant of ‖u‖_{L⁶} ≤ C_S ‖∇u‖_{L²} in three dimensions,
/// (3 (π/2)^{4/3})^{−1/2}.
pub fn sobolev_constant() -> f64 {
    (3.0 * (PI / 2.0).powf(4.0 / 3.0)).powf(-0.5)
}

/// ‖σ‖_{L³(Ω_R)} for σ = −x/(4π|x|³) on r_b < |x| < R.
pub fn sigma_l3(body_radius: f64, radius: f64) -> f64 {
    let c = 1.0 / (16.0 * PI * PI);
    (c * (1.0 / (3.0 * body_radius.powi(3)) - 1.0 / (3.0 * radius.powi(3)))).cbrt()
}

/// The flux smallness condition 2‖Φ‖_∞ (C_S ‖σ‖_{L³} + 1/(8πR)) < 1.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluxSmallness {
    pub flux_sup: f64,
    pub sigma_l3: f64,
    pub sobolev_constant: f64,
    pub value: f64,
    pub holds: bool,
}

pub fn flux_smallness(flux_modes: &[C64], period: f64, body_radius: f64, radius: f64) -> FluxSmallness {
    let n = 64 * flux_modes.len().max(1);
    let flux_sup = (0..n)
        .map(|j| real_from_modes(flux_modes, period, period * j as f64 / n as f64).abs())
        .fold(0.0, f64::max);
    let s = sigma_l3(body_radius, radius);
    let cs = sobolev_constant();
    let value = 2.0 * flux_sup * (cs * s + 1.0 / (8.0 * PI * radius));
    FluxSmallness {
        flux_sup,
        sigma_l3: s,
        sobolev_constant: cs,
        value,
        holds: value < 1.0,
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EnergyTerms {
    /// −∫∇h̃:∇ϑ
    pub dissipation: f64,
    /// ∫(ζ·∇h̃)·ϑ
    pub transport: f64,
    /// −∫_{∂B_R}(1+s)/R h̃·ϑ
    pub robin: f64,
    /// ∫f·ϑ
    pub forcing: f64,
    /// −∫∂_t h̃·ϑ
    pub time_derivative: f64,
    /// −∫(v·∇h̃)·ϑ
    pub convection: f64,
    /// ½∫_{∂B_R}(x/R·v)(h̃·ϑ)
    pub boundary_flux: f64,
}

impl EnergyTerms {
    pub fn sum(&self) -> f64 {
        self.dissipation + self.transport + self.robin + self.forcing + self.time_derivative + self.convection + self.boundary_flux
    }

    pub fn magnitude(&self) -> f64 {
        [
            self.dissipation,
            self.transport,
            self.robin,
            self.forcing,
            self.time_derivative,
            self.convection,
            self.boundary_flux,
        ]
        .iter()
        .map(|v| v.abs())
        .sum()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyReport {
    /// ∫‖ϑ‖²_{(R,|ζ|)}.
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub terms: EnergyTerms,
    /// Allowed negative slack: `rel_tol` times the sizes of all terms.
    pub tolerance: f64,
    pub holds: bool,
    pub flux: FluxSmallness,
}

/// `v` and `ext` are the solution and the extension h̃ sampled on `q`;
/// `forcing` holds the modes of f in the `u` slot, if any.
#[allow(clippy::too_many_arguments)]
pub fn energy_check(
    v: &SampledField,
    ext: &SampledField,
    forcing: Option<&SampledField>,
    zeta: &Vec3,
    q: &DomainQuadrature,
    nonlinear: bool,
    flux: FluxSmallness,
    rel_tol: f64,
) -> EnergyReport {
    let theta = v.minus(ext);
    let lhs = inner_r_zeta(&theta, &theta, zeta, q);
    let r = q.radius;
    let mut terms = EnergyTerms {
        dissipation: -dirichlet_form(ext, &theta, q),
        transport: volume_convect(ext, &theta, zeta, q),
        robin: -boundary_l2(ext, &theta, q, |x| (1.0 + s_wake(x, zeta)) / r),
        forcing: forcing.map_or(0.0, |f| volume_l2(f, &theta, q)),
        time_derivative: -volume_l2(&ext.time_derivative(), &theta, q),
        ..Default::default()
    };
    if nonlinear {
        let kmax = v.kmax();
        let times = product_time_grid(v.period, kmax);
        let dt = v.period / times.len() as f64;
        let real = |m: &[ModeSample], t: f64| synthesize(m, v.period, t);
        terms.convection = -dt
            * (0..q.volume_nodes.len())
                .into_par_iter()
                .map(|i| {
                    let s: f64 = times
                        .iter()
                        .map(|t| {
                            let (a, h, th) = (real(&v.volume[i], *t), real(&ext.volume[i], *t), real(&theta.volume[i], *t));
                            (h.grad.transpose() * a.u).dot(&th.u)
                        })
                        .sum();
                    s * q.volume_weights[i]
                })
                .sum::<f64>();
        terms.boundary_flux = 0.5
            * dt
            * (0..q.boundary_nodes.len())
                .into_par_iter()
                .map(|i| {
                    let n = q.boundary_nodes[i] / r;
                    let s: f64 = times
                        .iter()
                        .map(|t| {
                            let (a, h, th) = (real(&v.boundary[i], *t), real(&ext.boundary[i], *t), real(&theta.boundary[i], *t));
                            n.dot(&a.u) * h.u.dot(&th.u)
                        })
                        .sum();
                    s * q.boundary_weights[i]
                })
                .sum::<f64>();
    }
    let rhs = terms.sum();
    let slack = rhs - lhs;
    let tolerance = rel_tol * (terms.magnitude() + lhs.abs());
    EnergyReport {
        lhs,
        rhs,
        slack,
        holds: slack >= -tolerance,
        terms,
        tolerance,
        flux,
    }
}
