//! Bilinear and trilinear forms on Ω_R and ∂B_R, integrated over one
//! period. Bilinear forms use Parseval,
//!
//!   ∫_𝕋 B(u, w) dt = 𝒯 [B(û₀, ŵ₀) + 2 Σ_{k≥1} Re B(û_k, conj ŵ_k)],
//!
//! and the trilinear form is integrated on a time grid fine enough to be
//! exact for products of three band-limited fields.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{synthesize, ModalField, ModeSample, RealSample};
use crate::geometry::{gauss_legendre_on, SphereQuadrature, Vec3};
use crate::kernels::{s_wake, CVec3};

/// Nodes and weights on Ω_R = {r_in < |x| < R} and on ∂B_R.
#[derive(Clone, Debug)]
pub struct DomainQuadrature {
    pub inner: f64,
    pub radius: f64,
    pub volume_nodes: Vec<Vec3>,
    pub volume_weights: Vec<f64>,
    pub boundary_nodes: Vec<Vec3>,
    pub boundary_weights: Vec<f64>,
}

impl DomainQuadrature {
    /// Radial panels run through `breaks` (which must include the end
    /// points) and each is split further so no panel is longer than
    /// `max_ratio` in radius ratio.
    pub fn new(
        breaks: &[f64],
        nodes_per_panel: usize,
        max_ratio: f64,
        volume_sphere: &SphereQuadrature,
        boundary_sphere: &SphereQuadrature,
    ) -> Result<Self> {
        if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[1] > w[0])) || !(breaks[0] > 0.0) {
            return Err(Error::Geometry(format!("radial breaks must increase from a positive radius: {breaks:?}")));
        }
        let mut volume_nodes = Vec::new();
        let mut volume_weights = Vec::new();
        for w in breaks.windows(2) {
            fill_shell(w[0], w[1], nodes_per_panel, max_ratio, volume_sphere, &mut volume_nodes, &mut volume_weights);
        }
        let radius = *breaks.last().unwrap();
        let (boundary_nodes, boundary_weights) = boundary_sphere.scaled(radius);
        Ok(DomainQuadrature {
            inner: breaks[0],
            radius,
            volume_nodes,
            volume_weights,
            boundary_nodes,
            boundary_weights,
        })
    }

    /// Replaces the rule on the shell a < |x| < b, whose radii must be
    /// breaks of the original rule, by a different one.
    pub fn refine_shell(mut self, a: f64, b: f64, nodes_per_panel: usize, max_ratio: f64, sphere: &SphereQuadrature) -> Result<Self> {
        if !(a >= self.inner && b > a && b <= self.radius) {
            return Err(Error::Geometry(format!("shell [{a}, {b}] outside [{}, {}]", self.inner, self.radius)));
        }
        let keep: Vec<usize> = (0..self.volume_nodes.len())
            .filter(|i| {
                let r = self.volume_nodes[*i].norm();
                r <= a || r >= b
            })
            .collect();
        let mut nodes: Vec<Vec3> = keep.iter().map(|i| self.volume_nodes[*i]).collect();
        let mut weights: Vec<f64> = keep.iter().map(|i| self.volume_weights[*i]).collect();
        fill_shell(a, b, nodes_per_panel, max_ratio, sphere, &mut nodes, &mut weights);
        self.volume_nodes = nodes;
        self.volume_weights = weights;
        Ok(self)
    }
}

fn fill_shell(
    a: f64,
    b: f64,
    nodes_per_panel: usize,
    max_ratio: f64,
    sphere: &SphereQuadrature,
    nodes: &mut Vec<Vec3>,
    weights: &mut Vec<f64>,
) {
    let pieces = ((b / a).ln() / max_ratio.ln()).ceil().max(1.0) as usize;
    for p in 0..pieces {
        let lo = a * (b / a).powf(p as f64 / pieces as f64);
        let hi = a * (b / a).powf((p + 1) as f64 / pieces as f64);
        let (rs, ws) = gauss_legendre_on(nodes_per_panel, lo, hi);
        for (r, wr) in rs.iter().zip(&ws) {
            for (n, wn) in sphere.nodes.iter().zip(&sphere.weights) {
                nodes.push(n * *r);
                weights.push(wr * r * r * wn);
            }
        }
    }
}

/// Modes of a field at every node of a domain quadrature.
#[derive(Clone, Debug)]
pub struct SampledField {
    pub period: f64,
    /// `volume[i][k]`.
    pub volume: Vec<Vec<ModeSample>>,
    pub boundary: Vec<Vec<ModeSample>>,
}

pub fn sample_field(field: &dyn ModalField, q: &DomainQuadrature) -> Result<SampledField> {
    let volume = q.volume_nodes.par_iter().map(|x| field.modes(x)).collect::<Result<Vec<_>>>()?;
    let boundary = q.boundary_nodes.par_iter().map(|x| field.modes(x)).collect::<Result<Vec<_>>>()?;
    Ok(SampledField {
        period: field.period(),
        volume,
        boundary,
    })
}

impl SampledField {
    pub fn kmax(&self) -> usize {
        self.volume
            .first()
            .or(self.boundary.first())
            .map_or(0, |m| m.len().saturating_sub(1))
    }

    fn zip_with(&self, o: &SampledField, f: impl Fn(&ModeSample, &ModeSample) -> ModeSample + Sync) -> SampledField {
        let kmax = self.kmax().max(o.kmax());
        let get = |v: &[ModeSample], k: usize| v.get(k).copied().unwrap_or_else(ModeSample::zero);
        let combine = |a: &Vec<Vec<ModeSample>>, b: &Vec<Vec<ModeSample>>| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (0..=kmax).map(|k| f(&get(x, k), &get(y, k))).collect())
                .collect()
        };
        SampledField {
            period: self.period,
            volume: combine(&self.volume, &o.volume),
            boundary: combine(&self.boundary, &o.boundary),
        }
    }

    pub fn minus(&self, o: &SampledField) -> SampledField {
        self.zip_with(o, |a, b| *a - *b)
    }

    pub fn plus(&self, o: &SampledField) -> SampledField {
        self.zip_with(o, |a, b| *a + *b)
    }

    pub fn scaled(&self, s: f64) -> SampledField {
        let f = |v: &Vec<Vec<ModeSample>>| v.iter().map(|m| m.iter().map(|x| x.scale(C64::new(s, 0.0))).collect()).collect();
        SampledField {
            period: self.period,
            volume: f(&self.volume),
            boundary: f(&self.boundary),
        }
    }

    /// ∂_t: mode k is multiplied by iω_k.
    pub fn time_derivative(&self) -> SampledField {
        let w = 2.0 * std::f64::consts::PI / self.period;
        let f = |v: &Vec<Vec<ModeSample>>| {
            v.iter()
                .map(|m| {
                    m.iter()
                        .enumerate()
                        .map(|(k, x)| x.scale(C64::new(0.0, w * k as f64)))
                        .collect()
                })
                .collect()
        };
        SampledField {
            period: self.period,
            volume: f(&self.volume),
            boundary: f(&self.boundary),
        }
    }

    /// Real samples at node i on the given times.
    fn real_volume(&self, i: usize, times: &[f64]) -> Vec<RealSample> {
        times.iter().map(|t| synthesize(&self.volume[i], self.period, *t)).collect()
    }

    fn real_boundary(&self, i: usize, times: &[f64]) -> Vec<RealSample> {
        times.iter().map(|t| synthesize(&self.boundary[i], self.period, *t)).collect()
    }
}

fn cdot(a: &CVec3, b: &CVec3) -> C64 {
    a[0] * b[0].conj() + a[1] * b[1].conj() + a[2] * b[2].conj()
}

fn gdot(a: &ModeSample, b: &ModeSample) -> C64 {
    a.grad.iter().zip(b.grad.iter()).map(|(x, y)| x * y.conj()).sum()
}

/// 𝒯 Σ_k c_k Re Σ_i w_i f(û_k(x_i), ŵ_k(x_i)), c_0 = 1, c_k = 2.
fn parseval_sum<F>(a: &[Vec<ModeSample>], b: &[Vec<ModeSample>], nodes: &[Vec3], weights: &[f64], period: f64, f: F) -> f64
where
    F: Fn(&Vec3, &ModeSample, &ModeSample) -> C64 + Sync,
{
    a.par_iter()
        .zip(b)
        .zip(nodes)
        .zip(weights)
        .map(|(((ma, mb), x), w)| {
            let mut acc = 0.0;
            for (k, (sa, sb)) in ma.iter().zip(mb).enumerate() {
                let c = if k == 0 { 1.0 } else { 2.0 };
                acc += c * f(x, sa, sb).re;
            }
            acc * w
        })
        .sum::<f64>()
        * period
}

/// ∫_𝕋 a(v, w) dt with
/// a(v, w) = ∫∇v:∇w − ∫(ζ·∇v)·w + ∫_{∂B_R} (1 + s_ζ)/R v·w.
pub fn form_a(v: &SampledField, w: &SampledField, zeta: &Vec3, q: &DomainQuadrature) -> f64 {
    let zc = zeta.map(|c| C64::new(c, 0.0));
    let vol = parseval_sum(&v.volume, &w.volume, &q.volume_nodes, &q.volume_weights, v.period, |_, a, b| {
        gdot(a, b) - cdot(&(a.grad.transpose() * zc), &b.u)
    });
    let r = q.radius;
    let bdry = parseval_sum(&v.boundary, &w.boundary, &q.boundary_nodes, &q.boundary_weights, v.period, |x, a, b| {
        cdot(&a.u, &b.u) * ((1.0 + s_wake(x, zeta)) / r)
    });
    vol + bdry
}

/// ∫_𝕋 b(v, p) dt with b(v, p) = −∫(∇·v) p, the pressure taken from `p`.
pub fn form_b(v: &SampledField, p: &SampledField, q: &DomainQuadrature) -> f64 {
    parseval_sum(&v.volume, &p.volume, &q.volume_nodes, &q.volume_weights, v.period, |_, a, b| {
        -(a.grad.trace() * b.p.conj())
    })
}

/// ∫_𝕋 (v, w)_{(R,|ζ|)} dt = ∫∇v:∇w + (1/R + |ζ|/2) ∫_{∂B_R} v·w.
pub fn inner_r_zeta(v: &SampledField, w: &SampledField, zeta: &Vec3, q: &DomainQuadrature) -> f64 {
    let vol = parseval_sum(&v.volume, &w.volume, &q.volume_nodes, &q.volume_weights, v.period, |_, a, b| gdot(a, b));
    let c = 1.0 / q.radius + 0.5 * zeta.norm();
    let bdry = parseval_sum(&v.boundary, &w.boundary, &q.boundary_nodes, &q.boundary_weights, v.period, |_, a, b| {
        cdot(&a.u, &b.u) * c
    });
    vol + bdry
}

pub fn norm_r_zeta(v: &SampledField, zeta: &Vec3, q: &DomainQuadrature) -> f64 {
    inner_r_zeta(v, v, zeta, q).max(0.0).sqrt()
}

/// ∫_𝕋∫_{Ω_R} v·w.
pub fn volume_l2(v: &SampledField, w: &SampledField, q: &DomainQuadrature) -> f64 {
    parseval_sum(&v.volume, &w.volume, &q.volume_nodes, &q.volume_weights, v.period, |_, a, b| cdot(&a.u, &b.u))
}

/// ∫_𝕋∫_{Ω_R} (ζ·∇v)·w.
pub fn volume_convect(v: &SampledField, w: &SampledField, zeta: &Vec3, q: &DomainQuadrature) -> f64 {
    let zc = zeta.map(|c| C64::new(c, 0.0));
    parseval_sum(&v.volume, &w.volume, &q.volume_nodes, &q.volume_weights, v.period, |_, a, b| {
        cdot(&(a.grad.transpose() * zc), &b.u)
    })
}

/// ∫_𝕋∫_{∂B_R} g(x) v·w.
pub fn boundary_l2<G>(v: &SampledField, w: &SampledField, q: &DomainQuadrature, g: G) -> f64
where
    G: Fn(&Vec3) -> f64 + Sync,
{
    parseval_sum(&v.boundary, &w.boundary, &q.boundary_nodes, &q.boundary_weights, v.period, |x, a, b| {
        cdot(&a.u, &b.u) * g(x)
    })
}

/// ∫_𝕋∫_{Ω_R} ∇v:∇w.
pub fn dirichlet_form(v: &SampledField, w: &SampledField, q: &DomainQuadrature) -> f64 {
    parseval_sum(&v.volume, &w.volume, &q.volume_nodes, &q.volume_weights, v.period, |_, a, b| gdot(a, b))
}

/// Uniform time grid on which a product of three fields with modes up to
/// K is integrated exactly.
pub fn product_time_grid(period: f64, kmax: usize) -> Vec<f64> {
    let n = 3 * kmax + 1;
    (0..n).map(|j| period * j as f64 / n as f64).collect()
}

/// ∫_𝕋 c(u, v, w) dt with
/// c(u, v, w) = ∫ (u·∇v)·w − ½ ∫_{∂B_R} (x/R·u)(v·w).
pub fn form_c(u: &SampledField, v: &SampledField, w: &SampledField, q: &DomainQuadrature) -> f64 {
    let kmax = u.kmax().max(v.kmax()).max(w.kmax());
    let times = product_time_grid(u.period, kmax);
    let dt = u.period / times.len() as f64;
    let vol: f64 = (0..q.volume_nodes.len())
        .into_par_iter()
        .map(|i| {
            let (a, b, c) = (u.real_volume(i, &times), v.real_volume(i, &times), w.real_volume(i, &times));
            let s: f64 = (0..times.len()).map(|j| (b[j].grad.transpose() * a[j].u).dot(&c[j].u)).sum();
            s * q.volume_weights[i]
        })
        .sum();
    let r = q.radius;
    let bdry: f64 = (0..q.boundary_nodes.len())
        .into_par_iter()
        .map(|i| {
            let n = q.boundary_nodes[i] / r;
            let (a, b, c) = (u.real_boundary(i, &times), v.real_boundary(i, &times), w.real_boundary(i, &times));
            let s: f64 = (0..times.len()).map(|j| n.dot(&a[j].u) * b[j].u.dot(&c[j].u)).sum();
            s * q.boundary_weights[i]
        })
        .sum();
    (vol - 0.5 * bdry) * dt
}

/// ∫_𝕋∫_{Ω_R} |u|²/|x|² over ∫_𝕋 ‖u‖²_{(R,|ζ|)}: the constant a
/// Hardy-type inequality needs for this field.
pub fn hardy_ratio(u: &SampledField, zeta: &Vec3, q: &DomainQuadrature) -> f64 {
    let num = parseval_sum(&u.volume, &u.volume, &q.volume_nodes, &q.volume_weights, u.period, |x, a, b| {
        cdot(&a.u, &b.u) / x.norm_squared()
    });
    let den = inner_r_zeta(u, u, zeta, q);
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_rule_measures_the_shell() {
        let s = SphereQuadrature::new(4, Vec3::z());
        let q = DomainQuadrature::new(&[1.0, 2.0, 5.0], 4, 1.5, &s, &s).unwrap();
        let vol: f64 = q.volume_weights.iter().sum();
        let want = 4.0 / 3.0 * std::f64::consts::PI * (125.0 - 1.0);
        assert!((vol - want).abs() < 1e-10 * want);
        let area: f64 = q.boundary_weights.iter().sum();
        assert!((area - 100.0 * std::f64::consts::PI).abs() < 1e-10);
    }

    #[test]
    fn refined_shell_keeps_the_volume() {
        let s = SphereQuadrature::new(4, Vec3::z());
        let fine = SphereQuadrature::new(9, Vec3::z());
        let q = DomainQuadrature::new(&[1.0, 2.0, 5.0], 4, 1.5, &s, &s)
            .unwrap()
            .refine_shell(1.0, 2.0, 8, 1.2, &fine)
            .unwrap();
        let vol: f64 = q.volume_weights.iter().sum();
        let want = 4.0 / 3.0 * std::f64::consts::PI * (125.0 - 1.0);
        assert!((vol - want).abs() < 1e-10 * want);
        let inner = q.volume_nodes.iter().filter(|x| x.norm() < 2.0).count();
        assert_eq!(inner % (8 * fine.len()), 0);
    }

    #[test]
    fn rejects_decreasing_breaks() {
        let s = SphereQuadrature::new(3, Vec3::z());
        assert!(DomainQuadrature::new(&[2.0, 1.0], 3, 1.5, &s, &s).is_err());
    }
}
