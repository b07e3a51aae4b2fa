//! Time-periodic flow in the truncated domain Ω_R = Ω ∩ B_R with the
//! artificial boundary operator on ∂B_R.
//!
//! Each time mode is represented as
//!
//!   v_k = q_k σ + Σ_j Γ_k(x − y_j) c_j + (particular solution of the forcing),
//!
//! with point forces y_j inside the body and on a sphere outside ∂B_R. The
//! coefficients c_j solve a weighted least-squares problem whose rows are
//! v = h on Σ and the linear part of 𝔅 on ∂B_R. Factorisations are kept per
//! mode so the Picard loop only pays for back substitutions.

pub mod abc;
pub mod energy;
pub mod extension;
pub mod forms;

use std::sync::{Arc, OnceLock};

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{cnorm3, BoundaryDataModes};
use crate::field::{analyze, apply_jet, flux_carrier_mode, FlowParams, ModalField, ModeSample, SourceModes};
use crate::geometry::{place_sources, AnnulusQuadrature, SphereQuadrature, Vec3};
use crate::kernels::{s_wake, CVec3, KernelJet};
use crate::linalg::RegularizedLstsq;
use crate::volume::{regularized_jet, PointForceField};

pub use abc::{abc_residual, AbcOperator};

/// Forcing mode k at a point.
pub type Forcing = Arc<dyn Fn(usize, &Vec3) -> CVec3 + Send + Sync>;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TruncatedDiscretization {
    pub inner_sources: usize,
    /// Radius of the inner source sphere relative to the body radius.
    pub inner_offset: f64,
    pub outer_sources: usize,
    /// Radius of the outer source sphere relative to R.
    pub outer_offset: f64,
    /// Sphere-rule order on ∂B_R is `outer_order + outer_order_growth·√R`.
    pub outer_order: usize,
    pub outer_order_growth: f64,
    pub rel_lambda: f64,
    pub residual_tol: f64,
    /// Volume grid carrying forcing and convection: sphere order, nodes per
    /// radial panel and the largest panel ratio.
    pub volume_order: usize,
    pub volume_nodes_per_panel: usize,
    pub volume_ratio: f64,
}

impl Default for TruncatedDiscretization {
    fn default() -> Self {
        TruncatedDiscretization {
            inner_sources: 144,
            inner_offset: 0.4,
            outer_sources: 400,
            outer_offset: 1.6,
            outer_order: 20,
            outer_order_growth: 2.0,
            rel_lambda: 1e-12,
            residual_tol: 1e-4,
            volume_order: 4,
            volume_nodes_per_panel: 3,
            volume_ratio: 1.6,
        }
    }
}

impl TruncatedDiscretization {
    pub fn boundary_order(&self, radius: f64) -> usize {
        self.outer_order + (self.outer_order_growth * radius.sqrt()).round() as usize
    }
}

#[derive(Clone)]
pub struct TruncatedProblem {
    pub params: FlowParams,
    pub radius: f64,
    pub data: BoundaryDataModes,
    pub forcing: Option<Forcing>,
    pub disc: TruncatedDiscretization,
}

impl TruncatedProblem {
    pub fn new(params: FlowParams, radius: f64, data: BoundaryDataModes, disc: TruncatedDiscretization) -> Result<Self> {
        if !(radius > data.body.radius) {
            return Err(Error::Geometry(format!(
                "truncation radius {radius} must exceed the body radius {}",
                data.body.radius
            )));
        }
        if data.kmax() < params.kmax {
            return Err(Error::Config(format!(
                "boundary data has {} modes, flow needs {}",
                data.kmax() + 1,
                params.kmax + 1
            )));
        }
        let scale = data.mode_sizes().into_iter().fold(0.0, f64::max);
        let imag = data.modes[0]
            .iter()
            .flat_map(|h| h.iter().map(|z| z.im.abs()))
            .fold(0.0, f64::max);
        if imag > 1e-12 * scale.max(1.0) {
            return Err(Error::Config("mean mode of the boundary data must be real".into()));
        }
        Ok(TruncatedProblem {
            params,
            radius,
            data,
            forcing: None,
            disc,
        })
    }

    pub fn with_forcing(mut self, f: Forcing) -> Self {
        self.forcing = Some(f);
        self
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruncatedModeReport {
    pub k: usize,
    /// max |v − h| on Σ over the largest boundary datum.
    pub sigma_residual: f64,
    /// max |𝔅v − g| on ∂B_R over the size of the terms of 𝔅v.
    pub abc_residual: f64,
    pub condition: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PicardReport {
    pub iterations: usize,
    /// sup-norm of v^{n} − v^{n−1} on the grid nodes.
    pub increments: Vec<f64>,
    pub ratios: Vec<f64>,
    pub converged: bool,
}

pub struct TruncatedSolution {
    pub params: FlowParams,
    pub body: crate::geometry::BodyGeometry,
    pub radius: f64,
    pub sources: SourceModes,
    pub flux: Vec<C64>,
    pub particular: Option<Arc<PointForceField>>,
    pub reports: Vec<TruncatedModeReport>,
    pub picard: Option<PicardReport>,
}

impl ModalField for TruncatedSolution {
    fn kmax(&self) -> usize {
        self.params.kmax
    }
    fn period(&self) -> f64 {
        self.params.period
    }
    fn mode(&self, k: usize, x: &Vec3) -> Result<ModeSample> {
        if self.body.contains(x) {
            return Err(Error::Geometry(format!("x = {:?} lies inside the body", x.as_slice())));
        }
        let mut s = self.sources.eval(&self.params, k, x)?;
        if self.flux[k] != C64::new(0.0, 0.0) {
            s += flux_carrier_mode(self.flux[k], self.params.omega(k), &self.params.zeta, x);
        }
        if let Some(p) = &self.particular {
            s += p.mode(k, x)?;
        }
        Ok(s)
    }
}

impl TruncatedSolution {
    pub fn max_sigma_residual(&self) -> f64 {
        self.reports.iter().map(|r| r.sigma_residual).fold(0.0, f64::max)
    }
    pub fn max_abc_residual(&self) -> f64 {
        self.reports.iter().map(|r| r.abc_residual).fold(0.0, f64::max)
    }
}

/// Row blocks for one node: either the velocity (3 rows), the linear ABC
/// (3 rows) or velocity and gradient (12 rows).
#[derive(Clone, Copy)]
enum RowKind {
    Velocity(f64),
    Abc(f64),
    Jet,
}

impl RowKind {
    fn rows(self) -> usize {
        match self {
            RowKind::Jet => 12,
            _ => 3,
        }
    }

    fn fill(self, abc: &AbcOperator, x: &Vec3, s: &ModeSample, out: &mut [C64]) {
        match self {
            RowKind::Velocity(w) => {
                for a in 0..3 {
                    out[a] = s.u[a] * w;
                }
            }
            RowKind::Abc(w) => {
                let b = abc.apply_linear_mode(x, s);
                for a in 0..3 {
                    out[a] = b[a] * w;
                }
            }
            RowKind::Jet => {
                for a in 0..3 {
                    out[a] = s.u[a];
                }
                for m in 0..3 {
                    for j in 0..3 {
                        out[3 + 3 * m + j] = s.grad[(m, j)];
                    }
                }
            }
        }
    }
}

/// Matrix whose column 3j + b is the response to a unit force e_b at
/// column point j, times `col_weight[j]`.
fn assemble<J>(abc: &AbcOperator, nodes: &[Vec3], kinds: &[RowKind], cols: usize, col_weight: &[f64], jet: J) -> Result<Mat<C64>>
where
    J: Fn(&Vec3, usize) -> Result<KernelJet> + Sync,
{
    let rpn = kinds[0].rows();
    let blocks: Vec<Vec<C64>> = nodes
        .par_iter()
        .zip(kinds)
        .map(|(x, kind)| {
            let mut row = vec![C64::new(0.0, 0.0); rpn * 3 * cols];
            let mut buf = [C64::new(0.0, 0.0); 12];
            for j in 0..cols {
                let jt = jet(x, j)?;
                for b in 0..3 {
                    let mut e = CVec3::zeros();
                    e[b] = C64::new(col_weight[j], 0.0);
                    let s = apply_jet(&jt, &e);
                    kind.fill(abc, x, &s, &mut buf);
                    for r in 0..rpn {
                        row[r * 3 * cols + 3 * j + b] = buf[r];
                    }
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Mat::from_fn(rpn * nodes.len(), 3 * cols, |r, c| blocks[r / rpn][(r % rpn) * 3 * cols + c]))
}

fn matvec(a: &Mat<C64>, x: &[C64]) -> Vec<C64> {
    let v = Mat::from_fn(x.len(), 1, |i, _| x[i]);
    let y = a * &v;
    (0..y.nrows()).map(|i| y[(i, 0)]).collect()
}

fn flatten(v: &[CVec3]) -> Vec<C64> {
    v.iter().flat_map(|c| [c[0], c[1], c[2]]).collect()
}

fn norm3(s: &[C64]) -> f64 {
    s.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Operators of one mode.
struct ModeSystem {
    ls: RegularizedLstsq,
    /// Weighted collocation matrix (Σ rows, then ∂B_R rows).
    matrix: Mat<C64>,
    /// Velocity of the sources at the ∂B_R nodes.
    outer_velocity: Mat<C64>,
    /// Velocity and gradient of the sources at the volume nodes.
    volume_jet: Option<Mat<C64>>,
    forced: Option<ForcedResponse>,
}

/// Responses to the volume point forces.
struct ForcedResponse {
    /// Σ and ∂B_R rows, weighted as in the collocation matrix.
    rows: Mat<C64>,
    outer_velocity: Mat<C64>,
    volume_jet: Mat<C64>,
}

/// Coefficients and node values of one mode.
#[derive(Clone)]
struct ModeState {
    coeffs: Vec<C64>,
    forces: Vec<CVec3>,
    /// v at the ∂B_R nodes.
    outer: Vec<CVec3>,
    /// v and ∇v at the volume nodes.
    volume: Vec<ModeSample>,
    report: TruncatedModeReport,
}

struct VolumeGrid {
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
}

/// Discretised truncated problem with lazily factored per-mode systems.
pub struct TruncatedSystem {
    params: FlowParams,
    problem: TruncatedProblem,
    abc: AbcOperator,
    sigma_sqrt_w: Vec<f64>,
    outer_nodes: Vec<Vec3>,
    outer_sqrt_w: Vec<f64>,
    sources: Vec<Vec3>,
    volume: Option<VolumeGrid>,
    modes: Vec<OnceLock<Result<ModeSystem>>>,
}

impl TruncatedSystem {
    /// `with_volume` adds the grid that carries forcing and convection.
    pub fn new(problem: &TruncatedProblem, with_volume: bool, include_quadratic: bool) -> Result<Self> {
        let disc = &problem.disc;
        let params = problem.params.clone();
        let body = problem.data.body;
        let radius = problem.radius;
        if problem.data.nodes.len() < 2 * disc.inner_sources {
            return Err(Error::Config(format!(
                "{} nodes on Σ for {} inner sources; need at least twice as many",
                problem.data.nodes.len(),
                disc.inner_sources
            )));
        }
        let quad = SphereQuadrature::new(disc.boundary_order(radius), params.zeta);
        if quad.len() < 2 * disc.outer_sources {
            return Err(Error::Config(format!(
                "{} nodes on ∂B_R for {} outer sources; need at least twice as many",
                quad.len(),
                disc.outer_sources
            )));
        }
        let r2 = body.radius * body.radius;
        let sigma_sqrt_w = problem.data.weights.iter().map(|w| (w / r2).sqrt()).collect();
        let outer_nodes = quad.nodes.iter().map(|n| n * radius).collect();
        let outer_sqrt_w = quad.weights.iter().map(|w| w.sqrt()).collect();
        let mut sources = place_sources(body.radius, disc.inner_sources, disc.inner_offset, &params.zeta);
        sources.extend(place_sources(radius, disc.outer_sources, disc.outer_offset, &params.zeta));
        let volume = if with_volume {
            let q = AnnulusQuadrature::graded(
                body.radius,
                radius,
                disc.volume_nodes_per_panel,
                disc.volume_ratio,
                SphereQuadrature::new(disc.volume_order, params.zeta),
            )?;
            let (nodes, weights) = q.points();
            Some(VolumeGrid { nodes, weights })
        } else {
            None
        };
        let modes = (0..=params.kmax).map(|_| OnceLock::new()).collect();
        Ok(TruncatedSystem {
            abc: AbcOperator::new(radius, params.zeta, include_quadratic),
            params,
            problem: problem.clone(),
            sigma_sqrt_w,
            outer_nodes,
            outer_sqrt_w,
            sources,
            volume,
            modes,
        })
    }

    pub fn volume_len(&self) -> usize {
        self.volume.as_ref().map_or(0, |v| v.nodes.len())
    }

    pub fn outer_nodes(&self) -> &[Vec3] {
        &self.outer_nodes
    }

    fn system(&self, k: usize) -> Result<&ModeSystem> {
        self.modes[k]
            .get_or_init(|| self.build_mode(k))
            .as_ref()
            .map_err(|e| e.clone())
    }

    fn build_mode(&self, k: usize) -> Result<ModeSystem> {
        let p = &self.params;
        let sigma = &self.problem.data.nodes;
        let n_src = self.sources.len();
        let ones = vec![1.0; n_src.max(self.volume_len())];
        let src_jet = |x: &Vec3, j: usize| p.kernel_jet(k, &(x - self.sources[j]));
        let mut nodes: Vec<Vec3> = sigma.clone();
        nodes.extend(self.outer_nodes.iter().cloned());
        let kinds: Vec<RowKind> = self
            .sigma_sqrt_w
            .iter()
            .map(|w| RowKind::Velocity(*w))
            .chain(self.outer_sqrt_w.iter().map(|w| RowKind::Abc(w * self.problem.radius)))
            .collect();
        let matrix = assemble(&self.abc, &nodes, &kinds, n_src, &ones, src_jet)?;
        let vel = vec![RowKind::Velocity(1.0); self.outer_nodes.len()];
        let outer_velocity = assemble(&self.abc, &self.outer_nodes, &vel, n_src, &ones, src_jet)?;
        let (volume_jet, forced) = match &self.volume {
            Some(g) => {
                let jk = vec![RowKind::Jet; g.nodes.len()];
                let vj = assemble(&self.abc, &g.nodes, &jk, n_src, &ones, src_jet)?;
                let radii: Vec<f64> = g.weights.iter().map(|w| (3.0 * w / (4.0 * std::f64::consts::PI)).cbrt()).collect();
                let force_jet = |x: &Vec3, j: usize| regularized_jet(p, k, &(x - g.nodes[j]), radii[j]);
                let n_vol = g.nodes.len();
                let forced = ForcedResponse {
                    rows: assemble(&self.abc, &nodes, &kinds, n_vol, &g.weights, force_jet)?,
                    outer_velocity: assemble(&self.abc, &self.outer_nodes, &vel, n_vol, &g.weights, force_jet)?,
                    volume_jet: assemble(&self.abc, &g.nodes, &jk, n_vol, &g.weights, force_jet)?,
                };
                (Some(vj), Some(forced))
            }
            None => (None, None),
        };
        let ls = RegularizedLstsq::new(matrix.clone(), self.problem.disc.rel_lambda);
        if !ls.condition.is_finite() {
            return Err(Error::RankDeficient { condition: ls.condition });
        }
        Ok(ModeSystem {
            ls,
            matrix,
            outer_velocity,
            volume_jet,
            forced,
        })
    }

    /// Solves mode k for boundary data `h` on Σ, volume force values
    /// `forces` at the grid nodes and ABC right-hand side `g` on ∂B_R.
    fn solve_mode(&self, k: usize, h: &[[C64; 3]], forces: &[CVec3], g: &[CVec3], data_scale: f64) -> Result<ModeState> {
        let q = self.problem.data.flux_modes()[k];
        let omega = self.params.omega(k);
        let zeta = self.params.zeta;
        let n_sigma = h.len();
        let n_out = self.outer_nodes.len();
        let has_force = forces.iter().any(|f| f.norm() > 0.0);
        let has_data = h.iter().any(|v| cnorm3(v) > 0.0) || g.iter().any(|v| v.norm() > 0.0) || has_force;
        let n_src = self.sources.len();
        if !has_data {
            let n_vol = self.volume_len();
            return Ok(ModeState {
                coeffs: vec![C64::new(0.0, 0.0); 3 * n_src],
                forces: vec![CVec3::zeros(); n_vol],
                outer: vec![CVec3::zeros(); n_out],
                volume: vec![ModeSample::zero(); n_vol],
                report: TruncatedModeReport {
                    k,
                    sigma_residual: 0.0,
                    abc_residual: 0.0,
                    condition: 1.0,
                },
            });
        }
        let sys = self.system(k)?;
        let carrier = |x: &Vec3| flux_carrier_mode(q, omega, &zeta, x);
        let mut rhs = vec![C64::new(0.0, 0.0); 3 * (n_sigma + n_out)];
        for (i, x) in self.problem.data.nodes.iter().enumerate() {
            let c = carrier(x).u;
            for a in 0..3 {
                rhs[3 * i + a] = (h[i][a] - c[a]) * self.sigma_sqrt_w[i];
            }
        }
        let outer_carrier: Vec<ModeSample> = self.outer_nodes.iter().map(carrier).collect();
        let rw = self.problem.radius;
        for (i, x) in self.outer_nodes.iter().enumerate() {
            let b = self.abc.apply_linear_mode(x, &outer_carrier[i]);
            for a in 0..3 {
                rhs[3 * (n_sigma + i) + a] = (g[i][a] - b[a]) * self.outer_sqrt_w[i] * rw;
            }
        }
        let fvec = flatten(forces);
        let forced = if has_force { sys.forced.as_ref() } else { None };
        if let Some(fm) = forced {
            let resp = matvec(&fm.rows, &fvec);
            for (r, d) in rhs.iter_mut().zip(&resp) {
                *r -= d;
            }
        }
        let coeffs = sys.ls.solve(&rhs);
        let fitted = matvec(&sys.matrix, &coeffs);

        // Node values of the full solution.
        let mut outer_flat = matvec(&sys.outer_velocity, &coeffs);
        if let Some(fm) = forced {
            for (o, d) in outer_flat.iter_mut().zip(matvec(&fm.outer_velocity, &fvec)) {
                *o += d;
            }
        }
        let outer: Vec<CVec3> = outer_flat
            .chunks(3)
            .zip(&outer_carrier)
            .map(|(c, car)| CVec3::new(c[0], c[1], c[2]) + car.u)
            .collect();
        let volume = match (&self.volume, &sys.volume_jet) {
            (Some(grid), Some(vj)) => {
                let mut flat = matvec(vj, &coeffs);
                if let Some(fm) = forced {
                    for (o, d) in flat.iter_mut().zip(matvec(&fm.volume_jet, &fvec)) {
                        *o += d;
                    }
                }
                grid.nodes
                    .iter()
                    .zip(flat.chunks(12))
                    .map(|(x, c)| {
                        let mut s = ModeSample::zero();
                        for a in 0..3 {
                            s.u[a] = c[a];
                        }
                        for m in 0..3 {
                            for j in 0..3 {
                                s.grad[(m, j)] = c[3 + 3 * m + j];
                            }
                        }
                        s + carrier(x)
                    })
                    .collect()
            }
            _ => Vec::new(),
        };

        // Residuals from the collocation rows.
        let mut sigma_res: f64 = 0.0;
        for i in 0..n_sigma {
            let r = norm3(&[
                fitted[3 * i] - rhs[3 * i],
                fitted[3 * i + 1] - rhs[3 * i + 1],
                fitted[3 * i + 2] - rhs[3 * i + 2],
            ]);
            sigma_res = sigma_res.max(r / self.sigma_sqrt_w[i]);
        }
        let mut abc_res: f64 = 0.0;
        let mut abc_scale: f64 = 0.0;
        for i in 0..n_out {
            let o = 3 * (n_sigma + i);
            let w = self.outer_sqrt_w[i] * rw;
            let miss = CVec3::new(fitted[o] - rhs[o], fitted[o + 1] - rhs[o + 1], fitted[o + 2] - rhs[o + 2]) / C64::new(w, 0.0);
            abc_res = abc_res.max(miss.norm());
            // 𝔅v = g + miss; its Robin part is known from v, the rest is traction.
            let robin = (1.0 + s_wake(&self.outer_nodes[i], &zeta)) / rw;
            let traction = (g[i] + miss - outer[i] * C64::new(robin, 0.0)).norm();
            abc_scale = abc_scale.max(traction + robin * outer[i].norm());
        }
        Ok(ModeState {
            coeffs,
            forces: forces.to_vec(),
            outer,
            volume,
            report: TruncatedModeReport {
                k,
                sigma_residual: sigma_res / data_scale.max(f64::MIN_POSITIVE),
                abc_residual: abc_res / abc_scale.max(f64::MIN_POSITIVE),
                condition: sys.ls.condition,
            },
        })
    }

    fn into_solution(&self, states: &[ModeState], picard: Option<PicardReport>) -> TruncatedSolution {
        let mut src = SourceModes::zeros(self.sources.clone(), self.params.kmax);
        for (k, s) in states.iter().enumerate() {
            src.strengths[k] = s.coeffs.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        }
        let particular = self.volume.as_ref().and_then(|g| {
            let values: Vec<Vec<CVec3>> = states.iter().map(|s| s.forces.clone()).collect();
            let field = PointForceField::new(&self.params, g.nodes.clone(), &g.weights, values);
            if field.is_zero() {
                None
            } else {
                Some(Arc::new(field))
            }
        });
        TruncatedSolution {
            params: self.params.clone(),
            body: self.problem.data.body,
            radius: self.problem.radius,
            sources: src,
            flux: self.problem.data.flux_modes(),
            particular,
            reports: states.iter().map(|s| s.report.clone()).collect(),
            picard,
        }
    }

    fn data_scale(&self) -> f64 {
        self.problem.data.mode_sizes().into_iter().fold(0.0, f64::max)
    }

    fn forcing_values(&self, k: usize) -> Vec<CVec3> {
        match (&self.volume, &self.problem.forcing) {
            (Some(g), Some(f)) => g.nodes.iter().map(|x| f(k, x)).collect(),
            (Some(g), None) => vec![CVec3::zeros(); g.nodes.len()],
            _ => Vec::new(),
        }
    }

    fn linear_states(&self, convective: Option<&[ModeState]>) -> Result<Vec<ModeState>> {
        let kmax = self.params.kmax;
        let (conv, quad) = match convective {
            Some(prev) => {
                let (c, q) = self.lagged_terms(prev);
                (Some(c), Some(q))
            }
            None => (None, None),
        };
        let scale = self.data_scale();
        (0..=kmax)
            .into_par_iter()
            .map(|k| {
                let mut forces = self.forcing_values(k);
                if let Some(c) = &conv {
                    for (f, n) in forces.iter_mut().zip(&c[k]) {
                        *f -= n;
                    }
                }
                let g = match &quad {
                    Some(q) => q[k].clone(),
                    None => vec![CVec3::zeros(); self.outer_nodes.len()],
                };
                self.solve_mode(k, &self.problem.data.modes[k], &forces, &g, scale)
            })
            .collect()
    }

    /// Modes of v·∇v at the volume nodes and of ½(x/R·v)v on ∂B_R.
    fn lagged_terms(&self, prev: &[ModeState]) -> (Vec<Vec<CVec3>>, Vec<Vec<CVec3>>) {
        let kmax = self.params.kmax;
        let nt = (4 * kmax).max(1);
        let period = self.params.period;
        let times: Vec<f64> = (0..nt).map(|j| period * j as f64 / nt as f64).collect();
        let n_vol = self.volume_len();
        let conv: Vec<Vec<CVec3>> = {
            let per_node: Vec<Vec<CVec3>> = (0..n_vol)
                .into_par_iter()
                .map(|i| {
                    let modes: Vec<ModeSample> = prev.iter().map(|s| s.volume[i]).collect();
                    crate::field::convection_modes(&modes, period)
                })
                .collect();
            (0..=kmax).map(|k| per_node.iter().map(|m| m[k]).collect()).collect()
        };
        let quad: Vec<Vec<CVec3>> = {
            let per_node: Vec<Vec<Vec<C64>>> = self
                .outer_nodes
                .par_iter()
                .enumerate()
                .map(|(i, x)| {
                    let n = x / self.problem.radius;
                    let modes: Vec<ModeSample> = prev
                        .iter()
                        .map(|s| ModeSample {
                            u: s.outer[i],
                            ..ModeSample::zero()
                        })
                        .collect();
                    let samples: Vec<Vec3> = times
                        .iter()
                        .map(|t| {
                            let v = crate::field::synthesize(&modes, period, *t).u;
                            v * (0.5 * n.dot(&v))
                        })
                        .collect();
                    analyze(&samples, kmax, |v| vec![v.x, v.y, v.z])
                })
                .collect();
            (0..=kmax)
                .map(|k| per_node.iter().map(|m| CVec3::new(m[k][0], m[k][1], m[k][2])).collect())
                .collect()
        };
        (conv, quad)
    }

    /// sup over nodes and a time grid of |a − b| and of |a|.
    fn sup_difference(&self, a: &[ModeState], b: Option<&[ModeState]>) -> (f64, f64) {
        let kmax = self.params.kmax;
        let nt = (4 * kmax).max(1);
        let period = self.params.period;
        let n_nodes = self.outer_nodes.len() + self.volume_len();
        let value = |s: &ModeState, i: usize| {
            if i < s.outer.len() {
                s.outer[i]
            } else {
                s.volume[i - s.outer.len()].u
            }
        };
        (0..n_nodes)
            .into_par_iter()
            .map(|i| {
                let ma: Vec<ModeSample> = a.iter().map(|s| ModeSample { u: value(s, i), ..ModeSample::zero() }).collect();
                let mb: Vec<ModeSample> = match b {
                    Some(b) => b.iter().map(|s| ModeSample { u: value(s, i), ..ModeSample::zero() }).collect(),
                    None => vec![ModeSample::zero(); ma.len()],
                };
                let mut d: f64 = 0.0;
                let mut m: f64 = 0.0;
                for j in 0..nt {
                    let t = period * j as f64 / nt as f64;
                    let va = crate::field::synthesize(&ma, period, t).u;
                    let vb = crate::field::synthesize(&mb, period, t).u;
                    d = d.max((va - vb).norm());
                    m = m.max(va.norm());
                }
                (d, m)
            })
            .reduce(|| (0.0, 0.0), |x, y| (x.0.max(y.0), x.1.max(y.1)))
    }
}

fn check_residuals(states: &[ModeState], tol: f64) -> Result<()> {
    for s in states {
        let r = s.report.sigma_residual.max(s.report.abc_residual);
        if r > tol {
            return Err(Error::Residual {
                context: format!("truncated mode {}", s.report.k),
                residual: r,
                tolerance: tol,
            });
        }
    }
    Ok(())
}

/// Linear (Oseen) problem: no convection, linear ABC.
pub fn solve_truncated_linear(problem: &TruncatedProblem) -> Result<TruncatedSolution> {
    let system = TruncatedSystem::new(problem, problem.forcing.is_some(), false)?;
    let states = system.linear_states(None)?;
    check_residuals(&states, problem.disc.residual_tol)?;
    Ok(system.into_solution(&states, None))
}

/// Picard iteration for the Navier–Stokes problem with the full ABC: the
/// convection v·∇v and the quadratic ABC term are evaluated at the previous
/// iterate and moved to the right-hand side. Starts from v⁰ = 0 and stops
/// once the sup-norm increment falls below `tol` times the sup of v.
pub fn picard_solve(problem: &TruncatedProblem, max_iter: usize, tol: f64) -> Result<TruncatedSolution> {
    let system = TruncatedSystem::new(problem, true, true)?;
    picard_with_system(&system, max_iter, tol)
}

pub fn picard_with_system(system: &TruncatedSystem, max_iter: usize, tol: f64) -> Result<TruncatedSolution> {
    let mut report = PicardReport::default();
    let mut prev: Option<Vec<ModeState>> = None;
    for _ in 0..max_iter.max(1) {
        let states = system.linear_states(prev.as_deref())?;
        let (incr, size) = system.sup_difference(&states, prev.as_deref());
        report.iterations += 1;
        if let Some(last) = report.increments.last() {
            if *last > 0.0 {
                report.ratios.push(incr / last);
            }
        }
        report.increments.push(incr);
        let done = incr == 0.0 || incr <= tol * size;
        prev = Some(states);
        if done {
            report.converged = true;
            break;
        }
    }
    let states = prev.expect("at least one iteration");
    if !report.converged {
        return Err(Error::Divergence { ratios: report.ratios });
    }
    check_residuals(&states, system.problem.disc.residual_tol)?;
    Ok(system.into_solution(&states, Some(report)))
}
