mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use config::{parse_list, parse_vec3, Overrides, RunConfig};
use tposeen::exterior::{solve_exterior, BoundaryDataModes};
use tposeen::field::{ModalField, RealSample};
use tposeen::geometry::{SphereQuadrature, Vec3};
use tposeen::harness::{boundary_data, flux_dichotomy_study, run_truncation_study, ManufacturedFlow, StudyResult};
use tposeen::kernels::{laplace_e, oseenlet_mode, oseenlet_steady, stokeslet, CMat3, CVec3, KernelValue, ModeSpec, NewtonianPotentialGrid};
use tposeen::ode::{periodic_state_by_stepping, solve_periodic_ode, PeriodicCoefficients, TimeFourierBasis};
use tposeen::truncated::{solve_truncated_linear, TruncatedProblem};
use tposeen::verify::{decay_suite, exactness_suite, mode_oracle_suite, solenoidal_suite, surface_law_suite, SuiteReport};

#[derive(Parser)]
#[command(name = "tposeen", about = "Time-periodic Oseen flow past a translating sphere")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Configuration file (TOML: key = value under section headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, or directory for studies.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Truncation radii, comma separated.
    #[arg(long, global = true)]
    radii: Option<String>,
    /// Highest time mode K.
    #[arg(long, global = true)]
    modes: Option<usize>,
    /// Translation vector ζ as x,y,z.
    #[arg(long, global = true)]
    zeta: Option<String>,
    #[arg(long, global = true)]
    period: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate or verify the fundamental solutions.
    #[command(subcommand)]
    Kernels(KernelsCmd),
    /// Solve the exterior or truncated problem for manufactured data.
    #[command(subcommand)]
    Solve(SolveCmd),
    /// Truncation and flux studies.
    #[command(subcommand)]
    Study(StudyCmd),
    /// Periodic ODE checks.
    #[command(subcommand)]
    Ode(OdeCmd),
}

#[derive(Subcommand)]
enum KernelsCmd {
    Eval {
        #[arg(long, value_enum, default_value = "oseen")]
        kernel: KernelKind,
        /// Evaluation point x,y,z.
        #[arg(long)]
        x: String,
        /// Time mode for `--kernel mode`.
        #[arg(long, default_value_t = 1)]
        k: i64,
    },
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    Laplace,
    Stokeslet,
    Oseen,
    Mode,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Suite {
    Exactness,
    Solenoidal,
    Decay,
    SurfaceLaw,
    ModeOracle,
    All,
}

#[derive(Subcommand)]
enum SolveCmd {
    Exterior {
        #[arg(long)]
        eval: String,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
    },
    Truncated {
        #[arg(long)]
        eval: String,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        /// Truncation radius; defaults to the first configured radius.
        #[arg(long)]
        radius: Option<f64>,
    },
}

#[derive(Subcommand)]
enum StudyCmd {
    Truncation,
    FluxDichotomy,
}

#[derive(Subcommand)]
enum OdeCmd {
    BlockVsStep {
        #[arg(long, default_value_t = 10)]
        systems: usize,
    },
}

enum Failure {
    Usage(String),
    Run(String),
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn overrides(c: &Common) -> Result<Overrides, String> {
    Ok(Overrides {
        out: c.out.clone(),
        radii: c.radii.as_deref().map(parse_list).transpose()?,
        modes: c.modes,
        zeta: c.zeta.as_deref().map(parse_vec3).transpose()?,
        period: c.period,
        seed: c.seed,
        threads: c.threads,
    })
}

fn run(cli: Cli) -> Outcome {
    let o = overrides(&cli.common).map_err(Failure::Usage)?;
    let cfg = RunConfig::load(cli.common.config.as_deref(), &o).map_err(Failure::Usage)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| Failure::Run(e.to_string()))?;
    }
    let out = cli.common.out.as_deref();
    match cli.command {
        Command::Kernels(KernelsCmd::Eval { kernel, x, k }) => {
            let x = parse_vec3(&x).map_err(Failure::Usage)?;
            emit(out, &kernel_eval(&cfg, kernel, &x, k).map_err(run_err)?)?;
            Ok(true)
        }
        Command::Kernels(KernelsCmd::Verify { suite }) => {
            let reports = verify(&cfg, suite).map_err(run_err)?;
            let pass = reports.iter().all(|r| r.pass());
            for r in &reports {
                for c in &r.checks {
                    eprintln!("[{}] {}: {}: {:.4e} (target {:.4e}, tol {:.1e})", if c.pass { "PASS" } else { "FAIL" }, r.suite, c.name, c.value, c.target, c.tolerance);
                }
            }
            emit(out, &json!({ "pass": pass, "seed": cfg.seed, "suites": reports }))?;
            Ok(pass)
        }
        Command::Solve(SolveCmd::Exterior { eval, t }) => {
            let x = parse_vec3(&eval).map_err(Failure::Usage)?;
            emit(out, &solve_exterior_cmd(&cfg, &x, t).map_err(run_err)?)?;
            Ok(true)
        }
        Command::Solve(SolveCmd::Truncated { eval, t, radius }) => {
            let x = parse_vec3(&eval).map_err(Failure::Usage)?;
            let r = radius.or(cfg.study.radii.first().copied()).ok_or_else(|| Failure::Usage("no radius".into()))?;
            emit(out, &solve_truncated_cmd(&cfg, r, &x, t).map_err(run_err)?)?;
            Ok(true)
        }
        Command::Study(StudyCmd::Truncation) => {
            cfg.study.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let result = run_truncation_study(&cfg.study).map_err(run_err)?;
            write_study(&cfg, &result)?;
            let ok = result.rows.iter().all(|r| r.failure.is_none() && r.energy_holds) && result.bound_holds;
            Ok(ok)
        }
        Command::Study(StudyCmd::FluxDichotomy) => {
            let rep = flux_dichotomy_study(&cfg.study, &cfg.decay_radii, cfg.dichotomy_sweeps).map_err(run_err)?;
            let pass = rep.constant.pass && rep.oscillating.pass;
            let path = cfg.out.join("flux_dichotomy.json");
            write_json(&path, &json!({ "config": cfg, "report": rep, "pass": pass }))?;
            eprintln!(
                "p_perp slope: constant flux {:.3} (predicted {}), oscillating flux {:.3} (predicted {})",
                rep.constant.p_perp, rep.constant.predicted_p_perp, rep.oscillating.p_perp, rep.oscillating.predicted_p_perp
            );
            Ok(pass)
        }
        Command::Ode(OdeCmd::BlockVsStep { systems }) => {
            let (worst, details) = block_vs_step(cfg.seed, systems).map_err(run_err)?;
            let pass = worst <= 1e-6;
            emit(out, &json!({ "seed": cfg.seed, "max_relative_error": worst, "systems": details, "pass": pass }))?;
            Ok(pass)
        }
    }
}

fn run_err(e: tposeen::Error) -> Failure {
    Failure::Run(e.to_string())
}

fn emit(out: Option<&Path>, v: &Value) -> Result<(), Failure> {
    match out {
        Some(p) => write_json(p, v),
        None => {
            let text = serde_json::to_string_pretty(v).map_err(|e| Failure::Run(e.to_string()))?;
            // A closed pipe downstream is not an error of the run.
            let _ = writeln!(std::io::stdout(), "{text}");
            Ok(())
        }
    }
}

fn write_json(path: &Path, v: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Failure::Run(e.to_string()))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Run(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))
}

fn complex_matrix(m: &CMat3) -> Value {
    json!((0..3).map(|i| (0..3).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn complex_vector(v: &CVec3) -> Value {
    json!(v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
}

fn kernel_value(v: &KernelValue) -> Value {
    json!({ "velocity": complex_matrix(&v.velocity), "pressure": complex_vector(&v.pressure) })
}

fn kernel_eval(cfg: &RunConfig, kind: KernelKind, x: &Vec3, k: i64) -> tposeen::Result<Value> {
    let zeta = cfg.study.zeta;
    Ok(match kind {
        KernelKind::Laplace => json!({ "kernel": "laplace", "x": x.as_slice(), "value": laplace_e(x)? }),
        KernelKind::Stokeslet => json!({ "kernel": "stokeslet", "x": x.as_slice(), "value": kernel_value(&stokeslet(x)?) }),
        KernelKind::Oseen => json!({ "kernel": "oseen", "x": x.as_slice(), "zeta": zeta.as_slice(), "value": kernel_value(&oseenlet_steady(x, &zeta)?) }),
        KernelKind::Mode => {
            let m = ModeSpec::new(k, cfg.study.period, zeta);
            let v = oseenlet_mode(x, &m, &NewtonianPotentialGrid::enclosing(x.norm()))?;
            json!({ "kernel": "mode", "k": k, "x": x.as_slice(), "zeta": zeta.as_slice(), "period": cfg.study.period, "value": kernel_value(&v) })
        }
    })
}

/// 100 points with 0.5 ≤ |x| ≤ 20 from the seed.
fn sample_points(seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..100)
        .map(|_| {
            let z: f64 = rng.gen_range(-1.0..1.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let r: f64 = rng.gen_range(0.5..20.0);
            let s = (1.0 - z * z).sqrt();
            Vec3::new(s * phi.cos(), s * phi.sin(), z) * r
        })
        .collect()
}

fn verify(cfg: &RunConfig, suite: Suite) -> tposeen::Result<Vec<SuiteReport>> {
    let zeta = cfg.study.zeta;
    let period = cfg.study.period;
    let want = |s: Suite| suite == Suite::All || suite == s;
    let mut out = Vec::new();
    if want(Suite::Exactness) {
        out.push(exactness_suite()?);
    }
    if want(Suite::Solenoidal) {
        out.push(solenoidal_suite(&sample_points(cfg.seed), &zeta, period)?);
    }
    if want(Suite::Decay) {
        out.push(decay_suite(&zeta, period)?);
    }
    if want(Suite::SurfaceLaw) {
        out.push(surface_law_suite(&zeta)?);
    }
    if want(Suite::ModeOracle) {
        out.push(mode_oracle_suite(period)?);
    }
    Ok(out)
}

fn real_sample(s: &RealSample) -> Value {
    json!({ "u": s.u.as_slice(), "p": s.p })
}

fn manufactured(cfg: &RunConfig) -> tposeen::Result<(ManufacturedFlow, BoundaryDataModes)> {
    let params = cfg.study.params()?;
    let flow = ManufacturedFlow::new(&params, &cfg.study.body(), cfg.study.data, cfg.study.amplitude);
    let data = boundary_data(&cfg.study, &flow)?;
    Ok((flow, data))
}

fn solve_exterior_cmd(cfg: &RunConfig, x: &Vec3, t: f64) -> tposeen::Result<Value> {
    let (flow, _) = manufactured(cfg)?;
    let quad = SphereQuadrature::new(20, cfg.study.zeta);
    let data = BoundaryDataModes::from_field(&flow, &cfg.study.body(), &quad)?;
    let sol = solve_exterior(&data, &flow.params, &cfg.exterior, None)?;
    Ok(json!({
        "x": x.as_slice(), "t": t,
        "solution": real_sample(&sol.sample(t, x)?),
        "manufactured": real_sample(&flow.sample(t, x)?),
        "boundary_residual": sol.max_residual(),
    }))
}

fn solve_truncated_cmd(cfg: &RunConfig, radius: f64, x: &Vec3, t: f64) -> tposeen::Result<Value> {
    let (flow, data) = manufactured(cfg)?;
    let problem = TruncatedProblem::new(flow.params.clone(), radius, data, cfg.study.disc.clone())?;
    let sol = solve_truncated_linear(&problem)?;
    Ok(json!({
        "x": x.as_slice(), "t": t, "radius": radius,
        "solution": real_sample(&sol.sample(t, x)?),
        "exterior": real_sample(&flow.sample(t, x)?),
        "sigma_residual": sol.max_sigma_residual(),
        "abc_residual": sol.max_abc_residual(),
    }))
}

pub const CSV_HEADER: &str = "R,err_grad,err_bdry,abc_residual,energy_slack";

fn study_csv(cfg: &RunConfig, r: &StudyResult) -> String {
    let mut s = format!(
        "# tposeen truncation study v1; K={} zeta={:?} period={} collar={} r_b; fit slope={}\n{CSV_HEADER}\n",
        cfg.study.kmax,
        cfg.study.zeta.as_slice(),
        cfg.study.period,
        cfg.study.collar,
        r.fit.as_ref().map_or("n/a".to_string(), |f| format!("{:.4}", f.slope)),
    );
    for row in &r.rows {
        s.push_str(&format!(
            "{},{:.10e},{:.10e},{:.6e},{:.6e}\n",
            row.radius, row.err_grad, row.err_bdry, row.abc_residual, row.energy_slack
        ));
    }
    s
}

fn write_study(cfg: &RunConfig, r: &StudyResult) -> Result<(), Failure> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Failure::Run(format!("{}: {e}", cfg.out.display())))?;
    let csv = cfg.out.join("study.csv");
    std::fs::write(&csv, study_csv(cfg, r)).map_err(|e| Failure::Run(format!("{}: {e}", csv.display())))?;
    write_json(&cfg.out.join("study.json"), &json!({ "config": cfg, "result": r }))?;
    for row in &r.rows {
        eprintln!(
            "R={:>6}: err_grad {:.4e} err_bdry {:.4e} abc {:.2e} slack {:.2e}{}",
            row.radius,
            row.err_grad,
            row.err_bdry,
            row.abc_residual,
            row.energy_slack,
            row.failure.as_ref().map_or(String::new(), |f| format!(" FAILED: {f}"))
        );
    }
    if let Some(f) = &r.fit {
        eprintln!("fitted slope {:.3}, bound constant {:.4}, bound holds: {}", f.slope, r.bound_constant, r.bound_holds);
    }
    Ok(())
}

#[derive(Serialize)]
struct OdeComparison {
    relative_error: f64,
    min_eigenvalue: f64,
}

/// Random SPD systems (M = 4, K = 6): block solve against 50 periods of RK4
/// with step 𝒯/2048.
fn block_vs_step(seed: u64, systems: usize) -> tposeen::Result<(f64, Vec<OdeComparison>)> {
    let (m, kmax, period) = (4, 6, 2.0 * std::f64::consts::PI);
    let basis = TimeFourierBasis::new(period, kmax)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for _ in 0..systems {
        let b = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
        let a = &b * b.transpose() + DMatrix::identity(m, m) * 0.5;
        let mut v = || DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let g = PeriodicCoefficients {
            mean: v(),
            harmonics: (0..kmax).map(|_| (v(), v())).collect(),
        };
        let sol = solve_periodic_ode(&a, &g, period)?;
        let steps = 2048;
        let path = periodic_state_by_stepping(&a, &g, &basis, 50, steps);
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for (j, y) in path.iter().enumerate().step_by(16) {
            let want = sol.eval(&basis, period * j as f64 / steps as f64);
            num = num.max((y - &want).norm());
            den = den.max(want.norm());
        }
        let rel = num / den;
        worst = worst.max(rel);
        details.push(OdeComparison {
            relative_error: rel,
            min_eigenvalue: a.symmetric_eigenvalues().min(),
        });
    }
    Ok((worst, details))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_points_are_reproducible_and_in_range() {
        let a = sample_points(3);
        assert_eq!(a, sample_points(3));
        assert_ne!(a, sample_points(4));
        assert!(a.iter().all(|x| (0.5..=20.0).contains(&x.norm())));
    }

    #[test]
    fn block_solve_matches_stepping() {
        let (worst, _) = block_vs_step(11, 2).unwrap();
        assert!(worst < 1e-6, "{worst}");
    }
}
