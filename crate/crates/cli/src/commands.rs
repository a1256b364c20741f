use std::path::{Path, PathBuf};
use std::sync::Arc;

use mfg_core::analysis::{
    check_monotonicity_inequality, rough_rate_verdicts, run_convergence_study, smooth_rate_verdicts, solve_level,
    ErrorColumn, ErrorRecord, MeshFamily, Protocol, StabilizationChoice, Verdict,
};
use mfg_core::fespace::P1Space;
use mfg_core::hamiltonian::{check_gradient, check_semismooth_bound};
use mfg_core::mesh::{Mesh2D, MeshQualityReport};
use mfg_core::problem::MfgProblem;
use mfg_core::solver::{MfgSolver, OuterIteration, SolverConfig};
use mfg_core::stabilization::{verify_h1, verify_h2_dmp_report, StabilizationKind, DMP_TOL};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

const GRADIENT_TOL: f64 = 1e-5;
const MONOTONICITY_TOL: f64 = 1e-9;
const SEMISMOOTH_GROWTH: f64 = 2.0;
const QUASI_OPTIMALITY_BOUND: f64 = 50.0;

/// A resolved configuration.
pub struct Context {
    pub cfg: RunConfig,
    pub hash: String,
    pub family: MeshFamily,
    pub problem: MfgProblem,
    pub choice: StabilizationChoice,
    pub solver: SolverConfig,
}

impl Context {
    pub fn new(cfg: RunConfig, base_dir: PathBuf, allow_unstabilized: bool) -> Result<Self, CliError> {
        let (family, domain) = cfg.family(&base_dir)?;
        let problem = cfg.problem(domain)?;
        let choice = cfg.stabilization(&family, allow_unstabilized)?;
        let solver = cfg.solver_config()?;
        cfg.levels()?;
        Ok(Self {
            hash: cfg.hash(),
            cfg,
            family,
            problem,
            choice,
            solver,
        })
    }

    fn comment(&self) -> String {
        format!("config_hash={}", self.hash)
    }

    fn out_dir(&self) -> Result<&Path, CliError> {
        let dir = self.cfg.output.dir.as_path();
        std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }

    fn meshes(&self, finest: usize) -> Result<Vec<Arc<Mesh2D>>, CliError> {
        Ok(self.family.hierarchy(finest)?)
    }
}

#[derive(Serialize)]
struct Hashed<'a, T: Serialize> {
    config_hash: &'a str,
    #[serde(flatten)]
    body: T,
}

fn to_json<T: Serialize>(ctx: &Context, body: T) -> String {
    let mut s = serde_json::to_string_pretty(&Hashed {
        config_hash: &ctx.hash,
        body,
    })
    .expect("report serializes");
    s.push('\n');
    s
}

fn write_json<T: Serialize>(ctx: &Context, name: &str, body: T) -> Result<(), CliError> {
    let path = ctx.out_dir()?.join(name);
    std::fs::write(&path, to_json(ctx, body)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn choice_name(choice: StabilizationChoice, quality: &MeshQualityReport) -> &'static str {
    match choice {
        StabilizationChoice::Auto if quality.acute_theta > 0.0 => "acute",
        StabilizationChoice::Auto | StabilizationChoice::Xz { .. } => "xz",
        StabilizationChoice::Acute { .. } => "acute",
        StabilizationChoice::None => "none",
    }
}

#[derive(Serialize)]
struct MeshCheck {
    level: usize,
    num_vertices: usize,
    num_triangles: usize,
    #[serde(flatten)]
    quality: MeshQualityReport,
    stabilization: &'static str,
    condition_satisfied: bool,
}

pub fn check_mesh(ctx: &Context) -> Result<(), CliError> {
    let level = ctx.cfg.finest_level()?;
    let meshes = ctx.meshes(level)?;
    let mesh = &meshes[level];
    let quality = mesh.quality_report()?;
    let stabilization = choice_name(ctx.choice, &quality);
    let condition_satisfied = match stabilization {
        "xz" => quality.xz_satisfied,
        "acute" => quality.acute_theta > 0.0,
        _ => true,
    };
    print!(
        "{}",
        to_json(
            ctx,
            MeshCheck {
                level,
                num_vertices: mesh.num_vertices(),
                num_triangles: mesh.num_triangles(),
                quality,
                stabilization,
                condition_satisfied,
            }
        )
    );
    if condition_satisfied {
        Ok(())
    } else {
        Err(CliError::Verification(format!("mesh condition for {stabilization} stabilization fails")))
    }
}

#[derive(Serialize, Default)]
struct SolveTelemetry<'a> {
    level: usize,
    ndof: usize,
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    stabilization: Option<StabilizationKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tensor_zero: Option<bool>,
    outer_iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    newton_iters_total: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual1_dual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual2_dual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_nodal_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    damping_downgraded: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_increases: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<&'a [OuterIteration]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_history: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub fn solve(ctx: &Context) -> Result<(), CliError> {
    let level = ctx.cfg.finest_level()?;
    let meshes = ctx.meshes(level)?;
    let mesh = &meshes[level];
    let ndof = P1Space::new(Arc::clone(mesh)).ndof();
    match solve_level(mesh, &ctx.problem, ctx.choice, &ctx.solver) {
        Ok(s) => {
            let dir = ctx.out_dir()?;
            let sol = &s.solution;
            sol.u.write_csv(dir.join("solution_u.csv"), Some(&ctx.comment()))?;
            sol.m.write_csv(dir.join("solution_m.csv"), Some(&ctx.comment()))?;
            let t = &sol.telemetry;
            write_json(
                ctx,
                "telemetry.json",
                SolveTelemetry {
                    level,
                    ndof,
                    converged: true,
                    stabilization: Some(s.tensor.kind),
                    tensor_zero: Some(s.tensor.is_zero()),
                    outer_iters: sol.outer_iters,
                    newton_iters_total: Some(sol.newton_iters_total),
                    residual1_dual: Some(sol.residual1_dual),
                    residual2_dual: Some(sol.residual2_dual),
                    min_nodal_m: Some(sol.m.min_nodal()),
                    damping_downgraded: Some(t.damping_downgraded),
                    residual_increases: Some(t.residual_increases),
                    iterations: Some(&t.iterations),
                    ..Default::default()
                },
            )
        }
        Err(e) => {
            if let mfg_core::Error::NonConvergence { iterations, history, .. } = &e {
                write_json(
                    ctx,
                    "telemetry.json",
                    SolveTelemetry {
                        level,
                        ndof,
                        converged: false,
                        outer_iters: *iterations,
                        residual_history: Some(history),
                        error: Some(e.to_string()),
                        ..Default::default()
                    },
                )?;
            }
            Err(e.into())
        }
    }
}

#[derive(Serialize)]
struct EocColumns {
    u_h1: Vec<Option<f64>>,
    m_h1: Vec<Option<f64>>,
    m_l2: Vec<Option<f64>>,
    u_l2: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct ConvergenceReport<'a> {
    config: &'a RunConfig,
    protocol: Option<Protocol>,
    records: &'a [ErrorRecord],
    eoc: Option<EocColumns>,
    verdicts: Vec<Verdict>,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn convergence_verdicts(problem: &MfgProblem, records: &[ErrorRecord], table_verdicts: Vec<Verdict>) -> Vec<Verdict> {
    let mut verdicts = table_verdicts;
    if problem.exact.is_some() {
        for r in records {
            let ratio = r.quasi_optimality_ratio.unwrap_or(f64::NAN);
            verdicts.push(Verdict::window(
                format!("quasi_optimality_ratio_level_{}", r.level),
                ratio,
                0.0,
                QUASI_OPTIMALITY_BOUND,
            ));
        }
    }
    if problem.source.nonneg_certified {
        for r in records {
            verdicts.push(Verdict::window(
                format!("min_nodal_m_level_{}", r.level),
                r.min_nodal_m,
                -DMP_TOL,
                f64::INFINITY,
            ));
        }
    }
    verdicts
}

pub fn convergence(ctx: &Context) -> Result<(), CliError> {
    let levels = ctx.cfg.levels()?;
    if levels.len() < 3 {
        return Err(CliError::Input(format!(
            "a convergence study needs at least three levels, got {levels:?}"
        )));
    }
    let finest = *levels.last().unwrap();
    let mut problem = ctx.problem.clone();
    if problem.exact.is_some() {
        let meshes = ctx.meshes(finest)?;
        problem.certify_source_nonnegativity(&P1Space::new(Arc::clone(&meshes[finest])));
    }
    let offset = ctx.cfg.convergence.reference_offset;
    let study = match run_convergence_study(&problem, &ctx.family, &levels, ctx.choice, &ctx.solver, offset) {
        Ok(s) => s,
        Err(e) => {
            let err = CliError::from(e);
            write_json(
                ctx,
                "report.json",
                ConvergenceReport {
                    config: &ctx.cfg,
                    protocol: None,
                    records: &[],
                    eoc: None,
                    verdicts: Vec::new(),
                    pass: false,
                    error: Some(err.message().to_string()),
                },
            )?;
            return Err(err);
        }
    };
    let table = &study.table;
    let table_verdicts = match (study.protocol, ctx.cfg.problem.kind.as_str()) {
        (Protocol::Exact, _) => smooth_rate_verdicts(table),
        (Protocol::Reference, "rough_density") => rough_rate_verdicts(table),
        _ => Vec::new(),
    };
    let verdicts = convergence_verdicts(&problem, &table.records, table_verdicts);
    let pass = verdicts.iter().all(|v| v.pass);
    let dir = ctx.out_dir()?;
    std::fs::write(dir.join("eoc.csv"), table.to_csv(Some(&ctx.comment())))?;
    write_json(
        ctx,
        "report.json",
        ConvergenceReport {
            config: &ctx.cfg,
            protocol: Some(study.protocol),
            records: &table.records,
            eoc: Some(EocColumns {
                u_h1: table.eocs(ErrorColumn::UH1),
                m_h1: table.eocs(ErrorColumn::MH1),
                m_l2: table.eocs(ErrorColumn::ML2),
                u_l2: table.eocs(ErrorColumn::UL2),
            }),
            verdicts,
            pass,
            error: None,
        },
    )?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Verification("convergence verdicts failed; see report.json".into()))
    }
}

#[derive(Serialize)]
struct Suite {
    name: &'static str,
    pass: bool,
    skipped: bool,
    detail: Value,
}

impl Suite {
    fn from_result(name: &'static str, r: Result<(bool, Value), mfg_core::Error>) -> Self {
        match r {
            Ok((pass, detail)) => Self {
                name,
                pass,
                skipped: false,
                detail,
            },
            Err(e) => Self {
                name,
                pass: false,
                skipped: false,
                detail: json!({ "error": e.to_string() }),
            },
        }
    }

    fn skipped(name: &'static str, reason: &str) -> Self {
        Self {
            name,
            pass: true,
            skipped: true,
            detail: json!({ "reason": reason }),
        }
    }
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    config: &'a RunConfig,
    level: usize,
    stabilization: StabilizationKind,
    suites: Vec<Suite>,
    pass: bool,
}

pub fn verify(ctx: &Context) -> Result<(), CliError> {
    let v = &ctx.cfg.verify;
    let level = v.level;
    let meshes = ctx.meshes(level)?;
    let mesh = &meshes[level];
    // configuration errors in the stabilization surface before any suite runs
    let tensor = ctx.choice.build(mesh, &ctx.problem)?;
    let space = Arc::new(P1Space::new(Arc::clone(mesh)));
    let spec = &ctx.problem.hamiltonian;
    let l_h = spec.l_h();
    let seed = ctx.cfg.seed;
    let mut suites = Vec::new();

    suites.push(Suite::from_result(
        "h1_positive_semidefinite",
        match verify_h1(&tensor, mesh) {
            Ok(r) => Ok((true, json!(r))),
            Err(mfg_core::Error::Invariant(msg)) => Ok((false, json!({ "violation": msg }))),
            Err(e) => Err(e),
        },
    ));

    suites.push(Suite::from_result(
        "h2_discrete_maximum_principle",
        verify_h2_dmp_report(&space, ctx.problem.nu, &tensor, l_h, v.trials, seed).map(|r| (r.passed(), json!(r))),
    ));

    suites.push(Suite::from_result(
        "monotonicity_inequality",
        (|| {
            let solver = MfgSolver::new(Arc::clone(&space), ctx.problem.clone(), tensor.clone(), ctx.solver.clone())?;
            let solution = solver.solve()?;
            let r = check_monotonicity_inequality(&solver, &solution, v.pairs, seed.wrapping_add(1))?;
            Ok((r.worst_slack >= -MONOTONICITY_TOL, json!(r)))
        })(),
    ));

    if spec.is_smooth() {
        suites.push(Suite::from_result(
            "hamiltonian_gradient",
            check_gradient(spec, v.samples, seed.wrapping_add(2))
                .map(|worst| (worst < GRADIENT_TOL, json!({ "worst_relative_error": worst, "tolerance": GRADIENT_TOL }))),
        ));
        suites.push(Suite::from_result(
            "semismooth_remainder",
            (|| {
                if level == 0 {
                    return Err(mfg_core::Error::Config("the remainder check compares two levels; use verify.level ≥ 1".into()));
                }
                let coarse = Arc::new(P1Space::new(Arc::clone(&meshes[level - 1])));
                let pairs = v.pairs.clamp(3, 12);
                let r0 = check_semismooth_bound(spec, &coarse, pairs, seed.wrapping_add(3))?;
                let r1 = check_semismooth_bound(spec, &space, pairs, seed.wrapping_add(3))?;
                let growth = r1 / r0;
                let pass = r0.is_finite() && r1.is_finite() && growth <= SEMISMOOTH_GROWTH;
                Ok((pass, json!({ "ratio_coarse": r0, "ratio_fine": r1, "growth": growth, "max_growth": SEMISMOOTH_GROWTH })))
            })(),
        ));
    } else {
        let reason = "hamiltonian is not differentiable";
        suites.push(Suite::skipped("hamiltonian_gradient", reason));
        suites.push(Suite::skipped("semismooth_remainder", reason));
    }

    let pass = suites.iter().all(|s| s.pass);
    write_json(
        ctx,
        "report.json",
        VerifyReport {
            config: &ctx.cfg,
            level,
            stabilization: tensor.kind,
            suites,
            pass,
        },
    )?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Verification("verification suites failed; see report.json".into()))
    }
}
