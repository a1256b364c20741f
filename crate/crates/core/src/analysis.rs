//! Error norms, nested injection, EOC tables, convergence studies and the
//! verdicts built on them.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::fespace::{bary_to_point, quadrature, P1Function, P1Space, DEFAULT_QUADRATURE_DEGREE};
use crate::mesh::{generate_acute_rhombus, generate_structured_square, hierarchy, Mesh2D};
use crate::problem::MfgProblem;
use crate::solver::{DiscreteSolution, MfgSolver, SolverConfig};
use crate::stabilization::{build_acute_tensor, build_xz_tensor, StabilizationTensor, DEFAULT_MU, DMP_TOL};
use crate::{Error, Point, Result, Vec2};

/// `‖v − f‖_Ω` by degree-4 quadrature.
pub fn error_l2(v: &P1Function, exact: &dyn Fn(Point) -> f64) -> f64 {
    let space = v.space();
    let mesh = space.mesh();
    let rule = quadrature(DEFAULT_QUADRATURE_DEGREE).expect("default degree is supported");
    let mut sum = 0.0;
    for k in 0..space.num_elements() {
        let pts = mesh.triangle_points(k);
        let area = space.element_area(k);
        for (q, w) in rule.points.iter().zip(&rule.weights) {
            let e = exact(bary_to_point(&pts, *q)) - v.eval(k, *q);
            sum += w * area * e * e;
        }
    }
    sum.sqrt()
}

/// `|v − f|_{H¹}` by degree-4 quadrature.
pub fn error_h1_seminorm(v: &P1Function, exact_grad: &dyn Fn(Point) -> Vec2) -> f64 {
    let space = v.space();
    let mesh = space.mesh();
    let rule = quadrature(DEFAULT_QUADRATURE_DEGREE).expect("default degree is supported");
    let mut sum = 0.0;
    for k in 0..space.num_elements() {
        let pts = mesh.triangle_points(k);
        let area = space.element_area(k);
        let g = v.grad_on_element(k);
        for (q, w) in rule.points.iter().zip(&rule.weights) {
            let ge = exact_grad(bary_to_point(&pts, *q));
            sum += w * area * ((ge[0] - g[0]).powi(2) + (ge[1] - g[1]).powi(2));
        }
    }
    sum.sqrt()
}

/// Full `H¹` norm of `v − f`.
pub fn error_h1(v: &P1Function, exact: &dyn Fn(Point) -> f64, exact_grad: &dyn Fn(Point) -> Vec2) -> f64 {
    error_l2(v, exact).hypot(error_h1_seminorm(v, exact_grad))
}

/// `(‖v‖_Ω, |v|_{H¹})` of a discrete function, computed exactly.
pub fn p1_norms(v: &P1Function) -> (f64, f64) {
    let space = v.space();
    let (mut l2, mut semi) = (0.0, 0.0);
    for k in 0..space.num_elements() {
        let a = space.element_area(k);
        let x = v.local_values(k);
        let s: f64 = x.iter().sum();
        let sq: f64 = x.iter().map(|t| t * t).sum();
        l2 += a / 12.0 * (sq + s * s);
        let g = v.grad_on_element(k);
        semi += a * (g[0] * g[0] + g[1] * g[1]);
    }
    (l2.max(0.0).sqrt(), semi.sqrt())
}

/// Exact representation of a coarse P1 function on a refinement of its mesh.
pub fn inject(coarse: &P1Function, fine_space: &Arc<P1Space>) -> Result<P1Function> {
    let coarse_mesh: &Mesh2D = coarse.space().mesh();
    let mut chain: Vec<&Mesh2D> = Vec::new();
    let mut current: &Mesh2D = fine_space.mesh();
    while !std::ptr::eq(current, coarse_mesh) {
        chain.push(current);
        current = current
            .parent()
            .ok_or_else(|| Error::Config("meshes are not nested: no refinement path to the coarse mesh".into()))?;
    }
    let mut values = coarse.vertex_values();
    for mesh in chain.iter().rev() {
        let lineage = mesh.lineage().expect("refined meshes carry lineage");
        values = lineage
            .vertex_parents
            .iter()
            .map(|&[a, b]| if a == b { values[a] } else { 0.5 * (values[a] + values[b]) })
            .collect();
    }
    let coeffs = (0..fine_space.ndof()).map(|i| values[fine_space.vertex_of_dof(i)]).collect();
    Ok(P1Function::new(Arc::clone(fine_space), coeffs))
}

/// `(‖v_c − v_f‖_Ω, ‖v_c − v_f‖_{H¹})` with `v_c` injected into the fine space.
pub fn error_vs_reference(coarse: &P1Function, fine: &P1Function) -> Result<(f64, f64)> {
    let injected = inject(coarse, fine.space())?;
    let diff: Vec<f64> = injected.coeffs().iter().zip(fine.coeffs()).map(|(a, b)| a - b).collect();
    let (l2, semi) = p1_norms(&P1Function::new(Arc::clone(fine.space()), diff));
    Ok((l2, l2.hypot(semi)))
}

/// `‖D_k ∇v‖_Ω` for a discrete function `v`.
pub fn stabilization_term(tensor: &StabilizationTensor, v: &P1Function) -> f64 {
    let space = v.space();
    let mut sum = 0.0;
    for k in 0..space.num_elements() {
        let d = tensor.per_element[k];
        let g = v.grad_on_element(k);
        let dg = [d[0][0] * g[0] + d[0][1] * g[1], d[1][0] * g[0] + d[1][1] * g[1]];
        sum += space.element_area(k) * (dg[0] * dg[0] + dg[1] * dg[1]);
    }
    sum.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Exact,
    Reference,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub level: usize,
    pub h: f64,
    pub ndof: usize,
    pub err_u_h1: f64,
    pub err_m_h1: f64,
    pub err_m_l2: f64,
    pub err_u_l2: f64,
    pub residual1_dual: f64,
    pub residual2_dual: f64,
    pub stab_term_u: f64,
    pub stab_term_m: f64,
    pub outer_iters: usize,
    pub newton_iters: usize,
    pub tensor_zero: bool,
    pub min_nodal_m: f64,
    /// Total H¹ error over interpolation error plus stabilization terms;
    /// only with an exact solution.
    pub quasi_optimality_ratio: Option<f64>,
}

/// `log(e_{L−1}/e_L) / log(h_{L−1}/h_L)`.
pub fn eoc(e_prev: f64, e: f64, h_prev: f64, h: f64) -> f64 {
    (e_prev / e).ln() / (h_prev / h).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorColumn {
    UH1,
    MH1,
    ML2,
    UL2,
    StabU,
    StabM,
}

impl ErrorColumn {
    fn of(self, r: &ErrorRecord) -> f64 {
        match self {
            Self::UH1 => r.err_u_h1,
            Self::MH1 => r.err_m_h1,
            Self::ML2 => r.err_m_l2,
            Self::UL2 => r.err_u_l2,
            Self::StabU => r.stab_term_u,
            Self::StabM => r.stab_term_m,
        }
    }
}

pub const EOC_CSV_HEADER: &str =
    "level,h,ndof,err_u_H1,eoc_u_H1,err_m_H1,eoc_m_H1,err_m_L2,eoc_m_L2,err_u_L2,eoc_u_L2,stab_u,stab_m,res1,res2,outer_iters";

#[derive(Debug, Clone, Serialize, Default)]
pub struct EocTable {
    pub records: Vec<ErrorRecord>,
}

impl EocTable {
    /// EOC of a column at every record; `None` for the first.
    pub fn eocs(&self, column: ErrorColumn) -> Vec<Option<f64>> {
        let mut out = vec![None];
        for w in self.records.windows(2) {
            out.push(Some(eoc(column.of(&w[0]), column.of(&w[1]), w[0].h, w[1].h)));
        }
        out.truncate(self.records.len());
        out
    }

    /// EOC at the finest increment.
    pub fn finest_eoc(&self, column: ErrorColumn) -> Option<f64> {
        self.eocs(column).last().copied().flatten()
    }

    /// Least-squares slope of `log column` against `log h`.
    pub fn fitted_slope(&self, column: ErrorColumn) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .records
            .iter()
            .filter(|r| column.of(r) > 0.0)
            .map(|r| (r.h.ln(), column.of(r).ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }

    pub fn to_csv(&self, header_comment: Option<&str>) -> String {
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.16e}"));
        let cols = [ErrorColumn::UH1, ErrorColumn::MH1, ErrorColumn::ML2, ErrorColumn::UL2].map(|c| self.eocs(c));
        let mut s = String::new();
        if let Some(c) = header_comment {
            let _ = writeln!(s, "# {c}");
        }
        s.push_str(EOC_CSV_HEADER);
        s.push('\n');
        for (i, r) in self.records.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{:.16e},{},{:.16e},{},{:.16e},{},{:.16e},{},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.level,
                r.h,
                r.ndof,
                r.err_u_h1,
                fmt(cols[0][i]),
                r.err_m_h1,
                fmt(cols[1][i]),
                r.err_m_l2,
                fmt(cols[2][i]),
                r.err_u_l2,
                fmt(cols[3][i]),
                r.stab_term_u,
                r.stab_term_m,
                r.residual1_dual,
                r.residual2_dual,
                r.outer_iters
            );
        }
        s
    }
}

/// Families of nested meshes: a base mesh and its red refinements.
#[derive(Debug, Clone)]
pub enum MeshFamily {
    /// Structured unit square with 2×2 cells at level 0.
    XzSquare,
    /// Equilateral rhombus with side 1/2 triangles at level 0.
    AcuteRhombus,
    Custom(Mesh2D),
}

impl MeshFamily {
    pub fn base(&self) -> Result<Mesh2D> {
        match self {
            Self::XzSquare => generate_structured_square(2),
            Self::AcuteRhombus => generate_acute_rhombus(2),
            Self::Custom(m) => {
                if m.lineage().is_some() {
                    return Err(Error::Config("custom family base must be an unrefined mesh".into()));
                }
                Ok(m.clone())
            }
        }
    }

    /// Meshes at levels `0..=finest`.
    pub fn hierarchy(&self, finest: usize) -> Result<Vec<Arc<Mesh2D>>> {
        Ok(hierarchy(self.base()?, finest))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StabilizationChoice {
    Auto,
    Xz { omega_factor: Option<f64> },
    Acute { mu: f64 },
    None,
}

impl StabilizationChoice {
    /// `Auto` becomes the edge tensor on XZ meshes that are not strictly
    /// acute, and artificial diffusion on strictly acute meshes.
    pub fn build(&self, mesh: &Mesh2D, problem: &MfgProblem) -> Result<StabilizationTensor> {
        let l_h = problem.hamiltonian.l_h();
        match *self {
            Self::Auto => {
                if mesh.check_acute()? > 0.0 {
                    build_acute_tensor(mesh, l_h, problem.nu, DEFAULT_MU)
                } else {
                    build_xz_tensor(mesh, l_h, None)
                }
            }
            Self::Xz { omega_factor } => build_xz_tensor(mesh, l_h, omega_factor),
            Self::Acute { mu } => build_acute_tensor(mesh, l_h, problem.nu, mu),
            Self::None => Ok(StabilizationTensor::none(mesh)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LevelSolve {
    pub level: usize,
    pub space: Arc<P1Space>,
    pub tensor: StabilizationTensor,
    pub solution: DiscreteSolution,
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub protocol: Protocol,
    pub table: EocTable,
    pub levels: Vec<LevelSolve>,
    /// Solves above the finest compared level, used only as references.
    pub references: Vec<LevelSolve>,
}

fn annotate(level: usize, e: Error) -> Error {
    match e {
        Error::NonConvergence { .. } | Error::Config(_) => e,
        Error::Solver(msg) => Error::Solver(format!("level {level}: {msg}")),
        Error::Numeric(msg) => Error::Numeric(format!("level {level}: {msg}")),
        other => other,
    }
}

/// Builds the stabilization, solves, and returns everything for one level.
pub fn solve_level(
    mesh: &Arc<Mesh2D>,
    problem: &MfgProblem,
    stabilization: StabilizationChoice,
    cfg: &SolverConfig,
) -> Result<LevelSolve> {
    let level = mesh.level();
    let space = Arc::new(P1Space::new(Arc::clone(mesh)));
    let tensor = stabilization.build(mesh, problem)?;
    let solver = MfgSolver::new(Arc::clone(&space), problem.clone(), tensor.clone(), cfg.clone())
        .map_err(|e| annotate(level, e))?;
    let solution = solver.solve().map_err(|e| annotate(level, e))?;
    Ok(LevelSolve {
        level,
        space,
        tensor,
        solution,
    })
}

/// Solves on every requested level and tabulates errors, against the exact
/// solution when the problem has one and otherwise against the solution
/// `reference_offset` levels finer than each compared level.
pub fn run_convergence_study(
    problem: &MfgProblem,
    family: &MeshFamily,
    levels: &[usize],
    stabilization: StabilizationChoice,
    cfg: &SolverConfig,
    reference_offset: usize,
) -> Result<ConvergenceStudy> {
    if levels.len() < 2 || levels.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::Config("a convergence study needs at least two consecutive levels".into()));
    }
    let protocol = if problem.exact.is_some() {
        Protocol::Exact
    } else {
        Protocol::Reference
    };
    let first = levels[0];
    let finest = *levels.last().unwrap();
    let offset = match protocol {
        Protocol::Reference if reference_offset == 0 => {
            return Err(Error::Config("reference protocol needs a positive level offset".into()));
        }
        Protocol::Reference => reference_offset,
        Protocol::Exact => 0,
    };
    let meshes = family.hierarchy(finest + offset)?;
    let mut solves = Vec::new();
    for mesh in &meshes[first..] {
        solves.push(solve_level(mesh, problem, stabilization, cfg)?);
    }
    let mut table = EocTable::default();
    for i in 0..levels.len() {
        let reference = (protocol == Protocol::Reference).then(|| &solves[i + offset]);
        table.records.push(error_record(&solves[i], problem, reference)?);
    }
    let references = solves.split_off(levels.len());
    Ok(ConvergenceStudy {
        protocol,
        table,
        levels: solves,
        references,
    })
}

fn error_record(s: &LevelSolve, problem: &MfgProblem, reference: Option<&LevelSolve>) -> Result<ErrorRecord> {
    let sol = &s.solution;
    let (err_u_l2, err_u_h1, err_m_l2, err_m_h1, stab_u, stab_m, ratio);
    match (&problem.exact, reference) {
        (Some(exact), _) => {
            err_u_l2 = error_l2(&sol.u, &*exact.u.value);
            err_u_h1 = error_h1(&sol.u, &*exact.u.value, &*exact.u.grad);
            err_m_l2 = error_l2(&sol.m, &*exact.m.value);
            err_m_h1 = error_h1(&sol.m, &*exact.m.value, &*exact.m.grad);
            let iu = s.space.interpolate(|p| (exact.u.value)(p))?;
            let im = s.space.interpolate(|p| (exact.m.value)(p))?;
            stab_u = stabilization_term(&s.tensor, &iu);
            stab_m = stabilization_term(&s.tensor, &im);
            ratio = Some(quasi_optimality_ratio(sol, problem, &s.tensor)?);
        }
        (None, Some(r)) => {
            (err_u_l2, err_u_h1) = error_vs_reference(&sol.u, &r.solution.u)?;
            (err_m_l2, err_m_h1) = error_vs_reference(&sol.m, &r.solution.m)?;
            stab_u = stabilization_term(&s.tensor, &sol.u);
            stab_m = stabilization_term(&s.tensor, &sol.m);
            ratio = None;
        }
        (None, None) => return Err(Error::Config("no exact solution and no reference".into())),
    }
    Ok(ErrorRecord {
        level: s.level,
        h: s.space.mesh().h_max(),
        ndof: s.space.ndof(),
        err_u_h1,
        err_m_h1,
        err_m_l2,
        err_u_l2,
        residual1_dual: sol.residual1_dual,
        residual2_dual: sol.residual2_dual,
        stab_term_u: stab_u,
        stab_term_m: stab_m,
        outer_iters: sol.outer_iters,
        newton_iters: sol.newton_iters_total,
        tensor_zero: s.tensor.is_zero(),
        min_nodal_m: sol.m.min_nodal(),
        quasi_optimality_ratio: ratio,
    })
}

/// Nodal nonnegativity of the discrete density; refuses to run when the
/// source is not certified nonnegative.
pub fn verify_dmp_at_solution(solution: &DiscreteSolution, problem: &MfgProblem) -> Result<bool> {
    if !problem.source.nonneg_certified {
        return Err(Error::Config("the source is not certified nonnegative".into()));
    }
    Ok(solution.m.min_nodal() >= -DMP_TOL)
}

/// `(‖u−u_k‖_{H¹} + ‖m−m_k‖_{H¹}) / (‖u−I_k u‖_{H¹} + ‖m−I_k m‖_{H¹} +
/// ‖D_k∇I_k u‖ + ‖D_k∇I_k m‖)`, with `0/0 = 0`. The interpolation errors
/// stand in for the best-approximation errors they bound.
pub fn quasi_optimality_ratio(
    solution: &DiscreteSolution,
    problem: &MfgProblem,
    tensor: &StabilizationTensor,
) -> Result<f64> {
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::Config("quasi-optimality needs an exact solution".into()))?;
    let space = solution.u.space();
    let iu = space.interpolate(|p| (exact.u.value)(p))?;
    let im = space.interpolate(|p| (exact.m.value)(p))?;
    let num = error_h1(&solution.u, &*exact.u.value, &*exact.u.grad)
        + error_h1(&solution.m, &*exact.m.value, &*exact.m.grad);
    let den = error_h1(&iu, &*exact.u.value, &*exact.u.grad)
        + error_h1(&im, &*exact.m.value, &*exact.m.grad)
        + stabilization_term(tensor, &iu)
        + stabilization_term(tensor, &im);
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub pairs: usize,
    /// `min (rhs − lhs)` over the sampled pairs.
    pub worst_slack: f64,
}

/// Samples `(m̄, ū)` with `m̄ ≥ 0` nodally and evaluates
/// `c_F ‖m̄ − m_k‖² ≤ ⟨R¹(m̄, ū), m̄ − m_k⟩ − ⟨R²(m̄, ū), ū − u_k⟩`
/// at a discrete solution.
pub fn check_monotonicity_inequality(
    solver: &MfgSolver,
    solution: &DiscreteSolution,
    pairs: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    let sys = solver.system();
    let n = sys.ndof();
    let c_f = sys.problem().coupling.c_f();
    let mass = sys.coupling().mass();
    let (mk, uk) = (solution.m.coeffs(), solution.u.coeffs());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for pair in 0..pairs {
        let scale = [1.0, 0.1, 10.0][pair % 3];
        let m_bar: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(-1.0f64..1.0).abs()).collect();
        let u_bar: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let dm: Vec<f64> = m_bar.iter().zip(mk).map(|(a, b)| a - b).collect();
        let du: Vec<f64> = u_bar.iter().zip(uk).map(|(a, b)| a - b).collect();
        let r1 = sys.hjb_residual(&m_bar, &u_bar);
        let r2 = sys.kfp_residual(&m_bar, &u_bar);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let lhs = c_f * mass.quadratic_form(&dm);
        let rhs = dot(&r1, &dm) - dot(&r2, &du);
        worst = worst.min(rhs - lhs);
    }
    Ok(MonotonicityReport {
        pairs,
        worst_slack: worst,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn window(name: impl Into<String>, value: f64, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lower,
            upper,
            pass: value >= lower && value <= upper,
        }
    }
}

/// Acceptance windows for a smooth instance with an exact solution.
pub fn smooth_rate_verdicts(table: &EocTable) -> Vec<Verdict> {
    let get = |c| table.finest_eoc(c).unwrap_or(f64::NAN);
    vec![
        Verdict::window("eoc_u_H1", get(ErrorColumn::UH1), 0.85, 1.15),
        Verdict::window("eoc_m_H1", get(ErrorColumn::MH1), 0.85, 1.15),
        Verdict::window("eoc_u_L2", get(ErrorColumn::UL2), 1.7, 2.3),
        Verdict::window("eoc_m_L2", get(ErrorColumn::ML2), 1.7, 2.3),
    ]
}

/// Windows for the rough-density instance measured against a reference.
pub fn rough_rate_verdicts(table: &EocTable) -> Vec<Verdict> {
    let get = |c| table.finest_eoc(c).unwrap_or(f64::NAN);
    let (u, m1, m0) = (get(ErrorColumn::UH1), get(ErrorColumn::MH1), get(ErrorColumn::ML2));
    vec![
        Verdict::window("eoc_u_H1", u, 0.8, 1.2),
        Verdict::window("eoc_m_L2", m0, 0.8, 1.2),
        Verdict::window("eoc_u_H1_minus_eoc_m_H1", u - m1, 0.2, f64::INFINITY),
    ]
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::assembly::{assemble_mass, assemble_stiffness};
    use crate::mesh::{generate_structured_square, hierarchy};
    use proptest::prelude::*;

    fn spaces() -> Vec<Arc<P1Space>> {
        hierarchy(generate_structured_square(2).unwrap(), 2)
            .into_iter()
            .map(|m| Arc::new(P1Space::new(m)))
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn norms_match_matrix_forms(coeffs in prop::collection::vec(-3.0f64..3.0, 9)) {
            let space = Arc::clone(&spaces()[1]);
            let v = P1Function::new(Arc::clone(&space), coeffs.clone());
            let (l2, semi) = p1_norms(&v);
            let m = assemble_mass(&space).quadratic_form(&coeffs);
            let k = assemble_stiffness(&space).quadratic_form(&coeffs);
            prop_assert!((m - l2 * l2).abs() < 1e-12 * (1.0 + m));
            prop_assert!((k - semi * semi).abs() < 1e-10 * (1.0 + k));
        }

        #[test]
        fn injection_preserves_norms(coeffs in prop::collection::vec(-3.0f64..3.0, 9)) {
            let all = spaces();
            let coarse = P1Function::new(Arc::clone(&all[1]), coeffs);
            let fine = inject(&coarse, &all[2]).unwrap();
            let (a, b) = (p1_norms(&coarse), p1_norms(&fine));
            prop_assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
            let (e0, e1) = error_vs_reference(&coarse, &fine).unwrap();
            prop_assert!(e0 < 1e-13 && e1 < 1e-12);
        }
    }
}
