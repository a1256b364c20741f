//! Linear solves, dual norms, Newton for the HJB equation and the damped
//! Picard iteration for the coupled system.

use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{Col, Side};
use serde::Serialize;

use crate::assembly::{assemble_h1_gram, DiscreteMfg, SparseOperator};
use crate::fespace::{P1Function, P1Space};
use crate::problem::MfgProblem;
use crate::stabilization::StabilizationTensor;
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolver {
    #[default]
    DirectSparse,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub tol_outer: f64,
    pub max_outer: usize,
    pub damping: f64,
    pub tol_newton: f64,
    pub max_newton: usize,
    pub linear_solver: LinearSolver,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_outer: 1e-9,
            max_outer: 200,
            damping: 0.5,
            tol_newton: 1e-11,
            max_newton: 50,
            linear_solver: LinearSolver::DirectSparse,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tol_outer > 0.0 && self.tol_newton > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.max_outer == 0 || self.max_newton == 0 {
            return Err(Error::Config("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

fn to_col(v: &[f64]) -> Col<f64> {
    Col::from_fn(v.len(), |i| v[i])
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sparse LU factorization of a square operator.
pub struct Factorization {
    lu: Lu<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization").field("n", &self.n).finish_non_exhaustive()
    }
}

impl Factorization {
    pub fn new(op: &SparseOperator) -> Result<Self> {
        let lu = op
            .to_faer()?
            .sp_lu()
            .map_err(|e| Error::Solver(format!("LU factorization failed: {e:?}")))?;
        Ok(Self { lu, n: op.nrows() })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::Solver(format!("rhs has length {} for a {}×{} system", rhs.len(), self.n, self.n)));
        }
        if self.n == 0 {
            return Ok(Vec::new());
        }
        let x = self.lu.solve(to_col(rhs));
        let out: Vec<f64> = (0..self.n).map(|i| x[i]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("singular factorization: non-finite solution".into()));
        }
        Ok(out)
    }
}

/// Direct solve of `op x = rhs` with a residual check
/// `‖op x − rhs‖₂ ≤ 1e-10 (1 + ‖rhs‖₂)`.
pub fn solve_linear(op: &SparseOperator, rhs: &[f64]) -> Result<Vec<f64>> {
    let x = Factorization::new(op)?.solve(rhs)?;
    check_residual(op, &x, rhs)?;
    Ok(x)
}

fn check_residual(op: &SparseOperator, x: &[f64], rhs: &[f64]) -> Result<()> {
    let ax = op.matvec(x);
    let r: Vec<f64> = ax.iter().zip(rhs).map(|(a, b)| a - b).collect();
    let (res, bound) = (norm2(&r), 1e-10 * (1.0 + norm2(rhs)));
    if !(res <= bound) {
        return Err(Error::Solver(format!("linear solve residual {res:.3e} exceeds {bound:.3e}")));
    }
    Ok(())
}

/// Cholesky factorization of a Gram matrix, realizing the Riesz map of the
/// discrete space.
pub struct RieszMap {
    llt: Llt<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for RieszMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RieszMap").field("n", &self.n).finish_non_exhaustive()
    }
}

impl RieszMap {
    pub fn new(gram: &SparseOperator) -> Result<Self> {
        let llt = gram
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Solver(format!("Gram matrix is not positive definite: {e:?}")))?;
        Ok(Self { llt, n: gram.nrows() })
    }

    /// `w = Gram⁻¹ r`.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n {
            return Err(Error::Solver(format!("load has length {} for dimension {}", r.len(), self.n)));
        }
        if self.n == 0 {
            return Ok(Vec::new());
        }
        let w = self.llt.solve(to_col(r));
        Ok((0..self.n).map(|i| w[i]).collect())
    }

    /// `√(rᵀ Gram⁻¹ r)`.
    pub fn dual_norm(&self, r: &[f64]) -> Result<f64> {
        let w = self.apply(r)?;
        Ok(r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt())
    }
}

/// Dual norm of the functional with load vector `r`; factors `gram` each call.
pub fn riesz_dual_norm(gram: &SparseOperator, r: &[f64]) -> Result<f64> {
    RieszMap::new(gram)?.dual_norm(r)
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual_dual: f64,
    pub step_halvings: usize,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OuterIteration {
    pub iteration: usize,
    pub residual1_dual: f64,
    pub residual2_dual: f64,
    pub newton_iterations: usize,
    pub damping: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct Telemetry {
    pub iterations: Vec<OuterIteration>,
    pub damping_downgraded: bool,
    pub residual_increases: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub u: P1Function,
    pub m: P1Function,
    pub outer_iters: usize,
    pub newton_iters_total: usize,
    pub residual1_dual: f64,
    pub residual2_dual: f64,
    pub telemetry: Telemetry,
}

/// A discrete system together with the dual-norm machinery of its space.
#[derive(Debug)]
pub struct MfgSolver {
    system: DiscreteMfg,
    riesz: RieszMap,
    cfg: SolverConfig,
}

impl MfgSolver {
    pub fn new(space: Arc<P1Space>, problem: MfgProblem, tensor: StabilizationTensor, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let riesz = RieszMap::new(&assemble_h1_gram(&space))?;
        let system = DiscreteMfg::new(space, problem, tensor)?;
        Ok(Self { system, riesz, cfg })
    }

    pub fn system(&self) -> &DiscreteMfg {
        &self.system
    }

    pub fn riesz(&self) -> &RieszMap {
        &self.riesz
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Dual norms of both residuals at `(m, u)`.
    pub fn residual_norms(&self, m: &[f64], u: &[f64]) -> Result<(f64, f64)> {
        Ok((
            self.riesz.dual_norm(&self.system.hjb_residual(m, u))?,
            self.riesz.dual_norm(&self.system.kfp_residual(m, u))?,
        ))
    }

    /// Newton's method for the HJB equation with the density frozen at `m`,
    /// started from `u_init`. Each step solves
    /// `(K_A + B(∂H/∂p[∇u])) δ = R¹(m, u)`; the step is halved while the
    /// residual dual norm grows.
    pub fn solve_hjb_from(&self, m: &[f64], u_init: &[f64]) -> Result<(Vec<f64>, NewtonReport)> {
        if !self.system.problem().hamiltonian.is_smooth() {
            return Err(Error::Config("Newton's method needs a differentiable Hamiltonian".into()));
        }
        let sys = &self.system;
        let mut u = u_init.to_vec();
        let mut r = sys.hjb_residual(m, &u);
        let mut rn = self.riesz.dual_norm(&r)?;
        let mut report = NewtonReport {
            iterations: 0,
            residual_dual: rn,
            step_halvings: 0,
            history: vec![rn],
        };
        while report.iterations < self.cfg.max_newton {
            let delta = solve_linear(&sys.hjb_jacobian(&u), &r)?;
            report.iterations += 1;
            let mut t = 1.0;
            let (mut cand, mut cand_r, mut cand_n);
            loop {
                cand = u.iter().zip(&delta).map(|(a, d)| a + t * d).collect::<Vec<f64>>();
                cand_r = sys.hjb_residual(m, &cand);
                cand_n = self.riesz.dual_norm(&cand_r)?;
                if cand_n <= rn || t < 1e-3 {
                    break;
                }
                t *= 0.5;
                report.step_halvings += 1;
            }
            if cand_n > rn {
                // no decrease along the direction: keep the full step
                cand = u.iter().zip(&delta).map(|(a, d)| a + d).collect();
                cand_r = sys.hjb_residual(m, &cand);
                cand_n = self.riesz.dual_norm(&cand_r)?;
            }
            u = cand;
            r = cand_r;
            rn = cand_n;
            report.history.push(rn);
            report.residual_dual = rn;
            if rn <= self.cfg.tol_newton {
                return Ok((u, report));
            }
        }
        Err(Error::NonConvergence {
            what: "newton",
            iterations: report.iterations,
            last_residual: rn,
            history: report.history,
        })
    }

    pub fn solve_hjb(&self, m: &[f64]) -> Result<(Vec<f64>, NewtonReport)> {
        self.solve_hjb_from(m, &vec![0.0; self.system.ndof()])
    }

    /// The linear density equation for a frozen value function.
    pub fn solve_kfp(&self, u: &[f64]) -> Result<Vec<f64>> {
        solve_linear(&self.system.kfp_operator(u), self.system.source_load())
    }

    /// Damped Picard iteration on the coupled system.
    ///
    /// The first increase of the residual halves the damping; later
    /// increases are only counted.
    pub fn solve(&self) -> Result<DiscreteSolution> {
        let n = self.system.ndof();
        let space = Arc::clone(self.system.space());
        let mut u = vec![0.0; n];
        let mut m = self.solve_kfp(&u)?;
        let mut lambda = self.cfg.damping;
        let mut telemetry = Telemetry::default();
        let mut newton_total = 0;
        let mut prev = f64::INFINITY;
        let mut history = Vec::new();
        for j in 1..=self.cfg.max_outer {
            let (u_next, newton) = self.solve_hjb_from(&m, &u)?;
            newton_total += newton.iterations;
            let m_tilde = self.solve_kfp(&u_next)?;
            let m_next: Vec<f64> = m.iter().zip(&m_tilde).map(|(a, b)| (1.0 - lambda) * a + lambda * b).collect();
            let (r1, r2) = self.residual_norms(&m_next, &u_next)?;
            telemetry.iterations.push(OuterIteration {
                iteration: j,
                residual1_dual: r1,
                residual2_dual: r2,
                newton_iterations: newton.iterations,
                damping: lambda,
            });
            u = u_next;
            m = m_next;
            let worst = r1.max(r2);
            history.push(worst);
            if worst <= self.cfg.tol_outer {
                telemetry.converged = true;
                return Ok(DiscreteSolution {
                    u: P1Function::new(Arc::clone(&space), u),
                    m: P1Function::new(space, m),
                    outer_iters: j,
                    newton_iters_total: newton_total,
                    residual1_dual: r1,
                    residual2_dual: r2,
                    telemetry,
                });
            }
            if j > 1 && worst > prev {
                telemetry.residual_increases += 1;
                if !telemetry.damping_downgraded {
                    telemetry.damping_downgraded = true;
                    lambda *= 0.5;
                }
            }
            prev = worst;
        }
        Err(Error::NonConvergence {
            what: "picard",
            iterations: self.cfg.max_outer,
            last_residual: prev,
            history,
        })
    }

    /// Density equation with the drift `∂H/∂p` of the exact value function,
    /// evaluated at element barycentres.
    pub fn solve_m_k_plus(&self, exact_u_grad: &dyn Fn(crate::Point) -> Vec2) -> Result<Vec<f64>> {
        let space = self.system.space();
        let mesh = space.mesh();
        let h = &self.system.problem().hamiltonian;
        let drift: Vec<Vec2> = (0..space.num_elements())
            .map(|k| {
                let p = mesh.triangle_points(k);
                let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
                h.grad_p(c, exact_u_grad(c))
            })
            .collect();
        solve_linear(&self.system.kfp_operator_with_drift(&drift), self.system.source_load())
    }
}

/// Newton solve of the HJB equation for a frozen density.
pub fn solve_hjb(
    space: &Arc<P1Space>,
    m_fixed: &P1Function,
    problem: &MfgProblem,
    tensor: &StabilizationTensor,
    cfg: &SolverConfig,
) -> Result<P1Function> {
    let solver = MfgSolver::new(Arc::clone(space), problem.clone(), tensor.clone(), cfg.clone())?;
    let (u, _) = solver.solve_hjb(m_fixed.coeffs())?;
    Ok(P1Function::new(Arc::clone(space), u))
}

/// Single linear solve of the density equation for a frozen value function.
pub fn solve_kfp(
    space: &Arc<P1Space>,
    u_fixed: &P1Function,
    problem: &MfgProblem,
    tensor: &StabilizationTensor,
) -> Result<P1Function> {
    let system = DiscreteMfg::new(Arc::clone(space), problem.clone(), tensor.clone())?;
    let m = solve_linear(&system.kfp_operator(u_fixed.coeffs()), system.source_load())?;
    Ok(P1Function::new(Arc::clone(space), m))
}

pub fn solve_mfg(
    space: &Arc<P1Space>,
    problem: &MfgProblem,
    tensor: &StabilizationTensor,
    cfg: &SolverConfig,
) -> Result<DiscreteSolution> {
    MfgSolver::new(Arc::clone(space), problem.clone(), tensor.clone(), cfg.clone())?.solve()
}

/// The density equation driven by the exact value function.
pub fn solve_m_k_plus(space: &Arc<P1Space>, problem: &MfgProblem, tensor: &StabilizationTensor) -> Result<P1Function> {
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::Config("m_k_plus needs a problem with an exact solution".into()))?;
    let grad = Arc::clone(&exact.u.grad);
    let system = DiscreteMfg::new(Arc::clone(space), problem.clone(), tensor.clone())?;
    let mesh = space.mesh();
    let drift: Vec<Vec2> = (0..space.num_elements())
        .map(|k| {
            let p = mesh.triangle_points(k);
            let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
            problem.hamiltonian.grad_p(c, grad(c))
        })
        .collect();
    let m = solve_linear(&system.kfp_operator_with_drift(&drift), system.source_load())?;
    Ok(P1Function::new(Arc::clone(space), m))
}
