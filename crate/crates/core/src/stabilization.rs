//! Stabilization tensors `D_k` and numerical checks of their two
//! structural properties: boundedness by the local mesh size, and the
//! discrete maximum principle for the stabilized operator class.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{assemble_diffusion, assemble_hjb_drift};
use crate::fespace::P1Space;
use crate::mesh::Mesh2D;
use crate::solver::Factorization;
use crate::{norm, sub, Error, Result, Vec2};

/// Eigenvalue tolerance for positive semi-definiteness.
pub const PSD_TOL: f64 = 1e-12;
/// Nodal tolerance for the discrete maximum principle.
pub const DMP_TOL: f64 = 1e-10;
/// Default artificial diffusion safety factor.
pub const DEFAULT_MU: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilizationKind {
    None,
    XzEdge,
    AcuteArtificial,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilizationTensor {
    /// Symmetric 2×2 matrix per triangle.
    pub per_element: Vec<[[f64; 2]; 2]>,
    pub kind: StabilizationKind,
    /// `max_K |D_k|_K|_F / diam K`.
    pub c_d_observed: f64,
}

fn frobenius(d: &[[f64; 2]; 2]) -> f64 {
    (d[0][0].powi(2) + d[0][1].powi(2) + d[1][0].powi(2) + d[1][1].powi(2)).sqrt()
}

fn observed_c_d(mesh: &Mesh2D, per_element: &[[[f64; 2]; 2]]) -> f64 {
    per_element
        .iter()
        .enumerate()
        .map(|(k, d)| frobenius(d) / mesh.triangle_diameter(k))
        .fold(0.0, f64::max)
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym_eigenvalues(d: &[[f64; 2]; 2]) -> [f64; 2] {
    let mean = 0.5 * (d[0][0] + d[1][1]);
    let r = (0.25 * (d[0][0] - d[1][1]).powi(2) + d[0][1] * d[1][0]).max(0.0).sqrt();
    [mean - r, mean + r]
}

impl StabilizationTensor {
    pub fn none(mesh: &Mesh2D) -> Self {
        Self {
            per_element: vec![[[0.0; 2]; 2]; mesh.num_triangles()],
            kind: StabilizationKind::None,
            c_d_observed: 0.0,
        }
    }

    /// A tensor from explicit per-element matrices.
    pub fn from_elements(mesh: &Mesh2D, per_element: Vec<[[f64; 2]; 2]>, kind: StabilizationKind) -> Result<Self> {
        if per_element.len() != mesh.num_triangles() {
            return Err(Error::Config(format!(
                "{} tensors given for {} elements",
                per_element.len(),
                mesh.num_triangles()
            )));
        }
        let c_d_observed = observed_c_d(mesh, &per_element);
        Ok(Self {
            per_element,
            kind,
            c_d_observed,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.per_element.iter().all(|d| d.iter().flatten().all(|v| *v == 0.0))
    }

    /// `element,d00,d01,d11`, one row per triangle.
    pub fn to_csv(&self, header_comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = header_comment {
            let _ = writeln!(s, "# {c}");
        }
        s.push_str("element,d00,d01,d11\n");
        for (k, d) in self.per_element.iter().enumerate() {
            let _ = writeln!(s, "{k},{:.16e},{:.16e},{:.16e}", d[0][0], d[0][1], d[1][1]);
        }
        s
    }
}

/// Strict lower bound on the edge weight factor for a mesh with shape
/// regularity `delta`: `δ / (2(d+1))` with `d = 2`.
pub fn omega_lower_bound(delta: f64) -> f64 {
    delta / 6.0
}

/// Default edge weight factor, twice the lower bound.
pub fn default_omega_factor(mesh: &Mesh2D) -> f64 {
    mesh.shape_regularity() / 3.0
}

/// Edge-tensor stabilization `D_k|_K = Σ_E ω_E t_E ⊗ t_E` over the internal
/// edges of `K` (edges with at least one interior endpoint), with
/// `ω_E = omega_factor · L_H · diam E`. `None` selects the default factor.
pub fn build_xz_tensor(mesh: &Mesh2D, l_h: f64, omega_factor: Option<f64>) -> Result<StabilizationTensor> {
    if !(l_h >= 0.0 && l_h.is_finite()) {
        return Err(Error::Config(format!("L_H must be finite and nonnegative, got {l_h}")));
    }
    let (ok, worst) = mesh.check_xz()?;
    if !ok {
        return Err(Error::Config(format!(
            "mesh violates the XZ cotangent condition (worst edge sum {worst:.6e})"
        )));
    }
    let delta = mesh.shape_regularity();
    let factor = omega_factor.unwrap_or(delta / 3.0);
    let lower = omega_lower_bound(delta);
    if !(factor > lower) || !factor.is_finite() {
        return Err(Error::Config(format!(
            "omega_factor {factor} must exceed the edge weight lower bound δ/6 = {lower} (δ = {delta})"
        )));
    }
    let weights: Vec<Option<(f64, Vec2)>> = (0..mesh.num_edges())
        .map(|e| {
            mesh.is_internal_edge(e)
                .then(|| (factor * l_h * mesh.edge_length(e), mesh.edge_tangent(e)))
        })
        .collect();
    let per_element: Vec<[[f64; 2]; 2]> = (0..mesh.num_triangles())
        .map(|k| {
            let mut d = [[0.0; 2]; 2];
            for e in mesh.triangle_edges(k) {
                if let Some((w, t)) = weights[e] {
                    for a in 0..2 {
                        for b in 0..2 {
                            d[a][b] += w * t[a] * t[b];
                        }
                    }
                }
            }
            d
        })
        .collect();
    StabilizationTensor::from_elements(mesh, per_element, StabilizationKind::XzEdge)
}

/// `σ_K = diam K · min_i |∇ψ_i|` for every element.
pub fn element_sigmas(mesh: &Mesh2D) -> Vec<f64> {
    (0..mesh.num_triangles())
        .map(|k| {
            let p = mesh.triangle_points(k);
            let area = mesh.triangle_area(k);
            // |∇ψ_i| = |opposite edge| / (2|K|)
            let shortest = (0..3)
                .map(|i| norm(sub(p[(i + 2) % 3], p[(i + 1) % 3])))
                .fold(f64::INFINITY, f64::min);
            mesh.triangle_diameter(k) * shortest / (2.0 * area)
        })
        .collect()
}

/// Isotropic artificial diffusion
/// `D_k|_K = max(μ L_H h_K / (σ^k sin θ) − ν, 0) I` on a strictly acute mesh.
pub fn build_acute_tensor(mesh: &Mesh2D, l_h: f64, nu: f64, mu: f64) -> Result<StabilizationTensor> {
    if !(mu > 1.0) {
        return Err(Error::Config(format!("mu must exceed 1, got {mu}")));
    }
    if !(nu > 0.0) {
        return Err(Error::Config(format!("nu must be positive, got {nu}")));
    }
    if !(l_h >= 0.0 && l_h.is_finite()) {
        return Err(Error::Config(format!("L_H must be finite and nonnegative, got {l_h}")));
    }
    let theta = mesh.check_acute()?;
    if theta <= 0.0 {
        return Err(Error::Config("mesh is not strictly acute (θ = 0)".into()));
    }
    let sigma = element_sigmas(mesh).into_iter().fold(f64::INFINITY, f64::min);
    let per_element = (0..mesh.num_triangles())
        .map(|k| {
            let c = (mu * l_h * mesh.triangle_diameter(k) / (sigma * theta.sin()) - nu).max(0.0);
            [[c, 0.0], [0.0, c]]
        })
        .collect();
    StabilizationTensor::from_elements(mesh, per_element, StabilizationKind::AcuteArtificial)
}

#[derive(Debug, Clone, Serialize)]
pub struct H1Report {
    pub min_eigenvalue: f64,
    pub c_d_observed: f64,
}

/// Checks that every element matrix is symmetric positive semi-definite and
/// reports the observed boundedness constant.
pub fn verify_h1(tensor: &StabilizationTensor, mesh: &Mesh2D) -> Result<H1Report> {
    if tensor.per_element.len() != mesh.num_triangles() {
        return Err(Error::Config("tensor and mesh sizes differ".into()));
    }
    let mut min_eig = f64::INFINITY;
    for (k, d) in tensor.per_element.iter().enumerate() {
        if (d[0][1] - d[1][0]).abs() > PSD_TOL * (1.0 + frobenius(d)) {
            return Err(Error::Invariant(format!("stabilization tensor on element {k} is not symmetric")));
        }
        let lo = sym_eigenvalues(d)[0];
        if lo < -PSD_TOL {
            return Err(Error::Invariant(format!(
                "stabilization tensor on element {k} has eigenvalue {lo:.6e}"
            )));
        }
        min_eig = min_eig.min(lo);
    }
    Ok(H1Report {
        min_eigenvalue: if min_eig.is_finite() { min_eig } else { 0.0 },
        c_d_observed: observed_c_d(mesh, &tensor.per_element),
    })
}

/// Element-wise constant drift drawn uniformly from the disk of radius `l_h`.
pub fn random_disk_drift(rng: &mut ChaCha8Rng, n: usize, l_h: f64) -> Vec<Vec2> {
    (0..n)
        .map(|_| {
            let r = l_h * rng.gen::<f64>().sqrt();
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            [r * phi.cos(), r * phi.sin()]
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DmpReport {
    pub trials: usize,
    pub failures: usize,
    pub min_nodal: f64,
}

impl DmpReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Samples operators `L = -div(A_k ∇·) + b̃·∇` with random drifts
/// `|b̃| ≤ L_H` and solves `L v = b`, `L* v = b` for random loads `b ≥ 0`.
pub fn verify_h2_dmp_report(
    space: &P1Space,
    nu: f64,
    tensor: &StabilizationTensor,
    l_h: f64,
    trials: usize,
    seed: u64,
) -> Result<DmpReport> {
    let diffusion = assemble_diffusion(space, nu, tensor)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = space.ndof();
    let mut report = DmpReport {
        trials,
        failures: 0,
        min_nodal: f64::INFINITY,
    };
    for _ in 0..trials {
        let drift = random_disk_drift(&mut rng, space.num_elements(), l_h);
        let l = diffusion.add(&assemble_hjb_drift(space, &drift));
        let load: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let primal = Factorization::new(&l)
            .map_err(|e| Error::Solver(format!("stabilized operator not invertible: {e}")))?
            .solve(&load)?;
        let dual = Factorization::new(&l.transpose())
            .map_err(|e| Error::Solver(format!("adjoint operator not invertible: {e}")))?
            .solve(&load)?;
        let lo = primal.iter().chain(&dual).copied().fold(f64::INFINITY, f64::min);
        report.min_nodal = report.min_nodal.min(lo);
        if lo < -DMP_TOL {
            report.failures += 1;
        }
    }
    Ok(report)
}

/// `true` iff every sampled operator and its adjoint map nonnegative loads
/// to nodally nonnegative solutions.
pub fn verify_h2_dmp(
    space: &P1Space,
    nu: f64,
    tensor: &StabilizationTensor,
    l_h: f64,
    trials: usize,
    seed: u64,
) -> Result<bool> {
    Ok(verify_h2_dmp_report(space, nu, tensor, l_h, trials, seed)?.passed())
}
