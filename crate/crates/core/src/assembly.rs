//! Sparse operators, load vectors and discrete residuals.
//!
//! Every operator on a space shares one CSR pattern (the vertex adjacency of
//! the interior dofs), so sums and transposes never reallocate structure.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use faer::sparse::{SparseColMat, Triplet};

use crate::fespace::{bary_to_point, quadrature, P1Space};
use crate::mesh::Mesh2D;
use crate::problem::{assemble_source_load, Coupling, Flux, MfgProblem, SourceG};
use crate::stabilization::StabilizationTensor;
use crate::{Error, Point, Result, Vec2};

const NO_SLOT: usize = usize::MAX;

/// CSR structure plus, for every element, the value slot of each local pair.
#[derive(Debug)]
pub struct ElementPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    slots: Vec<[[usize; 3]; 3]>,
    transpose_perm: Vec<usize>,
}

impl ElementPattern {
    fn build(n: usize, element_dofs: impl Fn(usize) -> [Option<usize>; 3], num_elements: usize) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for k in 0..num_elements {
            let d = element_dofs(k);
            for i in d.iter().flatten() {
                for j in d.iter().flatten() {
                    rows[*i].push(*j);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let find = |i: usize, j: usize| -> usize {
            let r = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            row_ptr[i] + r.binary_search(&j).expect("pattern contains element pair")
        };
        let slots = (0..num_elements)
            .map(|k| {
                let d = element_dofs(k);
                let mut s = [[NO_SLOT; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        if let (Some(i), Some(j)) = (d[a], d[b]) {
                            s[a][b] = find(i, j);
                        }
                    }
                }
                s
            })
            .collect();
        let mut transpose_perm = vec![0; col_idx.len()];
        for i in 0..n {
            for idx in row_ptr[i]..row_ptr[i + 1] {
                transpose_perm[idx] = find(col_idx[idx], i);
            }
        }
        Self {
            n,
            row_ptr,
            col_idx,
            slots,
            transpose_perm,
        }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }
}

/// Shared pattern of the interior-dof operators on `space`.
pub fn element_pattern(space: &P1Space) -> Arc<ElementPattern> {
    Arc::clone(space.pattern_cell().get_or_init(|| {
        Arc::new(ElementPattern::build(space.ndof(), |k| space.element_dofs(k), space.num_elements()))
    }))
}

/// Square sparse matrix on a shared element pattern.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pattern: Arc<ElementPattern>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    fn zeros(pattern: Arc<ElementPattern>, symmetric: bool) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self {
            pattern,
            values,
            symmetric,
        }
    }

    fn from_elements(
        pattern: Arc<ElementPattern>,
        num_elements: usize,
        symmetric: bool,
        local: impl Fn(usize) -> [[f64; 3]; 3],
    ) -> Self {
        let mut op = Self::zeros(pattern, symmetric);
        for k in 0..num_elements {
            let a = local(k);
            let s = op.pattern.slots[k];
            for i in 0..3 {
                for j in 0..3 {
                    if s[i][j] != NO_SLOT {
                        op.values[s[i][j]] += a[i][j];
                    }
                }
            }
        }
        op
    }

    pub fn nrows(&self) -> usize {
        self.pattern.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// True when the operator was assembled from a symmetric bilinear form.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let p = &self.pattern;
        let r = &p.col_idx[p.row_ptr[i]..p.row_ptr[i + 1]];
        r.binary_search(&j).map_or(0.0, |o| self.values[p.row_ptr[i] + o])
    }

    /// Stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let p = &self.pattern;
        (0..p.n).flat_map(move |i| {
            (p.row_ptr[i]..p.row_ptr[i + 1]).map(move |idx| (i, p.col_idx[idx], self.values[idx]))
        })
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let p = &self.pattern;
        assert_eq!(x.len(), p.n);
        (0..p.n)
            .map(|i| {
                (p.row_ptr[i]..p.row_ptr[i + 1])
                    .map(|idx| self.values[idx] * x[p.col_idx[idx]])
                    .sum()
            })
            .collect()
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> Self {
        let values = self
            .pattern
            .transpose_perm
            .iter()
            .map(|&t| self.values[t])
            .collect();
        Self {
            pattern: Arc::clone(&self.pattern),
            values,
            symmetric: self.symmetric,
        }
    }

    /// `self + other`; both must live on the same pattern.
    pub fn add(&self, other: &Self) -> Self {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern), "operators on different patterns");
        Self {
            pattern: Arc::clone(&self.pattern),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            symmetric: self.symmetric && other.symmetric,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            pattern: Arc::clone(&self.pattern),
            values: self.values.iter().map(|v| v * factor).collect(),
            symmetric: self.symmetric,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let p = &self.pattern;
        (0..p.n)
            .map(|i| self.values[p.row_ptr[i]..p.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.nrows();
        let mut d = vec![vec![0.0; n]; n];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    pub(crate) fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<Triplet<usize, usize, f64>> = self.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows(), self.nrows(), &t)
            .map_err(|e| Error::Solver(format!("cannot build sparse matrix: {e:?}")))
    }

    /// Matrix Market coordinate format, 1-based indices.
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows(), self.nrows(), self.nnz());
        for (i, j, v) in self.triplets() {
            let _ = writeln!(s, "{} {} {:.16e}", i + 1, j + 1, v);
        }
        s
    }

    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_matrix_market())?;
        Ok(())
    }
}

/// `area · (A ∇ξ_j)·∇ξ_i` on one element.
pub fn element_stiffness(grads: &[Vec2; 3], area: f64, a: [[f64; 2]; 2]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for j in 0..3 {
        let ag = [
            a[0][0] * grads[j][0] + a[0][1] * grads[j][1],
            a[1][0] * grads[j][0] + a[1][1] * grads[j][1],
        ];
        for i in 0..3 {
            out[i][j] = area * (ag[0] * grads[i][0] + ag[1] * grads[i][1]);
        }
    }
    out
}

/// Consistent P1 mass matrix on one element.
pub fn element_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

/// `∫_K (b·∇ξ_j) ξ_i` for constant `b`: row `i` tests, column `j` is the trial.
pub fn element_drift(grads: &[Vec2; 3], area: f64, b: Vec2) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for j in 0..3 {
        let bj = (b[0] * grads[j][0] + b[1] * grads[j][1]) * area / 3.0;
        for row in out.iter_mut() {
            row[j] = bj;
        }
    }
    out
}

fn check_tensor(space: &P1Space, tensor: &StabilizationTensor) -> Result<()> {
    if tensor.per_element.len() != space.num_elements() {
        return Err(Error::Config(format!(
            "stabilization tensor has {} entries but the mesh has {} elements",
            tensor.per_element.len(),
            space.num_elements()
        )));
    }
    Ok(())
}

fn diffusion_tensor(nu: f64, d: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[nu + d[0][0], d[0][1]], [d[1][0], nu + d[1][1]]]
}

/// Stiffness matrix of `A_k = ν I + D_k` on the interior dofs.
pub fn assemble_diffusion(space: &P1Space, nu: f64, tensor: &StabilizationTensor) -> Result<SparseOperator> {
    check_tensor(space, tensor)?;
    Ok(SparseOperator::from_elements(element_pattern(space), space.num_elements(), true, |k| {
        element_stiffness(
            space.element_grads(k),
            space.element_area(k),
            diffusion_tensor(nu, tensor.per_element[k]),
        )
    }))
}

/// The same stiffness matrix over all vertices, before boundary elimination.
pub fn assemble_diffusion_all_vertices(
    space: &P1Space,
    nu: f64,
    tensor: &StabilizationTensor,
) -> Result<SparseOperator> {
    check_tensor(space, tensor)?;
    let mesh: &Mesh2D = space.mesh();
    let pattern = Arc::new(ElementPattern::build(
        mesh.num_vertices(),
        |k| mesh.triangles()[k].map(Some),
        mesh.num_triangles(),
    ));
    Ok(SparseOperator::from_elements(pattern, space.num_elements(), true, |k| {
        element_stiffness(
            space.element_grads(k),
            space.element_area(k),
            diffusion_tensor(nu, tensor.per_element[k]),
        )
    }))
}

/// Laplacian stiffness with unit coefficient.
pub fn assemble_stiffness(space: &P1Space) -> SparseOperator {
    SparseOperator::from_elements(element_pattern(space), space.num_elements(), true, |k| {
        element_stiffness(space.element_grads(k), space.element_area(k), [[1.0, 0.0], [0.0, 1.0]])
    })
}

pub fn assemble_mass(space: &P1Space) -> SparseOperator {
    SparseOperator::from_elements(element_pattern(space), space.num_elements(), true, |k| {
        element_mass(space.element_area(k))
    })
}

/// Gram matrix of the full H¹ inner product on the space.
pub fn assemble_h1_gram(space: &P1Space) -> SparseOperator {
    assemble_mass(space).add(&assemble_stiffness(space))
}

/// `B_ij = ∫ (b̃·∇ξ_j) ξ_i` for an element-wise constant drift.
pub fn assemble_hjb_drift(space: &P1Space, drift: &[Vec2]) -> SparseOperator {
    assert_eq!(drift.len(), space.num_elements());
    SparseOperator::from_elements(element_pattern(space), space.num_elements(), false, |k| {
        element_drift(space.element_grads(k), space.element_area(k), drift[k])
    })
}

/// `C_ij = ∫ ξ_j (b̃·∇ξ_i)`: the divergence-form drift of the density equation.
pub fn assemble_kfp_drift(space: &P1Space, drift: &[Vec2]) -> SparseOperator {
    assert_eq!(drift.len(), space.num_elements());
    SparseOperator::from_elements(element_pattern(space), space.num_elements(), false, |k| {
        let grads = space.element_grads(k);
        let area = space.element_area(k);
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            let bi = (drift[k][0] * grads[i][0] + drift[k][1] * grads[i][1]) * area / 3.0;
            *row = [bi; 3];
        }
        out
    })
}

/// Dense symmetric matrix, used for the nonlocal coupling on small meshes.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

fn centroid(p: &[Point; 3]) -> Point {
    [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
}

/// `K_ij = ∫∫ k(x − y) ξ_j(y) ξ_i(x)` with one-point centroid quadrature in
/// each variable, so that `K = Pᵀ Kc P` stays positive semi-definite.
pub fn assemble_kernel_matrix(space: &P1Space, kernel: &crate::problem::GaussianKernel) -> DenseMatrix {
    let n = space.ndof();
    let ne = space.num_elements();
    let mesh = space.mesh();
    let centers: Vec<Point> = (0..ne).map(|k| centroid(&mesh.triangle_points(k))).collect();
    // q[K][j] = Σ_K' k(c_K − c_K') |K'|/3 [j ∈ K']
    let mut q = vec![0.0; ne * n];
    for kp in 0..ne {
        let w = space.element_area(kp) / 3.0;
        let dofs = space.element_dofs(kp);
        for k in 0..ne {
            let kv = kernel.eval(crate::sub(centers[k], centers[kp])) * w;
            for j in dofs.iter().flatten() {
                q[k * n + j] += kv;
            }
        }
    }
    let mut data = vec![0.0; n * n];
    for k in 0..ne {
        let w = space.element_area(k) / 3.0;
        for i in space.element_dofs(k).iter().flatten() {
            for j in 0..n {
                data[i * n + j] += w * q[k * n + j];
            }
        }
    }
    DenseMatrix { n, data }
}

/// The coupling `F` realized on a space: `⟨F[m], ξ_i⟩ = (c_F M m + K m)_i + ∫ f₀ ξ_i`.
#[derive(Debug, Clone)]
pub struct DiscreteCoupling {
    c_f: f64,
    mass: SparseOperator,
    offset_load: Vec<f64>,
    kernel: Option<DenseMatrix>,
}

impl DiscreteCoupling {
    pub fn new(space: &P1Space, coupling: &Coupling) -> Self {
        let offset = SourceG {
            g0: Some(Arc::clone(coupling.offset())),
            flux: Flux::Zero,
            nonneg_certified: false,
        };
        let kernel = match coupling {
            Coupling::LocalLinear { .. } => None,
            Coupling::NonlocalConvolution { kernel, .. } => Some(assemble_kernel_matrix(space, kernel)),
        };
        Self {
            c_f: coupling.c_f(),
            mass: assemble_mass(space),
            offset_load: assemble_source_load(space, &offset),
            kernel,
        }
    }

    pub fn load(&self, m: &[f64]) -> Vec<f64> {
        let mut out = self.mass.matvec(m);
        for (o, f) in out.iter_mut().zip(&self.offset_load) {
            *o = self.c_f * *o + f;
        }
        if let Some(k) = &self.kernel {
            for (o, v) in out.iter_mut().zip(k.matvec(m)) {
                *o += v;
            }
        }
        out
    }

    /// `⟨F[w] − F[v], w − v⟩` for P1 arguments, computed with the mass matrix.
    pub fn monotonicity_pairing(&self, w: &[f64], v: &[f64]) -> f64 {
        let d: Vec<f64> = w.iter().zip(v).map(|(a, b)| a - b).collect();
        let fw = self.load(w);
        let fv = self.load(v);
        fw.iter().zip(&fv).zip(&d).map(|((a, b), c)| (a - b) * c).sum()
    }

    pub fn mass(&self) -> &SparseOperator {
        &self.mass
    }

    pub fn kernel(&self) -> Option<&DenseMatrix> {
        self.kernel.as_ref()
    }
}

/// Everything of the discrete system that does not depend on the iterate:
/// the stabilized diffusion, the coupling and the source load.
///
/// Residuals follow the sign convention
/// `⟨R¹(m̄, ū), ψ⟩ = ⟨F[m̄], ψ⟩ − ∫ A_k∇ū·∇ψ + H[∇ū]ψ` and
/// `⟨R²(m̄, ū), φ⟩ = ⟨G, φ⟩ − ∫ A_k∇m̄·∇φ + m̄ ∂H/∂p[∇ū]·∇φ`.
#[derive(Debug, Clone)]
pub struct DiscreteMfg {
    space: Arc<P1Space>,
    problem: MfgProblem,
    tensor: StabilizationTensor,
    diffusion: SparseOperator,
    coupling: DiscreteCoupling,
    source_load: Vec<f64>,
}

impl DiscreteMfg {
    pub fn new(space: Arc<P1Space>, problem: MfgProblem, tensor: StabilizationTensor) -> Result<Self> {
        problem.validate()?;
        let diffusion = assemble_diffusion(&space, problem.nu, &tensor)?;
        let coupling = DiscreteCoupling::new(&space, &problem.coupling);
        let source_load = assemble_source_load(&space, &problem.source);
        Ok(Self {
            space,
            problem,
            tensor,
            diffusion,
            coupling,
            source_load,
        })
    }

    pub fn space(&self) -> &Arc<P1Space> {
        &self.space
    }

    pub fn problem(&self) -> &MfgProblem {
        &self.problem
    }

    pub fn tensor(&self) -> &StabilizationTensor {
        &self.tensor
    }

    pub fn diffusion(&self) -> &SparseOperator {
        &self.diffusion
    }

    pub fn coupling(&self) -> &DiscreteCoupling {
        &self.coupling
    }

    pub fn source_load(&self) -> &[f64] {
        &self.source_load
    }

    pub fn ndof(&self) -> usize {
        self.space.ndof()
    }

    /// `∫ H[∇u] ξ_i`; exact for `x`-independent Hamiltonians.
    pub fn hamiltonian_load(&self, u: &[f64]) -> Vec<f64> {
        let space = &self.space;
        let h = &self.problem.hamiltonian;
        let mesh = space.mesh();
        let rule = if h.depends_on_x() {
            Some(quadrature(2).expect("degree 2 is supported"))
        } else {
            None
        };
        let mut out = vec![0.0; space.ndof()];
        for k in 0..space.num_elements() {
            let dofs = space.element_dofs(k);
            if dofs.iter().all(Option::is_none) {
                continue;
            }
            let g = space.element_gradient(u, k);
            let area = space.element_area(k);
            let pts = mesh.triangle_points(k);
            let local = match &rule {
                None => [h.value(centroid(&pts), g) * area / 3.0; 3],
                Some(rule) => {
                    let mut l = [0.0; 3];
                    for (q, w) in rule.points.iter().zip(&rule.weights) {
                        let v = w * area * h.value(bary_to_point(&pts, *q), g);
                        for i in 0..3 {
                            l[i] += v * q[i];
                        }
                    }
                    l
                }
            };
            for (i, d) in dofs.iter().enumerate() {
                if let Some(d) = d {
                    out[*d] += local[i];
                }
            }
        }
        out
    }

    /// `∂H/∂p` at each element's gradient of `u`, evaluated at the centroid.
    pub fn drift(&self, u: &[f64]) -> Vec<Vec2> {
        let mesh = self.space.mesh();
        (0..self.space.num_elements())
            .map(|k| {
                let g = self.space.element_gradient(u, k);
                self.problem.hamiltonian.grad_p(centroid(&mesh.triangle_points(k)), g)
            })
            .collect()
    }

    pub fn coupling_load(&self, m: &[f64]) -> Vec<f64> {
        self.coupling.load(m)
    }

    /// Load vector of `R¹(m̄, ū)`.
    pub fn hjb_residual(&self, m: &[f64], u: &[f64]) -> Vec<f64> {
        let mut r = self.coupling.load(m);
        let au = self.diffusion.matvec(u);
        let hu = self.hamiltonian_load(u);
        for ((ri, a), h) in r.iter_mut().zip(au).zip(hu) {
            *ri -= a + h;
        }
        r
    }

    /// Load vector of `R²(m̄, ū)`.
    pub fn kfp_residual(&self, m: &[f64], u: &[f64]) -> Vec<f64> {
        let lm = self.kfp_operator(u).matvec(m);
        self.source_load.iter().zip(lm).map(|(g, l)| g - l).collect()
    }

    /// Jacobian of the HJB operator at `u`: `A_k`-stiffness plus the drift `∂H/∂p[∇u]`.
    pub fn hjb_jacobian(&self, u: &[f64]) -> SparseOperator {
        self.diffusion.add(&assemble_hjb_drift(&self.space, &self.drift(u)))
    }

    /// Operator of the density equation for a given value function.
    pub fn kfp_operator(&self, u: &[f64]) -> SparseOperator {
        self.kfp_operator_with_drift(&self.drift(u))
    }

    pub fn kfp_operator_with_drift(&self, drift: &[Vec2]) -> SparseOperator {
        self.diffusion.add(&assemble_kfp_drift(&self.space, drift))
    }
}

/// Interior-dof wrapper around [`DiscreteMfg::hjb_residual`].
pub fn assemble_hjb_nonlinear_residual(system: &DiscreteMfg, u: &[f64], m: &[f64]) -> Vec<f64> {
    system.hjb_residual(m, u)
}

/// Operator of the density equation with drift `∂H/∂p[∇u]`.
pub fn assemble_kfp_operator(
    space: &P1Space,
    u: &[f64],
    nu: f64,
    tensor: &StabilizationTensor,
    hamiltonian: &crate::hamiltonian::HamiltonianSpec,
) -> Result<SparseOperator> {
    let mesh = space.mesh();
    let drift: Vec<Vec2> = (0..space.num_elements())
        .map(|k| hamiltonian.grad_p(centroid(&mesh.triangle_points(k)), space.element_gradient(u, k)))
        .collect();
    Ok(assemble_diffusion(space, nu, tensor)?.add(&assemble_kfp_drift(space, &drift)))
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn triangle() -> impl Strategy<Value = [[f64; 2]; 3]> {
        prop::array::uniform3(prop::array::uniform2(-1.0f64..1.0)).prop_filter("nondegenerate", |p| {
            let a = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
            let b = [p[2][0] - p[0][0], p[2][1] - p[0][1]];
            (a[0] * b[1] - a[1] * b[0]).abs() > 1e-2
        })
    }

    fn grads(p: &[[f64; 2]; 3]) -> ([Vec2; 3], f64) {
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let g = [0, 1, 2].map(|i| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            [(p[j][1] - p[k][1]) / det, (p[k][0] - p[j][0]) / det]
        });
        (g, det.abs() / 2.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn stiffness_is_symmetric_and_kills_constants(
            p in triangle(),
            a in 0.1f64..2.0,
            b in -0.5f64..0.5,
            c in 0.1f64..2.0,
        ) {
            let (g, area) = grads(&p);
            let k = element_stiffness(&g, area, [[a, b], [b, c + b.abs()]]);
            for (i, row) in k.iter().enumerate() {
                let scale = 1.0 + row.iter().map(|x| x.abs()).sum::<f64>();
                prop_assert!(row.iter().sum::<f64>().abs() < 1e-9 * scale);
                for (j, kij) in row.iter().enumerate() {
                    prop_assert!((kij - k[j][i]).abs() < 1e-10 * scale);
                }
            }
        }

        #[test]
        fn drift_kills_constants(p in triangle(), b in prop::array::uniform2(-2.0f64..2.0)) {
            let (g, area) = grads(&p);
            for row in &element_drift(&g, area, b) {
                prop_assert!(row.iter().sum::<f64>().abs() < 1e-9);
            }
        }
    }
}
