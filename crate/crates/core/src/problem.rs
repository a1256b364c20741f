//! Problem data: diffusion, Hamiltonian, coupling `F` and source `G`,
//! together with manufactured instances whose exact solution is known.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fespace::{bary_to_point, quadrature, P1Space, ScalarField, VectorField, DEFAULT_QUADRATURE_DEGREE};
use crate::hamiltonian::HamiltonianSpec;
use crate::{cross, sub, Error, Point, Result, Vec2};

use std::f64::consts::PI;

/// Shape of the computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    UnitSquare,
    /// Rhombus with corners (0,0), (1,0), (3/2, √3/2), (1/2, √3/2).
    Rhombus,
    /// Imported mesh without a known parametrization.
    Custom,
}

impl Domain {
    /// Linear map `J` taking the domain onto the unit square.
    fn chart(self) -> Option<[[f64; 2]; 2]> {
        match self {
            Domain::UnitSquare => Some([[1.0, 0.0], [0.0, 1.0]]),
            Domain::Rhombus => {
                let r3 = 3f64.sqrt();
                Some([[1.0, -1.0 / r3], [0.0, 2.0 / r3]])
            }
            Domain::Custom => None,
        }
    }
}

/// A C² field with its gradient and Laplacian.
#[derive(Clone)]
pub struct SmoothField {
    pub value: ScalarField,
    pub grad: VectorField,
    pub laplacian: ScalarField,
}

impl fmt::Debug for SmoothField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothField").finish_non_exhaustive()
    }
}

impl SmoothField {
    pub fn zero() -> Self {
        Self {
            value: Arc::new(|_| 0.0),
            grad: Arc::new(|_| [0.0, 0.0]),
            laplacian: Arc::new(|_| 0.0),
        }
    }

    /// `sin(πs) sin(πt)` where `(s, t)` are the unit-square coordinates of
    /// the domain; vanishes on the boundary.
    pub fn sine_product(domain: Domain) -> Result<Self> {
        let j = domain
            .chart()
            .ok_or_else(|| Error::Config("sine_product needs a parametrized domain".into()))?;
        let st = move |p: Point| {
            [
                j[0][0] * p[0] + j[0][1] * p[1],
                j[1][0] * p[0] + j[1][1] * p[1],
            ]
        };
        // J Jᵀ weights the second derivatives in the Laplacian
        let jjt = [
            [j[0][0] * j[0][0] + j[0][1] * j[0][1], j[0][0] * j[1][0] + j[0][1] * j[1][1]],
            [j[1][0] * j[0][0] + j[1][1] * j[0][1], j[1][0] * j[1][0] + j[1][1] * j[1][1]],
        ];
        Ok(Self {
            value: Arc::new(move |p| {
                let [s, t] = st(p);
                (PI * s).sin() * (PI * t).sin()
            }),
            grad: Arc::new(move |p| {
                let [s, t] = st(p);
                let ds = PI * (PI * s).cos() * (PI * t).sin();
                let dt = PI * (PI * s).sin() * (PI * t).cos();
                [j[0][0] * ds + j[1][0] * dt, j[0][1] * ds + j[1][1] * dt]
            }),
            laplacian: Arc::new(move |p| {
                let [s, t] = st(p);
                let u = (PI * s).sin() * (PI * t).sin();
                let ust = PI * PI * (PI * s).cos() * (PI * t).cos();
                -PI * PI * u * (jjt[0][0] + jjt[1][1]) + 2.0 * jjt[0][1] * ust
            }),
        })
    }
}

/// Gaussian convolution kernel `a exp(−|r|²/(2w²))`, positive definite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    pub amplitude: f64,
    pub width: f64,
}

impl GaussianKernel {
    pub fn eval(&self, r: Vec2) -> f64 {
        self.amplitude * (-(r[0] * r[0] + r[1] * r[1]) / (2.0 * self.width * self.width)).exp()
    }

    /// `‖k‖_{L¹(ℝ²)}`, a bound on the L² operator norm of the convolution.
    pub fn l1_norm(&self) -> f64 {
        self.amplitude * 2.0 * PI * self.width * self.width
    }
}

#[derive(Clone)]
pub enum Coupling {
    /// `F[m] = c_F m + f₀`.
    LocalLinear { c_f: f64, offset: ScalarField },
    /// `F[m] = c_F m + k ⋆ m + f₀` with a positive definite kernel.
    NonlocalConvolution {
        c_f: f64,
        offset: ScalarField,
        kernel: GaussianKernel,
    },
}

impl fmt::Debug for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LocalLinear { c_f, .. } => f.debug_struct("LocalLinear").field("c_f", c_f).finish_non_exhaustive(),
            Self::NonlocalConvolution { c_f, kernel, .. } => f
                .debug_struct("NonlocalConvolution")
                .field("c_f", c_f)
                .field("kernel", kernel)
                .finish_non_exhaustive(),
        }
    }
}

impl Coupling {
    pub fn c_f(&self) -> f64 {
        match self {
            Self::LocalLinear { c_f, .. } | Self::NonlocalConvolution { c_f, .. } => *c_f,
        }
    }

    pub fn l_f(&self) -> f64 {
        match self {
            Self::LocalLinear { c_f, .. } => *c_f,
            Self::NonlocalConvolution { c_f, kernel, .. } => c_f + kernel.l1_norm(),
        }
    }

    pub fn offset(&self) -> &ScalarField {
        match self {
            Self::LocalLinear { offset, .. } | Self::NonlocalConvolution { offset, .. } => offset,
        }
    }
}

/// The vector part `g̃` of `G = g₀ − div g̃`.
#[derive(Clone)]
pub enum Flux {
    Zero,
    Field(VectorField),
    /// `value` on `{x < x_jump}`, zero elsewhere; integrated exactly.
    HalfPlaneIndicator { x_jump: f64, value: Vec2 },
}

impl fmt::Debug for Flux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => f.write_str("Zero"),
            Self::Field(_) => f.write_str("Field(..)"),
            Self::HalfPlaneIndicator { x_jump, value } => f
                .debug_struct("HalfPlaneIndicator")
                .field("x_jump", x_jump)
                .field("value", value)
                .finish(),
        }
    }
}

/// Source `⟨G, φ⟩ = ∫ g₀ φ + g̃·∇φ`.
#[derive(Clone)]
pub struct SourceG {
    pub g0: Option<ScalarField>,
    pub flux: Flux,
    pub nonneg_certified: bool,
}

impl fmt::Debug for SourceG {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceG")
            .field("g0", &self.g0.as_ref().map(|_| ".."))
            .field("flux", &self.flux)
            .field("nonneg_certified", &self.nonneg_certified)
            .finish()
    }
}

impl SourceG {
    pub fn zero() -> Self {
        Self {
            g0: None,
            flux: Flux::Zero,
            nonneg_certified: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub u: SmoothField,
    pub m: SmoothField,
}

#[derive(Debug, Clone)]
pub struct MfgProblem {
    pub nu: f64,
    pub hamiltonian: HamiltonianSpec,
    pub coupling: Coupling,
    pub source: SourceG,
    pub domain: Domain,
    pub exact: Option<ExactSolution>,
}

impl MfgProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Config(format!("ν must be positive, got {}", self.nu)));
        }
        if !(self.coupling.c_f() > 0.0) {
            return Err(Error::Config("coupling needs c_F > 0".into()));
        }
        Ok(())
    }

    /// Sets `nonneg_certified` from the sign of the nodal source loads on
    /// `space`: any load below `-1e-10` clears the flag.
    pub fn certify_source_nonnegativity(&mut self, space: &P1Space) -> bool {
        let load = assemble_source_load(space, &self.source);
        self.source.nonneg_certified = load.iter().all(|&b| b >= -1e-10);
        self.source.nonneg_certified
    }
}

fn check_smooth(h: &HamiltonianSpec) -> Result<()> {
    if !h.is_smooth() {
        return Err(Error::Config(
            "manufactured problems need a differentiable Hamiltonian".into(),
        ));
    }
    Ok(())
}

/// Builds data for which `(u*, m*)` is the exact weak solution:
/// `f₀ = −νΔu* + H[∇u*] − c_F m*` and `g̃ = ν∇m* + m* ∂H/∂p[∇u*]`.
///
/// The source flag starts uncertified; see
/// [`MfgProblem::certify_source_nonnegativity`].
pub fn make_manufactured(
    nu: f64,
    hamiltonian: HamiltonianSpec,
    c_f: f64,
    u_star: SmoothField,
    m_star: SmoothField,
    domain: Domain,
) -> Result<MfgProblem> {
    check_smooth(&hamiltonian)?;
    let offset: ScalarField = {
        let (u, m, h) = (u_star.clone(), m_star.clone(), hamiltonian.clone());
        Arc::new(move |x| -nu * (u.laplacian)(x) + h.value(x, (u.grad)(x)) - c_f * (m.value)(x))
    };
    let flux: VectorField = {
        let (u, m, h) = (u_star.clone(), m_star.clone(), hamiltonian.clone());
        Arc::new(move |x| {
            let gm = (m.grad)(x);
            let mv = (m.value)(x);
            let b = h.grad_p(x, (u.grad)(x));
            [nu * gm[0] + mv * b[0], nu * gm[1] + mv * b[1]]
        })
    };
    let problem = MfgProblem {
        nu,
        hamiltonian,
        coupling: Coupling::LocalLinear { c_f, offset },
        source: SourceG {
            g0: None,
            flux: Flux::Field(flux),
            nonneg_certified: false,
        },
        domain,
        exact: Some(ExactSolution { u: u_star, m: m_star }),
    };
    problem.validate()?;
    Ok(problem)
}

/// Default manufactured instance: `u* = m* = sin(πs) sin(πt)`.
pub fn make_sine_problem(nu: f64, hamiltonian: HamiltonianSpec, c_f: f64, domain: Domain) -> Result<MfgProblem> {
    let field = SmoothField::sine_product(domain)?;
    make_manufactured(nu, hamiltonian, c_f, field.clone(), field, domain)
}

/// Unit-square instance with a discontinuous flux: `g₀ = 0`,
/// `g̃ = 1_{x<1/2} (1, 0)`, and `F[m] = c_F m − νΔu* + H[∇u*]` for the sine
/// product `u*`. No exact solution is known.
pub fn make_rough_density_problem(nu: f64, hamiltonian: HamiltonianSpec, c_f: f64) -> Result<MfgProblem> {
    make_rough_density_problem_at(nu, hamiltonian, c_f, 0.5)
}

/// As [`make_rough_density_problem`] with the flux jump at `x = x_jump`.
pub fn make_rough_density_problem_at(
    nu: f64,
    hamiltonian: HamiltonianSpec,
    c_f: f64,
    x_jump: f64,
) -> Result<MfgProblem> {
    check_smooth(&hamiltonian)?;
    let u = SmoothField::sine_product(Domain::UnitSquare)?;
    let h = hamiltonian.clone();
    let offset: ScalarField = Arc::new(move |x| -nu * (u.laplacian)(x) + h.value(x, (u.grad)(x)));
    let problem = MfgProblem {
        nu,
        hamiltonian,
        coupling: Coupling::LocalLinear { c_f, offset },
        source: SourceG {
            g0: None,
            flux: Flux::HalfPlaneIndicator {
                x_jump,
                value: [1.0, 0.0],
            },
            // see MfgProblem::certify_source_nonnegativity
            nonneg_certified: false,
        },
        domain: Domain::UnitSquare,
        exact: None,
    };
    problem.validate()?;
    Ok(problem)
}

/// `G ≡ 1` and `F[m] = c_F m`: a nonnegative source, so the discrete
/// density must be nonnegative.
pub fn make_nonneg_density_problem(
    nu: f64,
    hamiltonian: HamiltonianSpec,
    c_f: f64,
    domain: Domain,
) -> Result<MfgProblem> {
    let problem = MfgProblem {
        nu,
        hamiltonian,
        coupling: Coupling::LocalLinear {
            c_f,
            offset: Arc::new(|_| 0.0),
        },
        source: SourceG {
            g0: Some(Arc::new(|_| 1.0)),
            flux: Flux::Zero,
            nonneg_certified: true,
        },
        domain,
        exact: None,
    };
    problem.validate()?;
    Ok(problem)
}

/// Area of the part of a triangle lying in `{x < a}`.
pub(crate) fn clipped_area_left(tri: &[Point; 3], a: f64) -> f64 {
    let mut poly: Vec<Point> = Vec::with_capacity(4);
    for i in 0..3 {
        let (p, q) = (tri[i], tri[(i + 1) % 3]);
        let (pin, qin) = (p[0] < a, q[0] < a);
        if pin {
            poly.push(p);
        }
        if pin != qin {
            let t = (a - p[0]) / (q[0] - p[0]);
            poly.push([a, p[1] + t * (q[1] - p[1])]);
        }
    }
    if poly.len() < 3 {
        return 0.0;
    }
    let mut area = 0.0;
    for i in 1..poly.len() - 1 {
        area += 0.5 * cross(sub(poly[i], poly[0]), sub(poly[i + 1], poly[0]));
    }
    area.abs()
}

/// Load vector `b_i = ∫ g₀ ξ_i + g̃·∇ξ_i` over interior basis functions.
pub fn assemble_source_load(space: &P1Space, source: &SourceG) -> Vec<f64> {
    let mesh = space.mesh();
    let rule = quadrature(DEFAULT_QUADRATURE_DEGREE).expect("default degree is supported");
    let mut b = vec![0.0; space.ndof()];
    for k in 0..space.num_elements() {
        let dofs = space.element_dofs(k);
        if dofs.iter().all(Option::is_none) {
            continue;
        }
        let pts = mesh.triangle_points(k);
        let area = space.element_area(k);
        let grads = space.element_grads(k);
        let mut local = [0.0; 3];
        if let Some(g0) = &source.g0 {
            for (q, w) in rule.points.iter().zip(&rule.weights) {
                let v = w * area * g0(bary_to_point(&pts, *q));
                for i in 0..3 {
                    local[i] += v * q[i];
                }
            }
        }
        match &source.flux {
            Flux::Zero => {}
            Flux::Field(g) => {
                for (q, w) in rule.points.iter().zip(&rule.weights) {
                    let gv = g(bary_to_point(&pts, *q));
                    for i in 0..3 {
                        local[i] += w * area * (gv[0] * grads[i][0] + gv[1] * grads[i][1]);
                    }
                }
            }
            Flux::HalfPlaneIndicator { x_jump, value } => {
                let part = clipped_area_left(&pts, *x_jump);
                for i in 0..3 {
                    local[i] += part * (value[0] * grads[i][0] + value[1] * grads[i][1]);
                }
            }
        }
        for (i, d) in dofs.iter().enumerate() {
            if let Some(d) = d {
                b[*d] += local[i];
            }
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::huber_ball;
    use crate::mesh::{generate_acute_rhombus, generate_structured_square, hierarchy};

    fn space_at(level: usize) -> Arc<P1Space> {
        let mesh = hierarchy(generate_structured_square(2).unwrap(), level).pop().unwrap();
        Arc::new(P1Space::new(mesh))
    }

    #[test]
    fn sine_offset_at_center() {
        let p = make_sine_problem(1.0, huber_ball(1.0).unwrap(), 1.0, Domain::UnitSquare).unwrap();
        let f0 = p.coupling.offset()([0.5, 0.5]);
        assert!((f0 - (2.0 * PI * PI - 1.0)).abs() < 1e-12);
        assert!((f0 - 18.7392).abs() < 1e-4);
        assert!(!p.source.nonneg_certified);
    }

    #[test]
    fn rhombus_sine_field_derivatives() {
        // finite differences of the chart-composed sine product
        let f = SmoothField::sine_product(Domain::Rhombus).unwrap();
        let h = 1e-4;
        for p in [[0.6, 0.3], [0.9, 0.5], [0.4, 0.1]] {
            let v = |q: Point| (f.value)(q);
            let gx = (v([p[0] + h, p[1]]) - v([p[0] - h, p[1]])) / (2.0 * h);
            let gy = (v([p[0], p[1] + h]) - v([p[0], p[1] - h])) / (2.0 * h);
            let g = (f.grad)(p);
            assert!((g[0] - gx).abs() < 1e-6 && (g[1] - gy).abs() < 1e-6);
            let lap = (v([p[0] + h, p[1]]) + v([p[0] - h, p[1]]) + v([p[0], p[1] + h]) + v([p[0], p[1] - h])
                - 4.0 * v(p))
                / (h * h);
            assert!(((f.laplacian)(p) - lap).abs() < 1e-5);
        }
        // vanishes on the rhombus boundary
        let r3 = 3f64.sqrt();
        for t in [0.1, 0.5, 0.9] {
            for q in [[t, 0.0], [t + 0.5, r3 / 2.0], [0.5 * t, r3 / 2.0 * t], [1.0 + 0.5 * t, r3 / 2.0 * t]] {
                assert!((f.value)(q).abs() < 1e-14);
            }
        }
        assert!(SmoothField::sine_product(Domain::Custom).is_err());
    }

    #[test]
    fn zero_manufactured_problem() {
        let h = huber_ball(1.0).unwrap();
        let p = make_manufactured(1.0, h, 1.0, SmoothField::zero(), SmoothField::zero(), Domain::UnitSquare)
            .unwrap();
        assert_eq!(p.coupling.offset()([0.3, 0.2]), 0.0);
        let space = space_at(2);
        assert!(assemble_source_load(&space, &p.source).iter().all(|&b| b == 0.0));
    }

    #[test]
    fn nonsmooth_hamiltonian_rejected() {
        let h = crate::hamiltonian::finite_control(vec![[1.0, 0.0], [-1.0, 0.0]], vec![0.0, 0.0], 0.0).unwrap();
        assert!(make_sine_problem(1.0, h.clone(), 1.0, Domain::UnitSquare).is_err());
        assert!(make_rough_density_problem(1.0, h, 1.0).is_err());
    }

    #[test]
    fn unit_source_load_is_basis_integral() {
        let space = space_at(1);
        let src = SourceG {
            g0: Some(Arc::new(|_| 1.0)),
            flux: Flux::Zero,
            nonneg_certified: true,
        };
        let b = assemble_source_load(&space, &src);
        let mesh = space.mesh();
        for (i, bi) in b.iter().enumerate() {
            let v = space.vertex_of_dof(i);
            let patch: f64 = (0..mesh.num_triangles())
                .filter(|&k| mesh.triangles()[k].contains(&v))
                .map(|k| mesh.triangle_area(k))
                .sum();
            assert!((bi - patch / 3.0).abs() < 1e-15);
        }
        assert!(assemble_source_load(&space, &SourceG::zero()).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_flux_has_zero_load() {
        let space = space_at(2);
        let src = SourceG {
            g0: None,
            flux: Flux::Field(Arc::new(|_| [0.7, -1.3])),
            nonneg_certified: false,
        };
        for b in assemble_source_load(&space, &src) {
            assert!(b.abs() < 1e-14);
        }
        let rh = Arc::new(P1Space::new(Arc::new(generate_acute_rhombus(4).unwrap())));
        let src = SourceG {
            g0: None,
            flux: Flux::HalfPlaneIndicator {
                x_jump: 10.0,
                value: [1.0, 2.0],
            },
            nonneg_certified: false,
        };
        for b in assemble_source_load(&rh, &src) {
            assert!(b.abs() < 1e-14);
        }
    }

    #[test]
    fn rough_flux_load_matches_quadrature() {
        let space = space_at(4);
        let p = make_rough_density_problem(1.0, huber_ball(1.0).unwrap(), 1.0).unwrap();
        let b = assemble_source_load(&space, &p.source);
        let phi = space
            .interpolate(|x| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]))
            .unwrap();
        let pairing: f64 = b.iter().zip(phi.coeffs()).map(|(a, c)| a * c).sum();
        // independent route: degree-6 quadrature of ∂φ/∂x over elements left of x = 1/2
        let rule = quadrature(6).unwrap();
        let mesh = space.mesh();
        let mut oracle = 0.0;
        for k in 0..mesh.num_triangles() {
            let pts = mesh.triangle_points(k);
            let g = phi.grad_on_element(k);
            for (q, w) in rule.points.iter().zip(&rule.weights) {
                if bary_to_point(&pts, *q)[0] < 0.5 {
                    oracle += w * mesh.triangle_area(k) * g[0];
                }
            }
        }
        assert!((pairing - oracle).abs() <= 1e-10 * oracle.abs().max(1e-300), "{pairing} vs {oracle}");
        assert!(oracle.abs() > 1e-3);

        // a function supported right of the jump pairs to zero
        let right = space
            .interpolate(|x| if x[0] > 0.5 { (x[0] - 0.5) * (1.0 - x[0]) * x[1] * (1.0 - x[1]) } else { 0.0 })
            .unwrap();
        let pr: f64 = b.iter().zip(right.coeffs()).map(|(a, c)| a * c).sum();
        assert!(pr.abs() < 1e-15);
    }

    #[test]
    fn clipped_area() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!((clipped_area_left(&tri, 0.5) - (0.5 - 0.125)).abs() < 1e-15);
        assert_eq!(clipped_area_left(&tri, 0.0), 0.0);
        assert!((clipped_area_left(&tri, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn certification_by_sampling() {
        let space = space_at(3);
        let mut p = make_nonneg_density_problem(1.0, huber_ball(1.0).unwrap(), 1.0, Domain::UnitSquare).unwrap();
        assert!(p.certify_source_nonnegativity(&space));
        // ∫_{x<a} ∂ξ/∂x = ∫ ξ(a, y) dy ≥ 0 for every basis function
        let mut rough = make_rough_density_problem_at(1.0, huber_ball(1.0).unwrap(), 1.0, 1.0 / 3.0).unwrap();
        assert!(rough.certify_source_nonnegativity(&space));
        if let Flux::HalfPlaneIndicator { value, .. } = &mut rough.source.flux {
            *value = [-1.0, 0.0];
        }
        assert!(!rough.certify_source_nonnegativity(&space));
    }
}
