//! Nodal P1 elements with homogeneous Dirichlet conditions.
//!
//! Only interior vertices carry degrees of freedom; they are numbered in
//! increasing vertex order. Boundary values are identically zero.

use std::io::Write;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use crate::assembly::ElementPattern;
use crate::mesh::Mesh2D;
use crate::{Error, Point, Result, Vec2};

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point) -> Vec2 + Send + Sync>;

/// Symmetric quadrature on the reference triangle. Weights sum to one and are
/// scaled by the element area where the rule is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Degree used for data integrals and error norms.
pub const DEFAULT_QUADRATURE_DEGREE: usize = 4;

fn orbit_21(a: f64, w: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>) {
    let b = 1.0 - 2.0 * a;
    pts.extend([[a, a, b], [a, b, a], [b, a, a]]);
    wts.extend([w; 3]);
}

fn orbit_111(a: f64, b: f64, w: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>) {
    let c = 1.0 - a - b;
    pts.extend([[a, b, c], [b, a, c], [a, c, b], [c, a, b], [b, c, a], [c, b, a]]);
    wts.extend([w; 6]);
}

/// Gaussian rule exact for polynomials of total degree `degree` (1..=6).
pub fn quadrature(degree: usize) -> Result<QuadratureRule> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let exact = match degree {
        1 => {
            points.push([1.0 / 3.0; 3]);
            weights.push(1.0);
            1
        }
        2 => {
            orbit_21(1.0 / 6.0, 1.0 / 3.0, &mut points, &mut weights);
            2
        }
        // The 6-point degree-4 rule also serves degree 3; the classical
        // 4-point degree-3 rule has a negative weight.
        3 | 4 => {
            orbit_21(0.445_948_490_915_964_886, 0.223_381_589_678_011_466, &mut points, &mut weights);
            orbit_21(0.091_576_213_509_770_743, 0.109_951_743_655_321_868, &mut points, &mut weights);
            4
        }
        5 => {
            let s15 = 15f64.sqrt();
            points.push([1.0 / 3.0; 3]);
            weights.push(9.0 / 40.0);
            orbit_21((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0, &mut points, &mut weights);
            orbit_21((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0, &mut points, &mut weights);
            5
        }
        6 => {
            orbit_21(0.249_286_745_170_910_421, 0.116_786_275_726_379_366, &mut points, &mut weights);
            orbit_21(0.063_089_014_491_502_228, 0.050_844_906_370_206_817, &mut points, &mut weights);
            orbit_111(
                0.053_145_049_844_816_947,
                0.310_352_451_033_784_405,
                0.082_851_075_618_373_575,
                &mut points,
                &mut weights,
            );
            6
        }
        _ => {
            return Err(Error::Config(format!(
                "unsupported quadrature degree {degree} (supported: 1..=6)"
            )))
        }
    };
    Ok(QuadratureRule {
        points,
        weights,
        degree: exact,
    })
}

/// Maps barycentric coordinates on an element to a physical point.
#[inline]
pub fn bary_to_point(p: &[Point; 3], b: [f64; 3]) -> Point {
    [
        b[0] * p[0][0] + b[1] * p[1][0] + b[2] * p[2][0],
        b[0] * p[0][1] + b[1] * p[1][1] + b[2] * p[2][1],
    ]
}

#[derive(Debug)]
pub struct P1Space {
    mesh: Arc<Mesh2D>,
    dof_of_vertex: Vec<Option<usize>>,
    vertex_of_dof: Vec<usize>,
    elem_grads: Vec<[Vec2; 3]>,
    elem_areas: Vec<f64>,
    pattern: OnceLock<Arc<ElementPattern>>,
}

impl P1Space {
    pub fn new(mesh: Arc<Mesh2D>) -> Self {
        let mut dof_of_vertex = vec![None; mesh.num_vertices()];
        let mut vertex_of_dof = Vec::new();
        for (v, slot) in dof_of_vertex.iter_mut().enumerate() {
            if !mesh.is_boundary_vertex(v) {
                *slot = Some(vertex_of_dof.len());
                vertex_of_dof.push(v);
            }
        }
        let mut elem_grads = Vec::with_capacity(mesh.num_triangles());
        let mut elem_areas = Vec::with_capacity(mesh.num_triangles());
        for k in 0..mesh.num_triangles() {
            let [p0, p1, p2] = mesh.triangle_points(k);
            let area = mesh.triangle_area(k);
            let s = 0.5 / area;
            elem_grads.push([
                [(p1[1] - p2[1]) * s, (p2[0] - p1[0]) * s],
                [(p2[1] - p0[1]) * s, (p0[0] - p2[0]) * s],
                [(p0[1] - p1[1]) * s, (p1[0] - p0[0]) * s],
            ]);
            elem_areas.push(area);
        }
        Self {
            mesh,
            dof_of_vertex,
            vertex_of_dof,
            elem_grads,
            elem_areas,
            pattern: OnceLock::new(),
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh2D> {
        &self.mesh
    }

    /// Number of interior degrees of freedom.
    pub fn ndof(&self) -> usize {
        self.vertex_of_dof.len()
    }

    pub fn dof_of_vertex(&self, v: usize) -> Option<usize> {
        self.dof_of_vertex[v]
    }

    pub fn vertex_of_dof(&self, i: usize) -> usize {
        self.vertex_of_dof[i]
    }

    /// Interior dof indices of the three vertices of triangle `k`.
    pub fn element_dofs(&self, k: usize) -> [Option<usize>; 3] {
        self.mesh.triangles()[k].map(|v| self.dof_of_vertex[v])
    }

    /// Constant gradients of the three local basis functions on triangle `k`.
    pub fn element_grads(&self, k: usize) -> &[Vec2; 3] {
        &self.elem_grads[k]
    }

    pub fn element_area(&self, k: usize) -> f64 {
        self.elem_areas[k]
    }

    pub fn num_elements(&self) -> usize {
        self.elem_areas.len()
    }

    /// Gradient on triangle `k` of the function with interior values `coeffs`.
    pub fn element_gradient(&self, coeffs: &[f64], k: usize) -> Vec2 {
        let g = &self.elem_grads[k];
        let mut out = [0.0, 0.0];
        for (i, d) in self.element_dofs(k).into_iter().enumerate() {
            if let Some(d) = d {
                out[0] += coeffs[d] * g[i][0];
                out[1] += coeffs[d] * g[i][1];
            }
        }
        out
    }

    pub(crate) fn pattern_cell(&self) -> &OnceLock<Arc<ElementPattern>> {
        &self.pattern
    }

    pub fn zero(self: &Arc<Self>) -> P1Function {
        P1Function::new(Arc::clone(self), vec![0.0; self.ndof()])
    }

    /// Nodal interpolant of `f`; boundary values are dropped.
    pub fn interpolate(self: &Arc<Self>, f: impl Fn(Point) -> f64) -> Result<P1Function> {
        let verts = self.mesh.vertices();
        let mut coeffs = Vec::with_capacity(self.ndof());
        for &v in &self.vertex_of_dof {
            let value = f(verts[v]);
            if !value.is_finite() {
                return Err(Error::Numeric(format!(
                    "interpolated field is not finite at vertex {v} {:?}",
                    verts[v]
                )));
            }
            coeffs.push(value);
        }
        Ok(P1Function::new(Arc::clone(self), coeffs))
    }
}

/// A function in the P1 space, stored by its interior nodal values.
#[derive(Debug, Clone)]
pub struct P1Function {
    space: Arc<P1Space>,
    coeffs: Vec<f64>,
}

impl P1Function {
    pub fn new(space: Arc<P1Space>, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), space.ndof(), "coefficient vector length");
        Self { space, coeffs }
    }

    pub fn space(&self) -> &Arc<P1Space> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Values at the three vertices of triangle `k`.
    pub fn local_values(&self, k: usize) -> [f64; 3] {
        self.space
            .element_dofs(k)
            .map(|d| d.map_or(0.0, |i| self.coeffs[i]))
    }

    pub fn eval(&self, k: usize, bary: [f64; 3]) -> f64 {
        let v = self.local_values(k);
        v[0] * bary[0] + v[1] * bary[1] + v[2] * bary[2]
    }

    pub fn grad_on_element(&self, k: usize) -> Vec2 {
        self.space.element_gradient(&self.coeffs, k)
    }

    /// Element-wise gradients for every triangle.
    pub fn element_gradients(&self) -> Vec<Vec2> {
        (0..self.space.num_elements())
            .map(|k| self.grad_on_element(k))
            .collect()
    }

    /// Values at every mesh vertex, boundary vertices included.
    pub fn vertex_values(&self) -> Vec<f64> {
        (0..self.space.mesh().num_vertices())
            .map(|v| self.space.dof_of_vertex(v).map_or(0.0, |i| self.coeffs[i]))
            .collect()
    }

    pub fn min_nodal(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV `vertex_index,x,y,value` over all vertices.
    pub fn to_csv(&self, header_comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = header_comment {
            s.push_str("# ");
            s.push_str(c);
            s.push('\n');
        }
        s.push_str("vertex_index,x,y,value\n");
        let verts = self.space.mesh().vertices();
        for (v, val) in self.vertex_values().iter().enumerate() {
            s.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}\n",
                v, verts[v][0], verts[v][1], val
            ));
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, header_comment: Option<&str>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv(header_comment).as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_acute_rhombus, generate_structured_square, hierarchy};

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// ∫_ref x^a y^b divided by the reference area 1/2.
    fn monomial_mean(a: u32, b: u32) -> f64 {
        2.0 * factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn rules_are_exact_to_their_degree() {
        for degree in 1..=6 {
            let rule = quadrature(degree).unwrap();
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                        .sum();
                    let exact = monomial_mean(a, b);
                    assert!((q - exact).abs() < 1e-15, "degree {degree}, x^{a} y^{b}: {q} vs {exact}");
                }
            }
        }
        assert!(quadrature(7).is_err());
        assert!(quadrature(0).is_err());
        assert_eq!(quadrature(1).unwrap().points, vec![[1.0 / 3.0; 3]]);
    }

    #[test]
    fn degree_two_integrates_x_squared() {
        let rule = quadrature(2).unwrap();
        // reference triangle has area 1/2; point coordinate x is barycentric 1
        let q: f64 = rule.points.iter().zip(&rule.weights).map(|(p, w)| w * p[1] * p[1]).sum();
        assert!((0.5 * q - 1.0 / 12.0).abs() < 1e-16);
    }

    #[test]
    fn gradients_partition_unity() {
        let mesh = Arc::new(generate_acute_rhombus(3).unwrap());
        let space = P1Space::new(Arc::clone(&mesh));
        for k in 0..space.num_elements() {
            let g = space.element_grads(k);
            let pts = mesh.triangle_points(k);
            for c in 0..2 {
                assert!((g[0][c] + g[1][c] + g[2][c]).abs() < 1e-12);
            }
            for i in 0..3 {
                let opp = crate::norm(crate::sub(pts[(i + 2) % 3], pts[(i + 1) % 3]));
                let gn = crate::norm(g[i]);
                assert!((gn - opp / (2.0 * space.element_area(k))).abs() < 1e-12 * gn);
            }
        }
    }

    #[test]
    fn reference_gradient() {
        let mesh = Arc::new(
            Mesh2D::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap(),
        );
        let space = P1Space::new(mesh);
        let g = space.element_grads(0);
        assert_eq!(g, &[[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
        // nodal values (0, 1, 0) give gradient (1, 0)
        let grad = [
            0.0 * g[0][0] + 1.0 * g[1][0] + 0.0 * g[2][0],
            0.0 * g[0][1] + 1.0 * g[1][1] + 0.0 * g[2][1],
        ];
        assert_eq!(grad, [1.0, 0.0]);
    }

    #[test]
    fn interpolation_and_evaluation() {
        let space = Arc::new(P1Space::new(Arc::new(generate_structured_square(2).unwrap())));
        let zero = space.interpolate(|_| 0.0).unwrap();
        assert!(zero.coeffs().iter().all(|&c| c == 0.0));
        assert!(zero.element_gradients().iter().all(|g| *g == [0.0, 0.0]));

        let f = space.interpolate(|p| p[0] * (1.0 - p[0])).unwrap();
        assert_eq!(f.coeffs(), &[0.25]);

        assert!(space.interpolate(|_| f64::NAN).is_err());
    }

    #[test]
    fn affine_functions_reproduced() {
        let levels = hierarchy(generate_structured_square(2).unwrap(), 2);
        let space = Arc::new(P1Space::new(Arc::clone(&levels[2])));
        let mesh = space.mesh().clone();
        // x on interior elements (those away from the boundary) has gradient (1, 0)
        let fx = space.interpolate(|p| p[0]).unwrap();
        for k in 0..mesh.num_triangles() {
            if mesh.triangles()[k].iter().all(|&v| !mesh.is_boundary_vertex(v)) {
                let g = fx.grad_on_element(k);
                assert!((g[0] - 1.0).abs() < 1e-13 && g[1].abs() < 1e-13);
            }
        }
        // away from the boundary the interpolant of x is x itself
        let rule = quadrature(4).unwrap();
        for k in 0..mesh.num_triangles() {
            if mesh.triangles()[k].iter().all(|&v| !mesh.is_boundary_vertex(v)) {
                let pts = mesh.triangle_points(k);
                for b in &rule.points {
                    let x = bary_to_point(&pts, *b);
                    assert!((fx.eval(k, *b) - x[0]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn csv_export_includes_boundary() {
        let space = Arc::new(P1Space::new(Arc::new(generate_structured_square(2).unwrap())));
        let f = space.interpolate(|_| 2.0).unwrap();
        let csv = f.to_csv(Some("hash"));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# hash");
        assert_eq!(lines[1], "vertex_index,x,y,value");
        assert_eq!(lines.len(), 2 + 9);
        assert!(lines[2].ends_with(",0.0000000000000000e0"));
        assert!(lines[6].ends_with(",2.0000000000000000e0"));
    }
}
