//! Conforming 2D triangulations with nested red refinement.
//!
//! Vertices of a refined mesh keep the indices they had in the parent mesh;
//! the midpoint of parent edge `e` becomes vertex `parent.num_vertices() + e`.
//! This makes nested injection of P1 functions a cheap recursive average.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::{cross, dot, norm, sub, Error, Point, Result};

/// Absolute tolerance for angle-condition sign checks.
pub const TOL_GEOM: f64 = 1e-12;

/// Links a refined mesh to the mesh it was refined from.
#[derive(Debug, Clone)]
pub struct Lineage {
    pub parent: Arc<Mesh2D>,
    /// For every fine vertex, the two parent vertices whose average gives its
    /// position (`[v, v]` for vertices inherited from the parent).
    pub vertex_parents: Vec<[usize; 2]>,
    /// For every fine triangle, the parent triangle containing it.
    pub triangle_parent: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Mesh2D {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_triangles: Vec<(usize, Option<usize>)>,
    /// Local edge `i` of a triangle is the edge opposite its local vertex `i`.
    triangle_edges: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
    level: usize,
    lineage: Option<Lineage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshQualityReport {
    pub h_max: f64,
    pub shape_regularity: f64,
    pub xz_satisfied: bool,
    pub xz_worst_edge_sum: f64,
    pub acute_theta: f64,
}

impl Mesh2D {
    /// Builds a level-0 mesh from raw connectivity.
    ///
    /// Clockwise triangles are reoriented; zero-area triangles and edges
    /// shared by more than two triangles are rejected.
    pub fn from_parts(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        Self::build(vertices, triangles, 0, None)
    }

    fn build(
        vertices: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        level: usize,
        lineage: Option<Lineage>,
    ) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Geometry("mesh has no triangles".into()));
        }
        for (k, t) in triangles.iter_mut().enumerate() {
            if let Some(&bad) = t.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::Geometry(format!(
                    "triangle {k} references vertex {bad} but the mesh has {} vertices",
                    vertices.len()
                )));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Geometry(format!("triangle {k} repeats a vertex")));
            }
            let a2 = cross(
                sub(vertices[t[1]], vertices[t[0]]),
                sub(vertices[t[2]], vertices[t[0]]),
            );
            if a2 == 0.0 || !a2.is_finite() {
                return Err(Error::Geometry(format!("triangle {k} is degenerate")));
            }
            if a2 < 0.0 {
                t.swap(1, 2);
            }
        }

        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut adjacency: Vec<Vec<usize>> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (k, t) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let a = t[(i + 1) % 3];
                let b = t[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    adjacency.push(Vec::new());
                    edges.len() - 1
                });
                adjacency[e].push(k);
                *slot = e;
            }
            triangle_edges.push(local);
        }

        let mut edge_triangles = Vec::with_capacity(edges.len());
        let mut boundary_vertex = vec![false; vertices.len()];
        for (e, adj) in adjacency.iter().enumerate() {
            match adj.as_slice() {
                [a] => {
                    edge_triangles.push((*a, None));
                    boundary_vertex[edges[e][0]] = true;
                    boundary_vertex[edges[e][1]] = true;
                }
                [a, b] => edge_triangles.push((*a, Some(*b))),
                _ => {
                    return Err(Error::Geometry(format!(
                        "edge {:?} is shared by {} triangles",
                        edges[e],
                        adj.len()
                    )))
                }
            }
        }

        Ok(Self {
            vertices,
            triangles,
            edges,
            edge_triangles,
            triangle_edges,
            boundary_vertex,
            level,
            lineage,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn lineage(&self) -> Option<&Lineage> {
        self.lineage.as_ref()
    }

    pub fn parent(&self) -> Option<&Arc<Mesh2D>> {
        self.lineage.as_ref().map(|l| &l.parent)
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn boundary_vertex_flags(&self) -> &[bool] {
        &self.boundary_vertex
    }

    /// Triangles adjacent to edge `e`; the second is `None` on the boundary.
    pub fn edge_triangles(&self, e: usize) -> (usize, Option<usize>) {
        self.edge_triangles[e]
    }

    /// Edge indices of triangle `k`, local edge `i` opposite local vertex `i`.
    pub fn triangle_edges(&self, k: usize) -> [usize; 3] {
        self.triangle_edges[k]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_triangles[e].1.is_none()
    }

    /// An edge with at least one endpoint in the interior of the domain.
    pub fn is_internal_edge(&self, e: usize) -> bool {
        let [a, b] = self.edges[e];
        !self.boundary_vertex[a] || !self.boundary_vertex[b]
    }

    pub fn triangle_points(&self, k: usize) -> [Point; 3] {
        let t = self.triangles[k];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn triangle_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangle_points(k);
        0.5 * cross(sub(b, a), sub(c, a))
    }

    pub fn triangle_diameter(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangle_points(k);
        norm(sub(b, a)).max(norm(sub(c, b))).max(norm(sub(a, c)))
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        norm(sub(self.vertices[b], self.vertices[a]))
    }

    /// Unit tangent pointing from the lower-indexed to the higher-indexed vertex.
    pub fn edge_tangent(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let d = sub(self.vertices[b], self.vertices[a]);
        let l = norm(d);
        [d[0] / l, d[1] / l]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|k| self.triangle_area(k)).sum()
    }

    pub fn h_max(&self) -> f64 {
        (0..self.num_triangles())
            .map(|k| self.triangle_diameter(k))
            .fold(0.0, f64::max)
    }

    /// Largest ratio of element diameter to inscribed-circle radius.
    pub fn shape_regularity(&self) -> f64 {
        (0..self.num_triangles())
            .map(|k| {
                let [a, b, c] = self.triangle_points(k);
                let perimeter = norm(sub(b, a)) + norm(sub(c, b)) + norm(sub(a, c));
                let inradius = 2.0 * self.triangle_area(k) / perimeter;
                self.triangle_diameter(k) / inradius
            })
            .fold(0.0, f64::max)
    }

    /// Interior angles of triangle `k`, angle `i` at local vertex `i`.
    pub fn triangle_angles(&self, k: usize) -> Result<[f64; 3]> {
        let p = self.triangle_points(k);
        let mut out = [0.0; 3];
        for (i, angle) in out.iter_mut().enumerate() {
            let u = sub(p[(i + 1) % 3], p[i]);
            let v = sub(p[(i + 2) % 3], p[i]);
            let c = cross(u, v);
            if c.abs() <= f64::EPSILON * norm(u) * norm(v) {
                return Err(Error::Geometry(format!("triangle {k} is degenerate")));
            }
            *angle = c.abs().atan2(dot(u, v));
        }
        Ok(out)
    }

    /// Cotangent of the angle of triangle `k` at local vertex `i`.
    fn cot_at(&self, k: usize, i: usize) -> Result<f64> {
        let p = self.triangle_points(k);
        let u = sub(p[(i + 1) % 3], p[i]);
        let v = sub(p[(i + 2) % 3], p[i]);
        let c = cross(u, v);
        if c.abs() <= f64::EPSILON * norm(u) * norm(v) {
            return Err(Error::Geometry(format!("triangle {k} is degenerate")));
        }
        Ok(dot(u, v) / c.abs())
    }

    /// Xu–Zikatanov condition: for every edge shared by two triangles the
    /// cotangents of the two opposite angles must sum to a nonnegative value.
    ///
    /// Returns the verdict and the smallest sum (`+∞` if there is no shared edge).
    pub fn check_xz(&self) -> Result<(bool, f64)> {
        let mut worst = f64::INFINITY;
        for e in 0..self.num_edges() {
            let (k0, Some(k1)) = self.edge_triangles[e] else {
                continue;
            };
            let mut sum = 0.0;
            for k in [k0, k1] {
                let local = self.triangle_edges[k]
                    .iter()
                    .position(|&x| x == e)
                    .expect("edge belongs to its adjacent triangle");
                sum += self.cot_at(k, local)?;
            }
            worst = worst.min(sum);
        }
        Ok((worst >= -TOL_GEOM, worst))
    }

    /// Largest θ ≥ 0 such that every interior angle is at most π/2 − θ.
    ///
    /// Values within [`TOL_GEOM`] of zero are reported as exactly zero, so
    /// right triangles are never classified as strictly acute.
    pub fn check_acute(&self) -> Result<f64> {
        let mut max_angle: f64 = 0.0;
        for k in 0..self.num_triangles() {
            for a in self.triangle_angles(k)? {
                max_angle = max_angle.max(a);
            }
        }
        let theta = std::f64::consts::FRAC_PI_2 - max_angle;
        Ok(if theta <= TOL_GEOM { 0.0 } else { theta })
    }

    pub fn quality_report(&self) -> Result<MeshQualityReport> {
        let (xz_satisfied, xz_worst_edge_sum) = self.check_xz()?;
        Ok(MeshQualityReport {
            h_max: self.h_max(),
            shape_regularity: self.shape_regularity(),
            xz_satisfied,
            xz_worst_edge_sum,
            acute_theta: self.check_acute()?,
        })
    }

    /// Index of a triangle containing `p`, if any.
    pub fn locate(&self, p: Point) -> Option<usize> {
        (0..self.num_triangles()).find(|&k| {
            let [a, b, c] = self.triangle_points(k);
            let a2 = cross(sub(b, a), sub(c, a));
            let tol = -1e-12 * a2;
            cross(sub(b, a), sub(p, a)) >= tol
                && cross(sub(c, b), sub(p, b)) >= tol
                && cross(sub(a, c), sub(p, c)) >= tol
        })
    }

    /// True if `self` is `ancestor` or was obtained from it by refinement.
    pub fn descends_from(&self, ancestor: &Mesh2D) -> bool {
        let mut current = self;
        loop {
            if std::ptr::eq(current, ancestor) {
                return true;
            }
            match current.parent() {
                Some(p) => current = p,
                None => return false,
            }
        }
    }
}

/// Unit square split into `n × n` cells, each cut along its lower-left to
/// upper-right diagonal.
pub fn generate_structured_square(n: usize) -> Result<Mesh2D> {
    if n == 0 {
        return Err(Error::Config("structured square needs n ≥ 1".into()));
    }
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh2D::from_parts(vertices, triangles)
}

/// Rhombus with corners (0,0), (1,0), (3/2, √3/2), (1/2, √3/2) split into
/// `2n²` equilateral triangles of side `1/n`.
pub fn generate_acute_rhombus(n: usize) -> Result<Mesh2D> {
    if n == 0 {
        return Err(Error::Config("acute rhombus needs n ≥ 1".into()));
    }
    let h = 1.0 / n as f64;
    let s3 = 3f64.sqrt() / 2.0;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let (a, b) = (i as f64 * h, j as f64 * h);
            vertices.push([a + 0.5 * b, s3 * b]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
            triangles.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh2D::from_parts(vertices, triangles)
}

/// Splits every triangle into four similar children through its edge midpoints.
pub fn refine_red(mesh: &Arc<Mesh2D>) -> Mesh2D {
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices.clone();
    let mut vertex_parents: Vec<[usize; 2]> = (0..nv).map(|v| [v, v]).collect();
    for &[a, b] in &mesh.edges {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        vertex_parents.push([a, b]);
    }
    let mut triangles = Vec::with_capacity(4 * mesh.num_triangles());
    let mut triangle_parent = Vec::with_capacity(4 * mesh.num_triangles());
    for (k, t) in mesh.triangles.iter().enumerate() {
        // midpoint opposite local vertex i
        let m = mesh.triangle_edges[k].map(|e| nv + e);
        triangles.push([t[0], m[2], m[1]]);
        triangles.push([m[2], t[1], m[0]]);
        triangles.push([m[1], m[0], t[2]]);
        triangles.push([m[0], m[1], m[2]]);
        triangle_parent.extend([k; 4]);
    }
    let lineage = Lineage {
        parent: Arc::clone(mesh),
        vertex_parents,
        triangle_parent,
    };
    Mesh2D::build(vertices, triangles, mesh.level + 1, Some(lineage))
        .expect("red refinement of a valid mesh is valid")
}

/// The base mesh followed by `levels` successive red refinements.
pub fn hierarchy(base: Mesh2D, levels: usize) -> Vec<Arc<Mesh2D>> {
    let mut out = vec![Arc::new(base)];
    for _ in 0..levels {
        let next = refine_red(out.last().unwrap());
        out.push(Arc::new(next));
    }
    out
}

/// Serializes a mesh in the `MFGMESH 1` text format.
pub fn format_mesh(mesh: &Mesh2D) -> String {
    let mut s = String::new();
    s.push_str("MFGMESH 1\n");
    let _ = writeln!(s, "vertices {}", mesh.num_vertices());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:.16e} {:.16e}", p[0], p[1]);
    }
    let _ = writeln!(s, "triangles {}", mesh.num_triangles());
    for t in &mesh.triangles {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn write_mesh(mesh: &Mesh2D, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<Mesh2D> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

/// Parses the `MFGMESH 1` text format. Blank lines are ignored.
pub fn parse_mesh(text: &str) -> Result<Mesh2D> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let perr = |line: usize, message: String| Error::Parse { line, message };
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| perr(0, format!("unexpected end of file, expected {what}")))
    };

    let (ln, header) = next("header")?;
    if header != "MFGMESH 1" {
        return Err(perr(ln, format!("expected header `MFGMESH 1`, found `{header}`")));
    }
    let count = |ln: usize, line: &str, key: &str| -> Result<usize> {
        let mut it = line.split_whitespace();
        match (it.next(), it.next().map(str::parse::<usize>), it.next()) {
            (Some(k), Some(Ok(n)), None) if k == key => Ok(n),
            _ => Err(perr(ln, format!("expected `{key} <count>`, found `{line}`"))),
        }
    };

    let (ln, line) = next("vertex count")?;
    let nv = count(ln, line, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = next("vertex coordinates")?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| perr(ln, format!("bad coordinate: {e}")))?;
        match vals.as_slice() {
            [x, y] if x.is_finite() && y.is_finite() => vertices.push([*x, *y]),
            _ => return Err(perr(ln, format!("expected two finite coordinates, found `{line}`"))),
        }
    }

    let (ln, line) = next("triangle count")?;
    let nt = count(ln, line, "triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    let mut tri_lines = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, line) = next("triangle indices")?;
        let idx: Vec<usize> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| perr(ln, format!("bad vertex index: {e}")))?;
        let [a, b, c] = idx[..] else {
            return Err(perr(ln, format!("expected three vertex indices, found `{line}`")));
        };
        if let Some(bad) = [a, b, c].into_iter().find(|&v| v >= nv) {
            return Err(perr(ln, format!("vertex index {bad} out of range (mesh has {nv} vertices)")));
        }
        triangles.push([a, b, c]);
        tri_lines.push(ln);
    }
    if let Some((ln, line)) = lines.next() {
        return Err(perr(ln, format!("trailing content `{line}`")));
    }

    Mesh2D::from_parts(vertices, triangles).map_err(|e| {
        // Attribute connectivity errors to the first triangle line.
        let ln = tri_lines.first().copied().unwrap_or(0);
        match e {
            Error::Geometry(msg) => perr(ln, msg),
            other => other,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_6, PI};

    fn kite() -> Mesh2D {
        let a = (50f64).to_radians().tan();
        Mesh2D::from_parts(
            vec![[-1.0, 0.0], [0.0, -a], [0.0, a], [1.0, 0.0]],
            vec![[0, 1, 2], [3, 2, 1]],
        )
        .unwrap()
    }

    #[test]
    fn structured_square_counts() {
        let m = generate_structured_square(1).unwrap();
        assert_eq!((m.num_triangles(), m.num_vertices(), m.num_edges()), (2, 4, 5));
        let m = generate_structured_square(2).unwrap();
        assert_eq!((m.num_triangles(), m.num_vertices(), m.num_edges()), (8, 9, 16));
        assert_eq!(m.boundary_vertex_flags().iter().filter(|&&b| !b).count(), 1);
    }

    #[test]
    fn structured_square_satisfies_xz() {
        let m = generate_structured_square(2).unwrap();
        let (ok, worst) = m.check_xz().unwrap();
        assert!(ok);
        assert!(worst.abs() < 1e-15, "worst = {worst}");
        assert_eq!(m.check_acute().unwrap(), 0.0);
    }

    #[test]
    fn single_triangle_is_vacuously_xz() {
        let m = Mesh2D::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        assert_eq!(m.check_xz().unwrap(), (true, f64::INFINITY));
    }

    #[test]
    fn obtuse_kite_fails_xz() {
        let (ok, worst) = kite().check_xz().unwrap();
        assert!(!ok);
        let expected = 2.0 / (100f64).to_radians().tan();
        assert!((worst - expected).abs() < 1e-12);
        assert!((worst + 0.3527).abs() < 1e-4);
        assert_eq!(kite().check_acute().unwrap(), 0.0);
    }

    #[test]
    fn rhombus_is_equilateral() {
        let m = generate_acute_rhombus(1).unwrap();
        assert_eq!(m.num_triangles(), 2);
        for k in 0..2 {
            for a in m.triangle_angles(k).unwrap() {
                assert!((a - PI / 3.0).abs() < 1e-14);
            }
        }
        assert!((m.check_acute().unwrap() - FRAC_PI_6).abs() < 1e-14);
        assert!((FRAC_PI_6.sin() - 0.5).abs() < 1e-15);

        let m = generate_acute_rhombus(3).unwrap();
        assert_eq!(m.num_triangles(), 18);
        let area = 3f64.sqrt() / 4.0 / 9.0;
        for k in 0..m.num_triangles() {
            assert!((m.triangle_area(k) - area).abs() < 1e-15);
        }
        assert!(m.check_xz().unwrap().0);
    }

    #[test]
    fn red_refinement_halves_and_keeps_vertices() {
        let coarse = Arc::new(generate_structured_square(1).unwrap());
        let fine = refine_red(&coarse);
        assert_eq!(fine.num_triangles(), 8);
        assert_eq!(fine.level(), 1);
        for (v, p) in coarse.vertices().iter().enumerate() {
            assert_eq!(fine.vertices()[v], *p);
        }
        assert_eq!(fine.h_max(), coarse.h_max() / 2.0);
        assert!(fine.descends_from(&coarse));
        assert!(!coarse.descends_from(&fine));

        let tri = Arc::new(
            Mesh2D::from_parts(
                vec![[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]],
                vec![[0, 1, 2]],
            )
            .unwrap(),
        );
        let fine = refine_red(&tri);
        assert_eq!(fine.num_triangles(), 4);
        for k in 0..4 {
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                let [p, q] = [fine.triangles()[k][i], fine.triangles()[k][j]];
                let l = norm(sub(fine.vertices()[p], fine.vertices()[q]));
                assert!((l - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn refinement_preserves_mesh_conditions() {
        let square = hierarchy(generate_structured_square(2).unwrap(), 3);
        let delta0 = square[0].shape_regularity();
        for m in &square {
            assert!(m.check_xz().unwrap().0);
            assert!((m.shape_regularity() - delta0).abs() < 1e-12 * delta0);
            assert!((m.total_area() - 1.0).abs() < 1e-12);
        }
        // right isosceles triangle: diam/ρ = 2 + 2√2
        assert!((delta0 - (2.0 + 2.0 * 2f64.sqrt())).abs() < 1e-12);

        let rhombus = hierarchy(generate_acute_rhombus(2).unwrap(), 3);
        for m in &rhombus {
            assert!((m.check_acute().unwrap() - FRAC_PI_6).abs() < 1e-12);
            assert!((m.shape_regularity() - 2.0 * 3f64.sqrt()).abs() < 1e-12);
            assert!((m.total_area() - 3f64.sqrt() / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mesh_text_roundtrip() {
        let m = generate_acute_rhombus(2).unwrap();
        let back = parse_mesh(&format_mesh(&m)).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
    }

    #[test]
    fn mesh_parse_errors() {
        let bad_index = "MFGMESH 1\nvertices 4\n0 0\n1 0\n1 1\n0 1\ntriangles 2\n0 1 2\n0 2 99\n";
        match parse_mesh(bad_index) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 9),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_mesh("MFGMESH 2\n") {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("expected header error, got {other:?}"),
        }
        match parse_mesh("MFGMESH 1\nvertices 1\n0 zero\n") {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("expected coordinate error, got {other:?}"),
        }
        let overshared = "MFGMESH 1\nvertices 5\n0 0\n1 0\n0 1\n0 -1\n-1 0.5\ntriangles 3\n0 1 2\n0 3 1\n0 1 4\n";
        assert!(matches!(parse_mesh(overshared), Err(Error::Parse { .. })));
    }

    #[test]
    fn clockwise_triangles_are_reoriented() {
        let text = "MFGMESH 1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 2 1\n";
        let m = parse_mesh(text).unwrap();
        assert!(m.triangle_area(0) > 0.0);
        assert!((m.triangle_area(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let r = Mesh2D::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![[0, 1, 2]]);
        assert!(matches!(r, Err(Error::Geometry(_))));
    }
}
