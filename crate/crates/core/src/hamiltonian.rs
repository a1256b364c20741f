//! Hamiltonians of the form `H(x, p) = sup_α (b(x, α)·p − f(x, α))`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{assemble_h1_gram, assemble_mass, assemble_stiffness};
use crate::fespace::{P1Function, P1Space};
use crate::solver::RieszMap;
use crate::{dot, norm, Error, Point, Result, Vec2};

/// Exponent `γ` of the semismooth remainder bound in two dimensions.
pub const SEMISMOOTH_GAMMA: f64 = 1.0 / 9.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum HamiltonianSpec {
    /// Controls in the closed disk of radius `radius`, drift `α`, cost `|α|²/2`.
    HuberBall { radius: f64 },
    /// Finitely many controls; `smoothing > 0` replaces the max by a log-sum-exp.
    FiniteControl {
        drifts: Vec<Vec2>,
        costs: Vec<f64>,
        smoothing: f64,
    },
}

pub fn huber_ball(radius: f64) -> Result<HamiltonianSpec> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Config(format!("huber radius must be positive, got {radius}")));
    }
    Ok(HamiltonianSpec::HuberBall { radius })
}

pub fn finite_control(drifts: Vec<Vec2>, costs: Vec<f64>, smoothing: f64) -> Result<HamiltonianSpec> {
    if drifts.is_empty() || drifts.len() != costs.len() {
        return Err(Error::Config(format!(
            "finite control set needs equal-length nonempty drifts and costs ({} vs {})",
            drifts.len(),
            costs.len()
        )));
    }
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::Config(format!("smoothing must be ≥ 0, got {smoothing}")));
    }
    Ok(HamiltonianSpec::FiniteControl {
        drifts,
        costs,
        smoothing,
    })
}

impl HamiltonianSpec {
    pub fn value(&self, _x: Point, p: Vec2) -> f64 {
        match self {
            Self::HuberBall { radius: r } => {
                let n = norm(p);
                if n <= *r {
                    0.5 * n * n
                } else {
                    r * n - 0.5 * r * r
                }
            }
            Self::FiniteControl {
                drifts,
                costs,
                smoothing,
            } => {
                let scores = drifts.iter().zip(costs).map(|(b, f)| dot(*b, p) - f);
                if *smoothing == 0.0 {
                    scores.fold(f64::NEG_INFINITY, f64::max)
                } else {
                    let s: Vec<f64> = scores.collect();
                    let top = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let sum: f64 = s.iter().map(|v| ((v - top) / smoothing).exp()).sum();
                    top + smoothing * sum.ln()
                }
            }
        }
    }

    pub fn grad_p(&self, _x: Point, p: Vec2) -> Vec2 {
        match self {
            Self::HuberBall { radius: r } => {
                let n = norm(p);
                if n <= *r {
                    p
                } else {
                    [r * p[0] / n, r * p[1] / n]
                }
            }
            Self::FiniteControl {
                drifts,
                costs,
                smoothing,
            } => {
                let scores: Vec<f64> = drifts.iter().zip(costs).map(|(b, f)| dot(*b, p) - f).collect();
                if *smoothing == 0.0 {
                    // lowest index wins ties
                    let mut best = 0;
                    for (a, s) in scores.iter().enumerate() {
                        if *s > scores[best] {
                            best = a;
                        }
                    }
                    drifts[best]
                } else {
                    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let w: Vec<f64> = scores.iter().map(|v| ((v - top) / smoothing).exp()).collect();
                    let total: f64 = w.iter().sum();
                    let mut g = [0.0, 0.0];
                    for (b, wa) in drifts.iter().zip(&w) {
                        g[0] += wa * b[0];
                        g[1] += wa * b[1];
                    }
                    [g[0] / total, g[1] / total]
                }
            }
        }
    }

    /// Lipschitz constant of `H` in `p`, equal to the largest drift magnitude.
    pub fn l_h(&self) -> f64 {
        match self {
            Self::HuberBall { radius } => *radius,
            Self::FiniteControl { drifts, .. } => drifts.iter().map(|b| norm(*b)).fold(0.0, f64::max),
        }
    }

    /// Growth constant `max(‖b‖, ‖f‖)`.
    pub fn c_h(&self) -> f64 {
        match self {
            Self::HuberBall { radius: r } => r.max(0.5 * r * r),
            Self::FiniteControl { costs, .. } => {
                self.l_h().max(costs.iter().map(|f| f.abs()).fold(0.0, f64::max))
            }
        }
    }

    /// Lipschitz constant of `∂H/∂p`; infinite for the nonsmooth max.
    pub fn l_hp(&self) -> f64 {
        match self {
            Self::HuberBall { .. } => 1.0,
            Self::FiniteControl { smoothing, .. } => {
                if *smoothing == 0.0 {
                    f64::INFINITY
                } else {
                    2.0 * self.l_h().powi(2) / smoothing
                }
            }
        }
    }

    pub fn is_smooth(&self) -> bool {
        match self {
            Self::HuberBall { .. } => true,
            Self::FiniteControl { smoothing, .. } => *smoothing > 0.0,
        }
    }

    /// The built-in Hamiltonians do not depend on `x`.
    pub fn depends_on_x(&self) -> bool {
        false
    }

    /// Box half-width used when sampling momenta for the property checks.
    fn sample_scale(&self) -> f64 {
        3.0 * self.l_h().max(1.0)
    }
}

fn sample_xp(rng: &mut ChaCha8Rng, scale: f64) -> (Point, Vec2) {
    let x = [rng.gen::<f64>(), rng.gen::<f64>()];
    let p = [rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)];
    (x, p)
}

/// Largest relative discrepancy between `grad_p` and central differences
/// (step `1e-6`) over random samples. Relative to `max(|grad|, 1)`.
pub fn check_gradient(spec: &HamiltonianSpec, samples: usize, seed: u64) -> Result<f64> {
    if !spec.is_smooth() {
        return Err(Error::Config("gradient check needs a differentiable Hamiltonian".into()));
    }
    const STEP: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (x, p) = sample_xp(&mut rng, spec.sample_scale());
        let g = spec.grad_p(x, p);
        let fd = [
            (spec.value(x, [p[0] + STEP, p[1]]) - spec.value(x, [p[0] - STEP, p[1]])) / (2.0 * STEP),
            (spec.value(x, [p[0], p[1] + STEP]) - spec.value(x, [p[0], p[1] - STEP])) / (2.0 * STEP),
        ];
        let err = norm([fd[0] - g[0], fd[1] - g[1]]) / norm(g).max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Largest midpoint-convexity excess `H((p+q)/2) − (H(p)+H(q))/2`.
pub fn convexity_excess(spec: &HamiltonianSpec, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = spec.sample_scale();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let (x, p) = sample_xp(&mut rng, s);
        let q = [rng.gen_range(-s..s), rng.gen_range(-s..s)];
        let mid = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
        let excess = spec.value(x, mid) - 0.5 * (spec.value(x, p) + spec.value(x, q));
        worst = worst.max(excess);
    }
    worst
}

/// Largest value of `|∂H/∂p| − L_H` over random samples.
pub fn derivative_bound_excess(spec: &HamiltonianSpec, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l_h = spec.l_h();
    (0..samples)
        .map(|_| {
            let (x, p) = sample_xp(&mut rng, spec.sample_scale());
            norm(spec.grad_p(x, p)) - l_h
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest observed `|∂H/∂p(p) − ∂H/∂p(q)| / |p − q|`.
pub fn derivative_lipschitz_estimate(spec: &HamiltonianSpec, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = spec.sample_scale();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (x, p) = sample_xp(&mut rng, s);
        let q = [rng.gen_range(-s..s), rng.gen_range(-s..s)];
        let dp = norm([p[0] - q[0], p[1] - q[1]]);
        if dp == 0.0 {
            continue;
        }
        let (gp, gq) = (spec.grad_p(x, p), spec.grad_p(x, q));
        worst = worst.max(norm([gp[0] - gq[0], gp[1] - gq[1]]) / dp);
    }
    worst
}

/// Load vector of the first-order remainder
/// `H[∇v] − H[∇w] − ∂H/∂p[∇w]·∇(v − w)`, which is constant per element.
pub fn remainder_load(spec: &HamiltonianSpec, v: &P1Function, w: &P1Function) -> Vec<f64> {
    let space = v.space();
    let mesh = space.mesh();
    let mut load = vec![0.0; space.ndof()];
    for k in 0..space.num_elements() {
        let (gv, gw) = (v.grad_on_element(k), w.grad_on_element(k));
        let x = centroid(&mesh.triangle_points(k));
        let r = spec.value(x, gv)
            - spec.value(x, gw)
            - dot(spec.grad_p(x, gw), [gv[0] - gw[0], gv[1] - gw[1]]);
        let share = r * space.element_area(k) / 3.0;
        for i in space.element_dofs(k).into_iter().flatten() {
            load[i] += share;
        }
    }
    load
}

fn centroid(p: &[Point; 3]) -> Point {
    [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
}

/// A random smooth function built from low sine modes on the mesh bounding box.
fn random_modes(space: &Arc<P1Space>, rng: &mut ChaCha8Rng, amplitude: f64) -> Result<P1Function> {
    let verts = space.mesh().vertices();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in verts {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let mut coef = [[0.0; 3]; 3];
    for (a, row) in coef.iter_mut().enumerate() {
        for (b, c) in row.iter_mut().enumerate() {
            *c = amplitude * rng.gen_range(-1.0..1.0) / ((a + 1) * (b + 1)) as f64;
        }
    }
    space.interpolate(|p| {
        let s = (p[0] - lo[0]) / (hi[0] - lo[0]);
        let t = (p[1] - lo[1]) / (hi[1] - lo[1]);
        let mut v = 0.0;
        for (a, row) in coef.iter().enumerate() {
            for (b, c) in row.iter().enumerate() {
                v += c
                    * (std::f64::consts::PI * (a + 1) as f64 * s).sin()
                    * (std::f64::consts::PI * (b + 1) as f64 * t).sin();
            }
        }
        v
    })
}

/// Worst ratio `‖R_H‖_{V*} / ‖v − w‖_{H¹}^{1+γ}` over random smooth pairs,
/// with the dual norm taken in the discrete space.
pub fn check_semismooth_bound(
    spec: &HamiltonianSpec,
    space: &Arc<P1Space>,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    if !spec.is_smooth() {
        return Err(Error::Config("semismooth bound needs a differentiable Hamiltonian".into()));
    }
    let gram = assemble_h1_gram(space);
    let riesz = RieszMap::new(&gram)?;
    let stiffness = assemble_stiffness(space);
    let mass = assemble_mass(space);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for pair in 0..pairs {
        let w = random_modes(space, &mut rng, 2.0)?;
        let scale = [1.0, 0.3, 0.1][pair % 3];
        let dv = random_modes(space, &mut rng, scale)?;
        let v_coeffs: Vec<f64> = w.coeffs().iter().zip(dv.coeffs()).map(|(a, b)| a + b).collect();
        let v = P1Function::new(Arc::clone(space), v_coeffs);
        let h1 = (stiffness.quadratic_form(dv.coeffs()) + mass.quadratic_form(dv.coeffs())).sqrt();
        if h1 == 0.0 {
            continue;
        }
        let r = riesz.dual_norm(&remainder_load(spec, &v, &w))?;
        worst = worst.max(r / h1.powf(1.0 + SEMISMOOTH_GAMMA));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured_square, hierarchy};

    #[test]
    fn huber_branches() {
        let h = huber_ball(1.0).unwrap();
        let o = [0.0, 0.0];
        assert_eq!(h.value(o, [0.5, 0.0]), 0.125);
        assert_eq!(h.grad_p(o, [0.5, 0.0]), [0.5, 0.0]);
        assert_eq!(h.value(o, [2.0, 0.0]), 1.5);
        assert_eq!(h.grad_p(o, [2.0, 0.0]), [1.0, 0.0]);
        assert_eq!(h.value(o, [1.0, 0.0]), 0.5);
        assert_eq!(h.grad_p(o, [1.0, 0.0]), [1.0, 0.0]);
        // linear branch evaluated just past the switch matches
        let eps = 1e-9;
        assert!((h.value(o, [1.0 + eps, 0.0]) - 0.5).abs() < 2e-9);
        assert_eq!((h.l_h(), h.l_hp(), h.c_h()), (1.0, 1.0, 1.0));
        assert_eq!(huber_ball(4.0).unwrap().c_h(), 8.0);
        assert!(huber_ball(0.0).is_err());
    }

    #[test]
    fn huber_legendre_identity_on_quadratic_branch() {
        let h = huber_ball(1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let g = h.grad_p([0.0, 0.0], p);
            let lhs = h.value([0.0, 0.0], p) - dot(p, g) + 0.5 * dot(g, g);
            assert!(lhs.abs() < 1e-12);
        }
    }

    #[test]
    fn finite_control_max_and_tie_break() {
        let h = finite_control(vec![[1.0, 0.0], [-1.0, 0.0]], vec![0.0, 0.0], 0.0).unwrap();
        for p1 in [-2.0, -0.3, 0.0, 0.7] {
            assert_eq!(h.value([0.0, 0.0], [p1, 5.0]), f64::abs(p1));
        }
        assert_eq!(h.grad_p([0.0, 0.0], [0.0, 0.0]), [1.0, 0.0]);
        assert!(!h.is_smooth());
        assert_eq!(h.l_hp(), f64::INFINITY);
        assert!(finite_control(vec![], vec![], 0.0).is_err());
        assert!(finite_control(vec![[1.0, 0.0]], vec![0.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn single_control_is_affine() {
        for eps in [0.0, 0.1, 1.0] {
            let h = finite_control(vec![[0.3, -0.4]], vec![0.25], eps).unwrap();
            for p in [[0.0, 0.0], [1.0, 2.0], [-3.0, 0.5]] {
                let exact = 0.3 * p[0] - 0.4 * p[1] - 0.25;
                assert!((h.value([0.0, 0.0], p) - exact).abs() < 1e-15);
                assert_eq!(h.grad_p([0.0, 0.0], p), [0.3, -0.4]);
            }
        }
        let h = finite_control(vec![[0.3, -0.4]], vec![0.25], 0.5).unwrap();
        assert!(check_gradient(&h, 200, 1).unwrap() < 1e-9);
    }

    #[test]
    fn gradient_checks() {
        let huber = huber_ball(1.0).unwrap();
        assert!(check_gradient(&huber, 1000, 7).unwrap() < 1e-5);
        let smooth = finite_control(
            vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            vec![0.0, 0.1, 0.2, 0.3],
            0.1,
        )
        .unwrap();
        assert!(check_gradient(&smooth, 1000, 7).unwrap() < 1e-5);
        let rough = finite_control(vec![[1.0, 0.0], [-1.0, 0.0]], vec![0.0, 0.0], 0.0).unwrap();
        assert!(check_gradient(&rough, 10, 7).is_err());
    }

    #[test]
    fn structural_properties() {
        let specs = [
            huber_ball(1.0).unwrap(),
            finite_control(vec![[1.0, 0.0], [-0.5, 0.5], [0.0, -1.0]], vec![0.0, 0.2, -0.1], 0.1).unwrap(),
        ];
        for h in &specs {
            assert!(convexity_excess(h, 10_000, 11) <= 1e-12);
            assert!(derivative_bound_excess(h, 10_000, 12) <= 1e-12);
            assert!(derivative_lipschitz_estimate(h, 10_000, 13) <= h.l_hp() + 1e-6);
        }
    }

    #[test]
    fn remainder_vanishes_for_identical_or_affine() {
        let mesh = hierarchy(generate_structured_square(2).unwrap(), 2).pop().unwrap();
        let space = Arc::new(P1Space::new(mesh));
        let v = space.interpolate(|p| (3.0 * p[0]).sin() * p[1]).unwrap();
        let w = space.interpolate(|p| p[0] * p[1] * 4.0).unwrap();
        let huber = huber_ball(1.0).unwrap();
        assert!(remainder_load(&huber, &v, &v).iter().all(|&r| r == 0.0));
        let affine = finite_control(vec![[0.7, 0.2]], vec![0.1], 0.0).unwrap();
        assert!(remainder_load(&affine, &v, &w).iter().all(|&r| r.abs() < 1e-15));
    }

    #[test]
    fn semismooth_ratio_stable_across_levels() {
        let levels = hierarchy(generate_structured_square(2).unwrap(), 4);
        let h = huber_ball(1.0).unwrap();
        let r3 = check_semismooth_bound(&h, &Arc::new(P1Space::new(Arc::clone(&levels[3]))), 12, 5).unwrap();
        let r4 = check_semismooth_bound(&h, &Arc::new(P1Space::new(Arc::clone(&levels[4]))), 12, 5).unwrap();
        assert!(r3 > 0.0 && r4 > 0.0);
        assert!(r3 / r4 < 2.0 && r4 / r3 < 2.0, "ratios {r3} vs {r4}");
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn huber_is_convex_with_bounded_gradient(
            p in prop::array::uniform2(-5.0f64..5.0),
            q in prop::array::uniform2(-5.0f64..5.0),
            r in 0.1f64..3.0,
        ) {
            let h = huber_ball(r).unwrap();
            let x = [0.5, 0.5];
            let g = h.grad_p(x, p);
            prop_assert!(norm(g) <= r + 1e-12);
            // supporting hyperplane at p
            let lin = h.value(x, p) + dot(g, [q[0] - p[0], q[1] - p[1]]);
            prop_assert!(h.value(x, q) >= lin - 1e-10);
        }
    }
}
