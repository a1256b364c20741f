//! Monotone stabilized P1 finite element discretization of stationary
//! second-order mean field game systems on 2D polygonal domains.
//!
//! The coupled system is
//!
//! ```text
//! -ν Δu + H(x, ∇u)            = F[m]   in Ω,
//! -ν Δm - div(m ∂H/∂p(x, ∇u)) = G      in Ω,
//!  u = m = 0                           on ∂Ω,
//! ```
//!
//! discretized with continuous piecewise affine elements and a diffusion
//! tensor `A_k = ν I + D_k`, where the stabilization `D_k` restores a
//! discrete maximum principle. Two stabilizations are provided: the
//! edge-tensor construction for meshes satisfying the Xu–Zikatanov angle
//! condition, and isotropic artificial diffusion for strictly acute meshes
//! (which switches itself off once the mesh is fine enough).
//!
//! Module map:
//!
//! * [`mesh`]: triangulations, red refinement, angle conditions, file I/O.
//! * [`fespace`]: the P1 space, quadrature and discrete functions.
//! * [`stabilization`]: the tensors `D_k` and checks of their properties.
//! * [`hamiltonian`]: control-set Hamiltonians and their derivative checks.
//! * [`problem`]: problem data and manufactured instances.
//! * [`assembly`]: sparse operators, loads and the discrete residuals.
//! * [`solver`]: linear solves, Newton for the HJB equation, Picard for the
//!   coupled system, and dual norms.
//! * [`analysis`]: error norms, EOC tables and verdicts.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod fespace;
pub mod hamiltonian;
pub mod mesh;
pub mod problem;
pub mod solver;
pub mod stabilization;

pub use error::{Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];
/// A vector in the plane.
pub type Vec2 = [f64; 2];

#[inline]
pub(crate) fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}
