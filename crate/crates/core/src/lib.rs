//! Numerical Riemannian geometry on single-chart manifolds of dimension ≤ 3.
//!
//! - [`geodesic`]: RK4 geodesics, exponential map, parallel transport.
//! - [`connection`]: Christoffel symbols, Riemann tensor, sectional curvature.
//! - [`warped`]: warped products `I ×_g P`, the closed conformal field
//!   `g(t)∂_t` and its strictly convex energy.
//! - [`convexity`]: certification of convexity along sampled geodesics.
//! - [`flow`]: geodesic flow on the unit tangent bundle and recurrence.
//! - [`minimize`]: geodesic gradient descent, the regularized scheme
//!   `k·u + g`, and the soul-region bound on the paraboloid.

// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod builtin;
pub mod connection;
pub mod convexity;
pub mod error;
pub mod exec;
pub mod flow;
pub mod functions;
pub mod geodesic;
pub mod manifold;
pub mod minimize;
pub mod sampling;
pub mod warped;

pub use error::{GeometryError, Result};
pub use exec::Execution;
pub use geodesic::{GeodesicPath, PhasePoint};
pub use manifold::{ChartManifold, Coords};
