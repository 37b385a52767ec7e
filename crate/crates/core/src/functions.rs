//! Named scalar functions used by the certification and minimization runs.

use crate::builtin::Paraboloid;
use crate::convexity::ConvexFunction;
use crate::error::{GeometryError, Result};
use crate::manifold::{ChartManifold, Coords};
use crate::warped::WarpedProduct;

/// Keys accepted by [`by_key`], with the manifolds they apply to.
pub const FUNCTION_KEYS: &[(&str, &str)] = &[
    ("zero", "any"),
    ("norm-sq", "plane"),
    ("x", "plane, torus"),
    ("sin2pix", "torus"),
    ("height", "paraboloid"),
    ("excess-height", "paraboloid"),
    ("radial-arclength-sq", "paraboloid"),
    ("energy", "m3"),
];

pub fn zero(manifold_key: &str) -> ConvexFunction {
    ConvexFunction::new("zero", manifold_key, |_| 0.0)
        .with_gradient(|_| Coords::zeros())
        .with_hessian(|_, _, _| 0.0)
}

pub fn squared_norm() -> ConvexFunction {
    ConvexFunction::new("norm-sq", "plane", |x| x.norm_squared())
        .with_gradient(|x| 2.0 * x)
        .with_hessian(|_, a, b| 2.0 * a.dot(b))
}

pub fn first_coordinate(manifold_key: &str) -> ConvexFunction {
    ConvexFunction::new("x", manifold_key, |x| x[0])
}

pub fn sine_2pi_x() -> ConvexFunction {
    ConvexFunction::new("sin2pix", "torus", |x| (std::f64::consts::TAU * x[0]).sin())
}

/// Riemannian gradient of `z = x² + y²` on the paraboloid: `(2x, 2y) / (1 + 4r²)`.
fn height_gradient(x: &Coords) -> Coords {
    Coords::new(2.0 * x[0], 2.0 * x[1], 0.0) / (1.0 + 4.0 * Paraboloid::height(x))
}

/// Height `z` on the paraboloid. Its Hessian is `2 δ_ij / (1 + 4r²)` in the chart.
pub fn height() -> ConvexFunction {
    ConvexFunction::new("height", "paraboloid", Paraboloid::height)
        .with_gradient(height_gradient)
        .with_hessian(|x, a, b| 2.0 * (a[0] * b[0] + a[1] * b[1]) / (1.0 + 4.0 * Paraboloid::height(x)))
}

/// `max(z − level, 0)`.
pub fn excess_height(level: f64) -> ConvexFunction {
    ConvexFunction::new("excess-height", "paraboloid", move |x| {
        (Paraboloid::height(x) - level).max(0.0)
    })
    .with_gradient(move |x| {
        if Paraboloid::height(x) > level {
            height_gradient(x)
        } else {
            Coords::zeros()
        }
    })
}

/// Arclength from the vertex along the meridian through `(x, y)`:
/// `∫₀^r √(1 + 4u²) du`.
pub fn meridian_arclength(r: f64) -> f64 {
    0.5 * r * (1.0 + 4.0 * r * r).sqrt() + 0.25 * (2.0 * r).asinh()
}

/// Squared intrinsic distance to the vertex.
pub fn radial_arclength_sq() -> ConvexFunction {
    ConvexFunction::new("radial-arclength-sq", "paraboloid", |x| {
        meridian_arclength(Paraboloid::height(x).sqrt()).powi(2)
    })
    .with_gradient(|x| {
        let r = Paraboloid::height(x).sqrt();
        if r == 0.0 {
            return Coords::zeros();
        }
        let s = meridian_arclength(r);
        let radial = Coords::new(x[0] / r, x[1] / r, 0.0);
        2.0 * s / (1.0 + 4.0 * r * r).sqrt() * radial
    })
}

/// Resolves a function key on a manifold.
pub fn by_key(key: &str, m: &ChartManifold) -> Result<ConvexFunction> {
    let mk = m.key();
    let mismatch = || GeometryError::InvalidArgument(format!("function `{key}` is not defined on `{mk}`"));
    match key {
        "zero" => Ok(zero(mk)),
        "norm-sq" if mk == "plane" => Ok(squared_norm()),
        "x" if mk == "plane" || mk == "torus" => Ok(first_coordinate(mk)),
        "sin2pix" if mk == "torus" => Ok(sine_2pi_x()),
        "height" if mk == "paraboloid" => Ok(height()),
        "excess-height" if mk == "paraboloid" => Ok(excess_height(1.0)),
        "radial-arclength-sq" if mk == "paraboloid" => Ok(radial_arclength_sq()),
        "energy" if mk == "m3" => Ok(WarpedProduct::m3().energy()),
        "norm-sq" | "x" | "sin2pix" | "height" | "excess-height" | "radial-arclength-sq" | "energy" => Err(mismatch()),
        other => Err(GeometryError::UnknownKey(other.to_string())),
    }
}
