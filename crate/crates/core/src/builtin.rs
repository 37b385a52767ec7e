//! Built-in manifolds, addressable by string key.

use crate::connection::Christoffel;
use crate::error::{GeometryError, Result};
use crate::manifold::{ChartManifold, Coordinate, Coords, MetricField, MetricMatrix};
use crate::warped::{WarpFunction, WarpedProduct};

/// Chart bound used for the unbounded paraboloid charts.
pub const PARABOLOID_CHART_RADIUS: f64 = 50.0;

/// Keys accepted by [`by_key`].
pub const MANIFEST: &[&str] = &["plane", "torus", "paraboloid", "paraboloid-polar", "m3"];

/// Euclidean metric in dimension `dim`.
#[derive(Clone, Copy, Debug)]
pub struct Euclidean {
    pub dim: usize,
}

impl MetricField for Euclidean {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric(&self, _x: &Coords) -> MetricMatrix {
        MetricMatrix::identity()
    }

    fn christoffel(&self, _x: &Coords) -> Option<Christoffel> {
        Some(Christoffel::zeros(self.dim))
    }

    fn sectional_curvature(&self, _x: &Coords, _u: &Coords, _w: &Coords) -> Option<f64> {
        Some(0.0)
    }
}

/// Paraboloid of revolution `z = x² + y²` in its Monge chart `(x, y)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Paraboloid;

impl Paraboloid {
    pub fn height(x: &Coords) -> f64 {
        x[0] * x[0] + x[1] * x[1]
    }

    pub fn gaussian_curvature(r_sq: f64) -> f64 {
        let d = 1.0 + 4.0 * r_sq;
        4.0 / (d * d)
    }
}

impl MetricField for Paraboloid {
    fn dim(&self) -> usize {
        2
    }

    fn metric(&self, x: &Coords) -> MetricMatrix {
        let (a, b) = (x[0], x[1]);
        MetricMatrix::new(
            1.0 + 4.0 * a * a,
            4.0 * a * b,
            0.0,
            4.0 * a * b,
            1.0 + 4.0 * b * b,
            0.0,
            0.0,
            0.0,
            1.0,
        )
    }

    // Graph of f: Γ^k_ij = f_k f_ij / (1 + |∇f|²) with f_k = 2 x_k, f_ij = 2 δ_ij.
    fn christoffel(&self, x: &Coords) -> Option<Christoffel> {
        let denom = 1.0 + 4.0 * Self::height(x);
        let mut gamma = Christoffel::zeros(2);
        for k in 0..2 {
            let c = 4.0 * x[k] / denom;
            gamma.set_sym(k, 0, 0, c);
            gamma.set_sym(k, 1, 1, c);
        }
        Some(gamma)
    }

    fn sectional_curvature(&self, x: &Coords, _u: &Coords, _w: &Coords) -> Option<f64> {
        Some(Self::gaussian_curvature(Self::height(x)))
    }
}

/// The same paraboloid in polar coordinates `(r, θ)`: `ds² = (1 + 4r²)dr² + r²dθ²`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ParaboloidPolar;

impl MetricField for ParaboloidPolar {
    fn dim(&self) -> usize {
        2
    }

    fn metric(&self, x: &Coords) -> MetricMatrix {
        let r = x[0];
        MetricMatrix::from_diagonal(&Coords::new(1.0 + 4.0 * r * r, r * r, 1.0))
    }

    fn christoffel(&self, x: &Coords) -> Option<Christoffel> {
        let r = x[0];
        let d = 1.0 + 4.0 * r * r;
        let mut gamma = Christoffel::zeros(2);
        gamma.set_sym(0, 0, 0, 4.0 * r / d);
        gamma.set_sym(0, 1, 1, -r / d);
        gamma.set_sym(1, 0, 1, 1.0 / r);
        Some(gamma)
    }

    fn sectional_curvature(&self, x: &Coords, _u: &Coords, _w: &Coords) -> Option<f64> {
        Some(Paraboloid::gaussian_curvature(x[0] * x[0]))
    }
}

pub fn plane() -> ChartManifold {
    ChartManifold::new("plane", Euclidean { dim: 2 })
}

/// Flat torus `ℝ²/ℤ²` with unit periods.
pub fn flat_torus() -> ChartManifold {
    ChartManifold::new("torus", Euclidean { dim: 2 })
        .with_coordinate(0, Coordinate::Periodic { period: 1.0 })
        .with_coordinate(1, Coordinate::Periodic { period: 1.0 })
}

pub fn paraboloid() -> ChartManifold {
    let r = PARABOLOID_CHART_RADIUS;
    ChartManifold::new("paraboloid", Paraboloid)
        .with_coordinate(0, Coordinate::Bounded { lo: -r, hi: r })
        .with_coordinate(1, Coordinate::Bounded { lo: -r, hi: r })
}

pub fn paraboloid_polar() -> ChartManifold {
    ChartManifold::new("paraboloid-polar", ParaboloidPolar)
        .with_coordinate(
            0,
            Coordinate::Bounded {
                lo: 0.0,
                hi: PARABOLOID_CHART_RADIUS,
            },
        )
        .with_coordinate(
            1,
            Coordinate::Periodic {
                period: std::f64::consts::TAU,
            },
        )
        .with_sample_box(0, 0.5, 1.5)
}

/// `ℝ ×_{e^t} P²` with `P²` the paraboloid, in coordinates `(t, x, y)`.
pub fn m3() -> ChartManifold {
    WarpedProduct::m3().manifold()
}

pub fn by_key(key: &str) -> Result<ChartManifold> {
    match key {
        "plane" => Ok(plane()),
        "torus" => Ok(flat_torus()),
        "paraboloid" => Ok(paraboloid()),
        "paraboloid-polar" => Ok(paraboloid_polar()),
        "m3" => Ok(m3()),
        other => Err(GeometryError::UnknownKey(other.to_string())),
    }
}

/// Warped product over the whole real line by key: `"exp"`, `"cosh"` or `"one"`.
pub fn warped_by_key(warp: &str, fiber: ChartManifold) -> Result<WarpedProduct> {
    WarpedProduct::assemble(None, WarpFunction::by_key(warp)?, fiber)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::{christoffel_fd, sectional_curvature};

    #[test]
    fn manifest_keys_resolve() {
        for key in MANIFEST {
            let m = by_key(key).unwrap();
            assert_eq!(m.key(), *key);
        }
        assert!(matches!(by_key("sphere"), Err(GeometryError::UnknownKey(_))));
    }

    #[test]
    fn analytic_christoffel_matches_fd() {
        let cases = [
            (paraboloid(), Coords::new(0.3, -0.7, 0.0)),
            (paraboloid(), Coords::new(-1.1, 0.4, 0.0)),
            (paraboloid_polar(), Coords::new(0.8, 2.0, 0.0)),
            (m3(), Coords::new(0.4, -0.2, 0.6)),
        ];
        for (m, x) in cases {
            let a = m.christoffel(&x).unwrap();
            let f = christoffel_fd(&m, &x).unwrap();
            assert!(a.max_abs_diff(&f) < 1e-6, "{}: {}", m.key(), a.max_abs_diff(&f));
        }
    }

    #[test]
    fn analytic_curvature_matches_fd_on_paraboloid() {
        for m in [paraboloid(), paraboloid_polar()] {
            let x = Coords::new(0.7, 0.5, 0.0);
            let (u, w) = (Coords::x(), Coords::y());
            let a = sectional_curvature(&m, &x, &u, &w).unwrap();
            let f = sectional_curvature(&m.fd_only(), &x, &u, &w).unwrap();
            assert!((a - f).abs() < 1e-5, "{}: {a} vs {f}", m.key());
        }
    }
}
