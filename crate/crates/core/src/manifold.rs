//! Single-chart Riemannian manifolds of dimension at most three.
//!
//! Points and tangent vectors are stored as [`Coords`], a fixed three-component
//! vector. For a manifold of dimension `n < 3` the components past `n` are
//! zero, and the metric is padded with the identity there, so every routine
//! can work on 3x3 blocks without branching on the dimension.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::connection::{self, Christoffel};
use crate::error::{GeometryError, Result};

/// Largest supported chart dimension.
pub const MAX_DIM: usize = 3;

/// Chart coordinates of a point, or chart components of a tangent vector.
pub type Coords = Vector3<f64>;

/// Metric tensor `g_ij` at a point (padded with the identity beyond `dim`).
pub type MetricMatrix = Matrix3<f64>;

/// A smooth field of metric tensors on a chart.
pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;

    /// `g_ij(x)`. Entries past `dim` must be those of the identity.
    fn metric(&self, x: &Coords) -> MetricMatrix;

    /// Closed-form Christoffel symbols, when known.
    fn christoffel(&self, _x: &Coords) -> Option<Christoffel> {
        None
    }

    /// Closed-form sectional curvature of the plane spanned by `u`, `w`, when known.
    fn sectional_curvature(&self, _x: &Coords, _u: &Coords, _w: &Coords) -> Option<f64> {
        None
    }
}

/// Behaviour of one chart coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coordinate {
    /// Unbounded real line.
    Free,
    /// Open interval; geodesics leaving it are reported as chart exits.
    Bounded { lo: f64, hi: f64 },
    /// Identified modulo `period`, wrapped into `[0, period)`.
    Periodic { period: f64 },
}

impl Coordinate {
    fn contains(&self, value: f64) -> bool {
        match *self {
            Coordinate::Free | Coordinate::Periodic { .. } => value.is_finite(),
            Coordinate::Bounded { lo, hi } => value > lo && value < hi,
        }
    }
}

/// A Riemannian manifold covered by one global chart.
#[derive(Clone)]
pub struct ChartManifold {
    key: String,
    field: Arc<dyn MetricField>,
    coordinates: [Coordinate; MAX_DIM],
    sample_box: [(f64, f64); MAX_DIM],
    use_analytic: bool,
}

impl fmt::Debug for ChartManifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartManifold")
            .field("key", &self.key)
            .field("dim", &self.dim())
            .field("coordinates", &&self.coordinates[..self.dim()])
            .field("use_analytic", &self.use_analytic)
            .finish()
    }
}

impl ChartManifold {
    pub fn new(key: impl Into<String>, field: impl MetricField + 'static) -> Self {
        Self::from_arc(key, Arc::new(field))
    }

    pub fn from_arc(key: impl Into<String>, field: Arc<dyn MetricField>) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&field.dim()),
            "chart dimension must be between 1 and {MAX_DIM}"
        );
        Self {
            key: key.into(),
            field,
            coordinates: [Coordinate::Free; MAX_DIM],
            sample_box: [(-1.0, 1.0); MAX_DIM],
            use_analytic: true,
        }
    }

    pub fn with_coordinate(mut self, index: usize, coordinate: Coordinate) -> Self {
        assert!(index < self.dim());
        self.coordinates[index] = coordinate;
        if let Coordinate::Periodic { period } = coordinate {
            self.sample_box[index] = (0.0, period);
        }
        self
    }

    /// Box used for sampling base points (a fundamental domain for periodic coordinates).
    pub fn with_sample_box(mut self, index: usize, lo: f64, hi: f64) -> Self {
        assert!(index < self.dim() && lo < hi);
        self.sample_box[index] = (lo, hi);
        self
    }

    /// Same manifold with closed-form Christoffel symbols and curvature ignored,
    /// so every connection quantity goes through finite differences.
    pub fn fd_only(&self) -> Self {
        let mut out = self.clone();
        out.use_analytic = false;
        out
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn field(&self) -> &dyn MetricField {
        self.field.as_ref()
    }

    pub fn coordinate(&self, index: usize) -> Coordinate {
        self.coordinates[index]
    }

    pub fn sample_box(&self) -> &[(f64, f64)] {
        &self.sample_box[..self.dim()]
    }

    pub fn has_periodic(&self) -> bool {
        self.coordinates[..self.dim()]
            .iter()
            .any(|c| matches!(c, Coordinate::Periodic { .. }))
    }

    pub(crate) fn analytic_enabled(&self) -> bool {
        self.use_analytic
    }

    /// Metric tensor at `x`, checked for positive definiteness.
    pub fn metric(&self, x: &Coords) -> Result<MetricMatrix> {
        self.check_domain(x)?;
        let g = self.field.metric(x);
        if g.cholesky().is_none() {
            return Err(GeometryError::DegenerateMetric { point: self.to_vec(x) });
        }
        Ok(g)
    }

    pub(crate) fn metric_raw(&self, x: &Coords) -> MetricMatrix {
        self.field.metric(x)
    }

    pub fn inner(&self, x: &Coords, u: &Coords, v: &Coords) -> f64 {
        u.dot(&(self.field.metric(x) * v))
    }

    pub fn norm(&self, x: &Coords, v: &Coords) -> f64 {
        self.inner(x, v, v).max(0.0).sqrt()
    }

    /// Rescales `v` to unit length at `x`. Zero vectors are rejected.
    pub fn normalize(&self, x: &Coords, v: &Coords) -> Result<Coords> {
        let n = self.norm(x, v);
        if !(n.is_finite() && n > 0.0) {
            return Err(GeometryError::InvalidArgument(
                "cannot normalize a zero or non-finite tangent vector".into(),
            ));
        }
        Ok(v / n)
    }

    pub fn christoffel(&self, x: &Coords) -> Result<Christoffel> {
        connection::christoffel(self, x)
    }

    pub fn in_domain(&self, x: &Coords) -> bool {
        (0..self.dim()).all(|i| self.coordinates[i].contains(x[i]))
    }

    pub fn check_domain(&self, x: &Coords) -> Result<()> {
        if self.in_domain(x) {
            Ok(())
        } else {
            Err(GeometryError::OutsideDomain { point: self.to_vec(x) })
        }
    }

    /// Wraps periodic coordinates into their fundamental interval.
    pub fn wrap(&self, x: &Coords) -> Coords {
        let mut out = *x;
        for i in 0..self.dim() {
            if let Coordinate::Periodic { period } = self.coordinates[i] {
                out[i] = out[i].rem_euclid(period);
                if out[i] >= period {
                    out[i] = 0.0;
                }
            }
        }
        out
    }

    /// Coordinate difference `b - a`, taking the shortest representative on periodic axes.
    pub fn chart_delta(&self, a: &Coords, b: &Coords) -> Coords {
        let mut d = b - a;
        for i in 0..self.dim() {
            if let Coordinate::Periodic { period } = self.coordinates[i] {
                d[i] -= period * (d[i] / period).round();
            }
        }
        d
    }

    /// Euclidean chart distance with periodic wrapping.
    pub fn chart_distance(&self, a: &Coords, b: &Coords) -> f64 {
        self.chart_delta(a, b).norm()
    }

    /// Builds a point from a slice of length `dim`.
    pub fn point(&self, values: &[f64]) -> Result<Coords> {
        if values.len() != self.dim() {
            return Err(GeometryError::InvalidArgument(format!(
                "expected {} coordinates for `{}`, got {}",
                self.dim(),
                self.key,
                values.len()
            )));
        }
        let mut out = Coords::zeros();
        for (slot, v) in out.iter_mut().zip(values) {
            *slot = *v;
        }
        Ok(out)
    }

    pub fn to_vec(&self, x: &Coords) -> Vec<f64> {
        x.iter().take(self.dim()).copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Flat2;
    impl MetricField for Flat2 {
        fn dim(&self) -> usize {
            2
        }
        fn metric(&self, _x: &Coords) -> MetricMatrix {
            MetricMatrix::identity()
        }
    }

    struct Degenerate;
    impl MetricField for Degenerate {
        fn dim(&self) -> usize {
            2
        }
        fn metric(&self, _x: &Coords) -> MetricMatrix {
            let mut g = MetricMatrix::identity();
            g[(0, 0)] = 0.0;
            g
        }
    }

    #[test]
    fn periodic_wrap_and_distance() {
        let m = ChartManifold::new("t", Flat2)
            .with_coordinate(0, Coordinate::Periodic { period: 1.0 })
            .with_coordinate(1, Coordinate::Periodic { period: 1.0 });
        let x = m.wrap(&Coords::new(1.25, -0.25, 0.0));
        assert!((x[0] - 0.25).abs() < 1e-15 && (x[1] - 0.75).abs() < 1e-15);
        let d = m.chart_distance(&Coords::new(0.99, 0.0, 0.0), &Coords::new(0.01, 0.0, 0.0));
        assert!((d - 0.02).abs() < 1e-12);
        assert_eq!(m.sample_box(), &[(0.0, 1.0), (0.0, 1.0)]);
    }

    #[test]
    fn degenerate_metric_is_an_error() {
        let m = ChartManifold::new("d", Degenerate);
        assert!(matches!(
            m.metric(&Coords::zeros()),
            Err(GeometryError::DegenerateMetric { .. })
        ));
    }

    #[test]
    fn bounded_coordinate_domain() {
        let m = ChartManifold::new("b", Flat2).with_coordinate(0, Coordinate::Bounded { lo: 0.0, hi: 1.0 });
        assert!(m.in_domain(&Coords::new(0.5, 7.0, 0.0)));
        assert!(matches!(
            m.metric(&Coords::new(1.5, 0.0, 0.0)),
            Err(GeometryError::OutsideDomain { .. })
        ));
    }

    #[test]
    fn point_length_is_checked() {
        let m = ChartManifold::new("p", Flat2);
        assert!(m.point(&[1.0, 2.0]).is_ok());
        assert!(m.point(&[1.0]).is_err());
        assert!(m.normalize(&Coords::zeros(), &Coords::zeros()).is_err());
    }
}
