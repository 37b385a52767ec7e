//! Warped products `I ×_g P` over an interval, the closed conformal field
//! `V = g(t) ∂_t`, its energy `f = ½⟨V, V⟩`, and the vertical curvature formula.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::connection::{self, Christoffel};
use crate::convexity::ConvexFunction;
use crate::error::{GeometryError, Result};
use crate::geodesic::{integrate_signed, GeodesicSteps, PhasePoint};
use crate::manifold::{ChartManifold, Coordinate, Coords, MetricField, MetricMatrix, MAX_DIM};

/// `t ↦ (g, g', g'')`.
pub type WarpTriple = Arc<dyn Fn(f64) -> (f64, f64, f64) + Send + Sync>;

/// Warping function together with its first two derivatives.
#[derive(Clone)]
pub enum WarpFunction {
    Exp,
    Cosh,
    One,
    Custom { name: String, eval: WarpTriple },
}

impl fmt::Debug for WarpFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl WarpFunction {
    pub fn by_key(key: &str) -> Result<Self> {
        match key {
            "exp" => Ok(Self::Exp),
            "cosh" => Ok(Self::Cosh),
            "one" => Ok(Self::One),
            other => Err(GeometryError::UnknownKey(other.to_string())),
        }
    }

    pub fn custom(name: impl Into<String>, eval: impl Fn(f64) -> (f64, f64, f64) + Send + Sync + 'static) -> Self {
        Self::Custom {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Exp => "exp",
            Self::Cosh => "cosh",
            Self::One => "one",
            Self::Custom { name, .. } => name,
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        match self {
            Self::Exp => {
                let e = t.exp();
                (e, e, e)
            }
            Self::Cosh => (t.cosh(), t.sinh(), t.cosh()),
            Self::One => (1.0, 0.0, 0.0),
            Self::Custom { eval, .. } => eval(t),
        }
    }
}

struct WarpedField {
    warp: WarpFunction,
    fiber: ChartManifold,
}

impl WarpedField {
    #[inline]
    fn fiber_point(x: &Coords) -> Coords {
        Coords::new(x[1], x[2], 0.0)
    }
}

impl MetricField for WarpedField {
    fn dim(&self) -> usize {
        1 + self.fiber.dim()
    }

    fn metric(&self, x: &Coords) -> MetricMatrix {
        let (g, _, _) = self.warp.eval(x[0]);
        let gp = self.fiber.metric_raw(&Self::fiber_point(x));
        let mut out = MetricMatrix::identity();
        let n = self.fiber.dim();
        for a in 0..n {
            for b in 0..n {
                out[(a + 1, b + 1)] = g * g * gp[(a, b)];
            }
        }
        out
    }

    // Γ^t_ab = −g g' P_ab, Γ^a_tb = (g'/g) δ^a_b, Γ^a_bc = Γ^{P,a}_bc.
    fn christoffel(&self, x: &Coords) -> Option<Christoffel> {
        let y = Self::fiber_point(x);
        let fiber_gamma = self.fiber.christoffel(&y).ok()?;
        let gp = self.fiber.metric_raw(&y);
        let (g, dg, _) = self.warp.eval(x[0]);
        let n = self.fiber.dim();
        let mut gamma = Christoffel::zeros(n + 1);
        for a in 0..n {
            for b in a..n {
                gamma.set_sym(0, a + 1, b + 1, -g * dg * gp[(a, b)]);
            }
            gamma.set_sym(a + 1, 0, a + 1, dg / g);
            for b in 0..n {
                for c in b..n {
                    gamma.set_sym(a + 1, b + 1, c + 1, fiber_gamma.get(a, b, c));
                }
            }
        }
        Some(gamma)
    }
}

/// `I ×_g P` in coordinates `(t, fiber coordinates)`.
#[derive(Clone)]
pub struct WarpedProduct {
    interval: (f64, f64),
    warp: WarpFunction,
    fiber: ChartManifold,
    total: ChartManifold,
}

impl fmt::Debug for WarpedProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WarpedProduct")
            .field("interval", &self.interval)
            .field("warp", &self.warp)
            .field("fiber", &self.fiber.key())
            .finish()
    }
}

/// Number of base points at which positivity of the warp is checked.
const WARP_CHECK_SAMPLES: usize = 257;
/// Finite window used for positivity checks on unbounded intervals.
const WARP_CHECK_WINDOW: f64 = 20.0;

impl WarpedProduct {
    /// `interval = None` means the whole real line.
    pub fn assemble(interval: Option<(f64, f64)>, warp: WarpFunction, fiber: ChartManifold) -> Result<Self> {
        if fiber.dim() + 1 > MAX_DIM {
            return Err(GeometryError::InvalidArgument(format!(
                "fiber of dimension {} is too large",
                fiber.dim()
            )));
        }
        let (lo, hi) = interval.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        if !(lo < hi) {
            return Err(GeometryError::InvalidArgument(format!(
                "empty base interval ({lo}, {hi})"
            )));
        }
        let (clo, chi) = (lo.max(-WARP_CHECK_WINDOW), hi.min(WARP_CHECK_WINDOW));
        for i in 0..WARP_CHECK_SAMPLES {
            // open interval: stay off the endpoints
            let s = (i as f64 + 0.5) / WARP_CHECK_SAMPLES as f64;
            let t = clo + s * (chi - clo);
            let (g, _, _) = warp.eval(t);
            if !(g > 0.0 && g.is_finite()) {
                return Err(GeometryError::NonPositiveWarp { t, value: g });
            }
        }

        let key = if matches!(warp, WarpFunction::Exp) && fiber.key() == "paraboloid" && interval.is_none() {
            "m3".to_string()
        } else {
            format!("warped-{}-{}", warp.name(), fiber.key())
        };
        let field = WarpedField {
            warp: warp.clone(),
            fiber: fiber.clone(),
        };
        let mut total = ChartManifold::new(key, field);
        total = match interval {
            Some((lo, hi)) => total.with_coordinate(0, Coordinate::Bounded { lo, hi }),
            None => total,
        };
        total = total.with_sample_box(0, clo.max(-1.0), chi.min(1.0));
        for (i, &(a, b)) in fiber.sample_box().iter().enumerate() {
            total = total.with_coordinate(i + 1, fiber.coordinate(i));
            total = total.with_sample_box(i + 1, a, b);
        }
        Ok(Self {
            interval: (lo, hi),
            warp,
            fiber,
            total,
        })
    }

    /// `ℝ ×_{e^t} P²` over the paraboloid.
    pub fn m3() -> Self {
        Self::assemble(None, WarpFunction::Exp, crate::builtin::paraboloid()).expect("exp warp is positive")
    }

    pub fn manifold(&self) -> ChartManifold {
        self.total.clone()
    }

    pub fn manifold_ref(&self) -> &ChartManifold {
        &self.total
    }

    pub fn fiber(&self) -> &ChartManifold {
        &self.fiber
    }

    pub fn warp(&self) -> &WarpFunction {
        &self.warp
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    /// `V = g(t) ∂_t`.
    pub fn conformal_field(&self, x: &Coords) -> Coords {
        Coords::new(self.warp.eval(x[0]).0, 0.0, 0.0)
    }

    /// Conformal factor `φ = g'(t)`.
    pub fn conformal_factor(&self, x: &Coords) -> f64 {
        self.warp.eval(x[0]).1
    }

    /// `∇φ = g''(t) ∂_t`.
    pub fn conformal_factor_gradient(&self, x: &Coords) -> Coords {
        Coords::new(self.warp.eval(x[0]).2, 0.0, 0.0)
    }

    /// `|V|²∇φ − ⟨V, ∇φ⟩V`, which vanishes for a closed conformal field.
    pub fn closed_conformal_residual(&self, x: &Coords) -> Coords {
        let m = &self.total;
        let v = self.conformal_field(x);
        let dphi = self.conformal_factor_gradient(x);
        m.inner(x, &v, &v) * dphi - m.inner(x, &v, &dphi) * v
    }

    /// `f = ½⟨V, V⟩ = ½ g(t)²`.
    pub fn energy_value(&self, x: &Coords) -> f64 {
        let g = self.warp.eval(x[0]).0;
        0.5 * g * g
    }

    /// `∇f = φ V`.
    pub fn energy_gradient(&self, x: &Coords) -> Coords {
        self.conformal_factor(x) * self.conformal_field(x)
    }

    /// `Hess f(X, Y) = ⟨X, ∇φ⟩⟨V, Y⟩ + φ²⟨X, Y⟩`.
    pub fn energy_hessian(&self, x: &Coords, a: &Coords, b: &Coords) -> f64 {
        let m = &self.total;
        let phi = self.conformal_factor(x);
        m.inner(x, a, &self.conformal_factor_gradient(x)) * m.inner(x, &self.conformal_field(x), b)
            + phi * phi * m.inner(x, a, b)
    }

    /// The energy as a [`ConvexFunction`] with analytic gradient and Hessian.
    pub fn energy(&self) -> ConvexFunction {
        let (v, g, h) = (self.clone(), self.clone(), self.clone());
        ConvexFunction::new("energy", self.total.key(), move |x| v.energy_value(x))
            .with_gradient(move |x| g.energy_gradient(x))
            .with_hessian(move |x, a, b| h.energy_hessian(x, a, b))
    }

    fn check_vertical(v: &Coords) -> Result<()> {
        let scale = v.norm().max(1.0);
        if v[0].abs() > 1e-12 * scale {
            return Err(GeometryError::NotVertical { base_component: v[0] });
        }
        Ok(())
    }

    /// Gram–Schmidt in the total metric; the result is orthonormal to 1e-12.
    pub fn orthonormal_vertical_pair(&self, x: &Coords, u: &Coords, w: &Coords) -> Result<(Coords, Coords)> {
        Self::check_vertical(u)?;
        Self::check_vertical(w)?;
        let m = &self.total;
        connection::plane_area_sq(m, x, u, w)?;
        let e1 = u / m.norm(x, u);
        let w_perp = w - m.inner(x, w, &e1) * e1;
        let e2 = w_perp / m.norm(x, &w_perp);
        let residual = (m.inner(x, &e1, &e1) - 1.0)
            .abs()
            .max((m.inner(x, &e2, &e2) - 1.0).abs())
            .max(m.inner(x, &e1, &e2).abs());
        if residual > 1e-12 {
            return Err(GeometryError::DegeneratePlane);
        }
        Ok((e1, e2))
    }

    /// Sectional curvature of a vertical plane: `(K^P − |g'|²) / g²`.
    pub fn vertical_curvature(&self, x: &Coords, u: &Coords, w: &Coords) -> Result<f64> {
        self.total.check_domain(x)?;
        let (e1, e2) = self.orthonormal_vertical_pair(x, u, w)?;
        let y = WarpedField::fiber_point(x);
        let shift = |v: &Coords| Coords::new(v[1], v[2], 0.0);
        let k_fiber = connection::sectional_curvature(&self.fiber, &y, &shift(&e1), &shift(&e2))?;
        let (g, dg, _) = self.warp.eval(x[0]);
        Ok((k_fiber - dg * dg) / (g * g))
    }

    /// `|(f∘γ_X)''(0) − Hess f(X, X)|` with the second derivative taken by
    /// central differences along the integrated geodesic.
    pub fn hessian_identity_check(&self, x: &Coords, dir: &Coords) -> Result<f64> {
        const SPACING: f64 = 1e-3;
        const STEP: f64 = 1e-4;
        let m = &self.total;
        let start = PhasePoint::new(*x, *dir);
        let fwd = integrate_signed(m, start, SPACING, STEP)?.endpoint().point;
        let bwd = integrate_signed(m, start, -SPACING, STEP)?.endpoint().point;
        let second =
            (self.energy_value(&fwd) - 2.0 * self.energy_value(x) + self.energy_value(&bwd)) / (SPACING * SPACING);
        Ok((second - self.energy_hessian(x, dir, dir)).abs())
    }

    /// Analytic (vertical formula) vs finite-difference curvature of the
    /// `(∂_x, ∂_y)` plane on a grid.
    pub fn curvature_grid(&self, ts: &[f64], xs: &[f64], ys: &[f64]) -> Result<Vec<CurvatureSample>> {
        let oracle = self.total.fd_only();
        let (u, w) = (Coords::y(), Coords::z());
        let mut out = Vec::with_capacity(ts.len() * xs.len() * ys.len());
        for &t in ts {
            for &a in xs {
                for &b in ys {
                    let p = Coords::new(t, a, b);
                    let k_analytic = self.vertical_curvature(&p, &u, &w)?;
                    let k_fd = connection::sectional_curvature(&oracle, &p, &u, &w)?;
                    out.push(CurvatureSample::new(t, a, b, k_analytic, k_fd));
                }
            }
        }
        Ok(out)
    }
}

/// Closed form of the vertical curvature of `ℝ ×_{e^t} P²`:
/// `e^{−2t}(4/(1 + 4x² + 4y²)² − e^{2t})`.
pub fn m3_vertical_curvature(t: f64, x: f64, y: f64) -> f64 {
    let d = 1.0 + 4.0 * x * x + 4.0 * y * y;
    (-2.0 * t).exp() * (4.0 / (d * d) - (2.0 * t).exp())
}

/// One row of a curvature grid export.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub k_analytic: f64,
    pub k_fd: f64,
    pub abs_err: f64,
}

impl CurvatureSample {
    pub fn new(t: f64, x: f64, y: f64, k_analytic: f64, k_fd: f64) -> Self {
        Self {
            t,
            x,
            y,
            k_analytic,
            k_fd,
            abs_err: (k_analytic - k_fd).abs(),
        }
    }
}

/// Curvature grid for a surface chart (`t` column fixed at 0): closed-form
/// override against the finite-difference tensor.
pub fn surface_curvature_grid(m: &ChartManifold, xs: &[f64], ys: &[f64]) -> Result<Vec<CurvatureSample>> {
    if m.dim() != 2 {
        return Err(GeometryError::InvalidArgument(format!(
            "`{}` is not a surface chart",
            m.key()
        )));
    }
    let oracle = m.fd_only();
    let (u, w) = (Coords::x(), Coords::y());
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &a in xs {
        for &b in ys {
            let p = Coords::new(a, b, 0.0);
            let k_analytic = connection::sectional_curvature(m, &p, &u, &w)?;
            let k_fd = connection::sectional_curvature(&oracle, &p, &u, &w)?;
            out.push(CurvatureSample::new(0.0, a, b, k_analytic, k_fd));
        }
    }
    Ok(out)
}

pub fn write_curvature_csv<W: std::io::Write>(rows: &[CurvatureSample], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "y", "K_analytic", "K_fd", "abs_err"])?;
    for r in rows {
        w.write_record([r.t, r.x, r.y, r.k_analytic, r.k_fd, r.abs_err].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Max drift of the kinetic energy `E(γ, γ') = ⟨γ', γ'⟩` along the geodesic lift.
///
/// `E` is constant along these lifts, which are geodesics of the tangent
/// bundle, so `E` is not strictly convex there.
pub fn kinetic_energy_witness(m: &ChartManifold, start: PhasePoint, duration: f64, step: f64) -> Result<f64> {
    let e0 = m.inner(&start.point, &start.vector, &start.vector);
    let mut worst = 0.0f64;
    for item in GeodesicSteps::new(m, start, duration, step)? {
        let (_, s) = item?;
        worst = worst.max((m.inner(&s.point, &s.vector, &s.vector) - e0).abs());
    }
    Ok(worst)
}
