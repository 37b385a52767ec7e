//! Convexity certification: a function is convex when its restriction to
//! every geodesic is, so we sample geodesics and look at second differences
//! of `f∘γ`. A passing report is evidence, not a proof.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{GeometryError, Result};
use crate::exec::{map_indexed, Execution};
use crate::flow::RecurrenceStats;
use crate::geodesic::{GeodesicSteps, PhasePoint, DEFAULT_STEP};
use crate::manifold::{ChartManifold, Coords};
use crate::sampling::{directions, BoxSampler};

pub type ScalarFn = Arc<dyn Fn(&Coords) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&Coords) -> Coords + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&Coords, &Coords, &Coords) -> f64 + Send + Sync>;

/// Step for finite-difference gradients.
const GRADIENT_FD_STEP: f64 = 1e-6;

/// A scalar function on a chart, with optional analytic derivatives.
#[derive(Clone)]
pub struct ConvexFunction {
    name: String,
    manifold_key: String,
    value: ScalarFn,
    gradient: Option<GradientFn>,
    hessian: Option<HessianFn>,
}

impl fmt::Debug for ConvexFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexFunction")
            .field("name", &self.name)
            .field("manifold", &self.manifold_key)
            .field("gradient", &self.gradient.is_some())
            .field("hessian", &self.hessian.is_some())
            .finish()
    }
}

impl ConvexFunction {
    pub fn new(
        name: impl Into<String>,
        manifold_key: impl Into<String>,
        value: impl Fn(&Coords) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            manifold_key: manifold_key.into(),
            value: Arc::new(value),
            gradient: None,
            hessian: None,
        }
    }

    /// Riemannian gradient, as chart components.
    pub fn with_gradient(mut self, gradient: impl Fn(&Coords) -> Coords + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_hessian(mut self, hessian: impl Fn(&Coords, &Coords, &Coords) -> f64 + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn manifold_key(&self) -> &str {
        &self.manifold_key
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    #[inline]
    pub fn value(&self, x: &Coords) -> f64 {
        (self.value)(x)
    }

    pub fn hessian(&self, x: &Coords, a: &Coords, b: &Coords) -> Option<f64> {
        self.hessian.as_ref().map(|h| h(x, a, b))
    }

    /// Riemannian gradient at `x`: the callback when present, otherwise
    /// `g^{-1} df` with central differences.
    pub fn gradient(&self, m: &ChartManifold, x: &Coords) -> Result<Coords> {
        if let Some(g) = &self.gradient {
            return Ok(g(x));
        }
        gradient_fd(m, x, |p| self.value(p))
    }

    /// `a·f + b·g`. Gradients and Hessians carry over when both sides have them.
    pub fn linear_combination(name: impl Into<String>, a: f64, f: &Self, b: f64, g: &Self) -> Self {
        let (fv, gv) = (f.value.clone(), g.value.clone());
        let mut out = Self::new(name, f.manifold_key.clone(), move |x| a * fv(x) + b * gv(x));
        if let (Some(fg), Some(gg)) = (f.gradient.clone(), g.gradient.clone()) {
            out.gradient = Some(Arc::new(move |x| a * fg(x) + b * gg(x)));
        }
        if let (Some(fh), Some(gh)) = (f.hessian.clone(), g.hessian.clone()) {
            out.hessian = Some(Arc::new(move |x, u, w| a * fh(x, u, w) + b * gh(x, u, w)));
        }
        out
    }

    /// `f − c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        let v = self.value.clone();
        out.value = Arc::new(move |x| v(x) - c);
        out
    }
}

/// `g^{-1} df` by central differences.
pub fn gradient_fd(m: &ChartManifold, x: &Coords, f: impl Fn(&Coords) -> f64) -> Result<Coords> {
    let mut df = Coords::zeros();
    for i in 0..m.dim() {
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += GRADIENT_FD_STEP;
        xm[i] -= GRADIENT_FD_STEP;
        df[i] = (f(&xp) - f(&xm)) / (2.0 * GRADIENT_FD_STEP);
    }
    let g_inv = m
        .metric(x)?
        .try_inverse()
        .ok_or_else(|| GeometryError::DegenerateMetric { point: m.to_vec(x) })?;
    Ok(g_inv * df)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    StrictlyConvex,
    Convex,
    NonConvex,
    Inconclusive,
}

impl Verdict {
    /// strictly convex iff `margin > tol`, convex iff `margin ≥ −tol`.
    pub fn classify(margin: f64, tol: f64) -> Self {
        if margin.is_nan() {
            Verdict::Inconclusive
        } else if margin > tol {
            Verdict::StrictlyConvex
        } else if margin >= -tol {
            Verdict::Convex
        } else {
            Verdict::NonConvex
        }
    }

    pub fn is_convex(self) -> bool {
        matches!(self, Verdict::StrictlyConvex | Verdict::Convex)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::StrictlyConvex => "strictly-convex",
            Verdict::Convex => "convex",
            Verdict::NonConvex => "non-convex",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Sampling parameters for [`certify`].
#[derive(Clone, Debug, Serialize)]
pub struct CertifyConfig {
    /// Base-point box; `None` uses the manifold's sampling box.
    pub domain: Option<Vec<(f64, f64)>>,
    pub n_geodesics: usize,
    pub span: f64,
    pub tol: f64,
    pub seed: u64,
    pub step: f64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            domain: None,
            n_geodesics: 200,
            span: 1.0,
            tol: 1e-7,
            seed: 0,
            step: DEFAULT_STEP,
            exec: Execution::default(),
        }
    }
}

/// Number of second-difference intervals on each side of the base point.
pub const HALF_SAMPLES: usize = 64;
/// Fraction of truncated geodesics above which the verdict is inconclusive.
pub const MAX_TRUNCATED_FRACTION: f64 = 0.2;

/// Where the smallest second difference was observed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub sample: usize,
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
    pub parameter: f64,
    pub second_difference: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    pub function: String,
    pub manifold: String,
    pub verdict: Verdict,
    /// Smallest second difference of `f∘γ` over unit-speed geodesics.
    pub margin: f64,
    pub witness: Option<Witness>,
    pub seed: u64,
    pub n_geodesics: usize,
    pub span: f64,
    pub spacing: f64,
    pub tol: f64,
    pub truncated: usize,
    pub note: &'static str,
}

/// Second differences of `f∘γ` along one geodesic.
#[derive(Clone, Debug)]
pub struct Profile {
    /// `(parameter, point, second difference)`.
    pub samples: Vec<(f64, Coords, f64)>,
    /// `(parameter, f)` along the geodesic, in increasing parameter order.
    pub values: Vec<(f64, f64)>,
    pub truncated: bool,
}

/// Samples `f∘γ` at spacing `span / 64` over `[−span, span]` and takes
/// three-point second differences.
pub fn second_difference_profile(
    f: &ConvexFunction,
    m: &ChartManifold,
    start: PhasePoint,
    span: f64,
    step: f64,
) -> Result<Profile> {
    if !(span > 0.0 && step > 0.0) {
        return Err(GeometryError::InvalidArgument(format!(
            "span {span} and step {step} must be positive"
        )));
    }
    let spacing = span / HALF_SAMPLES as f64;
    let sub = (spacing / step).ceil().max(1.0) as usize;
    let h = spacing / sub as f64;

    let mut truncated = false;
    let mut side = |sign: f64| -> Result<Vec<PhasePoint>> {
        let mut out = Vec::with_capacity(HALF_SAMPLES);
        let steps = GeodesicSteps::fixed(m, start, sign * h, sub * HALF_SAMPLES)?;
        for (i, item) in steps.enumerate() {
            match item {
                Ok((_, s)) => {
                    if (i + 1) % sub == 0 {
                        out.push(s);
                    }
                }
                Err(GeometryError::ChartExit { .. }) => {
                    truncated = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    };
    let back = side(-1.0)?;
    let fwd = side(1.0)?;

    let mut points: Vec<(f64, Coords)> = Vec::with_capacity(back.len() + fwd.len() + 1);
    for (i, s) in back.iter().enumerate().rev() {
        points.push((-((i + 1) as f64) * spacing, s.point));
    }
    points.push((0.0, start.point));
    for (i, s) in fwd.iter().enumerate() {
        points.push(((i + 1) as f64 * spacing, s.point));
    }
    let values: Vec<(f64, f64)> = points.iter().map(|(s, p)| (*s, f.value(p))).collect();
    let samples = (1..points.len().saturating_sub(1))
        .map(|i| {
            let d2 = (values[i + 1].1 - 2.0 * values[i].1 + values[i - 1].1) / (spacing * spacing);
            (points[i].0, points[i].1, d2)
        })
        .collect();
    Ok(Profile {
        samples,
        values,
        truncated,
    })
}

/// Unit-speed initial conditions used by [`certify`] and [`constancy_probe`].
pub fn sample_geodesics(
    m: &ChartManifold,
    domain: Option<&[(f64, f64)]>,
    n: usize,
    seed: u64,
) -> Result<Vec<PhasePoint>> {
    let bounds = domain.unwrap_or(m.sample_box());
    if bounds.len() != m.dim() {
        return Err(GeometryError::InvalidArgument(format!(
            "domain has {} axes, manifold `{}` has {}",
            bounds.len(),
            m.key(),
            m.dim()
        )));
    }
    let sampler = BoxSampler::new(bounds, seed);
    let dirs = directions(m.dim(), n);
    (0..n)
        .map(|i| {
            let p = sampler.point(i);
            Ok(PhasePoint::new(p, m.normalize(&p, &dirs[i])?))
        })
        .collect()
}

pub fn certify(f: &ConvexFunction, m: &ChartManifold, config: &CertifyConfig) -> Result<ConvexityReport> {
    if config.n_geodesics == 0 || !(config.span > 0.0) {
        return Err(GeometryError::InvalidArgument(
            "certification needs at least one geodesic and a positive span".into(),
        ));
    }
    let starts = sample_geodesics(m, config.domain.as_deref(), config.n_geodesics, config.seed)?;
    let profiles = map_indexed(config.exec, starts.len(), |i| {
        second_difference_profile(f, m, starts[i], config.span, config.step)
    });

    let mut truncated = 0;
    let mut best: Option<Witness> = None;
    for (i, profile) in profiles.into_iter().enumerate() {
        let profile = profile?;
        truncated += usize::from(profile.truncated);
        for &(s, _, d2) in &profile.samples {
            // strict `<` keeps the first index on ties
            if best.as_ref().is_none_or(|b| d2 < b.second_difference) {
                best = Some(Witness {
                    sample: i,
                    point: m.to_vec(&starts[i].point),
                    direction: m.to_vec(&starts[i].vector),
                    parameter: s,
                    second_difference: d2,
                });
            }
        }
    }

    let margin = best.as_ref().map_or(f64::NAN, |b| b.second_difference);
    let mut verdict = Verdict::classify(margin, config.tol);
    if truncated as f64 > MAX_TRUNCATED_FRACTION * config.n_geodesics as f64 {
        verdict = Verdict::Inconclusive;
    }
    Ok(ConvexityReport {
        function: f.name().to_string(),
        manifold: m.key().to_string(),
        verdict,
        margin,
        witness: best,
        seed: config.seed,
        n_geodesics: config.n_geodesics,
        span: config.span,
        spacing: config.span / HALF_SAMPLES as f64,
        tol: config.tol,
        truncated,
        note: "sampled-geodesic certification: evidence, not proof",
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    /// False when the manifold's flow was not found to be recurrent; the
    /// other fields are then informational only.
    pub applicable: bool,
    pub constant: bool,
    pub oscillation: f64,
}

/// Largest variation of `f` along sampled geodesics. On manifolds whose
/// geodesic flow is recurrent, convex functions must come out constant.
pub fn constancy_probe(
    f: &ConvexFunction,
    m: &ChartManifold,
    recurrence: &RecurrenceStats,
    config: &CertifyConfig,
) -> Result<ProbeReport> {
    let starts = sample_geodesics(m, config.domain.as_deref(), config.n_geodesics, config.seed)?;
    let profiles = map_indexed(config.exec, starts.len(), |i| {
        second_difference_profile(f, m, starts[i], config.span, config.step)
    });
    let mut oscillation = 0.0f64;
    for p in profiles {
        let p = p?;
        let (lo, hi) = p
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| {
                (lo.min(v), hi.max(v))
            });
        oscillation = oscillation.max(hi - lo);
    }
    Ok(ProbeReport {
        applicable: recurrence.manifold == m.key() && recurrence.consistent_with_conservative(),
        constant: oscillation <= config.tol,
        oscillation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use proptest::prelude::*;

    fn quadratic(a: f64, b: f64) -> ConvexFunction {
        ConvexFunction::new("quadratic", "plane", move |x| a * x[0] * x[0] + b * x[1] * x[1])
    }

    #[test]
    fn squared_norm_is_strictly_convex() {
        let m = builtin::plane();
        let cfg = CertifyConfig {
            n_geodesics: 16,
            ..Default::default()
        };
        let r = certify(&quadratic(1.0, 1.0), &m, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::StrictlyConvex);
        assert!((r.margin - 2.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_margin_is_twice_smallest_eigenvalue() {
        let m = builtin::plane();
        let cfg = CertifyConfig {
            n_geodesics: 32,
            ..Default::default()
        };
        let r = certify(&quadratic(3.0, 0.5), &m, &cfg).unwrap();
        assert!((r.margin - 2.0 * 0.5).abs() < 1e-6, "{}", r.margin);
    }

    #[test]
    fn sine_on_torus_is_not_convex() {
        let m = builtin::flat_torus();
        let f = ConvexFunction::new("sin", "torus", |x| (std::f64::consts::TAU * x[0]).sin());
        let cfg = CertifyConfig {
            n_geodesics: 16,
            ..Default::default()
        };
        let r = certify(&f, &m, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::NonConvex);
        let w = r.witness.unwrap();
        assert!(w.second_difference < -1.0);
        // brute-force check of the witness: (f∘γ)'' = −4π² sin(2πx) v_x²
        let x = (w.point[0] + w.parameter * w.direction[0]).rem_euclid(1.0);
        let exact = -4.0 * std::f64::consts::PI.powi(2) * (std::f64::consts::TAU * x).sin() * w.direction[0].powi(2);
        assert!((exact - w.second_difference).abs() < 1e-2 * exact.abs());
    }

    #[test]
    fn truncation_makes_report_inconclusive() {
        // geodesics from near the chart edge leave within the span
        let m = builtin::paraboloid();
        let f = ConvexFunction::new("height", "paraboloid", builtin::Paraboloid::height);
        let cfg = CertifyConfig {
            domain: Some(vec![(49.99, 49.995), (-0.1, 0.1)]),
            n_geodesics: 8,
            span: 5.0,
            ..Default::default()
        };
        let r = certify(&f, &m, &cfg).unwrap();
        assert!(r.truncated > 0);
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn reports_do_not_depend_on_execution() {
        let m = builtin::paraboloid();
        let f = ConvexFunction::new("height", "paraboloid", builtin::Paraboloid::height);
        let mut cfg = CertifyConfig {
            n_geodesics: 24,
            seed: 5,
            ..Default::default()
        };
        let a = serde_json::to_string(&certify(&f, &m, &cfg).unwrap()).unwrap();
        cfg.exec = Execution::Sequential;
        let b = serde_json::to_string(&certify(&f, &m, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fd_gradient_raises_the_index() {
        let m = builtin::paraboloid();
        let x = Coords::new(0.5, 0.0, 0.0);
        // grad z = 2x ∂_x / (1 + 4x²) on the meridian
        let g = gradient_fd(&m, &x, builtin::Paraboloid::height).unwrap();
        assert!((g[0] - 1.0 / 2.0).abs() < 1e-8 && g[1].abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn raising_tol_never_promotes_non_convex(margin in -10.0f64..10.0, tol in 0.0f64..5.0, extra in 0.0f64..5.0) {
            let low = Verdict::classify(margin, tol);
            let high = Verdict::classify(margin, tol + extra);
            prop_assert!(!(low == Verdict::NonConvex && high == Verdict::StrictlyConvex));
            if low.is_convex() {
                prop_assert!(high.is_convex());
            }
        }
    }
}
