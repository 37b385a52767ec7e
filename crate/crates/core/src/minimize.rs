//! Geodesic gradient descent and the regularized scheme `h_k = k·u + g`,
//! together with the soul-region machinery on the paraboloid: the constants
//! `μ₁` (root of `μ − arctan μ = π/2`) and `β = √(¾(1 + μ₁²))`, a geodesic
//! loop search, and the height bound on limit points.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::builtin::Paraboloid;
use crate::convexity::{certify, CertifyConfig, ConvexFunction, ConvexityReport, Verdict};
use crate::error::GeometryError;
use crate::exec::{map_indexed, Execution};
use crate::geodesic::{exp_map, GeodesicSteps, PhasePoint};
use crate::manifold::{ChartManifold, Coords};

#[derive(Debug, Error)]
pub enum MinimizeError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),

    #[error("`{function}` failed certification as {role}: verdict {}, margin {}", report.verdict, report.margin)]
    CertificationFailed {
        role: &'static str,
        function: String,
        report: Box<ConvexityReport>,
    },

    #[error("trace is not applicable: {0}")]
    Inapplicable(String),
}

pub type Result<T, E = MinimizeError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    Fixed(f64),
    /// Backtracking on `f(exp(−α∇f)) ≤ f − c·α·|∇f|²`.
    Armijo {
        initial: f64,
        shrink: f64,
        c: f64,
    },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DescentOptions {
    pub rule: StepRule,
    pub tol: f64,
    pub max_iter: usize,
    /// Integrator step for the exponential map.
    pub exp_step: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            rule: StepRule::Armijo {
                initial: 1.0,
                shrink: 0.5,
                c: 0.3,
            },
            tol: 1e-9,
            max_iter: 2000,
            exp_step: 1e-2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescentStatus {
    Converged,
    MaxIterations,
    /// The line search could not decrease `f` any further.
    Stalled,
    /// An accepted step left `f` unchanged in floating point before `|∇f|`
    /// reached `tol`; the iterate is a minimizer to value resolution.
    ValueResolution,
}

impl DescentStatus {
    pub fn is_success(self) -> bool {
        matches!(self, Self::Converged | Self::ValueResolution)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DescentResult {
    pub point: Coords,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: DescentStatus,
}

const MIN_STEP: f64 = 1e-20;

/// Iterates `x ← exp_x(−α ∇f(x))` until `|∇f| < tol`.
pub fn gradient_descent(
    m: &ChartManifold,
    f: &ConvexFunction,
    x0: &Coords,
    opts: &DescentOptions,
) -> Result<DescentResult> {
    m.check_domain(x0)?;
    let mut x = *x0;
    let mut fx = f.value(&x);
    let mut alpha_prev = match opts.rule {
        StepRule::Fixed(a) => a,
        StepRule::Armijo { initial, .. } => initial,
    };

    for iter in 0..opts.max_iter {
        let grad = f.gradient(m, &x)?;
        let gnorm_sq = m.inner(&x, &grad, &grad);
        let gnorm = gnorm_sq.sqrt();
        if gnorm < opts.tol {
            return Ok(DescentResult {
                point: x,
                value: fx,
                grad_norm: gnorm,
                iterations: iter,
                status: DescentStatus::Converged,
            });
        }
        let next = match opts.rule {
            StepRule::Fixed(alpha) => Some(exp_map(m, &x, &(-alpha * grad), opts.exp_step)?),
            StepRule::Armijo { initial, shrink, c } => {
                let mut alpha = (2.0 * alpha_prev).min(initial);
                let mut accepted = None;
                while alpha > MIN_STEP {
                    match exp_map(m, &x, &(-alpha * grad), opts.exp_step) {
                        Ok(candidate) => {
                            let fc = f.value(&candidate);
                            if fc <= fx - c * alpha * gnorm_sq {
                                accepted = Some(candidate);
                                break;
                            }
                        }
                        Err(GeometryError::ChartExit { .. }) => {}
                        Err(e) => return Err(e.into()),
                    }
                    alpha *= shrink;
                }
                alpha_prev = alpha;
                accepted
            }
        };
        match next {
            Some(p) => {
                let fp = f.value(&p);
                let stuck = fp >= fx;
                x = p;
                fx = fp;
                if stuck {
                    return Ok(DescentResult {
                        point: x,
                        value: fx,
                        grad_norm: gnorm,
                        iterations: iter + 1,
                        status: DescentStatus::ValueResolution,
                    });
                }
            }
            None => {
                return Ok(DescentResult {
                    point: x,
                    value: fx,
                    grad_norm: gnorm,
                    iterations: iter,
                    status: DescentStatus::Stalled,
                })
            }
        }
    }
    let grad = f.gradient(m, &x)?;
    Ok(DescentResult {
        point: x,
        value: fx,
        grad_norm: m.norm(&x, &grad),
        iterations: opts.max_iter,
        status: DescentStatus::MaxIterations,
    })
}

/// Geometric schedule `{1, 2, 4, ..., 2^max_exp}`.
pub fn geometric_schedule(max_exp: u32) -> Vec<f64> {
    (0..=max_exp).map(|e| 2f64.powi(e as i32)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularizedOptions {
    pub schedule: Vec<f64>,
    pub descent: DescentOptions,
    pub certify: CertifyConfig,
    /// Successive iterates closer than this mark the limit as found.
    pub limit_tol: f64,
}

impl Default for RegularizedOptions {
    fn default() -> Self {
        Self {
            schedule: geometric_schedule(6),
            descent: DescentOptions::default(),
            certify: CertifyConfig {
                n_geodesics: 64,
                ..CertifyConfig::default()
            },
            limit_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: f64,
    pub x: Vec<f64>,
    pub u: f64,
    pub g: f64,
    pub h: f64,
    pub iterations: usize,
    pub status: DescentStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceStatus {
    Converged,
    /// All inner solves finished but successive iterates did not settle.
    NotStabilized,
    /// An inner solve failed to converge; the trace stops there.
    Partial,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateSummary {
    pub function: String,
    pub verdict: Verdict,
    pub margin: f64,
}

impl From<&ConvexityReport> for CertificateSummary {
    fn from(r: &ConvexityReport) -> Self {
        Self {
            function: r.function.clone(),
            verdict: r.verdict,
            margin: r.margin,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimizeTrace {
    pub manifold: String,
    pub p0: Vec<f64>,
    /// `g(p₀)`, the right-hand side of `k·u(x_k) + g(x_k) ≤ g(p₀)`.
    pub g_p0: f64,
    /// Amount subtracted from `u` so that `u(p₀) = 0`.
    pub u_shift: f64,
    pub records: Vec<TraceRecord>,
    pub limit: Option<Vec<f64>>,
    pub status: TraceStatus,
    pub u_certificate: Option<CertificateSummary>,
    pub g_certificate: Option<CertificateSummary>,
}

impl MinimizeTrace {
    /// `h_k(x_k) ≤ g(p₀) + tol` for every record.
    pub fn regularization_bound_holds(&self, tol: f64) -> bool {
        self.records.iter().all(|r| r.h <= self.g_p0 + tol)
    }

    /// `u(x_k) ≤ g(p₀)/k + tol` for every record.
    pub fn decay_bound_holds(&self, tol: f64) -> bool {
        self.records.iter().all(|r| r.u <= self.g_p0 / r.k + tol)
    }

    /// `g(x_k) ≤ g(p₀) + tol` for every record.
    pub fn localization_holds(&self, tol: f64) -> bool {
        self.records.iter().all(|r| r.g <= self.g_p0 + tol)
    }

    /// Writes `k, x_1..x_n, u, g, h_k, iterations`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.p0.len();
        let mut header = vec!["k".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend(["u", "g", "h_k", "iterations"].map(String::from));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.k.to_string()];
            row.extend(r.x.iter().map(f64::to_string));
            row.extend([r.u, r.g, r.h].map(|v| v.to_string()));
            row.push(r.iterations.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Minimizes `h_k = k·u + g` along the schedule, warm-starting each solve
/// at the previous minimizer.
///
/// `u` is shifted so that `u(p₀) = 0`; `p₀` must be a minimizer of `u`.
/// Both functions are certified first: `u` must not come out non-convex and
/// `g` must come out strictly convex, otherwise the run is refused.
pub fn regularized_minimize(
    m: &ChartManifold,
    u: &ConvexFunction,
    g: &ConvexFunction,
    p0: &Coords,
    opts: &RegularizedOptions,
) -> Result<MinimizeTrace> {
    m.check_domain(p0)?;
    if opts.schedule.is_empty() || opts.schedule.iter().any(|k| !(*k > 0.0)) {
        return Err(GeometryError::InvalidArgument("schedule must hold positive k values".into()).into());
    }

    let g_report = certify(g, m, &opts.certify)?;
    if g_report.verdict != Verdict::StrictlyConvex {
        return Err(MinimizeError::CertificationFailed {
            role: "exhaustion g",
            function: g.name().to_string(),
            report: Box::new(g_report),
        });
    }
    let u_report = certify(u, m, &opts.certify)?;
    if !u_report.verdict.is_convex() {
        return Err(MinimizeError::CertificationFailed {
            role: "objective u",
            function: u.name().to_string(),
            report: Box::new(u_report),
        });
    }

    let u_shift = u.value(p0);
    let u0 = u.shifted(u_shift);
    let g_p0 = g.value(p0);

    let mut records = Vec::with_capacity(opts.schedule.len());
    let mut x = *p0;
    let mut status = TraceStatus::NotStabilized;
    let mut partial = false;
    for &k in &opts.schedule {
        let h = ConvexFunction::linear_combination(format!("h_{k}"), k, &u0, 1.0, g);
        let res = gradient_descent(m, &h, &x, &opts.descent)?;
        x = res.point;
        records.push(TraceRecord {
            k,
            x: m.to_vec(&x),
            u: u0.value(&x),
            g: g.value(&x),
            h: res.value,
            iterations: res.iterations,
            status: res.status,
        });
        if !res.status.is_success() {
            partial = true;
            break;
        }
    }

    let mut limit = None;
    if partial {
        status = TraceStatus::Partial;
    } else if let [.., a, b] = records.as_slice() {
        let pa = m.point(&a.x)?;
        let pb = m.point(&b.x)?;
        if m.chart_distance(&pa, &pb) < opts.limit_tol {
            status = TraceStatus::Converged;
            limit = Some(b.x.clone());
        }
    } else if let [only] = records.as_slice() {
        // a single k has nothing to stabilize against
        status = TraceStatus::Converged;
        limit = Some(only.x.clone());
    }

    Ok(MinimizeTrace {
        manifold: m.key().to_string(),
        p0: m.to_vec(p0),
        g_p0,
        u_shift,
        records,
        limit,
        status,
        u_certificate: Some((&u_report).into()),
        g_certificate: Some((&g_report).into()),
    })
}

/// `μ − arctan μ − π/2`, strictly increasing for `μ > 0`.
pub fn mu1_equation(mu: f64) -> f64 {
    mu - mu.atan() - std::f64::consts::FRAC_PI_2
}

/// Positive root of `μ − arctan μ = π/2`, by bisection on `[2, 4]`.
pub fn solve_mu1(tol: f64) -> f64 {
    let (mut lo, mut hi) = (2.0f64, 4.0f64);
    debug_assert!(mu1_equation(lo) < 0.0 && mu1_equation(hi) > 0.0);
    loop {
        let mid = 0.5 * (lo + hi);
        let f = mu1_equation(mid);
        if f.abs() < tol || mid <= lo || mid >= hi {
            return mid;
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Bisection tolerance behind [`beta`].
pub const MU1_TOL: f64 = 1e-14;

/// `β = √(¾(1 + μ₁²))`.
pub fn beta() -> f64 {
    beta_from(solve_mu1(MU1_TOL))
}

pub fn beta_from(mu1: f64) -> f64 {
    (0.75 * (1.0 + mu1 * mu1)).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct LoopSearchConfig {
    pub n_directions: usize,
    pub max_length: f64,
    pub closure_tol: f64,
    pub step: f64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for LoopSearchConfig {
    fn default() -> Self {
        Self {
            n_directions: 360,
            max_length: 50.0,
            closure_tol: 1e-3,
            step: 5e-3,
            exec: Execution::default(),
        }
    }
}

impl LoopSearchConfig {
    /// Geodesics shorter than this never count as loops.
    pub fn min_loop_length(&self) -> f64 {
        10.0 * self.closure_tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicLoop {
    /// Initial angle in the chart, radians.
    pub angle: f64,
    pub direction: Vec<f64>,
    pub length: f64,
    pub closure_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopVerdict {
    Simple,
    NonSimple,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct LoopSearchResult {
    pub manifold: String,
    pub base_point: Vec<f64>,
    pub scanned: usize,
    pub escaped: usize,
    pub loops: Vec<GeodesicLoop>,
    /// Smallest closure error seen, whether or not it made a loop.
    pub best_closure: Option<f64>,
    pub verdict: LoopVerdict,
}

/// Closest return to the base point of the unit-speed geodesic in chart
/// direction `angle`.
#[derive(Clone, Copy, Debug)]
struct Shot {
    closure: f64,
    length: f64,
    escaped: bool,
}

fn closest_on_segment(p: &Coords, a: &Coords, b: &Coords) -> (f64, f64) {
    let d = b - a;
    let len_sq = d.norm_squared();
    let s = if len_sq > 0.0 {
        ((p - a).dot(&d) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((a + s * d - p).norm(), s)
}

fn shoot(m: &ChartManifold, p: &Coords, angle: f64, cfg: &LoopSearchConfig) -> Result<Shot> {
    let dir = m.normalize(p, &Coords::new(angle.cos(), angle.sin(), 0.0))?;
    let depart = cfg.min_loop_length();
    let mut best = Shot {
        closure: f64::INFINITY,
        length: f64::NAN,
        escaped: false,
    };
    let mut departed = false;
    // last two states and their distances, to spot local minima of the distance
    let mut prev2: Option<(f64, Coords, f64)> = None;
    let mut prev1: (f64, Coords, f64) = (0.0, *p, 0.0);
    for item in GeodesicSteps::new(m, PhasePoint::new(*p, dir), cfg.max_length, cfg.step)? {
        let (t, s) = match item {
            Ok(v) => v,
            Err(GeometryError::ChartExit { .. }) => {
                best.escaped = true;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let d = m.chart_distance(&s.point, p);
        if !departed {
            departed = d > depart && t > depart;
        } else if let Some((t2, x2, d2)) = prev2 {
            let (t1, x1, d1) = prev1;
            if d1 < d2 && d1 <= d && t1 > depart {
                let (da, sa) = closest_on_segment(p, &x2, &x1);
                let (db, sb) = closest_on_segment(p, &x1, &s.point);
                let (dist, when) = if da <= db {
                    (da, t2 + sa * (t1 - t2))
                } else {
                    (db, t1 + sb * (t - t1))
                };
                if dist < best.closure {
                    best.closure = dist;
                    best.length = when;
                }
            }
        }
        prev2 = Some(prev1);
        prev1 = (t, s.point, d);
    }
    Ok(best)
}

/// Golden-section minimization of the closure error over `[lo, hi]`.
fn refine(m: &ChartManifold, p: &Coords, lo: f64, hi: f64, cfg: &LoopSearchConfig) -> Result<(f64, Shot)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut sc = shoot(m, p, c, cfg)?;
    let mut sd = shoot(m, p, d, cfg)?;
    while b - a > 1e-12 {
        if sc.closure < sd.closure {
            b = d;
            d = c;
            sd = sc;
            c = b - INV_PHI * (b - a);
            sc = shoot(m, p, c, cfg)?;
        } else {
            a = c;
            c = d;
            sc = sd;
            d = a + INV_PHI * (b - a);
            sd = shoot(m, p, d, cfg)?;
        }
        if sc.closure.min(sd.closure) < 1e-3 * cfg.closure_tol {
            break;
        }
    }
    Ok(if sc.closure < sd.closure { (c, sc) } else { (d, sd) })
}

/// Most local minima of the angular scan that are refined.
const MAX_REFINED: usize = 16;

/// Looks for geodesic loops closed at `p` on a surface chart.
pub fn loop_search(m: &ChartManifold, p: &Coords, cfg: &LoopSearchConfig) -> Result<LoopSearchResult> {
    if m.dim() != 2 {
        return Err(GeometryError::InvalidArgument("loop search needs a surface chart".into()).into());
    }
    if cfg.n_directions < 8 || !(cfg.max_length > 0.0 && cfg.closure_tol > 0.0) {
        return Err(GeometryError::InvalidArgument(
            "loop search needs at least 8 directions and positive length and tolerance".into(),
        )
        .into());
    }
    m.check_domain(p)?;
    let n = cfg.n_directions;
    let spacing = std::f64::consts::TAU / n as f64;
    let angle = |i: usize| spacing * i as f64;
    let shots = map_indexed(cfg.exec, n, |i| shoot(m, p, angle(i), cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let escaped = shots.iter().filter(|s| s.escaped).count();

    let mut minima: Vec<usize> = (0..n)
        .filter(|&i| {
            let c = shots[i].closure;
            c.is_finite() && c <= shots[(i + n - 1) % n].closure && c <= shots[(i + 1) % n].closure
        })
        .collect();
    minima.sort_by(|&a, &b| shots[a].closure.total_cmp(&shots[b].closure).then(a.cmp(&b)));
    minima.truncate(MAX_REFINED);

    let refined = map_indexed(cfg.exec, minima.len(), |j| {
        let a = angle(minima[j]);
        refine(m, p, a - spacing, a + spacing, cfg)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut loops = Vec::new();
    let mut best_closure = shots.iter().map(|s| s.closure).fold(f64::INFINITY, f64::min);
    for (a, shot) in refined {
        best_closure = best_closure.min(shot.closure);
        if shot.closure < cfg.closure_tol && shot.length > cfg.min_loop_length() {
            let a = a.rem_euclid(std::f64::consts::TAU);
            let dir = m.normalize(p, &Coords::new(a.cos(), a.sin(), 0.0))?;
            loops.push(GeodesicLoop {
                angle: a,
                direction: m.to_vec(&dir),
                length: shot.length,
                closure_error: shot.closure,
            });
        }
    }
    loops.sort_by(|a, b| a.angle.total_cmp(&b.angle));

    let verdict = if !loops.is_empty() {
        LoopVerdict::NonSimple
    } else if best_closure < 10.0 * cfg.closure_tol {
        // a near miss that refinement could not close
        LoopVerdict::Inconclusive
    } else {
        LoopVerdict::Simple
    };
    Ok(LoopSearchResult {
        manifold: m.key().to_string(),
        base_point: m.to_vec(p),
        scanned: n,
        escaped,
        loops,
        best_closure: best_closure.is_finite().then_some(best_closure),
        verdict,
    })
}

/// Slack on the limit-point bound `height(p) ≤ β`.
pub const BETA_SLACK: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SoulRegionCheck {
    pub beta: f64,
    pub limit_height: f64,
    pub max_iterate_height: f64,
    pub holds: bool,
}

/// Checks `height(p) ≤ β + slack` for the limit and `height(x_k) < β` for
/// every iterate of a converged paraboloid trace.
pub fn soul_region_check(trace: &MinimizeTrace) -> Result<SoulRegionCheck> {
    if trace.manifold != "paraboloid" {
        return Err(MinimizeError::Inapplicable(format!(
            "trace is on `{}`, not the paraboloid",
            trace.manifold
        )));
    }
    let limit = match (&trace.status, &trace.limit) {
        (TraceStatus::Converged, Some(limit)) => limit,
        _ => return Err(MinimizeError::Inapplicable("trace did not converge".into())),
    };
    let height = |x: &[f64]| Paraboloid::height(&Coords::new(x[0], x[1], 0.0));
    let b = beta();
    let limit_height = height(limit);
    let max_iterate_height = trace
        .records
        .iter()
        .map(|r| height(&r.x))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SoulRegionCheck {
        beta: b,
        limit_height,
        max_iterate_height,
        holds: limit_height <= b + BETA_SLACK && max_iterate_height < b,
    })
}
