//! Subcommands. Each resolves its configuration first (usage errors), then
//! runs and wraps the result together with the resolved configuration.

use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context as _};
use clap::{Args, Subcommand};
use conformal_geo::convexity::{certify, CertifyConfig, Verdict};
use conformal_geo::flow::{random_unit_phase_point, recurrence_experiment, RecurrenceConfig};
use conformal_geo::geodesic::{geodesic_integrate, DEFAULT_STEP};
use conformal_geo::minimize::{
    beta_from, loop_search, mu1_equation, regularized_minimize, solve_mu1, soul_region_check, DescentOptions,
    LoopSearchConfig, LoopVerdict, MinimizeError, RegularizedOptions, TraceStatus, MU1_TOL,
};
use conformal_geo::warped::{surface_curvature_grid, write_curvature_csv, CurvatureSample, WarpedProduct};
use conformal_geo::{builtin, ChartManifold, Execution, PhasePoint};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::expr;

pub struct Context {
    pub seed: u64,
    pub threads: Option<usize>,
}

/// A run that got past configuration. `failed` maps to the numerical-failure
/// exit code, `inconclusive` to the inconclusive one.
pub struct Outcome {
    pub result: Value,
    pub files: Vec<(String, Vec<u8>)>,
    pub inconclusive: bool,
    pub failed: bool,
}

struct Body {
    value: Value,
    files: Vec<(String, Vec<u8>)>,
    inconclusive: bool,
    failed: bool,
}

impl Body {
    fn new(value: Value) -> Self {
        Self {
            value,
            files: Vec::new(),
            inconclusive: false,
            failed: false,
        }
    }

    fn file(mut self, name: &str, bytes: Vec<u8>) -> Self {
        self.files.push((name.to_string(), bytes));
        self
    }
}

fn finish(command: &str, ctx: &Context, config: impl Serialize, run: anyhow::Result<Body>) -> Outcome {
    let mut top = Map::new();
    top.insert("command".into(), json!(command));
    top.insert("seed".into(), json!(ctx.seed));
    top.insert("threads".into(), json!(ctx.threads));
    top.insert(
        "config".into(),
        serde_json::to_value(config).expect("configs serialize"),
    );
    match run {
        Ok(body) => {
            top.insert("result".into(), body.value);
            Outcome {
                result: Value::Object(top),
                files: body.files,
                inconclusive: body.inconclusive,
                failed: body.failed,
            }
        }
        Err(e) => {
            top.insert("error".into(), json!(format!("{e:#}")));
            Outcome {
                result: Value::Object(top),
                files: Vec::new(),
                inconclusive: false,
                failed: true,
            }
        }
    }
}

fn manifold(key: &str) -> anyhow::Result<ChartManifold> {
    builtin::by_key(key).map_err(|_| anyhow!("unknown manifold `{key}`; expected one of {:?}", builtin::MANIFEST))
}

fn coords(m: &ChartManifold, values: &[f64], what: &str) -> anyhow::Result<conformal_geo::Coords> {
    m.point(values)
        .with_context(|| format!("--{what} {values:?} on `{}`", m.key()))
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("`{lo}`: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("`{hi}`: {e}"))?;
    if !(lo <= hi) {
        return Err(format!("empty range `{s}`"));
    }
    Ok((lo, hi))
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one geodesic; writes the path CSV.
    Geodesic(GeodesicArgs),
    /// Closed-form vs finite-difference sectional curvature on a grid.
    Curvature(CurvatureArgs),
    /// Sampled geodesic convexity certificate for a function.
    Certify(CertifyArgs),
    /// First-return statistics of the unit geodesic flow.
    Recur(RecurArgs),
    /// Regularized minimization from a JSON run descriptor.
    Minimize(MinimizeArgs),
    /// Scan for geodesic loops at a base point.
    Loops(LoopsArgs),
    /// The constants mu1 and beta.
    Beta(BetaArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Geodesic(_) => "geodesic",
            Self::Curvature(_) => "curvature",
            Self::Certify(_) => "certify",
            Self::Recur(_) => "recur",
            Self::Minimize(_) => "minimize",
            Self::Loops(_) => "loops",
            Self::Beta(_) => "beta",
        }
    }

    pub fn run(&self, ctx: &Context) -> anyhow::Result<Outcome> {
        match self {
            Self::Geodesic(a) => a.run(ctx),
            Self::Curvature(a) => a.run(ctx),
            Self::Certify(a) => a.run(ctx),
            Self::Recur(a) => a.run(ctx),
            Self::Minimize(a) => a.run(ctx),
            Self::Loops(a) => a.run(ctx),
            Self::Beta(a) => a.run(ctx),
        }
    }
}

#[derive(Debug, Args)]
pub struct GeodesicArgs {
    #[arg(long, default_value = "paraboloid")]
    manifold: String,
    /// Initial point; sampled from the seed when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point: Option<Vec<f64>>,
    /// Initial velocity; a seeded unit vector when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    velocity: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
}

#[derive(Serialize)]
struct GeodesicConfig {
    manifold: String,
    point: Vec<f64>,
    velocity: Vec<f64>,
    duration: f64,
    step: f64,
}

impl GeodesicArgs {
    fn run(&self, ctx: &Context) -> anyhow::Result<Outcome> {
        let m = manifold(&self.manifold)?;
        let sampled = random_unit_phase_point(&m, ctx.seed, 0)?;
        let point = match &self.point {
            Some(p) => coords(&m, p, "point")?,
            None => sampled.point,
        };
        let velocity = match &self.velocity {
            Some(v) => coords(&m, v, "velocity")?,
            None => m.normalize(&point, &sampled.vector)?,
        };
        if !(self.duration > 0.0 && self.step > 0.0) {
            bail!("--duration and --step must be positive");
        }
        let config = GeodesicConfig {
            manifold: m.key().to_string(),
            point: m.to_vec(&point),
            velocity: m.to_vec(&velocity),
            duration: self.duration,
            step: self.step,
        };
        let run = (|| {
            let path = geodesic_integrate(&m, PhasePoint::new(point, velocity), self.duration, self.step)?;
            let end = path.endpoint();
            let csv = csv_bytes(|b| path.write_csv(&m, b))?;
            Ok(Body::new(json!({
                "steps": path.states.len() - 1,
                "step_used": path.step,
                "endpoint": { "point": m.to_vec(&end.point), "vector": m.to_vec(&end.vector) },
                "speed_drift": path.speed_drift(&m),
                "clairaut_drift": path.clairaut_drift(&m),
            }))
            .file("geodesic.csv", csv))
        })();
        Ok(finish("geodesic", ctx, config, run))
    }
}

/// Largest `|K_analytic − K_fd|` accepted on a curvature grid.
const CURVATURE_TOL: f64 = 1e-4;

#[derive(Debug, Args)]
pub struct CurvatureArgs {
    #[arg(long, default_value = "m3")]
    manifold: String,
    /// Grid points per axis.
    #[arg(long, default_value_t = 7)]
    grid: usize,
    /// Base coordinate range on m3, as lo:hi.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    t_range: Option<(f64, f64)>,
    /// First chart coordinate range, as lo:hi.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    x_range: Option<(f64, f64)>,
    /// Second chart coordinate range, as lo:hi.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    y_range: Option<(f64, f64)>,
}

#[derive(Serialize)]
struct CurvatureConfig {
    manifold: String,
    grid: usize,
    t_range: Option<(f64, f64)>,
    x_range: (f64, f64),
    y_range: (f64, f64),
    tolerance: f64,
}

impl CurvatureArgs {
    fn run(&self, ctx: &Context) -> anyhow::Result<Outcome> {
        let m = manifold(&self.manifold)?;
        if self.grid == 0 {
            bail!("--grid must be at least 1");
        }
        let is_m3 = m.key() == "m3";
        if !is_m3 && self.t_range.is_some() {
            bail!("--t-range only applies to m3");
        }
        let (dx, dy, dt) = if is_m3 {
            ((-1.5, 1.5), (-1.5, 1.5), Some((-0.5, 1.0)))
        } else {
            (m.sample_box()[0], m.sample_box()[1], None)
        };
        let config = CurvatureConfig {
            manifold: m.key().to_string(),
            grid: self.grid,
            t_range: self.t_range.or(dt),
            x_range: self.x_range.unwrap_or(dx),
            y_range: self.y_range.unwrap_or(dy),
            tolerance: CURVATURE_TOL,
        };
        let run = (|| {
            let xs = linspace(config.x_range, config.grid);
            let ys = linspace(config.y_range, config.grid);
            let rows: Vec<CurvatureSample> = match config.t_range {
                Some(tr) => WarpedProduct::m3().curvature_grid(&linspace(tr, config.grid), &xs, &ys)?,
                None => surface_curvature_grid(&m, &xs, &ys)?,
            };
            let max_err = rows.iter().map(|r| r.abs_err).fold(0.0, f64::max);
            let k_min = rows.iter().map(|r| r.k_analytic).fold(f64::INFINITY, f64::min);
            let k_max = rows.iter().map(|r| r.k_analytic).fold(f64::NEG_INFINITY, f64::max);
            let csv = csv_bytes(|b| write_curvature_csv(&rows, b))?;
            let mut body = Body::new(json!({
                "rows": rows.len(),
                "max_abs_err": max_err,
                "k_min": k_min,
                "k_max": k_max,
                "within_tolerance": max_err <= CURVATURE_TOL,
            }))
            .file("curvature.csv", csv);
            body.failed = max_err > CURVATURE_TOL;
            Ok(body)
        })();
        Ok(finish("curvature", ctx, config, run))
    }
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long, default_value = "m3")]
    manifold: String,
    /// Function key or an expression in chart coordinates.
    #[arg(long, default_value = "energy", allow_hyphen_values = true)]
    function: String,
    #[arg(long, default_value_t = 200)]
    geodesics: usize,
    #[arg(long, default_value_t = 1.0)]
    span: f64,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    /// Sampling box, one lo:hi per chart coordinate.
    #[arg(long, value_delimiter = ',', value_parser = parse_range, allow_hyphen_values = true)]
    domain: Option<Vec<(f64, f64)>>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
}

#[derive(Serialize)]
struct CertifyRun {
    manifold: String,
    function: String,
    #[serde(flatten)]
    certify: CertifyConfig,
}

impl CertifyArgs {
    fn run(&self, ctx: &Context) -> anyhow::Result<Outcome> {
        let m = manifold(&self.manifold)?;
        let f = expr::resolve(&self.function, &m)?;
        let domain = self.domain.clone().unwrap_or_else(|| m.sample_box().to_vec());
        if domain.len() != m.dim() {
            bail!(
                "--domain has {} ranges, `{}` has {} coordinates",
                domain.len(),
                m.key(),
                m.dim()
            );
        }
        if self.geodesics == 0 || !(self.span > 0.0 && self.step > 0.0) {
            bail!("--geodesics, --span and --step must be positive");
        }
        let certify_cfg = CertifyConfig {
            domain: Some(domain),
            n_geodesics: self.geodesics,
            span: self.span,
            tol: self.tol,
            seed: ctx.seed,
            step: self.step,
            exec: Execution::Parallel,
        };
        let config = CertifyRun {
            manifold: m.key().to_string(),
            function: f.name().to_string(),
            certify: certify_cfg.clone(),
        };
        let run = (|| {
            let report = certify(&f, &m, &certify_cfg)?;
            let mut body = Body::new(serde_json::to_value(&report)?);
            body.inconclusive = report.verdict == Verdict::Inconclusive;
            Ok(body)
        })();
        Ok(finish("certify", ctx, config, run))
    }
}

#[derive(Debug, Args)]
pub struct RecurArgs {
    #[arg(long, default_value = "torus")]
    manifold: String,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 200.0)]
    horizon: f64,
    /// Spacing of the return checks.
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
}

#[derive(Serialize)]
struct RecurRun {
    manifold: String,
    #[serde(flatten)]
    recurrence: RecurrenceConfig,
}

impl RecurArgs {
    fn run(&self, ctx: &Context) -> anyhow::Result<Outcome> {
        let m = manifold(&self.manifold)?;
        if self.samples == 0 || !(self.epsilon > 0.0 && self.horizon > 0.0 && self.dt > 0.0 && self.step > 0.0) {
            bail!("--samples, --epsilon, --horizon, --dt and --step must be positive");
        }
        let cfg = RecurrenceConfig {
            n_samples: self.samples,
            epsilon: self.epsilon,
            horizon: self.horizon,
            dt: self.dt,
            step: self.step,
            seed: ctx.seed,
            exec: Execution::Parallel,
        };
        let config = RecurRun {
            manifold: m.key().to_string(),
            recurrence: cfg.clone(),
        };
        let run = (|| {
            let stats = recurrence_experiment(&m, &cfg)?;
            let csv = csv_bytes(|b| stats.write_csv(b))?;
            let mut body = Body::new(json!({
                "t_min": stats.t_min,
                "returns": stats.returns(),
                "recurrent_fraction": stats.recurrent_fraction,
                "verdict": stats.verdict,
                "distance": stats.distance,
            }))
            .file("recurrence.csv", csv);
            body.inconclusive = stats.verdict == "undetermined";
            Ok(body)
        })();
        Ok(finish("recur", ctx, config, run))
    }
}

#[derive(Debug, Args)]
pub struct MinimizeArgs {
    /// Run descriptor (JSON file).
    descriptor: PathBuf,
}

/// `{ manifold, u, g, p0, schedule?, tolerances?, seed? }`.
#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunDescriptor {
    pub manifold: String,
    /// Function key or expression for the objective.
    pub u: String,
    /// Function key or expression for the exhaustion.
    pub g: String,
    pub p0: Vec<f64>,
    #[serde(default)]
    pub schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Overrides `--seed` when present.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Gradient-norm stop of the inner descent.
    pub descent: f64,
    pub max_iter: usize,
    /// Successive-iterate distance at which the limit is declared.
    pub limit: f64,
    /// Margin tolerance of the convexity certificates.
    pub certify: f64,
    pub certify_geodesics: usize,
    /// Slack on the recorded inequalities.
    pub bounds: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let opts = RegularizedOptions::default();
        Self {
            descent: opts.descent.tol,
            max_iter: opts.descent.max_iter,
            limit: opts.limit_tol,
            certify: opts.certify.tol,
            certify_geodesics: opts.certify.n_geodesics,
            bounds: 1e-8,
        }
    }
}

impl MinimizeArgs {
    fn run(&self, ctx: &Context) -> anyhow::Result<Outcome> {
        let text = fs::read_to_string(&self.descriptor)
            .with_context(|| format!("cannot read {}", self.descriptor.display()))?;
        let mut desc: RunDescriptor = serde_json::from_str(&text).context("invalid run descriptor")?;
        let seed = desc.seed.unwrap_or(ctx.seed);
        desc.seed = Some(seed);
        let m = manifold(&desc.manifold)?;
        let u = expr::resolve(&desc.u, &m).context("key `u`")?;
        let g = expr::resolve(&desc.g, &m).context("key `g`")?;
        let p0 = m.point(&desc.p0).context("key `p0`")?;
        let defaults = RegularizedOptions::default();
        let schedule = desc.schedule.clone().unwrap_or_else(|| defaults.schedule.clone());
        desc.schedule = Some(schedule.clone());
        let tol = desc.tolerances.clone();
        let opts = RegularizedOptions {
            schedule,
            descent: DescentOptions {
                tol: tol.descent,
                max_iter: tol.max_iter,
                ..defaults.descent
            },
            certify: CertifyConfig {
                tol: tol.certify,
                n_geodesics: tol.certify_geodesics,
                seed,
                ..defaults.certify
            },
            limit_tol: tol.limit,
        };
        let ctx = Context {
            seed,
            threads: ctx.threads,
        };
        let run = (|| -> anyhow::Result<Body> {
            let trace = match regularized_minimize(&m, &u, &g, &p0, &opts) {
                Ok(t) => t,
                Err(MinimizeError::CertificationFailed { role, function, report }) => {
                    let mut body = Body::new(json!({
                        "refused": { "role": role, "function": function, "certificate": *report },
                    }));
                    body.inconclusive = report.verdict == Verdict::Inconclusive;
                    body.failed = !body.inconclusive;
                    return Ok(body);
                }
                Err(e) => return Err(e.into()),
            };
            let bounds = json!({
                "regularization": trace.regularization_bound_holds(tol.bounds),
                "decay": trace.decay_bound_holds(tol.bounds),
                "localization": trace.localization_holds(tol.bounds),
            });
            let bounds_hold = bounds
                .as_object()
                .is_some_and(|b| b.values().all(|v| v == &json!(true)));
            let soul = if m.key() == "paraboloid" && trace.status == TraceStatus::Converged {
                Some(soul_region_check(&trace)?)
            } else {
                None
            };
            let csv = csv_bytes(|b| trace.write_csv(b))?;
            let mut body =
                Body::new(json!({ "trace": trace, "bounds": bounds, "soul_region": soul })).file("trace.csv", csv);
            body.failed = !bounds_hold || trace.status == TraceStatus::Partial || soul.is_some_and(|s| !s.holds);
            body.inconclusive = trace.status == TraceStatus::NotStabilized;
            Ok(body)
        })();
        Ok(finish("minimize", &ctx, &desc, run))
    }
}

#[derive(Debug, Args)]
pub struct LoopsArgs {
    #[arg(long, default_value = "paraboloid")]
    manifold: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "3,0")]
    point: Vec<f64>,
    #[arg(long, default_value_t = 360)]
    directions: usize,
    #[arg(long, default_value_t = 50.0)]
    max_length: f64,
    #[arg(long, default_value_t = 1e-3)]
    closure_tol: f64,
    #[arg(long, default_value_t = 5e-3)]
    step: f64,
}

#[derive(Serialize)]
struct LoopsRun {
    manifold: String,
    point: Vec<f64>,
    #[serde(flatten)]
    search: LoopSearchConfig,
}

impl LoopsArgs {
    fn run(&self, ctx: &Context) -> anyhow::Result<Outcome> {
        let m = manifold(&self.manifold)?;
        if m.dim() != 2 {
            bail!("loop search needs a surface, `{}` has dimension {}", m.key(), m.dim());
        }
        let p = coords(&m, &self.point, "point")?;
        if self.directions == 0 || !(self.max_length > 0.0 && self.closure_tol > 0.0 && self.step > 0.0) {
            bail!("--directions, --max-length, --closure-tol and --step must be positive");
        }
        let cfg = LoopSearchConfig {
            n_directions: self.directions,
            max_length: self.max_length,
            closure_tol: self.closure_tol,
            step: self.step,
            exec: Execution::Parallel,
        };
        let config = LoopsRun {
            manifold: m.key().to_string(),
            point: m.to_vec(&p),
            search: cfg.clone(),
        };
        let run = (|| {
            let result = loop_search(&m, &p, &cfg)?;
            let mut body = Body::new(serde_json::to_value(&result)?);
            body.inconclusive = result.verdict == LoopVerdict::Inconclusive;
            Ok(body)
        })();
        Ok(finish("loops", ctx, config, run))
    }
}

/// Largest accepted `|μ − arctan μ − π/2|`.
const MU1_RESIDUAL_LIMIT: f64 = 1e-10;

#[derive(Debug, Args)]
pub struct BetaArgs {
    /// Bisection stop on the residual.
    #[arg(long, default_value_t = MU1_TOL)]
    tol: f64,
}

impl BetaArgs {
    fn run(&self, ctx: &Context) -> anyhow::Result<Outcome> {
        if !(self.tol > 0.0) {
            bail!("--tol must be positive");
        }
        let mu1 = solve_mu1(self.tol);
        let residual = mu1_equation(mu1).abs();
        let mut body = Body::new(json!({ "mu1": mu1, "beta": beta_from(mu1), "residual": residual }));
        body.failed = !(residual < MU1_RESIDUAL_LIMIT);
        Ok(finish("beta", ctx, json!({ "tol": self.tol }), Ok(body)))
    }
}
