//! Geodesic flow on the unit tangent bundle: `φ_t(p, v) = (γ(t), γ'(t))`,
//! the flip `(p, v) ↦ (p, −v)`, and desk-scale recurrence statistics.
//!
//! Phase-space distance is the Euclidean chart distance on `(point, vector)`
//! pairs, with periodic wrapping on the point part. This is not the Sasaki
//! distance; it is only used for small neighbourhoods.

use std::io::Write;

use serde::Serialize;

use crate::error::{GeometryError, Result};
use crate::exec::{map_indexed, Execution};
use crate::geodesic::{GeodesicSteps, PhasePoint, DEFAULT_STEP};
use crate::manifold::ChartManifold;
use crate::sampling::{random_direction, random_point, sample_rng};

/// Recurrent fraction at or above which a run is reported as consistent with a
/// conservative flow.
pub const CONSERVATIVE_FRACTION: f64 = 0.95;
/// Recurrent fraction at or below which a run is reported as consistent with a
/// dissipative flow.
pub const DISSIPATIVE_FRACTION: f64 = 0.05;

pub const DISTANCE_NOTE: &str = "euclidean chart distance on (point, vector), periodic wrap";

/// Unit-speed representative of `theta`.
pub fn unit(m: &ChartManifold, theta: &PhasePoint) -> Result<PhasePoint> {
    Ok(PhasePoint::new(theta.point, m.normalize(&theta.point, &theta.vector)?))
}

/// `φ_t(θ)` for the unit vector in the direction of `θ`; negative `t` flows backward.
pub fn flow(m: &ChartManifold, theta: &PhasePoint, t: f64, step: f64) -> Result<PhasePoint> {
    let start = unit(m, theta)?;
    let steps = GeodesicSteps::new(m, start, t, step)?;
    let mut last = *steps.state();
    for item in steps {
        last = item?.1;
    }
    Ok(last)
}

pub fn flip(theta: &PhasePoint) -> PhasePoint {
    theta.flip()
}

pub fn phase_distance(m: &ChartManifold, a: &PhasePoint, b: &PhasePoint) -> f64 {
    let dp = m.chart_delta(&a.point, &b.point);
    let dv = b.vector - a.vector;
    (dp.norm_squared() + dv.norm_squared()).sqrt()
}

/// Uniform base point in the sampling box times a uniform chart direction,
/// normalized to unit speed.
pub fn random_unit_phase_point(m: &ChartManifold, seed: u64, index: u64) -> Result<PhasePoint> {
    let mut rng = sample_rng(seed, index);
    let p = random_point(m.sample_box(), &mut rng);
    let d = random_direction(m.dim(), &mut rng);
    Ok(PhasePoint::new(p, m.normalize(&p, &d)?))
}

#[derive(Clone, Debug, Serialize)]
pub struct RecurrenceConfig {
    pub n_samples: usize,
    pub epsilon: f64,
    pub horizon: f64,
    /// Spacing of the return-check grid.
    pub dt: f64,
    pub step: f64,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for RecurrenceConfig {
    fn default() -> Self {
        Self {
            n_samples: 200,
            epsilon: 0.05,
            horizon: 200.0,
            dt: 0.01,
            step: DEFAULT_STEP,
            seed: 0,
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecurrenceSample {
    pub point: Vec<f64>,
    pub vector: Vec<f64>,
    pub first_return: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecurrenceStats {
    pub manifold: String,
    pub epsilon: f64,
    pub horizon: f64,
    pub dt: f64,
    pub t_min: f64,
    pub seed: u64,
    pub recurrent_fraction: f64,
    pub verdict: &'static str,
    pub distance: &'static str,
    pub samples: Vec<RecurrenceSample>,
}

impl RecurrenceStats {
    pub fn returns(&self) -> usize {
        self.samples.iter().filter(|s| s.first_return.is_some()).count()
    }

    pub fn consistent_with_conservative(&self) -> bool {
        self.recurrent_fraction >= CONSERVATIVE_FRACTION
    }

    /// Writes `x_1..x_n, v_1..v_n, first_return` (empty when none).
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.samples.first().map_or(0, |s| s.point.len());
        let mut header: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
        header.extend((1..=n).map(|i| format!("v_{i}")));
        header.push("first_return".into());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row: Vec<String> = s.point.iter().chain(&s.vector).map(f64::to_string).collect();
            row.push(s.first_return.map(|t| t.to_string()).unwrap_or_default());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn verdict_phrase(fraction: f64) -> &'static str {
    if fraction >= CONSERVATIVE_FRACTION {
        "consistent with conservative"
    } else if fraction <= DISSIPATIVE_FRACTION {
        "consistent with dissipative"
    } else {
        "undetermined"
    }
}

/// First `t ∈ [t_min, horizon]` on the check grid with `d(φ_t(θ), θ) < ε`,
/// where `t_min = 10ε`.
pub fn first_return(m: &ChartManifold, theta: &PhasePoint, cfg: &RecurrenceConfig) -> Result<Option<f64>> {
    let t_min = 10.0 * cfg.epsilon;
    let sub = (cfg.dt / cfg.step).round().max(1.0) as usize;
    let checks = (cfg.horizon / cfg.dt).floor() as usize;
    let steps = GeodesicSteps::fixed(m, *theta, cfg.dt / sub as f64, sub * checks)?;
    for (i, item) in steps.enumerate() {
        let state = match item {
            Ok((_, s)) => s,
            Err(GeometryError::ChartExit { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        if (i + 1) % sub != 0 {
            continue;
        }
        let t = ((i + 1) / sub) as f64 * cfg.dt;
        if t >= t_min && phase_distance(m, &state, theta) < cfg.epsilon {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

pub fn recurrence_experiment(m: &ChartManifold, cfg: &RecurrenceConfig) -> Result<RecurrenceStats> {
    if !(cfg.epsilon > 0.0 && cfg.horizon > 0.0 && cfg.dt > 0.0 && cfg.step > 0.0) || cfg.n_samples == 0 {
        return Err(GeometryError::InvalidArgument(
            "recurrence needs positive epsilon, horizon, dt, step and at least one sample".into(),
        ));
    }
    let results = map_indexed(cfg.exec, cfg.n_samples, |i| -> Result<RecurrenceSample> {
        let theta = random_unit_phase_point(m, cfg.seed, i as u64)?;
        Ok(RecurrenceSample {
            point: m.to_vec(&theta.point),
            vector: m.to_vec(&theta.vector),
            first_return: first_return(m, &theta, cfg)?,
        })
    });
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;
    let returned = samples.iter().filter(|s| s.first_return.is_some()).count();
    let fraction = returned as f64 / samples.len() as f64;
    Ok(RecurrenceStats {
        manifold: m.key().to_string(),
        epsilon: cfg.epsilon,
        horizon: cfg.horizon,
        dt: cfg.dt,
        t_min: 10.0 * cfg.epsilon,
        seed: cfg.seed,
        recurrent_fraction: fraction,
        verdict: verdict_phrase(fraction),
        distance: DISTANCE_NOTE,
        samples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConjugacyResidual {
    pub max_residual: f64,
    /// Set when either flow left the chart; the residual covers `[0, t]` only.
    pub truncated_at: Option<f64>,
}

/// `sup_t d(flip(φ_t(flip θ)), φ_{−t}(θ))` over a grid of spacing `dt` in `[0, t_max]`.
pub fn flip_conjugacy_check(
    m: &ChartManifold,
    theta: &PhasePoint,
    t_max: f64,
    dt: f64,
    step: f64,
) -> Result<ConjugacyResidual> {
    let theta = unit(m, theta)?;
    let sub = (dt / step).round().max(1.0) as usize;
    let h = dt / sub as f64;
    let count = sub * (t_max / dt).round() as usize;
    let forward = GeodesicSteps::fixed(m, flip(&theta), h, count)?;
    let backward = GeodesicSteps::fixed(m, theta, -h, count)?;
    let mut worst = 0.0f64;
    for (i, (a, b)) in forward.zip(backward).enumerate() {
        match (a, b) {
            (Ok((_, a)), Ok((_, b))) => {
                if (i + 1) % sub == 0 {
                    worst = worst.max(phase_distance(m, &flip(&a), &b));
                }
            }
            (Err(GeometryError::ChartExit { time }), _) | (_, Err(GeometryError::ChartExit { time })) => {
                return Ok(ConjugacyResidual {
                    max_residual: worst,
                    truncated_at: Some(time.abs()),
                });
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok(ConjugacyResidual {
        max_residual: worst,
        truncated_at: None,
    })
}
