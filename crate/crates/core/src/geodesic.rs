//! Fixed-step fourth-order Runge–Kutta integration of the geodesic equation
//! `x'' + Γ(x)(x', x') = 0`, plus parallel transport along the result.

use std::io::Write;

use crate::error::{GeometryError, Result};
use crate::manifold::{ChartManifold, Coords};

/// Default integrator step.
pub const DEFAULT_STEP: f64 = 1e-3;

/// A point together with a tangent vector at it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub point: Coords,
    pub vector: Coords,
}

impl PhasePoint {
    pub fn new(point: Coords, vector: Coords) -> Self {
        Self { point, vector }
    }

    /// `(p, v) ↦ (p, −v)`.
    pub fn flip(&self) -> Self {
        Self {
            point: self.point,
            vector: -self.vector,
        }
    }
}

/// A sampled geodesic.
#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    /// Signed step actually used (`duration / steps`).
    pub step: f64,
}

impl GeodesicPath {
    pub fn endpoint(&self) -> &PhasePoint {
        self.states.last().expect("geodesic path is never empty")
    }

    pub fn speeds(&self, m: &ChartManifold) -> Vec<f64> {
        self.states.iter().map(|s| m.norm(&s.point, &s.vector)).collect()
    }

    /// `max_t | |γ'(t)| − |γ'(0)| |`.
    pub fn speed_drift(&self, m: &ChartManifold) -> f64 {
        max_drift(self.speeds(m))
    }

    /// Drift of the Clairaut invariant, for charts of the paraboloid of revolution.
    pub fn clairaut_drift(&self, m: &ChartManifold) -> Option<f64> {
        let values: Option<Vec<f64>> = self.states.iter().map(|s| clairaut_invariant(m, s)).collect();
        values.map(max_drift)
    }

    /// Writes `t, x_1..x_n, v_1..v_n, speed`.
    pub fn write_csv<W: Write>(&self, m: &ChartManifold, out: W) -> csv::Result<()> {
        let n = m.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=n).map(|i| format!("v_{i}")));
        header.push("speed".into());
        w.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = Vec::with_capacity(2 * n + 2);
            row.push(t.to_string());
            row.extend(s.point.iter().take(n).map(f64::to_string));
            row.extend(s.vector.iter().take(n).map(f64::to_string));
            row.push(m.norm(&s.point, &s.vector).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn max_drift(values: Vec<f64>) -> f64 {
    let first = values.first().copied().unwrap_or(0.0);
    values.iter().map(|v| (v - first).abs()).fold(0.0, f64::max)
}

/// `r²θ'` for geodesics on the paraboloid: `x y' − y x'` in the Monge chart,
/// `r² θ'` in the polar chart.
pub fn clairaut_invariant(m: &ChartManifold, s: &PhasePoint) -> Option<f64> {
    match m.key() {
        "paraboloid" => Some(s.point[0] * s.vector[1] - s.point[1] * s.vector[0]),
        "paraboloid-polar" => Some(s.point[0] * s.point[0] * s.vector[1]),
        _ => None,
    }
}

#[inline]
fn accel(m: &ChartManifold, x: &Coords, v: &Coords) -> Result<Coords> {
    Ok(-m.christoffel(x)?.contract(v, v))
}

/// One RK4 step of the geodesic equation, optionally carrying a vector `w`
/// solving `w' = −Γ(x)(x', w)`.
fn rk4_step(
    m: &ChartManifold,
    x: &Coords,
    v: &Coords,
    w: Option<&Coords>,
    h: f64,
) -> Result<(Coords, Coords, Option<Coords>)> {
    let transport = |x: &Coords, v: &Coords, w: &Coords| -> Result<Coords> { Ok(-m.christoffel(x)?.contract(v, w)) };

    let k1x = *v;
    let k1v = accel(m, x, v)?;
    let x2 = x + 0.5 * h * k1x;
    let v2 = v + 0.5 * h * k1v;
    let k2x = v2;
    let k2v = accel(m, &x2, &v2)?;
    let x3 = x + 0.5 * h * k2x;
    let v3 = v + 0.5 * h * k2v;
    let k3x = v3;
    let k3v = accel(m, &x3, &v3)?;
    let x4 = x + h * k3x;
    let v4 = v + h * k3v;
    let k4x = v4;
    let k4v = accel(m, &x4, &v4)?;

    let xn = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    let vn = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);

    let wn = match w {
        None => None,
        Some(w) => {
            let k1 = transport(x, v, w)?;
            let w2 = w + 0.5 * h * k1;
            let k2 = transport(&x2, &v2, &w2)?;
            let w3 = w + 0.5 * h * k2;
            let k3 = transport(&x3, &v3, &w3)?;
            let w4 = w + h * k3;
            let k4 = transport(&x4, &v4, &w4)?;
            Some(w + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        }
    };
    Ok((xn, vn, wn))
}

/// Iterator over the states of a geodesic, one item per step.
///
/// Leaving the chart yields a single `Err(ChartExit)` and ends the iteration.
pub struct GeodesicSteps<'a> {
    manifold: &'a ChartManifold,
    state: PhasePoint,
    transported: Option<Coords>,
    step: f64,
    taken: usize,
    total: usize,
    failed: bool,
}

impl<'a> GeodesicSteps<'a> {
    /// Steps from `start` over the signed parameter length `duration`, using
    /// `ceil(|duration| / max_step)` equal steps.
    pub fn new(manifold: &'a ChartManifold, start: PhasePoint, duration: f64, max_step: f64) -> Result<Self> {
        if !(max_step.is_finite() && max_step > 0.0) || !duration.is_finite() {
            return Err(GeometryError::InvalidArgument(format!(
                "step {max_step} and duration {duration} must be finite with positive step"
            )));
        }
        if duration != 0.0 && max_step < duration.abs() * 1e-12 {
            return Err(GeometryError::StepUnderflow { step: max_step });
        }
        manifold.check_domain(&start.point)?;
        let total = (duration.abs() / max_step).ceil() as usize;
        let step = if total == 0 { 0.0 } else { duration / total as f64 };
        Ok(Self {
            manifold,
            state: PhasePoint::new(manifold.wrap(&start.point), start.vector),
            transported: None,
            step,
            taken: 0,
            total,
            failed: false,
        })
    }

    /// Exactly `count` steps of signed size `step`.
    pub fn fixed(manifold: &'a ChartManifold, start: PhasePoint, step: f64, count: usize) -> Result<Self> {
        if !step.is_finite() || step == 0.0 {
            return Err(GeometryError::StepUnderflow { step });
        }
        manifold.check_domain(&start.point)?;
        Ok(Self {
            manifold,
            state: PhasePoint::new(manifold.wrap(&start.point), start.vector),
            transported: None,
            step,
            taken: 0,
            total: count,
            failed: false,
        })
    }

    /// Also carries `w` by parallel transport.
    pub fn with_transport(mut self, w: Coords) -> Self {
        self.transported = Some(w);
        self
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.taken as f64 * self.step
    }

    pub fn state(&self) -> &PhasePoint {
        &self.state
    }

    pub fn transported(&self) -> Option<&Coords> {
        self.transported.as_ref()
    }
}

impl Iterator for GeodesicSteps<'_> {
    type Item = Result<(f64, PhasePoint)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.taken >= self.total {
            return None;
        }
        let m = self.manifold;
        let exit = |t: f64| GeometryError::ChartExit { time: t };
        let next = rk4_step(
            m,
            &self.state.point,
            &self.state.vector,
            self.transported.as_ref(),
            self.step,
        );
        let t_next = (self.taken + 1) as f64 * self.step;
        match next {
            Ok((x, v, w)) if m.in_domain(&x) && v.iter().all(|c| c.is_finite()) => {
                self.state = PhasePoint::new(m.wrap(&x), v);
                self.transported = w;
                self.taken += 1;
                Some(Ok((t_next, self.state)))
            }
            Ok(_) | Err(GeometryError::OutsideDomain { .. }) => {
                self.failed = true;
                Some(Err(exit(t_next)))
            }
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Integrates the geodesic with initial condition `start` over `[0, duration]`.
pub fn geodesic_integrate(m: &ChartManifold, start: PhasePoint, duration: f64, step: f64) -> Result<GeodesicPath> {
    if !(duration > 0.0) {
        return Err(GeometryError::InvalidArgument(format!(
            "duration must be positive, got {duration}"
        )));
    }
    integrate_signed(m, start, duration, step)
}

/// Like [`geodesic_integrate`] but accepts negative durations (backward flow).
pub fn integrate_signed(m: &ChartManifold, start: PhasePoint, duration: f64, step: f64) -> Result<GeodesicPath> {
    let steps = GeodesicSteps::new(m, start, duration, step)?;
    let used = steps.step();
    let mut times = vec![0.0];
    let mut states = vec![*steps.state()];
    for item in steps {
        let (t, s) = item?;
        times.push(t);
        states.push(s);
    }
    Ok(GeodesicPath {
        times,
        states,
        step: used,
    })
}

/// Endpoint of the geodesic through `p` with velocity `v` at parameter 1.
pub fn exp_map(m: &ChartManifold, p: &Coords, v: &Coords, step: f64) -> Result<Coords> {
    let steps = GeodesicSteps::new(m, PhasePoint::new(*p, *v), 1.0, step)?;
    let mut last = *steps.state();
    for item in steps {
        last = item?.1;
    }
    Ok(last.point)
}

/// Parallel transport of `w0` from the start of `path` to its end.
pub fn parallel_transport(m: &ChartManifold, path: &GeodesicPath, w0: &Coords) -> Result<Coords> {
    Ok(*transport_field(m, path, w0)?
        .last()
        .expect("transport field is never empty"))
}

/// Parallel-transported vector at every state of `path`.
pub fn transport_field(m: &ChartManifold, path: &GeodesicPath, w0: &Coords) -> Result<Vec<Coords>> {
    let start = path.states[0];
    let duration = path.step * (path.states.len() - 1) as f64;
    let mut out = vec![*w0];
    if path.states.len() == 1 {
        return Ok(out);
    }
    let mut steps = GeodesicSteps::new(m, start, duration, path.step.abs())?.with_transport(*w0);
    while let Some(item) = steps.next() {
        item?;
        out.push(*steps.transported().expect("transport was requested"));
    }
    Ok(out)
}
