//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use conformal_geo::convexity::{certify, sample_geodesics, second_difference_profile, CertifyConfig, Verdict};
use conformal_geo::flow::{flip_conjugacy_check, random_unit_phase_point, recurrence_experiment, RecurrenceConfig};
use conformal_geo::geodesic::{geodesic_integrate, DEFAULT_STEP};
use conformal_geo::minimize::{
    beta, beta_from, loop_search, mu1_equation, regularized_minimize, solve_mu1, soul_region_check, LoopSearchConfig,
    LoopVerdict, RegularizedOptions, TraceStatus, MU1_TOL,
};
use conformal_geo::warped::{kinetic_energy_witness, m3_vertical_curvature, WarpedProduct};
use conformal_geo::{builtin, connection, convexity, functions, Coords, PhasePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn vertical_curvature_formula() -> Outcome {
    let w = WarpedProduct::m3();
    let oracle = w.manifold().fd_only();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = Coords::new(r.gen_range(-1.0..1.0), r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5));
        let u = Coords::new(0.0, r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let v = Coords::new(0.0, r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let a = w.vertical_curvature(&p, &u, &v).map_err(|e| e.to_string())?;
        let b = connection::sectional_curvature(&oracle, &p, &u, &v).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs() / a.abs());
    }
    ensure(
        worst <= 1e-4,
        format!("max relative error {worst:.2e} over 100 vertical planes"),
    )
}

fn curvature_range() -> Outcome {
    let w = WarpedProduct::m3();
    let ts: Vec<f64> = (0..=120).map(|i| -3.0 + 0.05 * i as f64).collect();
    let rs: Vec<f64> = (0..=120).map(|i| 0.025 * i as f64).collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &t in &ts {
        for &r in &rs {
            let p = Coords::new(t, r, 0.0);
            let k = w
                .vertical_curvature(&p, &Coords::y(), &Coords::z())
                .map_err(|e| e.to_string())?;
            if (k - m3_vertical_curvature(t, r, 0.0)).abs() > 1e-12 * k.abs().max(1.0) {
                return Err(format!("closed forms disagree at t={t}, r={r}"));
            }
            lo = lo.min(k);
            hi = hi.max(k);
        }
    }
    let axis: Vec<f64> = ts.iter().map(|&t| m3_vertical_curvature(t, 0.0, 0.0)).collect();
    let decreasing = axis.windows(2).all(|p| p[1] < p[0]);
    let tail = axis.last().copied().unwrap_or(f64::NAN) + 1.0;
    ensure(
        lo > -1.0 && hi > 100.0 && decreasing && tail < 1e-2,
        format!("min {lo:.6} max {hi:.1}; axis decreasing {decreasing}, K(3,0)+1 = {tail:.2e}"),
    )
}

fn energy_hessian() -> Outcome {
    let w = WarpedProduct::m3();
    let m = w.manifold();
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = Coords::new(r.gen_range(-1.0..1.0), r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5));
        let d = Coords::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let d = m.normalize(&p, &d).map_err(|e| e.to_string())?;
        let res = w.hessian_identity_check(&p, &d).map_err(|e| e.to_string())?;
        worst = worst.max(res / w.energy_hessian(&p, &d, &d).max(1.0));
    }

    // margin along sampled unit-speed geodesics: f'' ≥ 0.999 φ²
    let domain = [(-1.0, 1.0), (-1.5, 1.5), (-1.5, 1.5)];
    let f = w.energy();
    let starts = sample_geodesics(&m, Some(&domain), 50, 3).map_err(|e| e.to_string())?;
    let mut worst_ratio = f64::INFINITY;
    for s in starts {
        let prof = second_difference_profile(&f, &m, s, 0.5, DEFAULT_STEP).map_err(|e| e.to_string())?;
        for (_, p, d2) in prof.samples {
            let phi = w.conformal_factor(&p);
            worst_ratio = worst_ratio.min(d2 / (phi * phi));
        }
    }
    let report = certify(
        &f,
        &m,
        &CertifyConfig {
            domain: Some(domain.to_vec()),
            seed: 3,
            ..CertifyConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(
        worst <= 1e-4 && worst_ratio >= 0.999 && report.verdict == Verdict::StrictlyConvex,
        format!(
            "identity residual {worst:.2e}; min (f∘γ)''/φ² = {worst_ratio:.6}; verdict {}",
            report.verdict
        ),
    )
}

fn energy_gradient() -> Outcome {
    let w = WarpedProduct::m3();
    let m = w.manifold();
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = Coords::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
        let fd = convexity::gradient_fd(&m, &p, |x| w.energy_value(x)).map_err(|e| e.to_string())?;
        let exact = w.energy_gradient(&p);
        worst = worst.max((fd - exact).norm() / exact.norm());
    }
    ensure(
        worst <= 1e-5,
        format!("max relative gradient error {worst:.2e} over 100 points"),
    )
}

fn integrator_invariants() -> Outcome {
    let m = builtin::paraboloid();
    let mut speed = 0.0f64;
    let mut clairaut = 0.0f64;
    for i in 0..10 {
        let theta = random_unit_phase_point(&m, 5, i).map_err(|e| e.to_string())?;
        let path = geodesic_integrate(&m, theta, 10.0, DEFAULT_STEP).map_err(|e| e.to_string())?;
        speed = speed.max(path.speed_drift(&m));
        clairaut = clairaut.max(path.clairaut_drift(&m).ok_or("no Clairaut invariant")?);
    }
    ensure(
        speed <= 1e-8 && clairaut <= 1e-6,
        format!("speed drift {speed:.2e}, Clairaut drift {clairaut:.2e} (10 geodesics, T=10)"),
    )
}

fn recurrence() -> Outcome {
    let cfg = RecurrenceConfig {
        n_samples: 200,
        epsilon: 0.05,
        horizon: 200.0,
        ..RecurrenceConfig::default()
    };
    let torus = recurrence_experiment(&builtin::flat_torus(), &cfg).map_err(|e| e.to_string())?;
    let plane = recurrence_experiment(&builtin::plane(), &cfg).map_err(|e| e.to_string())?;
    ensure(
        torus.recurrent_fraction >= 0.95 && plane.recurrent_fraction == 0.0,
        format!(
            "torus fraction {:.3}, plane fraction {:.3}",
            torus.recurrent_fraction, plane.recurrent_fraction
        ),
    )
}

fn flip_conjugacy() -> Outcome {
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for key in builtin::MANIFEST {
        let m = builtin::by_key(key).map_err(|e| e.to_string())?;
        let mut local = 0.0f64;
        for i in 0..50 {
            let theta = random_unit_phase_point(&m, 7, i).map_err(|e| e.to_string())?;
            let res = flip_conjugacy_check(&m, &theta, 5.0, 0.01, DEFAULT_STEP).map_err(|e| e.to_string())?;
            local = local.max(res.max_residual);
        }
        worst = worst.max(local);
        lines.push(format!("{key} {local:.1e}"));
    }
    ensure(
        worst <= 1e-6,
        format!("max residual {worst:.2e} [{}]", lines.join(", ")),
    )
}

/// `μ sin μ + cos μ = 0` on `[2, 3]` is the same root written without arctan.
fn oracle_mu1() -> f64 {
    let f = |m: f64| m * m.sin() + m.cos();
    let (mut lo, mut hi) = (2.0f64, 3.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn mu1_and_beta() -> Outcome {
    let fixture: serde_json::Value =
        serde_json::from_str(include_str!("fixtures/mu1_beta.json")).map_err(|e| e.to_string())?;
    let pinned = |k: &str| -> Result<f64, String> {
        fixture[k]
            .as_str()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("fixture lacks {k}"))
    };
    let (mu_fix, beta_fix) = (pinned("mu1")?, pinned("beta")?);
    let mu = solve_mu1(MU1_TOL);
    let residual = mu1_equation(mu).abs();
    let b = beta();
    let oracle = oracle_mu1();
    ensure(
        residual < 1e-10
            && (mu - mu_fix).abs() < 1e-12
            && (mu - oracle).abs() < 1e-12
            && (b - beta_fix).abs() < 1e-12
            && (b - beta_from(oracle)).abs() < 1e-12,
        format!("mu1 {mu:.15} (residual {residual:.1e}), beta {b:.15}"),
    )
}

fn loops() -> Outcome {
    let m = builtin::paraboloid();
    let cfg = LoopSearchConfig::default();
    let high = loop_search(&m, &Coords::new(3.0, 0.0, 0.0), &cfg).map_err(|e| e.to_string())?;
    let vertex = loop_search(&m, &Coords::zeros(), &cfg).map_err(|e| e.to_string())?;
    let best = high.loops.iter().map(|l| l.closure_error).fold(f64::INFINITY, f64::min);
    ensure(
        high.verdict == LoopVerdict::NonSimple
            && best < cfg.closure_tol
            && vertex.verdict == LoopVerdict::Simple
            && vertex.loops.is_empty(),
        format!(
            "height 9: {} loops, best closure {best:.1e}; vertex: {} loops over {} directions",
            high.loops.len(),
            vertex.loops.len(),
            vertex.scanned
        ),
    )
}

fn regularized_pairs() -> Outcome {
    let m = builtin::paraboloid();
    let pairs = [
        (functions::zero("paraboloid"), functions::height(), [0.3, -0.2]),
        (functions::height(), functions::height(), [0.8, 0.4]),
        (functions::excess_height(1.0), functions::height(), [0.5, 0.5]),
        (
            functions::excess_height(1.0),
            functions::radial_arclength_sq(),
            [0.2, 0.6],
        ),
    ];
    let opts = RegularizedOptions::default();
    let mut notes = Vec::new();
    let mut ok = true;
    for (u, g, p0) in &pairs {
        let p0 = m.point(p0).map_err(|e| e.to_string())?;
        let trace = regularized_minimize(&m, u, g, &p0, &opts).map_err(|e| e.to_string())?;
        let soul = soul_region_check(&trace).map_err(|e| e.to_string())?;
        let good = trace.status == TraceStatus::Converged
            && trace.regularization_bound_holds(1e-8)
            && trace.decay_bound_holds(1e-8)
            && trace.localization_holds(1e-8)
            && soul.holds;
        ok &= good;
        notes.push(format!(
            "({}, {}) {} limit height {:.1e}",
            u.name(),
            g.name(),
            if good { "ok" } else { "FAILED" },
            soul.limit_height
        ));
    }
    ensure(ok, notes.join("; "))
}

fn kinetic_energy() -> Outcome {
    let m = builtin::paraboloid();
    let mut r = rng(11);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let p = Coords::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), 0.0);
        let v = Coords::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), 0.0);
        let drift = kinetic_energy_witness(&m, PhasePoint::new(p, v), 10.0, DEFAULT_STEP).map_err(|e| e.to_string())?;
        worst = worst.max(drift);
    }
    ensure(
        worst <= 1e-8,
        format!("max drift of ⟨γ', γ'⟩ {worst:.2e} (10 geodesics, T=10)"),
    )
}

fn torus_sine() -> Outcome {
    let m = builtin::flat_torus();
    let report = certify(&functions::sine_2pi_x(), &m, &CertifyConfig::default()).map_err(|e| e.to_string())?;
    let d2 = report.witness.as_ref().map(|w| w.second_difference).unwrap_or(f64::NAN);
    ensure(
        report.verdict == Verdict::NonConvex && d2 < -1.0,
        format!("verdict {}, witness second difference {d2:.3}", report.verdict),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        (
            "vertical curvature formula vs finite differences",
            vertical_curvature_formula,
        ),
        ("curvature range on M3", curvature_range),
        ("energy Hessian identity and margin", energy_hessian),
        ("energy gradient is phi V", energy_gradient),
        ("geodesic integrator invariants", integrator_invariants),
        ("recurrence on torus and plane", recurrence),
        ("flip conjugacy", flip_conjugacy),
        ("mu1 and beta", mu1_and_beta),
        ("geodesic loops on the paraboloid", loops),
        ("regularized minimization", regularized_pairs),
        ("kinetic energy along geodesic lifts", kinetic_energy),
        ("sin(2 pi x) on the torus is not convex", torus_sine),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
