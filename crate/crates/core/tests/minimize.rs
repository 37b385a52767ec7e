use conformal_geo::convexity::{certify, CertifyConfig, Verdict};
use conformal_geo::functions;
use conformal_geo::minimize::{
    loop_search, regularized_minimize, soul_region_check, LoopSearchConfig, LoopVerdict, MinimizeError,
    RegularizedOptions, TraceStatus,
};
use conformal_geo::{builtin, Coords, Execution};

#[test]
fn no_loops_below_the_critical_height() {
    let m = builtin::paraboloid();
    let r = loop_search(&m, &Coords::new(1.5, 0.0, 0.0), &LoopSearchConfig::default()).unwrap();
    assert_eq!(r.verdict, LoopVerdict::Simple);
}

#[test]
fn loops_come_in_mirror_pairs() {
    let m = builtin::paraboloid();
    let r = loop_search(&m, &Coords::new(3.0, 0.0, 0.0), &LoopSearchConfig::default()).unwrap();
    assert_eq!(r.verdict, LoopVerdict::NonSimple);
    for l in &r.loops {
        let mirrored = r
            .loops
            .iter()
            .any(|o| (o.direction[1] + l.direction[1]).abs() < 1e-3 && (o.direction[0] - l.direction[0]).abs() < 1e-3);
        assert!(mirrored, "{l:?}");
    }
}

#[test]
fn loop_scan_is_deterministic_across_execution_modes() {
    let m = builtin::paraboloid();
    let p = Coords::new(3.0, 0.0, 0.0);
    let cfg = LoopSearchConfig {
        n_directions: 90,
        ..LoopSearchConfig::default()
    };
    let a = loop_search(
        &m,
        &p,
        &LoopSearchConfig {
            exec: Execution::Sequential,
            ..cfg.clone()
        },
    )
    .unwrap();
    let b = loop_search(
        &m,
        &p,
        &LoopSearchConfig {
            exec: Execution::Parallel,
            ..cfg
        },
    )
    .unwrap();
    assert_eq!(a.loops, b.loops);
    assert_eq!(a.best_closure, b.best_closure);
}

#[test]
fn radial_arclength_square_is_strictly_convex() {
    let m = builtin::paraboloid();
    let cfg = CertifyConfig {
        domain: Some(vec![(-1.0, 1.0), (-1.0, 1.0)]),
        ..CertifyConfig::default()
    };
    let r = certify(&functions::radial_arclength_sq(), &m, &cfg).unwrap();
    assert_eq!(r.verdict, Verdict::StrictlyConvex);
}

#[test]
fn minimization_refuses_a_non_convex_regularizer() {
    let m = builtin::flat_torus();
    let err = regularized_minimize(
        &m,
        &functions::zero("torus"),
        &functions::sine_2pi_x(),
        &Coords::new(0.1, 0.1, 0.0),
        &RegularizedOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, MinimizeError::CertificationFailed { .. }));
}

#[test]
fn trace_csv_and_soul_region() {
    let m = builtin::paraboloid();
    let trace = regularized_minimize(
        &m,
        &functions::height(),
        &functions::height(),
        &Coords::new(1.0, 0.5, 0.0),
        &RegularizedOptions::default(),
    )
    .unwrap();
    assert_eq!(trace.status, TraceStatus::Converged);
    let soul = soul_region_check(&trace).unwrap();
    assert!(soul.holds, "{soul:?} {:?}", trace.records);
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("k,x_1,x_2,u,g,h_k,iterations\n"));
    assert_eq!(text.lines().count(), trace.records.len() + 1);
}
