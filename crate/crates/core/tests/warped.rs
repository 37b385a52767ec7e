use conformal_geo::connection::sectional_curvature;
use conformal_geo::convexity::gradient_fd;
use conformal_geo::warped::{m3_vertical_curvature, write_curvature_csv, WarpFunction, WarpedProduct};
use conformal_geo::{builtin, Coords, GeometryError};
use proptest::prelude::*;

#[test]
fn closed_conformal_identity() {
    let w = WarpedProduct::m3();
    for &(t, x, y) in &[(0.0, 0.0, 0.0), (1.2, -0.4, 0.9), (-2.0, 1.5, 1.5)] {
        let r = w.closed_conformal_residual(&Coords::new(t, x, y));
        assert!(r.norm() <= 1e-12);
    }
}

#[test]
fn radial_planes_have_curvature_minus_one() {
    // non-vertical planes spanned by ∂t and a fiber direction: −g''/g = −1 for g = eᵗ
    let w = WarpedProduct::m3();
    let m = w.manifold().fd_only();
    for p in [Coords::new(0.2, 0.3, -0.1), Coords::new(-0.8, 1.0, 0.5)] {
        for u in [Coords::y(), Coords::z(), Coords::new(0.0, 1.0, 1.0)] {
            let k = sectional_curvature(&m, &p, &Coords::x(), &u).unwrap();
            assert!((k + 1.0).abs() < 1e-5, "{k}");
        }
    }
}

#[test]
fn vertical_formula_refuses_tilted_planes() {
    let w = WarpedProduct::m3();
    let p = Coords::new(0.1, 0.2, 0.3);
    let tilted = Coords::new(0.5, 1.0, 0.0);
    assert!(matches!(
        w.vertical_curvature(&p, &tilted, &Coords::z()),
        Err(GeometryError::NotVertical { .. })
    ));
}

#[test]
fn curvature_grid_matches_fd() {
    let w = WarpedProduct::m3();
    let rows = w
        .curvature_grid(&[-1.0, 0.0, 1.0], &[0.0, 0.5, 1.0], &[0.0, 0.7])
        .unwrap();
    for r in &rows {
        assert!(r.abs_err <= 1e-4 * r.k_analytic.abs().max(1.0), "{r:?}");
        assert!((r.k_analytic - m3_vertical_curvature(r.t, r.x, r.y)).abs() < 1e-12);
    }
    let mut buf = Vec::new();
    write_curvature_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,x,y,K_analytic,K_fd,abs_err\n"));
    assert_eq!(text.lines().count(), rows.len() + 1);
}

#[test]
fn other_warps_and_fibers_assemble() {
    let cosh = WarpedProduct::assemble(None, WarpFunction::Cosh, builtin::plane()).unwrap();
    assert_eq!(cosh.manifold().key(), "warped-cosh-plane");
    let bad = WarpFunction::custom("shifted", |t| (t, 1.0, 0.0));
    assert!(matches!(
        WarpedProduct::assemble(None, bad, builtin::plane()),
        Err(GeometryError::NonPositiveWarp { .. })
    ));
    let fine = WarpFunction::custom("shifted", |t| (t, 1.0, 0.0));
    assert!(WarpedProduct::assemble(Some((0.5, 4.0)), fine, builtin::plane()).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_is_phi_v(t in -2.0f64..2.0, x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let w = WarpedProduct::m3();
        let m = w.manifold();
        let p = Coords::new(t, x, y);
        let fd = gradient_fd(&m, &p, |q| w.energy_value(q)).unwrap();
        let exact = w.energy_gradient(&p);
        prop_assert!((fd - exact).norm() <= 1e-5 * exact.norm());
    }

    #[test]
    fn hessian_margin_dominates_phi_squared(
        t in -2.0f64..2.0, x in -1.0f64..1.0, y in -1.0f64..1.0,
        a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0,
    ) {
        prop_assume!(a * a + b * b + c * c > 1e-3);
        let w = WarpedProduct::m3();
        let m = w.manifold();
        let p = Coords::new(t, x, y);
        let d = Coords::new(a, b, c);
        let phi = w.conformal_factor(&p);
        prop_assert!(w.energy_hessian(&p, &d, &d) >= 0.999 * phi * phi * m.inner(&p, &d, &d));
    }
}
