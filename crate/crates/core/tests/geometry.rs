use dpw_core::analytic::AnalyticFn;
use dpw_core::frame::{integrate_frame, FrameConfig, GridSpec};
use dpw_core::potentials::{cmc_gcp, geodesic_gcp, normalized, singular_gcp, singular_gcp_general, Potential};
use dpw_core::surface::{
    build_frontal, check_frontal, fundamental_forms, frenet_reconstruct, parallel_surface, procrustes, Frontal, SurfaceKind, V3,
};

fn p(s: &str) -> AnalyticFn {
    AnalyticFn::parse(s).unwrap()
}

fn frontal(pot: &Potential, spec: &GridSpec, kind: SurfaceKind) -> Frontal {
    build_frontal(&integrate_frame(pot, spec, &FrameConfig::default()).unwrap(), kind)
}

fn row(fr: &Frontal, j: usize) -> Vec<V3> {
    (0..fr.spec.nx).map(|i| fr.position(i, j)).collect()
}

/// Fourth-order speed estimate along a row from two central differences.
fn max_speed_defect(pts: &[V3], h: f64) -> f64 {
    (2..pts.len() - 2)
        .map(|i| {
            let d1 = (pts[i + 1] - pts[i - 1]) / (2.0 * h);
            let d2 = (pts[i + 2] - pts[i - 2]) / (4.0 * h);
            ((d1 * 4.0 - d2) / 3.0).norm()
        })
        .map(|s| (s - 1.0).abs())
        .fold(0.0, f64::max)
}

#[test]
fn geodesic_curve_is_the_frenet_curve_at_unit_speed() {
    let spec = GridSpec::new((-1.0, 1.0), (-0.02, 0.02), 201, 3, None).unwrap();
    for (k, t) in [("2", "0"), ("1", "1"), ("1-s^4", "0"), ("1+0.3s", "0.5-s")] {
        let fr = frontal(&geodesic_gcp(p(k), p(t)), &spec, SurfaceKind::Spherical);
        let curve = frenet_reconstruct(&p(k), &p(t), (-1.0, 1.0), 201).unwrap();
        let fit = procrustes(&curve.points, &row(&fr, 1)).unwrap();
        assert!(fit.max < 1e-5, "({k}, {t}): {}", fit.max);
        assert!(max_speed_defect(&row(&fr, 1), spec.hx()) < 1e-6);
    }
}

#[test]
fn singular_curve_is_the_frenet_curve() {
    let spec = GridSpec::new((-1.0, 1.0), (-0.02, 0.02), 201, 3, None).unwrap();
    for (k, t) in [("1", "1"), ("1+0.5s", "0.3")] {
        let pot = singular_gcp(p(k), p(t), (-1.0, 1.0)).unwrap();
        let fr = frontal(&pot, &spec, SurfaceKind::Spherical);
        let curve = frenet_reconstruct(&p(k), &p(t), (-1.0, 1.0), 201).unwrap();
        assert!(procrustes(&curve.points, &row(&fr, 1)).unwrap().max < 1e-5);
    }
}

#[test]
fn defining_equation_converges_at_second_order() {
    let pot = geodesic_gcp(p("1"), p("0.5"));
    let run = |n| {
        let spec = GridSpec::new((-0.5, 0.5), (-0.5, 0.5), n, n, None).unwrap();
        check_frontal(&frontal(&pot, &spec, SurfaceKind::Spherical))
    };
    let (a, b) = (run(21), run(41));
    assert!(a.normal_defect < 1e-10 && b.normal_defect < 1e-10);
    let ratio = a.defining_residual / b.defining_residual;
    assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    assert!(a.frontal_defect / b.frontal_defect > 3.5);
}

#[test]
fn cmc_frontal_satisfies_its_defining_equation() {
    let pot = cmc_gcp(p("1"), p("0.3"), p("0.2"));
    let run = |n| {
        let spec = GridSpec::new((-0.5, 0.5), (-0.5, 0.5), n, n, None).unwrap();
        check_frontal(&frontal(&pot, &spec, SurfaceKind::Cmc)).defining_residual
    };
    let ratio = run(21) / run(41);
    assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
}

#[test]
fn cmc_curve_is_a_unit_circle_with_radial_normal() {
    // kappa_n = 1, kappa_g = 0, mu = 0: the unit circle, normal along the principal normal
    let tau = std::f64::consts::TAU;
    let spec = GridSpec::new((0.0, tau), (-0.05, 0.05), 121, 3, None).unwrap();
    let fr = frontal(&cmc_gcp(p("1"), p("0"), p("0")), &spec, SurfaceKind::Cmc);
    let pts = row(&fr, 1);
    let centre = pts[..120].iter().sum::<V3>() / 120.0;
    for (i, q) in pts.iter().enumerate() {
        assert!(((q - centre).norm() - 1.0).abs() < 1e-6);
        let radial = (q - centre).normalize();
        assert!(radial.cross(&fr.normal_at(i, 1)).norm() < 1e-6);
    }
}

#[test]
fn fundamental_forms_cross_validate() {
    let spec = GridSpec::new((-0.5, 0.5), (-0.5, 0.5), 41, 41, None).unwrap();
    let fr = frontal(&geodesic_gcp(p("2"), p("0.5")), &spec, SurfaceKind::Spherical);
    let h2 = spec.hx() * spec.hx();
    let mut checked = 0;
    for (i, j) in [(10, 10), (20, 20), (30, 12), (15, 33)] {
        let Ok(ff) = fundamental_forms(&fr, i, j, 1e-3) else { continue };
        checked += 1;
        let ii = ff.normal_second;
        assert_eq!(ii[(0, 0)], ii[(1, 1)]);
        assert_eq!(ii[(0, 1)], 0.0);
        let scale = 1.0 + ff.normal_first.norm();
        assert!((ff.normal_first - ff.mesh_first).norm() < 50.0 * h2 * scale);
        assert!((ff.normal_second - ff.mesh_second).norm() < 50.0 * h2 * scale);
        // mesh-based second form is conformal up to discretisation
        let ms = ff.mesh_second;
        assert!((ms[(0, 0)] - ms[(1, 1)]).abs() < 50.0 * h2 * scale && ms[(0, 1)].abs() < 50.0 * h2 * scale);
    }
    assert!(checked >= 3);
}

#[test]
fn unit_sphere_forms_agree() {
    let spec = GridSpec::new((-0.5, 0.5), (-0.5, 0.5), 41, 41, None).unwrap();
    let fr = frontal(&geodesic_gcp(p("1"), p("0")), &spec, SurfaceKind::Spherical);
    let ff = fundamental_forms(&fr, 20, 20, 1e-3).unwrap();
    let (a, b) = (ff.mesh_first, ff.mesh_second);
    let d = (a - b).norm().min((a + b).norm());
    assert!(d < 1e-3 * a.norm(), "{d}");
}

#[test]
fn constant_data_gives_a_surface_of_revolution() {
    // translating in x is a rigid motion, so distances between rows are x-invariant
    let spec = GridSpec::new((-1.0, 1.0), (-0.5, 0.5), 41, 11, None).unwrap();
    let fr = frontal(&geodesic_gcp(p("2"), p("0")), &spec, SurfaceKind::Spherical);
    for (a, b) in [(0, 10), (3, 7), (5, 9)] {
        let d0 = (fr.position(5, a) - fr.position(5, b)).norm();
        for i in [10, 20, 35] {
            assert!(((fr.position(i, a) - fr.position(i, b)).norm() - d0).abs() < 1e-9);
        }
    }
}

#[test]
fn parallel_surfaces() {
    let spec = GridSpec::new((-0.5, 0.5), (-0.5, 0.5), 21, 21, None).unwrap();
    let field = integrate_frame(&geodesic_gcp(p("1"), p("0.2")), &spec, &FrameConfig::default()).unwrap();
    let sph = build_frontal(&field, SurfaceKind::Spherical);
    let cmc = build_frontal(&field, SurfaceKind::Cmc);
    assert_eq!(parallel_surface(&sph, 0.0).positions, sph.positions);
    let g = parallel_surface(&sph, -1.0);
    assert_eq!(g.kind, SurfaceKind::Cmc);
    for k in 0..spec.len() {
        assert!((g.positions[k] - cmc.positions[k]).norm() < 1e-12);
    }
    let back = parallel_surface(&g, 1.0);
    assert_eq!(back.kind, SurfaceKind::Spherical);
    for k in 0..spec.len() {
        assert!((back.positions[k] - sph.positions[k]).norm() < 1e-14);
    }
}

#[test]
fn zero_potential_gives_a_point() {
    let spec = GridSpec::new((-0.5, 0.5), (-0.5, 0.5), 7, 7, None).unwrap();
    let fr = frontal(&normalized(AnalyticFn::zero(), AnalyticFn::zero()), &spec, SurfaceKind::Spherical);
    assert!(fr.valid.iter().all(|v| *v));
    assert!(fr.positions.iter().all(|q| q.norm() < 1e-14));
}

#[test]
fn general_singular_curve_speed_is_b() {
    let spec = GridSpec::new((-1.0, 1.0), (-0.02, 0.02), 201, 3, None).unwrap();
    let pot = singular_gcp_general(p("0.5+0.25s"), p("1"), (-1.0, 1.0)).unwrap();
    let fr = frontal(&pot, &spec, SurfaceKind::Spherical);
    let pts = row(&fr, 1);
    let h = spec.hx();
    for i in (10..190).step_by(30) {
        let d1 = (pts[i + 1] - pts[i - 1]) / (2.0 * h);
        let d2 = (pts[i + 2] - pts[i - 2]) / (4.0 * h);
        let speed = ((d1 * 4.0 - d2) / 3.0).norm();
        assert!((speed - (0.5 + 0.25 * spec.x(i)).abs()).abs() < 1e-6);
    }
}
