//! Acceptance criteria, one pass/fail line each.

use dpw_core::analytic::AnalyticFn;
use dpw_core::factorization::{iwasawa, IwasawaConfig};
use dpw_core::frame::{integrate_frame, path_independence_check, FrameConfig, GridSpec};
use dpw_core::laurent::{LaurentMatrix, Mat2, C64};
use dpw_core::potentials::{
    check_symmetry_order, cmc_gcp, general_gcp, geodesic_gcp, normal_curve_geodesic_curvature, normalized, singular_gcp,
    singular_gcp_general, Potential,
};
use dpw_core::singularities::{
    branch_points, classify_general_curve_point, classify_regular_curve_point, null_direction, SingularityLabel,
};
use dpw_core::surface::{
    build_frontal, frenet_reconstruct, gauss_mean_curvature, parallel_surface, procrustes, sphere_fit, Frontal, SurfaceKind, V3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

const REG_FLOOR: f64 = 1e-3;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn p(s: &str) -> AnalyticFn {
    AnalyticFn::parse(s).unwrap()
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn frontal(pot: &Potential, spec: &GridSpec, kind: SurfaceKind) -> Frontal {
    let field = integrate_frame(pot, spec, &FrameConfig::default()).unwrap();
    build_frontal(&field, kind)
}

fn grid(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> GridSpec {
    GridSpec::new(x, y, nx, ny, None).unwrap()
}

fn unipotent(upper: bool, power: i32, a: C64) -> LaurentMatrix {
    let z = c(0.0, 0.0);
    let m = if upper { Mat2::new(z, a, z, z) } else { Mat2::new(z, z, a, z) };
    LaurentMatrix::identity().add(&LaurentMatrix::monomial(power, m)).into_twisted(0.0).unwrap()
}

fn random_twisted_loop(rng: &mut ChaCha8Rng) -> LaurentMatrix {
    loop {
        let mut l = LaurentMatrix::identity();
        for k in 0..4 {
            let power = [-3, -1, 1, 3][rng.gen_range(0..4)];
            let a = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            l = l.multiply(&unipotent(k % 2 == 0, power, a), 64);
        }
        let r: f64 = rng.gen_range(0.5..2.0);
        let diag = LaurentMatrix::new_twisted(0, vec![Mat2::new(c(r, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0 / r, 0.0))], 0.0).unwrap();
        l = l.multiply(&diag, 64);
        if l.lo() >= -4 && l.hi() <= 4 {
            return l;
        }
    }
}

fn iwasawa_round_trip() -> Outcome {
    let cfg = IwasawaConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = [0.0f64; 4];
    for _ in 0..100 {
        let phi = random_twisted_loop(&mut rng);
        let r = iwasawa(&phi, &cfg).unwrap();
        let res = r.residual;
        for (w, v) in worst.iter_mut().zip([res.reconstruction, res.unitarity, res.determinant, res.twisting]) {
            *w = w.max(v);
        }
    }
    let zz = c(0.3, -0.4);
    let s = 1.0 / (1.0 + zz.norm_sqr()).sqrt();
    let z = c(0.0, 0.0);
    let expect = LaurentMatrix::new(
        -1,
        vec![Mat2::new(z, zz * s, z, z), Mat2::identity() * c(s, 0.0), Mat2::new(z, z, -zz.conj() * s, z)],
    )
    .unwrap();
    let sphere = iwasawa(&unipotent(true, -1, zz), &cfg).unwrap().unitary_part.max_coeff_distance(&expect);
    let ok = worst.iter().all(|w| *w <= 1e-8) && sphere <= 1e-10;
    (ok, format!("residuals (recon, unit, det, twist) = {:.1e}, {:.1e}, {:.1e}, {:.1e}, sphere frame defect {sphere:.1e}", worst[0], worst[1], worst[2], worst[3]))
}

fn flatness() -> Outcome {
    let pot = geodesic_gcp(p("1-s^4"), p("0"));
    let fine = path_independence_check(&pot, &grid((-1.0, 1.0), (-1.0, 1.0), 201, 201), &FrameConfig::default(), 16, 3).unwrap();
    let coarse = grid((-1.0, 1.0), (-1.0, 1.0), 11, 11);
    let run = |substeps| {
        let cfg = FrameConfig { substeps, ..FrameConfig::default() };
        path_independence_check(&pot, &coarse, &cfg, 16, 5).unwrap().max_defect
    };
    let (d1, d2) = (run(1), run(2));
    let ratio = d1 / d2;
    // at least the RK4 rate; the leading h^4 term is path independent for holomorphic data, so ~32 is typical
    let ok = fine.max_defect <= 1e-8 && ratio >= 12.0;
    (ok, format!("defect {:.1e} at 201x201, halving ratio {ratio:.1} ({d1:.1e} -> {d2:.1e}), required >= 12", fine.max_defect))
}

/// Largest `|K - 1|` over interior regular points on the subgrid with stride `stride`.
fn curvature_error(fr: &Frontal, stride: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for j in (stride..fr.spec.ny - 1).step_by(stride) {
        for i in (stride..fr.spec.nx - 1).step_by(stride) {
            if let Ok((k, _)) = gauss_mean_curvature(fr, i, j, REG_FLOOR) {
                worst = worst.max((k - 1.0).abs());
            }
        }
    }
    worst
}

fn constant_curvature() -> Outcome {
    let mut ok = true;
    let mut msg = Vec::new();
    let cases: [(&str, Potential, f64); 2] = [("geodesic(2,0)", geodesic_gcp(p("2"), p("0")), 1.0), ("normalized(1,10)", normalized(p("1"), p("10")), 0.1)];
    for (name, pot, half) in cases {
        let fine = frontal(&pot, &grid((-half, half), (-half, half), 201, 201), SurfaceKind::Spherical);
        let coarse = frontal(&pot, &grid((-half, half), (-half, half), 101, 101), SurfaceKind::Spherical);
        let e_fine = curvature_error(&fine, 1);
        // compare on points shared by both grids
        let e_shared = curvature_error(&fine, 2);
        let e_coarse = curvature_error(&coarse, 1);
        let order = (e_coarse / e_shared).log2();
        ok &= e_fine <= 1e-3 && order >= 1.8;
        msg.push(format!("{name}: max|K-1| {e_fine:.1e}, order {order:.2}"));
    }
    (ok, msg.join("; "))
}

fn row(fr: &Frontal, j: usize) -> Vec<V3> {
    (0..fr.spec.nx).map(|i| fr.position(i, j)).collect()
}

fn geodesic_curve_match() -> Outcome {
    let spec = grid((-1.0, 1.0), (-0.01, 0.01), 201, 3);
    let mut worst: f64 = 0.0;
    for (k, t) in [("2", "0"), ("1", "1"), ("1-s^4", "0")] {
        let fr = frontal(&geodesic_gcp(p(k), p(t)), &spec, SurfaceKind::Spherical);
        let curve = frenet_reconstruct(&p(k), &p(t), (-1.0, 1.0), 201).unwrap();
        worst = worst.max(procrustes(&curve.points, &row(&fr, 1)).unwrap().max);
    }
    (worst <= 1e-5, format!("max Procrustes residual {worst:.1e}"))
}

fn sphere_fit_check() -> Outcome {
    let fr = frontal(&geodesic_gcp(p("1"), p("0")), &grid((-1.0, 1.0), (-1.0, 1.0), 201, 201), SurfaceKind::Spherical);
    let pts: Vec<V3> = fr.positions.iter().zip(&fr.valid).filter(|(_, v)| **v).map(|(q, _)| *q).collect();
    let fit = sphere_fit(&pts).unwrap();
    let ok = fit.max_residual <= 1e-5 && (fit.radius - 1.0).abs() <= 1e-5;
    (ok, format!("radius {:.8}, residual {:.1e}", fit.radius, fit.max_residual))
}

fn singular_gcp_check() -> Outcome {
    let spec = grid((-1.0, 1.0), (-0.5, 0.5), 201, 201);
    let fr = frontal(&singular_gcp(p("1"), p("1"), (-1.0, 1.0)).unwrap(), &spec, SurfaceKind::Spherical);
    let j0 = spec.nearest_row(0.0);
    let mut mu_max: f64 = 0.0;
    for i in 1..spec.nx - 1 {
        mu_max = mu_max.max(fr.degeneracy[spec.index(i, j0)].abs());
    }
    let mut dmu: f64 = 0.0;
    let mut null: f64 = 0.0;
    let expect = V3::new(1.0, 1.0, 0.0).normalize();
    for i in (10..=190).step_by(20) {
        let d = (fr.degeneracy[spec.index(i, j0 + 1)] - fr.degeneracy[spec.index(i, j0 - 1)]) / (2.0 * spec.hy());
        dmu = dmu.max((d + 2.0).abs());
        let (v, _) = null_direction(&fr, i, j0).unwrap();
        let cos = (v.x * expect.x + v.y * expect.y).abs();
        null = null.max((1.0 - cos * cos).max(0.0).sqrt());
    }
    let h = spec.hx().max(spec.hy());
    let ok = mu_max <= 1e-5 && dmu <= 1e-3 && null <= 10.0 * h;
    (ok, format!("max|mu(x,0)| {mu_max:.1e}, d_y mu defect {dmu:.1e}, null-direction sine {null:.1e} (h = {h:.0e})"))
}

fn classifier_fixtures() -> Outcome {
    let checks = [
        classify_regular_curve_point(&p("s"), &p("1"), 0.0).unwrap().label == SingularityLabel::CuspidalBeaks,
        classify_general_curve_point(&p("s"), &p("1"), 0.0).unwrap().label == SingularityLabel::Swallowtail,
        classify_general_curve_point(&p("s^2"), &p("1"), 0.0).unwrap().label == SingularityLabel::CuspidalButterfly,
        classify_general_curve_point(&p("0"), &p("1+0.5cos(s)"), 0.0).unwrap().label == SingularityLabel::ConePoint,
        classify_general_curve_point(&p("s"), &p("s"), 0.0).unwrap().label == SingularityLabel::DegenerateUnclassified,
    ];
    let spec = grid((-std::f64::consts::PI, std::f64::consts::PI), (-0.2, 0.2), 201, 21);
    let pot = singular_gcp_general(p("0"), p("1+0.5cos(s)"), (-4.0, 4.0)).unwrap();
    let fr = frontal(&pot, &spec, SurfaceKind::Spherical);
    let pts = row(&fr, spec.nearest_row(0.0));
    let mut diam: f64 = 0.0;
    for a in &pts {
        for b in &pts {
            diam = diam.max((a - b).norm());
        }
    }
    let ok = checks.iter().all(|c| *c) && diam <= 1e-6;
    (ok, format!("labels {checks:?}, cone image diameter {diam:.1e}"))
}

fn cone_curvature() -> Outcome {
    let mut worst: f64 = 0.0;
    for r in [0.5, std::f64::consts::FRAC_1_SQRT_2, 0.9] {
        let h = (1.0 - r * r).sqrt();
        let n = [p(&format!("{r}*cos(s/{r})")), p(&format!("{r}*sin(s/{r})")), AnalyticFn::constant(h)];
        let cf = normal_curve_geodesic_curvature(&n);
        for k in 0..16 {
            let s = k as f64 * 0.4;
            worst = worst.max((cf.eval_real(s).unwrap() - h / r).abs());
        }
    }
    (worst <= 1e-12, format!("max |c - sqrt(1-R^2)/R| {worst:.1e}"))
}

fn parallel_cmc() -> Outcome {
    let spec = grid((-1.0, 1.0), (-1.0, 1.0), 201, 201);
    let field = integrate_frame(&cmc_gcp(p("s"), p("0"), p("0")), &spec, &FrameConfig::default()).unwrap();
    let sph = build_frontal(&field, SurfaceKind::Spherical);
    let cmc = build_frontal(&field, SurfaceKind::Cmc);
    let mut par: f64 = 0.0;
    for k in 0..spec.len() {
        if cmc.valid[k] {
            par = par.max((cmc.positions[k] - (sph.positions[k] - sph.normals[k])).norm());
        }
    }
    let mut h_err: f64 = 0.0;
    for j in 1..spec.ny - 1 {
        for i in 1..spec.nx - 1 {
            if let Ok((_, h)) = gauss_mean_curvature(&cmc, i, j, REG_FLOOR) {
                h_err = h_err.max((h - 0.5).abs());
            }
        }
    }
    let back = parallel_surface(&parallel_surface(&sph, -1.0), 1.0);
    let trip = back.positions.iter().zip(&sph.positions).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let ok = par <= 1e-12 && h_err <= 1e-3 && trip <= 1e-14;
    (ok, format!("parallel defect {par:.1e}, max|H-1/2| {h_err:.1e}, round trip {trip:.1e}"))
}

fn non_orientable() -> Outcome {
    let tau = 2.0 * std::f64::consts::PI;
    let spec = grid((-tau, tau), (-0.5, 0.5), 201, 21);
    let pot = general_gcp(p("-sin(s/2)"), p("cos(s/2)"), p("0.5"), (-tau, tau)).unwrap();
    let fr = frontal(&pot, &spec, SurfaceKind::Spherical);
    let shift = (spec.nx - 1) / 2;
    let (mut df, mut dn): (f64, f64) = (0.0, 0.0);
    for j in 0..spec.ny {
        for i in 0..spec.nx - shift {
            df = df.max((fr.position(i + shift, j) - fr.position(i, j)).norm());
            dn = dn.max((fr.normal_at(i + shift, j) + fr.normal_at(i, j)).norm());
        }
    }
    (df <= 1e-4 && dn <= 1e-4, format!("|f(x+2pi)-f(x)| {df:.1e}, |N(x+2pi)+N(x)| {dn:.1e}"))
}

fn branch_point_check() -> Outcome {
    let spec = grid((-1.0, 1.0), (-1.0, 1.0), 41, 41);
    let a = branch_points(&p("s"), &p("10 s"), &spec).unwrap();
    let b = branch_points(&p("1"), &p("10"), &spec).unwrap();
    let c = branch_points(&p("1+s^2"), &p("1"), &spec).unwrap();
    let ok = a.points.len() == 1 && a.points[0].z.norm() <= 1e-8 && b.points.is_empty() && c.basepoint_rank_one;
    let loc = a.points.first().map(|q| q.z.norm()).unwrap_or(f64::NAN);
    (ok, format!("(z,10z): {} point(s) at |z| {loc:.1e}; (1,10): {}; (1+z^2,1) basepoint rank one: {}", a.points.len(), b.points.len(), c.basepoint_rank_one))
}

fn symmetry() -> Outcome {
    let pairs = [
        ("1 + s^2", "1", 2),
        ("1 + s^3", "s", 3),
        ("1 + s^4", "s^2", 4),
        ("1 + s^5", "s^3", 5),
        ("s^4", "s^2", 4),
        ("1", "s^3", 5),
        ("1 + s^5", "s^3 + s^8", 5),
        ("cos(s^2)", "sin(s^2)", 4),
    ];
    let accepted = pairs.iter().filter(|(a, b, n)| check_symmetry_order(&p(a), &p(b), *n, 0.5, 1e-10).unwrap().holds).count();
    let rejected = !check_symmetry_order(&p("1 + s^3"), &p("s"), 4, 0.5, 1e-10).unwrap().holds;
    (accepted == pairs.len() && rejected, format!("{accepted}/{} pairs accepted, (1+z^3, z) at order 4 rejected: {rejected}", pairs.len()))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("Iwasawa round trip", iwasawa_round_trip),
        ("flatness", flatness),
        ("K = 1", constant_curvature),
        ("geodesic curve match", geodesic_curve_match),
        ("sphere fit", sphere_fit_check),
        ("singular GCP", singular_gcp_check),
        ("classifier fixtures", classifier_fixtures),
        ("cone geodesic curvature", cone_curvature),
        ("parallel/CMC consistency", parallel_cmc),
        ("non-orientable example", non_orientable),
        ("branch points", branch_point_check),
        ("symmetry pattern", symmetry),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !ok {
            failed += 1;
        }
        println!("{} {:>2}. {name}: {detail} [{:.1}s]", if ok { "PASS" } else { "FAIL" }, k + 1, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
