//! Holomorphic potentials built from Cauchy data or normalized data.
//!
//! Every potential is expanded into matrix entries once, at construction.
//! Coefficients sit at powers `-1, 0, 1` of `lambda` and are functions of
//! the complex coordinate `z`.

use crate::analytic::{AnalyticFn, EvalError};
use crate::laurent::{LaurentMatrix, Mat2, C64, IM};
use nalgebra::Vector3;
use thiserror::Error;

/// Number of interval samples used by admissibility checks.
pub const ADMISSIBILITY_SAMPLES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialKind {
    Normalized,
    GeodesicGcp,
    GeneralGcp,
    SingularGcp,
    SingularGeneral,
    CmcGcp,
}

impl PotentialKind {
    pub fn name(self) -> &'static str {
        match self {
            PotentialKind::Normalized => "normalized",
            PotentialKind::GeodesicGcp => "geodesic_gcp",
            PotentialKind::GeneralGcp => "general_gcp",
            PotentialKind::SingularGcp => "singular_gcp",
            PotentialKind::SingularGeneral => "singular_gcp_general",
            PotentialKind::CmcGcp => "cmc_gcp",
        }
    }

    /// Potentials whose boundary curve `y = 0` carries trivial Iwasawa data.
    pub fn is_cauchy(self) -> bool {
        self != PotentialKind::Normalized
    }
}

/// Source data a potential was built from.
#[derive(Clone, Debug, PartialEq)]
pub enum CauchyData {
    Normalized { a: AnalyticFn, b: AnalyticFn },
    Geodesic { kappa: AnalyticFn, tau: AnalyticFn },
    General { kappa_n: AnalyticFn, kappa_g: AnalyticFn, mu: AnalyticFn },
    Singular { kappa: AnalyticFn, tau: AnalyticFn },
    SingularGeneral { b: AnalyticFn, c: AnalyticFn },
    Cmc { kappa_n: AnalyticFn, kappa_g: AnalyticFn, mu: AnalyticFn },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("evaluation failed at s = {at}: {source}")]
    Eval { at: C64, source: EvalError },
    #[error("{what} vanishes at every sample of the interval")]
    Degenerate { what: &'static str },
    #[error("curve data inadmissible: {what} defect {defect:e} at s = {at}")]
    Inadmissible { what: &'static str, defect: f64, at: f64 },
    #[error("interval [{0}, {1}] is empty")]
    EmptyInterval(f64, f64),
    #[error("Taylor quadrature failed: {0}")]
    Quadrature(EvalError),
    #[error("symmetry order must be at least 2")]
    SymmetryOrder,
}

type Entries = [Option<AnalyticFn>; 4];

#[derive(Clone, Debug)]
pub struct Potential {
    kind: PotentialKind,
    /// Coefficient entries for powers `-1, 0, 1`, row-major.
    coeffs: [Entries; 3],
    data: CauchyData,
    warnings: Vec<String>,
}

fn nonzero(f: AnalyticFn) -> Option<AnalyticFn> {
    if f.is_zero() {
        None
    } else {
        Some(f)
    }
}

/// `x e1 + y e2` as (1,2) and (2,1) entries: `(-i x + y)/2`, `(-i x - y)/2`.
fn off_diag(x: &AnalyticFn, y: &AnalyticFn) -> Entries {
    let mi = AnalyticFn::complex_constant(-IM);
    let a12 = (&(&mi * x) + y) * 0.5;
    let a21 = (&(&mi * x) - y) * 0.5;
    [None, nonzero(a12), nonzero(a21), None]
}

/// `x e3` as diagonal entries `(i x/2, -i x/2)`.
fn diag_e3(x: &AnalyticFn) -> Entries {
    let h = AnalyticFn::complex_constant(IM * 0.5);
    [nonzero(&h * x), None, None, nonzero(-(&h * x))]
}

impl Potential {
    fn build(kind: PotentialKind, coeffs: [Entries; 3], data: CauchyData) -> Self {
        Self { kind, coeffs, data, warnings: Vec::new() }
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn data(&self) -> &CauchyData {
        &self.data
    }

    /// Admissibility warnings collected at construction.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Symbolic entry `(row, col)` of the coefficient of `lambda^power`.
    pub fn entry(&self, power: i32, row: usize, col: usize) -> Option<&AnalyticFn> {
        if !(-1..=1).contains(&power) {
            return None;
        }
        self.coeffs[(power + 1) as usize][2 * row + col].as_ref()
    }

    /// The loop `eta(z)`, coefficient of `dz`.
    pub fn eval(&self, z: C64) -> Result<LaurentMatrix, PotentialError> {
        let mut out = Vec::with_capacity(3);
        for entries in &self.coeffs {
            let mut m = Mat2::zeros();
            for (k, e) in entries.iter().enumerate() {
                if let Some(f) = e {
                    m[(k / 2, k % 2)] = f.eval(z).map_err(|source| PotentialError::Eval { at: z, source })?;
                }
            }
            out.push(m);
        }
        Ok(LaurentMatrix::twisted_unchecked(-1, out))
    }
}

/// `eta = [[0, a], [b, 0]] lambda^{-1} dz`.
pub fn normalized(a: AnalyticFn, b: AnalyticFn) -> Potential {
    let coeffs = [[None, nonzero(a.clone()), nonzero(b.clone()), None], Default::default(), Default::default()];
    Potential::build(PotentialKind::Normalized, coeffs, CauchyData::Normalized { a, b })
}

fn first_order(mu: &AnalyticFn, kappa_n: &AnalyticFn, kappa_g: &AnalyticFn) -> [Entries; 3] {
    let half = AnalyticFn::constant(0.5);
    let minus_i_half = AnalyticFn::complex_constant(-IM * 0.5);
    let plus_i_half = AnalyticFn::complex_constant(IM * 0.5);
    let x_plus = &(mu * 0.5) + &minus_i_half;
    let x_minus = &(mu * 0.5) + &plus_i_half;
    let y = -(kappa_n * &half);
    [off_diag(&x_minus, &y), diag_e3(kappa_g), off_diag(&x_plus, &y)]
}

/// Geodesic Cauchy data: curvature and torsion of a curve that is a geodesic of the surface.
pub fn geodesic_gcp(kappa: AnalyticFn, tau: AnalyticFn) -> Potential {
    let coeffs = first_order(&tau, &kappa, &AnalyticFn::zero());
    Potential::build(PotentialKind::GeodesicGcp, coeffs, CauchyData::Geodesic { kappa, tau })
}

fn samples(interval: (f64, f64)) -> Result<Vec<f64>, PotentialError> {
    let (a, b) = interval;
    if !(b > a) {
        return Err(PotentialError::EmptyInterval(a, b));
    }
    let n = ADMISSIBILITY_SAMPLES;
    Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
}

fn real_at(f: &AnalyticFn, s: f64) -> Result<f64, PotentialError> {
    f.eval_real(s).map_err(|source| PotentialError::Eval { at: C64::new(s, 0.0), source })
}

/// Sample points where `f` is numerically zero.
fn zero_samples(f: &AnalyticFn, interval: (f64, f64), tol: f64) -> Result<Vec<f64>, PotentialError> {
    let mut out = Vec::new();
    for s in samples(interval)? {
        if real_at(f, s)?.abs() <= tol {
            out.push(s);
        }
    }
    Ok(out)
}

/// Sample points where `f` changes sign between neighbours, or vanishes.
fn sign_changes(f: &AnalyticFn, interval: (f64, f64)) -> Result<Vec<f64>, PotentialError> {
    let pts = samples(interval)?;
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for s in pts {
        let v = real_at(f, s)?;
        if v == 0.0 {
            out.push(s);
        } else if let Some((ps, pv)) = prev {
            if pv * v < 0.0 {
                out.push(0.5 * (ps + s));
            }
        }
        prev = Some((s, v));
    }
    Ok(out)
}

const VANISH_TOL: f64 = 1e-12;

/// General Cauchy data: normal curvature, geodesic curvature and the twist `mu` of the normal.
pub fn general_gcp(kappa_n: AnalyticFn, kappa_g: AnalyticFn, mu: AnalyticFn, interval: (f64, f64)) -> Result<Potential, PotentialError> {
    let coeffs = first_order(&mu, &kappa_n, &kappa_g);
    let mut p = Potential::build(PotentialKind::GeneralGcp, coeffs, CauchyData::General { kappa_n: kappa_n.clone(), kappa_g, mu });
    for s in sign_changes(&kappa_n, interval)? {
        p.warnings.push(format!("normal curvature vanishes near s = {s}; a singularity is expected there"));
    }
    Ok(p)
}

pub type Vec3Fn = [AnalyticFn; 3];

fn dot(a: &Vec3Fn, b: &Vec3Fn) -> AnalyticFn {
    &(&(&a[0] * &b[0]) + &(&a[1] * &b[1])) + &(&a[2] * &b[2])
}

fn cross(a: &Vec3Fn, b: &Vec3Fn) -> Vec3Fn {
    [
        &(&a[1] * &b[2]) - &(&a[2] * &b[1]),
        &(&a[2] * &b[0]) - &(&a[0] * &b[2]),
        &(&a[0] * &b[1]) - &(&a[1] * &b[0]),
    ]
}

fn deriv(a: &Vec3Fn) -> Vec3Fn {
    [a[0].derivative(), a[1].derivative(), a[2].derivative()]
}

fn eval3(a: &Vec3Fn, s: f64) -> Result<Vector3<f64>, PotentialError> {
    Ok(Vector3::new(real_at(&a[0], s)?, real_at(&a[1], s)?, real_at(&a[2], s)?))
}

/// Symbolic data `(kappa_n, kappa_g, mu)` of a curve `f0` with unit normal field `n0`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveData {
    pub kappa_n: AnalyticFn,
    pub kappa_g: AnalyticFn,
    pub mu: AnalyticFn,
}

pub fn gcp_data_from_curve(f0: &Vec3Fn, n0: &Vec3Fn, interval: (f64, f64), data_tol: f64) -> Result<CurveData, PotentialError> {
    let d1 = deriv(f0);
    let d2 = deriv(&d1);
    let dn = deriv(n0);
    let mut worst: [(f64, f64); 3] = [(0.0, 0.0); 3];
    for s in samples(interval)? {
        let t = eval3(&d1, s)?;
        let n = eval3(n0, s)?;
        let defects = [(t.norm() - 1.0).abs(), t.dot(&n).abs(), (n.norm() - 1.0).abs()];
        for (w, d) in worst.iter_mut().zip(defects) {
            if d > w.0 {
                *w = (d, s);
            }
        }
    }
    let names = ["arc length", "orthogonality", "unit normal"];
    for (name, (d, s)) in names.iter().zip(worst) {
        if d > data_tol {
            return Err(PotentialError::Inadmissible { what: name, defect: d, at: s });
        }
    }
    Ok(CurveData {
        kappa_n: dot(&d2, n0),
        kappa_g: dot(&d2, &cross(n0, &d1)),
        mu: dot(&cross(&d1, n0), &dn),
    })
}

/// The curve is the singular set `y = 0`, a cuspidal edge where `kappa != 0`.
pub fn singular_gcp(kappa: AnalyticFn, tau: AnalyticFn, interval: (f64, f64)) -> Result<Potential, PotentialError> {
    if zero_samples(&kappa, interval, VANISH_TOL)?.len() == ADMISSIBILITY_SAMPLES {
        return Err(PotentialError::Degenerate { what: "curvature" });
    }
    let zero = AnalyticFn::zero();
    let minus_i_half = AnalyticFn::complex_constant(-IM * 0.5);
    let plus_i_half = AnalyticFn::complex_constant(IM * 0.5);
    let x_plus = &(&tau * 0.5) + &minus_i_half;
    let x_minus = &(&tau * 0.5) + &plus_i_half;
    let coeffs = [off_diag(&x_minus, &zero), diag_e3(&kappa), off_diag(&x_plus, &zero)];
    Ok(Potential::build(PotentialKind::SingularGcp, coeffs, CauchyData::Singular { kappa, tau }))
}

/// Singular curve with null direction `d/dx + b d/dy` and `c` the `e3` coefficient.
pub fn singular_gcp_general(b: AnalyticFn, c: AnalyticFn, interval: (f64, f64)) -> Result<Potential, PotentialError> {
    let zero = AnalyticFn::zero();
    let i_half = AnalyticFn::complex_constant(IM * 0.5);
    let y_plus = &AnalyticFn::constant(-0.5) + &(&i_half * &b);
    let y_minus = &AnalyticFn::constant(-0.5) - &(&i_half * &b);
    let coeffs = [off_diag(&zero, &y_minus), diag_e3(&c), off_diag(&zero, &y_plus)];
    let mut p = Potential::build(PotentialKind::SingularGeneral, coeffs, CauchyData::SingularGeneral { b, c: c.clone() });
    for s in sign_changes(&c, interval)? {
        p.warnings.push(format!("c vanishes near s = {s}; the singular curve degenerates there"));
    }
    Ok(p)
}

/// Unit-speed curve on the sphere with geodesic curvature `c`.
#[derive(Clone, Debug)]
pub struct NormalCurve {
    pub s: Vec<f64>,
    pub points: Vec<Vector3<f64>>,
    pub tangents: Vec<Vector3<f64>>,
}

/// Integrates `N' = T`, `T' = -N + c N x T` from `N = e3`, `T = e1` by RK4.
pub fn reconstruct_normal_curve(c: &AnalyticFn, s0: f64, s1: f64, steps: usize) -> Result<NormalCurve, PotentialError> {
    let steps = steps.max(1);
    let h = (s1 - s0) / steps as f64;
    let rhs = |s: f64, n: &Vector3<f64>, t: &Vector3<f64>| -> Result<(Vector3<f64>, Vector3<f64>), PotentialError> {
        let cv = real_at(c, s)?;
        Ok((*t, -n + n.cross(t) * cv))
    };
    let mut n = Vector3::z();
    let mut t = Vector3::x();
    let mut out = NormalCurve { s: vec![s0], points: vec![n], tangents: vec![t] };
    for k in 0..steps {
        let s = s0 + k as f64 * h;
        let (a1, b1) = rhs(s, &n, &t)?;
        let (a2, b2) = rhs(s + 0.5 * h, &(n + a1 * (0.5 * h)), &(t + b1 * (0.5 * h)))?;
        let (a3, b3) = rhs(s + 0.5 * h, &(n + a2 * (0.5 * h)), &(t + b2 * (0.5 * h)))?;
        let (a4, b4) = rhs(s + h, &(n + a3 * h), &(t + b3 * h))?;
        n += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
        t += (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (h / 6.0);
        out.s.push(s + h);
        out.points.push(n);
        out.tangents.push(t);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeReport {
    pub strictly_convex: bool,
    pub c_range: (f64, f64),
    /// `|N(s0 + period) - N(s0)| + |T(s0 + period) - T(s0)|` when a period is given.
    pub closure_defect: Option<f64>,
    pub closes: Option<bool>,
}

/// Geodesic curvature `<N'', N x N'> / |N'|^3` of a curve on the unit sphere.
pub fn normal_curve_geodesic_curvature(n: &Vec3Fn) -> AnalyticFn {
    let d1 = deriv(n);
    let d2 = deriv(&d1);
    let speed_sq = dot(&d1, &d1);
    &dot(&d2, &cross(n, &d1)) / &speed_sq.pow(&AnalyticFn::constant(1.5))
}

/// Cone point potential `singular_gcp_general(0, c)` plus the embeddedness preconditions.
pub fn cone_potential_from_normal_curve(
    c: AnalyticFn,
    period: Option<f64>,
    interval: (f64, f64),
    close_tol: f64,
) -> Result<(Potential, ConeReport), PotentialError> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in samples(interval)? {
        let v = real_at(&c, s)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let strictly_convex = lo > 0.0 || hi < 0.0;
    let (closure_defect, closes) = match period {
        Some(p) => {
            let curve = reconstruct_normal_curve(&c, interval.0, interval.0 + p, 4096)?;
            let k = curve.points.len() - 1;
            let d = (curve.points[k] - curve.points[0]).norm() + (curve.tangents[k] - curve.tangents[0]).norm();
            (Some(d), Some(d < close_tol))
        }
        None => (None, None),
    };
    let pot = singular_gcp_general(AnalyticFn::zero(), c, interval)?;
    Ok((pot, ConeReport { strictly_convex, c_range: (lo, hi), closure_defect, closes }))
}

/// CMC 1/2 surface through the curve with prescribed normal; read through the parallel-surface Sym formula.
pub fn cmc_gcp(kappa_n: AnalyticFn, kappa_g: AnalyticFn, mu: AnalyticFn) -> Potential {
    let i = AnalyticFn::complex_constant(IM);
    let km1 = &kappa_n - 1.0;
    let x_plus = (&mu + &(&i * &km1)) * 0.5;
    let y_plus = (&(-&kappa_n) + &(&i * &mu)) * 0.5;
    let x_minus = (&mu - &(&i * &km1)) * 0.5;
    let y_minus = (&(-&kappa_n) - &(&i * &mu)) * 0.5;
    let coeffs = [off_diag(&x_minus, &y_minus), diag_e3(&kappa_g), off_diag(&x_plus, &y_plus)];
    Potential::build(PotentialKind::CmcGcp, coeffs, CauchyData::Cmc { kappa_n, kappa_g, mu })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryPattern {
    /// `a` carries powers `0 mod n`, `b` carries powers `n-2 mod n`.
    Direct,
    /// The roles of `a` and `b` exchanged.
    Mirrored,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryCheck {
    pub holds: bool,
    pub pattern: Option<SymmetryPattern>,
    /// Largest off-pattern coefficient of the better fitting pattern.
    pub off_pattern: f64,
}

/// Scaled Taylor coefficients `a_k r^k`, `k < m/2`, by trapezoidal quadrature on `|z| = r`.
pub fn taylor_coefficients(f: &AnalyticFn, r: f64, m: usize) -> Result<Vec<C64>, PotentialError> {
    let vals: Vec<C64> = (0..m)
        .map(|j| f.eval(C64::from_polar(r, 2.0 * std::f64::consts::PI * j as f64 / m as f64)))
        .collect::<Result<_, _>>()
        .map_err(PotentialError::Quadrature)?;
    Ok((0..m / 2)
        .map(|k| {
            let mut acc = C64::new(0.0, 0.0);
            for (j, v) in vals.iter().enumerate() {
                acc += v * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (j * k % m) as f64 / m as f64);
            }
            acc / m as f64
        })
        .collect())
}

/// Tests the Taylor index pattern that gives a rotational symmetry of order `n` about the basepoint 0.
pub fn check_symmetry_order(a: &AnalyticFn, b: &AnalyticFn, n: usize, r_taylor: f64, taylor_tol: f64) -> Result<SymmetryCheck, PotentialError> {
    if n < 2 {
        return Err(PotentialError::SymmetryOrder);
    }
    let m = 128;
    let ta = taylor_coefficients(a, r_taylor, m)?;
    let tb = taylor_coefficients(b, r_taylor, m)?;
    let scale = ta.iter().chain(&tb).map(|c| c.norm()).fold(1.0, f64::max);
    let off = |t: &[C64], residue: usize| {
        t.iter()
            .enumerate()
            .filter(|(k, _)| k % n != residue)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
            / scale
    };
    let direct = off(&ta, 0).max(off(&tb, n - 2));
    let mirrored = off(&ta, n - 2).max(off(&tb, 0));
    let (best, pattern) = if direct <= mirrored {
        (direct, SymmetryPattern::Direct)
    } else {
        (mirrored, SymmetryPattern::Mirrored)
    };
    let holds = best <= taylor_tol;
    Ok(SymmetryCheck { holds, pattern: holds.then_some(pattern), off_pattern: best })
}
