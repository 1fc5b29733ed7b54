//! Geometry from frame fields: Sym formulas, normals, fundamental forms and curvature oracles.

use crate::analytic::{AnalyticFn, EvalError};
use crate::frame::{up_at, FrameField, GridSpec};
use crate::laurent::{e3, inv2, su2_to_r3, LaurentMatrix, LoopError, C64};
use crate::singularities::degeneracy_values;
use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector3};
use thiserror::Error;

pub type V3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("Sym value leaves su(2): {0}")]
    Sym(LoopError),
    #[error("point ({i}, {j}) is singular: regularity margin {margin:e}")]
    Singular { i: usize, j: usize, margin: f64 },
    #[error("point ({i}, {j}) needs an interior stencil of valid points")]
    Stencil { i: usize, j: usize },
    #[error("ill-conditioned first fundamental form at ({i}, {j}): det {det:e}")]
    Conditioning { i: usize, j: usize, det: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfaceKind {
    Spherical,
    Cmc,
}

impl SurfaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SurfaceKind::Spherical => "spherical",
            SurfaceKind::Cmc => "cmc",
        }
    }
}

/// Default su(2) tolerance for Sym values.
pub const SYM_TOL: f64 = 1e-8;

/// `i (lambda dF/dlambda F^{-1})` at `lambda = 1`.
pub fn sym_point(f: &LaurentMatrix, tol: f64) -> Result<V3, SurfaceError> {
    let one = C64::new(1.0, 0.0);
    let f1 = f.eval(one).map_err(SurfaceError::Sym)?;
    let x = f.lambda_derivative_at_one() * inv2(&f1) * C64::new(0.0, 1.0);
    su2_to_r3(&x, tol).map(|v| v.to_vector()).map_err(SurfaceError::Sym)
}

/// `Ad_F e3` at `lambda = 1`, normalised.
pub fn normal(f: &LaurentMatrix, tol: f64) -> Result<V3, SurfaceError> {
    let f1 = f.eval(C64::new(1.0, 0.0)).map_err(SurfaceError::Sym)?;
    let x = f1 * e3() * inv2(&f1);
    let v = su2_to_r3(&x, tol).map_err(SurfaceError::Sym)?.to_vector();
    Ok(v / v.norm())
}

/// `sym_point - normal`, the parallel CMC 1/2 surface.
pub fn sym_bobenko_point(f: &LaurentMatrix, tol: f64) -> Result<V3, SurfaceError> {
    Ok(sym_point(f, tol)? - normal(f, tol)?)
}

#[derive(Clone, Debug)]
pub struct Frontal {
    pub spec: GridSpec,
    pub kind: SurfaceKind,
    pub positions: Vec<V3>,
    pub normals: Vec<V3>,
    /// False where the frame point or Sym evaluation failed.
    pub valid: Vec<bool>,
    /// `| |u12| - |u21| |` of `U_p`, NaN where unavailable.
    pub margin: Vec<f64>,
    /// `<f_x x f_y, N>`, NaN where unavailable.
    pub degeneracy: Vec<f64>,
}

impl Frontal {
    pub fn idx(&self, i: usize, j: usize) -> usize {
        self.spec.index(i, j)
    }

    pub fn position(&self, i: usize, j: usize) -> V3 {
        self.positions[self.idx(i, j)]
    }

    pub fn normal_at(&self, i: usize, j: usize) -> V3 {
        self.normals[self.idx(i, j)]
    }

    /// Interior point whose 3x3 stencil is valid.
    pub fn has_stencil(&self, i: usize, j: usize) -> bool {
        let s = &self.spec;
        if i == 0 || j == 0 || i + 1 >= s.nx || j + 1 >= s.ny {
            return false;
        }
        (j - 1..=j + 1).all(|b| (i - 1..=i + 1).all(|a| self.valid[s.index(a, b)]))
    }
}

/// Assembles positions and normals; failed points are kept but masked.
pub fn build_frontal(field: &FrameField, kind: SurfaceKind) -> Frontal {
    let spec = field.spec.clone();
    let n = spec.len();
    let mut positions = vec![V3::zeros(); n];
    let mut normals = vec![V3::z(); n];
    let mut valid = vec![false; n];
    for (k, p) in field.points.iter().enumerate() {
        if !p.is_valid() {
            continue;
        }
        let s = sym_point(&p.unitary, SYM_TOL);
        let nn = normal(&p.unitary, SYM_TOL);
        if let (Ok(s), Ok(nn)) = (s, nn) {
            positions[k] = match kind {
                SurfaceKind::Spherical => s,
                SurfaceKind::Cmc => s - nn,
            };
            normals[k] = nn;
            valid[k] = true;
        }
    }
    let mut margin = vec![f64::NAN; n];
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            if let Ok(u) = up_at(field, i, j, true) {
                margin[spec.index(i, j)] = u.margin;
            }
        }
    }
    let degeneracy = degeneracy_values(&spec, &positions, &normals, &valid);
    Frontal { spec, kind, positions, normals, valid, margin, degeneracy }
}

/// Offsets every position by `offset * N`.
pub fn parallel_surface(frontal: &Frontal, offset: f64) -> Frontal {
    let positions: Vec<V3> = frontal.positions.iter().zip(&frontal.normals).map(|(p, n)| p + n * offset).collect();
    let degeneracy = degeneracy_values(&frontal.spec, &positions, &frontal.normals, &frontal.valid);
    let kind = if offset == 0.0 {
        frontal.kind
    } else {
        match frontal.kind {
            SurfaceKind::Spherical if (offset + 1.0).abs() < 1e-12 => SurfaceKind::Cmc,
            SurfaceKind::Cmc if (offset - 1.0).abs() < 1e-12 => SurfaceKind::Spherical,
            k => k,
        }
    };
    Frontal { positions, degeneracy, kind, ..frontal.clone() }
}

/// Central first and second differences of a vector field at an interior point.
pub(crate) struct Stencil {
    pub x: V3,
    pub y: V3,
    pub xx: V3,
    pub xy: V3,
    pub yy: V3,
}

pub(crate) fn stencil(values: &[V3], spec: &GridSpec, i: usize, j: usize) -> Stencil {
    let v = |a: usize, b: usize| values[spec.index(a, b)];
    let (hx, hy) = (spec.hx(), spec.hy());
    Stencil {
        x: (v(i + 1, j) - v(i - 1, j)) / (2.0 * hx),
        y: (v(i, j + 1) - v(i, j - 1)) / (2.0 * hy),
        xx: (v(i + 1, j) - v(i, j) * 2.0 + v(i - 1, j)) / (hx * hx),
        yy: (v(i, j + 1) - v(i, j) * 2.0 + v(i, j - 1)) / (hy * hy),
        xy: (v(i + 1, j + 1) - v(i + 1, j - 1) - v(i - 1, j + 1) + v(i - 1, j - 1)) / (4.0 * hx * hy),
    }
}

/// Symmetric 2x2 form `[[e, f], [f, g]]`.
pub type Form = Matrix2<f64>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FundamentalForms {
    /// Forms built from `N` alone: `f_x = N x N_y`, `f_y = -N x N_x`.
    pub normal_first: Form,
    pub normal_second: Form,
    /// Forms from differences of the positions, `II_ij = <f_ij, N>`.
    pub mesh_first: Form,
    pub mesh_second: Form,
}

fn form(e: f64, f: f64, g: f64) -> Form {
    Form::new(e, f, f, g)
}

pub fn fundamental_forms(frontal: &Frontal, i: usize, j: usize, reg_floor: f64) -> Result<FundamentalForms, SurfaceError> {
    if !frontal.has_stencil(i, j) {
        return Err(SurfaceError::Stencil { i, j });
    }
    let margin = frontal.margin[frontal.idx(i, j)];
    if !(margin > reg_floor) {
        return Err(SurfaceError::Singular { i, j, margin });
    }
    // the stencil must not straddle the singular set
    let mu = frontal.degeneracy[frontal.idx(i, j)];
    let crosses = (j - 1..=j + 1).any(|b| {
        (i - 1..=i + 1).any(|a| {
            let m = frontal.degeneracy[frontal.idx(a, b)];
            m.is_finite() && m * mu <= 0.0
        })
    });
    if crosses {
        return Err(SurfaceError::Singular { i, j, margin });
    }
    let n = frontal.normal_at(i, j);
    let ns = stencil(&frontal.normals, &frontal.spec, i, j);
    let fs = stencil(&frontal.positions, &frontal.spec, i, j);
    let (fx, fy) = (n.cross(&ns.y), -n.cross(&ns.x));
    let ii = n.dot(&ns.x.cross(&ns.y));
    Ok(FundamentalForms {
        normal_first: form(fx.dot(&fx), fx.dot(&fy), fy.dot(&fy)),
        normal_second: form(ii, 0.0, ii),
        mesh_first: form(fs.x.dot(&fs.x), fs.x.dot(&fs.y), fs.y.dot(&fs.y)),
        mesh_second: form(fs.xx.dot(&n), fs.xy.dot(&n), fs.yy.dot(&n)),
    })
}

/// `(K, H)` from the position-based forms.
pub fn gauss_mean_curvature(frontal: &Frontal, i: usize, j: usize, reg_floor: f64) -> Result<(f64, f64), SurfaceError> {
    let ff = fundamental_forms(frontal, i, j, reg_floor)?;
    curvatures(&ff.mesh_first, &ff.mesh_second).ok_or(SurfaceError::Conditioning { i, j, det: ff.mesh_first.determinant() })
}

/// `(det II / det I, tr(I^{-1} II) / 2)`, or `None` for a degenerate metric.
pub fn curvatures(first: &Form, second: &Form) -> Option<(f64, f64)> {
    let det = first.determinant();
    let scale = first.norm_squared().max(f64::MIN_POSITIVE);
    if det.abs() <= 1e-12 * scale {
        return None;
    }
    let k = second.determinant() / det;
    let h = 0.5 * (first[(1, 1)] * second[(0, 0)] - 2.0 * first[(0, 1)] * second[(0, 1)] + first[(0, 0)] * second[(1, 1)]) / det;
    Some((k, h))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrontalChecks {
    /// Largest `| |N| - 1 |`.
    pub normal_defect: f64,
    /// Largest `|<f_x, N>|`, `|<f_y, N>|` at interior points.
    pub frontal_defect: f64,
    /// Largest `|f_w - i N x N_w|` (spherical) or `|g_w - i N x N_w + N_w|` (CMC).
    pub defining_residual: f64,
    pub interior_points: usize,
}

pub fn check_frontal(frontal: &Frontal) -> FrontalChecks {
    let mut out = FrontalChecks::default();
    for (n, v) in frontal.normals.iter().zip(&frontal.valid) {
        if *v {
            out.normal_defect = out.normal_defect.max((n.norm() - 1.0).abs());
        }
    }
    let spec = &frontal.spec;
    for j in 1..spec.ny.saturating_sub(1) {
        for i in 1..spec.nx.saturating_sub(1) {
            if !frontal.has_stencil(i, j) {
                continue;
            }
            out.interior_points += 1;
            let n = frontal.normal_at(i, j);
            let ns = stencil(&frontal.normals, spec, i, j);
            let fs = stencil(&frontal.positions, spec, i, j);
            out.frontal_defect = out.frontal_defect.max(fs.x.dot(&n).abs()).max(fs.y.dot(&n).abs());
            let (mut ex, mut ey) = (n.cross(&ns.y), -n.cross(&ns.x));
            if frontal.kind == SurfaceKind::Cmc {
                ex -= ns.x;
                ey -= ns.y;
            }
            let r = 0.5 * ((fs.x - ex).norm_squared() + (fs.y - ey).norm_squared()).sqrt();
            out.defining_residual = out.defining_residual.max(r);
        }
    }
    out
}

/// Unit-speed curve with its Frenet frame.
#[derive(Clone, Debug)]
pub struct FrenetCurve {
    pub s: Vec<f64>,
    pub points: Vec<V3>,
    pub tangents: Vec<V3>,
    pub normals: Vec<V3>,
    pub binormals: Vec<V3>,
}

/// Integrates the Frenet equations from the origin with frame `(e1, e2, e3)` at `s0`.
pub fn frenet_reconstruct(kappa: &AnalyticFn, tau: &AnalyticFn, range: (f64, f64), samples: usize) -> Result<FrenetCurve, SurfaceError> {
    let samples = samples.max(2);
    let sub = 8;
    let h = (range.1 - range.0) / ((samples - 1) * sub) as f64;
    type St = (V3, V3, V3, V3);
    let rhs = |s: f64, st: &St| -> Result<St, SurfaceError> {
        let (k, t) = (kappa.eval_real(s)?, tau.eval_real(s)?);
        Ok((st.1, st.2 * k, -st.1 * k + st.3 * t, -st.2 * t))
    };
    let axpy = |a: &St, h: f64, b: &St| (a.0 + b.0 * h, a.1 + b.1 * h, a.2 + b.2 * h, a.3 + b.3 * h);
    let mut st: St = (V3::zeros(), V3::x(), V3::y(), V3::z());
    let mut out = FrenetCurve { s: vec![], points: vec![], tangents: vec![], normals: vec![], binormals: vec![] };
    let mut s = range.0;
    for k in 0..samples {
        out.s.push(s);
        out.points.push(st.0);
        out.tangents.push(st.1);
        out.normals.push(st.2);
        out.binormals.push(st.3);
        if k + 1 == samples {
            break;
        }
        for _ in 0..sub {
            let k1 = rhs(s, &st)?;
            let k2 = rhs(s + 0.5 * h, &axpy(&st, 0.5 * h, &k1))?;
            let k3 = rhs(s + 0.5 * h, &axpy(&st, 0.5 * h, &k2))?;
            let k4 = rhs(s + h, &axpy(&st, h, &k3))?;
            let sum = (k1.0 + (k2.0 + k3.0) * 2.0 + k4.0, k1.1 + (k2.1 + k3.1) * 2.0 + k4.1, k1.2 + (k2.2 + k3.2) * 2.0 + k4.2, k1.3 + (k2.3 + k3.3) * 2.0 + k4.3);
            st = axpy(&st, h / 6.0, &sum);
            s += h;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcrustesFit {
    pub rotation: Matrix3<f64>,
    pub translation: V3,
    pub rms: f64,
    pub max: f64,
}

/// Proper rotation and translation minimising `sum |R a_k + t - b_k|^2`.
pub fn procrustes(a: &[V3], b: &[V3]) -> Result<ProcrustesFit, SurfaceError> {
    if a.len() != b.len() || a.len() < 3 {
        return Err(SurfaceError::TooFewPoints { need: 3, got: a.len().min(b.len()) });
    }
    let n = a.len() as f64;
    let ca = a.iter().sum::<V3>() / n;
    let cb = b.iter().sum::<V3>() / n;
    let mut h = Matrix3::zeros();
    for (p, q) in a.iter().zip(b) {
        h += (p - ca) * (q - cb).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let d = (vt.transpose() * u.transpose()).determinant().signum();
    let rotation = vt.transpose() * Matrix3::from_diagonal(&V3::new(1.0, 1.0, d)) * u.transpose();
    let translation = cb - rotation * ca;
    let mut sq = 0.0;
    let mut max: f64 = 0.0;
    for (p, q) in a.iter().zip(b) {
        let e = (rotation * p + translation - q).norm();
        sq += e * e;
        max = max.max(e);
    }
    Ok(ProcrustesFit { rotation, translation, rms: (sq / n).sqrt(), max })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SphereFit {
    pub center: V3,
    pub radius: f64,
    /// Largest `| |p - c| - r |`.
    pub max_residual: f64,
}

/// Algebraic least-squares sphere refined by Gauss-Newton on geometric distances.
pub fn sphere_fit(points: &[V3]) -> Result<SphereFit, SurfaceError> {
    if points.len() < 4 {
        return Err(SurfaceError::TooFewPoints { need: 4, got: points.len() });
    }
    let m = points.len();
    let a = DMatrix::from_fn(m, 4, |r, c| if c < 3 { 2.0 * points[r][c] } else { 1.0 });
    let rhs = DVector::from_fn(m, |r, _| points[r].norm_squared());
    let sol = a.svd(true, true).solve(&rhs, 1e-14).expect("svd computed with u and v");
    let mut c = V3::new(sol[0], sol[1], sol[2]);
    let mut r = (sol[3] + c.norm_squared()).max(0.0).sqrt();
    for _ in 0..20 {
        let jac = DMatrix::from_fn(m, 4, |row, col| {
            let d = points[row] - c;
            let len = d.norm().max(f64::MIN_POSITIVE);
            if col < 3 {
                -d[col] / len
            } else {
                -1.0
            }
        });
        let res = DVector::from_fn(m, |row, _| (points[row] - c).norm() - r);
        let step = jac.svd(true, true).solve(&(-res), 1e-14).expect("svd computed with u and v");
        c += V3::new(step[0], step[1], step[2]);
        r += step[3];
        if step.norm() < 1e-15 * (1.0 + r) {
            break;
        }
    }
    let max_residual = points.iter().map(|p| ((p - c).norm() - r).abs()).fold(0.0, f64::max);
    Ok(SphereFit { center: c, radius: r, max_residual })
}
