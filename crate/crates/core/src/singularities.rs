//! Classification of singular points from Cauchy data, singular-locus tracing and branch points.

use crate::analytic::{AnalyticFn, EvalError};
use crate::frame::GridSpec;
use crate::laurent::C64;
use crate::surface::{stencil, Frontal, V3};
use nalgebra::{Matrix3x2, Vector2};
use std::collections::HashMap;

/// Zero tolerance for symbolically evaluated quantities.
pub const CLASS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SingularityLabel {
    Regular,
    BranchPoint,
    CuspidalEdge,
    Swallowtail,
    CuspidalButterfly,
    CuspidalBeaks,
    ConePoint,
    DegenerateUnclassified,
}

impl SingularityLabel {
    pub fn name(self) -> &'static str {
        match self {
            SingularityLabel::Regular => "regular",
            SingularityLabel::BranchPoint => "branch_point",
            SingularityLabel::CuspidalEdge => "cuspidal_edge",
            SingularityLabel::Swallowtail => "swallowtail",
            SingularityLabel::CuspidalButterfly => "cuspidal_butterfly",
            SingularityLabel::CuspidalBeaks => "cuspidal_beaks",
            SingularityLabel::ConePoint => "cone_point",
            SingularityLabel::DegenerateUnclassified => "degenerate_unclassified",
        }
    }
}

/// A label together with the criterion that produced it and every quantity it used.
#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub label: SingularityLabel,
    pub criterion: String,
    pub diagnostics: Vec<(String, f64)>,
    pub note: Option<String>,
}

fn is_zero(v: f64) -> bool {
    v.abs() <= CLASS_TOL
}

/// Labels a point of the singular curve of a frontal with regular singular curve `(kappa, tau)`.
pub fn classify_regular_curve_point(kappa: &AnalyticFn, tau: &AnalyticFn, x0: f64) -> Result<Classification, EvalError> {
    let k = kappa.eval_real(x0)?;
    let mut diagnostics = vec![("kappa".to_string(), k)];
    if !is_zero(k) {
        return Ok(Classification { label: SingularityLabel::CuspidalEdge, criterion: "kappa(x0) != 0".into(), diagnostics, note: None });
    }
    let dk = kappa.derivative().eval_real(x0)?;
    let t = tau.eval_real(x0)?;
    diagnostics.push(("kappa'".into(), dk));
    diagnostics.push(("tau".into(), t));
    if !is_zero(dk) && !is_zero(t) {
        return Ok(Classification {
            label: SingularityLabel::CuspidalBeaks,
            criterion: "kappa(x0) = 0, kappa'(x0) != 0, tau(x0) != 0".into(),
            diagnostics,
            note: None,
        });
    }
    let note = if is_zero(t) && !is_zero(dk) {
        "observed shape is cone-like"
    } else if !is_zero(t) {
        "observed shape is two cuspidal edges crossing"
    } else {
        "no observed shape recorded"
    };
    Ok(Classification {
        label: SingularityLabel::DegenerateUnclassified,
        criterion: "kappa(x0) = 0 without the beaks conditions".into(),
        diagnostics,
        note: Some(note.into()),
    })
}

/// Semi-decision of `b == 0`: eight Taylor coefficients at `x0` and samples on `[x0 - 1, x0 + 1]`.
pub fn vanishes_identically(b: &AnalyticFn, x0: f64) -> Result<bool, EvalError> {
    if b.is_zero() {
        return Ok(true);
    }
    let mut fact = 1.0;
    let mut d = b.clone();
    for k in 0..8 {
        if k > 0 {
            fact *= k as f64;
            d = d.derivative();
        }
        if !is_zero(d.eval_real(x0)? / fact) {
            return Ok(false);
        }
    }
    for k in 0..=32 {
        let x = x0 - 1.0 + k as f64 / 16.0;
        match b.eval(C64::new(x, 0.0)) {
            Ok(v) if v.norm() > CLASS_TOL => return Ok(false),
            _ => {}
        }
    }
    Ok(true)
}

/// Labels a point of a general singular curve with data `(b, c)`.
pub fn classify_general_curve_point(b: &AnalyticFn, c: &AnalyticFn, x0: f64) -> Result<Classification, EvalError> {
    let cv = c.eval_real(x0)?;
    let b0 = b.eval_real(x0)?;
    let mut diagnostics = vec![("c".to_string(), cv), ("b".to_string(), b0)];
    if is_zero(cv) {
        return Ok(Classification {
            label: SingularityLabel::DegenerateUnclassified,
            criterion: "c(x0) = 0".into(),
            diagnostics,
            note: Some("the singular point is degenerate".into()),
        });
    }
    if vanishes_identically(b, x0)? {
        return Ok(Classification { label: SingularityLabel::ConePoint, criterion: "b == 0".into(), diagnostics, note: None });
    }
    if !is_zero(b0) {
        return Ok(Classification { label: SingularityLabel::CuspidalEdge, criterion: "b(x0) != 0".into(), diagnostics, note: None });
    }
    let b1 = b.derivative().eval_real(x0)?;
    diagnostics.push(("b'".into(), b1));
    if !is_zero(b1) {
        return Ok(Classification { label: SingularityLabel::Swallowtail, criterion: "b(x0) = 0, b'(x0) != 0".into(), diagnostics, note: None });
    }
    let b2 = b.nth_derivative(2).eval_real(x0)?;
    diagnostics.push(("b''".into(), b2));
    if !is_zero(b2) {
        return Ok(Classification {
            label: SingularityLabel::CuspidalButterfly,
            criterion: "b(x0) = b'(x0) = 0, b''(x0) != 0".into(),
            diagnostics,
            note: None,
        });
    }
    Ok(Classification {
        label: SingularityLabel::DegenerateUnclassified,
        criterion: "b(x0) = b'(x0) = b''(x0) = 0".into(),
        diagnostics,
        note: None,
    })
}

/// Front bifurcation labels, including ones produced elsewhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BifurcationLabel {
    Internal(SingularityLabel),
    CuspidalLips,
    D4Plus,
    D4Minus,
}

/// Whether the label can occur on a spherical frontal.
pub fn admissible_bifurcation_filter(label: BifurcationLabel) -> bool {
    matches!(label, BifurcationLabel::Internal(_))
}

/// `<f_x x f_y, N>` at valid points by finite differences (one-sided at edges and masks), NaN where a direction has no valid neighbour.
pub fn degeneracy_values(spec: &GridSpec, positions: &[V3], normals: &[V3], valid: &[bool]) -> Vec<f64> {
    let ok = |i: usize, j: usize| valid[spec.index(i, j)];
    let p = |i: usize, j: usize| positions[spec.index(i, j)];
    // central difference where both neighbours exist, one-sided at edges and next to masked points
    let diff = |lo: Option<(usize, usize)>, hi: Option<(usize, usize)>, c: (usize, usize), h: f64| -> Option<V3> {
        let lo = lo.filter(|&(a, b)| ok(a, b));
        let hi = hi.filter(|&(a, b)| ok(a, b));
        match (lo, hi) {
            (Some(l), Some(u)) => Some((p(u.0, u.1) - p(l.0, l.1)) / (2.0 * h)),
            (None, Some(u)) => Some((p(u.0, u.1) - p(c.0, c.1)) / h),
            (Some(l), None) => Some((p(c.0, c.1) - p(l.0, l.1)) / h),
            (None, None) => None,
        }
    };
    let mut out = vec![f64::NAN; spec.len()];
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            if !ok(i, j) {
                continue;
            }
            let left = i.checked_sub(1).map(|a| (a, j));
            let right = (i + 1 < spec.nx).then_some((i + 1, j));
            let down = j.checked_sub(1).map(|b| (i, b));
            let up = (j + 1 < spec.ny).then_some((i, j + 1));
            if let (Some(fx), Some(fy)) = (diff(left, right, (i, j), spec.hx()), diff(down, up, (i, j), spec.hy())) {
                out[spec.index(i, j)] = fx.cross(&fy).dot(&normals[spec.index(i, j)]);
            }
        }
    }
    out
}

pub fn degeneracy_field(frontal: &Frontal) -> Vec<f64> {
    frontal.degeneracy.clone()
}

/// Unit kernel direction of the finite-difference `df` at an interior point, with the smallest singular value.
pub fn null_direction(frontal: &Frontal, i: usize, j: usize) -> Option<(Vector2<f64>, f64)> {
    if !frontal.has_stencil(i, j) {
        return None;
    }
    let s = stencil(&frontal.positions, &frontal.spec, i, j);
    let df = Matrix3x2::from_columns(&[s.x, s.y]);
    let svd = df.svd(false, true);
    let vt = svd.v_t?;
    let k = if svd.singular_values[0] < svd.singular_values[1] { 0 } else { 1 };
    Some((Vector2::new(vt[(k, 0)], vt[(k, 1)]), svd.singular_values[k]))
}

pub type Polyline = Vec<(f64, f64)>;

/// Zero contour of `values` on the grid by marching squares; cells touching NaN are skipped.
pub fn trace_zero_contour(spec: &GridSpec, values: &[f64]) -> Vec<Polyline> {
    // crossing points are keyed by grid edge: (horizontal?, i, j)
    type Edge = (bool, usize, usize);
    let val = |i: usize, j: usize| values[spec.index(i, j)];
    let pos = |v: f64| v >= 0.0;
    let point = |e: Edge| -> (f64, f64) {
        let (a, b) = if e.0 { ((e.1, e.2), (e.1 + 1, e.2)) } else { ((e.1, e.2), (e.1, e.2 + 1)) };
        let (va, vb) = (val(a.0, a.1), val(b.0, b.1));
        let t = if va == vb { 0.5 } else { va / (va - vb) };
        let (xa, ya) = (spec.x(a.0), spec.y(a.1));
        let (xb, yb) = (spec.x(b.0), spec.y(b.1));
        (xa + t * (xb - xa), ya + t * (yb - ya))
    };
    let mut adj: HashMap<Edge, Vec<Edge>> = HashMap::new();
    let mut link = |a: Edge, b: Edge| {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    };
    for j in 0..spec.ny.saturating_sub(1) {
        for i in 0..spec.nx.saturating_sub(1) {
            let c = [val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)];
            if c.iter().any(|v| !v.is_finite()) {
                continue;
            }
            // edges in cyclic order: bottom, right, top, left
            let edges: [Edge; 4] = [(true, i, j), (false, i + 1, j), (true, i, j + 1), (false, i, j)];
            let crossing: Vec<usize> = (0..4).filter(|&k| pos(c[k]) != pos(c[(k + 1) % 4])).collect();
            match crossing.len() {
                2 => link(edges[crossing[0]], edges[crossing[1]]),
                4 => {
                    let centre = c.iter().sum::<f64>() / 4.0;
                    // pair each crossing with the neighbour that keeps the centre's sign connected
                    if pos(centre) == pos(c[0]) {
                        link(edges[1], edges[2]);
                        link(edges[3], edges[0]);
                    } else {
                        link(edges[0], edges[1]);
                        link(edges[2], edges[3]);
                    }
                }
                _ => {}
            }
        }
    }
    let mut keys: Vec<Edge> = adj.keys().copied().collect();
    keys.sort();
    let mut visited: HashMap<Edge, bool> = HashMap::new();
    let mut out = Vec::new();
    let walk = |start: Edge, visited: &mut HashMap<Edge, bool>| -> Polyline {
        let mut line = vec![point(start)];
        visited.insert(start, true);
        let mut cur = start;
        loop {
            let next = adj[&cur].iter().copied().find(|e| !visited.contains_key(e));
            match next {
                Some(n) => {
                    visited.insert(n, true);
                    line.push(point(n));
                    cur = n;
                }
                None => {
                    if adj[&cur].contains(&start) && line.len() > 2 {
                        line.push(point(start));
                    }
                    return line;
                }
            }
        }
    };
    // open polylines start at endpoints, then closed loops
    for &k in &keys {
        if adj[&k].len() == 1 && !visited.contains_key(&k) {
            out.push(walk(k, &mut visited));
        }
    }
    for &k in &keys {
        if !visited.contains_key(&k) {
            out.push(walk(k, &mut visited));
        }
    }
    out
}

pub fn trace_singular_locus(frontal: &Frontal) -> Vec<Polyline> {
    trace_zero_contour(&frontal.spec, &frontal.degeneracy)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchPoint {
    pub z: C64,
    pub polished: bool,
    /// `|a| + |b|` at the reported point.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchReport {
    pub points: Vec<BranchPoint>,
    /// `|a| = |b| != 0` at the basepoint.
    pub basepoint_rank_one: bool,
    pub basepoint_moduli: (f64, f64),
    /// Zero contour of `|a| - |b|` in `(x, y)` with `z = x - i y`; heuristic away from the basepoint.
    pub rank_one_locus: Vec<Polyline>,
}

fn newton(f: &AnalyticFn, mut z: C64) -> Option<C64> {
    let d = f.derivative();
    for _ in 0..50 {
        let (v, dv) = (f.eval(z).ok()?, d.eval(z).ok()?);
        if dv.norm() == 0.0 {
            return None;
        }
        let step = v / dv;
        z -= step;
        if step.norm() < 1e-14 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    None
}

/// Common zeros of `(a, b)` over the grid rectangle, found by a scan for local minima of
/// `|a| + |b|` followed by Newton polishing.
pub fn branch_points(a: &AnalyticFn, b: &AnalyticFn, spec: &GridSpec) -> Result<BranchReport, EvalError> {
    let param = |i: usize, j: usize| GridSpec::param(spec.x(i), spec.y(j));
    let mut size = vec![f64::INFINITY; spec.len()];
    let mut diff = vec![f64::NAN; spec.len()];
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let z = param(i, j);
            if let (Ok(av), Ok(bv)) = (a.eval(z), b.eval(z)) {
                size[spec.index(i, j)] = av.norm() + bv.norm();
                diff[spec.index(i, j)] = av.norm() - bv.norm();
            }
        }
    }
    let scale = size.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max).max(1.0);
    let h = spec.hx().hypot(spec.hy());
    let mut points: Vec<BranchPoint> = Vec::new();
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let v = size[spec.index(i, j)];
            let is_min = (j.saturating_sub(1)..=(j + 1).min(spec.ny - 1))
                .all(|bj| (i.saturating_sub(1)..=(i + 1).min(spec.nx - 1)).all(|bi| size[spec.index(bi, bj)] >= v));
            if !is_min || !v.is_finite() || v > 0.5 * scale {
                continue;
            }
            let start = param(i, j);
            let driver = if a.is_zero() { b } else { a };
            let polished = newton(driver, start).filter(|z| (z - start).norm() < 2.0 * h);
            let (z, ok) = match polished {
                Some(z) => (z, true),
                None => (start, false),
            };
            let residual = a.eval(z)?.norm() + b.eval(z)?.norm();
            if ok && residual > 1e-8 * scale {
                continue;
            }
            if !ok && residual > h * scale {
                continue;
            }
            if points.iter().any(|p| (p.z - z).norm() < 0.5 * h) {
                continue;
            }
            points.push(BranchPoint { z, polished: ok, residual });
        }
    }
    let (bx, by) = spec.basepoint;
    let z0 = GridSpec::param(bx, by);
    let (ma, mb) = (a.eval(z0)?.norm(), b.eval(z0)?.norm());
    Ok(BranchReport {
        points,
        basepoint_rank_one: (ma - mb).abs() <= CLASS_TOL && ma > CLASS_TOL,
        basepoint_moduli: (ma, mb),
        rank_one_locus: trace_zero_contour(spec, &diff),
    })
}
