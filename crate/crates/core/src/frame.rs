//! Holomorphic frame integration on a grid and pointwise Iwasawa splitting.
//!
//! `dPhi = Phi eta` is integrated by RK4 from `Phi(z0) = I`, first along the
//! basepoint row and then up and down each column. Grid point `(x, y)` maps
//! to the potential coordinate `z = x - i y`; with the plus-loop Iwasawa
//! normalisation this orientation makes the surface satisfy
//! `f_w = i N x N_w` for the grid coordinate `w = x + i y`.

use crate::factorization::{iwasawa, FactorizationError, IwasawaConfig};
use crate::laurent::{mat_norm, LaurentMatrix, Mat2, C64};
use crate::potentials::{Potential, PotentialError};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("point ({i}, {j}) is unavailable: {reason}")]
    Unavailable { i: usize, j: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    /// Basepoint in grid coordinates.
    pub basepoint: (f64, f64),
}

/// Origin clamped into the rectangle.
pub fn default_basepoint(x_range: (f64, f64), y_range: (f64, f64)) -> (f64, f64) {
    (0f64.clamp(x_range.0, x_range.1), 0f64.clamp(y_range.0, y_range.1))
}

impl GridSpec {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize, basepoint: Option<(f64, f64)>) -> Result<Self, FrameError> {
        if !(x_range.1 > x_range.0) || !(y_range.1 > y_range.0) {
            return Err(FrameError::Grid(format!("empty rectangle {x_range:?} x {y_range:?}")));
        }
        if nx < 2 || ny < 2 {
            return Err(FrameError::Grid(format!("need at least 2 points per axis, got {nx} x {ny}")));
        }
        let basepoint = basepoint.unwrap_or_else(|| default_basepoint(x_range, y_range));
        let inside = |v: f64, r: (f64, f64)| v >= r.0 && v <= r.1;
        if !inside(basepoint.0, x_range) || !inside(basepoint.1, y_range) {
            return Err(FrameError::Grid(format!("basepoint {basepoint:?} outside the rectangle")));
        }
        Ok(Self { x_range, y_range, nx, ny, basepoint })
    }

    pub fn hx(&self) -> f64 {
        (self.x_range.1 - self.x_range.0) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_range.1 - self.y_range.0) / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.x_range.1
        } else {
            self.x_range.0 + i as f64 * self.hx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            self.y_range.1
        } else {
            self.y_range.0 + j as f64 * self.hy()
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Potential coordinate of the grid point `(x, y)`.
    pub fn param(x: f64, y: f64) -> C64 {
        C64::new(x, -y)
    }

    /// Grid row index closest to `y`.
    pub fn nearest_row(&self, y: f64) -> usize {
        (((y - self.y_range.0) / self.hy()).round().max(0.0) as usize).min(self.ny - 1)
    }

    pub fn nearest_column(&self, x: f64) -> usize {
        (((x - self.x_range.0) / self.hx()).round().max(0.0) as usize).min(self.nx - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameConfig {
    pub iwasawa: IwasawaConfig,
    /// RK4 steps per grid spacing.
    pub substeps: usize,
    /// Upper bound on the RK4 step length; more steps are taken on coarse grids.
    pub max_step: Option<f64>,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self { iwasawa: IwasawaConfig::default(), substeps: 4, max_step: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FramePoint {
    pub unitary: LaurentMatrix,
    pub plus: LaurentMatrix,
    pub rho: f64,
    pub residual: f64,
    /// Set when the splitting failed or exceeded its tolerance.
    pub failure: Option<String>,
}

impl FramePoint {
    pub fn is_valid(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameDiagnostics {
    pub max_tail_ratio: f64,
    pub max_residual: f64,
    pub failures: usize,
}

#[derive(Clone, Debug)]
pub struct FrameField {
    pub spec: GridSpec,
    pub config: FrameConfig,
    /// Row-major: index `j * nx + i`.
    pub points: Vec<FramePoint>,
    pub diagnostics: FrameDiagnostics,
}

impl FrameField {
    pub fn at(&self, i: usize, j: usize) -> &FramePoint {
        &self.points[self.spec.index(i, j)]
    }
}

/// One RK4 step of `Phi' = Phi eta(z)` over `dz`; returns the new value and the largest tail ratio.
fn rk4_step(pot: &Potential, phi: &LaurentMatrix, z: C64, dz: C64, n: usize) -> Result<(LaurentMatrix, f64), PotentialError> {
    let a1 = pot.eval(z)?.scale(dz);
    let a2 = pot.eval(z + dz * 0.5)?.scale(dz);
    let a3 = pot.eval(z + dz)?.scale(dz);
    let half = C64::new(0.5, 0.0);
    let k1 = phi.multiply(&a1, n);
    let k2 = phi.axpy(half, &k1).multiply(&a2, n);
    let k3 = phi.axpy(half, &k2).multiply(&a2, n);
    let k4 = phi.axpy(C64::new(1.0, 0.0), &k3).multiply(&a3, n);
    let sixth = C64::new(1.0 / 6.0, 0.0);
    let third = C64::new(1.0 / 3.0, 0.0);
    let out = phi.axpy(sixth, &k1).axpy(third, &k2).axpy(third, &k3).axpy(sixth, &k4);
    let tail = [&k1, &k2, &k3, &k4].iter().map(|k| k.tail()).fold(0.0, f64::max) / out.norm().max(1.0);
    let out = out.restrict(out.lo().max(-(n as i32)), out.hi().min(n as i32));
    Ok((out, tail))
}

/// Integrates from `start` at `from` to `to` in `steps` RK4 steps.
fn integrate_segment(pot: &Potential, start: &LaurentMatrix, from: C64, to: C64, steps: usize, n: usize) -> Result<(LaurentMatrix, f64), PotentialError> {
    if from == to {
        return Ok((start.clone(), 0.0));
    }
    let steps = steps.max(1);
    let dz = (to - from) / steps as f64;
    let mut phi = start.clone();
    let mut tail: f64 = 0.0;
    for k in 0..steps {
        let (next, t) = rk4_step(pot, &phi, from + dz * k as f64, dz, n)?;
        phi = next;
        tail = tail.max(t);
    }
    Ok((phi, tail))
}

/// Integrates through the waypoints, returning the value at each.
pub fn integrate_path(pot: &Potential, start: &LaurentMatrix, from: C64, waypoints: &[C64], cfg: &FrameConfig) -> Result<(Vec<LaurentMatrix>, f64), PotentialError> {
    let n = cfg.iwasawa.n_trunc;
    let mut out = Vec::with_capacity(waypoints.len());
    let mut phi = start.clone();
    let mut z = from;
    let mut tail: f64 = 0.0;
    for &w in waypoints {
        let steps = match cfg.max_step {
            Some(h) => cfg.substeps.max(((w - z).norm() / h).ceil() as usize),
            None => cfg.substeps,
        };
        let (next, t) = integrate_segment(pot, &phi, z, w, steps, n)?;
        phi = next;
        tail = tail.max(t);
        z = w;
        out.push(phi.clone());
    }
    Ok((out, tail))
}

/// Grid indices visited when walking from coordinate `start` to index `target` along an axis.
fn walk(start: f64, coord: impl Fn(usize) -> f64, count: usize, target: usize) -> Vec<usize> {
    if coord(target) >= start {
        (0..=target).filter(|&k| coord(k) > start).collect()
    } else {
        (target..count).rev().filter(|&k| coord(k) < start).collect()
    }
}

/// Values of `Phi` along the basepoint row at every grid column.
fn basepoint_row(pot: &Potential, spec: &GridSpec, cfg: &FrameConfig) -> Result<(Vec<LaurentMatrix>, f64), PotentialError> {
    let (xb, yb) = spec.basepoint;
    let z0 = GridSpec::param(xb, yb);
    let mut row = vec![LaurentMatrix::identity(); spec.nx];
    let mut tail: f64 = 0.0;
    for side in [walk(xb, |k| spec.x(k), spec.nx, spec.nx - 1), walk(xb, |k| spec.x(k), spec.nx, 0)] {
        let pts: Vec<C64> = side.iter().map(|&k| GridSpec::param(spec.x(k), yb)).collect();
        let (vals, t) = integrate_path(pot, &LaurentMatrix::identity(), z0, &pts, cfg)?;
        tail = tail.max(t);
        for (k, v) in side.into_iter().zip(vals) {
            row[k] = v;
        }
    }
    Ok((row, tail))
}

/// `Phi` on a whole column from its value on the basepoint row.
fn column(pot: &Potential, spec: &GridSpec, cfg: &FrameConfig, i: usize, start: &LaurentMatrix) -> Result<(Vec<LaurentMatrix>, f64), PotentialError> {
    let yb = spec.basepoint.1;
    let x = spec.x(i);
    let z0 = GridSpec::param(x, yb);
    let mut col = vec![start.clone(); spec.ny];
    let mut tail: f64 = 0.0;
    for side in [walk(yb, |k| spec.y(k), spec.ny, spec.ny - 1), walk(yb, |k| spec.y(k), spec.ny, 0)] {
        let pts: Vec<C64> = side.iter().map(|&k| GridSpec::param(x, spec.y(k))).collect();
        let (vals, t) = integrate_path(pot, start, z0, &pts, cfg)?;
        tail = tail.max(t);
        for (k, v) in side.into_iter().zip(vals) {
            col[k] = v;
        }
    }
    Ok((col, tail))
}

/// The holomorphic frame `Phi` at every grid point, row-major.
pub fn integrate_holomorphic_frame(pot: &Potential, spec: &GridSpec, cfg: &FrameConfig) -> Result<Vec<LaurentMatrix>, FrameError> {
    let (row, _) = basepoint_row(pot, spec, cfg)?;
    let cols: Vec<Vec<LaurentMatrix>> = (0..spec.nx)
        .into_par_iter()
        .map(|i| column(pot, spec, cfg, i, &row[i]).map(|c| c.0))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(spec.len());
    for j in 0..spec.ny {
        for col in &cols {
            out.push(col[j].clone());
        }
    }
    Ok(out)
}

fn split_point(phi: &LaurentMatrix, cfg: &IwasawaConfig) -> FramePoint {
    match iwasawa(phi, cfg) {
        Ok(r) => FramePoint { unitary: r.unitary_part, plus: r.plus_part, rho: r.rho, residual: r.residual.max(), failure: None },
        Err(FactorizationError::Residual(r)) => {
            let residual = r.residual.max();
            FramePoint {
                unitary: r.unitary_part,
                plus: r.plus_part,
                rho: r.rho,
                residual,
                failure: Some(format!("Iwasawa residual {residual:e} exceeds tolerance")),
            }
        }
        Err(e) => FramePoint {
            unitary: LaurentMatrix::identity(),
            plus: LaurentMatrix::identity(),
            rho: 1.0,
            residual: f64::INFINITY,
            failure: Some(e.to_string()),
        },
    }
}

/// Integrates `Phi` over the grid and splits it pointwise into `F B`.
pub fn integrate_frame(pot: &Potential, spec: &GridSpec, cfg: &FrameConfig) -> Result<FrameField, FrameError> {
    let (row, row_tail) = basepoint_row(pot, spec, cfg)?;
    let cols: Vec<(Vec<FramePoint>, f64)> = (0..spec.nx)
        .into_par_iter()
        .map(|i| {
            let (phis, tail) = column(pot, spec, cfg, i, &row[i])?;
            Ok((phis.iter().map(|p| split_point(p, &cfg.iwasawa)).collect(), tail))
        })
        .collect::<Result<_, PotentialError>>()?;
    let mut diagnostics = FrameDiagnostics { max_tail_ratio: row_tail, ..Default::default() };
    let mut grid: Vec<Vec<FramePoint>> = Vec::with_capacity(spec.nx);
    for (col, tail) in cols {
        diagnostics.max_tail_ratio = diagnostics.max_tail_ratio.max(tail);
        grid.push(col);
    }
    let mut points = Vec::with_capacity(spec.len());
    for j in 0..spec.ny {
        for col in grid.iter_mut() {
            let p = std::mem::replace(&mut col[j], split_point(&LaurentMatrix::identity(), &cfg.iwasawa));
            if p.is_valid() {
                diagnostics.max_residual = diagnostics.max_residual.max(p.residual);
            } else {
                diagnostics.failures += 1;
            }
            points.push(p);
        }
    }
    Ok(FrameField { spec: spec.clone(), config: *cfg, points, diagnostics })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathCheck {
    /// Largest relative coefficient defect over all probes.
    pub max_defect: f64,
    /// `(i, j, defect)` per probe.
    pub probes: Vec<(usize, usize, f64)>,
}

/// `Phi` at grid point `(i, j)` along the row-then-column path and along the column-then-row path.
pub fn both_paths(pot: &Potential, spec: &GridSpec, cfg: &FrameConfig, i: usize, j: usize) -> Result<(LaurentMatrix, LaurentMatrix), PotentialError> {
    let (xb, yb) = spec.basepoint;
    let z0 = GridSpec::param(xb, yb);
    let id = LaurentMatrix::identity();
    let xs = walk(xb, |k| spec.x(k), spec.nx, i);
    let ys = walk(yb, |k| spec.y(k), spec.ny, j);

    let mut first: Vec<C64> = xs.iter().map(|&k| GridSpec::param(spec.x(k), yb)).collect();
    first.extend(ys.iter().map(|&k| GridSpec::param(spec.x(i), spec.y(k))));
    let (a, _) = integrate_path(pot, &id, z0, &first, cfg)?;

    let mut second: Vec<C64> = ys.iter().map(|&k| GridSpec::param(xb, spec.y(k))).collect();
    second.extend(xs.iter().map(|&k| GridSpec::param(spec.x(k), spec.y(j))));
    let (b, _) = integrate_path(pot, &id, z0, &second, cfg)?;
    let last = |v: Vec<LaurentMatrix>| v.last().cloned().unwrap_or_else(LaurentMatrix::identity);
    Ok((last(a), last(b)))
}

/// Compares the two integration orders at `probes` random grid points.
pub fn path_independence_check(pot: &Potential, spec: &GridSpec, cfg: &FrameConfig, probes: usize, seed: u64) -> Result<PathCheck, FrameError> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let picks: Vec<(usize, usize)> = (0..probes).map(|_| (rng.gen_range(0..spec.nx), rng.gen_range(0..spec.ny))).collect();
    let results: Vec<(usize, usize, f64)> = picks
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = both_paths(pot, spec, cfg, i, j)?;
            Ok((i, j, a.distance(&b) / a.norm().max(1.0)))
        })
        .collect::<Result<_, PotentialError>>()?;
    let max_defect = results.iter().map(|r| r.2).fold(0.0, f64::max);
    Ok(PathCheck { max_defect, probes: results })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpSample {
    /// `lambda^1` coefficient of the `dw` part of `F^{-1} dF`.
    pub up: Mat2,
    /// `| |u12| - |u21| |`, the distance from the rank-one locus.
    pub margin: f64,
}

fn neighbour(field: &FrameField, i: usize, j: usize) -> Result<&LaurentMatrix, FrameError> {
    let p = field.at(i, j);
    match &p.failure {
        None => Ok(&p.unitary),
        Some(r) => Err(FrameError::Unavailable { i, j, reason: r.clone() }),
    }
}

/// `U_p` at `(i, j)` from finite differences of `F`; one-sided on the boundary when `allow_edge`.
pub(crate) fn up_at(field: &FrameField, i: usize, j: usize, allow_edge: bool) -> Result<UpSample, FrameError> {
    let spec = &field.spec;
    let interior = i > 0 && j > 0 && i + 1 < spec.nx && j + 1 < spec.ny;
    if !interior && !allow_edge {
        return Err(FrameError::Unavailable { i, j, reason: "boundary point has no central difference".into() });
    }
    let (xa, xb) = (i.saturating_sub(1), (i + 1).min(spec.nx - 1));
    let (ya, yb) = (j.saturating_sub(1), (j + 1).min(spec.ny - 1));
    let fx = neighbour(field, xb, j)?
        .sub(neighbour(field, xa, j)?)
        .scale(C64::new(1.0 / (spec.hx() * (xb - xa) as f64), 0.0));
    let fy = neighbour(field, i, yb)?
        .sub(neighbour(field, i, ya)?)
        .scale(C64::new(1.0 / (spec.hy() * (yb - ya) as f64), 0.0));
    let dw = fx.axpy(C64::new(0.0, -1.0), &fy).scale(C64::new(0.5, 0.0));
    let f = neighbour(field, i, j)?;
    let n = field.config.iwasawa.n_trunc;
    let alpha = f.circle_adjoint().multiply(&dw, 2 * n + 2);
    let up = alpha.coeff(1);
    let margin = (up[(0, 1)].norm() - up[(1, 0)].norm()).abs();
    Ok(UpSample { up, margin })
}

pub fn extract_up(field: &FrameField, i: usize, j: usize) -> Result<UpSample, FrameError> {
    up_at(field, i, j, false)
}

/// Largest coefficient norm, used to report loop sizes.
pub fn loop_size(l: &LaurentMatrix) -> f64 {
    l.coeffs().iter().map(mat_norm).fold(0.0, f64::max)
}
