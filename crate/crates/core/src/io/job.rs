//! End-to-end job execution: potential, frame field, frontal, oracles, classification and export.

use super::config::{ConfigError, JobKind, JobSpec, OracleName};
use super::mesh::export_mesh;
use super::report::{
    Artifacts, BranchEntry, BranchSummary, ConeSummary, IwasawaStats, LocusSummary, OracleResult, RunReport, SingularityEntry, Status,
    Timing, REPORT_VERSION,
};
use crate::analytic::AnalyticFn;
use crate::frame::{integrate_frame, path_independence_check, GridSpec};
use crate::potentials::CauchyData;
use crate::singularities::{
    branch_points, classify_general_curve_point, classify_regular_curve_point, trace_singular_locus, Classification, CLASS_TOL,
};
use crate::surface::{build_frontal, check_frontal, frenet_reconstruct, gauss_mean_curvature, procrustes, Frontal, SurfaceKind, V3};
use std::time::Instant;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verb {
    /// Oracles, classification, mesh and report.
    Solve,
    /// Classification and singular locus only.
    Classify,
    /// Oracles only, no mesh.
    Verify,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Solve => "solve",
            Verb::Classify => "classify",
            Verb::Verify => "verify",
        }
    }
}

#[derive(Debug, Error)]
pub enum JobError {
    #[error("input: {0}")]
    Input(#[from] ConfigError),
    #[error("{stage}: {message}")]
    Numerical { stage: &'static str, message: String },
    #[error("writing {path}: {message}")]
    Output { path: String, message: String },
}

impl JobError {
    /// Process exit code: 2 for input errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            JobError::Input(_) | JobError::Output { .. } => 2,
            JobError::Numerical { .. } => 3,
        }
    }
}

fn numerical(stage: &'static str, e: impl std::fmt::Display) -> JobError {
    JobError::Numerical { stage, message: e.to_string() }
}

fn oracle(name: &str, value: f64, tolerance: f64, detail: String) -> OracleResult {
    let status = if value <= tolerance { Status::Pass } else { Status::Fail };
    OracleResult { name: name.into(), status, value, tolerance, detail }
}

fn skipped(name: &str, tolerance: f64, detail: &str) -> OracleResult {
    OracleResult { name: name.into(), status: Status::Skipped, value: f64::NAN, tolerance, detail: detail.into() }
}

fn frontal_oracle(spec: &JobSpec, fr: &Frontal) -> OracleResult {
    let c = check_frontal(fr);
    let tol = spec.frontal_tol();
    if c.normal_defect > 1e-10 {
        return oracle("frontal", f64::INFINITY, tol, format!("unit normal defect {:e}", c.normal_defect));
    }
    let value = c.frontal_defect.max(c.defining_residual);
    oracle(
        "frontal",
        value,
        tol,
        format!("<df, N> {:.3e}, defining equation {:.3e} over {} interior points", c.frontal_defect, c.defining_residual, c.interior_points),
    )
}

fn curvature_oracle(spec: &JobSpec, fr: &Frontal) -> OracleResult {
    let tol = spec.numerics.curvature_tol;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for j in 1..fr.spec.ny.saturating_sub(1) {
        for i in 1..fr.spec.nx.saturating_sub(1) {
            if let Ok((k, h)) = gauss_mean_curvature(fr, i, j, spec.numerics.reg_floor) {
                let err = match fr.kind {
                    SurfaceKind::Spherical => (k - 1.0).abs(),
                    SurfaceKind::Cmc => (h.abs() - 0.5).abs(),
                };
                worst = worst.max(err);
                count += 1;
            }
        }
    }
    if count == 0 {
        return skipped("curvature", tol, "no interior regular points");
    }
    let what = match fr.kind {
        SurfaceKind::Spherical => "|K - 1|",
        SurfaceKind::Cmc => "||H| - 1/2|",
    };
    oracle("curvature", worst, tol, format!("max {what} over {count} regular points"))
}

fn curve_oracle(spec: &JobSpec, grid: &GridSpec, fr: &Frontal) -> OracleResult {
    let tol = spec.numerics.curve_tol;
    let (kappa, tau) = match spec.build_potential().ok().map(|p| p.0.data().clone()) {
        Some(CauchyData::Geodesic { kappa, tau }) | Some(CauchyData::Singular { kappa, tau }) => (kappa, tau),
        _ => return skipped("curve", tol, "no Frenet data for this kind"),
    };
    if fr.kind != SurfaceKind::Spherical {
        return skipped("curve", tol, "curve data describe the spherical frontal");
    }
    let j0 = grid.nearest_row(0.0);
    if grid.y(j0).abs() > 1e-12 * (1.0 + grid.hy()) {
        return skipped("curve", tol, "grid has no row at y = 0");
    }
    if (0..grid.nx).any(|i| !fr.valid[grid.index(i, j0)]) {
        return oracle("curve", f64::INFINITY, tol, "masked points on y = 0".into());
    }
    let curve = match frenet_reconstruct(&kappa, &tau, (grid.x(0), grid.x(grid.nx - 1)), grid.nx) {
        Ok(c) => c,
        Err(e) => return oracle("curve", f64::INFINITY, tol, format!("Frenet oracle failed: {e}")),
    };
    let row: Vec<V3> = (0..grid.nx).map(|i| fr.position(i, j0)).collect();
    match procrustes(&curve.points, &row) {
        Ok(fit) => oracle("curve", fit.max, tol, format!("Procrustes residual on y = 0 (rms {:.3e})", fit.rms)),
        Err(e) => skipped("curve", tol, &e.to_string()),
    }
}

/// Zeros of `f` on `[a, b]`: sign changes refined by bisection and samples at which `|f| <= CLASS_TOL`.
pub fn real_zeros(f: &AnalyticFn, a: f64, b: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    let xs: Vec<f64> = (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect();
    let vals: Vec<Option<f64>> = xs.iter().map(|&x| f.eval_real(x).ok()).collect();
    let mut out: Vec<f64> = Vec::new();
    let push = |x: f64, out: &mut Vec<f64>| {
        if !out.iter().any(|y| (x - y).abs() < (b - a) / n as f64) {
            out.push(x);
        }
    };
    for k in 0..n {
        if let Some(v) = vals[k] {
            if v.abs() <= CLASS_TOL {
                push(xs[k], &mut out);
            }
        }
        if k + 1 < n {
            if let (Some(u), Some(v)) = (vals[k], vals[k + 1]) {
                if u * v < 0.0 && u.abs() > CLASS_TOL && v.abs() > CLASS_TOL {
                    let (mut lo, mut hi, mut flo) = (xs[k], xs[k + 1], u);
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        let Ok(fm) = f.eval_real(mid) else { break };
                        if fm == 0.0 || hi - lo < 1e-15 * (1.0 + mid.abs()) {
                            lo = mid;
                            hi = mid;
                            break;
                        }
                        if fm * flo < 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                            flo = fm;
                        }
                    }
                    push(0.5 * (lo + hi), &mut out);
                }
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    out
}

fn entry(x: f64, c: Classification) -> SingularityEntry {
    SingularityEntry {
        x,
        y: 0.0,
        label: c.label.name().into(),
        criterion: c.criterion,
        note: c.note,
        diagnostics: c.diagnostics.into_iter().collect(),
    }
}

fn classify(spec: &JobSpec, grid: &GridSpec, data: &CauchyData) -> Result<(Vec<SingularityEntry>, Option<BranchSummary>), JobError> {
    let (x0, x1) = (grid.x(0), grid.x(grid.nx - 1));
    let points = |f: &AnalyticFn| -> Vec<f64> {
        if let Some(p) = &spec.output.classify_at {
            return p.clone();
        }
        let mut z = real_zeros(f, x0, x1, 401);
        if z.is_empty() {
            z.push(0.5 * (x0 + x1));
        }
        z
    };
    let mut out = Vec::new();
    match data {
        CauchyData::Singular { kappa, tau } => {
            for x in points(kappa) {
                out.push(entry(x, classify_regular_curve_point(kappa, tau, x).map_err(|e| numerical("classify", e))?));
            }
        }
        CauchyData::SingularGeneral { b, c } => {
            for x in points(b) {
                out.push(entry(x, classify_general_curve_point(b, c, x).map_err(|e| numerical("classify", e))?));
            }
        }
        CauchyData::Normalized { a, b } => {
            let r = branch_points(a, b, grid).map_err(|e| numerical("branch points", e))?;
            let summary = BranchSummary {
                points: r.points.iter().map(|p| BranchEntry { re: p.z.re, im: p.z.im, polished: p.polished, residual: p.residual }).collect(),
                basepoint_rank_one: r.basepoint_rank_one,
                basepoint_moduli: [r.basepoint_moduli.0, r.basepoint_moduli.1],
                rank_one_polylines: r.rank_one_locus.len(),
            };
            for p in &r.points {
                // grid coordinates of z = x - i y
                out.push(SingularityEntry {
                    x: p.z.re,
                    y: -p.z.im,
                    label: crate::singularities::SingularityLabel::BranchPoint.name().into(),
                    criterion: "a(z) = b(z) = 0".into(),
                    note: (!p.polished).then(|| "root polishing did not converge".to_string()),
                    diagnostics: [("residual".to_string(), p.residual)].into_iter().collect(),
                });
            }
            return Ok((out, Some(summary)));
        }
        _ => {}
    }
    Ok((out, None))
}

fn locus_summary(fr: &Frontal) -> LocusSummary {
    let lines = trace_singular_locus(fr);
    let length = lines
        .iter()
        .map(|l| l.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).sum::<f64>())
        .sum();
    LocusSummary { polylines: lines.len(), vertices: lines.iter().map(Vec::len).sum(), length }
}

/// Result of a run: the report and where it was written.
pub struct JobOutput {
    pub report: RunReport,
    pub frontal: Frontal,
}

impl JobOutput {
    /// 0 when every oracle passed or was skipped, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.status == Status::Pass {
            0
        } else {
            1
        }
    }
}

pub fn run_job(spec: &JobSpec, verb: Verb) -> Result<JobOutput, JobError> {
    let start = Instant::now();
    let (pot, cone) = spec.build_potential()?;
    let grid = spec.grid_spec()?;
    let cfg = spec.numerics.frame();

    let t = Instant::now();
    let field = integrate_frame(&pot, &grid, &cfg).map_err(|e| numerical("frame", e))?;
    let frame_seconds = t.elapsed().as_secs_f64();
    if field.diagnostics.failures == grid.len() {
        return Err(numerical("iwasawa", "the splitting failed at every grid point"));
    }
    let fr = build_frontal(&field, spec.surface());
    if !fr.valid.iter().any(|v| *v) {
        return Err(numerical("surface", "no grid point produced a valid Sym value"));
    }

    let mut warnings: Vec<String> = pot.warnings().to_vec();
    if field.diagnostics.failures > 0 {
        warnings.push(format!("{} grid points failed the splitting and are masked", field.diagnostics.failures));
    }

    let mut oracles = Vec::new();
    if verb != Verb::Classify {
        for name in &spec.output.oracles {
            oracles.push(match name {
                OracleName::Frontal => frontal_oracle(spec, &fr),
                OracleName::Curvature => curvature_oracle(spec, &fr),
                OracleName::Flatness => {
                    let tol = spec.numerics.flatness_tol;
                    let check = path_independence_check(&pot, &grid, &cfg, spec.numerics.flatness_probes, spec.numerics.seed)
                        .map_err(|e| numerical("flatness", e))?;
                    oracle("flatness", check.max_defect, tol, format!("relative path defect over {} probes", check.probes.len()))
                }
                OracleName::Curve => curve_oracle(spec, &grid, &fr),
            });
        }
    }

    let (singularities, branch) = if verb == Verb::Verify { (Vec::new(), None) } else { classify(spec, &grid, pot.data())? };
    let locus = if verb == Verb::Verify { LocusSummary::default() } else { locus_summary(&fr) };

    let mut artifacts = Artifacts::default();
    if verb == Verb::Solve {
        if let Some(path) = &spec.output.mesh {
            let full = spec.resolve(path);
            let side = export_mesh(&fr, &full, spec.output.color, spec.numerics.reg_floor)
                .map_err(|e| JobError::Output { path: full.display().to_string(), message: e.to_string() })?;
            artifacts.mesh = Some(path.clone());
            artifacts.sidecar = side.file_name().map(|f| f.to_string_lossy().into_owned());
        }
    }

    let status = if oracles.iter().any(|o| o.status == Status::Fail) { Status::Fail } else { Status::Pass };
    let report = RunReport {
        report_version: REPORT_VERSION,
        verb: verb.name().into(),
        status,
        kind: spec.potential.kind.name().into(),
        surface: fr.kind.name().into(),
        warnings,
        iwasawa: IwasawaStats {
            points: grid.len(),
            failures: field.diagnostics.failures,
            max_residual: field.diagnostics.max_residual,
            max_tail_ratio: field.diagnostics.max_tail_ratio,
        },
        locus,
        artifacts,
        cone: cone.map(|c| ConeSummary { strictly_convex: c.strictly_convex, c_min: c.c_range.0, c_max: c.c_range.1, closure_defect: c.closure_defect }),
        branch,
        oracles,
        singularities,
        config: spec.clone(),
        timing: Timing { frame_seconds, total_seconds: start.elapsed().as_secs_f64() },
    };
    if let Some(path) = &spec.output.report {
        let full = spec.resolve(path);
        std::fs::write(&full, report.to_toml()).map_err(|e| JobError::Output { path: full.display().to_string(), message: e.to_string() })?;
    }
    debug_assert!(spec.potential.kind != JobKind::Cone || report.cone.is_some());
    Ok(JobOutput { report, frontal: fr })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> AnalyticFn {
        AnalyticFn::parse(s).unwrap()
    }

    #[test]
    fn zeros_of_simple_functions() {
        assert_eq!(real_zeros(&p("s"), -1.0, 1.0, 401), vec![0.0]);
        let z = real_zeros(&p("1-s^4"), -1.5, 1.5, 401);
        assert_eq!(z.len(), 2);
        assert!((z[0] + 1.0).abs() < 1e-14 && (z[1] - 1.0).abs() < 1e-14);
        assert_eq!(real_zeros(&p("s^2"), -1.0, 1.0, 401), vec![0.0]);
        assert!(real_zeros(&p("1+s^2"), -1.0, 1.0, 401).is_empty());
        let z = real_zeros(&p("sin(s)"), 0.5, 7.0, 101);
        assert!((z[0] - std::f64::consts::PI).abs() < 1e-14 && (z[1] - std::f64::consts::TAU).abs() < 1e-14);
    }
}
