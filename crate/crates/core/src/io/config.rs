//! Job files: TOML with sections `[potential]`, `[grid]`, `[numerics]`, `[output]`.
//!
//! Unknown keys are rejected. Expression values are strings in the grammar of
//! [`crate::analytic`]. Relative output paths are resolved against the job file's directory.

use crate::analytic::AnalyticFn;
use crate::factorization::IwasawaConfig;
use crate::frame::{FrameConfig, GridSpec};
use crate::potentials::{self, ConeReport, Potential};
use crate::surface::SurfaceKind;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{key}: {message}")]
    Validation { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation { key: key.to_string(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Normalized,
    GeodesicGcp,
    GeneralGcp,
    SingularGcp,
    SingularGcpGeneral,
    Cone,
    CmcGcp,
}

impl JobKind {
    pub fn name(self) -> &'static str {
        match self {
            JobKind::Normalized => "normalized",
            JobKind::GeodesicGcp => "geodesic_gcp",
            JobKind::GeneralGcp => "general_gcp",
            JobKind::SingularGcp => "singular_gcp",
            JobKind::SingularGcpGeneral => "singular_gcp_general",
            JobKind::Cone => "cone",
            JobKind::CmcGcp => "cmc_gcp",
        }
    }

    /// Expression keys the kind requires, in constructor order.
    pub fn expression_keys(self) -> &'static [&'static str] {
        match self {
            JobKind::Normalized => &["a", "b"],
            JobKind::GeodesicGcp | JobKind::SingularGcp => &["kappa", "tau"],
            JobKind::GeneralGcp | JobKind::CmcGcp => &["kappa_n", "kappa_g", "mu"],
            JobKind::SingularGcpGeneral => &["b", "c"],
            JobKind::Cone => &["c"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialBlock {
    pub kind: JobKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_n: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_g: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<String>,
    /// Period of the normal curve of a cone, checked for closure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// Interval for admissibility checks; defaults to the grid's x range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
}

impl PotentialBlock {
    fn field(&self, key: &str) -> Option<&String> {
        match key {
            "a" => self.a.as_ref(),
            "b" => self.b.as_ref(),
            "c" => self.c.as_ref(),
            "kappa" => self.kappa.as_ref(),
            "tau" => self.tau.as_ref(),
            "kappa_n" => self.kappa_n.as_ref(),
            "kappa_g" => self.kappa_g.as_ref(),
            "mu" => self.mu.as_ref(),
            _ => None,
        }
    }

    /// Parsed expression for `key`.
    pub fn expression(&self, key: &str) -> Result<AnalyticFn, ConfigError> {
        let path = format!("potential.{key}");
        let text = self.field(key).ok_or_else(|| invalid(&path, format!("required by kind {}", self.kind.name())))?;
        AnalyticFn::parse(text).map_err(|e| invalid(&path, e.to_string()))
    }
}

fn default_points() -> usize {
    201
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    #[serde(default = "default_points")]
    pub nx: usize,
    #[serde(default = "default_points")]
    pub ny: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basepoint: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub n_trunc: usize,
    /// Finite-section size of the splitting; `0` means `4 * n_trunc`.
    pub section: usize,
    pub iwasawa_tol: f64,
    pub det_tol: f64,
    pub cond_floor: f64,
    pub twist_tol: f64,
    /// RK4 steps per grid spacing.
    pub substeps: usize,
    /// Upper bound on the RK4 step length.
    pub max_step: f64,
    pub reg_floor: f64,
    pub curvature_tol: f64,
    /// Frontal and defining-equation tolerance; `0` means `100 h^2`.
    pub frontal_tol: f64,
    pub flatness_tol: f64,
    pub flatness_probes: usize,
    pub curve_tol: f64,
    pub seed: u64,
}

impl Default for Numerics {
    fn default() -> Self {
        let iw = IwasawaConfig::default();
        Self {
            n_trunc: iw.n_trunc,
            section: iw.section,
            iwasawa_tol: iw.iwasawa_tol,
            det_tol: iw.det_tol,
            cond_floor: iw.cond_floor,
            twist_tol: iw.twist_tol,
            substeps: FrameConfig::default().substeps,
            max_step: 0.01,
            reg_floor: 1e-3,
            curvature_tol: 1e-3,
            frontal_tol: 0.0,
            flatness_tol: 1e-8,
            flatness_probes: 8,
            curve_tol: 1e-5,
            seed: 1,
        }
    }
}

impl Numerics {
    pub fn iwasawa(&self) -> IwasawaConfig {
        IwasawaConfig {
            n_trunc: self.n_trunc,
            section: self.section,
            iwasawa_tol: self.iwasawa_tol,
            det_tol: self.det_tol,
            cond_floor: self.cond_floor,
            twist_tol: self.twist_tol,
        }
    }

    pub fn frame(&self) -> FrameConfig {
        FrameConfig { iwasawa: self.iwasawa(), substeps: self.substeps, max_step: Some(self.max_step) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceChoice {
    Spherical,
    Cmc,
}

impl From<SurfaceChoice> for SurfaceKind {
    fn from(s: SurfaceChoice) -> Self {
        match s {
            SurfaceChoice::Spherical => SurfaceKind::Spherical,
            SurfaceChoice::Cmc => SurfaceKind::Cmc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorField {
    /// Binary colour from the sign of the degeneracy field.
    Degeneracy,
    /// Grey level from the regularity margin.
    Margin,
    /// Colour ramp from the Gauss curvature estimate.
    Curvature,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleName {
    Frontal,
    Curvature,
    Flatness,
    Curve,
}

fn default_oracles() -> Vec<OracleName> {
    vec![OracleName::Frontal, OracleName::Curvature, OracleName::Flatness, OracleName::Curve]
}

fn default_color() -> ColorField {
    ColorField::Degeneracy
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    /// Defaults to `cmc` for `cmc_gcp` jobs and `spherical` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceChoice>,
    #[serde(default = "default_color")]
    pub color: ColorField,
    #[serde(default = "default_oracles")]
    pub oracles: Vec<OracleName>,
    /// Points `x0` on `y = 0` to classify; found automatically when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify_at: Option<Vec<f64>>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { mesh: None, report: None, surface: None, color: default_color(), oracles: default_oracles(), classify_at: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub potential: PotentialBlock,
    pub grid: GridBlock,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub output: OutputBlock,
    /// Directory that relative output paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn wrap(key: &'static str) -> impl Fn(potentials::PotentialError) -> ConfigError {
    move |err| invalid(key, err.to_string())
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}

/// Parses and validates a job, filling defaults.
pub fn parse_config(text: &str) -> Result<JobSpec, ConfigError> {
    let mut spec: JobSpec = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        ConfigError::Parse { line, column, message: e.message().trim().to_string() }
    })?;
    spec.validate()?;
    if spec.output.surface.is_none() {
        spec.output.surface = Some(if spec.potential.kind == JobKind::CmcGcp { SurfaceChoice::Cmc } else { SurfaceChoice::Spherical });
    }
    Ok(spec)
}

pub fn load_config(path: &Path) -> Result<JobSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let mut spec = parse_config(&text)?;
    spec.base_dir = path.parent().map(Path::to_path_buf);
    spec.check_output_dirs()?;
    Ok(spec)
}

impl JobSpec {
    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        let g = &self.grid;
        GridSpec::new((g.x_range[0], g.x_range[1]), (g.y_range[0], g.y_range[1]), g.nx, g.ny, g.basepoint.map(|b| (b[0], b[1])))
            .map_err(|e| invalid("grid", e.to_string()))
    }

    pub fn interval(&self) -> (f64, f64) {
        let i = self.potential.interval.unwrap_or(self.grid.x_range);
        (i[0], i[1])
    }

    pub fn surface(&self) -> SurfaceKind {
        self.output.surface.unwrap_or(SurfaceChoice::Spherical).into()
    }

    /// Resolves a configured output path against the job file's directory.
    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = PathBuf::from(path);
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p,
        }
    }

    /// Fails when a configured output directory does not exist.
    pub fn check_output_dirs(&self) -> Result<(), ConfigError> {
        for (key, path) in [("output.mesh", &self.output.mesh), ("output.report", &self.output.report)] {
            if let Some(p) = path {
                let full = self.resolve(p);
                let dir = full.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
                if !dir.is_dir() {
                    return Err(invalid(key, format!("directory {} does not exist", dir.display())));
                }
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let kind = self.potential.kind;
        for key in ["a", "b", "c", "kappa", "tau", "kappa_n", "kappa_g", "mu"] {
            if self.potential.field(key).is_some() && !kind.expression_keys().contains(&key) {
                return Err(invalid(&format!("potential.{key}"), format!("not used by kind {}", kind.name())));
            }
        }
        if self.potential.period.is_some() && kind != JobKind::Cone {
            return Err(invalid("potential.period", format!("not used by kind {}", kind.name())));
        }
        self.grid_spec()?;
        let n = &self.numerics;
        if n.n_trunc == 0 {
            return Err(invalid("numerics.n_trunc", "must be positive"));
        }
        if n.substeps == 0 {
            return Err(invalid("numerics.substeps", "must be positive"));
        }
        for (key, v) in [
            ("iwasawa_tol", n.iwasawa_tol),
            ("det_tol", n.det_tol),
            ("cond_floor", n.cond_floor),
            ("twist_tol", n.twist_tol),
            ("max_step", n.max_step),
            ("reg_floor", n.reg_floor),
            ("curvature_tol", n.curvature_tol),
            ("flatness_tol", n.flatness_tol),
            ("curve_tol", n.curve_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(&format!("numerics.{key}"), "must be positive and finite"));
            }
        }
        if !(n.frontal_tol >= 0.0 && n.frontal_tol.is_finite()) {
            return Err(invalid("numerics.frontal_tol", "must be non-negative and finite"));
        }
        self.build_potential().map(|_| ())
    }

    /// Builds the potential; cone jobs also return their embeddedness report.
    pub fn build_potential(&self) -> Result<(Potential, Option<ConeReport>), ConfigError> {
        let pb = &self.potential;
        let e = |key: &str| pb.expression(key);
        let interval = self.interval();
        let pot = match pb.kind {
            JobKind::Normalized => potentials::normalized(e("a")?, e("b")?),
            JobKind::GeodesicGcp => potentials::geodesic_gcp(e("kappa")?, e("tau")?),
            JobKind::GeneralGcp => potentials::general_gcp(e("kappa_n")?, e("kappa_g")?, e("mu")?, interval).map_err(wrap("potential"))?,
            JobKind::SingularGcp => potentials::singular_gcp(e("kappa")?, e("tau")?, interval).map_err(wrap("potential.kappa"))?,
            JobKind::SingularGcpGeneral => potentials::singular_gcp_general(e("b")?, e("c")?, interval).map_err(wrap("potential"))?,
            JobKind::CmcGcp => potentials::cmc_gcp(e("kappa_n")?, e("kappa_g")?, e("mu")?),
            JobKind::Cone => {
                let (pot, rep) = potentials::cone_potential_from_normal_curve(e("c")?, pb.period, interval, 1e-6).map_err(wrap("potential.c"))?;
                return Ok((pot, Some(rep)));
            }
        };
        Ok((pot, None))
    }

    /// Frontal tolerance, `100 h^2` when not configured.
    pub fn frontal_tol(&self) -> f64 {
        if self.numerics.frontal_tol > 0.0 {
            return self.numerics.frontal_tol;
        }
        let g = &self.grid;
        let hx = (g.x_range[1] - g.x_range[0]) / (g.nx.max(2) - 1) as f64;
        let hy = (g.y_range[1] - g.y_range[0]) / (g.ny.max(2) - 1) as f64;
        100.0 * hx.max(hy).powi(2)
    }

    /// The job with defaults filled, as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("job spec serialises")
    }
}
