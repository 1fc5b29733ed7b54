//! Run reports, written as TOML. The schema is versioned by `report_version`;
//! only the `[timing]` table varies between identical runs.

use super::config::JobSpec;
use serde::Serialize;
use std::collections::BTreeMap;

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    pub name: String,
    pub status: Status,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingularityEntry {
    pub x: f64,
    pub y: f64,
    pub label: String,
    pub criterion: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub diagnostics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchEntry {
    pub re: f64,
    pub im: f64,
    pub polished: bool,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchSummary {
    pub points: Vec<BranchEntry>,
    pub basepoint_rank_one: bool,
    pub basepoint_moduli: [f64; 2],
    /// The rank-one locus away from the basepoint is a heuristic.
    pub rank_one_polylines: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IwasawaStats {
    pub points: usize,
    pub failures: usize,
    pub max_residual: f64,
    pub max_tail_ratio: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LocusSummary {
    pub polylines: usize,
    pub vertices: usize,
    /// Total length in the coordinate domain.
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeSummary {
    pub strictly_convex: bool,
    pub c_min: f64,
    pub c_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closure_defect: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Artifacts {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Timing {
    pub frame_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub report_version: u32,
    pub verb: String,
    pub status: Status,
    pub kind: String,
    pub surface: String,
    pub warnings: Vec<String>,
    pub iwasawa: IwasawaStats,
    pub locus: LocusSummary,
    pub artifacts: Artifacts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cone: Option<ConeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<BranchSummary>,
    pub oracles: Vec<OracleResult>,
    pub singularities: Vec<SingularityEntry>,
    pub config: JobSpec,
    pub timing: Timing,
}

impl RunReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serialises")
    }

    pub fn failed_oracles(&self) -> impl Iterator<Item = &OracleResult> {
        self.oracles.iter().filter(|o| o.status == Status::Fail)
    }
}
