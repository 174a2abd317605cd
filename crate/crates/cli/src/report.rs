use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sqfnlab_core::dyadic::DoublingReport;
use sqfnlab_core::squarefn::{BuckleyReport, ProfileMode, SquareFunctionProfile};
use sqfnlab_core::DyadicInterval;

use crate::config::Suite;
use crate::CliError;

pub const SCHEMA: &str = "report-v1";

/// One asserted inequality `lhs ≤ rhs` (or `<` when `strict`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    /// Soft checks are recorded but never fail a run.
    pub hard: bool,
    pub passed: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn at_most(suite: Suite, name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            hard: true,
            passed: lhs <= rhs,
            lhs,
            rhs,
            slack: rhs - lhs,
            note: None,
        }
    }

    pub fn below(suite: Suite, name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            passed: lhs < rhs,
            ..Self::at_most(suite, name, lhs, rhs)
        }
    }

    pub fn soft(mut self) -> Self {
        self.hard = false;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForestStats {
    pub epsilon: f64,
    pub max_depth: u32,
    pub trees: usize,
    pub null_tops: usize,
    pub leaves: usize,
    pub truncated: usize,
    pub largest_tree: usize,
    pub tallest_tree: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlesonStats {
    pub trees: usize,
    pub doubling_bound: f64,
    pub max_ratio: f64,
    pub worst_top: Option<DyadicInterval>,
    pub sum_delta: f64,
    pub sum_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileSummary {
    pub mode: ProfileMode,
    pub depth: u32,
    pub points: usize,
    pub mean_final: f64,
    pub max_final: f64,
    pub early_slope: f64,
    pub late_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    /// `singular`, `absolutely continuous` or `inconclusive`.
    pub label: String,
    pub early_slope: f64,
    pub late_slope: f64,
    /// Largest growth of a partial sum over the second half of the levels.
    pub tail_growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FleetStats {
    pub samples: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Versions {
    pub sqfnlab: String,
    pub sqfnlab_core: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: String,
    pub scenario: String,
    pub config_hash: String,
    pub versions: Versions,
    pub passed: bool,
    pub failed_checks: Vec<String>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doubling: Option<DoublingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forest: Option<ForestStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carleson: Option<CarlesonStats>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<ProfileSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub buckley: Vec<BuckleyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fleet: Option<FleetStats>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub tables: Vec<SquareFunctionProfile>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json(&self, path: &Path) -> Result<(), CliError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json().as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    /// One row per (profile, point, scale).
    pub fn write_profiles_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Row<'a> {
            mode: &'a str,
            system: u8,
            point: f64,
            scale: f64,
            partial_sum: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for p in &self.tables {
            let (mode, system) = match p.mode {
                ProfileMode::Dyadic { system, .. } => ("dyadic", system),
                ProfileMode::Continuous { .. } => ("continuous", 0),
            };
            for (point, scale, partial_sum) in p.rows() {
                w.serialize(Row {
                    mode,
                    system,
                    point,
                    scale,
                    partial_sum,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
