use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sqfnlab_core::measure::MeasureSpec;
use sqfnlab_core::tolerance;

use crate::scenarios;
use crate::CliError;

pub const DEPTH_CAP: u32 = 24;
/// Levels kept between a truncated generator's resolution and the deepest
/// α-number a suite evaluates.
pub const TRUNCATION_MARGIN: u32 = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EpsilonMode {
    /// `ε = 1/(16D³)` from the doubling constant of `ν`.
    #[default]
    Auto,
    Explicit { value: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Systems {
    #[default]
    Standard,
    Shifted { count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Doubling,
    Forest,
    Haar,
    Carleson,
    Profiles,
    Buckley,
    Cz,
    Tolsa,
    Domination,
    Oracle,
    HistogramFleet,
}

impl Suite {
    pub const STANDARD: [Suite; 8] = [
        Suite::Doubling,
        Suite::Forest,
        Suite::Haar,
        Suite::Carleson,
        Suite::Profiles,
        Suite::Buckley,
        Suite::Cz,
        Suite::Tolsa,
    ];
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// CSV of every profile partial sum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profiles: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub exact: f64,
    pub accumulation: f64,
    pub statistical: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            exact: tolerance::EXACT,
            accumulation: tolerance::ACCUMULATION,
            statistical: tolerance::STATISTICAL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub mu: MeasureSpec,
    pub nu: MeasureSpec,
    pub depth: u32,
    pub epsilon: EpsilonMode,
    pub systems: Systems,
    pub suites: Vec<Suite>,
    pub outputs: Outputs,
    pub seed: u64,
    /// μ-sampled points per profile.
    pub points: usize,
    /// Random draws for the fleet and oracle suites.
    pub samples: usize,
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    /// SHA-256 of the canonical JSON form, without output paths.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.outputs = Outputs::default();
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    /// Deepest level the α-based suites may use.
    pub fn analysis_depth(&self) -> u32 {
        let limit = |spec: &MeasureSpec| match spec {
            // Overrides above a p = 1/2 base describe the measure exactly.
            MeasureSpec::Cascade { p, .. } if *p == 0.5 => u32::MAX,
            MeasureSpec::Cascade { depth, .. } | MeasureSpec::Cantor { depth, .. } => {
                depth.saturating_sub(TRUNCATION_MARGIN).max(1)
            }
            _ => u32::MAX,
        };
        self.depth.min(limit(&self.mu)).min(limit(&self.nu))
    }
}

/// A config file: a scenario name plus any fields overriding its defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: String,
    pub mu: Option<MeasureSpec>,
    pub nu: Option<MeasureSpec>,
    pub depth: Option<u32>,
    pub epsilon: Option<EpsilonMode>,
    pub systems: Option<Systems>,
    pub suites: Option<Vec<Suite>>,
    pub outputs: Option<Outputs>,
    pub seed: Option<u64>,
    pub points: Option<usize>,
    pub samples: Option<usize>,
    pub tolerances: Option<Tolerances>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn scenario(name: &str) -> Self {
        Self {
            scenario: name.to_string(),
            ..Self::default()
        }
    }

    /// Fills missing fields from the named catalog scenario. A name outside
    /// the catalog needs `mu`, `nu` and `depth`.
    pub fn resolve(self) -> Result<ExperimentConfig, CliError> {
        let base = match scenarios::lookup(&self.scenario) {
            Some(s) => s.config(),
            None => {
                let (Some(mu), Some(nu), Some(depth)) = (self.mu.clone(), self.nu.clone(), self.depth) else {
                    return Err(CliError::Usage(format!(
                        "unknown scenario {:?}; run `sqfnlab list` or give mu, nu and depth",
                        self.scenario
                    )));
                };
                ExperimentConfig {
                    scenario: self.scenario.clone(),
                    mu,
                    nu,
                    depth,
                    epsilon: EpsilonMode::Auto,
                    systems: Systems::Standard,
                    suites: Suite::STANDARD.to_vec(),
                    outputs: Outputs::default(),
                    seed: 0,
                    points: 32,
                    samples: 200,
                    tolerances: Tolerances::default(),
                }
            }
        };
        Ok(ExperimentConfig {
            scenario: self.scenario,
            mu: self.mu.unwrap_or(base.mu),
            nu: self.nu.unwrap_or(base.nu),
            depth: self.depth.unwrap_or(base.depth),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            systems: self.systems.unwrap_or(base.systems),
            suites: self.suites.unwrap_or(base.suites),
            outputs: self.outputs.unwrap_or(base.outputs),
            seed: self.seed.unwrap_or(base.seed),
            points: self.points.unwrap_or(base.points),
            samples: self.samples.unwrap_or(base.samples),
            tolerances: self.tolerances.unwrap_or(base.tolerances),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

fn boundary_warnings(name: &str, spec: &MeasureSpec, depth: u32, out: &mut Vec<String>) {
    let MeasureSpec::Atomic { atoms } = spec else {
        if let MeasureSpec::Example53 { .. } = spec {
            if let Ok(m) = sqfnlab_core::generate(spec) {
                push_boundary(name, &m, depth, out);
            }
        }
        return;
    };
    if let Ok(m) = sqfnlab_core::Measure::new(atoms.clone(), vec![]) {
        push_boundary(name, &m, depth, out);
    }
}

fn push_boundary(name: &str, m: &sqfnlab_core::Measure, depth: u32, out: &mut Vec<String>) {
    for (x, level) in m.boundary_atoms(depth) {
        out.push(format!(
            "{name} has an atom at {x}, a boundary of a level-{level} dyadic interval; \
             the square-function criteria assume the measures do not charge the boundaries"
        ));
    }
}

pub fn validate(cfg: &ExperimentConfig) -> Diagnostics {
    let mut d = Diagnostics::default();
    if cfg.depth > DEPTH_CAP {
        d.errors.push(format!("depth {} exceeds the cap of {DEPTH_CAP}", cfg.depth));
    }
    for (name, spec) in [("mu", &cfg.mu), ("nu", &cfg.nu)] {
        if let Err(e) = spec.validate() {
            d.errors.push(format!("{name}: {e}"));
        }
        boundary_warnings(name, spec, cfg.depth.min(DEPTH_CAP), &mut d.warnings);
    }
    if let EpsilonMode::Explicit { value } = cfg.epsilon {
        if !(value > 0.0 && value.is_finite()) {
            d.errors.push(format!("explicit epsilon {value} must be positive"));
        }
    }
    if let Systems::Shifted { count } = cfg.systems {
        if !(2..=3).contains(&count) {
            d.errors.push(format!("shifted system count {count} must be 2 or 3"));
        }
    }
    if cfg.points == 0 {
        d.errors.push("points must be positive".into());
    }
    if cfg.suites.is_empty() {
        d.warnings.push("no suites selected".into());
    }
    let t = cfg.tolerances;
    if [t.exact, t.accumulation, t.statistical].iter().any(|v| !(*v > 0.0)) {
        d.errors.push("tolerances must be positive".into());
    }
    if cfg.analysis_depth() < cfg.depth {
        d.warnings.push(format!(
            "α-based suites stop at level {} to keep {TRUNCATION_MARGIN} levels of generator resolution",
            cfg.analysis_depth()
        ));
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_output_paths() {
        let a = ConfigFile::scenario("identity").resolve().unwrap();
        let mut b = a.clone();
        b.outputs.report = Some("elsewhere.json".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 7;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn overrides_replace_catalog_defaults() {
        let file: ConfigFile = serde_json::from_str(r#"{"scenario": "Finite-Haar", "depth": 9, "seed": 3}"#).unwrap();
        let cfg = file.resolve().unwrap();
        assert_eq!(cfg.scenario, "Finite-Haar");
        assert_eq!((cfg.depth, cfg.seed), (9, 3));
        assert_eq!(cfg.analysis_depth(), 9);
        assert!(serde_json::from_str::<ConfigFile>(r#"{"scenario": "identity", "dept": 3}"#).is_err());
    }

    #[test]
    fn truncated_generators_limit_analysis_depth() {
        let cfg = ConfigFile::scenario("singular-cascade").resolve().unwrap();
        assert_eq!(cfg.analysis_depth(), 10);
        let d = validate(&cfg);
        assert!(d.is_ok());
        assert!(d.warnings.iter().any(|w| w.contains("stop at level 10")));
    }

    #[test]
    fn validation_collects_every_error() {
        let mut cfg = ConfigFile::scenario("identity").resolve().unwrap();
        cfg.depth = 30;
        cfg.points = 0;
        cfg.systems = Systems::Shifted { count: 5 };
        cfg.epsilon = EpsilonMode::Explicit { value: -1.0 };
        assert_eq!(validate(&cfg).errors.len(), 4);
    }
}
