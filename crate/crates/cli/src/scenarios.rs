use serde::Serialize;
use sqfnlab_core::measure::{CascadeOverride, Example53Part, MeasureSpec};

use crate::config::{EpsilonMode, ExperimentConfig, Outputs, Suite, Systems, Tolerances};

#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub name: &'static str,
    pub summary: &'static str,
    #[serde(skip)]
    build: fn() -> ExperimentConfig,
}

impl Scenario {
    pub fn config(&self) -> ExperimentConfig {
        (self.build)()
    }
}

fn base(name: &str, mu: MeasureSpec, nu: MeasureSpec, depth: u32) -> ExperimentConfig {
    ExperimentConfig {
        scenario: name.to_string(),
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

fn cascade(p: f64, depth: u32) -> MeasureSpec {
    MeasureSpec::Cascade {
        p,
        depth,
        overrides: vec![],
    }
}

/// Lebesgue with five cascade nodes tilted away from 1/2.
pub fn finite_haar_spec(depth: u32) -> MeasureSpec {
    MeasureSpec::Cascade {
        p: 0.5,
        depth,
        overrides: [(0, 0, 0.6), (1, 1, 0.35), (2, 1, 0.65), (3, 6, 0.4), (4, 3, 0.7)]
            .iter()
            .map(|&(level, index, p)| CascadeOverride { level, index, p })
            .collect(),
    }
}

/// Deterministic histogram with density in `[1/2, 3/2]` and total mass 1.
pub fn ac_density_spec() -> MeasureSpec {
    let n = 64;
    let masses = (0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) / n as f64;
            (1.0 + 0.5 * (6.0 * std::f64::consts::PI * t).sin()) / n as f64
        })
        .collect();
    MeasureSpec::Histogram { depth: 6, masses }
}

fn identity() -> ExperimentConfig {
    base("identity", MeasureSpec::Lebesgue, MeasureSpec::Lebesgue, 10)
}

fn singular_cascade() -> ExperimentConfig {
    let mut c = base("singular-cascade", cascade(0.7, 20), MeasureSpec::Lebesgue, 20);
    c.suites.push(Suite::Domination);
    c.systems = Systems::Shifted { count: 2 };
    c
}

fn cantor() -> ExperimentConfig {
    base(
        "cantor",
        MeasureSpec::Cantor {
            left: 0.25,
            right: 0.25,
            depth: 18,
        },
        MeasureSpec::Lebesgue,
        18,
    )
}

fn example22() -> ExperimentConfig {
    base("example22", MeasureSpec::Example22 { n: 6 }, MeasureSpec::Lebesgue, 12)
}

fn example52() -> ExperimentConfig {
    base("example52", MeasureSpec::Example52 { n: 6 }, MeasureSpec::Lebesgue, 12)
}

fn example53() -> ExperimentConfig {
    let part = |part| MeasureSpec::Example53 { epsilon: 0.01, part };
    base("example53", part(Example53Part::Mu), part(Example53Part::Nu), 8)
}

fn finite_haar() -> ExperimentConfig {
    base("finite-haar-A∞", finite_haar_spec(16), MeasureSpec::Lebesgue, 14)
}

fn histogram_fleet() -> ExperimentConfig {
    let mut c = base("random-histogram-fleet", MeasureSpec::Lebesgue, MeasureSpec::Lebesgue, 12);
    c.suites = vec![Suite::HistogramFleet];
    c
}

fn oracle_crossval() -> ExperimentConfig {
    let mut c = base("oracle-crossval", MeasureSpec::Lebesgue, MeasureSpec::Lebesgue, 1);
    c.suites = vec![Suite::Oracle];
    c.samples = 1000;
    c
}

fn ac_density() -> ExperimentConfig {
    base("ac-density", ac_density_spec(), MeasureSpec::Lebesgue, 20)
}

pub fn catalog() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "identity",
            summary: "μ = ν = Lebesgue; every coefficient and sum vanishes",
            build: identity,
        },
        Scenario {
            name: "singular-cascade",
            summary: "binomial cascade p = 0.7 against Lebesgue; linear square-function growth",
            build: singular_cascade,
        },
        Scenario {
            name: "cantor",
            summary: "middle-half Cantor measure against Lebesgue; null intervals and null-top trees",
            build: cantor,
        },
        Scenario {
            name: "example22",
            summary: "density 1/2 and 3/2 on a small neighbourhood of 1/2; dyadically doubling",
            build: example22,
        },
        Scenario {
            name: "example52",
            summary: "the same density, probed by intervals straddling the defect",
            build: example52,
        },
        Scenario {
            name: "example53",
            summary: "δ at 1/2 against two nearby atoms; small smooth α, atom on a dyadic boundary",
            build: example53,
        },
        Scenario {
            name: "finite-haar-A∞",
            summary: "Lebesgue perturbed at five Haar nodes; bounded Carleson ratios",
            build: finite_haar,
        },
        Scenario {
            name: "random-histogram-fleet",
            summary: "L² bound ratio over random bounded densities against Lebesgue",
            build: histogram_fleet,
        },
        Scenario {
            name: "oracle-crossval",
            summary: "closed-form transport distance against the grid dual program",
            build: oracle_crossval,
        },
        Scenario {
            name: "ac-density",
            summary: "smooth histogram density in [1/2, 3/2]; converging square function",
            build: ac_density,
        },
    ]
}

/// Case-insensitive lookup; `finite-haar` and `finite-haar-ainf` also name
/// the perturbation scenario.
pub fn lookup(name: &str) -> Option<Scenario> {
    let key = name.to_lowercase();
    let key = match key.as_str() {
        "finite-haar" | "finite-haar-ainf" => "finite-haar-a∞".to_string(),
        _ => key,
    };
    catalog().into_iter().find(|s| s.name.to_lowercase() == key)
}
