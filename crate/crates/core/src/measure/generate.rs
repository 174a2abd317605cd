use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Atom, Measure, Piece};
use crate::error::{param, Result};

pub const MAX_GENERATOR_DEPTH: u32 = 30;

/// Replace the left fraction at one node of a cascade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeOverride {
    pub level: u32,
    pub index: u64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Example53Part {
    #[default]
    Mu,
    Nu,
}

/// Serializable description of a generated measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeasureSpec {
    Lebesgue,
    /// Point masses with the given weights (not renormalized).
    Atomic { atoms: Vec<Atom> },
    /// Piecewise-uniform with the given masses on the `2^depth` dyadic cells
    /// (not renormalized).
    Histogram { depth: u32, masses: Vec<f64> },
    /// Binomial cascade: every node sends fraction `p` of its mass to its
    /// left child, except where an override says otherwise.
    Cascade {
        p: f64,
        depth: u32,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        overrides: Vec<CascadeOverride>,
    },
    /// Keeps the leftmost `left` and rightmost `right` fractions of every
    /// interval, each with half the mass.
    Cantor { left: f64, right: f64, depth: u32 },
    /// Density 1 except 1/2 on `[1/2−2^−n, 1/2)` and 3/2 on `[1/2, 1/2+2^−n)`.
    Example22 { n: u32 },
    /// Same density as `Example22`, used with intervals straddling the defect.
    Example52 { n: u32 },
    /// `μ = δ_{1/2}` or `ν = (1−ε)δ_{1/2+ε} + εδ_{1/4}`.
    Example53 {
        epsilon: f64,
        #[serde(default)]
        part: Example53Part,
    },
}

impl MeasureSpec {
    pub fn validate(&self) -> Result<()> {
        let depth_ok = |d: u32| {
            if d > MAX_GENERATOR_DEPTH {
                param(format!("depth {d} exceeds {MAX_GENERATOR_DEPTH}"))
            } else {
                Ok(())
            }
        };
        let fraction_ok = |p: f64, what: &str| {
            if p > 0.0 && p < 1.0 {
                Ok(())
            } else {
                param(format!("{what} = {p} must lie in (0,1)"))
            }
        };
        match self {
            MeasureSpec::Lebesgue | MeasureSpec::Atomic { .. } => Ok(()),
            MeasureSpec::Histogram { depth, masses } => {
                depth_ok(*depth)?;
                if masses.len() != 1usize << depth {
                    return param(format!(
                        "histogram at depth {depth} needs {} masses",
                        1usize << depth
                    ));
                }
                Ok(())
            }
            MeasureSpec::Cascade { p, depth, overrides } => {
                depth_ok(*depth)?;
                fraction_ok(*p, "p")?;
                for o in overrides {
                    fraction_ok(o.p, "override p")?;
                    if o.level >= *depth || o.index >= 1u64 << o.level {
                        return param(format!("override node {}:{} out of range", o.level, o.index));
                    }
                }
                Ok(())
            }
            MeasureSpec::Cantor { left, right, depth } => {
                depth_ok(*depth)?;
                fraction_ok(*left, "left ratio")?;
                fraction_ok(*right, "right ratio")?;
                if left + right > 1.0 {
                    return param("cantor ratios must sum to at most 1");
                }
                Ok(())
            }
            MeasureSpec::Example22 { n } | MeasureSpec::Example52 { n } => {
                if (2..=MAX_GENERATOR_DEPTH).contains(n) {
                    Ok(())
                } else {
                    param(format!("n = {n} must lie in [2, {MAX_GENERATOR_DEPTH}]"))
                }
            }
            MeasureSpec::Example53 { epsilon, .. } => {
                if *epsilon > 0.0 && *epsilon < 0.5 {
                    Ok(())
                } else {
                    param(format!("epsilon = {epsilon} must lie in (0, 1/2)"))
                }
            }
        }
    }

    /// Depth at which the generator is exact, if it has one.
    pub fn resolution(&self) -> Option<u32> {
        match self {
            MeasureSpec::Histogram { depth, .. }
            | MeasureSpec::Cascade { depth, .. }
            | MeasureSpec::Cantor { depth, .. } => Some(*depth),
            MeasureSpec::Example22 { n } | MeasureSpec::Example52 { n } => Some(*n),
            _ => None,
        }
    }
}

pub fn generate(spec: &MeasureSpec) -> Result<Measure> {
    spec.validate()?;
    match spec {
        MeasureSpec::Lebesgue => Ok(Measure::lebesgue()),
        MeasureSpec::Atomic { atoms } => Measure::new(atoms.clone(), Vec::new()),
        MeasureSpec::Histogram { depth, masses } => Measure::from_cells(*depth, masses),
        MeasureSpec::Cascade { p, depth, overrides } => {
            Measure::from_cells(*depth, &cascade_cells(*p, *depth, overrides))
        }
        MeasureSpec::Cantor { left, right, depth } => Ok(cantor(*left, *right, *depth)),
        MeasureSpec::Example22 { n } | MeasureSpec::Example52 { n } => Ok(example22(*n)),
        MeasureSpec::Example53 { epsilon, part } => {
            let atoms = match part {
                Example53Part::Mu => vec![Atom {
                    position: 0.5,
                    weight: 1.0,
                }],
                Example53Part::Nu => vec![
                    Atom {
                        position: 0.5 + epsilon,
                        weight: 1.0 - epsilon,
                    },
                    Atom {
                        position: 0.25,
                        weight: *epsilon,
                    },
                ],
            };
            Measure::new(atoms, Vec::new())
        }
    }
}

/// Cell masses of a cascade at its full depth.
pub(crate) fn cascade_cells(p: f64, depth: u32, overrides: &[CascadeOverride]) -> Vec<f64> {
    let table: HashMap<(u32, u64), f64> = overrides
        .iter()
        .map(|o| ((o.level, o.index), o.p))
        .collect();
    let mut cells = vec![1.0];
    for level in 0..depth {
        let mut next = Vec::with_capacity(cells.len() * 2);
        for (k, &m) in cells.iter().enumerate() {
            let q = table.get(&(level, k as u64)).copied().unwrap_or(p);
            next.push(m * q);
            next.push(m * (1.0 - q));
        }
        cells = next;
    }
    cells
}

fn cantor(left: f64, right: f64, depth: u32) -> Measure {
    let mut pieces = vec![Piece {
        left: 0.0,
        right: 1.0,
        mass: 1.0,
    }];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(pieces.len() * 2);
        for p in &pieces {
            let w = p.right - p.left;
            let mid_l = p.left + left * w;
            let mid_r = p.right - right * w;
            next.push(Piece {
                left: p.left,
                right: mid_l.min(mid_r),
                mass: 0.5 * p.mass,
            });
            next.push(Piece {
                left: mid_r.max(mid_l),
                right: p.right,
                mass: 0.5 * p.mass,
            });
        }
        pieces = next;
    }
    Measure::from_sorted(Vec::new(), pieces)
}

fn example22(n: u32) -> Measure {
    let d = (-(n as f64)).exp2();
    let pieces = vec![
        Piece {
            left: 0.0,
            right: 0.5 - d,
            mass: 0.5 - d,
        },
        Piece {
            left: 0.5 - d,
            right: 0.5,
            mass: 0.5 * d,
        },
        Piece {
            left: 0.5,
            right: 0.5 + d,
            mass: 1.5 * d,
        },
        Piece {
            left: 0.5 + d,
            right: 1.0,
            mass: 0.5 - d,
        },
    ];
    Measure::from_sorted(Vec::new(), pieces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fair_cascade_is_lebesgue() {
        let m = generate(&MeasureSpec::Cascade {
            p: 0.5,
            depth: 10,
            overrides: vec![],
        })
        .unwrap();
        assert!(m.pieces().iter().all(|p| p.mass == (-10f64).exp2()));
        assert_eq!(m.total(), 1.0);
    }

    #[test]
    fn cascade_depth_two_cells() {
        let cells = cascade_cells(0.7, 2, &[]);
        let expected = [0.49, 0.21, 0.21, 0.09];
        for (c, e) in cells.iter().zip(expected) {
            assert!((c - e).abs() < 1e-15);
        }
    }

    #[test]
    fn cascade_override_changes_one_node() {
        let cells = cascade_cells(
            0.5,
            2,
            &[CascadeOverride {
                level: 1,
                index: 1,
                p: 0.8,
            }],
        );
        for (c, e) in cells.iter().zip([0.25, 0.25, 0.4, 0.1]) {
            assert!((c - e).abs() < 1e-15);
        }
    }

    #[test]
    fn example22_masses() {
        let m = generate(&MeasureSpec::Example22 { n: 3 }).unwrap();
        assert_eq!(m.mass(0.5 - 0.125, 0.5, true), 0.0625);
        assert_eq!(m.mass(0.5, 0.625, true), 3.0 * 0.0625);
        assert_eq!(m.total(), 1.0);
    }

    #[test]
    fn cantor_middle_thirds() {
        let m = generate(&MeasureSpec::Cantor {
            left: 1.0 / 3.0,
            right: 1.0 / 3.0,
            depth: 4,
        })
        .unwrap();
        assert_eq!(m.pieces().len(), 16);
        assert_eq!(m.mass(1.0 / 3.0 + 1e-9, 2.0 / 3.0 - 1e-9, false), 0.0);
        assert!((m.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parameter_ranges() {
        assert!(generate(&MeasureSpec::Cascade {
            p: 1.0,
            depth: 3,
            overrides: vec![]
        })
        .is_err());
        assert!(generate(&MeasureSpec::Example22 { n: 31 }).is_err());
        assert!(generate(&MeasureSpec::Histogram {
            depth: 2,
            masses: vec![1.0]
        })
        .is_err());
    }

    #[test]
    fn spec_json_shape() {
        let s: MeasureSpec = serde_json::from_str(r#"{"type":"cascade","p":0.7,"depth":16}"#).unwrap();
        assert_eq!(
            s,
            MeasureSpec::Cascade {
                p: 0.7,
                depth: 16,
                overrides: vec![]
            }
        );
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"type":"cascade","p":0.7,"depth":16}"#);
    }
}
