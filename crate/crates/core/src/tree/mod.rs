//! Stopping-time trees over the standard dyadic system.

mod haar;
mod whitney;

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::{alpha, select_ball, DEFAULT_BALL_SAMPLES};
use crate::dyadic::{delta, DyadicInterval, MAX_LEVEL};
use crate::error::{domain, param, Error, Result};
use crate::measure::Measure;
use crate::numeric::CompensatedSum;

pub use haar::{g_l2_norm, haar, partial_sum_g, product_check, GNorm, HaarCoefficient, HaarSystem, ProductCheck};
pub use whitney::{
    calibrate_tau, representation_check, tailtip_check, whitney_partition, Calibration,
    RepresentationCheck, Side, TailTipCheck, WhitneyPartition, DEFAULT_KAPPA, WHITNEY_CONSTANT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberKind {
    /// Both children belong to the tree.
    Internal,
    /// Stopped: the ancestor sum reached the threshold.
    Leaf,
    /// Cut at the depth cap without stopping.
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub interval: DyadicInterval,
    pub kind: MemberKind,
    /// `α(I)` on the interval itself.
    pub alpha: f64,
    /// Increment used for stopping (`α²` or the ball variant).
    pub weight: f64,
    /// Sum of `weight` from the top down to and including this member.
    pub stop_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub top: DyadicInterval,
    /// Sorted by (level, index); empty below the top of a null tree.
    pub members: Vec<Member>,
    /// Deepest level any member may have.
    pub max_depth: u32,
    /// `μ(top) = 0`: every descendant down to `max_depth` is implicitly a
    /// member and nothing stops.
    pub null_top: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub top: DyadicInterval,
    pub members: usize,
    pub leaves: Vec<DyadicInterval>,
    pub truncated: usize,
    /// Member count per level below the top.
    pub depth_histogram: BTreeMap<u32, usize>,
    pub max_stop_sum: f64,
    pub null_top: bool,
}

impl Tree {
    /// Every descendant of `top` for `generations` levels, nothing stopped.
    pub fn full(mu: &Measure, nu: &Measure, top: DyadicInterval, generations: u32) -> Result<Tree> {
        if generations == 0 {
            return param("a tree has at least one generation");
        }
        let max_depth = top.level + generations - 1;
        if max_depth > MAX_LEVEL {
            return Err(Error::Range(format!("depth {max_depth} exceeds {MAX_LEVEL}")));
        }
        build_tree(top, max_depth, f64::INFINITY, &|iv| {
            let a = alpha(mu, nu, &iv.unit_interval());
            Ok((a, a * a))
        })
    }

    pub fn get(&self, iv: &DyadicInterval) -> Option<&Member> {
        self.members
            .binary_search_by(|m| m.interval.cmp(iv))
            .ok()
            .map(|i| &self.members[i])
    }

    pub fn contains(&self, iv: &DyadicInterval) -> bool {
        if self.null_top {
            return self.top.contains(iv) && iv.level <= self.max_depth;
        }
        self.get(iv).is_some()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Member> {
        self.members.iter().filter(|m| m.kind == MemberKind::Leaf)
    }

    /// Members carrying children in the tree.
    pub fn internal(&self) -> impl Iterator<Item = &Member> {
        self.members.iter().filter(|m| m.kind == MemberKind::Internal)
    }

    /// Members tiling the top: leaves plus truncated cells.
    pub fn cells(&self) -> impl Iterator<Item = &Member> {
        self.members.iter().filter(|m| m.kind != MemberKind::Internal)
    }

    /// Mass of `top ∖ ∪ leaves`.
    pub fn boundary_mass(&self, m: &Measure) -> f64 {
        let mut s = CompensatedSum::new();
        s.add(m.mass_of(&self.top.unit_interval()));
        for l in self.leaves() {
            s.add(-m.mass_of(&l.interval.unit_interval()));
        }
        s.value().max(0.0)
    }

    pub fn summary(&self) -> TreeSummary {
        let mut hist = BTreeMap::new();
        for m in &self.members {
            *hist.entry(m.interval.level - self.top.level).or_insert(0) += 1;
        }
        TreeSummary {
            top: self.top,
            members: self.members.len(),
            leaves: self.leaves().map(|m| m.interval).collect(),
            truncated: self
                .members
                .iter()
                .filter(|m| m.kind == MemberKind::Truncated)
                .count(),
            depth_histogram: hist,
            max_stop_sum: self.members.iter().map(|m| m.stop_sum).fold(0.0, f64::max),
            null_top: self.null_top,
        }
    }

    /// Coherence, child counts in `{0, 2}`, disjoint tiling by the cells.
    pub fn check_invariants(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Precondition(msg));
        if self.members.first().map(|m| m.interval) != Some(self.top) {
            return bad(format!("tree does not start at its top {}", self.top));
        }
        for m in &self.members {
            if !self.top.contains(&m.interval) {
                return bad(format!("{} lies outside the top", m.interval));
            }
            if m.interval != self.top && !self.contains(&m.interval.parent()?) {
                return bad(format!("{} is not connected to the top", m.interval));
            }
            let [l, r] = m.interval.children()?;
            let kids = self.contains(&l) as u8 + self.contains(&r) as u8;
            let expected = if m.kind == MemberKind::Internal { 2 } else { 0 };
            if kids != expected {
                return bad(format!("{} has {kids} children in the tree", m.interval));
            }
        }
        let cell_len: f64 = self.cells().map(|m| m.interval.len()).sum();
        if !self.null_top && (cell_len - self.top.len()).abs() > 1e-12 * self.top.len() {
            return bad(format!("cells of {} do not tile it", self.top));
        }
        Ok(())
    }
}

type Weigh<'a> = dyn Fn(&DyadicInterval) -> Result<(f64, f64)> + Sync + 'a;

fn build_tree(top: DyadicInterval, max_depth: u32, threshold: f64, weigh: &Weigh<'_>) -> Result<Tree> {
    let mut members = Vec::new();
    let mut queue = VecDeque::from([(top, 0.0)]);
    while let Some((iv, above)) = queue.pop_front() {
        let (a, w) = weigh(&iv)?;
        let stop_sum = above + w;
        let kind = if stop_sum >= threshold {
            MemberKind::Leaf
        } else if iv.level >= max_depth {
            MemberKind::Truncated
        } else {
            MemberKind::Internal
        };
        if kind == MemberKind::Internal {
            for c in iv.children()? {
                queue.push_back((c, stop_sum));
            }
        }
        members.push(Member {
            interval: iv,
            kind,
            alpha: a,
            weight: w,
            stop_sum,
        });
    }
    members.sort_by(|x, y| x.interval.cmp(&y.interval));
    Ok(Tree {
        top,
        members,
        max_depth,
        null_top: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum StopMode {
    /// Stop on `Σ α²(J)` over the chain from the top.
    Interval,
    /// Stop on `Σ α_s²(B_J)` with balls from [`select_ball`].
    Ball { samples: usize },
}

impl Default for StopMode {
    fn default() -> Self {
        StopMode::Interval
    }
}

impl StopMode {
    pub fn ball() -> Self {
        StopMode::Ball {
            samples: DEFAULT_BALL_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub epsilon: f64,
    pub mode: StopMode,
    pub max_depth: u32,
    /// Trees in generation order.
    pub trees: Vec<Tree>,
}

impl Forest {
    /// The tree owning `iv`: the one with the deepest top containing it.
    pub fn owner(&self, iv: &DyadicInterval) -> Option<&Tree> {
        (0..=iv.level.min(self.max_depth)).rev().find_map(|level| {
            let top = iv.ancestor(level)?;
            self.trees
                .iter()
                .find(|t| t.top == top)
                .filter(|t| t.contains(iv))
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.trees.iter().map(|t| t.leaves().count()).sum()
    }
}

fn doubling_violation(iv: &DyadicInterval) -> Error {
    Error::DoublingViolation {
        interval: iv.to_string(),
        detail: "ν vanishes on a checked interval".into(),
    }
}

/// Stopping-time forest: each tree stops where the ancestor sum of squared
/// α-numbers first reaches `ε²`; children of stopped intervals start new
/// trees, and `μ`-null tops get full non-stopping trees.
pub fn stopping_forest(
    mu: &Measure,
    nu: &Measure,
    epsilon: f64,
    max_depth: u32,
    mode: StopMode,
) -> Result<Forest> {
    if !(epsilon > 0.0) {
        return param(format!("ε = {epsilon} must be positive"));
    }
    if max_depth > MAX_LEVEL {
        return Err(Error::Range(format!("depth {max_depth} exceeds {MAX_LEVEL}")));
    }
    let weigh = |iv: &DyadicInterval| -> Result<(f64, f64)> {
        let geom = iv.unit_interval();
        if nu.mass_of(&geom) <= 0.0 {
            return Err(doubling_violation(iv));
        }
        let a = alpha(mu, nu, &geom);
        let w = match mode {
            StopMode::Interval => a * a,
            StopMode::Ball { samples } => match select_ball(mu, nu, iv, samples) {
                Ok(b) => b.alpha_smooth * b.alpha_smooth,
                Err(Error::Support(_)) => a * a,
                Err(e) => return Err(e),
            },
        };
        Ok((a, w))
    };
    let threshold = epsilon * epsilon;
    let mut trees = Vec::new();
    let mut tops = vec![DyadicInterval::ROOT];
    while !tops.is_empty() {
        let generation: Vec<Tree> = tops
            .par_iter()
            .map(|top| {
                let geom = top.unit_interval();
                if nu.mass_of(&geom) <= 0.0 {
                    return Err(doubling_violation(top));
                }
                if mu.mass_of(&geom) <= 0.0 {
                    return Ok(Tree {
                        top: *top,
                        members: vec![Member {
                            interval: *top,
                            kind: if top.level >= max_depth {
                                MemberKind::Truncated
                            } else {
                                MemberKind::Internal
                            },
                            alpha: alpha(mu, nu, &geom),
                            weight: 0.0,
                            stop_sum: 0.0,
                        }],
                        max_depth,
                        null_top: true,
                    });
                }
                build_tree(*top, max_depth, threshold, &weigh)
            })
            .collect::<Result<_>>()?;
        tops = Vec::new();
        for t in &generation {
            for l in t.leaves() {
                if l.interval.level < max_depth {
                    tops.extend(l.interval.children()?);
                }
            }
        }
        trees.extend(generation);
    }
    Ok(Forest {
        epsilon,
        mode,
        max_depth,
        trees,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDoubling {
    pub bound: f64,
    /// `max μ(Î)/μ(I)` over non-top members.
    pub worst_ratio: f64,
    pub worst: Option<DyadicInterval>,
    pub checked: usize,
}

impl TreeDoubling {
    pub fn holds(&self) -> bool {
        self.worst_ratio <= self.bound * (1.0 + 1e-12)
    }
}

/// `μ(Î) ≤ D·μ(I)` for every member `I` other than the top.
pub fn tree_doubling_check(mu: &Measure, tree: &Tree, d: f64) -> TreeDoubling {
    let mut report = TreeDoubling {
        bound: d,
        worst_ratio: 0.0,
        worst: None,
        checked: 0,
    };
    if tree.null_top {
        return report;
    }
    for m in &tree.members[1..] {
        let parent = m.interval.parent().expect("non-top members have parents");
        let (p, c) = (
            mu.mass_of(&parent.unit_interval()),
            mu.mass_of(&m.interval.unit_interval()),
        );
        report.checked += 1;
        let ratio = if c > 0.0 {
            p / c
        } else if p > 0.0 {
            f64::INFINITY
        } else {
            continue;
        };
        if ratio > report.worst_ratio {
            report.worst_ratio = ratio;
            report.worst = Some(m.interval);
        }
    }
    report
}

/// `ν_T = ν|∂T + Σ_{leaves} (ν(L)/μ(L))·μ|_L`, with `∂T` resolved into the
/// truncated cells.
pub fn adapted_measure(nu: &Measure, mu: &Measure, tree: &Tree) -> Result<Measure> {
    let mut parts = Vec::new();
    for m in tree.cells().chain(tree.null_top.then(|| &tree.members[0])) {
        let g = m.interval.unit_interval();
        let nu_mass = nu.mass_of(&g);
        if nu_mass <= 0.0 {
            return domain(format!("ν vanishes on tree member {}", m.interval));
        }
        if m.kind == MemberKind::Leaf {
            let mu_mass = mu.mass_of(&g);
            if mu_mass <= 0.0 {
                return domain(format!("μ vanishes on leaf {}", m.interval));
            }
            parts.push(mu.restrict(g.a, g.b).scaled(nu_mass / mu_mass));
        } else {
            parts.push(nu.restrict(g.a, g.b));
        }
    }
    Measure::disjoint_union(&parts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlesonComparison {
    /// `Σ_{I∈T} Δ²(I)μ(I)`.
    pub sum_delta: f64,
    /// `Σ_{I∈T∖Leaves} α²(I)μ(I)`.
    pub sum_alpha: f64,
    pub top_mass: f64,
    /// `sum_delta / (sum_alpha + top_mass)`, zero for a null top.
    pub ratio: f64,
}

/// Both sides of the Δ-versus-α Carleson comparison on one tree, after
/// checking that `μ` is `(T, D)`-doubling.
pub fn carleson_comparison(mu: &Measure, nu: &Measure, tree: &Tree, d: f64) -> Result<CarlesonComparison> {
    let doubling = tree_doubling_check(mu, tree, d);
    if !doubling.holds() {
        return Err(Error::Precondition(format!(
            "μ is not (T, {d})-doubling: ratio {} at {}",
            doubling.worst_ratio,
            doubling.worst.map(|w| w.to_string()).unwrap_or_default()
        )));
    }
    let top_mass = mu.mass_of(&tree.top.unit_interval());
    let (mut sd, mut sa) = (CompensatedSum::new(), CompensatedSum::new());
    if !tree.null_top {
        for m in &tree.members {
            let g = m.interval.unit_interval();
            let mass = mu.mass_of(&g);
            let dl = delta(mu, nu, &g);
            sd.add(dl * dl * mass);
            if m.kind != MemberKind::Leaf {
                let a = alpha(mu, nu, &g);
                sa.add(a * a * mass);
            }
        }
    }
    let (sum_delta, sum_alpha) = (sd.value(), sa.value());
    let denom = sum_alpha + top_mass;
    Ok(CarlesonComparison {
        sum_delta,
        sum_alpha,
        top_mass,
        ratio: if denom > 0.0 { sum_delta / denom } else { 0.0 },
    })
}
