//! Dyadic intervals in standard and shifted systems.
//!
//! A system is the family `[k·2^−j + s, (k+1)·2^−j + s)` for one offset `s`
//! and all levels `j ≥ 0`, indexed over all integers `k`. Nestedness forces
//! every per-level shift table to reduce to such a single offset, which is
//! how [`DyadicSystem::generalized`] validates its input.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::measure::{Interval, Measure};

/// Deepest level any interval may have; keeps endpoints exact in `f64`.
pub const MAX_LEVEL: u32 = 52;
/// Largest interval length covered by [`shifted_systems`].
pub const COVER_RADIUS: f64 = 0.125;
/// Comparability factor between a covered interval and its cover.
pub const COVER_FACTOR: f64 = 8.0;

fn pow2_neg(level: u32) -> f64 {
    (-(level as f64)).exp2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct DyadicInterval {
    pub system: u8,
    pub level: u32,
    pub index: i64,
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}@{}", self.level, self.index, self.system)
    }
}

impl FromStr for DyadicInterval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("expected `level:index@system`, got `{s}`"));
        let (body, system) = s.split_once('@').ok_or_else(bad)?;
        let (level, index) = body.split_once(':').ok_or_else(bad)?;
        let iv = DyadicInterval {
            system: system.trim().parse().map_err(|_| bad())?,
            level: level.trim().parse().map_err(|_| bad())?,
            index: index.trim().parse().map_err(|_| bad())?,
        };
        if iv.level > MAX_LEVEL {
            return Err(Error::Range(format!("level {} exceeds {MAX_LEVEL}", iv.level)));
        }
        Ok(iv)
    }
}

impl From<DyadicInterval> for String {
    fn from(iv: DyadicInterval) -> String {
        iv.to_string()
    }
}

impl TryFrom<String> for DyadicInterval {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Single navigation step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Parent,
    Left,
    Right,
    MinusChain(u32),
    PlusChain(u32),
}

impl DyadicInterval {
    pub const ROOT: DyadicInterval = DyadicInterval {
        system: 0,
        level: 0,
        index: 0,
    };

    pub fn new(system: u8, level: u32, index: i64) -> Self {
        Self {
            system,
            level,
            index,
        }
    }

    /// Interval `[k·2^−j, (k+1)·2^−j)` of the standard system.
    pub fn standard(level: u32, index: i64) -> Self {
        Self::new(0, level, index)
    }

    pub fn len(&self) -> f64 {
        pow2_neg(self.level)
    }

    pub fn parent(&self) -> Result<Self> {
        if self.level == 0 {
            return Err(Error::Range(format!("{self} has no parent")));
        }
        Ok(Self::new(self.system, self.level - 1, self.index >> 1))
    }

    fn child(&self, right: bool) -> Result<Self> {
        if self.level >= MAX_LEVEL {
            return Err(Error::Range(format!("children of {self} exceed level {MAX_LEVEL}")));
        }
        Ok(Self::new(self.system, self.level + 1, 2 * self.index + right as i64))
    }

    pub fn left(&self) -> Result<Self> {
        self.child(false)
    }

    pub fn right(&self) -> Result<Self> {
        self.child(true)
    }

    pub fn children(&self) -> Result<[Self; 2]> {
        Ok([self.left()?, self.right()?])
    }

    /// `I_{k−}`: `k` successive left halves.
    pub fn minus_chain(&self, k: u32) -> Result<Self> {
        (0..k).try_fold(*self, |i, _| i.left())
    }

    /// `I_{k+}`: `k` successive right halves.
    pub fn plus_chain(&self, k: u32) -> Result<Self> {
        (0..k).try_fold(*self, |i, _| i.right())
    }

    pub fn is_right_child(&self) -> bool {
        self.level > 0 && self.index & 1 == 1
    }

    pub fn ancestor(&self, level: u32) -> Option<Self> {
        (level <= self.level).then(|| {
            Self::new(self.system, level, self.index >> (self.level - level))
        })
    }

    pub fn contains(&self, other: &Self) -> bool {
        other.ancestor(self.level) == Some(*self) && self.system == other.system
    }

    /// Geometry in the standard system, ignoring `system`.
    pub fn unit_interval(&self) -> Interval {
        let w = self.len();
        Interval::new(self.index as f64 * w, (self.index + 1) as f64 * w)
    }
}

pub fn navigate(iv: &DyadicInterval, step: Step) -> Result<DyadicInterval> {
    match step {
        Step::Parent => iv.parent(),
        Step::Left => iv.left(),
        Step::Right => iv.right(),
        Step::MinusChain(k) => iv.minus_chain(k),
        Step::PlusChain(k) => iv.plus_chain(k),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Standard,
    Shifted,
    Generalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicSystem {
    pub id: u8,
    pub kind: SystemKind,
    pub offset: f64,
    pub max_level: u32,
}

impl DyadicSystem {
    pub fn standard() -> Self {
        Self {
            id: 0,
            kind: SystemKind::Standard,
            offset: 0.0,
            max_level: MAX_LEVEL,
        }
    }

    pub fn shifted(id: u8, offset: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&offset) {
            return param(format!("offset {offset} must lie in [0,1)"));
        }
        Ok(Self {
            id,
            kind: if offset == 0.0 {
                SystemKind::Standard
            } else {
                SystemKind::Shifted
            },
            offset,
            max_level: MAX_LEVEL,
        })
    }

    /// System given by one shift per level; nestedness requires
    /// `shift_j ≡ shift_0 (mod 2^−j)`.
    pub fn generalized(id: u8, shifts: &[f64]) -> Result<Self> {
        let Some(&s0) = shifts.first() else {
            return param("empty shift table");
        };
        for (j, &s) in shifts.iter().enumerate() {
            let scaled = (s - s0) * (j as f64).exp2();
            if !s.is_finite() || (scaled - scaled.round()).abs() > 1e-9 {
                return param(format!(
                    "shift at level {j} breaks nestedness: {s} is not congruent to {s0} mod 2^-{j}"
                ));
            }
        }
        Ok(Self {
            id,
            kind: SystemKind::Generalized,
            offset: s0.rem_euclid(1.0),
            max_level: MAX_LEVEL,
        })
    }

    pub fn interval(&self, iv: &DyadicInterval) -> Interval {
        let w = iv.len();
        Interval::new(
            iv.index as f64 * w + self.offset,
            (iv.index + 1) as f64 * w + self.offset,
        )
    }

    pub fn locate(&self, x: f64, level: u32) -> DyadicInterval {
        let scale = (level as f64).exp2();
        let mut k = ((x - self.offset) * scale).floor() as i64;
        let iv = |k| DyadicInterval::new(self.id, level, k);
        // Guard against rounding when the offset is not dyadic.
        if self.interval(&iv(k)).a > x {
            k -= 1;
        } else if self.interval(&iv(k)).b <= x {
            k += 1;
        }
        iv(k)
    }

    /// Level-`level` intervals meeting `[0,1)`.
    pub fn window(&self, level: u32) -> Vec<DyadicInterval> {
        let first = self.locate(0.0, level).index;
        let last = self.locate(1.0 - pow2_neg(level.min(MAX_LEVEL)) * 0.25, level).index;
        (first..=last.max(first))
            .map(|k| DyadicInterval::new(self.id, level, k))
            .filter(|iv| {
                let g = self.interval(iv);
                g.b > 0.0 && g.a < 1.0
            })
            .collect()
    }

    /// Level-`level` intervals contained in `[0,1]`.
    pub fn window_inside(&self, level: u32) -> Vec<DyadicInterval> {
        self.window(level)
            .into_iter()
            .filter(|iv| {
                let g = self.interval(iv);
                g.a >= 0.0 && g.b <= 1.0
            })
            .collect()
    }

    /// Constructive check of the partition, length and two-children axioms
    /// on levels `0..=levels`.
    pub fn check_axioms(&self, levels: u32) -> Result<()> {
        let tol = 1e-12;
        for level in 0..=levels {
            let row = self.window(level);
            let w = pow2_neg(level);
            let first = self.interval(&row[0]);
            let last = self.interval(&row[row.len() - 1]);
            if first.a > 0.0 || last.b < 1.0 {
                return Err(Error::Precondition(format!("level {level} does not cover [0,1)")));
            }
            for pair in row.windows(2) {
                let (x, y) = (self.interval(&pair[0]), self.interval(&pair[1]));
                if (x.b - y.a).abs() > tol {
                    return Err(Error::Precondition(format!(
                        "level {level}: gap or overlap between {} and {}",
                        pair[0], pair[1]
                    )));
                }
            }
            for iv in &row {
                let g = self.interval(iv);
                if (g.len() - w).abs() > tol * w.max(1e-300) {
                    return Err(Error::Precondition(format!("{iv} has wrong length")));
                }
                if level < levels {
                    let [l, r] = iv.children()?;
                    let (gl, gr) = (self.interval(&l), self.interval(&r));
                    if (gl.a - g.a).abs() > tol || (gr.b - g.b).abs() > tol || (gl.b - gr.a).abs() > tol
                    {
                        return Err(Error::Precondition(format!("{iv} is not split by its children")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Finest interval of this system containing the closed interval `[a, b]`.
    pub fn covering(&self, a: f64, b: f64) -> Option<DyadicInterval> {
        if !(b >= a) {
            return None;
        }
        let start = if b > a {
            ((1.0 / (b - a)).log2().floor().max(0.0) as u32).min(self.max_level)
        } else {
            self.max_level
        };
        (0..=start).rev().find_map(|level| {
            let iv = self.locate(a, level);
            let g = self.interval(&iv);
            (g.a <= a && b < g.b).then_some(iv)
        })
    }
}

/// `count` systems (2 or 3) such that every interval of length at most
/// [`COVER_RADIUS`] lies in a member of one of them at most
/// [`COVER_FACTOR`] times longer.
pub fn shifted_systems(count: usize) -> Result<Vec<DyadicSystem>> {
    let offsets: &[f64] = match count {
        2 => &[0.0, 1.0 / 3.0],
        3 => &[0.0, 1.0 / 3.0, 2.0 / 3.0],
        _ => return param(format!("count must be 2 or 3, got {count}")),
    };
    offsets
        .iter()
        .enumerate()
        .map(|(i, &s)| DyadicSystem::shifted(i as u8, s))
        .collect()
}

/// Finest cover of `[a, b]` over several systems: (system position, interval).
pub fn covering_interval(systems: &[DyadicSystem], a: f64, b: f64) -> Option<(usize, DyadicInterval)> {
    systems
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.covering(a, b).map(|iv| (i, iv)))
        .max_by_key(|(i, iv)| (iv.level, std::cmp::Reverse(*i)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub samples: usize,
    pub uncovered: usize,
    pub worst_ratio: f64,
}

impl CoverReport {
    pub fn holds(&self) -> bool {
        self.uncovered == 0 && self.worst_ratio <= COVER_FACTOR
    }
}

/// Checks the covering property on the given `[a, b]` samples.
pub fn covering_check(systems: &[DyadicSystem], samples: &[(f64, f64)]) -> CoverReport {
    let mut report = CoverReport {
        samples: samples.len(),
        uncovered: 0,
        worst_ratio: 0.0,
    };
    for &(a, b) in samples {
        match covering_interval(systems, a, b) {
            Some((i, iv)) => {
                let ratio = systems[i].interval(&iv).len() / (b - a);
                report.worst_ratio = report.worst_ratio.max(ratio);
            }
            None => report.uncovered += 1,
        }
    }
    report
}

/// `Δ(I) = |μ(I₋)/μ(I) − ν(I₋)/ν(I)|`, zero when either mass vanishes.
pub fn delta(mu: &Measure, nu: &Measure, iv: &Interval) -> f64 {
    let (mi, ni) = (mu.mass_of(iv), nu.mass_of(iv));
    if mi <= 0.0 || ni <= 0.0 {
        return 0.0;
    }
    let half = iv.left_half();
    (mu.mass_of(&half) / mi - nu.mass_of(&half) / ni).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    /// `max ν(Î)/ν(I)`; infinite when some checked child is null.
    pub constant: f64,
    pub worst: Option<DyadicInterval>,
    pub depth: u32,
}

impl DoublingReport {
    pub fn is_finite(&self) -> bool {
        self.constant.is_finite()
    }
}

/// Exact `max ν(Î)/ν(I)` over levels `1..=depth` of `system` inside `[0,1]`.
pub fn doubling_constant(nu: &Measure, system: &DyadicSystem, depth: u32) -> DoublingReport {
    let mut report = DoublingReport {
        constant: 1.0,
        worst: None,
        depth,
    };
    for level in 1..=depth.min(system.max_level) {
        for iv in system.window_inside(level) {
            let parent = iv.parent().expect("level ≥ 1");
            let pg = system.interval(&parent);
            if pg.a < 0.0 || pg.b > 1.0 {
                continue;
            }
            let child = nu.mass_of(&system.interval(&iv));
            let ratio = if child > 0.0 {
                nu.mass_of(&pg) / child
            } else {
                f64::INFINITY
            };
            if ratio > report.constant {
                report.constant = ratio;
                report.worst = Some(iv);
                if ratio.is_infinite() {
                    return report;
                }
            }
        }
    }
    report
}

/// Number of chain steps: finite (`−1` allowed for the right chain) or unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainLength {
    Finite(i64),
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTip {
    pub interval: DyadicInterval,
    /// Resolved `N₁` (truncated at the level cap when infinite).
    pub n1: i64,
    /// Resolved `N₂`.
    pub n2: i64,
    pub tail: Vec<DyadicInterval>,
    /// Empty parts (infinite chains) are omitted.
    pub tip: Vec<DyadicInterval>,
    pub truncated: bool,
}

/// Tail: `I_{k−}` for `k ≤ N₁` and `(I₋)_{k+}` for `k ≤ N₂`; Tip:
/// `I_{(N₁+1)−} ∪ (I₋)_{(N₂+1)+}`. Infinite chains stop at `max_level`.
pub fn tail_tip(
    iv: &DyadicInterval,
    n1: ChainLength,
    n2: ChainLength,
    max_level: u32,
) -> Result<TailTip> {
    let max_level = max_level.min(MAX_LEVEL);
    let room = max_level as i64 - iv.level as i64;
    let (n1v, n1_inf) = match n1 {
        ChainLength::Finite(n) if n < 0 => return param(format!("N1 = {n} must be ≥ 0")),
        ChainLength::Finite(n) => (n, false),
        ChainLength::Infinite => (room, true),
    };
    let (n2v, n2_inf) = match n2 {
        ChainLength::Finite(n) if n < -1 => return param(format!("N2 = {n} must be ≥ -1")),
        ChainLength::Finite(-1) if n1v != 0 || n1_inf => {
            return param("N2 = -1 is only allowed with N1 = 0")
        }
        ChainLength::Finite(n) => (n, false),
        ChainLength::Infinite => (room - 1, true),
    };
    if n1v < 0 || n2v < -1 {
        return Err(Error::Range(format!("{iv} is already at the level cap")));
    }
    let deepest = iv.level as i64 + (n1v + 1).max(n2v + 2);
    if deepest > MAX_LEVEL as i64 + 1 {
        return Err(Error::Range(format!("chains from {iv} pass level {MAX_LEVEL}")));
    }
    let minus = iv.left()?;
    let mut tail = Vec::new();
    for k in 0..=n1v {
        tail.push(iv.minus_chain(k as u32)?);
    }
    for k in 0..=n2v {
        let j = minus.plus_chain(k as u32)?;
        if !tail.contains(&j) {
            tail.push(j);
        }
    }
    let mut tip = Vec::new();
    if !n1_inf {
        tip.push(iv.minus_chain(n1v as u32 + 1)?);
    }
    if !n2_inf {
        let j = minus.plus_chain((n2v + 1) as u32)?;
        if !tip.contains(&j) {
            tip.push(j);
        }
    }
    Ok(TailTip {
        interval: *iv,
        n1: n1v,
        n2: n2v,
        tail,
        tip,
        truncated: n1_inf || n2_inf,
    })
}
