//! Finite measures on `[0,1]` built from point masses and uniform pieces.
//!
//! Masses of arbitrary intervals come from a pairwise sum tree, so dyadic
//! masses of deep cascades keep their relative precision even when they are
//! many orders of magnitude below the total.

mod cdf;
mod generate;
mod pwl;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::numeric::{compensated_sum, SumTree};

pub use cdf::{cdf_difference, CdfDifference};
pub use generate::{generate, CascadeOverride, Example53Part, MeasureSpec};
pub use pwl::PiecewiseLinearFn;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: f64,
    pub weight: f64,
}

/// Uniform mass on `[left, right)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub left: f64,
    pub right: f64,
    pub mass: f64,
}

impl Piece {
    pub fn density(&self) -> f64 {
        self.mass / (self.right - self.left)
    }

    /// Mass of this piece inside `[a, b)`.
    pub fn mass_within(&self, a: f64, b: f64) -> f64 {
        let l = self.left.max(a);
        let r = self.right.min(b);
        if r <= l {
            0.0
        } else if l == self.left && r == self.right {
            self.mass
        } else {
            self.mass * ((r - l) / (self.right - self.left))
        }
    }
}

/// Real interval `[a, b)`; balls are stored as the interval they span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn left_half(&self) -> Self {
        Self::new(self.a, self.mid())
    }

    pub fn right_half(&self) -> Self {
        Self::new(self.mid(), self.b)
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.a <= other.a && other.b <= self.b
    }

    /// Image of the unit-coordinate interval `[u, v)` under `t ↦ a + (b-a)t`.
    pub fn sub(&self, u: f64, v: f64) -> Self {
        let w = self.len();
        Self::new(self.a + w * u, self.a + w * v)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MeasureDump {
    atoms: Vec<Atom>,
    pieces: Vec<Piece>,
    total: f64,
}

#[derive(Debug)]
struct MassIndex {
    pieces: SumTree,
    atoms: SumTree,
}

/// Immutable finite measure: sorted atoms plus sorted, disjoint uniform pieces.
#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "MeasureDump", into = "MeasureDump")]
pub struct Measure {
    atoms: Vec<Atom>,
    pieces: Vec<Piece>,
    total: f64,
    index: OnceLock<MassIndex>,
}

impl Clone for Measure {
    fn clone(&self) -> Self {
        Self::from_sorted(self.atoms.clone(), self.pieces.clone())
    }
}

impl TryFrom<MeasureDump> for Measure {
    type Error = crate::error::Error;

    fn try_from(d: MeasureDump) -> Result<Self> {
        Measure::new(d.atoms, d.pieces)
    }
}

impl From<Measure> for MeasureDump {
    fn from(m: Measure) -> Self {
        MeasureDump {
            total: m.total,
            atoms: m.atoms,
            pieces: m.pieces,
        }
    }
}

impl Measure {
    /// Validating constructor. Sorts, merges coincident atoms and drops
    /// zero-mass parts.
    pub fn new(mut atoms: Vec<Atom>, mut pieces: Vec<Piece>) -> Result<Self> {
        for a in &atoms {
            if !(a.position.is_finite() && a.weight.is_finite()) || a.weight < 0.0 {
                return param(format!("bad atom {a:?}"));
            }
            if !(0.0..=1.0).contains(&a.position) {
                return param(format!("atom at {} lies outside [0,1]", a.position));
            }
        }
        for p in &pieces {
            if !(p.left.is_finite() && p.right.is_finite() && p.mass.is_finite()) || p.mass < 0.0 {
                return param(format!("bad piece {p:?}"));
            }
            if p.left >= p.right || p.left < 0.0 || p.right > 1.0 {
                return param(format!("piece [{}, {}) is empty or outside [0,1]", p.left, p.right));
            }
        }
        atoms.retain(|a| a.weight > 0.0);
        pieces.retain(|p| p.mass > 0.0);
        atoms.sort_by(|x, y| x.position.total_cmp(&y.position));
        pieces.sort_by(|x, y| x.left.total_cmp(&y.left));
        if pieces.windows(2).any(|w| w[0].right > w[1].left) {
            return param("pieces overlap");
        }
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.position == a.position => last.weight += a.weight,
                _ => merged.push(a),
            }
        }
        Ok(Self::from_sorted(merged, pieces))
    }

    /// Caller guarantees sorted, merged, disjoint, in-range input.
    pub(crate) fn from_sorted(atoms: Vec<Atom>, pieces: Vec<Piece>) -> Self {
        let total = compensated_sum(
            atoms.iter().map(|a| a.weight).chain(pieces.iter().map(|p| p.mass)),
        );
        Self {
            atoms,
            pieces,
            total,
            index: OnceLock::new(),
        }
    }

    pub fn zero() -> Self {
        Self::from_sorted(Vec::new(), Vec::new())
    }

    pub fn lebesgue() -> Self {
        Self::from_sorted(
            Vec::new(),
            vec![Piece {
                left: 0.0,
                right: 1.0,
                mass: 1.0,
            }],
        )
    }

    pub fn dirac(position: f64) -> Result<Self> {
        Self::new(
            vec![Atom {
                position,
                weight: 1.0,
            }],
            Vec::new(),
        )
    }

    /// Piecewise-uniform measure with the given masses on the `2^level`
    /// standard dyadic cells.
    pub fn from_cells(level: u32, masses: &[f64]) -> Result<Self> {
        let n = 1usize << level;
        if masses.len() != n {
            return param(format!("expected {n} cell masses, got {}", masses.len()));
        }
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return param("cell masses must be finite and nonnegative");
        }
        let w = (n as f64).recip();
        let pieces = masses
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(k, &m)| Piece {
                left: k as f64 * w,
                right: (k + 1) as f64 * w,
                mass: m,
            })
            .collect();
        Ok(Self::from_sorted(Vec::new(), pieces))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.pieces.is_empty()
    }

    fn index(&self) -> &MassIndex {
        self.index.get_or_init(|| MassIndex {
            pieces: SumTree::new(&self.pieces.iter().map(|p| p.mass).collect::<Vec<_>>()),
            atoms: SumTree::new(&self.atoms.iter().map(|a| a.weight).collect::<Vec<_>>()),
        })
    }

    /// Mass of `[a, b)`, or of `[a, b]` when `closed_right` is set.
    pub fn mass(&self, a: f64, b: f64, closed_right: bool) -> f64 {
        if b < a {
            return 0.0;
        }
        let idx = self.index();
        let atom_lo = self.atoms.partition_point(|t| t.position < a);
        let atom_hi = if closed_right {
            self.atoms.partition_point(|t| t.position <= b)
        } else {
            self.atoms.partition_point(|t| t.position < b)
        };
        let atom_mass = if atom_hi > atom_lo {
            idx.atoms.range(atom_lo, atom_hi)
        } else {
            0.0
        };
        let lo = self.pieces.partition_point(|p| p.right <= a);
        let hi = self.pieces.partition_point(|p| p.left < b);
        let piece_mass = match hi.saturating_sub(lo) {
            0 => 0.0,
            1 => self.pieces[lo].mass_within(a, b),
            2 => self.pieces[lo].mass_within(a, b) + self.pieces[lo + 1].mass_within(a, b),
            _ => {
                self.pieces[lo].mass_within(a, b)
                    + idx.pieces.range(lo + 1, hi - 1)
                    + self.pieces[hi - 1].mass_within(a, b)
            }
        };
        atom_mass + piece_mass
    }

    pub fn mass_of(&self, iv: &Interval) -> f64 {
        self.mass(iv.a, iv.b, false)
    }

    /// Weight of the atom sitting exactly at `x` (zero if none).
    pub fn atom_at(&self, x: f64) -> f64 {
        let i = self.atoms.partition_point(|t| t.position < x);
        match self.atoms.get(i) {
            Some(t) if t.position == x => t.weight,
            _ => 0.0,
        }
    }

    fn slice_pieces(&self, a: f64, b: f64) -> &[Piece] {
        let lo = self.pieces.partition_point(|p| p.right <= a);
        let hi = self.pieces.partition_point(|p| p.left < b).max(lo);
        &self.pieces[lo..hi]
    }

    fn slice_atoms(&self, a: f64, b: f64) -> &[Atom] {
        let lo = self.atoms.partition_point(|t| t.position < a);
        let hi = self.atoms.partition_point(|t| t.position < b).max(lo);
        &self.atoms[lo..hi]
    }

    /// Restriction to `[a, b)` (clipped to `[0,1]`).
    pub fn restrict(&self, a: f64, b: f64) -> Measure {
        if b <= a {
            return Measure::zero();
        }
        let atoms = self.slice_atoms(a, b).to_vec();
        let pieces = self
            .slice_pieces(a, b)
            .iter()
            .filter_map(|p| {
                let l = p.left.max(a);
                let r = p.right.min(b);
                (r > l).then(|| Piece {
                    left: l,
                    right: r,
                    mass: p.mass_within(a, b),
                })
            })
            .collect();
        Measure::from_sorted(atoms, pieces)
    }

    /// Pushforward of the restriction to `[a, b)` under `x ↦ (x-a)/(b-a)`.
    pub fn blowup(&self, a: f64, b: f64) -> Measure {
        if b <= a {
            return Measure::zero();
        }
        let w = b - a;
        let atoms = self
            .slice_atoms(a, b)
            .iter()
            .map(|t| Atom {
                position: ((t.position - a) / w).clamp(0.0, 1.0),
                weight: t.weight,
            })
            .collect();
        let mut pieces = Vec::with_capacity(self.slice_pieces(a, b).len());
        for p in self.slice_pieces(a, b) {
            let l = p.left.max(a);
            let r = p.right.min(b);
            if r <= l {
                continue;
            }
            let (ml, mr) = (((l - a) / w).max(0.0), ((r - a) / w).min(1.0));
            if mr > ml {
                pieces.push(Piece {
                    left: ml,
                    right: mr,
                    mass: p.mass_within(a, b),
                });
            }
        }
        Measure::from_sorted(atoms, pieces)
    }

    pub fn blowup_of(&self, iv: &Interval) -> Measure {
        self.blowup(iv.a, iv.b)
    }

    /// `c · m` for `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Measure {
        if c == 0.0 {
            return Measure::zero();
        }
        Measure::from_sorted(
            self.atoms
                .iter()
                .map(|t| Atom {
                    position: t.position,
                    weight: t.weight * c,
                })
                .collect(),
            self.pieces
                .iter()
                .map(|p| Piece {
                    mass: p.mass * c,
                    ..*p
                })
                .collect(),
        )
    }

    /// `m / m(total)`, or the zero measure when the total vanishes.
    pub fn normalized(&self) -> Measure {
        if self.total > 0.0 {
            self.scaled(self.total.recip())
        } else {
            Measure::zero()
        }
    }

    /// Union of measures whose pieces are pairwise disjoint.
    pub fn disjoint_union<'a, I: IntoIterator<Item = &'a Measure>>(parts: I) -> Result<Measure> {
        let mut atoms = Vec::new();
        let mut pieces = Vec::new();
        for m in parts {
            atoms.extend_from_slice(&m.atoms);
            pieces.extend_from_slice(&m.pieces);
        }
        Measure::new(atoms, pieces)
    }

    /// Exact integral of a piecewise-linear function.
    pub fn integrate(&self, f: &PiecewiseLinearFn) -> f64 {
        let (lo, hi) = f.support();
        let atom_part = compensated_sum(
            self.slice_atoms(lo, f64::INFINITY)
                .iter()
                .take_while(|t| t.position <= hi)
                .map(|t| t.weight * f.eval(t.position)),
        );
        let piece_part = compensated_sum(
            self.slice_pieces(lo, hi)
                .iter()
                .map(|p| p.density() * f.integral_over(p.left, p.right)),
        );
        atom_part + piece_part
    }

    /// Dyadic levels `≤ depth` whose cell boundaries carry an atom.
    pub fn boundary_atoms(&self, depth: u32) -> Vec<(f64, u32)> {
        let scale = (1u64 << depth) as f64;
        self.atoms
            .iter()
            .filter_map(|t| {
                let s = t.position * scale;
                if s.fract() != 0.0 {
                    return None;
                }
                let mut level = depth;
                let mut k = s as u64;
                while level > 0 && k % 2 == 0 {
                    k /= 2;
                    level -= 1;
                }
                Some((t.position, level))
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MeasureDump {
            atoms: self.atoms.clone(),
            pieces: self.pieces.clone(),
            total: self.total,
        })
        .expect("measure dump is plain data")
    }
}

/// Integral of `φ_I = φ ∘ T_I` against `m`.
pub fn phi_mass(m: &Measure, iv: &Interval) -> f64 {
    m.integrate(&PiecewiseLinearFn::tent(iv.a, iv.b))
}
