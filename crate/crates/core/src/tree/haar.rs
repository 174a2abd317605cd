//! μ-adapted Haar functions on a tree and the product representation of
//! `ν/μ`.
//!
//! Masses are normalized so that `μ(top) = ν(top) = 1`. The Haar function of
//! `I` is `h_I = c⁺χ_{I₊} − c⁻χ_{I₋}` with `c^± = μ(I)/μ(I_±)`, which has
//! `μ`-mean zero.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MemberKind, Tree};
use crate::dyadic::DyadicInterval;
use crate::error::{domain, Error, Result};
use crate::measure::Measure;
use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaarCoefficient {
    /// `μ(I₋)/μ(I) − ν(I₋)/ν(I)`.
    pub a: f64,
    /// `ν(I₊)/ν(I) − μ(I₊)/μ(I)`; equal to `a` up to rounding.
    pub a_alt: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    /// Normalized masses of `I`, `I₋`, `I₊`.
    pub mu: [f64; 3],
    pub nu: [f64; 3],
}

impl HaarCoefficient {
    /// `h_I(x)` for `x ∈ I`, given which half it lies in.
    pub fn h(&self, right_half: bool) -> f64 {
        if right_half {
            self.c_plus
        } else {
            -self.c_minus
        }
    }

    /// `∫ h_I² dμ = μ(I)²/μ(I₊) + μ(I)²/μ(I₋)`.
    pub fn norm_sq(&self) -> f64 {
        self.c_plus * self.c_plus * self.mu[2] + self.c_minus * self.c_minus * self.mu[1]
    }

    /// `∫ h_I dμ`, zero up to rounding.
    pub fn mean(&self) -> f64 {
        self.c_plus * self.mu[2] - self.c_minus * self.mu[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarSystem {
    pub top: DyadicInterval,
    /// Unnormalized `μ(top)` and `ν(top)`.
    pub mu_top: f64,
    pub nu_top: f64,
    /// One entry per internal tree member.
    pub coefficients: BTreeMap<DyadicInterval, HaarCoefficient>,
    /// Normalized `(μ, ν)` masses of the cells tiling the top.
    pub cells: BTreeMap<DyadicInterval, (f64, f64)>,
}

fn in_right_half(iv: &DyadicInterval, x: f64) -> bool {
    let g = iv.unit_interval();
    x >= g.mid()
}

pub fn haar(mu: &Measure, nu: &Measure, tree: &Tree) -> Result<HaarSystem> {
    if tree.null_top {
        return domain(format!("μ vanishes on the top {}", tree.top));
    }
    let tg = tree.top.unit_interval();
    let (mu_top, nu_top) = (mu.mass_of(&tg), nu.mass_of(&tg));
    let masses = |iv: &DyadicInterval| -> Result<(f64, f64)> {
        let g = iv.unit_interval();
        let (m, n) = (mu.mass_of(&g) / mu_top, nu.mass_of(&g) / nu_top);
        if m > 0.0 && n > 0.0 {
            Ok((m, n))
        } else {
            domain(format!("zero mass on tree member {iv}"))
        }
    };
    let mut coefficients = BTreeMap::new();
    let mut cells = BTreeMap::new();
    for m in &tree.members {
        let (mi, ni) = masses(&m.interval)?;
        if m.kind != MemberKind::Internal {
            cells.insert(m.interval, (mi, ni));
            continue;
        }
        let [l, r] = m.interval.children()?;
        let (ml, nl) = masses(&l)?;
        let (mr, nr) = masses(&r)?;
        coefficients.insert(
            m.interval,
            HaarCoefficient {
                a: ml / mi - nl / ni,
                a_alt: nr / ni - mr / mi,
                c_minus: mi / ml,
                c_plus: mi / mr,
                mu: [mi, ml, mr],
                nu: [ni, nl, nr],
            },
        );
    }
    Ok(HaarSystem {
        top: tree.top,
        mu_top,
        nu_top,
        coefficients,
        cells,
    })
}

impl HaarSystem {
    /// `∫ h_I h_J dμ` from the coefficient tables; zero for `I ≠ J`.
    pub fn inner_product(&self, i: &DyadicInterval, j: &DyadicInterval) -> Option<f64> {
        let (ci, cj) = (self.coefficients.get(i)?, self.coefficients.get(j)?);
        if i == j {
            return Some(ci.norm_sq());
        }
        let (outer, inner, co, cin) = if j.contains(i) {
            (j, i, cj, ci)
        } else if i.contains(j) {
            (i, j, ci, cj)
        } else {
            return Some(0.0);
        };
        let right = inner.ancestor(outer.level + 1)?.is_right_child();
        Some(co.h(right) * cin.mean())
    }

    /// Strict tree ancestors of `iv`, top first.
    fn ancestors<'a>(&'a self, iv: &DyadicInterval) -> impl Iterator<Item = (DyadicInterval, &'a HaarCoefficient)> + 'a {
        let iv = *iv;
        (self.top.level..iv.level).filter_map(move |level| {
            let j = iv.ancestor(level)?;
            self.coefficients.get(&j).map(|c| (j, c))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductCheck {
    /// `∏_{J ⊋ I} (1 + a_J h_J(x))` at a point of `I`.
    pub lhs: f64,
    /// `ν(I)/μ(I)` (normalized).
    pub rhs: f64,
}

impl ProductCheck {
    pub fn error(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

pub fn product_check(sys: &HaarSystem, iv: &DyadicInterval) -> Result<ProductCheck> {
    if !sys.top.contains(iv) {
        return Err(Error::Precondition(format!("{iv} is outside the tree")));
    }
    let (mi, ni) = if let Some(c) = sys.coefficients.get(iv) {
        (c.mu[0], c.nu[0])
    } else if let Some(&(m, n)) = sys.cells.get(iv) {
        (m, n)
    } else {
        return Err(Error::Precondition(format!("{iv} is not a tree member")));
    };
    let x = iv.unit_interval().mid();
    let mut lhs = 1.0;
    for (j, c) in sys.ancestors(iv) {
        lhs *= 1.0 + c.a * c.h(in_right_half(&j, x));
    }
    Ok(ProductCheck { lhs, rhs: ni / mi })
}

/// `g_N(x) = Σ a_J h_J(x)` over internal members `J ∋ x` above level `n`.
pub fn partial_sum_g(sys: &HaarSystem, x: f64, n: u32) -> f64 {
    let tg = sys.top.unit_interval();
    if x < tg.a || x >= tg.b {
        return 0.0;
    }
    let mut s = CompensatedSum::new();
    for level in sys.top.level..n {
        let j = DyadicInterval::standard(level, (x * f64::from(level).exp2()).floor() as i64);
        match sys.coefficients.get(&j) {
            Some(c) => s.add(c.a * c.h(in_right_half(&j, x))),
            None => break,
        }
    }
    s.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GNorm {
    /// `Σ a_J² ‖h_J‖²` over internal members above level `n`.
    pub parseval: f64,
    /// `∫ g_N² dμ` by exact summation over the cells where `g_N` is constant.
    pub quadrature: f64,
    /// `max ‖h_J‖² / (max(c⁺,c⁻)² μ(J))`, at most 1.
    pub worst_norm_ratio: f64,
}

pub fn g_l2_norm(sys: &HaarSystem, n: u32) -> GNorm {
    let mut parseval = CompensatedSum::new();
    let mut worst: f64 = 0.0;
    for (j, c) in &sys.coefficients {
        let cmax = c.c_plus.max(c.c_minus);
        worst = worst.max(c.norm_sq() / (cmax * cmax * c.mu[0]));
        if j.level < n {
            parseval.add(c.a * c.a * c.norm_sq());
        }
    }
    // g_N is constant on members at level n and on cells above it.
    let mut quad = CompensatedSum::new();
    let mut add_cell = |iv: &DyadicInterval, mass: f64| {
        let g = partial_sum_g(sys, iv.unit_interval().mid(), n);
        quad.add(g * g * mass);
    };
    for (iv, c) in &sys.coefficients {
        if iv.level == n {
            add_cell(iv, c.mu[0]);
        }
    }
    for (iv, &(m, _)) in &sys.cells {
        if iv.level <= n {
            add_cell(iv, m);
        }
    }
    GNorm {
        parseval: parseval.value(),
        quadrature: quad.value(),
        worst_norm_ratio: worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{generate, MeasureSpec};
    use crate::tree::{stopping_forest, StopMode};

    fn cascade(p: f64, depth: u32) -> Measure {
        generate(&MeasureSpec::Cascade {
            p,
            depth,
            overrides: vec![],
        })
        .unwrap()
    }

    #[test]
    fn cascade_product_closed_form() {
        let c = cascade(0.7, 10);
        let leb = Measure::lebesgue();
        let t = Tree::full(&c, &leb, DyadicInterval::ROOT, 5).unwrap();
        let sys = haar(&c, &leb, &t).unwrap();
        for coef in sys.coefficients.values() {
            assert!((coef.a - 0.2).abs() < 1e-12 && (coef.a - coef.a_alt).abs() < 1e-12);
        }
        let root = &sys.coefficients[&DyadicInterval::ROOT];
        assert!((root.c_minus - 1.0 / 0.7).abs() < 1e-12);
        let p = product_check(&sys, &DyadicInterval::standard(3, 0)).unwrap();
        let expected = (5.0f64 / 7.0).powi(3);
        assert!((p.lhs - expected).abs() < 1e-12 && (p.rhs - expected).abs() < 1e-12);
    }

    #[test]
    fn identical_measures_have_trivial_expansion() {
        let leb = Measure::lebesgue();
        let t = Tree::full(&leb, &leb, DyadicInterval::ROOT, 6).unwrap();
        let sys = haar(&leb, &leb, &t).unwrap();
        assert!(sys.coefficients.values().all(|c| c.a == 0.0));
        assert_eq!(product_check(&sys, &DyadicInterval::standard(5, 7)).unwrap().lhs, 1.0);
        let g = g_l2_norm(&sys, 5);
        assert_eq!((g.parseval, g.quadrature), (0.0, 0.0));
    }

    #[test]
    fn single_coefficient_expansion() {
        // μ Lebesgue, ν moves 0.1 of the mass from the left half to the right.
        let leb = Measure::lebesgue();
        let nu = Measure::from_cells(1, &[0.4, 0.6]).unwrap();
        let t = Tree::full(&leb, &nu, DyadicInterval::ROOT, 3).unwrap();
        let sys = haar(&leb, &nu, &t).unwrap();
        let root = sys.coefficients[&DyadicInterval::ROOT];
        assert!((root.a - 0.1).abs() < 1e-15);
        assert_eq!((root.c_minus, root.c_plus), (2.0, 2.0));
        assert!((partial_sum_g(&sys, 0.7, 1) - 0.2).abs() < 1e-15);
        assert!((partial_sum_g(&sys, 0.2, 1) + 0.2).abs() < 1e-15);
        assert!((partial_sum_g(&sys, 0.2, 3) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn orthogonality_and_parseval_on_a_forest_tree() {
        let c = cascade(0.65, 14);
        let leb = Measure::lebesgue();
        let f = stopping_forest(&c, &leb, 0.12, 10, StopMode::Interval).unwrap();
        let tree = f.trees.iter().max_by_key(|t| t.members.len()).unwrap();
        let sys = haar(&c, &leb, tree).unwrap();
        let keys: Vec<_> = sys.coefficients.keys().copied().collect();
        for i in &keys {
            assert!(sys.coefficients[i].mean().abs() < 1e-12);
            for j in &keys {
                if i != j {
                    assert!(sys.inner_product(i, j).unwrap().abs() < 1e-12);
                }
            }
        }
        for n in tree.top.level..=10 {
            let g = g_l2_norm(&sys, n);
            assert!((g.parseval - g.quadrature).abs() < 1e-9, "{n}: {g:?}");
            assert!(g.worst_norm_ratio <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn cascade_norm_from_levels() {
        let c = cascade(0.7, 12);
        let leb = Measure::lebesgue();
        let t = Tree::full(&c, &leb, DyadicInterval::ROOT, 8).unwrap();
        let sys = haar(&c, &leb, &t).unwrap();
        let g = g_l2_norm(&sys, 8);
        // ‖h_I‖² = μ(I)(1/0.7 + 1/0.3), each level has total μ-mass 1 and
        // eight generations carry seven levels of coefficients.
        let expected = 7.0 * 0.04 * (1.0 / 0.7 + 1.0 / 0.3);
        assert!((g.parseval - expected).abs() < 1e-9);
        assert!((g.quadrature - expected).abs() < 1e-9);
    }
}
