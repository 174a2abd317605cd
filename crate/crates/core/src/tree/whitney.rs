//! Whitney partition of unity for `(0, 1/2)` and the inequalities built on it.
//!
//! With `t_k = τ·2^−k`, the bump `ψ_{−k}` (`k ≥ 1`) rises on
//! `[3t_k/4, 5t_k/4]` and falls on `[3t_{k−1}/4, 5t_{k−1}/4]`; `ψ_k` is its
//! mirror image under `x ↦ 1/2 − x`, and `ψ_0` fills the middle. Adjacent
//! ramps cancel, so the bumps sum to one on `(0, 1/2)`.

use serde::{Deserialize, Serialize};

use crate::alpha::alpha;
use crate::dyadic::{delta, tail_tip, ChainLength, DyadicInterval};
use crate::error::{param, Error, Result};
use crate::measure::{Interval, Measure, PiecewiseLinearFn};
use crate::tolerance::ACCUMULATION;

/// Constant `C` in `L_k ≤ C·2^|k|/τ`.
pub const WHITNEY_CONSTANT: f64 = 4.0;
/// Default bound on the `ν`-tail factors.
pub const DEFAULT_KAPPA: f64 = 0.25;
const TAU_START: f64 = 1.0 / 16.0;
const TAU_FLOOR: f64 = 1.0 / (1u64 << 24) as f64;

/// Which half of the series: bumps accumulating at 0 or at 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhitneyPartition {
    pub tau: f64,
}

pub fn whitney_partition(tau: f64) -> Result<WhitneyPartition> {
    if !(tau > 0.0 && tau < 0.125) {
        return param(format!("τ = {tau} must lie in (0, 1/8)"));
    }
    Ok(WhitneyPartition { tau })
}

fn pwl(xs: Vec<f64>, ys: Vec<f64>) -> PiecewiseLinearFn {
    PiecewiseLinearFn::new(xs, ys).expect("Whitney breakpoints are increasing")
}

fn mirror(f: &PiecewiseLinearFn) -> PiecewiseLinearFn {
    let xs = f.breakpoints().iter().rev().map(|x| 0.5 - x).collect();
    let ys = f.values().iter().rev().copied().collect();
    pwl(xs, ys)
}

impl WhitneyPartition {
    fn node(&self, k: u32) -> f64 {
        self.tau * (-(k as f64)).exp2()
    }

    pub fn bump(&self, k: i32) -> PiecewiseLinearFn {
        let t = self.tau;
        if k == 0 {
            return pwl(
                vec![0.75 * t, 1.25 * t, 0.5 - 1.25 * t, 0.5 - 0.75 * t],
                vec![0.0, 1.0, 1.0, 0.0],
            );
        }
        let n = self.node(k.unsigned_abs());
        let left = pwl(vec![0.75 * n, 1.25 * n, 1.5 * n, 2.5 * n], vec![0.0, 1.0, 1.0, 0.0]);
        if k < 0 {
            left
        } else {
            mirror(&left)
        }
    }

    /// `Σ_k ψ_k(x)`, summing only the bumps whose support can contain `x`.
    pub fn sum_at(&self, x: f64) -> f64 {
        if !(x > 0.0 && x < 0.5) {
            return 0.0;
        }
        let d = x.min(0.5 - x);
        let k = (self.tau / d).log2().floor() as i32;
        let near = (k - 2).max(1)..=(k + 2).max(1);
        let mut s = self.bump(0).eval(x);
        for j in near {
            s += self.bump(-j).eval(x) + self.bump(j).eval(x);
        }
        s
    }

    /// `j`-th term of the `Ψ^∓` series: `ψ_0/2`, then `ψ_{∓j}`.
    pub fn term(&self, side: Side, j: u32) -> PiecewiseLinearFn {
        match (j, side) {
            (0, _) => self.bump(0).scaled(0.5),
            (j, Side::Minus) => self.bump(-(j as i32)),
            (j, Side::Plus) => self.bump(j as i32),
        }
    }

    /// Realized Lipschitz constant of the `j`-th term.
    pub fn term_lipschitz(&self, side: Side, j: u32) -> f64 {
        self.term(side, j).lipschitz()
    }

    /// `Ψ_m = Σ_{j ≥ m}` terms, in closed form. The value at the
    /// accumulation point (0 or 1/2) is 1 here but 0 for the true series.
    pub fn tail(&self, side: Side, m: u32) -> PiecewiseLinearFn {
        let t = self.tau;
        let minus = if m == 0 {
            pwl(
                vec![0.0, 0.75 * t, 1.25 * t, 0.5 - 1.25 * t, 0.5 - 0.75 * t],
                vec![1.0, 1.0, 0.5, 0.5, 0.0],
            )
        } else {
            let n = self.node(m);
            pwl(vec![0.0, 1.5 * n, 2.5 * n], vec![1.0, 1.0, 0.0])
        };
        match side {
            Side::Minus => minus,
            Side::Plus => mirror(&minus),
        }
    }

    /// `∫ Ψ_m dm`, discounting the atom at the accumulation point.
    pub fn integrate_tail(&self, m: &Measure, side: Side, from: u32) -> f64 {
        let at = match side {
            Side::Minus => 0.0,
            Side::Plus => 0.5,
        };
        m.integrate(&self.tail(side, from)) - m.atom_at(at)
    }

    /// `k`-th chain interval in unit coordinates: `[0, 2^−k)` for the minus
    /// side, `[0,1)`, `[0,1/2)`, then right halves for the plus side.
    pub fn chain(side: Side, k: u32) -> Interval {
        let w = (-(k as f64)).exp2();
        match (side, k) {
            (Side::Minus, _) | (Side::Plus, 0) => Interval::new(0.0, w),
            (Side::Plus, _) => Interval::new(0.5 - w, 0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationCheck {
    pub side: Side,
    pub n: u32,
    /// `|∫Ψ dμ − ∫Ψ dν|` for the probability blow-ups.
    pub lhs: f64,
    /// `(L_k/2^k)·α(I_k)·μ(I_k)` for `k ≤ N`.
    pub alpha_terms: Vec<f64>,
    /// `f_{k+1}·Δ(I_k)·μ(I_k)` for `k ≤ N`.
    pub delta_terms: Vec<f64>,
    /// `f_{k+1} = ∫Ψ_{k+1} dν / ν(I_{k+1})`.
    pub tail_factors: Vec<f64>,
    /// `2‖Ψ‖_∞·μ(I_{N+1})`.
    pub tip_term: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl RepresentationCheck {
    pub fn holds(&self) -> bool {
        self.slack >= -ACCUMULATION
    }
}

/// Both sides of the series representation inequality for `Ψ^∓` on the
/// blow-ups of `μ` and `ν` to `iv`, truncated after `n` chain steps.
pub fn representation_check(
    mu: &Measure,
    nu: &Measure,
    iv: &DyadicInterval,
    partition: &WhitneyPartition,
    side: Side,
    n: u32,
) -> Result<RepresentationCheck> {
    let g = iv.unit_interval();
    let m = mu.blowup_of(&g).normalized();
    let v = nu.blowup_of(&g).normalized();
    if v.is_zero() || m.is_zero() {
        return Err(Error::Precondition(format!("a measure vanishes on {iv}")));
    }
    let lhs = (partition.integrate_tail(&m, side, 0) - partition.integrate_tail(&v, side, 0)).abs();
    let mut alpha_terms = Vec::with_capacity(n as usize + 1);
    let mut delta_terms = Vec::with_capacity(n as usize + 1);
    let mut tail_factors = Vec::with_capacity(n as usize + 1);
    for k in 0..=n {
        let ik = WhitneyPartition::chain(side, k);
        let next = WhitneyPartition::chain(side, k + 1);
        let nu_next = v.mass_of(&next);
        if nu_next <= 0.0 {
            return Err(Error::Precondition(format!("ν vanishes on chain step {} of {iv}", k + 1)));
        }
        let mass = m.mass_of(&ik);
        let lk = partition.term_lipschitz(side, k) * (-(k as f64)).exp2();
        let f = partition.integrate_tail(&v, side, k + 1) / nu_next;
        alpha_terms.push(lk * alpha(&m, &v, &ik) * mass);
        delta_terms.push(f * delta(&m, &v, &ik) * mass);
        tail_factors.push(f);
    }
    let tip_term = 2.0 * m.mass_of(&WhitneyPartition::chain(side, n + 1));
    let rhs = alpha_terms.iter().sum::<f64>() + delta_terms.iter().sum::<f64>() + tip_term;
    Ok(RepresentationCheck {
        side,
        n,
        lhs,
        alpha_terms,
        delta_terms,
        tail_factors,
        tip_term,
        rhs,
        slack: rhs - lhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTipCheck {
    pub interval: DyadicInterval,
    pub n1: i64,
    pub n2: i64,
    /// `Δ(I)·μ(I)`.
    pub lhs: f64,
    /// `μ(I)` times the two representation right-hand sides.
    pub rhs: f64,
    /// `Σ (C/τ)·α(J)μ(J) + κ·Δ(J)μ(J)` over both chains, plus `2μ` of
    /// each tip piece.
    pub rhs_kappa: f64,
    pub max_tail_factor: f64,
    pub truncated: bool,
    pub slack: f64,
}

impl TailTipCheck {
    pub fn holds(&self) -> bool {
        self.slack >= -ACCUMULATION && self.rhs_kappa - self.lhs >= -ACCUMULATION
    }
}

/// Tail–Tip inequality for `I` with chain lengths `(N₁, N₂)`; infinite
/// lengths are cut at `max_level`.
#[allow(clippy::too_many_arguments)]
pub fn tailtip_check(
    mu: &Measure,
    nu: &Measure,
    iv: &DyadicInterval,
    tau: f64,
    kappa: f64,
    n1: ChainLength,
    n2: ChainLength,
    max_level: u32,
) -> Result<TailTipCheck> {
    let partition = whitney_partition(tau)?;
    let tt = tail_tip(iv, n1, n2, max_level)?;
    let g = iv.unit_interval();
    if mu.atom_at(g.a) > 0.0 || nu.atom_at(g.a) > 0.0 {
        return Err(Error::Precondition(format!("atom at the left endpoint of {iv}")));
    }
    let mu_i = mu.mass_of(&g);
    let lhs = delta(mu, nu, &g) * mu_i;
    if mu_i == 0.0 {
        return Ok(TailTipCheck {
            interval: *iv,
            n1: tt.n1,
            n2: tt.n2,
            lhs,
            rhs: 0.0,
            rhs_kappa: 0.0,
            max_tail_factor: 0.0,
            truncated: tt.truncated,
            slack: 0.0,
        });
    }
    let minus = representation_check(mu, nu, iv, &partition, Side::Minus, tt.n1 as u32)?;
    let plus = representation_check(mu, nu, iv, &partition, Side::Plus, (tt.n2 + 1) as u32)?;
    let max_tail_factor = minus
        .tail_factors
        .iter()
        .chain(&plus.tail_factors)
        .fold(0.0, |a: f64, &b| a.max(b));
    if max_tail_factor > kappa {
        return Err(Error::Precondition(format!(
            "tail factor {max_tail_factor} exceeds κ = {kappa}; shrink τ"
        )));
    }
    let m = mu.blowup_of(&g).normalized();
    let v = nu.blowup_of(&g).normalized();
    let mut kappa_form = minus.tip_term + plus.tip_term;
    for (side, n) in [(Side::Minus, minus.n), (Side::Plus, plus.n)] {
        for k in 0..=n {
            let ik = WhitneyPartition::chain(side, k);
            let mass = m.mass_of(&ik);
            kappa_form += (WHITNEY_CONSTANT / tau) * alpha(&m, &v, &ik) * mass
                + kappa * delta(&m, &v, &ik) * mass;
        }
    }
    let rhs = mu_i * (minus.rhs + plus.rhs);
    Ok(TailTipCheck {
        interval: *iv,
        n1: tt.n1,
        n2: tt.n2,
        lhs,
        rhs,
        rhs_kappa: mu_i * kappa_form,
        max_tail_factor,
        truncated: tt.truncated,
        slack: rhs - lhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub tau: f64,
    pub kappa: f64,
    pub worst_factor: f64,
}

/// Halves `τ` from 1/16 until every `ν`-tail factor along both chains of
/// every interval in `intervals` (down to `chain_depth` steps) is at most `κ`.
pub fn calibrate_tau(
    nu: &Measure,
    kappa: f64,
    intervals: &[DyadicInterval],
    chain_depth: u32,
) -> Result<Calibration> {
    if !(kappa > 0.0) {
        return param(format!("κ = {kappa} must be positive"));
    }
    let mut tau = TAU_START;
    while tau >= TAU_FLOOR {
        let p = whitney_partition(tau)?;
        let mut worst: f64 = 0.0;
        for iv in intervals {
            let v = nu.blowup_of(&iv.unit_interval()).normalized();
            for side in [Side::Minus, Side::Plus] {
                for k in 1..=chain_depth + 1 {
                    let mass = v.mass_of(&WhitneyPartition::chain(side, k));
                    if mass <= 0.0 {
                        return Err(Error::Precondition(format!("ν vanishes inside {iv}")));
                    }
                    worst = worst.max(p.integrate_tail(&v, side, k) / mass);
                }
            }
        }
        if worst <= kappa {
            return Ok(Calibration {
                tau,
                kappa,
                worst_factor: worst,
            });
        }
        tau *= 0.5;
    }
    Err(Error::Precondition(format!("no τ ≥ {TAU_FLOOR} brings the tail factors below κ = {kappa}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{generate, MeasureSpec};

    #[test]
    fn partition_of_unity() {
        let p = whitney_partition(1.0 / 16.0).unwrap();
        assert_eq!(p.sum_at(0.3), 1.0);
        assert_eq!(p.sum_at(0.7), 0.0);
        for x in [1e-6, 0.001, 0.0123, 0.03, 0.1, 0.25, 0.49, 0.4999999] {
            assert!((p.sum_at(x) - 1.0).abs() < 1e-12, "{x}: {}", p.sum_at(x));
        }
    }

    #[test]
    fn bump_supports_and_lipschitz() {
        let tau = 1.0 / 16.0;
        let p = whitney_partition(tau).unwrap();
        for k in 1..12 {
            let f = p.bump(-k);
            let (lo, hi) = f.support();
            let s = (-(k as f64)).exp2();
            assert!(lo >= 0.5 * tau * s && hi < 4.0 * tau * s);
            assert!(f.lipschitz() <= WHITNEY_CONSTANT * (k as f64).exp2() / tau);
            let (lo, hi) = p.bump(k).support();
            assert!(lo > 0.5 - 4.0 * tau * s && hi <= 0.5);
        }
        assert!(p.bump(-3).lipschitz() <= 4.0 * 8.0 / tau);
        assert!(whitney_partition(0.2).is_err());
    }

    #[test]
    fn series_tails_match_term_sums() {
        let p = whitney_partition(0.05).unwrap();
        for side in [Side::Minus, Side::Plus] {
            for m in 0..4 {
                let tail = p.tail(side, m);
                for x in [0.001, 0.01, 0.02, 0.04, 0.11, 0.3, 0.45, 0.49, 0.499] {
                    let direct: f64 = (m..40).map(|j| p.term(side, j).eval(x)).sum();
                    assert!((tail.eval(x) - direct).abs() < 1e-12, "{side:?} {m} {x}");
                }
            }
            let both = p.tail(Side::Minus, 0).eval(0.2) + p.tail(Side::Plus, 0).eval(0.2);
            assert_eq!(both, 1.0);
        }
    }

    #[test]
    fn lebesgue_tail_factor_is_two_tau() {
        let leb = Measure::lebesgue();
        let p = whitney_partition(1.0 / 32.0).unwrap();
        for k in 1..6 {
            let f = p.integrate_tail(&leb, Side::Minus, k) / WhitneyPartition::chain(Side::Minus, k).len();
            assert!((f - 2.0 / 32.0).abs() < 1e-12);
        }
        let c = calibrate_tau(&leb, DEFAULT_KAPPA, &[DyadicInterval::ROOT], 8).unwrap();
        assert_eq!(c.tau, 1.0 / 16.0);
    }

    #[test]
    fn representation_on_example22() {
        let m = generate(&MeasureSpec::Example22 { n: 6 }).unwrap();
        let leb = Measure::lebesgue();
        let p = whitney_partition(1.0 / 16.0).unwrap();
        for side in [Side::Minus, Side::Plus] {
            let r = representation_check(&m, &leb, &DyadicInterval::ROOT, &p, side, 8).unwrap();
            assert!(r.holds(), "{r:?}");
        }
    }

    #[test]
    fn tailtip_examples() {
        let leb = Measure::lebesgue();
        let root = DyadicInterval::ROOT;
        let r = tailtip_check(&leb, &leb, &root, 1.0 / 16.0, DEFAULT_KAPPA, ChainLength::Finite(2), ChainLength::Finite(1), 20).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.holds());
        let m = generate(&MeasureSpec::Example22 { n: 8 }).unwrap();
        let r = tailtip_check(&m, &leb, &root, 1.0 / 16.0, DEFAULT_KAPPA, ChainLength::Finite(6), ChainLength::Finite(6), 20).unwrap();
        assert!(r.holds() && r.lhs > 0.0, "{r:?}");
        let c = generate(&MeasureSpec::Cascade {
            p: 0.7,
            depth: 16,
            overrides: vec![],
        })
        .unwrap();
        let cal = calibrate_tau(&leb, DEFAULT_KAPPA, &[root], 4).unwrap();
        for (level, k) in [(0, 0), (2, 1), (5, 17), (8, 200)] {
            let iv = DyadicInterval::standard(level, k);
            let r = tailtip_check(&c, &leb, &iv, cal.tau, DEFAULT_KAPPA, ChainLength::Finite(0), ChainLength::Finite(-1), 20).unwrap();
            assert!(r.holds(), "{iv}: {r:?}");
            // The tip is I₋ counted twice with weight 2.
            let tip = 4.0 * c.mass_of(&iv.left().unwrap().unit_interval());
            assert!(r.rhs >= tip);
        }
    }

    #[test]
    fn infinite_chains_are_truncated() {
        let m = generate(&MeasureSpec::Example22 { n: 5 }).unwrap();
        let leb = Measure::lebesgue();
        let r = tailtip_check(&m, &leb, &DyadicInterval::ROOT, 1.0 / 16.0, DEFAULT_KAPPA, ChainLength::Infinite, ChainLength::Infinite, 12).unwrap();
        assert!(r.truncated && r.holds());
    }

    #[test]
    fn endpoint_atoms_are_rejected() {
        let d = Measure::dirac(0.0).unwrap();
        let leb = Measure::lebesgue();
        assert!(tailtip_check(&d, &leb, &DyadicInterval::ROOT, 1.0 / 16.0, DEFAULT_KAPPA, ChainLength::Finite(0), ChainLength::Finite(-1), 10).is_err());
    }

    #[test]
    fn representation_needs_mass_on_both_sides() {
        let cantor = generate(&MeasureSpec::Cantor {
            left: 0.25,
            right: 0.25,
            depth: 8,
        })
        .unwrap();
        let p = whitney_partition(1.0 / 16.0).unwrap();
        let gap = DyadicInterval::standard(2, 1);
        let r = representation_check(&cantor, &Measure::lebesgue(), &gap, &p, Side::Minus, 2);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
