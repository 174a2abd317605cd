//! α-numbers, smooth α-numbers and the results built directly on them.
//!
//! Both numbers compare blow-ups of `μ` and `ν` to the unit interval with
//! [`w1_supported`]. Plain α normalizes each blow-up to a probability;
//! smooth α divides by the integral of the tent weight `φ_I` instead.

use std::collections::HashMap;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::dyadic::{delta, DyadicInterval};
use crate::error::{param, Error, Result};
use crate::measure::{phi_mass, Interval, Measure};
use crate::tolerance::ACCUMULATION;
use crate::transport::w1_supported;

/// Lipschitz constant, in units of `1/|I|`, of the bumps that separate the
/// halves of `I` when α controls the doubling ratio.
pub const RAMP_LIPSCHITZ: f64 = 8.0;
/// Scale offset between a dyadic level and its ball radii.
pub const BALL_LEVEL_OFFSET: i32 = 10;
/// Default number of radii sampled per band.
pub const DEFAULT_BALL_SAMPLES: usize = 8;

fn w1(m1: &Measure, m2: &Measure) -> f64 {
    w1_supported(m1, m2)
        .expect("blow-ups are supported in [0,1]")
        .value
}

/// `W₁(μ_I, ν_I)` for the probability blow-ups (zero when the mass vanishes).
pub fn alpha(mu: &Measure, nu: &Measure, iv: &Interval) -> f64 {
    w1(&mu.blowup_of(iv).normalized(), &nu.blowup_of(iv).normalized())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothAlpha {
    pub value: f64,
    pub mu_phi: f64,
    pub nu_phi: f64,
}

impl SmoothAlpha {
    /// Exactly one normalizer vanishes, so a zero blow-up is compared with a
    /// nonzero one.
    pub fn one_sided(&self) -> bool {
        (self.mu_phi > 0.0) != (self.nu_phi > 0.0)
    }
}

fn phi_normalized(m: &Measure, iv: &Interval, weight: f64) -> Measure {
    if weight > 0.0 {
        m.blowup_of(iv).scaled(weight.recip())
    } else {
        Measure::zero()
    }
}

pub fn alpha_smooth_detail(mu: &Measure, nu: &Measure, iv: &Interval) -> SmoothAlpha {
    let mu_phi = phi_mass(mu, iv);
    let nu_phi = phi_mass(nu, iv);
    let value = w1(&phi_normalized(mu, iv, mu_phi), &phi_normalized(nu, iv, nu_phi));
    SmoothAlpha {
        value,
        mu_phi,
        nu_phi,
    }
}

/// `W₁(μ_{φ,I}, ν_{φ,I})` with blow-ups divided by `μ(φ_I)` and `ν(φ_I)`.
pub fn alpha_smooth(mu: &Measure, nu: &Measure, iv: &Interval) -> f64 {
    alpha_smooth_detail(mu, nu, iv).value
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEntry {
    pub alpha: f64,
    pub alpha_smooth: f64,
    pub mu_phi: f64,
    pub nu_phi: f64,
}

type Key = (u64, u64);

fn key(iv: &Interval) -> Key {
    (iv.a.to_bits(), iv.b.to_bits())
}

/// Memoized α, smooth α and Δ for one measure pair; safe to fill from
/// several threads.
pub struct AlphaTable<'a> {
    mu: &'a Measure,
    nu: &'a Measure,
    plain: RwLock<HashMap<Key, f64>>,
    smooth: RwLock<HashMap<Key, SmoothAlpha>>,
}

impl<'a> AlphaTable<'a> {
    pub fn new(mu: &'a Measure, nu: &'a Measure) -> Self {
        Self {
            mu,
            nu,
            plain: RwLock::new(HashMap::new()),
            smooth: RwLock::new(HashMap::new()),
        }
    }

    pub fn mu(&self) -> &'a Measure {
        self.mu
    }

    pub fn nu(&self) -> &'a Measure {
        self.nu
    }

    pub fn alpha(&self, iv: &Interval) -> f64 {
        if let Some(v) = self.plain.read().get(&key(iv)) {
            return *v;
        }
        let v = alpha(self.mu, self.nu, iv);
        self.plain.write().insert(key(iv), v);
        v
    }

    pub fn alpha_dyadic(&self, iv: &DyadicInterval) -> f64 {
        self.alpha(&iv.unit_interval())
    }

    pub fn smooth(&self, iv: &Interval) -> SmoothAlpha {
        if let Some(v) = self.smooth.read().get(&key(iv)) {
            return *v;
        }
        let v = alpha_smooth_detail(self.mu, self.nu, iv);
        self.smooth.write().insert(key(iv), v);
        v
    }

    pub fn entry(&self, iv: &Interval) -> AlphaEntry {
        let s = self.smooth(iv);
        AlphaEntry {
            alpha: self.alpha(iv),
            alpha_smooth: s.value,
            mu_phi: s.mu_phi,
            nu_phi: s.nu_phi,
        }
    }

    pub fn delta(&self, iv: &Interval) -> f64 {
        delta(self.mu, self.nu, iv)
    }

    pub fn len(&self) -> usize {
        self.plain.read().len() + self.smooth.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothBounds {
    pub alpha_smooth: f64,
    pub alpha: f64,
    /// `ν_I(φ) = ν(φ_I)/ν(I)`.
    pub nu_phi_average: f64,
    pub trivial_bound: f64,
    pub alpha_bound: f64,
    pub slack: f64,
}

impl SmoothBounds {
    pub fn holds(&self) -> bool {
        self.slack >= -ACCUMULATION
    }
}

/// `α_s(I) ≤ 2` and `α_s(I) ≤ 2α(I)/ν_I(φ)`.
pub fn smooth_bounds_check(mu: &Measure, nu: &Measure, iv: &Interval) -> Result<SmoothBounds> {
    let s = alpha_smooth_detail(mu, nu, iv);
    if s.nu_phi <= 0.0 {
        return Err(Error::Precondition(format!(
            "ν(φ_I) vanishes on [{}, {})",
            iv.a, iv.b
        )));
    }
    let a = alpha(mu, nu, iv);
    let avg = s.nu_phi / nu.mass_of(iv);
    let alpha_bound = 2.0 * a / avg;
    Ok(SmoothBounds {
        alpha_smooth: s.value,
        alpha: a,
        nu_phi_average: avg,
        trivial_bound: 2.0,
        alpha_bound,
        slack: alpha_bound.min(2.0) - s.value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub inner: f64,
    pub outer: f64,
    pub bound: f64,
    /// `α_s(I)/α_s(J)`, with `0/0` read as 1.
    pub ratio: f64,
    pub slack: f64,
}

impl StabilityReport {
    pub fn holds(&self) -> bool {
        self.slack >= -ACCUMULATION
    }
}

/// `α_s(I) ≤ (2/θ)·(ν(φ_J)/ν(φ_I))·α_s(J)` for `I ⊂ J` with `|I| ≥ θ|J|`.
pub fn stability_check(
    mu: &Measure,
    nu: &Measure,
    inner: &Interval,
    outer: &Interval,
    theta: f64,
) -> Result<StabilityReport> {
    if !(theta > 0.0 && theta <= 1.0) {
        return param(format!("θ = {theta} must lie in (0,1]"));
    }
    if !outer.contains_interval(inner) || inner.len() < theta * outer.len() * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "need I ⊂ J with |I| ≥ θ|J| (θ = {theta})"
        )));
    }
    let i = alpha_smooth_detail(mu, nu, inner);
    let j = alpha_smooth_detail(mu, nu, outer);
    if i.nu_phi <= 0.0 {
        return Err(Error::Precondition("ν(φ_I) vanishes".into()));
    }
    let bound = 2.0 / theta * (j.nu_phi / i.nu_phi) * j.value;
    let ratio = match (i.value, j.value) {
        (a, b) if b > 0.0 => a / b,
        (a, _) if a == 0.0 => 1.0,
        _ => f64::INFINITY,
    };
    Ok(StabilityReport {
        inner: i.value,
        outer: j.value,
        bound,
        ratio,
        slack: bound - i.value,
    })
}

/// `(ε, C)` such that `α(I) < ε` forces `μ(I) ≤ C·min(μ(I₋), μ(I₊))` when
/// `ν` is `D`-doubling.
pub fn epsilon_for_doubling(d: f64) -> Result<(f64, f64)> {
    if !(d >= 1.0) || !d.is_finite() {
        return param(format!("doubling constant {d} must be a finite number ≥ 1"));
    }
    let d3 = d * d * d;
    Ok((1.0 / (2.0 * RAMP_LIPSCHITZ * d3), 2.0 * d3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: f64,
    pub radius: f64,
}

impl Ball {
    pub fn interval(&self) -> Interval {
        Interval::new(self.center - self.radius, self.center + self.radius)
    }

    pub fn contains_ball(&self, other: &Ball) -> bool {
        (self.center - other.center).abs() + other.radius <= self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallChoice {
    pub ball: Ball,
    pub alpha_smooth: f64,
    pub band: (f64, f64),
    pub candidates: usize,
}

/// Radius band for a level-`level` interval.
pub fn ball_band(level: u32) -> (f64, f64) {
    let e = BALL_LEVEL_OFFSET - level as i32;
    (1.1 * f64::from(e - 1).exp2(), 0.9 * f64::from(e).exp2())
}

fn candidate_centers(mu: &Measure, iv: &Interval) -> Vec<f64> {
    let mut centers: Vec<f64> = mu
        .atoms()
        .iter()
        .filter(|t| t.position >= iv.a && t.position < iv.b && t.weight > 0.0)
        .map(|t| t.position)
        .collect();
    for s in 0..8 {
        let cell = iv.sub(s as f64 / 8.0, (s + 1) as f64 / 8.0);
        let pieces: Vec<_> = mu
            .pieces()
            .iter()
            .filter(|p| p.left < cell.b && p.right > cell.a && p.mass > 0.0)
            .collect();
        if let (Some(first), Some(last)) = (pieces.first(), pieces.last()) {
            centers.push(0.5 * (first.left.max(cell.a) + last.right.min(cell.b)));
        }
    }
    centers.sort_by(f64::total_cmp);
    centers.dedup();
    centers
}

/// Ball `B(x, r)` around `I` minimizing the sampled smooth α over centers
/// near `spt μ ∩ I` and radii in [`ball_band`].
pub fn select_ball(
    mu: &Measure,
    nu: &Measure,
    iv: &DyadicInterval,
    samples: usize,
) -> Result<BallChoice> {
    let geom = iv.unit_interval();
    if mu.mass_of(&geom) <= 0.0 {
        return Err(Error::Support(format!("{iv} does not meet the support of μ")));
    }
    let samples = samples.max(1);
    let band = ball_band(iv.level);
    let centers = candidate_centers(mu, &geom);
    let radii: Vec<f64> = (0..samples)
        .map(|i| {
            let t = if samples == 1 {
                0.5
            } else {
                i as f64 / (samples - 1) as f64
            };
            band.0 * (band.1 / band.0).powf(t)
        })
        .collect();
    let mut best: Option<(f64, Ball)> = None;
    for &center in &centers {
        for &radius in &radii {
            let ball = Ball { center, radius };
            let v = alpha_smooth(mu, nu, &ball.interval());
            if best.map_or(true, |(b, _)| v < b) {
                best = Some((v, ball));
            }
        }
    }
    let (alpha_smooth, ball) = best.expect("a set of positive mass yields a center");
    Ok(BallChoice {
        ball,
        alpha_smooth,
        band,
        candidates: centers.len() * radii.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{generate, Example53Part, MeasureSpec};

    fn cascade(p: f64, depth: u32) -> Measure {
        generate(&MeasureSpec::Cascade {
            p,
            depth,
            overrides: vec![],
        })
        .unwrap()
    }

    fn example53(epsilon: f64) -> (Measure, Measure) {
        let g = |part| generate(&MeasureSpec::Example53 { epsilon, part }).unwrap();
        (g(Example53Part::Mu), g(Example53Part::Nu))
    }

    #[test]
    fn example22_alpha_is_exact() {
        let leb = Measure::lebesgue();
        for n in 3..=12 {
            let m = generate(&MeasureSpec::Example22 { n }).unwrap();
            let a = alpha(&m, &leb, &Interval::new(0.0, 1.0));
            assert!((a - (-2.0 * n as f64 - 1.0).exp2()).abs() < 1e-12, "n = {n}: {a}");
        }
    }

    #[test]
    fn example52_left_half() {
        let leb = Measure::lebesgue();
        for n in 4..=10 {
            let m = generate(&MeasureSpec::Example52 { n }).unwrap();
            let a = alpha(&m, &leb, &Interval::new(0.0, 0.5));
            let target = (-(n as f64) - 2.0).exp2();
            assert!(a > 0.5 * target && a < 2.0 * target, "n = {n}: {a} vs {target}");
        }
    }

    #[test]
    fn example53_smooth_alpha() {
        let (mu, nu) = example53(0.1);
        let s = alpha_smooth_detail(&mu, &nu, &Interval::new(0.0, 0.5));
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!(s.one_sided());
        // Scales linearly in ε with constant close to 4.
        for eps in [0.01, 0.001, 0.0001] {
            let (mu, nu) = example53(eps);
            let iv = Interval::new(-1.0, 1.0);
            let v = alpha_smooth(&mu, &nu, &iv);
            assert!(v > 3.0 * eps && v < 5.0 * eps, "ε = {eps}: {v}");
            let oracle = crate::transport::w1_oracle(
                &phi_normalized(&mu, &iv, phi_mass(&mu, &iv)),
                &phi_normalized(&nu, &iv, phi_mass(&nu, &iv)),
                1 << 16,
            );
            assert!(oracle <= v + 1e-12 && v - oracle < 1e-3, "{oracle} vs {v}");
        }
    }

    #[test]
    fn identical_measures_vanish() {
        let c = cascade(0.7, 10);
        for iv in [Interval::new(0.0, 1.0), Interval::new(0.3, 0.45)] {
            assert_eq!(alpha(&c, &c, &iv), 0.0);
            assert_eq!(alpha_smooth(&c, &c, &iv), 0.0);
        }
    }

    #[test]
    fn smooth_bounds_examples() {
        let leb = Measure::lebesgue();
        let b = smooth_bounds_check(&leb, &leb, &Interval::new(0.0, 1.0)).unwrap();
        assert_eq!((b.alpha_smooth, b.trivial_bound, b.alpha_bound), (0.0, 2.0, 0.0));
        let m = generate(&MeasureSpec::Example22 { n: 4 }).unwrap();
        let b = smooth_bounds_check(&m, &leb, &Interval::new(0.0, 1.0)).unwrap();
        assert!((b.nu_phi_average - 0.25).abs() < 1e-15);
        assert!(b.holds() && b.alpha_bound == 8.0 * b.alpha);
        let (mu, nu) = example53(0.1);
        assert!(smooth_bounds_check(&mu, &nu, &Interval::new(0.0, 1.0)).unwrap().holds());
    }

    #[test]
    fn stability_examples() {
        let c = cascade(0.7, 14);
        let leb = Measure::lebesgue();
        let j = Interval::new(0.25, 0.5);
        let r = stability_check(&c, &leb, &j, &j, 1.0).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-15 && r.bound >= r.inner);
        assert!(stability_check(&c, &leb, &j, &j, 0.0).is_err());
        let r = stability_check(&c, &leb, &Interval::new(0.3, 0.4), &j, 0.25).unwrap();
        assert!(r.holds(), "{r:?}");
    }

    #[test]
    fn example52_plain_alpha_is_unstable() {
        let leb = Measure::lebesgue();
        let (inner, outer) = (Interval::new(0.0, 0.5), Interval::new(-1.0, 1.0));
        let mut ratios = vec![];
        for n in [4, 8, 12] {
            let m = generate(&MeasureSpec::Example52 { n }).unwrap();
            ratios.push(alpha(&m, &leb, &inner) / alpha(&m, &leb, &outer));
            assert!(stability_check(&m, &leb, &inner, &outer, 0.25).unwrap().holds());
        }
        assert!(ratios[2] > 100.0 * ratios[0], "{ratios:?}");
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_for_doubling(2.0).unwrap(), (1.0 / 128.0, 16.0));
        assert_eq!(epsilon_for_doubling(1.0).unwrap(), (1.0 / 16.0, 2.0));
        assert!(epsilon_for_doubling(0.5).is_err());
    }

    #[test]
    fn table_memoizes() {
        let c = cascade(0.7, 8);
        let leb = Measure::lebesgue();
        let t = AlphaTable::new(&c, &leb);
        let iv = Interval::new(0.0, 0.5);
        let e = t.entry(&iv);
        assert_eq!(t.len(), 2);
        assert_eq!(e.alpha, alpha(&c, &leb, &iv));
        assert_eq!(t.entry(&iv), e);
        assert_eq!(t.len(), 2);
        assert!((t.delta(&iv) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn ball_selection_nests() {
        let c = cascade(0.7, 16);
        let leb = Measure::lebesgue();
        let iv = DyadicInterval::standard(6, 17);
        let b = select_ball(&c, &leb, &iv, 4).unwrap();
        let (lo, hi) = ball_band(6);
        assert!(b.ball.radius >= lo && b.ball.radius <= hi);
        let g = iv.unit_interval();
        let bi = b.ball.interval();
        assert!(g.a - bi.a >= g.len() / 4.0 && bi.b - g.b >= g.len() / 4.0);
        let parent = select_ball(&c, &leb, &iv.parent().unwrap(), 4).unwrap();
        assert!(parent.ball.contains_ball(&b.ball));
    }

    #[test]
    fn ball_centers_follow_atoms() {
        let mu = Measure::new(
            vec![
                crate::Atom { position: 0.1, weight: 0.5 },
                crate::Atom { position: 0.2, weight: 0.5 },
            ],
            vec![],
        )
        .unwrap();
        assert_eq!(candidate_centers(&mu, &Interval::new(0.0, 0.5)), vec![0.1, 0.2]);
        let b = select_ball(&mu, &mu, &DyadicInterval::standard(1, 0), 2).unwrap();
        assert!([0.1, 0.2].contains(&b.ball.center));
        assert!(matches!(
            select_ball(&mu, &mu, &DyadicInterval::standard(1, 1), 2),
            Err(Error::Support(_))
        ));
    }
}
