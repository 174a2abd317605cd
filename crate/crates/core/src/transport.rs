//! Wasserstein-1 distances on `[0,1]`.
//!
//! With test functions vanishing at 0 and 1, integration by parts gives
//! `∫ψ d(m₁−m₂) = −∫ψ′G` with `G = F₁ − F₂`, and the constraint `∫ψ′ = 0`
//! turns the dual into `min_c ∫|G − c|`, attained at a median of the values
//! of `G`. [`w1_oracle`] solves the primal over grid test functions instead
//! and shares no code with this path.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::measure::{cdf_difference, Measure, PiecewiseLinearFn};
use crate::numeric::CompensatedSum;

/// Tolerance on total masses for [`w1_unrestricted`].
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W1Result {
    pub value: f64,
    pub optimal_shift: f64,
    pub witness: Option<PiecewiseLinearFn>,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    x0: f64,
    h: f64,
    a: f64,
    b: f64,
}

impl Segment {
    /// `∫ |G − c|` over the segment.
    fn cost(&self, c: f64) -> f64 {
        let (p, q) = (self.a - c, self.b - c);
        if p * q >= 0.0 {
            0.5 * self.h * (p.abs() + q.abs())
        } else {
            0.5 * self.h * (p * p + q * q) / (p - q).abs()
        }
    }

    /// Length of `{G ≤ c}` (or `{G < c}` when `strict`) within the segment.
    fn below(&self, c: f64, strict: bool) -> f64 {
        let (lo, hi) = if self.a <= self.b { (self.a, self.b) } else { (self.b, self.a) };
        if lo == hi {
            let hit = if strict { lo < c } else { lo <= c };
            return if hit { self.h } else { 0.0 };
        }
        if c <= lo {
            0.0
        } else if c >= hi {
            self.h
        } else {
            self.h * ((c - lo) / (hi - lo))
        }
    }

    fn negated(&self) -> Self {
        Self {
            a: -self.a,
            b: -self.b,
            ..*self
        }
    }
}

fn check_support(m: &Measure) -> Result<()> {
    let out_atom = m.atoms().iter().any(|a| !(0.0..=1.0).contains(&a.position));
    let out_piece = m.pieces().iter().any(|p| p.left < 0.0 || p.right > 1.0);
    if out_atom || out_piece {
        return domain("measure charges the complement of [0,1]");
    }
    Ok(())
}

fn segments(m1: &Measure, m2: &Measure) -> Vec<Segment> {
    let g = cdf_difference(m1, m2);
    (0..g.xs.len() - 1)
        .filter_map(|i| {
            let h = g.xs[i + 1] - g.xs[i];
            (h > 0.0).then(|| Segment {
                x0: g.xs[i],
                h,
                a: g.right[i],
                b: g.left[i + 1],
            })
        })
        .collect()
}

fn measure_below(segs: &[Segment], c: f64, strict: bool) -> f64 {
    let mut acc = CompensatedSum::new();
    for s in segs {
        acc.add(s.below(c, strict));
    }
    acc.value()
}

/// Smallest `c` with `|{G ≤ c}| ≥ half`.
fn lower_median(segs: &[Segment], half: f64) -> f64 {
    let mut values: Vec<f64> = segs.iter().flat_map(|s| [s.a, s.b]).collect();
    values.sort_unstable_by(f64::total_cmp);
    values.dedup();
    let k = values.partition_point(|&v| measure_below(segs, v, false) < half);
    let k = k.min(values.len() - 1);
    if k == 0 {
        return values[0];
    }
    let (v0, v1) = (values[k - 1], values[k]);
    let at_v0 = measure_below(segs, v0, false);
    let before_v1 = measure_below(segs, v1, true);
    if before_v1 >= half && before_v1 > at_v0 {
        v0 + (v1 - v0) * ((half - at_v0) / (before_v1 - at_v0)).clamp(0.0, 1.0)
    } else {
        v1
    }
}

/// Midpoint of the interval of medians of the values of `G`.
fn median_shift(segs: &[Segment]) -> f64 {
    let half = 0.5 * segs.iter().map(|s| s.h).sum::<f64>();
    let lo = lower_median(segs, half);
    let neg: Vec<Segment> = segs.iter().map(Segment::negated).collect();
    let hi = -lower_median(&neg, half);
    0.5 * (lo + hi)
}

fn total_cost(segs: &[Segment], c: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    for s in segs {
        acc.add(s.cost(c));
    }
    acc.value()
}

/// Test function with slope `−sign(G − c)`, split on `{G = c}` so that it
/// returns to zero at 1.
fn build_witness(segs: &[Segment], c: f64) -> Result<PiecewiseLinearFn> {
    let (mut above, mut below, mut flat) = (0.0, 0.0, 0.0);
    for s in segs {
        if s.a == c && s.b == c {
            flat += s.h;
        } else {
            let lt = s.below(c, true);
            let le = s.below(c, false);
            below += lt;
            above += s.h - le;
        }
    }
    let mut rising_budget = (0.5 * (flat + above - below)).clamp(0.0, flat);
    let mut xs = vec![0.0];
    let mut ys = vec![0.0];
    let push = |x: f64, slope: f64, xs: &mut Vec<f64>, ys: &mut Vec<f64>| {
        let (px, py) = (*xs.last().unwrap(), *ys.last().unwrap());
        if x > px {
            xs.push(x);
            ys.push(py + slope * (x - px));
        }
    };
    for s in segs {
        let end = s.x0 + s.h;
        if s.a == c && s.b == c {
            let up = rising_budget.min(s.h);
            rising_budget -= up;
            push(s.x0 + up, 1.0, &mut xs, &mut ys);
            push(end, -1.0, &mut xs, &mut ys);
        } else if (s.a - c) * (s.b - c) < 0.0 {
            let cross = s.x0 + s.h * ((c - s.a) / (s.b - s.a));
            push(cross, if s.a < c { 1.0 } else { -1.0 }, &mut xs, &mut ys);
            push(end, if s.b < c { 1.0 } else { -1.0 }, &mut xs, &mut ys);
        } else {
            let mean = 0.5 * (s.a + s.b);
            push(end, if mean < c { 1.0 } else { -1.0 }, &mut xs, &mut ys);
        }
    }
    PiecewiseLinearFn::new(xs, ys)
}

fn supported(m1: &Measure, m2: &Measure, with_witness: bool) -> Result<W1Result> {
    check_support(m1)?;
    check_support(m2)?;
    let segs = segments(m1, m2);
    if segs.iter().all(|s| s.a == 0.0 && s.b == 0.0) {
        return Ok(W1Result {
            value: 0.0,
            optimal_shift: 0.0,
            witness: with_witness.then(|| {
                PiecewiseLinearFn::new(vec![0.0, 1.0], vec![0.0, 0.0]).expect("valid zero function")
            }),
        });
    }
    let c = median_shift(&segs);
    let witness = if with_witness {
        Some(build_witness(&segs, c)?)
    } else {
        None
    };
    Ok(W1Result {
        value: total_cost(&segs, c),
        optimal_shift: c,
        witness,
    })
}

/// `sup |∫ψ d(m₁−m₂)|` over 1-Lipschitz `ψ` vanishing outside `[0,1]`.
pub fn w1_supported(m1: &Measure, m2: &Measure) -> Result<W1Result> {
    supported(m1, m2, false)
}

/// As [`w1_supported`], also returning an optimal test function.
pub fn w1_supported_with_witness(m1: &Measure, m2: &Measure) -> Result<W1Result> {
    supported(m1, m2, true)
}

/// `sup |∫ψ d(m₁−m₂)|` over all 1-Lipschitz `ψ` on `[0,1]`; needs equal masses.
pub fn w1_unrestricted(m1: &Measure, m2: &Measure) -> Result<f64> {
    check_support(m1)?;
    check_support(m2)?;
    let scale = m1.total().max(m2.total()).max(1.0);
    if (m1.total() - m2.total()).abs() > MASS_TOLERANCE * scale {
        return domain(format!(
            "unequal masses {} and {}: the unrestricted supremum is infinite",
            m1.total(),
            m2.total()
        ));
    }
    Ok(total_cost(&segments(m1, m2), 0.0))
}

/// Mass and first moment `∫(t − x_j)` of `m` on each grid cell `[x_j, x_{j+1})`.
fn cell_moments(m: &Measure, n: usize, sign: f64, mass: &mut [f64], moment: &mut [f64]) {
    let nf = n as f64;
    for a in m.atoms() {
        if a.position >= 1.0 {
            continue;
        }
        let j = ((a.position * nf) as usize).min(n - 1);
        let xj = j as f64 / nf;
        mass[j] += sign * a.weight;
        moment[j] += sign * a.weight * (a.position - xj);
    }
    for p in m.pieces() {
        let d = p.density();
        let j0 = ((p.left * nf).floor() as usize).min(n - 1);
        let j1 = ((p.right * nf).ceil() as usize).min(n);
        for j in j0..j1 {
            let xj = j as f64 / nf;
            let u = p.left.max(xj);
            let v = p.right.min((j + 1) as f64 / nf);
            if v > u {
                mass[j] += sign * d * (v - u);
                moment[j] += sign * d * 0.5 * ((v - xj).powi(2) - (u - xj).powi(2));
            }
        }
    }
}

/// Brute-force lower bound for [`w1_supported`] over grid test functions.
///
/// Writes `ψ = Σ s_j ramp_j` with `ramp_j(t) = clamp(t − x_j, 0, h)`; the
/// constraints are `|s_j| ≤ 1` and `Σ s_j = 0`, so the linear program is
/// solved exactly by giving slope `+1` to the largest half of the
/// coefficients `∫ramp_j dσ` and `−1` to the smallest half. For probability
/// measures the gap to the true value is at most `1/grid_n`.
pub fn w1_oracle(m1: &Measure, m2: &Measure, grid_n: usize) -> f64 {
    let n = grid_n.max(2);
    let h = 1.0 / n as f64;
    let mut mass = vec![0.0; n];
    let mut moment = vec![0.0; n];
    cell_moments(m1, n, 1.0, &mut mass, &mut moment);
    cell_moments(m2, n, -1.0, &mut mass, &mut moment);
    let mut coeffs = vec![0.0; n];
    let mut tail = 0.0;
    for j in (0..n).rev() {
        coeffs[j] = moment[j] + h * tail;
        tail += mass[j];
    }
    coeffs.sort_unstable_by(f64::total_cmp);
    let half = n / 2;
    let low: f64 = coeffs[..half].iter().sum();
    let high: f64 = coeffs[n - half..].iter().sum();
    (high - low).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{generate, Atom, MeasureSpec, Piece};

    fn dirac(x: f64) -> Measure {
        Measure::dirac(x).unwrap()
    }

    #[test]
    fn endpoint_diracs_split_the_two_definitions() {
        let r = w1_supported(&dirac(0.0), &dirac(1.0)).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(w1_unrestricted(&dirac(0.0), &dirac(1.0)).unwrap(), 1.0);
    }

    #[test]
    fn symmetric_pair_of_diracs() {
        for n in 5..40 {
            let d = 1.0 / n as f64;
            let v = w1_supported(&dirac(0.5 - d), &dirac(0.5 + d)).unwrap().value;
            assert!((v - 2.0 * d).abs() < 1e-15, "n = {n}");
        }
    }

    #[test]
    fn lebesgue_against_center_dirac() {
        let v = w1_unrestricted(&Measure::lebesgue(), &dirac(0.5)).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unequal_masses_rejected_by_unrestricted() {
        let half = Measure::lebesgue().scaled(0.5);
        assert!(matches!(
            w1_unrestricted(&half, &Measure::lebesgue()),
            Err(crate::error::Error::Domain(_))
        ));
        assert!(w1_supported(&half, &Measure::lebesgue()).is_ok());
    }

    #[test]
    fn example22_value_and_oracle() {
        let m = generate(&MeasureSpec::Example22 { n: 3 }).unwrap();
        let exact = (-7f64).exp2();
        let v = w1_supported(&m, &Measure::lebesgue()).unwrap();
        assert!((v.value - exact).abs() < 1e-16);
        assert_eq!(v.optimal_shift, 0.0);
        let o = w1_oracle(&m, &Measure::lebesgue(), 4096);
        assert!((o - exact).abs() <= 1e-3 * exact);
    }

    #[test]
    fn oracle_on_endpoint_diracs_and_equal_inputs() {
        assert!(w1_oracle(&dirac(0.0), &dirac(1.0), 128) <= 1.0 / 128.0);
        let m = generate(&MeasureSpec::Cascade {
            p: 0.3,
            depth: 6,
            overrides: vec![],
        })
        .unwrap();
        assert_eq!(w1_oracle(&m, &m, 512), 0.0);
    }

    #[test]
    fn median_tie_takes_midpoint() {
        // G = 1 on (0, 1/2] and 0 after: every c in [0, 1] is a median.
        let m1 = dirac(0.0);
        let r = w1_supported(&m1, &dirac(0.5)).unwrap();
        assert_eq!(r.optimal_shift, 0.5);
        assert_eq!(r.value, 0.5);
    }

    #[test]
    fn witness_attains_value() {
        let m1 = Measure::new(
            vec![Atom {
                position: 0.2,
                weight: 0.3,
            }],
            vec![Piece {
                left: 0.4,
                right: 0.9,
                mass: 0.7,
            }],
        )
        .unwrap();
        let m2 = generate(&MeasureSpec::Example22 { n: 2 }).unwrap();
        let r = w1_supported_with_witness(&m1, &m2).unwrap();
        let psi = r.witness.unwrap();
        assert!(psi.lipschitz() <= 1.0 + 1e-12);
        assert!(psi.eval(0.0).abs() < 1e-12 && psi.eval(1.0).abs() < 1e-12);
        let achieved = (m1.integrate(&psi) - m2.integrate(&psi)).abs();
        assert!(achieved >= r.value - 1e-9, "{achieved} < {}", r.value);
    }
}
