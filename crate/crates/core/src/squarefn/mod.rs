//! Square functions of α-numbers, Carleson sums and the related
//! decompositions of a density against `ν`.

mod density;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::{alpha, alpha_smooth_detail, AlphaTable};
use crate::dyadic::{covering_interval, delta, DyadicInterval, DyadicSystem};
use crate::error::{param, Error, Result};
use crate::measure::{phi_mass, Interval, Measure};
use crate::numeric::CompensatedSum;

pub use density::{
    cz_decompose, martingale_diff, tolsa_l2, BadPart, CzDecomposition, DensityHistogram,
    MartingaleEntry, MartingaleTable, TolsaReport,
};

/// Default quadrature nodes per octave of `r`.
pub const DEFAULT_PTS_PER_OCTAVE: u32 = 4;
const MAX_PTS_PER_OCTAVE: u32 = 64;
/// Relative change allowed when halving the quadrature step.
pub const REFINE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ProfileMode {
    Dyadic { system: u8, offset: f64 },
    Continuous { r_min: f64, pts_per_octave: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareFunctionProfile {
    pub mode: ProfileMode,
    pub points: Vec<f64>,
    /// Levels `0..=depth` (dyadic) or radii from 1 down to `r_min`.
    pub scales: Vec<f64>,
    /// `partial_sums[i][s]`: value at `points[i]` using scales up to `s`.
    pub partial_sums: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl SquareFunctionProfile {
    /// Mean increment per scale step over `from..to` (step indices), across points.
    pub fn mean_slope(&self, from: usize, to: usize) -> f64 {
        if to <= from || self.partial_sums.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .partial_sums
            .iter()
            .map(|row| (row[to] - row[from]) / (to - from) as f64)
            .sum();
        total / self.partial_sums.len() as f64
    }

    /// Largest growth of any point's partial sum after step `from`.
    pub fn tail_growth(&self, from: usize) -> f64 {
        self.partial_sums
            .iter()
            .map(|row| row[row.len() - 1] - row[from.min(row.len() - 1)])
            .fold(0.0, f64::max)
    }

    /// Points on rows, scales on columns: `(point, scale, partial_sum)`.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.points.iter().zip(&self.partial_sums).flat_map(move |(&x, row)| {
            self.scales.iter().zip(row).map(move |(&s, &v)| (x, s, v))
        })
    }
}

/// `count` points drawn with probability proportional to `μ`: atoms as they
/// are, mass in pieces snapped to the center of its depth-`depth` cell.
pub fn sample_points<R: Rng + ?Sized>(mu: &Measure, depth: u32, count: usize, rng: &mut R) -> Result<Vec<f64>> {
    let weights: Vec<f64> = mu
        .atoms()
        .iter()
        .map(|a| a.weight)
        .chain(mu.pieces().iter().map(|p| p.mass))
        .collect();
    let dist = WeightedIndex::new(&weights).map_err(|_| Error::Support("μ has no mass to sample".into()))?;
    let scale = f64::from(depth).exp2();
    let n_atoms = mu.atoms().len();
    Ok((0..count)
        .map(|_| {
            let i = dist.sample(rng);
            if i < n_atoms {
                return mu.atoms()[i].position;
            }
            let p = mu.pieces()[i - n_atoms];
            let x = rng.gen_range(p.left..p.right);
            let center = ((x * scale).floor() + 0.5) / scale;
            center.clamp(p.left, p.right - f64::EPSILON * p.right.max(1.0))
        })
        .collect())
}

/// Truncated `Σ_{x∈I, level(I)≤ℓ} α²(I)` for `ℓ = 0..=depth` along each
/// point's chain in `system`.
pub fn dyadic_square_profile(
    mu: &Measure,
    nu: &Measure,
    system: &DyadicSystem,
    points: &[f64],
    depth: u32,
) -> Result<SquareFunctionProfile> {
    if depth > system.max_level {
        return Err(Error::Range(format!("depth {depth} exceeds {}", system.max_level)));
    }
    let table = AlphaTable::new(mu, nu);
    let mut warnings = Vec::new();
    for &x in points {
        if let Some(level) = (1..=depth).find(|&l| system.interval(&system.locate(x, l)).a == x) {
            warnings.push(format!(
                "point {x} lies on a dyadic boundary at level {level}; the measures should not charge such boundaries"
            ));
        }
    }
    let partial_sums = points
        .par_iter()
        .map(|&x| {
            let mut s = CompensatedSum::new();
            (0..=depth)
                .map(|l| {
                    let a = table.alpha(&system.interval(&system.locate(x, l)));
                    s.add(a * a);
                    s.value()
                })
                .collect()
        })
        .collect();
    Ok(SquareFunctionProfile {
        mode: ProfileMode::Dyadic {
            system: system.id,
            offset: system.offset,
        },
        points: points.to_vec(),
        scales: (0..=depth).map(f64::from).collect(),
        partial_sums,
        warnings,
    })
}

fn log_trapezoid(mu: &Measure, nu: &Measure, x: f64, radii: &[f64]) -> Vec<f64> {
    let vals: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let s = alpha_smooth_detail(mu, nu, &Interval::new(x - r, x + r)).value;
            s * s
        })
        .collect();
    let mut out = vec![0.0; radii.len()];
    let mut acc = CompensatedSum::new();
    for i in 1..radii.len() {
        acc.add(0.5 * (vals[i - 1] + vals[i]) * (radii[i - 1] / radii[i]).ln());
        out[i] = acc.value();
    }
    out
}

fn radii(r_min: f64, per_octave: u32) -> Vec<f64> {
    let octaves = (1.0 / r_min).log2();
    let steps = ((octaves * per_octave as f64).ceil() as usize).max(1);
    (0..=steps)
        .map(|i| (-(octaves * i as f64 / steps as f64)).exp2())
        .collect()
}

/// `∫_{r_min}^1 α_s²(B(x,r)) dr/r` by the trapezoid rule in `log r`, with
/// partial integrals from 1 down to each node. The node density doubles until
/// halving the step changes no final value by more than [`REFINE_TOLERANCE`].
pub fn continuous_square_profile(
    mu: &Measure,
    nu: &Measure,
    points: &[f64],
    r_min: f64,
    pts_per_octave: u32,
) -> Result<SquareFunctionProfile> {
    if !(r_min > 0.0 && r_min < 1.0) {
        return param(format!("r_min = {r_min} must lie in (0,1)"));
    }
    if pts_per_octave == 0 {
        return param("need at least one node per octave");
    }
    let mut ppo = pts_per_octave;
    let mut warnings = Vec::new();
    let run = |ppo: u32| -> Vec<Vec<f64>> {
        let rs = radii(r_min, ppo);
        points.par_iter().map(|&x| log_trapezoid(mu, nu, x, &rs)).collect()
    };
    let mut coarse = run(ppo);
    loop {
        let fine = run(2 * ppo);
        let stable = coarse.iter().zip(&fine).all(|(c, f)| {
            let (a, b) = (c[c.len() - 1], f[f.len() - 1]);
            (a - b).abs() <= REFINE_TOLERANCE * a.abs().max(b.abs()) || (a - b).abs() < 1e-15
        });
        if stable {
            break;
        }
        if 2 * ppo >= MAX_PTS_PER_OCTAVE {
            warnings.push(format!("quadrature not converged at {} nodes per octave", 2 * ppo));
            ppo *= 2;
            coarse = fine;
            break;
        }
        ppo *= 2;
        coarse = fine;
    }
    if ppo != pts_per_octave {
        warnings.push(format!("refined to {ppo} nodes per octave"));
    }
    Ok(SquareFunctionProfile {
        mode: ProfileMode::Continuous {
            r_min,
            pts_per_octave: ppo,
        },
        points: points.to_vec(),
        scales: radii(r_min, ppo),
        partial_sums: coarse,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficient {
    Alpha,
    Delta,
}

fn coefficient(mu: &Measure, nu: &Measure, iv: &Interval, which: Coefficient) -> f64 {
    match which {
        Coefficient::Alpha => alpha(mu, nu, iv),
        Coefficient::Delta => delta(mu, nu, iv),
    }
}

/// `Σ c²(I)μ(I)` over standard dyadic `I ⊂ J` in the first `generations` levels below and including `J`.
pub fn carleson_sum(mu: &Measure, nu: &Measure, j: &DyadicInterval, which: Coefficient, generations: u32) -> f64 {
    let mut total = CompensatedSum::new();
    for g in 0..generations {
        let level = j.level + g;
        let first = j.index << g;
        let terms: Vec<f64> = (first..first + (1i64 << g))
            .into_par_iter()
            .map(|k| {
                let iv = DyadicInterval::standard(level, k).unit_interval();
                let m = mu.mass_of(&iv);
                if m > 0.0 {
                    let c = coefficient(mu, nu, &iv, which);
                    c * c * m
                } else {
                    0.0
                }
            })
            .collect();
        for t in terms {
            total.add(t);
        }
    }
    total.value()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuckleyReport {
    pub which: Coefficient,
    pub depth: u32,
    /// `sup_J carleson_sum(J)/μ(J)` over `level(J) ≤ depth/2`.
    pub ratio: f64,
    pub worst: Option<DyadicInterval>,
}

/// Carleson ratio with every sum truncated at absolute level `depth`.
pub fn buckley_ratio(mu: &Measure, nu: &Measure, which: Coefficient, depth: u32) -> BuckleyReport {
    // Subtree sums, filled bottom-up one level at a time.
    let mut below: Vec<f64> = Vec::new();
    let mut report = BuckleyReport {
        which,
        depth,
        ratio: 0.0,
        worst: None,
    };
    for level in (0..depth).rev() {
        let n = 1i64 << level;
        let sums: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|k| {
                let iv = DyadicInterval::standard(level, k).unit_interval();
                let m = mu.mass_of(&iv);
                let own = if m > 0.0 {
                    let c = coefficient(mu, nu, &iv, which);
                    c * c * m
                } else {
                    0.0
                };
                let kids = if below.is_empty() {
                    0.0
                } else {
                    below[2 * k as usize] + below[2 * k as usize + 1]
                };
                (own + kids, m)
            })
            .collect();
        if level <= depth / 2 {
            for (k, &(s, m)) in sums.iter().enumerate() {
                if m > 0.0 && s / m > report.ratio {
                    report.ratio = s / m;
                    report.worst = Some(DyadicInterval::standard(level, k as i64));
                }
            }
        }
        below = sums.into_iter().map(|(s, _)| s).collect();
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverTerm {
    pub system: u8,
    pub interval: DyadicInterval,
    pub alpha: f64,
    /// `[(2/θ)·(ν(φ_J)/ν(φ_B))·(2/ν_J(φ))]²` with `θ = |B|/|J|`.
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationCheck {
    pub center: f64,
    pub radius: f64,
    /// `α_s²(B(x, r))`.
    pub lhs: f64,
    /// `max_J K_J·α²(J)` over the covering intervals.
    pub rhs: f64,
    pub covers: Vec<CoverTerm>,
}

impl DominationCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-9) + 1e-15
    }
}

/// Bounds the smooth α of a ball by the plain α of its covers in the given
/// systems, through the stability and smooth-bound inequalities.
pub fn domination_check(
    mu: &Measure,
    nu: &Measure,
    systems: &[DyadicSystem],
    x: f64,
    r: f64,
) -> Result<DominationCheck> {
    let ball = Interval::new(x - r, x + r);
    let s = alpha_smooth_detail(mu, nu, &ball);
    if s.nu_phi <= 0.0 {
        return Err(Error::Precondition(format!("ν(φ_B) vanishes for B({x}, {r})")));
    }
    let mut covers = Vec::new();
    for sys in systems {
        let Some(j) = sys.covering(ball.a, ball.b) else {
            continue;
        };
        let jg = sys.interval(&j);
        let nu_phi_j = phi_mass(nu, &jg);
        let nu_j = nu.mass_of(&jg);
        if nu_phi_j <= 0.0 || nu_j <= 0.0 {
            continue;
        }
        let theta = ball.len() / jg.len();
        let k = (2.0 / theta) * (nu_phi_j / s.nu_phi) * (2.0 / (nu_phi_j / nu_j));
        covers.push(CoverTerm {
            system: sys.id,
            interval: j,
            alpha: alpha(mu, nu, &jg),
            constant: k * k,
        });
    }
    if covers.is_empty() {
        return Err(Error::Precondition(format!("no system covers B({x}, {r})")));
    }
    let rhs = covers.iter().map(|c| c.constant * c.alpha * c.alpha).fold(0.0, f64::max);
    Ok(DominationCheck {
        center: x,
        radius: r,
        lhs: s.value * s.value,
        rhs,
        covers,
    })
}

/// Finest cover of the ball over `systems`; convenience re-export of the
/// dyadic search for report code.
pub fn ball_cover(systems: &[DyadicSystem], x: f64, r: f64) -> Option<(usize, DyadicInterval)> {
    covering_interval(systems, x - r, x + r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::shifted_systems;
    use crate::measure::{generate, CascadeOverride, MeasureSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cascade(p: f64, depth: u32) -> Measure {
        generate(&MeasureSpec::Cascade {
            p,
            depth,
            overrides: vec![],
        })
        .unwrap()
    }

    #[test]
    fn identical_measures_have_zero_profiles() {
        let leb = Measure::lebesgue();
        let p = dyadic_square_profile(&leb, &leb, &DyadicSystem::standard(), &[0.3, 0.71], 10).unwrap();
        assert!(p.partial_sums.iter().flatten().all(|v| *v == 0.0));
        let c = continuous_square_profile(&leb, &leb, &[0.3], 0.01, 2).unwrap();
        assert!(c.partial_sums.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn cascade_profile_grows_linearly() {
        let c = cascade(0.7, 18);
        let leb = Measure::lebesgue();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = sample_points(&c, 18, 8, &mut rng).unwrap();
        let p = dyadic_square_profile(&c, &leb, &DyadicSystem::standard(), &pts, 8).unwrap();
        let cell = alpha(&c, &leb, &Interval::new(0.0, 1.0));
        let slope = p.mean_slope(0, 8);
        assert!((slope / (cell * cell) - 1.0).abs() < 0.01, "{slope} vs {}", cell * cell);
        for row in &p.partial_sums {
            assert!(row.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn example22_profile_is_local() {
        let m = generate(&MeasureSpec::Example22 { n: 8 }).unwrap();
        let leb = Measure::lebesgue();
        let p = dyadic_square_profile(&m, &leb, &DyadicSystem::standard(), &[0.1], 12).unwrap();
        let row = &p.partial_sums[0];
        assert!(row[1..].iter().all(|v| *v == row[1]));
    }

    #[test]
    fn boundary_points_warn() {
        let leb = Measure::lebesgue();
        let p = dyadic_square_profile(&leb, &leb, &DyadicSystem::standard(), &[0.25], 4).unwrap();
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn sampled_points_follow_mu() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = cascade(0.9, 6);
        let pts = sample_points(&c, 6, 2000, &mut rng).unwrap();
        let left = pts.iter().filter(|x| **x < 0.5).count() as f64 / 2000.0;
        assert!((left - 0.9).abs() < 0.03);
        assert!(pts.iter().all(|x| ((x * 64.0).fract() - 0.5).abs() < 1e-12));
        assert!(sample_points(&Measure::zero(), 4, 3, &mut rng).is_err());
    }

    #[test]
    fn cascade_delta_carleson_sum() {
        let c = cascade(0.7, 20);
        let leb = Measure::lebesgue();
        for l in [4, 8, 12] {
            let s = carleson_sum(&c, &leb, &DyadicInterval::ROOT, Coefficient::Delta, l);
            assert!((s - 0.04 * l as f64).abs() < 1e-10);
        }
        let r = buckley_ratio(&c, &leb, Coefficient::Delta, 10);
        assert!((r.ratio - 0.4).abs() < 1e-10);
        let leb_r = buckley_ratio(&leb, &leb, Coefficient::Alpha, 8);
        assert_eq!(leb_r.ratio, 0.0);
    }

    #[test]
    fn finite_perturbation_ratio_stabilizes() {
        let overrides = [(0, 0), (1, 1), (2, 1), (3, 6), (4, 3)]
            .iter()
            .map(|&(level, index)| CascadeOverride { level, index, p: 0.65 })
            .collect();
        let m = generate(&MeasureSpec::Cascade {
            p: 0.5,
            depth: 14,
            overrides,
        })
        .unwrap();
        let leb = Measure::lebesgue();
        for which in [Coefficient::Alpha, Coefficient::Delta] {
            let a = buckley_ratio(&m, &leb, which, 10).ratio;
            let b = buckley_ratio(&m, &leb, which, 13).ratio;
            assert!(a > 0.0 && (a - b).abs() < 1e-12, "{which:?}: {a} {b}");
        }
    }

    #[test]
    fn smooth_density_profile_converges() {
        let m = Measure::from_cells(2, &[0.2, 0.3, 0.15, 0.35]).unwrap();
        let leb = Measure::lebesgue();
        let p = continuous_square_profile(&m, &leb, &[0.1, 0.6], 1.0 / 1024.0, 4).unwrap();
        // Balls of radius below 2^-5 around these points see a constant density.
        let idx = p.scales.iter().position(|r| *r < 0.025).unwrap();
        assert!(p.tail_growth(idx) < 1e-12);
    }

    #[test]
    fn domination_on_cascade() {
        let c = cascade(0.7, 12);
        let leb = Measure::lebesgue();
        let systems = shifted_systems(2).unwrap();
        for (x, r) in [(0.3, 0.01), (0.5, 0.004), (0.77, 0.05), (0.41, 0.0013)] {
            let d = domination_check(&c, &leb, &systems, x, r).unwrap();
            assert!(d.holds(), "{d:?}");
        }
    }
}
