use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::alpha;
use crate::dyadic::{DyadicInterval, DyadicSystem};
use crate::error::{domain, param, Error, Result};
use crate::measure::{Interval, Measure};
use crate::numeric::CompensatedSum;

/// Nonnegative function constant on the `2^level` standard cells of `[0,1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityHistogram {
    pub level: u32,
    pub values: Vec<f64>,
}

impl DensityHistogram {
    pub fn new(level: u32, values: Vec<f64>) -> Result<Self> {
        if level > 30 {
            return param(format!("histogram level {level} too deep"));
        }
        if values.len() != 1usize << level {
            return param(format!("need {} values, got {}", 1usize << level, values.len()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return domain(format!("density value {v} is not a finite nonnegative number"));
        }
        Ok(Self { level, values })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(0, vec![c])
    }

    pub fn value_at(&self, x: f64) -> f64 {
        if !(0.0..1.0).contains(&x) {
            return 0.0;
        }
        let k = (x * f64::from(self.level).exp2()) as usize;
        self.values[k.min(self.values.len() - 1)]
    }

    fn cells(&self) -> impl Iterator<Item = (Interval, f64)> + '_ {
        let w = (-f64::from(self.level)).exp2();
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (Interval::new(k as f64 * w, (k + 1) as f64 * w), v))
    }

    /// `g dν`.
    pub fn measure(&self, nu: &Measure) -> Result<Measure> {
        let parts: Vec<Measure> = self
            .cells()
            .filter(|(_, v)| *v > 0.0)
            .map(|(c, v)| nu.restrict(c.a, c.b).scaled(v))
            .collect();
        Measure::disjoint_union(&parts)
    }

    /// `∫_I g dν`.
    pub fn integral(&self, nu: &Measure, iv: &Interval) -> f64 {
        let mut s = CompensatedSum::new();
        for (c, v) in self.cells() {
            let (a, b) = (c.a.max(iv.a), c.b.min(iv.b));
            if a < b && v > 0.0 {
                s.add(v * nu.mass(a, b, false));
            }
        }
        s.value()
    }

    /// `∫ g² dν`.
    pub fn l2_norm_sq(&self, nu: &Measure) -> f64 {
        let mut s = CompensatedSum::new();
        for (c, v) in self.cells() {
            s.add(v * v * nu.mass_of(&c));
        }
        s.value()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TolsaReport {
    pub depth: u32,
    /// `Σ α²(I)·μ(I)²/ν(I)` over dyadic `I ⊂ [0,1)` up to `depth`, `μ = g dν`.
    pub lhs: f64,
    /// `∫ g² dν`.
    pub l2_norm_sq: f64,
    pub ratio: f64,
}

pub fn tolsa_l2(g: &DensityHistogram, nu: &Measure, system: &DyadicSystem, depth: u32) -> Result<TolsaReport> {
    if depth > system.max_level {
        return Err(Error::Range(format!("depth {depth} exceeds {}", system.max_level)));
    }
    let mu = g.measure(nu)?;
    let mut lhs = CompensatedSum::new();
    for level in 0..=depth {
        let terms: Vec<f64> = system
            .window_inside(level)
            .into_par_iter()
            .map(|j| {
                let iv = system.interval(&j);
                let (m, n) = (mu.mass_of(&iv), nu.mass_of(&iv));
                if m > 0.0 && n > 0.0 {
                    let a = alpha(&mu, nu, &iv);
                    a * a * m * m / n
                } else {
                    0.0
                }
            })
            .collect();
        for t in terms {
            lhs.add(t);
        }
    }
    let lhs = lhs.value();
    let l2 = g.l2_norm_sq(nu);
    Ok(TolsaReport {
        depth,
        lhs,
        l2_norm_sq: l2,
        ratio: if l2 > 0.0 { lhs / l2 } else { 0.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadPart {
    pub interval: DyadicInterval,
    pub mu_mass: f64,
    pub nu_mass: f64,
}

impl BadPart {
    /// `μ(B)/ν(B)`, the density of the good part on `B`.
    pub fn average(&self) -> f64 {
        self.mu_mass / self.nu_mass
    }
}

/// `μ = g + Σ_B b_B` with `b_B = μ|_B − (μ(B)/ν(B))·ν|_B` on maximal
/// dyadic `B` where `μ(B) > λν(B)`.
#[derive(Debug, Clone)]
pub struct CzDecomposition {
    pub lambda: f64,
    pub depth: u32,
    pub bad: Vec<BadPart>,
    pub good: Measure,
}

impl CzDecomposition {
    pub fn bad_nu_mass(&self) -> f64 {
        self.bad.iter().map(|b| b.nu_mass).sum()
    }

    fn bad_signed(&self, mu: &Measure, nu: &Measure, system: &DyadicSystem, cell: &Interval) -> f64 {
        self.bad
            .iter()
            .map(|b| {
                let iv = system.interval(&b.interval);
                let (a, c) = (iv.a.max(cell.a), iv.b.min(cell.b));
                if a < c {
                    mu.mass(a, c, false) - b.average() * nu.mass(a, c, false)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// `max |g(Q) + Σ b_B(Q) − μ(Q)|` over the depth cells `Q`.
    pub fn reconstruction_error(&self, mu: &Measure, nu: &Measure, system: &DyadicSystem) -> f64 {
        system
            .window(self.depth)
            .into_par_iter()
            .map(|j| {
                let q = system.interval(&j);
                (self.good.mass_of(&q) + self.bad_signed(mu, nu, system, &q) - mu.mass_of(&q)).abs()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Largest `g(Q)/ν(Q)` over depth cells `Q`.
    pub fn good_density_max(&self, nu: &Measure, system: &DyadicSystem) -> f64 {
        system
            .window(self.depth)
            .into_par_iter()
            .map(|j| {
                let q = system.interval(&j);
                let n = nu.mass_of(&q);
                if n > 0.0 {
                    self.good.mass_of(&q) / n
                } else {
                    0.0
                }
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Calderón–Zygmund decomposition at height `λ ≥ 1`, scanning intervals of
/// `system` down to `depth`.
pub fn cz_decompose(
    mu: &Measure,
    nu: &Measure,
    system: &DyadicSystem,
    lambda: f64,
    depth: u32,
) -> Result<CzDecomposition> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return param(format!("λ = {lambda} must be at least 1"));
    }
    if depth > system.max_level {
        return Err(Error::Range(format!("depth {depth} exceeds {}", system.max_level)));
    }
    let mut bad = Vec::new();
    let mut stack: Vec<DyadicInterval> = system.window(0);
    stack.reverse();
    while let Some(j) = stack.pop() {
        let iv = system.interval(&j);
        let (m, n) = (mu.mass_of(&iv), nu.mass_of(&iv));
        if m == 0.0 {
            continue;
        }
        if m > lambda * n {
            if n == 0.0 {
                return Err(Error::Support(format!("μ charges {j} where ν vanishes")));
            }
            bad.push(BadPart {
                interval: j,
                mu_mass: m,
                nu_mass: n,
            });
        } else if j.level < depth {
            let [l, r] = j.children()?;
            stack.push(r);
            stack.push(l);
        }
    }
    let mut parts = Vec::with_capacity(2 * bad.len() + 1);
    let mut cursor = f64::NEG_INFINITY;
    for b in &bad {
        let iv = system.interval(&b.interval);
        parts.push(mu.restrict(cursor, iv.a));
        parts.push(nu.restrict(iv.a, iv.b).scaled(b.average()));
        cursor = iv.b;
    }
    parts.push(mu.restrict(cursor, f64::INFINITY));
    Ok(CzDecomposition {
        lambda,
        depth,
        bad,
        good: Measure::disjoint_union(&parts)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleEntry {
    /// `⟨g⟩_J^ν`.
    pub mean: f64,
    pub nu_mass: f64,
    /// `⟨g⟩_{J±} − ⟨g⟩_J` on the two children.
    pub diffs: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleTable {
    pub top: DyadicInterval,
    pub depth: u32,
    pub entries: BTreeMap<DyadicInterval, MartingaleEntry>,
}

impl MartingaleTable {
    /// `⟨g⟩_I + Σ_{J∋x} Δ_J g(x)`, i.e. the mean over the depth cell at `x`.
    pub fn reconstruct(&self, x: f64) -> f64 {
        let Some(root) = self.entries.get(&self.top) else {
            return 0.0;
        };
        let mut sum = root.mean;
        let mut j = self.top;
        while let Some(e) = self.entries.get(&j) {
            if j.level >= self.depth {
                break;
            }
            let right = x >= j.unit_interval().mid();
            sum += e.diffs[right as usize];
            match if right { j.right() } else { j.left() } {
                Ok(next) => j = next,
                Err(_) => break,
            }
        }
        sum
    }

    /// `∫ Δ_J g · Δ_K g dν`.
    pub fn inner_product(&self, j: &DyadicInterval, k: &DyadicInterval) -> Option<f64> {
        let (ej, ek) = (self.entries.get(j)?, self.entries.get(k)?);
        if j.level >= self.depth || k.level >= self.depth {
            return None;
        }
        let (small, big, es, eb) = if j.level >= k.level { (j, k, ej, ek) } else { (k, j, ek, ej) };
        if big.ancestor(small.level) != Some(*small) && small.ancestor(big.level) != Some(*big) {
            return Some(0.0);
        }
        let kids = small.children().ok()?;
        let mass = |c: &DyadicInterval| self.entries.get(c).map_or(0.0, |e| e.nu_mass);
        if small == big {
            return Some(es.diffs[0].powi(2) * mass(&kids[0]) + es.diffs[1].powi(2) * mass(&kids[1]));
        }
        // Δ_big is constant on `small`, and Δ_small has ν-mean zero there.
        let side = big.children().ok()?.iter().position(|c| small.ancestor(c.level) == Some(*c))?;
        Some(eb.diffs[side] * (es.diffs[0] * mass(&kids[0]) + es.diffs[1] * mass(&kids[1])))
    }
}

/// Martingale differences of `g` with respect to `ν` on standard dyadic
/// subintervals of `top` down to absolute level `depth`.
pub fn martingale_diff(
    g: &DensityHistogram,
    nu: &Measure,
    top: &DyadicInterval,
    depth: u32,
) -> Result<MartingaleTable> {
    if top.system != 0 {
        return param("martingale differences use the standard system");
    }
    if depth < top.level || depth > 30 {
        return Err(Error::Range(format!("depth {depth} outside [{}, 30]", top.level)));
    }
    let mut entries = BTreeMap::new();
    let mut frontier = vec![*top];
    for _ in top.level..=depth {
        let mut next = Vec::new();
        for j in frontier {
            let iv = j.unit_interval();
            let n = nu.mass_of(&iv);
            if n <= 0.0 {
                continue;
            }
            entries.insert(
                j,
                MartingaleEntry {
                    mean: g.integral(nu, &iv) / n,
                    nu_mass: n,
                    diffs: [0.0; 2],
                },
            );
            if j.level < depth {
                next.extend(j.children()?);
            }
        }
        frontier = next;
    }
    let keys: Vec<DyadicInterval> = entries.keys().copied().filter(|j| j.level < depth).collect();
    for j in keys {
        let parent = entries[&j].mean;
        let diffs = j.children()?.map(|c| entries.get(&c).map_or(0.0, |e| e.mean - parent));
        entries.get_mut(&j).expect("present").diffs = diffs;
    }
    Ok(MartingaleTable {
        top: *top,
        depth,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{generate, MeasureSpec};

    fn leb() -> Measure {
        Measure::lebesgue()
    }

    #[test]
    fn histogram_validation() {
        assert!(DensityHistogram::new(1, vec![1.0]).is_err());
        assert!(matches!(DensityHistogram::new(1, vec![1.0, -1.0]), Err(Error::Domain(_))));
        assert!(DensityHistogram::new(1, vec![1.0, f64::NAN]).is_err());
        let g = DensityHistogram::new(1, vec![2.0, 0.0]).unwrap();
        assert_eq!(g.value_at(0.3), 2.0);
        assert!((g.measure(&leb()).unwrap().total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tolsa_constant_and_step() {
        let sys = DyadicSystem::standard();
        let r = tolsa_l2(&DensityHistogram::constant(1.0).unwrap(), &leb(), &sys, 10).unwrap();
        assert_eq!((r.lhs, r.l2_norm_sq, r.ratio), (0.0, 1.0, 0.0));
        let step = DensityHistogram::new(1, vec![2.0, 0.0]).unwrap();
        let a = tolsa_l2(&step, &leb(), &sys, 6).unwrap();
        let b = tolsa_l2(&step, &leb(), &sys, 12).unwrap();
        assert!((a.l2_norm_sq - 2.0).abs() < 1e-15);
        // Only [0,1) sees the jump. F − G is a tent of height 1/4 and the
        // best shift 1/4 leaves α = 1/8.
        assert!((a.lhs - 1.0 / 64.0).abs() < 1e-12 && a.lhs == b.lhs);
    }

    #[test]
    fn cz_on_cascade() {
        let sys = DyadicSystem::standard();
        let mu = generate(&MeasureSpec::Cascade {
            p: 0.8,
            depth: 12,
            overrides: vec![],
        })
        .unwrap();
        for lambda in [1.5, 2.0, 4.0] {
            let cz = cz_decompose(&mu, &leb(), &sys, lambda, 10).unwrap();
            assert!(!cz.bad.is_empty());
            assert!(cz.bad_nu_mass() < 1.0 / lambda);
            assert!(cz.reconstruction_error(&mu, &leb(), &sys) < 1e-12);
            assert!(cz.good_density_max(&leb(), &sys) <= 2.0 * lambda * (1.0 + 1e-12));
            assert!((cz.good.total() - mu.total()).abs() < 1e-12);
        }
        assert!(cz_decompose(&mu, &leb(), &sys, 0.5, 4).is_err());
    }

    #[test]
    fn martingale_reconstructs_and_is_orthogonal() {
        let g = DensityHistogram::new(3, vec![1.0, 3.0, 0.5, 2.0, 0.0, 1.5, 4.0, 1.0]).unwrap();
        let nu = generate(&MeasureSpec::Cascade {
            p: 0.6,
            depth: 8,
            overrides: vec![],
        })
        .unwrap();
        let t = martingale_diff(&g, &nu, &DyadicInterval::ROOT, 5).unwrap();
        for k in 0..32 {
            let x = (k as f64 + 0.5) / 32.0;
            assert!((t.reconstruct(x) - g.value_at(x)).abs() < 1e-12);
        }
        let keys: Vec<_> = t.entries.keys().copied().filter(|j| j.level < 5).collect();
        for j in &keys {
            for k in &keys {
                let ip = t.inner_product(j, k).unwrap();
                if j != k {
                    assert!(ip.abs() < 1e-12, "{j} {k}: {ip}");
                } else {
                    assert!(ip >= 0.0);
                }
            }
        }
    }
}
