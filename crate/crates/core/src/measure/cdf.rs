use crate::numeric::{merge_sorted_dedup, CompensatedSum};

use super::Measure;

/// `G = F₁ − F₂` with `F(x) = m([0, x))`, sampled at its breakpoints.
///
/// `left[i]` is the left limit at `xs[i]` and `right[i]` the value just after
/// any atom at `xs[i]`. Between consecutive breakpoints `G` is linear from
/// `right[i]` to `left[i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfDifference {
    pub xs: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl CdfDifference {
    /// Value of `G` at `x`; at a breakpoint this is the value just after it.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = self.xs.partition_point(|&b| b <= x);
        if i == 0 {
            return 0.0;
        }
        if self.xs[i - 1] == x || i == n {
            return self.right[i - 1];
        }
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (g0, g1) = (self.right[i - 1], self.left[i]);
        g0 + (g1 - g0) * ((x - x0) / (x1 - x0))
    }
}

fn breakpoints(m: &Measure) -> Vec<f64> {
    let mut ends = Vec::with_capacity(2 * m.pieces.len());
    for p in &m.pieces {
        if ends.last() != Some(&p.left) {
            ends.push(p.left);
        }
        ends.push(p.right);
    }
    let atoms: Vec<f64> = m.atoms.iter().map(|a| a.position).collect();
    merge_sorted_dedup(&ends, &atoms)
}

/// `(m([0,x)), m([0,x]))` at every sorted `x`.
fn cdf_at(m: &Measure, xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut left = Vec::with_capacity(xs.len());
    let mut right = Vec::with_capacity(xs.len());
    let mut done = CompensatedSum::new();
    let (mut pi, mut ai) = (0, 0);
    for &x in xs {
        while pi < m.pieces.len() && m.pieces[pi].right <= x {
            done.add(m.pieces[pi].mass);
            pi += 1;
        }
        while ai < m.atoms.len() && m.atoms[ai].position < x {
            done.add(m.atoms[ai].weight);
            ai += 1;
        }
        let partial = match m.pieces.get(pi) {
            Some(p) if p.left < x => p.mass * ((x - p.left) / (p.right - p.left)),
            _ => 0.0,
        };
        let l = done.value() + partial;
        let at = match m.atoms.get(ai) {
            Some(a) if a.position == x => a.weight,
            _ => 0.0,
        };
        left.push(l);
        right.push(l + at);
    }
    (left, right)
}

pub fn cdf_difference(m1: &Measure, m2: &Measure) -> CdfDifference {
    let xs = merge_sorted_dedup(
        &merge_sorted_dedup(&breakpoints(m1), &breakpoints(m2)),
        &[0.0, 1.0],
    );
    let (l1, r1) = cdf_at(m1, &xs);
    let (l2, r2) = cdf_at(m2, &xs);
    CdfDifference {
        left: l1.iter().zip(&l2).map(|(a, b)| a - b).collect(),
        right: r1.iter().zip(&r2).map(|(a, b)| a - b).collect(),
        xs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{generate, MeasureSpec};

    #[test]
    fn equal_measures_give_zero() {
        let m = generate(&MeasureSpec::Example22 { n: 4 }).unwrap();
        let g = cdf_difference(&m, &m);
        assert!(g.left.iter().chain(&g.right).all(|v| *v == 0.0));
    }

    #[test]
    fn dirac_zero_minus_dirac_one() {
        let g = cdf_difference(&Measure::dirac(0.0).unwrap(), &Measure::dirac(1.0).unwrap());
        assert_eq!(g.xs, vec![0.0, 1.0]);
        assert_eq!(g.right[0], 1.0);
        for x in [0.1, 0.5, 0.999] {
            assert_eq!(g.eval(x), 1.0);
        }
    }

    #[test]
    fn example22_tent() {
        let m = generate(&MeasureSpec::Example22 { n: 3 }).unwrap();
        let g = cdf_difference(&m, &Measure::lebesgue());
        assert_eq!(g.eval(0.2), 0.0);
        assert_eq!(g.eval(0.375), 0.0);
        assert!((g.eval(0.5) + 0.0625).abs() < 1e-16);
        assert!((g.eval(0.4375) + 0.03125).abs() < 1e-16);
        assert!(g.eval(0.625).abs() < 1e-16);
        assert!(g.eval(0.8).abs() < 1e-16);
    }
}
