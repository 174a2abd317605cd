use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Piecewise-linear function given by its values at strictly increasing
/// breakpoints, linear in between and zero outside `[first, last]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearFn {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinearFn {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return param("need at least two breakpoints with one value each");
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return param("breakpoints and values must be finite");
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return param("breakpoints must be strictly increasing");
        }
        Ok(Self { xs, ys })
    }

    /// The tent `φ = dist(·, ℝ∖(0,1))`.
    pub fn phi() -> Self {
        Self::tent(0.0, 1.0)
    }

    /// `φ` transported to `[a, b]`: zero at the endpoints, `1/2` at the midpoint.
    pub fn tent(a: f64, b: f64) -> Self {
        Self {
            xs: vec![a, 0.5 * (a + b), b],
            ys: vec![0.0, 0.5, 0.0],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn support(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let i = self.xs.partition_point(|&b| b <= x);
        if i == n {
            return self.ys[n - 1];
        }
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (y0, y1) = (self.ys[i - 1], self.ys[i]);
        y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
    }

    /// Integral of the function over `[u, v]` against Lebesgue measure.
    pub fn integral_over(&self, u: f64, v: f64) -> f64 {
        let n = self.xs.len();
        let lo = u.max(self.xs[0]);
        let hi = v.min(self.xs[n - 1]);
        if hi <= lo {
            return 0.0;
        }
        let mut i = self.xs.partition_point(|&b| b <= lo).max(1);
        let mut acc = 0.0;
        let mut s = lo;
        while s < hi && i < n {
            let e = self.xs[i].min(hi);
            if e > s {
                acc += 0.5 * (e - s) * (self.eval_on_segment(i, s) + self.eval_on_segment(i, e));
            }
            s = e;
            i += 1;
        }
        acc
    }

    fn eval_on_segment(&self, i: usize, x: f64) -> f64 {
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (y0, y1) = (self.ys[i - 1], self.ys[i]);
        y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
    }

    pub fn lipschitz(&self) -> f64 {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.ys.iter().fold(0.0, |m, y| m.max(y.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            xs: self.xs.clone(),
            ys: self.ys.iter().map(|y| c * y).collect(),
        }
    }

    /// Precompose with the affine map sending `[0,1]` onto `[a,b]`, i.e. the
    /// result at `a + (b-a)t` equals `self(t)`.
    pub fn transported(&self, a: f64, b: f64) -> Self {
        Self {
            xs: self.xs.iter().map(|t| a + (b - a) * t).collect(),
            ys: self.ys.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_breakpoints() {
        assert!(PiecewiseLinearFn::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(PiecewiseLinearFn::new(vec![0.5, 0.2], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn phi_shape() {
        let phi = PiecewiseLinearFn::phi();
        assert_eq!(phi.eval(0.5), 0.5);
        assert_eq!(phi.eval(0.25), 0.25);
        assert_eq!(phi.eval(1.5), 0.0);
        assert_eq!(phi.lipschitz(), 1.0);
        assert!((phi.integral_over(0.0, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn partial_integral() {
        let phi = PiecewiseLinearFn::phi();
        assert!((phi.integral_over(0.0, 0.5) - 0.125).abs() < 1e-15);
        assert!((phi.integral_over(0.25, 0.75) - (0.25 * 0.375 * 2.0)).abs() < 1e-15);
    }
}
