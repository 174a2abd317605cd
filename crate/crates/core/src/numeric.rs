//! Small numeric helpers shared across modules.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Bottom-up segment tree of sums. For nonnegative leaves every range sum
/// carries relative error O(log n · eps), independent of the range size.
#[derive(Debug, Clone)]
pub struct SumTree {
    n: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(values: &[f64]) -> Self {
        let n = values.len();
        let mut nodes = vec![0.0; 2 * n];
        nodes[n..].copy_from_slice(values);
        for i in (1..n).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { n, nodes }
    }

    /// Sum of leaves in `[lo, hi)`.
    pub fn range(&self, lo: usize, hi: usize) -> f64 {
        let (mut l, mut r) = (lo + self.n, hi.min(self.n) + self.n);
        let mut left_acc = 0.0;
        let mut right_acc = 0.0;
        while l < r {
            if l & 1 == 1 {
                left_acc += self.nodes[l];
                l += 1;
            }
            if r & 1 == 1 {
                r -= 1;
                right_acc += self.nodes[r];
            }
            l >>= 1;
            r >>= 1;
        }
        left_acc + right_acc
    }
}

/// Merge two sorted slices, dropping duplicates.
pub fn merge_sorted_dedup(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let v = if j >= b.len() || (i < a.len() && a[i] <= b[j]) {
            i += 1;
            a[i - 1]
        } else {
            j += 1;
            b[j - 1]
        };
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    out
}
