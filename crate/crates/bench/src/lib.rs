//! Fixed workloads shared by the benchmarks.

use sqfnlab_core::{generate, Measure, MeasureSpec};

pub fn cascade(p: f64, depth: u32) -> Measure {
    generate(&MeasureSpec::Cascade {
        p,
        depth,
        overrides: vec![],
    })
    .expect("valid cascade")
}

pub fn cantor(depth: u32) -> Measure {
    generate(&MeasureSpec::Cantor {
        left: 0.25,
        right: 0.25,
        depth,
    })
    .expect("valid cantor")
}

/// `count` atoms at `(k + 1/3)/count` with alternating weights 1 and 2.
pub fn comb(count: usize) -> Measure {
    let atoms = (0..count)
        .map(|k| sqfnlab_core::Atom {
            position: (k as f64 + 1.0 / 3.0) / count as f64,
            weight: if k % 2 == 0 { 1.0 } else { 2.0 },
        })
        .collect();
    Measure::new(atoms, vec![]).expect("valid comb").normalized()
}
