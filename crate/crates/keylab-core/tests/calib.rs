//! Guards the frozen frame-planning calibration: if the reconciler's real
//! disclosure ever drifts above the table the planner relies on, frames
//! would be undersized and sessions would start failing on key length.

use keylab_core::qke::{leak_fraction, reconcile};
use keylab_core::rng::SeededRng;

fn measured_worst_leak(q: f64, len: usize, seeds: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let mut rng = SeededRng::new(seed * 7 + 1);
        let reference = rng.bits(len);
        let mut working = reference.clone();
        for i in 0..len {
            if rng.next_f64() < q {
                working.flip(i);
            }
        }
        let out = reconcile(&reference, &working, q, seed).expect("sized inputs");
        assert_eq!(out.corrected, reference, "residual errors at q={q} seed={seed}");
        let frac = out.leaked_bits as f64 / len as f64;
        if frac > worst {
            worst = frac;
        }
    }
    worst
}

#[test]
fn planner_leak_table_still_bounds_reality() {
    for q in [0.005f64, 0.02, 0.05, 0.08, 0.11] {
        let worst = measured_worst_leak(q, 8192, 6);
        let budget = leak_fraction(q) * 1.08;
        assert!(
            worst <= budget,
            "q={q}: measured worst leak {worst:.4} exceeds planned budget {budget:.4}"
        );
    }
}

#[test]
fn leak_fraction_interpolates_monotonically() {
    let mut prev = 0.0;
    let mut q = 0.0;
    while q <= 0.14 {
        let f = leak_fraction(q);
        assert!(f >= prev, "leak fraction dipped at q={q}");
        prev = f;
        q += 0.001;
    }
    assert_eq!(leak_fraction(0.2), leak_fraction(0.14));
}
