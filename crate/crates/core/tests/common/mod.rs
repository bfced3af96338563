//! Independent numerical oracles shared by the integration tests.

#![allow(dead_code)]

/// Minimise `f(y) + (y − x)²/(2η)` on the real line by a dense grid scan
/// followed by golden-section refinement.
///
/// In one dimension the minimiser lies between `x` and any minimiser `anchor`
/// of `f`, so the scan covers that interval padded by one unit on each side.
pub fn brute_force_prox(f: impl Fn(f64) -> f64, eta: f64, x: f64, anchor: f64) -> f64 {
    let obj = |y: f64| f(y) + (y - x) * (y - x) / (2.0 * eta);
    let lo = x.min(anchor) - 1.0;
    let hi = x.max(anchor) + 1.0;
    let n = 10_000;
    let step = (hi - lo) / n as f64;
    let mut best: usize = 0;
    let mut best_val = f64::INFINITY;
    for i in 0..=n {
        let v = obj(lo + step * i as f64);
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    let mut a = lo + step * best.saturating_sub(1) as f64;
    let mut b = lo + step * (best + 1).min(n) as f64;
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    while b - a > 1e-12 {
        if obj(c) <= obj(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - ratio * (b - a);
        d = a + ratio * (b - a);
    }
    // At a kink or a domain boundary the bracket midpoint can land outside the
    // domain, so keep whichever candidate scores best.
    [0.5 * (a + b), a, b, lo + step * best as f64]
        .into_iter()
        .min_by(|p, q| obj(*p).total_cmp(&obj(*q)))
        .expect("nonempty candidate list")
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
