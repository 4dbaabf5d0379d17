//! Worst-case non-coverage of a `+-chi` interval for a unit-variance normal
//! statistic whose mean `b` is only known to satisfy `E[b^2] = c`.
//!
//! Writing `g(t) = r(sqrt(t), chi)`, the worst case over all distributions of
//! `b` is the least concave majorant of `g` evaluated at `c`. `g` is convex
//! and then concave in `t`, so the majorant is the chord from `(0, g(0))` to
//! the tangency point `t0`, followed by `g` itself.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::normal::{cdf, pdf, two_sided_critical};
use crate::error::{Error, Result};
use crate::optim::illinois_decreasing;

/// `P(|Z - b| >= chi) = Phi(-chi - b) + Phi(-chi + b)`.
pub fn noncoverage(b: f64, chi: f64) -> f64 {
    cdf(-chi - b) + cdf(-chi + b)
}

fn g(t: f64, chi: f64) -> f64 {
    noncoverage(t.sqrt(), chi)
}

fn g_prime(t: f64, chi: f64) -> f64 {
    let b = t.sqrt();
    (pdf(b - chi) - pdf(b + chi)) / (2.0 * b)
}

/// Point where the chord from `(0, g(0))` touches `g`; 0 when `g` is concave
/// from the origin, which happens exactly when `chi <= sqrt(3)`.
pub fn tangency_point(chi: f64) -> f64 {
    if chi <= 3f64.sqrt() {
        return 0.0;
    }
    let g0 = g(0.0, chi);
    // N(t) = t g'(t) - (g(t) - g(0)) rises on the convex stretch, then falls
    // and crosses zero once in the concave one.
    let n = |t: f64| t * g_prime(t, chi) - (g(t, chi) - g0);
    let mut hi = (chi + 10.0) * (chi + 10.0);
    while n(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.5 * hi;
    while n(lo) <= 1e-13 {
        if lo < 1e-6 {
            return 0.0;
        }
        hi = lo;
        lo *= 0.5;
    }
    let (lo, hi) = illinois_decreasing(n, lo, hi, 1e-13 * hi, 200);
    0.5 * (lo + hi)
}

/// Maximal expected non-coverage over distributions of `b` with `E[b^2] = c`.
pub fn rho(c: f64, chi: f64) -> f64 {
    let t0 = tangency_point(chi);
    if c < t0 {
        let g0 = g(0.0, chi);
        g0 + c * (g(t0, chi) - g0) / t0
    } else {
        g(c, chi)
    }
}

/// Least concave majorant of `g` on a grid of `0` plus `n_points - 1`
/// log-spaced values up to `max(4c, (chi + 8)^2)`, built with a monotone-chain
/// upper hull and evaluated at `c`, then refined by a local search over the
/// two support points of the active hull segment.
///
/// Every value it returns is attained by a feasible two-point distribution,
/// so it approaches [`rho`] from below as the grid is refined.
pub fn rho_grid(c: f64, chi: f64, n_points: usize) -> f64 {
    let t_max = (4.0 * c).max((chi + 8.0) * (chi + 8.0));
    let t_min = t_max * 1e-7;
    let ratio = (t_max / t_min).powf(1.0 / (n_points - 2) as f64);
    let mut ts: Vec<f64> = std::iter::once(0.0)
        .chain((0..n_points - 1).map(|i| t_min * ratio.powi(i as i32)))
        .chain(std::iter::once(c))
        .collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let pts: Vec<(f64, f64)> = ts.iter().map(|&t| (t, g(t, chi))).collect();

    let hull = upper_hull(&pts);
    let j = hull.partition_point(|p| p.0 <= c);
    if j == 0 || j >= hull.len() {
        return g(c, chi);
    }
    let (l, r) = (hull[j - 1], hull[j]);
    if l.0 == c {
        return l.1;
    }
    let chord = |t1: f64, t2: f64| {
        let (g1, g2) = (g(t1, chi), g(t2, chi));
        g1 + (c - t1) * (g2 - g1) / (t2 - t1)
    };
    let mut best = (l.0, r.0, chord(l.0, r.0));

    let neighbours = |t: f64| {
        let i = ts.partition_point(|x| *x < t);
        (ts[i.saturating_sub(1)], ts[(i + 1).min(ts.len() - 1)])
    };
    let (l_lo, l_hi) = neighbours(l.0);
    let (r_lo, r_hi) = neighbours(r.0);
    let (l_lo, l_hi) = (l_lo, l_hi.min(c));
    let (r_lo, r_hi) = (r_lo.max(c), r_hi);
    for _ in 0..4 {
        let t2 = best.1;
        let t1 = golden_max(|t| if t < c { chord(t, t2) } else { f64::NEG_INFINITY }, l_lo, l_hi);
        let t1 = if chord(t1, t2) > best.2 { t1 } else { best.0 };
        let t2 = golden_max(|t| if t > c { chord(t1, t) } else { f64::NEG_INFINITY }, r_lo, r_hi);
        let v = chord(t1, t2);
        if v > best.2 {
            best = (t1, t2, v);
        }
    }
    best.2.max(g(c, chi))
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    if f1 > f2 {
        x1
    } else {
        x2
    }
}

/// Upper convex hull of points sorted by `x` (Andrew's monotone chain).
pub fn upper_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Smallest critical value `chi` with `rho(c, chi) <= alpha`.
pub fn cva(c: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("c = {c} must be finite and nonnegative")));
    }
    let z = two_sided_critical(alpha);
    if c == 0.0 {
        return Ok(z);
    }
    let mut lo = z;
    let mut hi = z + c.sqrt() + 10.0;
    while rho(c, hi) > alpha {
        lo = hi;
        hi *= 2.0;
    }
    let (_, hi) = illinois_decreasing(|chi| rho(c, chi) - alpha, lo, hi, 1e-9, 200);
    Ok(hi)
}

/// Memoized critical values for one `alpha`, keyed on `c` rounded to `1e-10`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvaTable {
    pub alpha: f64,
    entries: BTreeMap<u64, (f64, f64)>,
}

impl CvaTable {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha = {alpha} must lie in (0, 1)")));
        }
        Ok(Self { alpha, entries: BTreeMap::new() })
    }

    pub fn get(&mut self, c: f64) -> Result<f64> {
        let rounded = (c * 1e10).round();
        if let Some(&(_, v)) = self.entries.get(&rounded.to_bits()) {
            return Ok(v);
        }
        let key_c = rounded / 1e10;
        let v = cva(key_c, self.alpha)?;
        self.entries.insert(rounded.to_bits(), (key_c, v));
        Ok(v)
    }

    /// `(c, cva(c))` pairs in increasing `c`.
    pub fn entries(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.entries.values().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noncoverage_examples() {
        assert!((noncoverage(0.0, 1.959964) - 0.05).abs() < 1e-6);
        assert!((noncoverage(50.0, 1.96) - 1.0).abs() < 1e-15);
        for b in [0.3, 1.0, 2.5] {
            assert_eq!(noncoverage(b, 1.5), noncoverage(-b, 1.5));
        }
    }

    #[test]
    fn rho_at_zero_and_lower_bound() {
        for chi in [0.5, 1.0, 1.96, 3.0] {
            assert_eq!(rho(0.0, chi), noncoverage(0.0, chi));
            for c in [0.01, 0.3, 1.0, 4.0, 25.0] {
                assert!(rho(c, chi) >= noncoverage(c.sqrt(), chi) - 1e-15);
            }
        }
    }

    #[test]
    fn rho_shape() {
        for chi in [1.5, 2.0, 3.0, 5.0] {
            let cs: Vec<f64> = (0..60).map(|i| i as f64 * 0.25).collect();
            let vals: Vec<f64> = cs.iter().map(|&c| rho(c, chi)).collect();
            for w in vals.windows(2) {
                assert!(w[1] >= w[0] - 1e-15);
            }
            for w in vals.windows(3) {
                // concave on an equispaced grid
                assert!(w[0] + w[2] <= 2.0 * w[1] + 1e-12);
            }
        }
        for c in [0.0, 0.5, 2.0, 9.0] {
            let mut prev = f64::INFINITY;
            for i in 0..40 {
                let v = rho(c, 1.0 + 0.2 * i as f64);
                assert!(v < prev);
                prev = v;
            }
        }
    }

    #[test]
    fn grid_majorant_agrees() {
        for &c in &[0.0, 0.1, 1.0, 3.0, 10.0, 50.0] {
            for &chi in &[1.0, 1.96, 3.0, 6.0] {
                let (a, b) = (rho(c, chi), rho_grid(c, chi, 2000));
                assert!(b <= a + 1e-12, "grid above exact: c={c} chi={chi}: {b} > {a}");
                assert!(a - b < 1e-6, "c={c} chi={chi}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn cva_examples() {
        assert!((cva(0.0, 0.05).unwrap() - 1.959964).abs() < 1e-5);
        // independent two-point brute force, alpha = 0.05
        for (c, want) in [(0.25, 2.2266535546), (1.0, 3.2591985203), (4.0, 7.2163510571)] {
            let got = cva(c, 0.05).unwrap();
            assert!((got - want).abs() < 1e-7, "cva({c}) = {got}, want {want}");
            let r = rho(c, got);
            assert!(r <= 0.05 && r >= 0.05 - 1e-6);
        }
        let mut prev = 0.0;
        for i in 0..30 {
            let v = cva(i as f64 * 0.4, 0.1).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        assert!(cva(1.0, 0.0).is_err());
        assert!(cva(-1.0, 0.05).is_err());
    }

    #[test]
    fn table_memoizes() {
        let mut t = CvaTable::new(0.05).unwrap();
        let a = t.get(1.0).unwrap();
        let b = t.get(1.0 + 1e-12).unwrap();
        assert_eq!(a, b);
        t.get(0.0).unwrap();
        t.get(4.0).unwrap();
        let e: Vec<_> = t.entries().collect();
        assert_eq!(e.len(), 3);
        assert!(e.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
        assert!((e[0].1 - two_sided_critical(0.05)).abs() < 1e-8);
    }
}
