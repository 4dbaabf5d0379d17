//! Small numerical solvers: bracketed bisection, a 1-D maximizer driven by a
//! score function, and a Nelder-Mead simplex search with projection onto the
//! nonnegative orthant.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootResult {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Bisection for a root of `f` on `[lo, hi]` where `f(lo) > 0 >= f(hi)`.
///
/// Stops when `|f(mid)| < tol` or the bracket cannot be split further in
/// floating point. Exhausting `max_iter` before either is an error.
pub fn bisect_decreasing<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<RootResult> {
    let mut best = RootResult { x: hi, residual: f(hi), iterations: 0 };
    for it in 1..=max_iter {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v.abs() < best.residual.abs() {
            best = RootResult { x: mid, residual: v, iterations: it };
        }
        if v.abs() < tol || mid <= lo || mid >= hi {
            return Ok(RootResult { x: mid, residual: v, iterations: it });
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Solver {
        message: format!(
            "bisection did not reach |score| < {tol} in {max_iter} iterations (best x = {}, residual = {})",
            best.x, best.residual
        ),
        best: None,
    })
}

/// Shrinks a bracket `[lo, hi]` with `f(lo) > 0 >= f(hi)` until it is
/// narrower than `xtol`, using the Illinois variant of regula falsi.
///
/// Returns the final bracket, so callers can pick the side they need.
pub fn illinois_decreasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64, max_iter: usize) -> (f64, f64) {
    let (mut flo, mut fhi) = (f(lo), f(hi));
    let mut side = 0i8;
    for _ in 0..max_iter {
        if hi - lo <= xtol {
            break;
        }
        let mut x = hi - fhi * (hi - lo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx > 0.0 {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if fx == 0.0 {
                break;
            }
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    (lo, hi)
}

/// Maximizer of a smooth function on `[0, inf)` given its derivative `score`
/// and the function itself.
///
/// The derivative must become nonpositive for large arguments. Sign changes
/// from positive to nonpositive are located on a log-spaced scan of
/// `[0, upper]` (with `upper` doubled until the score is nonpositive), each is
/// refined by bisection, and the candidate with the largest `value` (including
/// the boundary point 0) wins.
pub fn maximize_halfline<S, V>(
    score: S,
    value: V,
    upper_hint: f64,
    tol: f64,
    max_iter: usize,
) -> Result<RootResult>
where
    S: Fn(f64) -> f64,
    V: Fn(f64) -> f64,
{
    const SCAN: usize = 256;
    let mut upper = upper_hint.max(f64::MIN_POSITIVE);
    let mut doublings = 0;
    while score(upper) > 0.0 {
        upper *= 2.0;
        doublings += 1;
        if doublings > 1100 || !upper.is_finite() {
            return Err(Error::Solver {
                message: "score stays positive; no finite maximizer".into(),
                best: None,
            });
        }
    }

    let lo_grid = upper * 1e-12;
    let ratio = (upper / lo_grid).powf(1.0 / (SCAN - 1) as f64);
    let mut grid = Vec::with_capacity(SCAN + 1);
    grid.push(0.0);
    let mut x = lo_grid;
    for _ in 0..SCAN {
        grid.push(x);
        x *= ratio;
    }
    *grid.last_mut().unwrap() = upper;

    let mut best = RootResult { x: 0.0, residual: score(0.0), iterations: 0 };
    let mut best_value = value(0.0);
    let mut prev = (grid[0], best.residual);
    for &x in &grid[1..] {
        let s = score(x);
        if prev.1 > 0.0 && s <= 0.0 {
            let root = bisect_decreasing(&score, prev.0, x, tol, max_iter)?;
            let v = value(root.x);
            if v > best_value {
                best_value = v;
                best = root;
            }
        }
        prev = (x, s);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Stop once the simplex diameter falls below `tol * max(1, |best|)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder-Mead minimization over the nonnegative orthant. Every trial point
/// is clamped at zero before evaluation.
pub fn nelder_mead_nonneg<F: Fn(&[f64]) -> f64>(
    f: &F,
    start: &[f64],
    steps: &[f64],
    opts: SimplexOptions,
) -> SimplexResult {
    let n = start.len();
    let clamp = |x: Vec<f64>| x.into_iter().map(|v| v.max(0.0)).collect::<Vec<_>>();
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| {
        evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let x0 = clamp(start.to_vec());
    let v0 = eval(&x0);
    simplex.push((x0.clone(), v0));
    for i in 0..n {
        let mut xi = x0.clone();
        xi[i] += steps[i];
        let xi = clamp(xi);
        let vi = eval(&xi);
        simplex.push((xi, vi));
    }

    let mut converged = false;
    for _ in 0..opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best_norm = simplex[0].0.iter().map(|v| v.abs()).fold(1.0f64, f64::max);
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if diameter < opts.tol * best_norm {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            clamp(
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect(),
            )
        };

        let xr = along(1.0);
        let vr = eval(&xr);
        if vr < simplex[0].1 {
            let xe = along(2.0);
            let ve = eval(&xe);
            simplex[n] = if ve < vr { (xe, ve) } else { (xr, vr) };
            continue;
        }
        if vr < simplex[n - 1].1 {
            simplex[n] = (xr, vr);
            continue;
        }
        let (xc, vc) = if vr < worst.1 {
            let xc = along(0.5);
            let vc = eval(&xc);
            (xc, vc)
        } else {
            let xc = along(-0.5);
            let vc = eval(&xc);
            (xc, vc)
        };
        if vc < worst.1.min(vr) {
            simplex[n] = (xc, vc);
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = clamp(
                vertex
                    .0
                    .iter()
                    .zip(&best)
                    .map(|(v, b)| b + 0.5 * (v - b))
                    .collect(),
            );
            let v = eval(&x);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    SimplexResult { x, value, evaluations: evals, converged }
}
