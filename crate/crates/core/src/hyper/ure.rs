use serde::{Deserialize, Serialize};

use super::{fit_mle, fit_mm1, fit_mm2, median};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead_nonneg, SimplexOptions};
use crate::shrinkage::{
    compute_weights, shrink_with_weights, EstimatePair, FitMethod, Hyperparams, ShrinkageWeights,
};

/// Unbiased estimate of `E||psi - tau||^2` for fixed hyperparameters:
/// `tr(var_u) + ||psi - tau_u||^2 - 2 sum_k var_u[k] (1 - a_k lambda_k)`.
pub fn ure(pair: &EstimatePair, hp: &Hyperparams) -> Result<f64> {
    let w = compute_weights(pair, hp)?;
    ure_with_weights(pair, &w)
}

pub fn ure_with_weights(pair: &EstimatePair, w: &ShrinkageWeights) -> Result<f64> {
    let psi = shrink_with_weights(pair, w)?;
    let fit: f64 = psi.iter().zip(pair.tau_u()).map(|(p, u)| (p - u) * (p - u)).sum();
    let penalty: f64 = pair
        .var_u()
        .iter()
        .enumerate()
        .map(|(k, v)| v * (1.0 - w.a[k] * w.lambda[k]))
        .sum();
    Ok(pair.trace_u() + fit - 2.0 * penalty)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UreOptions {
    pub simplex_tol: f64,
    pub max_iter: usize,
    /// Restarts of the simplex from its own optimum, per starting point.
    pub restarts: usize,
    pub mle_tol: f64,
    pub mle_max_iter: usize,
}

impl Default for UreOptions {
    fn default() -> Self {
        Self { simplex_tol: 1e-8, max_iter: 500, restarts: 3, mle_tol: 1e-10, mle_max_iter: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UreSolution {
    pub hp: Hyperparams,
    pub ure_value: f64,
    pub evaluations: usize,
}

/// Multi-start simplex minimization of [`ure`] over `gamma2 >= 0, eta2 >= 0`.
///
/// Starts from `(0, 0)`, the two moment-matching fits, the likelihood fit and
/// `(median var_b, median var_u)`; the returned value is never above the URE
/// at any of them.
pub fn fit_ure(pair: &EstimatePair, opts: &UreOptions) -> Result<UreSolution> {
    let objective = |x: &[f64]| -> f64 {
        Hyperparams::new(x[0], x[1], FitMethod::Ure)
            .and_then(|hp| ure(pair, &hp))
            .unwrap_or(f64::INFINITY)
    };

    let mut starts = vec![[0.0, 0.0]];
    for hp in [fit_mm1(pair)?, fit_mm2(pair)?] {
        starts.push([hp.gamma2, hp.eta2]);
    }
    // The likelihood anchor is optional: its failure only removes one start.
    if let Ok(mle) = fit_mle(pair, opts.mle_tol, opts.mle_max_iter) {
        starts.push([mle.hp.gamma2, mle.hp.eta2]);
    }
    let (mvu, mvb) = (median(pair.var_u()), median(pair.var_b()));
    starts.push([mvb, mvu]);

    let simplex_opts = SimplexOptions { tol: opts.simplex_tol, max_iter: opts.max_iter };
    let mut evaluations = 0;
    let mut best: Option<([f64; 2], f64)> = None;
    let consider = |x: [f64; 2], v: f64, best: &mut Option<([f64; 2], f64)>| {
        if v.is_finite() && best.is_none_or(|b| v < b.1) {
            *best = Some((x, v));
        }
    };

    for start in &starts {
        let v0 = objective(start);
        evaluations += 1;
        consider(*start, v0, &mut best);

        let mut x = start.to_vec();
        let mut v = v0;
        for _ in 0..=opts.restarts {
            let steps = [
                (0.5 * x[0]).max(0.25 * mvb.max(mvu)),
                (0.5 * x[1]).max(0.25 * mvu),
            ];
            let r = nelder_mead_nonneg(&objective, &x, &steps, simplex_opts);
            evaluations += r.evaluations;
            let improved = r.value < v - 1e-14 * v.abs().max(1.0);
            if r.value < v {
                x = r.x;
                v = r.value;
            }
            if !improved {
                break;
            }
        }
        consider([x[0], x[1]], v, &mut best);
    }

    let (x, ure_value) = best.ok_or_else(|| Error::Solver {
        message: "URE is not finite at any starting point".into(),
        best: None,
    })?;
    Ok(UreSolution { hp: Hyperparams::new(x[0], x[1], FitMethod::Ure)?, ure_value, evaluations })
}
