use crate::error::Result;
use crate::shrinkage::{EstimatePair, FitMethod, Hyperparams};

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn eta2_mm(pair: &EstimatePair) -> f64 {
    ((sq_norm(pair.tau_u()) - pair.trace_u()) / pair.len() as f64).max(0.0)
}

/// Moment matching on `E||tau_u - tau_b||^2 = tr(var_u) + tr(var_b) + K gamma2`
/// and `E||tau_u||^2 = tr(var_u) + K eta2`, each clamped at zero.
pub fn fit_mm1(pair: &EstimatePair) -> Result<Hyperparams> {
    let k = pair.len() as f64;
    let gamma2 = ((sq_norm(&pair.difference()) - pair.trace_u() - pair.trace_b()) / k).max(0.0);
    Hyperparams::new(gamma2, eta2_mm(pair), FitMethod::Mm1)
}

/// Moment matching with `gamma2` taken from `E(||tau_b||^2 - ||tau_u||^2)`.
pub fn fit_mm2(pair: &EstimatePair) -> Result<Hyperparams> {
    let k = pair.len() as f64;
    let gamma2 = ((sq_norm(pair.tau_b()) - sq_norm(pair.tau_u()) + pair.trace_u() - pair.trace_b())
        / k)
        .max(0.0);
    Hyperparams::new(gamma2, eta2_mm(pair), FitMethod::Mm2)
}
