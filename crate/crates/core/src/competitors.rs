//! Reference estimators that combine the two sources without shrinking toward
//! zero: Stein-type estimators that shrink `tau_u` toward `tau_b`, the
//! URE-tuned single-factor and variance-proportional combinations, and the
//! inverse-variance weighted average.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shrinkage::EstimatePair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompetitorFlag {
    /// The shrinkage direction is zero; `tau_u` is returned unchanged.
    Degenerate,
    /// A homoscedastic formula was applied to heteroscedastic input using the
    /// mean unbiased variance.
    MeanVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitorEstimate {
    pub values: Vec<f64>,
    pub flag: Option<CompetitorFlag>,
}

/// Default Stein constant `K - 2`.
pub fn default_a(k: usize) -> f64 {
    k as f64 - 2.0
}

fn check_stein(pair: &EstimatePair, a: f64) -> Result<Vec<f64>> {
    let k = pair.len();
    if k < 3 {
        return Err(Error::invalid(format!("requires K >= 3, got K = {k}")));
    }
    let upper = 2.0 * (k as f64 - 2.0);
    if !(a > 0.0 && a < upper) {
        return Err(Error::invalid(format!("a = {a} must lie in (0, {upper})")));
    }
    let d = pair.difference();
    if d.iter().all(|x| *x == 0.0) {
        return Err(Error::Degenerate("tau_u equals tau_b".into()));
    }
    Ok(d)
}

/// `tau_b + (1 - a / d' V^-1 d) d` with `d = tau_u - tau_b`.
pub fn delta1(pair: &EstimatePair, a: f64) -> Result<Vec<f64>> {
    let d = check_stein(pair, a)?;
    let q: f64 = d.iter().zip(pair.var_u()).map(|(x, v)| x * x / v).sum();
    let factor = 1.0 - a / q;
    Ok(pair.tau_b().iter().zip(&d).map(|(b, x)| b + factor * x).collect())
}

/// `tau_b + (I - a V^-1 / d' V^-2 d) d`.
pub fn delta2(pair: &EstimatePair, a: f64) -> Result<Vec<f64>> {
    let d = check_stein(pair, a)?;
    let q: f64 = d.iter().zip(pair.var_u()).map(|(x, v)| x * x / (v * v)).sum();
    Ok((0..pair.len())
        .map(|k| pair.tau_b()[k] + (1.0 - a / (pair.var_u()[k] * q)) * d[k])
        .collect())
}

/// Positive-part homoscedastic estimator
/// `tau_b + (1 - (K-2) s2 / ||d||^2)_+ d`, where `s2` is the common unbiased
/// variance (the mean variance when the input is heteroscedastic).
pub fn delta_homoscedastic(pair: &EstimatePair) -> Result<CompetitorEstimate> {
    let k = pair.len();
    if k < 3 {
        return Err(Error::invalid(format!("requires K >= 3, got K = {k}")));
    }
    let vu = pair.var_u();
    let s2 = pair.trace_u() / k as f64;
    let hetero = vu.iter().any(|v| *v != vu[0]);
    let d = pair.difference();
    let norm: f64 = d.iter().map(|x| x * x).sum();
    if norm == 0.0 {
        return Err(Error::Degenerate("tau_u equals tau_b".into()));
    }
    let factor = (1.0 - (k as f64 - 2.0) * s2 / norm).max(0.0);
    Ok(CompetitorEstimate {
        values: pair.tau_b().iter().zip(&d).map(|(b, x)| b + factor * x).collect(),
        flag: hetero.then_some(CompetitorFlag::MeanVariance),
    })
}

/// Shrinks every component of `tau_u` toward `tau_b` by the same fraction,
/// chosen to minimize the unbiased risk estimate and clamped to `[0, 1]`.
///
/// For `kappa = tau_u - l d` the URE is `tr V + l^2 ||d||^2 - 2 l tr V`,
/// minimized at `l = tr V / ||d||^2`.
pub fn kappa1(pair: &EstimatePair) -> CompetitorEstimate {
    let d = pair.difference();
    let norm: f64 = d.iter().map(|x| x * x).sum();
    if norm == 0.0 {
        return CompetitorEstimate {
            values: pair.tau_u().to_vec(),
            flag: Some(CompetitorFlag::Degenerate),
        };
    }
    let l = (pair.trace_u() / norm).clamp(0.0, 1.0);
    CompetitorEstimate {
        values: pair.tau_u().iter().zip(&d).map(|(u, x)| u - l * x).collect(),
        flag: None,
    }
}

/// Shrinks component `k` toward `tau_b[k]` by `l * var_u[k]`, clamped per
/// component to `[0, 1]`, with `l` minimizing the URE of the family
/// `kappa_k = tau_u[k] - l var_u[k] d_k`:
/// `tr V + l^2 sum v^2 d^2 - 2 l sum v^2`, so `l = sum v^2 / sum v^2 d^2`.
pub fn kappa2(pair: &EstimatePair) -> CompetitorEstimate {
    let d = pair.difference();
    let vu = pair.var_u();
    let num: f64 = vu.iter().map(|v| v * v).sum();
    let den: f64 = vu.iter().zip(&d).map(|(v, x)| v * v * x * x).sum();
    if !(den > 0.0) || !(num / den).is_finite() {
        return CompetitorEstimate {
            values: pair.tau_u().to_vec(),
            flag: Some(CompetitorFlag::Degenerate),
        };
    }
    let l = num / den;
    CompetitorEstimate {
        values: (0..pair.len())
            .map(|k| pair.tau_u()[k] - (l * vu[k]).clamp(0.0, 1.0) * d[k])
            .collect(),
        flag: None,
    }
}

/// Inverse-variance weighted average of the two sources.
pub fn precision_weighted(pair: &EstimatePair) -> Vec<f64> {
    (0..pair.len())
        .map(|k| {
            let (wu, wb) = (1.0 / pair.var_u()[k], 1.0 / pair.var_b()[k]);
            (pair.tau_u()[k] * wu + pair.tau_b()[k] * wb) / (wu + wb)
        })
        .collect()
}
