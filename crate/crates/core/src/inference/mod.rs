//! Robust empirical-Bayes confidence intervals for the double-shrinkage
//! estimate.
//!
//! For fixed weights, `(psi_k - tau_k) / se_k` is normal with unit variance
//! and mean `b_k`, where `se_k = a_k sqrt(lambda_k^2 var_u + (1-lambda_k)^2 var_b)`.
//! Only the second moment `E[b_k^2] = c_k` is pinned down by the
//! hyperparameters, so the interval `psi_k +- cva(c_k) se_k` uses the critical
//! value that covers against every distribution with that second moment.

pub mod normal;
mod worst_case;

use serde::{Deserialize, Serialize};

pub use worst_case::{cva, noncoverage, rho, rho_grid, tangency_point, upper_hull, CvaTable};

use crate::error::{Error, Result};
use crate::hyper::median;
use crate::shrinkage::{compute_weights, shrink_with_weights, EstimatePair, Hyperparams};

pub const DEFAULT_FLOOR_FRAC: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
    /// Standard error `a_k sqrt(lambda_k^2 var_u + (1 - lambda_k)^2 var_b)`.
    pub se: Vec<f64>,
    pub c: Vec<f64>,
    pub cva: Vec<f64>,
    pub alpha: f64,
}

impl IntervalSet {
    pub fn lower(&self) -> Vec<f64> {
        self.center.iter().zip(&self.half_width).map(|(c, h)| c - h).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.center.iter().zip(&self.half_width).map(|(c, h)| c + h).collect()
    }

    pub fn covers(&self, k: usize, value: f64) -> bool {
        (value - self.center[k]).abs() <= self.half_width[k]
    }
}

/// Normalized second moment of the conditional bias of `psi_k`.
pub fn compute_ck(pair: &EstimatePair, hp: &Hyperparams, k: usize) -> Result<f64> {
    if k >= pair.len() {
        return Err(Error::invalid(format!("stratum index {k} out of range")));
    }
    if !(hp.eta2 > 0.0) {
        return Err(Error::Config(
            "eta2 must be positive for interval construction; truncate hyperparameters first".into(),
        ));
    }
    let (vu, vb) = (pair.var_u()[k], pair.var_b()[k]);
    let (g, e) = (hp.gamma2, hp.eta2);
    let num = vu * (g * (e + 2.0 * vb) + g * g + vb * vb);
    let den = e * ((g + vb) * (g + vb) + vb * vu);
    Ok(num / den)
}

/// Raises `eta2` to at least `floor_frac * median(var_u)` and clamps `gamma2`
/// at zero, flagging the result when anything changed.
pub fn truncate_hyperparams(hp: &Hyperparams, pair: &EstimatePair, floor_frac: f64) -> Result<Hyperparams> {
    if !(floor_frac > 0.0 && floor_frac.is_finite()) {
        return Err(Error::invalid(format!("floor_frac = {floor_frac} must be positive")));
    }
    let floor = floor_frac * median(pair.var_u());
    let eta2 = hp.eta2.max(floor);
    let gamma2 = hp.gamma2.max(0.0);
    let mut out = Hyperparams::new(gamma2, eta2, hp.method)?;
    out.truncated = hp.truncated || eta2 != hp.eta2 || gamma2 != hp.gamma2;
    Ok(out)
}

pub fn robust_intervals(pair: &EstimatePair, hp: &Hyperparams, alpha: f64) -> Result<IntervalSet> {
    let mut table = CvaTable::new(alpha)?;
    let w = compute_weights(pair, hp)?;
    let center = shrink_with_weights(pair, &w)?;
    let k = pair.len();
    let (mut se, mut c, mut crit, mut half) =
        (Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k));
    for i in 0..k {
        let l = w.lambda[i];
        let s = w.a[i] * (l * l * pair.var_u()[i] + (1.0 - l) * (1.0 - l) * pair.var_b()[i]).sqrt();
        let ck = compute_ck(pair, hp, i)?;
        let q = table.get(ck)?;
        se.push(s);
        c.push(ck);
        crit.push(q);
        half.push(q * s);
    }
    Ok(IntervalSet { center, half_width: half, se, c, cva: crit, alpha })
}

/// RCT-only Wald interval `tau_u +- z_{1-alpha/2} sd_u`.
pub fn wald_intervals(pair: &EstimatePair, alpha: f64) -> Result<IntervalSet> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let z = normal::two_sided_critical(alpha);
    let se: Vec<f64> = pair.var_u().iter().map(|v| v.sqrt()).collect();
    Ok(IntervalSet {
        center: pair.tau_u().to_vec(),
        half_width: se.iter().map(|s| z * s).collect(),
        c: vec![0.0; pair.len()],
        cva: vec![z; pair.len()],
        se,
        alpha,
    })
}
