//! Domain types and the double-shrinkage estimator itself.
//!
//! Under the Gaussian hierarchical model
//!
//! ```text
//! tau ~ N(0, eta2 I),  xi ~ N(0, gamma2 I)
//! tau_u | tau     ~ N(tau, diag(var_u))
//! tau_b | tau, xi ~ N(tau + xi, diag(var_b))
//! ```
//!
//! the posterior mean of each effect factors into a convex combination of the
//! two sources followed by a multiplicative pull toward zero:
//!
//! ```text
//! psi_k = a_k * (lambda_k * tau_u[k] + (1 - lambda_k) * tau_b[k])
//! lambda_k = (gamma2 + var_b[k]) / (gamma2 + var_b[k] + var_u[k])
//! a_k      = eta2 (gamma2 + var_b[k] + var_u[k])
//!            / (var_u[k] (gamma2 + var_b[k]) + eta2 (gamma2 + var_b[k] + var_u[k]))
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed inputs: an unbiased and a biased estimate of the same K effects,
/// with known per-component sampling variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatePair {
    tau_u: Vec<f64>,
    tau_b: Vec<f64>,
    var_u: Vec<f64>,
    var_b: Vec<f64>,
}

impl EstimatePair {
    pub fn new(tau_u: Vec<f64>, tau_b: Vec<f64>, var_u: Vec<f64>, var_b: Vec<f64>) -> Result<Self> {
        let k = tau_u.len();
        if k == 0 {
            return Err(Error::invalid("estimate vectors must be non-empty"));
        }
        if tau_b.len() != k || var_u.len() != k || var_b.len() != k {
            return Err(Error::invalid(format!(
                "length mismatch: tau_u={}, tau_b={}, var_u={}, var_b={}",
                k,
                tau_b.len(),
                var_u.len(),
                var_b.len()
            )));
        }
        for (name, v) in [("tau_u", &tau_u), ("tau_b", &tau_b)] {
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("{name}[{i}] is not finite")));
            }
        }
        for (name, v) in [("var_u", &var_u), ("var_b", &var_b)] {
            if let Some(i) = v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::invalid(format!(
                    "{name}[{i}] = {} must be finite and strictly positive",
                    v[i]
                )));
            }
        }
        Ok(Self { tau_u, tau_b, var_u, var_b })
    }

    pub fn len(&self) -> usize {
        self.tau_u.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tau_u(&self) -> &[f64] {
        &self.tau_u
    }

    pub fn tau_b(&self) -> &[f64] {
        &self.tau_b
    }

    pub fn var_u(&self) -> &[f64] {
        &self.var_u
    }

    pub fn var_b(&self) -> &[f64] {
        &self.var_b
    }

    /// `tau_u - tau_b`, componentwise.
    pub fn difference(&self) -> Vec<f64> {
        self.tau_u.iter().zip(&self.tau_b).map(|(u, b)| u - b).collect()
    }

    pub fn trace_u(&self) -> f64 {
        self.var_u.iter().sum()
    }

    pub fn trace_b(&self) -> f64 {
        self.var_b.iter().sum()
    }

    /// Reorders every component by `perm` (output slot `i` takes input `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::invalid("permutation length does not match K"));
        }
        let pick = |v: &[f64]| perm.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self::new(pick(&self.tau_u), pick(&self.tau_b), pick(&self.var_u), pick(&self.var_b))
    }
}

/// How a pair of hyperparameters was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Mm1,
    Mm2,
    Mle,
    Ure,
    Fixed,
}

impl FitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FitMethod::Mm1 => "mm1",
            FitMethod::Mm2 => "mm2",
            FitMethod::Mle => "mle",
            FitMethod::Ure => "ure",
            FitMethod::Fixed => "fixed",
        }
    }
}

/// Prior bias variance `gamma2` and prior effect variance `eta2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub gamma2: f64,
    pub eta2: f64,
    pub method: FitMethod,
    /// Set when `eta2`/`gamma2` were raised by truncation before interval
    /// construction.
    #[serde(default)]
    pub truncated: bool,
}

impl Hyperparams {
    pub fn new(gamma2: f64, eta2: f64, method: FitMethod) -> Result<Self> {
        for (name, v) in [("gamma2", gamma2), ("eta2", eta2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} = {v} must be finite and nonnegative")));
            }
        }
        Ok(Self { gamma2, eta2, method, truncated: false })
    }

    pub fn fixed(gamma2: f64, eta2: f64) -> Result<Self> {
        Self::new(gamma2, eta2, FitMethod::Fixed)
    }

    fn validate(&self) -> Result<()> {
        Self::new(self.gamma2, self.eta2, self.method).map(|_| ())
    }
}

/// Per-component zero-shrinkage factors `a` and convex weights `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageWeights {
    pub a: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl ShrinkageWeights {
    /// Weights supplied directly rather than derived from hyperparameters.
    pub fn from_parts(a: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        if a.len() != lambda.len() {
            return Err(Error::invalid("a and lambda must have equal length"));
        }
        if a.iter().chain(&lambda).any(|x| !x.is_finite()) {
            return Err(Error::invalid("weights must be finite"));
        }
        Ok(Self { a, lambda })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// Latent effects and biases; only the simulation harness and risk checks see these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentTruth {
    pub tau: Vec<f64>,
    pub xi: Vec<f64>,
}

pub fn compute_weights(pair: &EstimatePair, hp: &Hyperparams) -> Result<ShrinkageWeights> {
    hp.validate()?;
    let (g, e) = (hp.gamma2, hp.eta2);
    let (a, lambda) = pair
        .var_u
        .iter()
        .zip(&pair.var_b)
        .map(|(&vu, &vb)| {
            let bias_side = g + vb;
            let total = bias_side + vu;
            let lambda = bias_side / total;
            let a = e * total / (vu * bias_side + e * total);
            (a, lambda)
        })
        .unzip();
    Ok(ShrinkageWeights { a, lambda })
}

/// The double-shrinkage estimate `psi` for the given hyperparameters.
pub fn shrink(pair: &EstimatePair, hp: &Hyperparams) -> Result<Vec<f64>> {
    let w = compute_weights(pair, hp)?;
    shrink_with_weights(pair, &w)
}

pub fn shrink_with_weights(pair: &EstimatePair, w: &ShrinkageWeights) -> Result<Vec<f64>> {
    if w.len() != pair.len() {
        return Err(Error::invalid(format!(
            "weights have length {}, estimates have length {}",
            w.len(),
            pair.len()
        )));
    }
    Ok((0..pair.len())
        .map(|k| {
            let l = w.lambda[k];
            w.a[k] * (l * pair.tau_u[k] + (1.0 - l) * pair.tau_b[k])
        })
        .collect())
}

pub fn squared_error_loss(est: &[f64], truth: &[f64]) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::invalid(format!(
            "length mismatch: estimate {} vs truth {}",
            est.len(),
            truth.len()
        )));
    }
    Ok(est.iter().zip(truth).map(|(x, t)| (x - t) * (x - t)).sum())
}
