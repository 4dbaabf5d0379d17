//! Marginal maximum likelihood for `(eta2, gamma2)`.
//!
//! Marginally `tau_u[k] ~ N(0, eta2 + var_u[k])` and
//! `tau_b[k] ~ N(0, eta2 + gamma2 + var_b[k])`, so the log-likelihood splits
//! into a term in `eta2` and a term in `m = eta2 + gamma2`. The unconstrained
//! problem is therefore two independent 1-D maximizations. When the result
//! violates `m >= eta2` the remaining KKT cases are enumerated and the feasible
//! candidate with the largest likelihood is returned.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::maximize_halfline;
use crate::shrinkage::{EstimatePair, FitMethod, Hyperparams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCase {
    Interior,
    GammaZero,
    EtaZero,
    BothZero,
}

impl BoundaryCase {
    fn classify(gamma2: f64, eta2: f64) -> Self {
        match (gamma2 == 0.0, eta2 == 0.0) {
            (false, false) => BoundaryCase::Interior,
            (true, false) => BoundaryCase::GammaZero,
            (false, true) => BoundaryCase::EtaZero,
            (true, true) => BoundaryCase::BothZero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleSolution {
    pub hp: Hyperparams,
    /// Derivative of the log-likelihood in `eta2` at the solution.
    pub eta_residual: f64,
    /// Derivative of the log-likelihood in `gamma2` at the solution.
    pub gamma_residual: f64,
    pub boundary_case: BoundaryCase,
    pub log_likelihood: f64,
}

fn gaussian_term(x: &[f64], var: &[f64], shift: f64) -> f64 {
    -0.5 * x
        .iter()
        .zip(var)
        .map(|(t, v)| {
            let s = shift + v;
            s.ln() + t * t / s
        })
        .sum::<f64>()
}

fn gaussian_score(x: &[f64], var: &[f64], shift: f64) -> f64 {
    -0.5 * x
        .iter()
        .zip(var)
        .map(|(t, v)| {
            let s = shift + v;
            1.0 / s - t * t / (s * s)
        })
        .sum::<f64>()
}

/// Marginal log-likelihood (up to an additive constant).
pub fn log_likelihood(pair: &EstimatePair, gamma2: f64, eta2: f64) -> f64 {
    gaussian_term(pair.tau_u(), pair.var_u(), eta2)
        + gaussian_term(pair.tau_b(), pair.var_b(), eta2 + gamma2)
}

/// Partial derivatives of [`log_likelihood`] in `(eta2, gamma2)`.
pub fn scores(pair: &EstimatePair, gamma2: f64, eta2: f64) -> (f64, f64) {
    let sb = gaussian_score(pair.tau_b(), pair.var_b(), eta2 + gamma2);
    (gaussian_score(pair.tau_u(), pair.var_u(), eta2) + sb, sb)
}

pub fn fit_mle(pair: &EstimatePair, tol: f64, max_iter: usize) -> Result<MleSolution> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    let (tu, vu, tb, vb) = (pair.tau_u(), pair.var_u(), pair.tau_b(), pair.var_b());
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let max_var = vu.iter().chain(vb).cloned().fold(0.0, f64::max);
    let upper = sq(tu).max(sq(tb)) + max_var;

    let solver_err = |e: Error| match e {
        Error::Solver { message, .. } => Error::Solver {
            message: format!("marginal likelihood: {message}"),
            best: None,
        },
        other => other,
    };

    let eta_free = maximize_halfline(
        |e| gaussian_score(tu, vu, e),
        |e| gaussian_term(tu, vu, e),
        upper,
        tol,
        max_iter,
    )
    .map_err(solver_err)?
    .x;
    let m_free = maximize_halfline(
        |m| gaussian_score(tb, vb, m),
        |m| gaussian_term(tb, vb, m),
        upper,
        tol,
        max_iter,
    )
    .map_err(solver_err)?
    .x;

    // (gamma2, eta2) candidates
    let mut candidates: Vec<(f64, f64)> = Vec::with_capacity(3);
    if m_free >= eta_free {
        candidates.push((m_free - eta_free, eta_free));
    } else {
        let eta_tied = maximize_halfline(
            |e| gaussian_score(tu, vu, e) + gaussian_score(tb, vb, e),
            |e| log_likelihood(pair, 0.0, e),
            upper,
            tol,
            max_iter,
        )
        .map_err(solver_err)?
        .x;
        candidates.push((0.0, eta_tied));
        candidates.push((m_free, 0.0));
        candidates.push((0.0, 0.0));
    }

    let (gamma2, eta2) = candidates
        .into_iter()
        .map(|(g, e)| (g, e, log_likelihood(pair, g, e)))
        .fold(None::<(f64, f64, f64)>, |acc, c| match acc {
            Some(a) if a.2 >= c.2 => Some(a),
            _ => Some(c),
        })
        .map(|(g, e, _)| (g, e))
        .expect("at least one candidate");

    let (eta_residual, gamma_residual) = scores(pair, gamma2, eta2);
    Ok(MleSolution {
        hp: Hyperparams::new(gamma2, eta2, FitMethod::Mle)?,
        eta_residual,
        gamma_residual,
        boundary_case: BoundaryCase::classify(gamma2, eta2),
        log_likelihood: log_likelihood(pair, gamma2, eta2),
    })
}
