//! Data-driven choices of `(gamma2, eta2)`: moment matching, marginal maximum
//! likelihood, and minimization of the unbiased risk estimate.

mod mle;
mod mm;
mod ure;

pub use mle::{fit_mle, log_likelihood, scores, BoundaryCase, MleSolution};
pub use mm::{fit_mm1, fit_mm2};
pub use ure::{fit_ure, ure, ure_with_weights, UreOptions, UreSolution};

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
