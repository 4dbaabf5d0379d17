//! Double-shrinkage estimators for fusing an unbiased and a biased estimate
//! of the same vector of effects.
//!
//! The estimator first forms a per-component convex combination of the two
//! sources and then shrinks the result toward zero; both steps are driven by
//! two hyperparameters `(gamma2, eta2)` fitted from the data by moment
//! matching ([`hyper::fit_mm1`], [`hyper::fit_mm2`]), marginal likelihood
//! ([`hyper::fit_mle`]) or unbiased-risk minimization ([`hyper::fit_ure`]).
//! [`inference`] builds robust empirical-Bayes intervals around the estimate,
//! [`competitors`] holds reference estimators, and [`sim`] runs seeded
//! Monte-Carlo and bootstrap evaluations.

pub mod competitors;
pub mod error;
pub mod hyper;
pub mod inference;
pub mod methods;
pub mod optim;
pub mod shrinkage;
pub mod sim;

pub use error::{Error, Result};
pub use hyper::{BoundaryCase, MleSolution, UreOptions, UreSolution};
pub use inference::{CvaTable, IntervalSet};
pub use methods::Method;
pub use shrinkage::{
    compute_weights, shrink, shrink_with_weights, squared_error_loss, EstimatePair, FitMethod,
    Hyperparams, LatentTruth, ShrinkageWeights,
};
