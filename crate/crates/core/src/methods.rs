//! Uniform dispatch over every estimator by identifier, used by the
//! simulation harness and the command-line front end.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::competitors::{self, CompetitorFlag};
use crate::error::{Error, Result};
use crate::hyper::{self, BoundaryCase, UreOptions};
use crate::inference::{self, IntervalSet, DEFAULT_FLOOR_FRAC};
use crate::shrinkage::{shrink, EstimatePair, FitMethod, Hyperparams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "mm1")]
    Mm1,
    #[serde(rename = "mm2")]
    Mm2,
    #[serde(rename = "mle")]
    Mle,
    #[serde(rename = "ure")]
    Ure,
    /// Double shrinker at externally supplied hyperparameters.
    #[serde(rename = "fixed")]
    Fixed,
    #[serde(rename = "delta1")]
    Delta1,
    #[serde(rename = "delta2")]
    Delta2,
    #[serde(rename = "delta91")]
    Delta91,
    #[serde(rename = "kappa1")]
    Kappa1,
    #[serde(rename = "kappa2")]
    Kappa2,
    #[serde(rename = "pw")]
    PrecisionWeighted,
    #[serde(rename = "raw-u")]
    RawU,
    #[serde(rename = "raw-b")]
    RawB,
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::RawU,
        Method::RawB,
        Method::PrecisionWeighted,
        Method::Kappa1,
        Method::Kappa2,
        Method::Delta1,
        Method::Delta2,
        Method::Delta91,
        Method::Mm1,
        Method::Mm2,
        Method::Mle,
        Method::Ure,
        Method::Fixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mm1 => "mm1",
            Method::Mm2 => "mm2",
            Method::Mle => "mle",
            Method::Ure => "ure",
            Method::Fixed => "fixed",
            Method::Delta1 => "delta1",
            Method::Delta2 => "delta2",
            Method::Delta91 => "delta91",
            Method::Kappa1 => "kappa1",
            Method::Kappa2 => "kappa2",
            Method::PrecisionWeighted => "pw",
            Method::RawU => "raw-u",
            Method::RawB => "raw-b",
        }
    }

    pub fn is_double_shrinker(self) -> bool {
        matches!(self, Method::Mm1 | Method::Mm2 | Method::Mle | Method::Ure | Method::Fixed)
    }

    /// Whether the method produces confidence intervals (robust EB intervals
    /// for double shrinkers, the Wald interval for `raw-u`).
    pub fn has_intervals(self) -> bool {
        self.is_double_shrinker() || self == Method::RawU
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<_> = Method::ALL.iter().map(|m| m.as_str()).collect();
                Error::invalid(format!("unknown method '{s}' (expected one of {})", known.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSettings {
    /// Interval level; `None` skips interval construction.
    pub alpha: Option<f64>,
    pub floor_frac: f64,
    pub ure: UreOptions,
    /// Hyperparameters for [`Method::Fixed`].
    pub fixed: Option<(f64, f64)>,
    /// Stein constant for `delta1`/`delta2`; `None` uses `K - 2`.
    pub stein_a: Option<f64>,
}

impl Default for EstimateSettings {
    fn default() -> Self {
        Self {
            alpha: None,
            floor_frac: DEFAULT_FLOOR_FRAC,
            ure: UreOptions::default(),
            fixed: None,
            stein_a: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Hyperparameters as fitted.
    pub fitted: Hyperparams,
    /// Hyperparameters after truncation, used for the interval and its centre.
    pub truncated: Option<Hyperparams>,
    pub boundary_case: Option<BoundaryCase>,
    pub ure_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutput {
    pub method: Method,
    /// Point estimate at the fitted hyperparameters.
    pub estimate: Vec<f64>,
    pub fit: Option<FitReport>,
    pub intervals: Option<IntervalSet>,
    pub flag: Option<CompetitorFlag>,
}

fn fit(pair: &EstimatePair, method: Method, s: &EstimateSettings) -> Result<FitReport> {
    let report = |hp: Hyperparams| FitReport { fitted: hp, truncated: None, boundary_case: None, ure_value: None };
    Ok(match method {
        Method::Mm1 => report(hyper::fit_mm1(pair)?),
        Method::Mm2 => report(hyper::fit_mm2(pair)?),
        Method::Mle => {
            let sol = hyper::fit_mle(pair, s.ure.mle_tol, s.ure.mle_max_iter)?;
            FitReport { boundary_case: Some(sol.boundary_case), ..report(sol.hp) }
        }
        Method::Ure => {
            let sol = hyper::fit_ure(pair, &s.ure)?;
            FitReport { ure_value: Some(sol.ure_value), ..report(sol.hp) }
        }
        Method::Fixed => {
            let (g, e) = s
                .fixed
                .ok_or_else(|| Error::Config("method 'fixed' needs hyperparameters".into()))?;
            report(Hyperparams::fixed(g, e)?)
        }
        other => unreachable!("{other} is not a double shrinker"),
    })
}

/// Runs one estimator on one input.
pub fn run_method(pair: &EstimatePair, method: Method, s: &EstimateSettings) -> Result<MethodOutput> {
    let a = || s.stein_a.unwrap_or_else(|| competitors::default_a(pair.len()));
    let plain = |estimate: Vec<f64>| MethodOutput { method, estimate, fit: None, intervals: None, flag: None };
    let flagged = |c: competitors::CompetitorEstimate| MethodOutput { flag: c.flag, ..plain(c.values) };

    if method.is_double_shrinker() {
        let mut report = fit(pair, method, s)?;
        // With intervals requested, the point estimate is the interval centre.
        let (estimate, intervals) = match s.alpha {
            Some(alpha) => {
                let t = inference::truncate_hyperparams(&report.fitted, pair, s.floor_frac)?;
                report.truncated = Some(t);
                let set = inference::robust_intervals(pair, &t, alpha)?;
                (set.center.clone(), Some(set))
            }
            None => (shrink(pair, &report.fitted)?, None),
        };
        return Ok(MethodOutput { method, estimate, fit: Some(report), intervals, flag: None });
    }

    Ok(match method {
        Method::Delta1 => plain(competitors::delta1(pair, a())?),
        Method::Delta2 => plain(competitors::delta2(pair, a())?),
        Method::Delta91 => flagged(competitors::delta_homoscedastic(pair)?),
        Method::Kappa1 => flagged(competitors::kappa1(pair)),
        Method::Kappa2 => flagged(competitors::kappa2(pair)),
        Method::PrecisionWeighted => plain(competitors::precision_weighted(pair)),
        Method::RawU => MethodOutput {
            intervals: s.alpha.map(|alpha| inference::wald_intervals(pair, alpha)).transpose()?,
            ..plain(pair.tau_u().to_vec())
        },
        Method::RawB => plain(pair.tau_b().to_vec()),
        _ => unreachable!(),
    })
}

impl From<FitMethod> for Method {
    fn from(m: FitMethod) -> Self {
        match m {
            FitMethod::Mm1 => Method::Mm1,
            FitMethod::Mm2 => Method::Mm2,
            FitMethod::Mle => Method::Mle,
            FitMethod::Ure => Method::Ure,
            FitMethod::Fixed => Method::Fixed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn every_method_runs() {
        let p = EstimatePair::new(
            vec![1.0, -2.0, 0.5, 3.0],
            vec![0.2, -1.0, 1.5, 2.0],
            vec![1.0, 2.0, 0.5, 1.5],
            vec![0.1, 0.3, 0.2, 0.1],
        )
        .unwrap();
        let s = EstimateSettings { alpha: Some(0.05), fixed: Some((0.5, 2.0)), ..Default::default() };
        for m in Method::ALL {
            let out = run_method(&p, m, &s).unwrap();
            assert_eq!(out.estimate.len(), 4);
            assert_eq!(out.intervals.is_some(), m.has_intervals(), "{m}");
            assert_eq!(out.fit.is_some(), m.is_double_shrinker());
        }
    }

    #[test]
    fn fixed_needs_hyperparameters() {
        let p = EstimatePair::new(vec![1.0], vec![0.0], vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(
            run_method(&p, Method::Fixed, &EstimateSettings::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_eta_fit_is_truncated_for_intervals() {
        let p = EstimatePair::new(vec![0.1], vec![0.0], vec![4.0], vec![1.0]).unwrap();
        let s = EstimateSettings { alpha: Some(0.05), ..Default::default() };
        let out = run_method(&p, Method::Mm1, &s).unwrap();
        let fit = out.fit.unwrap();
        assert_eq!(fit.fitted.eta2, 0.0);
        let t = fit.truncated.unwrap();
        assert!(t.truncated && (t.eta2 - 0.04).abs() < 1e-15);
        assert!(out.intervals.unwrap().half_width[0] > 0.0);
    }
}
