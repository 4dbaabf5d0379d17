use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::normal::two_sided_critical;
use crate::methods::{run_method, EstimateSettings, Method};
use crate::shrinkage::{squared_error_loss, EstimatePair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    /// Coverage averaged over strata and replications.
    pub average: f64,
    pub average_se: f64,
    /// Smallest per-stratum coverage rate.
    pub minimum: f64,
    pub per_stratum: Vec<f64>,
    /// Mean full interval length `2 * half_width`.
    pub average_length: f64,
    /// Length as a percentage of the RCT-only Wald length `2 z sigma_u`.
    pub length_ratio_pct: f64,
    pub length_ratio_pct_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Replications on which the method produced an estimate.
    pub n_ok: usize,
    pub failures: usize,
    pub mean_loss: f64,
    pub mean_loss_se: f64,
    /// Mean loss as a percentage of the mean loss of `tau_u` on the same
    /// replications.
    pub loss_ratio_pct: f64,
    pub loss_ratio_pct_se: f64,
    pub coverage: Option<CoverageSummary>,
    #[serde(skip)]
    pub rep_losses: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub n_reps: usize,
    pub k: usize,
    /// Replications dropped for every method (e.g. a stratum vanished from a
    /// bootstrap resample).
    pub skipped_reps: usize,
    pub alpha: Option<f64>,
    pub methods: Vec<MethodSummary>,
    #[serde(skip)]
    pub base_losses: Vec<Option<f64>>,
}

impl SimResult {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    /// `loss_ratio_pct(a) - loss_ratio_pct(b)` over the replications where
    /// both succeeded, with its paired Monte-Carlo standard error.
    pub fn ratio_gap(&self, a: Method, b: Method) -> Option<(f64, f64)> {
        let (sa, sb) = (self.method(a)?, self.method(b)?);
        let mut num = Vec::new();
        let mut den = Vec::new();
        for ((la, lb), u) in sa.rep_losses.iter().zip(&sb.rep_losses).zip(&self.base_losses) {
            if let (Some(la), Some(lb), Some(u)) = (la, lb, u) {
                num.push(la - lb);
                den.push(*u);
            }
        }
        let (r, se) = ratio_of_means(&num, &den)?;
        Some((100.0 * r, 100.0 * se))
    }
}

struct MethodRep {
    loss: f64,
    covered: Option<Vec<bool>>,
    length: f64,
}

struct RepOutcome {
    k: usize,
    base_loss: f64,
    wald_length: f64,
    methods: Vec<Option<MethodRep>>,
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, 0.0);
    }
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// `sum(num) / sum(den)` with its delta-method standard error.
fn ratio_of_means(num: &[f64], den: &[f64]) -> Option<(f64, f64)> {
    let d: f64 = den.iter().sum();
    if num.is_empty() || !(d > 0.0) {
        return None;
    }
    let r = num.iter().sum::<f64>() / d;
    let resid: Vec<f64> = num.iter().zip(den).map(|(x, y)| x - r * y).collect();
    let (_, se) = mean_se(&resid);
    Some((r, se / (d / den.len() as f64)))
}

fn run_rep(
    pair: &EstimatePair,
    truth: &[f64],
    methods: &[Method],
    settings: &EstimateSettings,
) -> Result<RepOutcome> {
    let base_loss = squared_error_loss(pair.tau_u(), truth)?;
    let wald_length = match settings.alpha {
        Some(alpha) => {
            let z = two_sided_critical(alpha);
            pair.var_u().iter().map(|v| 2.0 * z * v.sqrt()).sum::<f64>() / pair.len() as f64
        }
        None => 0.0,
    };
    let methods = methods
        .iter()
        .map(|&m| {
            let out = run_method(pair, m, settings).ok()?;
            let loss = squared_error_loss(&out.estimate, truth).ok()?;
            if !loss.is_finite() {
                return None;
            }
            let (covered, length) = match &out.intervals {
                Some(ci) => (
                    Some((0..truth.len()).map(|k| ci.covers(k, truth[k])).collect()),
                    2.0 * ci.half_width.iter().sum::<f64>() / truth.len() as f64,
                ),
                None => (None, 0.0),
            };
            Some(MethodRep { loss, covered, length })
        })
        .collect();
    Ok(RepOutcome { k: truth.len(), base_loss, wald_length, methods })
}

/// Runs every method on `n_reps` draws and summarizes loss and coverage.
///
/// `draw(rep)` returns the data and the target effects for replication `rep`;
/// an error skips that replication for all methods. Replications are
/// evaluated in parallel and reduced in index order.
pub fn evaluate<F>(n_reps: usize, methods: &[Method], settings: &EstimateSettings, draw: F) -> Result<SimResult>
where
    F: Fn(u64) -> Result<(EstimatePair, Vec<f64>)> + Sync,
{
    if methods.contains(&Method::Fixed) && settings.fixed.is_none() {
        return Err(Error::Config("method 'fixed' needs hyperparameters".into()));
    }
    let outcomes: Vec<Option<RepOutcome>> = (0..n_reps as u64)
        .into_par_iter()
        .map(|rep| {
            let (pair, truth) = draw(rep).ok()?;
            run_rep(&pair, &truth, methods, settings).ok()
        })
        .collect();

    let k = outcomes.iter().flatten().map(|o| o.k).next().unwrap_or(0);
    let skipped_reps = outcomes.iter().filter(|o| o.is_none()).count();
    if skipped_reps == n_reps {
        return Err(Error::Degenerate("every replication was skipped".into()));
    }
    let base_losses: Vec<Option<f64>> = outcomes.iter().map(|o| o.as_ref().map(|o| o.base_loss)).collect();

    let summaries = methods
        .iter()
        .enumerate()
        .map(|(j, &method)| summarize(method, j, &outcomes, settings.alpha))
        .collect();

    Ok(SimResult { n_reps, k, skipped_reps, alpha: settings.alpha, methods: summaries, base_losses })
}

fn summarize(method: Method, j: usize, outcomes: &[Option<RepOutcome>], alpha: Option<f64>) -> MethodSummary {
    let mut losses = Vec::new();
    let mut base = Vec::new();
    let mut rep_losses = Vec::with_capacity(outcomes.len());
    let mut rep_cov = Vec::new();
    let mut lengths = Vec::new();
    let mut walds = Vec::new();
    let mut stratum_hits: Vec<usize> = Vec::new();
    let mut failures = 0;

    for o in outcomes {
        let Some(o) = o else {
            rep_losses.push(None);
            continue;
        };
        let Some(r) = &o.methods[j] else {
            failures += 1;
            rep_losses.push(None);
            continue;
        };
        rep_losses.push(Some(r.loss));
        losses.push(r.loss);
        base.push(o.base_loss);
        if let Some(c) = &r.covered {
            if stratum_hits.is_empty() {
                stratum_hits = vec![0; c.len()];
            }
            for (h, &hit) in stratum_hits.iter_mut().zip(c) {
                *h += hit as usize;
            }
            rep_cov.push(c.iter().filter(|&&h| h).count() as f64 / c.len() as f64);
            lengths.push(r.length);
            walds.push(o.wald_length);
        }
    }

    let (mean_loss, mean_loss_se) = mean_se(&losses);
    let (ratio, ratio_se) = ratio_of_means(&losses, &base).unwrap_or((f64::NAN, f64::NAN));
    let coverage = (alpha.is_some() && !rep_cov.is_empty()).then(|| {
        let n = rep_cov.len() as f64;
        let per_stratum: Vec<f64> = stratum_hits.iter().map(|&h| h as f64 / n).collect();
        let (average, average_se) = mean_se(&rep_cov);
        let (lr, lr_se) = ratio_of_means(&lengths, &walds).unwrap_or((f64::NAN, f64::NAN));
        CoverageSummary {
            average,
            average_se,
            minimum: per_stratum.iter().copied().fold(f64::INFINITY, f64::min),
            per_stratum,
            average_length: mean_se(&lengths).0,
            length_ratio_pct: 100.0 * lr,
            length_ratio_pct_se: 100.0 * lr_se,
        }
    });

    MethodSummary {
        method,
        n_ok: losses.len(),
        failures,
        mean_loss,
        mean_loss_se,
        loss_ratio_pct: 100.0 * ratio,
        loss_ratio_pct_se: 100.0 * ratio_se,
        coverage,
        rep_losses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyper::ure;
    use crate::shrinkage::Hyperparams;
    use crate::sim::{evaluate_coverage, evaluate_risk, generate, SimConfig};

    fn base() -> SimConfig {
        SimConfig {
            k: 8,
            eta2: 1.0,
            gamma2: 0.5,
            var_u_range: (0.5, 2.0),
            var_b_range: (0.05, 0.2),
            n_reps: 400,
            seed: 11,
            methods: vec![Method::RawU, Method::Fixed, Method::Mm1, Method::Delta1],
            ..Default::default()
        }
    }

    #[test]
    fn ratio_of_means_delta_method() {
        let (r, se) = ratio_of_means(&[2.0, 4.0], &[1.0, 2.0]).unwrap();
        assert_eq!((r, se), (2.0, 0.0));
        assert!(ratio_of_means(&[], &[]).is_none());
        let (_, se) = ratio_of_means(&[1.0, 3.0, 2.0], &[1.0, 1.0, 1.0]).unwrap();
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn raw_u_is_exactly_one_hundred_percent() {
        let r = evaluate_risk(&base()).unwrap();
        let u = r.method(Method::RawU).unwrap();
        assert_eq!(u.loss_ratio_pct, 100.0);
        assert_eq!(u.loss_ratio_pct_se, 0.0);
        assert_eq!(u.n_ok, 400);
        assert!(r.method(Method::Mm1).unwrap().mean_loss_se > 0.0);
    }

    #[test]
    fn results_are_deterministic() {
        let c = SimConfig { alpha: Some(0.1), ..base() };
        assert_eq!(evaluate_coverage(&c).unwrap(), evaluate_coverage(&c).unwrap());
    }

    #[test]
    fn posterior_mean_beats_unbiased_at_true_hyperparameters() {
        let r = evaluate_risk(&SimConfig { n_reps: 2000, ..base() }).unwrap();
        let (gap, se) = r.ratio_gap(Method::Fixed, Method::RawU).unwrap();
        assert!(gap <= 3.0 * se, "gap {gap} se {se}");
        assert!(gap < 0.0);
    }

    #[test]
    fn failures_are_counted_not_fatal() {
        let c = SimConfig { k: 2, ..base() };
        let r = evaluate_risk(&c).unwrap();
        let d = r.method(Method::Delta1).unwrap();
        assert_eq!((d.n_ok, d.failures), (0, 400));
        assert_eq!(r.method(Method::Mm1).unwrap().failures, 0);
    }

    #[test]
    fn skipped_reps_are_counted() {
        let s = EstimateSettings::default();
        let r = evaluate(10, &[Method::RawU], &s, |rep| {
            if rep % 2 == 0 {
                Err(Error::Aggregation("gone".into()))
            } else {
                Ok((EstimatePair::new(vec![1.0], vec![0.0], vec![1.0], vec![1.0]).unwrap(), vec![0.0]))
            }
        })
        .unwrap();
        assert_eq!(r.skipped_reps, 5);
        assert_eq!(r.method(Method::RawU).unwrap().n_ok, 5);
    }

    #[test]
    fn coverage_at_true_hyperparameters() {
        let c = SimConfig { alpha: Some(0.1), n_reps: 2000, ..base() };
        let r = evaluate_coverage(&c).unwrap();
        let cov = r.method(Method::Fixed).unwrap().coverage.as_ref().unwrap();
        assert!(cov.average >= 0.9 - 3.0 * cov.average_se, "{cov:?}");
        assert!(cov.minimum <= cov.average && cov.per_stratum.len() == 8);
        let wald = r.method(Method::RawU).unwrap().coverage.as_ref().unwrap();
        assert!((wald.length_ratio_pct - 100.0).abs() < 1e-9);
        assert!(r.method(Method::Delta1).unwrap().coverage.is_none());
    }

    #[test]
    fn zero_bias_huge_prior_gives_shorter_intervals() {
        let c = SimConfig {
            eta2: 1e6,
            gamma2: 0.0,
            alpha: Some(0.05),
            n_reps: 100,
            methods: vec![Method::RawU, Method::Fixed],
            ..base()
        };
        let r = evaluate_coverage(&c).unwrap();
        let cov = r.method(Method::Fixed).unwrap().coverage.as_ref().unwrap();
        assert!(cov.length_ratio_pct < 100.0);
    }

    #[test]
    fn pooling_wins_without_bias() {
        let c = SimConfig {
            gamma2: 0.0,
            methods: vec![Method::RawU, Method::PrecisionWeighted, Method::RawB],
            ..base()
        };
        let r = evaluate_risk(&c).unwrap();
        for m in [Method::PrecisionWeighted, Method::RawB] {
            let s = r.method(m).unwrap();
            assert!(s.loss_ratio_pct + 3.0 * s.loss_ratio_pct_se < 100.0, "{m}: {s:?}");
        }
    }

    #[test]
    fn pooling_loses_under_large_bias() {
        let c = SimConfig {
            gamma2: 25.0,
            methods: vec![Method::PrecisionWeighted, Method::Mm1, Method::Mle],
            ..base()
        };
        let r = evaluate_risk(&c).unwrap();
        for m in [Method::Mm1, Method::Mle] {
            let (gap, se) = r.ratio_gap(Method::PrecisionWeighted, m).unwrap();
            assert!(gap > 3.0 * se, "{m}: gap {gap} se {se}");
        }
    }

    #[test]
    fn ure_tracks_realized_loss_with_fixed_latents() {
        let c = SimConfig { redraw_latents: false, n_reps: 20_000, ..base() };
        let hp = Hyperparams::fixed(0.7, 1.5).unwrap();
        let g = generate(&c, None).unwrap();
        let diffs: Vec<f64> = g
            .iter()
            .map(|(pair, truth)| {
                let est = crate::shrinkage::shrink(&pair, &hp).unwrap();
                ure(&pair, &hp).unwrap() - squared_error_loss(&est, &truth.tau).unwrap()
            })
            .collect();
        let (m, se) = mean_se(&diffs);
        assert!(m.abs() <= 3.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn marginal_variance_of_unbiased_estimates() {
        let c = SimConfig { k: 3, eta2: 2.0, n_reps: 100_000, ..base() };
        let g = generate(&c, None).unwrap();
        let mut sq = vec![Vec::with_capacity(c.n_reps); 3];
        for (pair, _) in g.iter() {
            for k in 0..3 {
                sq[k].push(pair.tau_u()[k] * pair.tau_u()[k]);
            }
        }
        for k in 0..3 {
            let (m, se) = mean_se(&sq[k]);
            let want = 2.0 + g.var_u()[k];
            assert!((m - want).abs() <= 3.0 * se, "stratum {k}: {m} vs {want} (se {se})");
        }
    }
}
