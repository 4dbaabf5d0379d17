//! Seeded Monte-Carlo and bootstrap evaluation of the estimators.
//!
//! Every replication draws from its own ChaCha stream derived from
//! `(seed, replication index)`, so results do not depend on scheduling and
//! replications run in parallel.

mod evaluate;
mod units;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use evaluate::{evaluate, CoverageSummary, MethodSummary, SimResult};
pub use units::{
    aggregate_units, bootstrap_eval, summaries_to_pair, synthesize_units, Arm, BootstrapConfig,
    BootstrapData, Source, StratumSummary, UnitRecord,
};

use crate::error::{Error, Result};
use crate::hyper::UreOptions;
use crate::inference::DEFAULT_FLOOR_FRAC;
use crate::methods::{EstimateSettings, Method};
use crate::shrinkage::{EstimatePair, LatentTruth};

const VARIANCE_STREAM: u64 = 0;
const LATENT_STREAM: u64 = 1;
const FIRST_REP_STREAM: u64 = 2;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub k: usize,
    pub eta2: f64,
    pub gamma2: f64,
    pub var_u_range: (f64, f64),
    pub var_b_range: (f64, f64),
    pub n_reps: usize,
    pub alpha: Option<f64>,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Redraw `(tau, xi)` every replication (empirical-Bayes resampling)
    /// rather than holding them fixed (conditional risk).
    pub redraw_latents: bool,
    pub floor_frac: f64,
    pub ure: UreOptions,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            k: 10,
            eta2: 1.0,
            gamma2: 1.0,
            var_u_range: (1.0, 1.0),
            var_b_range: (0.1, 0.1),
            n_reps: 1000,
            alpha: None,
            seed: 0,
            methods: Method::ALL.iter().copied().filter(|m| *m != Method::Fixed).collect(),
            redraw_latents: true,
            floor_frac: DEFAULT_FLOOR_FRAC,
            ure: UreOptions::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if self.n_reps == 0 {
            return Err(Error::Config("n_reps must be at least 1".into()));
        }
        for (name, v) in [("eta2", self.eta2), ("gamma2", self.gamma2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and nonnegative")));
            }
        }
        for (name, (lo, hi)) in [("var_u", self.var_u_range), ("var_b", self.var_b_range)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} range ({lo}, {hi}) must satisfy 0 < low <= high"
                )));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Config(format!("alpha = {a} must lie in (0, 1)")));
            }
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        Ok(())
    }

    pub fn settings(&self) -> EstimateSettings {
        EstimateSettings {
            alpha: self.alpha,
            floor_frac: self.floor_frac,
            ure: self.ure,
            fixed: Some((self.gamma2, self.eta2)),
            stein_a: None,
        }
    }
}

/// Draws from the Gaussian hierarchical model with variances fixed per
/// experiment.
#[derive(Debug, Clone)]
pub struct Generator {
    config: SimConfig,
    var_u: Vec<f64>,
    var_b: Vec<f64>,
    fixed_truth: Option<LatentTruth>,
}

fn log_uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
    }
}

fn normals<R: Rng>(rng: &mut R, n: usize, sd: f64) -> Vec<f64> {
    (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

impl Generator {
    /// `truth` pins `(tau, xi)` for every replication; otherwise they are drawn
    /// once (when `redraw_latents` is off) or per replication.
    pub fn new(config: &SimConfig, truth: Option<LatentTruth>) -> Result<Self> {
        config.validate()?;
        let k = config.k;
        if let Some(t) = &truth {
            if t.tau.len() != k || t.xi.len() != k {
                return Err(Error::Config("latent truth length does not match K".into()));
            }
        }
        let mut rng = stream_rng(config.seed, VARIANCE_STREAM);
        let var_u = (0..k).map(|_| log_uniform(&mut rng, config.var_u_range)).collect();
        let var_b = (0..k).map(|_| log_uniform(&mut rng, config.var_b_range)).collect();
        let fixed_truth = truth.or_else(|| {
            (!config.redraw_latents).then(|| {
                let mut rng = stream_rng(config.seed, LATENT_STREAM);
                let tau = normals(&mut rng, k, config.eta2.sqrt());
                let xi = normals(&mut rng, k, config.gamma2.sqrt());
                LatentTruth { tau, xi }
            })
        });
        Ok(Self { config: config.clone(), var_u, var_b, fixed_truth })
    }

    pub fn var_u(&self) -> &[f64] {
        &self.var_u
    }

    pub fn var_b(&self) -> &[f64] {
        &self.var_b
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Replication `rep`; a pure function of `(config, truth, rep)`.
    pub fn replicate(&self, rep: u64) -> (EstimatePair, LatentTruth) {
        let k = self.config.k;
        let mut rng = stream_rng(self.config.seed, FIRST_REP_STREAM + rep);
        let truth = match &self.fixed_truth {
            Some(t) => t.clone(),
            None => {
                let tau = normals(&mut rng, k, self.config.eta2.sqrt());
                let xi = normals(&mut rng, k, self.config.gamma2.sqrt());
                LatentTruth { tau, xi }
            }
        };
        let tau_u = (0..k)
            .map(|i| truth.tau[i] + self.var_u[i].sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let tau_b = (0..k)
            .map(|i| {
                truth.tau[i] + truth.xi[i] + self.var_b[i].sqrt() * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let pair = EstimatePair::new(tau_u, tau_b, self.var_u.clone(), self.var_b.clone())
            .expect("generated values are finite with positive variances");
        (pair, truth)
    }

    pub fn iter(&self) -> impl Iterator<Item = (EstimatePair, LatentTruth)> + '_ {
        (0..self.config.n_reps as u64).map(move |r| self.replicate(r))
    }
}

/// Stream of `(EstimatePair, LatentTruth)` replications for `config`.
pub fn generate(config: &SimConfig, truth: Option<LatentTruth>) -> Result<Generator> {
    Generator::new(config, truth)
}

/// Monte-Carlo risk of every configured method against the latent effects.
pub fn evaluate_risk(config: &SimConfig) -> Result<SimResult> {
    let gen = Generator::new(config, None)?;
    evaluate(config.n_reps, &config.methods, &config.settings(), |rep| {
        let (pair, truth) = gen.replicate(rep);
        Ok((pair, truth.tau))
    })
}

/// As [`evaluate_risk`], requiring an interval level.
pub fn evaluate_coverage(config: &SimConfig) -> Result<SimResult> {
    if config.alpha.is_none() {
        return Err(Error::Config("coverage evaluation needs alpha".into()));
    }
    evaluate_risk(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SimConfig {
        SimConfig {
            k: 4,
            eta2: 2.0,
            gamma2: 0.5,
            var_u_range: (0.5, 2.0),
            var_b_range: (0.1, 0.3),
            n_reps: 50,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn seeded_streams_are_repeatable() {
        let a: Vec<_> = generate(&cfg(), None).unwrap().iter().collect();
        let b: Vec<_> = generate(&cfg(), None).unwrap().iter().collect();
        assert_eq!(a, b);
        let other = SimConfig { seed: 8, ..cfg() };
        let c: Vec<_> = generate(&other, None).unwrap().iter().collect();
        assert_ne!(a, c);
    }

    #[test]
    fn variances_fixed_within_ranges() {
        let g = generate(&cfg(), None).unwrap();
        assert!(g.var_u().iter().all(|v| (0.5..=2.0).contains(v)));
        assert!(g.var_b().iter().all(|v| (0.1..=0.3).contains(v)));
        for (pair, _) in g.iter().take(3) {
            assert_eq!(pair.var_u(), g.var_u());
        }
    }

    #[test]
    fn fixed_latents_when_not_redrawn() {
        let c = SimConfig { redraw_latents: false, ..cfg() };
        let g = generate(&c, None).unwrap();
        let t0 = g.replicate(0).1;
        assert_eq!(g.replicate(9).1, t0);
        let pinned = LatentTruth { tau: vec![1.0; 4], xi: vec![-1.0; 4] };
        let g = generate(&cfg(), Some(pinned.clone())).unwrap();
        assert_eq!(g.replicate(3).1, pinned);
    }

    #[test]
    fn degenerate_priors_center_on_zero() {
        let c = SimConfig { eta2: 0.0, gamma2: 0.0, n_reps: 4000, ..cfg() };
        let g = generate(&c, None).unwrap();
        let mut mean_u = vec![0.0; 4];
        let mut mean_b = vec![0.0; 4];
        for (pair, truth) in g.iter() {
            assert!(truth.tau.iter().chain(&truth.xi).all(|x| *x == 0.0));
            for k in 0..4 {
                mean_u[k] += pair.tau_u()[k] / 4000.0;
                mean_b[k] += pair.tau_b()[k] / 4000.0;
            }
        }
        for k in 0..4 {
            assert!(mean_u[k].abs() < 4.0 * (g.var_u()[k] / 4000.0).sqrt());
            assert!(mean_b[k].abs() < 4.0 * (g.var_b()[k] / 4000.0).sqrt());
        }
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig { k: 0, ..cfg() }.validate().is_err());
        assert!(SimConfig { n_reps: 0, ..cfg() }.validate().is_err());
        assert!(SimConfig { var_u_range: (2.0, 1.0), ..cfg() }.validate().is_err());
        assert!(SimConfig { var_b_range: (0.0, 1.0), ..cfg() }.validate().is_err());
        assert!(SimConfig { alpha: Some(1.5), ..cfg() }.validate().is_err());
        assert!(evaluate_coverage(&cfg()).is_err());
    }
}
