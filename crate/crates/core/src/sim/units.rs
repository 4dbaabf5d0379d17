use std::collections::HashMap;
use std::fmt;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::evaluate::{evaluate, SimResult};
use super::{stream_rng, FIRST_REP_STREAM};
use crate::error::{Error, Result};
use crate::hyper::UreOptions;
use crate::inference::DEFAULT_FLOOR_FRAC;
use crate::methods::{EstimateSettings, Method};
use crate::shrinkage::EstimatePair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Rct,
    Obs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Treated,
    Control,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Rct => "rct",
            Source::Obs => "obs",
        })
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Treated => "treated",
            Arm::Control => "control",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub stratum: String,
    pub source: Source,
    pub arm: Arm,
    pub outcome: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub stratum: String,
    pub tau_u: f64,
    pub var_u: f64,
    pub tau_b: f64,
    pub var_b: f64,
    pub n_u: Option<usize>,
    pub n_b: Option<usize>,
}

/// Outcomes of one stratum split by source and arm.
#[derive(Debug, Clone, Default)]
struct Cells {
    rct: [Vec<f64>; 2],
    obs: [Vec<f64>; 2],
}

impl Cells {
    fn cell_mut(&mut self, source: Source, arm: Arm) -> &mut Vec<f64> {
        let i = arm as usize;
        match source {
            Source::Rct => &mut self.rct[i],
            Source::Obs => &mut self.obs[i],
        }
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Difference in means and its variance `s_t^2/n_t + s_c^2/n_c`.
fn diff_in_means(
    stratum: &str,
    source: Source,
    [treated, control]: &[Vec<f64>; 2],
    variance_floor: Option<f64>,
) -> Result<(f64, f64, usize)> {
    let mut parts = [(0.0, 0.0); 2];
    for (slot, (arm, x)) in parts.iter_mut().zip([(Arm::Treated, treated), (Arm::Control, control)]) {
        if x.len() < 2 {
            return Err(Error::Aggregation(format!(
                "cell (stratum '{stratum}', {source}, {arm}) has {} record(s); at least 2 are needed",
                x.len()
            )));
        }
        let (m, v) = mean_var(x);
        let mut se2 = v / x.len() as f64;
        if !(se2 > 0.0) {
            match variance_floor {
                Some(f) => se2 = se2.max(f),
                None => {
                    return Err(Error::Aggregation(format!(
                        "cell (stratum '{stratum}', {source}, {arm}) has zero sample variance"
                    )))
                }
            }
        }
        *slot = (m, se2);
    }
    Ok((parts[0].0 - parts[1].0, parts[0].1 + parts[1].1, treated.len() + control.len()))
}

fn group(rows: &[UnitRecord]) -> Result<(Vec<String>, Vec<Cells>)> {
    let mut order = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut cells: Vec<Cells> = Vec::new();
    for r in rows {
        if !r.outcome.is_finite() {
            return Err(Error::invalid(format!("non-finite outcome in stratum '{}'", r.stratum)));
        }
        let i = *index.entry(r.stratum.as_str()).or_insert_with(|| {
            order.push(r.stratum.clone());
            cells.push(Cells::default());
            cells.len() - 1
        });
        cells[i].cell_mut(r.source, r.arm).push(r.outcome);
    }
    if order.is_empty() {
        return Err(Error::Aggregation("no unit records".into()));
    }
    Ok((order, cells))
}

fn summarize(labels: &[String], cells: &[Cells], variance_floor: Option<f64>) -> Result<Vec<StratumSummary>> {
    labels
        .iter()
        .zip(cells)
        .map(|(s, c)| {
            let (tau_u, var_u, n_u) = diff_in_means(s, Source::Rct, &c.rct, variance_floor)?;
            let (tau_b, var_b, n_b) = diff_in_means(s, Source::Obs, &c.obs, variance_floor)?;
            Ok(StratumSummary { stratum: s.clone(), tau_u, var_u, tau_b, var_b, n_u: Some(n_u), n_b: Some(n_b) })
        })
        .collect()
}

/// Per-stratum difference-in-means summaries, in order of first appearance.
///
/// Every `(stratum, source, arm)` cell needs at least two records. A cell
/// with zero sample variance is an error unless `variance_floor` is given, in
/// which case its squared standard error is raised to the floor.
pub fn aggregate_units(rows: &[UnitRecord], variance_floor: Option<f64>) -> Result<Vec<StratumSummary>> {
    if let Some(f) = variance_floor {
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::Config(format!("variance floor {f} must be positive")));
        }
    }
    let (labels, cells) = group(rows)?;
    summarize(&labels, &cells, variance_floor)
}

pub fn summaries_to_pair(s: &[StratumSummary]) -> Result<EstimatePair> {
    EstimatePair::new(
        s.iter().map(|x| x.tau_u).collect(),
        s.iter().map(|x| x.tau_b).collect(),
        s.iter().map(|x| x.var_u).collect(),
        s.iter().map(|x| x.var_b).collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    /// RCT units kept per replicate, drawn without replacement.
    pub rct_subsample: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub alpha: Option<f64>,
    pub floor_frac: f64,
    pub ure: UreOptions,
    pub variance_floor: Option<f64>,
    /// Resample observational units with replacement; off reuses them as is.
    pub resample_obs: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_boot: 1000,
            rct_subsample: 0,
            seed: 0,
            methods: Method::ALL.iter().copied().filter(|m| *m != Method::Fixed).collect(),
            alpha: None,
            floor_frac: DEFAULT_FLOOR_FRAC,
            ure: UreOptions::default(),
            variance_floor: None,
            resample_obs: true,
        }
    }
}

/// Unit-level data prepared for repeated resampling.
#[derive(Debug, Clone)]
pub struct BootstrapData {
    labels: Vec<String>,
    rct: Vec<(usize, Arm, f64)>,
    obs: Vec<(usize, Arm, f64)>,
    full: Vec<StratumSummary>,
}

impl BootstrapData {
    pub fn new(rows: &[UnitRecord], variance_floor: Option<f64>) -> Result<Self> {
        let full = aggregate_units(rows, variance_floor)?;
        let index: HashMap<&str, usize> = full.iter().enumerate().map(|(i, s)| (s.stratum.as_str(), i)).collect();
        let (mut rct, mut obs) = (Vec::new(), Vec::new());
        for r in rows {
            let unit = (index[r.stratum.as_str()], r.arm, r.outcome);
            match r.source {
                Source::Rct => rct.push(unit),
                Source::Obs => obs.push(unit),
            }
        }
        Ok(Self { labels: full.iter().map(|s| s.stratum.clone()).collect(), rct, obs, full })
    }

    pub fn rct_size(&self) -> usize {
        self.rct.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Full-data summaries; their `tau_u` is the bootstrap target.
    pub fn full(&self) -> &[StratumSummary] {
        &self.full
    }

    pub fn truth(&self) -> Vec<f64> {
        self.full.iter().map(|s| s.tau_u).collect()
    }

    /// Stratum summaries for bootstrap replicate `rep`.
    pub fn replicate(&self, cfg: &BootstrapConfig, rep: u64) -> Result<EstimatePair> {
        let mut rng = stream_rng(cfg.seed, FIRST_REP_STREAM + rep);
        let mut cells = vec![Cells::default(); self.labels.len()];
        let mut picked = index::sample(&mut rng, self.rct.len(), cfg.rct_subsample).into_vec();
        picked.sort_unstable();
        for i in picked {
            let (s, arm, y) = self.rct[i];
            cells[s].cell_mut(Source::Rct, arm).push(y);
        }
        let n_obs = self.obs.len();
        for j in 0..n_obs {
            let i = if cfg.resample_obs { rng.random_range(0..n_obs) } else { j };
            let (s, arm, y) = self.obs[i];
            cells[s].cell_mut(Source::Obs, arm).push(y);
        }
        summaries_to_pair(&summarize(&self.labels, &cells, cfg.variance_floor)?)
    }
}

/// Bootstrap loss and coverage against the full-RCT difference in means.
///
/// Replicates in which some cell becomes too small to aggregate are skipped
/// and counted in `skipped_reps`.
pub fn bootstrap_eval(rows: &[UnitRecord], cfg: &BootstrapConfig) -> Result<SimResult> {
    if cfg.n_boot == 0 {
        return Err(Error::Config("n_boot must be at least 1".into()));
    }
    let data = BootstrapData::new(rows, cfg.variance_floor)?;
    if cfg.rct_subsample == 0 || cfg.rct_subsample > data.rct_size() {
        return Err(Error::Config(format!(
            "rct_subsample = {} must lie in 1..={}",
            cfg.rct_subsample,
            data.rct_size()
        )));
    }
    let settings = EstimateSettings {
        alpha: cfg.alpha,
        floor_frac: cfg.floor_frac,
        ure: cfg.ure,
        fixed: None,
        stein_a: None,
    };
    let truth = data.truth();
    evaluate(cfg.n_boot, &cfg.methods, &settings, |rep| {
        Ok((data.replicate(cfg, rep)?, truth.clone()))
    })
}

/// Synthetic unit-level data with per-stratum effects `tau` and observational
/// bias `xi`: `n_rct` and `n_obs` units per arm and stratum, Gaussian noise
/// with standard deviation `sd`.
pub fn synthesize_units(tau: &[f64], xi: &[f64], n_rct: usize, n_obs: usize, sd: f64, seed: u64) -> Vec<UnitRecord> {
    let mut rng = stream_rng(seed, 0);
    let mut rows = Vec::with_capacity(2 * tau.len() * (n_rct + n_obs));
    for (k, (&t, &b)) in tau.iter().zip(xi).enumerate() {
        let stratum = format!("s{k}");
        for (source, n, shift) in [(Source::Rct, n_rct, t), (Source::Obs, n_obs, t + b)] {
            for (arm, mu) in [(Arm::Treated, shift), (Arm::Control, 0.0)] {
                for _ in 0..n {
                    let outcome = mu + sd * rng.sample::<f64, _>(StandardNormal);
                    rows.push(UnitRecord { stratum: stratum.clone(), source, arm, outcome });
                }
            }
        }
    }
    rows
}
