use std::path::{Path, PathBuf};

use dshrink::methods::{run_method, EstimateSettings, MethodOutput};
use dshrink::sim::{self, BootstrapConfig, SimConfig, SimResult};
use dshrink::Method;
use serde_json::{json, Value};

use crate::config::{CommandKind, RunConfig};
use crate::error::{CliError, CliResult};
use crate::format::fmt_num;
use crate::io;

pub const ESTIMATE_COLUMNS: [&str; 7] = ["stratum", "method", "estimate", "ci_low", "ci_high", "c_k", "cva"];

/// Path of the JSON sidecar written next to `out`.
pub fn sidecar(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn config_json(cfg: &RunConfig) -> CliResult<Value> {
    serde_json::to_value(cfg).map_err(|e| CliError::Input(e.to_string()))
}

fn emit(cfg: &RunConfig, header: &[String], rows: &[Vec<String>], sidecar_body: Value) -> CliResult<()> {
    let mut w = io::csv_writer(cfg.out.as_deref())?;
    io::write_table(&mut w, header, rows)?;
    if let Some(out) = &cfg.out {
        io::write_json(&sidecar(out), sidecar_body)?;
    }
    Ok(())
}

pub fn estimate(cfg: &RunConfig) -> CliResult<()> {
    let (labels, pair) = io::read_strata(cfg.input()?)?;
    let settings = EstimateSettings {
        alpha: cfg.alpha,
        floor_frac: cfg.floor_frac,
        ure: cfg.ure_options(),
        fixed: Some((cfg.gamma2, cfg.eta2)),
        stein_a: None,
    };
    // Every method must succeed before anything is written.
    let outputs = cfg
        .methods
        .iter()
        .map(|&m| {
            run_method(&pair, m, &settings).map_err(|e| match CliError::from(e) {
                CliError::Numerical(msg) => CliError::Numerical(format!("method {m}: {msg}")),
                CliError::Input(msg) => CliError::Input(format!("method {m}: {msg}")),
            })
        })
        .collect::<CliResult<Vec<MethodOutput>>>()?;

    let mut rows = Vec::new();
    for out in &outputs {
        for (k, label) in labels.iter().enumerate() {
            let mut row = vec![label.clone(), out.method.to_string(), fmt_num(out.estimate[k])];
            match &out.intervals {
                Some(ci) => row.extend([
                    fmt_num(ci.center[k] - ci.half_width[k]),
                    fmt_num(ci.center[k] + ci.half_width[k]),
                    fmt_num(ci.c[k]),
                    fmt_num(ci.cva[k]),
                ]),
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            rows.push(row);
        }
    }

    let fits: Vec<Value> = outputs
        .iter()
        .map(|o| {
            let mut v = json!({ "method": o.method });
            if let Some(fit) = &o.fit {
                v["gamma2"] = json!(fit.fitted.gamma2);
                v["eta2"] = json!(fit.fitted.eta2);
                v["fit_method"] = json!(fit.fitted.method.as_str());
                v["boundary_case"] = json!(fit.boundary_case);
                v["ure_value"] = json!(fit.ure_value);
                if let Some(t) = &fit.truncated {
                    v["truncated"] = json!(t.truncated);
                    v["interval_gamma2"] = json!(t.gamma2);
                    v["interval_eta2"] = json!(t.eta2);
                }
            }
            if let Some(flag) = o.flag {
                v["flag"] = json!(flag);
            }
            v
        })
        .collect();
    let header: Vec<String> = ESTIMATE_COLUMNS.iter().map(|s| s.to_string()).collect();
    let body = json!({
        "config": config_json(cfg)?,
        "K": pair.len(),
        "strata": labels,
        "fits": fits,
    });
    emit(cfg, &header, &rows, body)
}

fn sim_config(cfg: &RunConfig, k: usize) -> SimConfig {
    SimConfig {
        k,
        eta2: cfg.eta2,
        gamma2: cfg.gamma2,
        var_u_range: (cfg.var_u[0], cfg.var_u[1]),
        var_b_range: (cfg.var_b[0], cfg.var_b[1]),
        n_reps: cfg.reps,
        alpha: cfg.alpha,
        seed: cfg.seed,
        methods: cfg.methods.clone(),
        redraw_latents: cfg.redraw_latents,
        floor_frac: cfg.floor_frac,
        ure: cfg.ure_options(),
    }
}

fn pct(x: f64) -> String {
    fmt_num(x)
}

/// Table rows `K, metric, <one column per method>`.
fn metric_rows(k: usize, result: &SimResult, methods: &[Method], with_loss: bool) -> Vec<Vec<String>> {
    let cell = |m: Method, f: &dyn Fn(&sim::MethodSummary) -> Option<f64>| {
        result.method(m).and_then(f).map(pct).unwrap_or_default()
    };
    let mut rows = Vec::new();
    let mut push = |metric: &str, f: &dyn Fn(&sim::MethodSummary) -> Option<f64>| {
        let mut row = vec![k.to_string(), metric.to_string()];
        row.extend(methods.iter().map(|&m| cell(m, f)));
        rows.push(row);
    };
    if with_loss {
        push("loss_pct", &|s| Some(s.loss_ratio_pct));
    }
    if result.alpha.is_some() {
        push("coverage_pct", &|s| s.coverage.as_ref().map(|c| 100.0 * c.average));
        push("min_coverage_pct", &|s| s.coverage.as_ref().map(|c| 100.0 * c.minimum));
        push("length_pct", &|s| s.coverage.as_ref().map(|c| c.length_ratio_pct));
    }
    rows
}

fn table_header(methods: &[Method]) -> Vec<String> {
    ["K".to_string(), "metric".to_string()]
        .into_iter()
        .chain(methods.iter().map(|m| m.to_string()))
        .collect()
}

/// `simulate` (loss table, plus interval rows when alpha is set) and
/// `coverage` (interval rows only).
pub fn simulate(cfg: &RunConfig) -> CliResult<()> {
    let coverage = cfg.command == CommandKind::Coverage;
    if coverage && cfg.alpha.is_none() {
        return Err(CliError::Input("coverage needs --alpha".into()));
    }
    let methods: Vec<Method> = if coverage {
        cfg.methods.iter().copied().filter(|m| m.has_intervals()).collect()
    } else {
        cfg.methods.clone()
    };
    if methods.is_empty() {
        return Err(CliError::Input("none of the selected methods produces intervals".into()));
    }
    let mut rows = Vec::new();
    let mut scenarios = Vec::new();
    for (i, &k) in cfg.k.iter().enumerate() {
        let sc = SimConfig { methods: methods.clone(), ..sim_config(cfg, k) };
        if i == 0 {
            if let Some(path) = &cfg.emit_data {
                write_sim_data(&sc, path)?;
            }
        }
        let result = sim::evaluate_risk(&sc)?;
        rows.extend(metric_rows(k, &result, &methods, !coverage));
        scenarios.push(json!({ "K": k, "result": result }));
    }
    let body = json!({ "config": config_json(cfg)?, "scenarios": scenarios });
    emit(cfg, &table_header(&methods), &rows, body)
}

fn write_sim_data(sc: &SimConfig, path: &Path) -> CliResult<()> {
    let (pair, _) = sim::generate(sc, None)?.replicate(0);
    let rows: Vec<Vec<String>> = (0..pair.len())
        .map(|k| {
            vec![
                format!("s{k}"),
                fmt_num(pair.tau_u()[k]),
                fmt_num(pair.var_u()[k]),
                fmt_num(pair.tau_b()[k]),
                fmt_num(pair.var_b()[k]),
            ]
        })
        .collect();
    let mut w = io::csv_writer(Some(path))?;
    io::write_table(&mut w, &io::STRATUM_COLUMNS, &rows)
}

pub fn bootstrap(cfg: &RunConfig) -> CliResult<()> {
    let units = io::read_units(cfg.input()?)?;
    let rct = units.iter().filter(|u| u.source == sim::Source::Rct).count();
    let bc = BootstrapConfig {
        n_boot: cfg.n_boot,
        rct_subsample: cfg.rct_subsample.unwrap_or(rct / 2),
        seed: cfg.seed,
        methods: cfg.methods.clone(),
        alpha: cfg.alpha,
        floor_frac: cfg.floor_frac,
        ure: cfg.ure_options(),
        variance_floor: cfg.variance_floor,
        resample_obs: true,
    };
    let result = sim::bootstrap_eval(&units, &bc)?;
    let rows = metric_rows(result.k, &result, &cfg.methods, true);
    let body = json!({
        "config": config_json(cfg)?,
        "rct_subsample": bc.rct_subsample,
        "skipped_reps": result.skipped_reps,
        "result": result,
    });
    emit(cfg, &table_header(&cfg.methods), &rows, body)
}
