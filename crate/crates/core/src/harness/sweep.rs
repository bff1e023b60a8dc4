use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{parse_config, Scenario, SweepConfig, SCHEMA_VERSION};
use super::risk::{monte_carlo_risk, RiskTable};
use crate::error::{invalid, Result};
use crate::smoother::Smoother;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub scenario: String,
    pub check: String,
    pub detail: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub schema_version: u32,
    pub eta: f64,
    pub tables: Vec<RiskTable>,
    pub checks: Vec<CheckOutcome>,
    pub pass: bool,
}

fn csv(table: &RiskTable) -> String {
    let mut out = String::from("eps,h,rmse,rmse_stderr,baseline_rmse,n_reps\n");
    for r in &table.rows {
        let base = r.baseline_rmse.map_or(String::new(), |b| format!("{b:.9e}"));
        let _ = writeln!(
            out,
            "{:.9e},{:.9e},{:.9e},{:.9e},{},{}",
            r.eps, r.h, r.rmse, r.rmse_stderr, base, r.n_reps
        );
    }
    out
}

fn loglog(table: &RiskTable) -> String {
    let mut out = String::from("# log_eps log_rmse log_baseline_rmse\n");
    for r in &table.rows {
        let base = r.baseline_rmse.map_or("nan".to_string(), |b| format!("{:.9e}", b.ln()));
        let _ = writeln!(out, "{:.9e} {:.9e} {}", r.eps.ln(), r.rmse.ln(), base);
    }
    out
}

fn evaluate_checks(sc: &Scenario, t: &RiskTable) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut push = |check: &str, detail: String, pass: bool| {
        out.push(CheckOutcome {
            scenario: sc.name.clone(),
            check: check.into(),
            detail,
            pass,
        })
    };
    if let Some([lo, hi]) = sc.checks.slope {
        match t.fitted {
            Some(f) => push(
                "slope",
                format!("{:.4} in [{lo}, {hi}]", f.slope),
                f.slope >= lo && f.slope <= hi,
            ),
            None => push("slope", "no fit".into(), false),
        }
    }
    if let Some(k) = sc.checks.baseline_worse_at_smallest {
        let tail = &t.rows[t.rows.len().saturating_sub(k)..];
        let ok = tail.len() == k
            && tail
                .iter()
                .all(|r| r.baseline_rmse.is_some_and(|b| b > r.rmse));
        let detail = tail
            .iter()
            .map(|r| {
                format!(
                    "eps {}: {:.4e} vs {}",
                    r.eps,
                    r.rmse,
                    r.baseline_rmse.map_or("-".into(), |b| format!("{b:.4e}"))
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        push("baseline_worse_at_smallest", detail, ok);
    }
    if let Some(gap) = sc.checks.baseline_slope_gap {
        match (t.fitted, t.baseline_fitted) {
            (Some(a), Some(b)) => push(
                "baseline_slope_gap",
                format!("{:.4} - {:.4} = {:.4} >= {gap}", a.slope, b.slope, a.slope - b.slope),
                a.slope - b.slope >= gap,
            ),
            _ => push("baseline_slope_gap", "no fit".into(), false),
        }
    }
    out
}

/// Runs every scenario of a parsed config and writes the result files into
/// `out`. `jobs` caps the worker threads; results do not depend on it.
pub fn run_config(cfg: &SweepConfig, out: &Path, jobs: Option<usize>) -> Result<SweepOutcome> {
    std::fs::create_dir_all(out)?;
    let body = || -> Result<SweepOutcome> {
        let mut tables = Vec::new();
        let mut checks = Vec::new();
        if !cfg.scenarios.is_empty() {
            let s = Smoother::new(cfg.eta)?;
            for sc in &cfg.scenarios {
                let t = monte_carlo_risk(sc, &s)?;
                std::fs::write(out.join(format!("risk_{}.csv", sc.name)), csv(&t))?;
                std::fs::write(out.join(format!("loglog_{}.dat", sc.name)), loglog(&t))?;
                checks.extend(evaluate_checks(sc, &t));
                tables.push(t);
            }
        }
        let pass = checks.iter().all(|c| c.pass);
        Ok(SweepOutcome {
            schema_version: SCHEMA_VERSION,
            eta: cfg.eta,
            tables,
            checks,
            pass,
        })
    };
    let outcome = match jobs {
        Some(0) => return Err(invalid("--jobs must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?
            .install(body)?,
        None => body()?,
    };
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&outcome)?)?;
    Ok(outcome)
}

/// Reads `config`, runs it, and writes `risk_<name>.csv`,
/// `loglog_<name>.dat` and `summary.json` under `out`.
pub fn run_sweep(config: impl AsRef<Path>, out: impl AsRef<Path>, jobs: Option<usize>) -> Result<SweepOutcome> {
    let cfg = parse_config(&std::fs::read_to_string(config.as_ref())?)?;
    run_config(&cfg, out.as_ref(), jobs)
}

/// The CSV path `run_sweep` writes for a scenario.
pub fn risk_csv_path(out: &Path, scenario: &str) -> PathBuf {
    out.join(format!("risk_{scenario}.csv"))
}
