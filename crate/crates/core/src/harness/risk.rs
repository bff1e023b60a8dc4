use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{FitForm, Scenario};
use crate::error::{invalid, Error, Result};
use crate::estimator::{bandwidth, Estimator, Rule};
use crate::kernels::Kernel;
use crate::observation::PathSimulator;
use crate::smoother::Smoother;
use crate::testbed::{tune_hard_function, ChangePointFunction, ClassSpec};

const BOOTSTRAP_RESAMPLES: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub eps: f64,
    pub h: f64,
    pub rmse: f64,
    pub rmse_stderr: f64,
    pub baseline_rmse: Option<f64>,
    pub baseline_rmse_stderr: Option<f64>,
    pub n_reps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub slope_ci95: [f64; 2],
    pub intercept: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    pub scenario: String,
    pub theta: f64,
    pub rows: Vec<RiskRow>,
    pub fitted: Option<RateFit>,
    pub baseline_fitted: Option<RateFit>,
    /// Set when some `ε` rows were dropped after a component failure.
    pub partial: bool,
    pub failures: Vec<String>,
}

/// Builds the scenario's test function, tuned to the budget when `hard`.
pub fn scenario_function(sc: &Scenario) -> Result<ChangePointFunction> {
    if sc.hard {
        Ok(tune_hard_function(&sc.function, sc.grid())?.0)
    } else {
        ChangePointFunction::new(sc.function.clone(), sc.grid())
    }
}

/// Root mean square of `errs`.
fn rms(errs: &[f64]) -> f64 {
    (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()
}

/// Bootstrap standard error of the rmse, from a fixed stream.
fn bootstrap_stderr(errs: &[f64], seed: u64) -> f64 {
    let n = errs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stats: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let ss: f64 = (0..n).map(|_| errs[rng.random_range(0..n)].powi(2)).sum();
            (ss / n as f64).sqrt()
        })
        .collect();
    let mean = stats.iter().sum::<f64>() / stats.len() as f64;
    (stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (stats.len() - 1) as f64).sqrt()
}

fn row_seed(base_seed: u64, row: usize) -> u64 {
    base_seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(row as u64 + 1)
}

/// Errors `θ̃ − θ` (and the baseline's) for seeds `seeds`, in seed order.
fn replicate(
    est: &Estimator,
    sim: &PathSimulator,
    theta: f64,
    eps: f64,
    seeds: std::ops::Range<u64>,
) -> Result<Vec<(f64, Option<f64>)>> {
    seeds
        .into_par_iter()
        .map(|seed| {
            let r = est.run(&sim.simulate(eps, seed)?)?;
            Ok((r.theta_tilde - theta, r.baseline_theta.map(|b| b - theta)))
        })
        .collect()
}

struct Setup {
    f: ChangePointFunction,
    kernel: Kernel,
    sim: PathSimulator,
}

fn setup(sc: &Scenario) -> Result<Setup> {
    let f = scenario_function(sc)?;
    let kernel = sc.kernel.build()?;
    let sim = PathSimulator::new(&f, &kernel, &sc.grid())?;
    Ok(Setup { f, kernel, sim })
}

/// Runs `n_reps` simulate→estimate pipelines per `ε` with seeds
/// `base_seed + rep`. Rows whose pipeline fails are dropped and the table
/// is flagged partial. Output does not depend on the thread count.
pub fn monte_carlo_risk(sc: &Scenario, s: &Smoother) -> Result<RiskTable> {
    let Setup { f, kernel, sim } = setup(sc)?;
    let theta = f.theta();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (i, &eps) in sc.eps_list.iter().enumerate() {
        let row = (|| -> Result<RiskRow> {
            let h = bandwidth(eps, kernel.beta(), &sc.function.class, &sc.rule)?;
            let est = Estimator::new(&kernel, s, h, &sc.grid(), sc.baseline)?;
            let seeds = sc.base_seed..sc.base_seed + sc.n_reps as u64;
            let errs = replicate(&est, &sim, theta, eps, seeds)?;
            let main: Vec<f64> = errs.iter().map(|e| e.0).collect();
            let seed = row_seed(sc.base_seed, i);
            let base: Option<Vec<f64>> = errs.iter().map(|e| e.1).collect();
            Ok(RiskRow {
                eps,
                h,
                rmse: rms(&main),
                rmse_stderr: bootstrap_stderr(&main, seed),
                baseline_rmse: base.as_deref().map(rms),
                baseline_rmse_stderr: base.as_deref().map(|b| bootstrap_stderr(b, !seed)),
                n_reps: sc.n_reps,
            })
        })();
        match row {
            Ok(r) => rows.push(r),
            Err(e) => failures.push(format!("eps = {eps}: {e}")),
        }
    }
    let x = |r: &RiskRow| fit_abscissa(sc, r.eps);
    let fit_of = |pts: Vec<(f64, f64, f64)>| fit_points(&pts).ok();
    let fitted = fit_of(rows.iter().map(|r| (x(r), r.rmse, r.rmse_stderr)).collect());
    let baseline_fitted = if sc.baseline {
        fit_of(
            rows.iter()
                .filter_map(|r| Some((x(r), r.baseline_rmse?, r.baseline_rmse_stderr?)))
                .collect(),
        )
    } else {
        None
    };
    Ok(RiskTable {
        scenario: sc.name.clone(),
        theta,
        partial: !failures.is_empty(),
        rows,
        fitted,
        baseline_fitted,
        failures,
    })
}

/// `log ε`, or the log of the analytic-class rate when requested.
fn fit_abscissa(sc: &Scenario, eps: f64) -> f64 {
    match (sc.fit, sc.function.class) {
        (FitForm::Analytic, ClassSpec::Anu { nu, l, .. }) => {
            let beta = sc.kernel.build().map(|k| k.beta()).unwrap_or(f64::NAN);
            eps.ln() + (beta - 0.5) * ((l / eps).ln() / nu).ln()
        }
        _ => eps.ln(),
    }
}

/// Least squares of `log rmse` on `x`; the CI propagates each point's
/// standard error through the slope's linear weights.
fn fit_points(pts: &[(f64, f64, f64)]) -> Result<RateFit> {
    let pts: Vec<(f64, f64, f64)> = pts
        .iter()
        .copied()
        .filter(|(x, r, se)| x.is_finite() && *r > 0.0 && r.is_finite() && se.is_finite())
        .collect();
    if pts.len() < 4 {
        return Err(invalid(format!(
            "a rate fit needs at least 4 usable rows, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate fit needs distinct eps values"));
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum::<f64>() / sxx;
    let var: f64 = pts
        .iter()
        .map(|(x, r, se)| ((x - mx) / sxx).powi(2) * (se / r).powi(2))
        .sum();
    let half = 1.96 * var.sqrt();
    Ok(RateFit {
        slope,
        slope_ci95: [slope - half, slope + half],
        intercept: my - slope * mx,
        n_points: pts.len(),
    })
}

/// Power-law fit of a table's primary rmse against `ε`.
pub fn fit_rate_exponent(table: &RiskTable) -> Result<RateFit> {
    fit_points(
        &table
            .rows
            .iter()
            .map(|r| (r.eps.ln(), r.rmse, r.rmse_stderr))
            .collect::<Vec<_>>(),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub constant: f64,
    /// `(candidate, score)`; the score is the geometric mean over the `ε`
    /// ladder of the median `|θ̃ − θ|`.
    pub scores: Vec<(f64, f64)>,
}

/// Picks the rule constant (`C₁*` or `C₃*`/`C₆*`) that minimizes the
/// median error over `n_reps` seeds starting at `holdout_seed`, which
/// should not overlap the seeds used to report risk.
pub fn calibrate_constant(
    sc: &Scenario,
    s: &Smoother,
    candidates: &[f64],
    holdout_seed: u64,
    n_reps: usize,
) -> Result<Calibration> {
    if candidates.is_empty() || n_reps == 0 {
        return Err(invalid("calibration needs candidates and replicates"));
    }
    let Setup { f, kernel, sim } = setup(sc)?;
    let mut scores = Vec::with_capacity(candidates.len());
    for &c in candidates {
        let mut rule = sc.rule;
        match (rule.rule, sc.function.class) {
            (Rule::RegularFm, _) => rule.c1s = c,
            (Rule::Singular, ClassSpec::Anu { .. }) => rule.c6s = c,
            (Rule::Singular, _) => rule.c3s = c,
            (r, _) => {
                return Err(Error::Scenario {
                    scenario: sc.name.clone(),
                    detail: format!("rule {r:?} has no constant to calibrate"),
                })
            }
        }
        let mut log_sum = 0.0;
        for &eps in &sc.eps_list {
            let h = bandwidth(eps, kernel.beta(), &sc.function.class, &rule)?;
            let score = match Estimator::new(&kernel, s, h, &sc.grid(), false) {
                Ok(est) => {
                    let errs = replicate(&est, &sim, f.theta(), eps, holdout_seed..holdout_seed + n_reps as u64)?;
                    let mut abs: Vec<f64> = errs.iter().map(|e| e.0.abs()).collect();
                    abs.sort_by(f64::total_cmp);
                    let mid = abs.len() / 2;
                    let med = if abs.len() % 2 == 1 { abs[mid] } else { 0.5 * (abs[mid - 1] + abs[mid]) };
                    med.max(f64::MIN_POSITIVE)
                }
                // A bandwidth the grid cannot carry disqualifies the candidate.
                Err(Error::Nyquist { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            log_sum += score.ln();
        }
        scores.push((c, (log_sum / sc.eps_list.len() as f64).exp()));
    }
    let best = scores
        .iter()
        .fold(scores[0], |b, s| if s.1 < b.1 { *s } else { b });
    Ok(Calibration {
        constant: best.0,
        scores,
    })
}
