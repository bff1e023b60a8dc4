use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cpdeconv::estimator::{estimate_changepoint, BandwidthConfig, Rule};
use cpdeconv::harness::run_sweep;
use cpdeconv::kernels::KernelSpec;
use cpdeconv::observation::{load_path, save_path, simulate_path};
use cpdeconv::smoother::{build_smoother, default_table_grid, DEFAULT_ETA};
use cpdeconv::spectral::Grid;
use cpdeconv::testbed::{ChangePointFunction, ClassSpec, FunctionSpec};

#[derive(Parser)]
#[command(name = "cpdeconv", version, about = "Change-point estimation from convolved noisy observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum RuleArg {
    RegularFm,
    Singular,
    RegularAnu,
    Manual,
}

impl From<RuleArg> for Rule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::RegularFm => Rule::RegularFm,
            RuleArg::Singular => Rule::Singular,
            RuleArg::RegularAnu => Rule::RegularAnu,
            RuleArg::Manual => Rule::Manual,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep config; exits 2 if any check fails.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Simulate one observation path and write it as CSV plus a JSON sidecar.
    Simulate {
        /// Test function as JSON, or @file.
        #[arg(long)]
        function: String,
        /// Kernel as JSON, or @file.
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Observation grid as `x_min,x_max,n`.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the change point of a saved path; prints a JSON report.
    Estimate {
        #[arg(long)]
        path: PathBuf,
        /// Kernel as JSON, or @file.
        #[arg(long)]
        kernel: String,
        /// Smoothness class as JSON, or @file.
        #[arg(long)]
        class: String,
        #[arg(long, value_enum)]
        rule: RuleArg,
        /// Bandwidth for `--rule manual`.
        #[arg(long)]
        h: Option<f64>,
        /// Also run the first-derivative baseline.
        #[arg(long)]
        baseline: bool,
        /// Rule constant: C1s for regular_fm, C3s/C6s for singular.
        #[arg(long)]
        constant: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_ETA)]
        eta: f64,
    },
    /// Print the smoother landmarks as JSON.
    Landmarks {
        #[arg(long, default_value_t = DEFAULT_ETA)]
        eta: f64,
    },
}

fn json_arg<T: serde::de::DeserializeOwned>(what: &str, v: &str) -> Result<T> {
    let text = match v.strip_prefix('@') {
        Some(file) => std::fs::read_to_string(file).with_context(|| format!("reading {what} from {file}"))?,
        None => v.to_string(),
    };
    serde_json::from_str(&text).with_context(|| format!("parsing --{what}"))
}

fn rule_name(r: Rule) -> String {
    serde_json::to_value(r).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn parse_grid(s: &str) -> Result<Grid> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b, n] = parts[..] else {
        bail!("--grid wants x_min,x_max,n, got {s:?}");
    };
    Ok(Grid::new(a.parse()?, b.parse()?, n.parse()?)?)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sweep { config, out, jobs } => {
            let outcome = run_sweep(&config, &out, jobs)?;
            for t in &outcome.tables {
                let slope = t.fitted.map_or("-".to_string(), |f| format!("{:.4}", f.slope));
                let base = t.baseline_fitted.map_or(String::new(), |f| format!(" baseline {:.4}", f.slope));
                let partial = if t.partial { " (partial)" } else { "" };
                println!("{}: slope {slope}{base}{partial}", t.scenario);
            }
            for c in &outcome.checks {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                println!("{tag} {}/{}: {}", c.scenario, c.check, c.detail);
            }
            Ok(if outcome.pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Simulate { function, kernel, eps, seed, grid, out } => {
            let spec: FunctionSpec = json_arg("function", &function)?;
            let kernel = json_arg::<KernelSpec>("kernel", &kernel)?.build()?;
            let grid = grid.as_deref().map(parse_grid).transpose()?.unwrap_or_else(Grid::observation_default);
            let f = ChangePointFunction::new(spec, grid)?;
            let path = simulate_path(&f, &kernel, eps, &grid, seed)?;
            save_path(&path, &out)?;
            eprintln!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate { path, kernel, class, rule, h, baseline, constant, eta } => {
            let obs = load_path(&path)?;
            let kernel = json_arg::<KernelSpec>("kernel", &kernel)?.build()?;
            let class: ClassSpec = json_arg("class", &class)?;
            let mut cfg = BandwidthConfig::new(rule.into());
            cfg.manual_h = h;
            if let Some(c) = constant {
                match cfg.rule {
                    Rule::RegularFm => cfg.c1s = c,
                    // C3s for F_m classes, C6s for A_nu.
                    Rule::Singular => (cfg.c3s, cfg.c6s) = (c, c),
                    Rule::RegularAnu | Rule::Manual => bail!("--rule {} takes no constant", rule_name(cfg.rule)),
                }
            }
            cfg.validate()?;
            let s = build_smoother(eta, default_table_grid())?;
            let report = estimate_changepoint(&obs, &kernel, &s, &cfg, &class, baseline)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Landmarks { eta } => {
            let s = build_smoother(eta, default_table_grid())?;
            let l = s.landmarks();
            let v = serde_json::json!({
                "eta": eta,
                "q_star": l.q_star,
                "q_zero": l.q_zero,
                "d": l.d,
                "r": l.r,
                "M": l.m,
            });
            println!("{}", serde_json::to_string_pretty(&v)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
