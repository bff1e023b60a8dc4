use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::BandwidthConfig;
use crate::kernels::KernelSpec;
use crate::smoother::DEFAULT_ETA;
use crate::spectral::Grid;
use crate::testbed::FunctionSpec;

pub const SCHEMA_VERSION: u32 = 1;

/// What `log rmse` is regressed on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitForm {
    /// `log ε`.
    #[default]
    Power,
    /// `log(ε (ln(L/ε)/ν)^{β−1/2})`, for `A_ν` scenarios; the slope should
    /// read 1.
    Analytic,
}

/// Pass/fail thresholds checked after a scenario runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioChecks {
    /// The fitted slope must land in `[lo, hi]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<[f64; 2]>,
    /// The baseline rmse must exceed the primary one at this many of the
    /// smallest `ε`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_worse_at_smallest: Option<usize>,
    /// The primary slope must exceed the baseline slope by at least this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_slope_gap: Option<f64>,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub function: FunctionSpec,
    /// Scale the bumps of `function` until the class integral is near `L`.
    #[serde(default)]
    pub hard: bool,
    pub kernel: KernelSpec,
    pub rule: BandwidthConfig,
    pub eps_list: Vec<f64>,
    pub n_reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_true")]
    pub baseline: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default)]
    pub fit: FitForm,
    #[serde(default)]
    pub checks: ScenarioChecks,
}

impl Scenario {
    pub fn grid(&self) -> Grid {
        self.grid.unwrap_or_else(Grid::observation_default)
    }

    /// Everything that can be checked without running it.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err("name must be non-empty ASCII letters, digits, '_' or '-'".into());
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err("every eps must lie in (0, 1)".into());
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err("eps_list must be strictly decreasing".into());
        }
        if self.n_reps < 30 {
            return Err(format!("n_reps must be at least 30, got {}", self.n_reps));
        }
        if let Some(g) = &self.grid {
            Grid::new(g.x_min(), g.x_max(), g.len()).map_err(|e| e.to_string())?;
        }
        let kernel = self.kernel.build().map_err(|e| e.to_string())?;
        self.function.class.validate().map_err(|e| e.to_string())?;
        self.rule
            .check_compatible(kernel.beta(), &self.function.class)
            .map_err(|e| e.to_string())?;
        if self.fit == FitForm::Analytic && !matches!(self.function.class, crate::testbed::ClassSpec::Anu { .. }) {
            return Err("fit `analytic` needs an Anu class".into());
        }
        Ok(())
    }
}

fn default_eta() -> f64 {
    DEFAULT_ETA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema_version: u32,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
}

/// 1-based line of the first `"name": "<name>"` in `text`.
fn line_of_name(text: &str, name: &str) -> Option<usize> {
    let needle = format!("\"{name}\"");
    text.lines()
        .position(|l| l.contains("\"name\"") && l.contains(&needle))
        .map(|i| i + 1)
}

/// Parses and validates a sweep config. Syntax and schema errors carry
/// the line and column; semantic errors name the scenario and its line.
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| Error::ConfigParse {
        line: e.line(),
        column: e.column(),
        detail: e.to_string(),
    })?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(Error::Version {
            expected: SCHEMA_VERSION,
            found: cfg.schema_version,
        });
    }
    if !(cfg.eta > 0.0 && cfg.eta < 1.0 / 32.0) {
        return Err(Error::InvalidParameter(format!(
            "eta must lie in (0, 1/32), got {}",
            cfg.eta
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for sc in &cfg.scenarios {
        let fail = |detail: String| Error::Scenario {
            scenario: sc.name.clone(),
            detail: match line_of_name(text, &sc.name) {
                Some(line) => format!("line {line}: {detail}"),
                None => detail,
            },
        };
        sc.validate().map_err(fail)?;
        if !seen.insert(sc.name.as_str()) {
            return Err(fail("duplicate scenario name".into()));
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{
  "schema_version": 1,
  "scenarios": [
    {
      "name": "fm1",
      "function": {"a": 100.0, "class": {"kind": "Fm", "m": 1, "L": 200}},
      "kernel": {"family": "green", "b": [1.0]},
      "rule": {"rule": "regular_fm", "C1s": 5.0},
      "eps_list": [0.1, 0.05, 0.02, 0.01],
      "n_reps": 40
    }
  ]
}"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = parse_config(GOOD).unwrap();
        assert_eq!(cfg.eta, DEFAULT_ETA);
        let sc = &cfg.scenarios[0];
        assert!(sc.baseline && !sc.hard);
        assert_eq!(sc.fit, FitForm::Power);
        assert_eq!(sc.grid(), Grid::observation_default());
    }

    #[test]
    fn empty_is_fine() {
        assert!(parse_config(r#"{"schema_version": 1}"#).unwrap().scenarios.is_empty());
    }

    #[test]
    fn syntax_error_has_position() {
        let bad = GOOD.replace("\"n_reps\": 40", "\"n_reps\": 40,");
        match parse_config(&bad).unwrap_err() {
            Error::ConfigParse { line, .. } => assert_eq!(line, 11),
            e => panic!("{e}"),
        }
        let unknown = GOOD.replace("\"n_reps\"", "\"n_rep\"");
        assert!(matches!(parse_config(&unknown), Err(Error::ConfigParse { line: 10, .. })));
    }

    #[test]
    fn rule_mismatch_names_scenario() {
        let bad = GOOD.replace(r#""family": "green", "b": [1.0]"#, r#""family": "gamma", "beta": 0.5"#);
        match parse_config(&bad).unwrap_err() {
            Error::Scenario { scenario, detail } => {
                assert_eq!(scenario, "fm1");
                assert!(detail.starts_with("line 5:") && detail.contains("beta"), "{detail}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn ladder_and_reps() {
        let inc = GOOD.replace("0.1, 0.05", "0.05, 0.1");
        assert!(matches!(parse_config(&inc), Err(Error::Scenario { .. })));
        let few = GOOD.replace("\"n_reps\": 40", "\"n_reps\": 10");
        assert!(matches!(parse_config(&few), Err(Error::Scenario { .. })));
        let ver = GOOD.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(parse_config(&ver), Err(Error::Version { found: 2, .. })));
    }
}
