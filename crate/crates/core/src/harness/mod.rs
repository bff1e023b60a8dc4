//! Monte Carlo risk, rate fits and sweeps driven by a JSON config.

mod config;
mod risk;
mod sweep;

pub use config::{parse_config, FitForm, Scenario, ScenarioChecks, SweepConfig, SCHEMA_VERSION};
pub use risk::{
    calibrate_constant, fit_rate_exponent, monte_carlo_risk, scenario_function, Calibration, RateFit, RiskRow,
    RiskTable,
};
pub use sweep::{risk_csv_path, run_config, run_sweep, CheckOutcome, SweepOutcome};
