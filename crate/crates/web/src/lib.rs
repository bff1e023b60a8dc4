//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every export returns a JSON string; errors come back as
//! `{"error": "..."}` so the page needs one code path.

use cpdeconv::estimator::{h_regular_anu, h_regular_fm, h_singular, Estimator};
use cpdeconv::kernels::KernelSpec;
use cpdeconv::observation::simulate_path;
use cpdeconv::smoother::build_smoother;
use cpdeconv::spectral::Grid;
use cpdeconv::testbed::{ChangePointFunction, ClassSpec, FunctionSpec};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Small table so the page stays responsive; landmarks agree with the
/// full-size table to well below display precision.
fn demo_table() -> Grid {
    Grid::new(-64.0, 64.0, 1 << 17).expect("valid grid")
}

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn smoother_json(eta: f64) -> Result<Value, String> {
    let s = build_smoother(eta, demo_table()).map_err(|e| e.to_string())?;
    let xs: Vec<f64> = (0..=400).map(|i| -4.0 + 8.0 * i as f64 / 400.0).collect();
    let col = |k: u32| xs.iter().map(|&x| s.table_value(k, x)).collect::<Vec<_>>();
    let l = s.landmarks();
    Ok(json!({
        "x": xs,
        "phi": col(0),
        "phi_prime": col(1),
        "phi_second": col(2),
        "landmarks": {"q_star": l.q_star, "q_zero": l.q_zero, "d": l.d, "r": l.r, "M": l.m, "q_bar": l.q_bar()},
    }))
}

/// `φ`, `φ′`, `φ″` on `[−4, 4]` and the landmarks for `eta`.
#[wasm_bindgen]
pub fn smoother_curves(eta: f64) -> String {
    respond(smoother_json(eta))
}

#[allow(clippy::too_many_arguments)]
fn estimate_json(kernel: &str, theta: f64, a: f64, eps: f64, h: f64, eta: f64, seed: u64) -> Result<Value, String> {
    let kernel = serde_json::from_str::<KernelSpec>(kernel)
        .map_err(|e| format!("kernel: {e}"))?
        .build()
        .map_err(|e| e.to_string())?;
    let grid = Grid::observation_default();
    let spec = FunctionSpec {
        theta,
        a,
        sigma: 0.5,
        // The demo skips the class check; any valid class will do.
        class: ClassSpec::Fm { m: 1.0, l: 1e9, a: 1.0 },
        bumps: Vec::new(),
    };
    let f = ChangePointFunction::unchecked(spec, grid).map_err(|e| e.to_string())?;
    let s = build_smoother(eta, demo_table()).map_err(|e| e.to_string())?;
    let path = simulate_path(&f, &kernel, eps, &grid, seed).map_err(|e| e.to_string())?;
    let est = Estimator::new(&kernel, &s, h, &grid, false).map_err(|e| e.to_string())?;
    let curve = est.curve(&path).map_err(|e| e.to_string())?;
    let report = est.run(&path).map_err(|e| e.to_string())?;
    // Thin the curve for plotting.
    let step = curve.len().div_ceil(600).max(1);
    let t: Vec<f64> = curve.t.iter().step_by(step).copied().collect();
    let v: Vec<f64> = curve.values.iter().step_by(step).copied().collect();
    Ok(json!({ "t": t, "value": v, "report": report, "theta": theta }))
}

/// Simulates one path for a Gaussian-template function and runs the
/// estimator at bandwidth `h`.
#[wasm_bindgen]
pub fn simulate_and_estimate(kernel: &str, theta: f64, a: f64, eps: f64, h: f64, eta: f64, seed: u32) -> String {
    respond(estimate_json(kernel, theta, a, eps, h, eta, u64::from(seed)))
}

fn bandwidth_json(beta: f64, m: f64, l: f64, nu: f64, c1s: f64) -> Result<Value, String> {
    let eps: Vec<f64> = (0..=40).map(|i| 10f64.powf(-1.0 - 4.0 * i as f64 / 40.0)).collect();
    let rule = |g: &dyn Fn(f64) -> cpdeconv::Result<f64>| -> Vec<Option<f64>> { eps.iter().map(|&e| g(e).ok()).collect() };
    Ok(json!({
        "eps": eps,
        "regular_fm": rule(&|e| h_regular_fm(e, l, m, beta, c1s)),
        "regular_anu": rule(&|e| h_regular_anu(e, l, nu, beta)),
        "singular": rule(&|e| h_singular(e, beta, 1.0)),
    }))
}

/// Bandwidth of each rule over `ε ∈ [1e−5, 1e−1]`; `null` where a rule
/// does not apply.
#[wasm_bindgen]
pub fn bandwidth_table(beta: f64, m: f64, l: f64, nu: f64, c1s: f64) -> String {
    respond(bandwidth_json(beta, m, l, nu, c1s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn smoother_has_landmarks() {
        let v = parse(smoother_curves(1.0 / 64.0));
        assert!((v["landmarks"]["q_star"].as_f64().unwrap() - 0.469_052_6).abs() < 1e-6);
        assert_eq!(v["x"].as_array().unwrap().len(), v["phi"].as_array().unwrap().len());
        assert!(parse(smoother_curves(0.5)).get("error").is_some());
    }

    #[test]
    fn estimate_finds_the_jump() {
        let v = parse(simulate_and_estimate(r#"{"family":"green","b":[1.0]}"#, 0.3, 100.0, 0.01, 0.06, 1.0 / 64.0, 1));
        let got = v["report"]["theta_tilde"].as_f64().unwrap_or_else(|| panic!("{v}"));
        assert!((got - 0.3).abs() < 0.01, "{v}");
        let bad = parse(simulate_and_estimate("{}", 0.3, 1.0, 0.1, 0.05, 1.0 / 64.0, 1));
        assert!(bad["error"].as_str().unwrap().starts_with("kernel"));
    }

    #[test]
    fn bandwidths_by_rule() {
        let v = parse(bandwidth_table(1.0, 1.0, 10.0, 1.0, 1.0));
        assert!(v["singular"].as_array().unwrap().iter().all(Value::is_null));
        let fm = v["regular_fm"].as_array().unwrap();
        assert!(fm[0].as_f64().unwrap() > fm[40].as_f64().unwrap());
    }
}
