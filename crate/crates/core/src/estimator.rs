//! Two-stage change-point estimator.
//!
//! Stage one takes the argmin `t̂_*` and argmax `t̂^*` of `ℓ̃_h` over
//! `[0, 1]`; the jump sits between them. Stage two returns the point of
//! `Â_h = [t̂_*, t̂^*]` (sorted) where `|ℓ̃_h|` is smallest.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::Kernel;
use crate::observation::ObservationPath;
use crate::probe::{Order, ProbeCurve, ProbeOperator};
use crate::smoother::Smoother;
use crate::spectral::Grid;
use crate::testbed::ClassSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `h = C₁* (ε/L)^{2/(2m+2β+1)}`, for `β > 1/2`.
    RegularFm,
    /// `h = C₃* (ε √ln(1/ε))^{2/(2β+1)}`, for `β ≤ 1/2`.
    Singular,
    /// `h = (ν/3) / {ln(L/ε) − (β + 1/2) ln(ln(L/ε)/ν)}`, for `β > 1/2`.
    RegularAnu,
    Manual,
}

fn default_c1s() -> f64 {
    0.5
}

fn default_c3s() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthConfig {
    pub rule: Rule,
    #[serde(rename = "C1s", default = "default_c1s")]
    pub c1s: f64,
    #[serde(rename = "C3s", default = "default_c3s")]
    pub c3s: f64,
    /// Used in place of `C₃*` when the class is `A_ν` and `β ≤ 1/2`.
    #[serde(rename = "C6s", default = "default_c3s")]
    pub c6s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manual_h: Option<f64>,
}

impl BandwidthConfig {
    pub fn new(rule: Rule) -> Self {
        Self {
            rule,
            c1s: default_c1s(),
            c3s: default_c3s(),
            c6s: default_c3s(),
            manual_h: None,
        }
    }

    pub fn manual(h: f64) -> Self {
        Self {
            manual_h: Some(h),
            ..Self::new(Rule::Manual)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, c) in [("C1s", self.c1s), ("C3s", self.c3s), ("C6s", self.c6s)] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {c}")));
            }
        }
        match (self.rule, self.manual_h) {
            (Rule::Manual, Some(h)) if h > 0.0 && h.is_finite() => Ok(()),
            (Rule::Manual, _) => Err(invalid("rule `manual` needs a positive manual_h")),
            _ => Ok(()),
        }
    }

    /// Checks that the rule's hypotheses on `β` and the class hold.
    pub fn check_compatible(&self, beta: f64, class: &ClassSpec) -> Result<()> {
        self.validate()?;
        match self.rule {
            Rule::RegularFm if beta <= 0.5 => Err(invalid(format!(
                "rule regular_fm needs beta > 1/2, kernel has beta = {beta}"
            ))),
            Rule::RegularAnu if beta <= 0.5 => Err(invalid(format!(
                "rule regular_anu needs beta > 1/2, kernel has beta = {beta}"
            ))),
            Rule::Singular if !(beta > 0.0 && beta <= 0.5) => Err(invalid(format!(
                "rule singular needs 0 < beta <= 1/2, kernel has beta = {beta}"
            ))),
            Rule::RegularFm if !matches!(class, ClassSpec::Fm { .. }) => {
                Err(invalid("rule regular_fm needs an Fm class"))
            }
            Rule::RegularAnu if !matches!(class, ClassSpec::Anu { .. }) => {
                Err(invalid("rule regular_anu needs an Anu class"))
            }
            _ => Ok(()),
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("eps must lie in (0, 1), got {eps}")))
    }
}

pub fn h_regular_fm(eps: f64, l: f64, m: f64, beta: f64, c1s: f64) -> Result<f64> {
    check_eps(eps)?;
    if !(l > 0.0 && m > 0.0 && beta > 0.5 && c1s > 0.0) {
        return Err(invalid("regular_fm needs L, m, C1s > 0 and beta > 1/2"));
    }
    Ok(c1s * (eps / l).powf(2.0 / (2.0 * m + 2.0 * beta + 1.0)))
}

pub fn h_singular(eps: f64, beta: f64, c: f64) -> Result<f64> {
    check_eps(eps)?;
    if !(beta > 0.0 && beta <= 0.5 && c > 0.0) {
        return Err(invalid("singular rule needs 0 < beta <= 1/2 and a positive constant"));
    }
    Ok(c * (eps * (1.0 / eps).ln().sqrt()).powf(2.0 / (2.0 * beta + 1.0)))
}

pub fn h_regular_anu(eps: f64, l: f64, nu: f64, beta: f64) -> Result<f64> {
    check_eps(eps)?;
    if !(l > 0.0 && nu > 0.0 && beta > 0.5) {
        return Err(invalid("regular_anu needs L, nu > 0 and beta > 1/2"));
    }
    let log_ratio = (l / eps).ln();
    let inner = log_ratio / nu;
    let denom = if inner > 0.0 {
        log_ratio - (beta + 0.5) * inner.ln()
    } else {
        f64::NAN
    };
    if !(denom > 0.0) {
        return Err(invalid(format!(
            "regular_anu denominator is not positive for L/eps = {}",
            l / eps
        )));
    }
    Ok(nu / 3.0 / denom)
}

/// Bandwidth for noise level `eps` under `cfg`.
pub fn bandwidth(eps: f64, beta: f64, class: &ClassSpec, cfg: &BandwidthConfig) -> Result<f64> {
    cfg.check_compatible(beta, class)?;
    match (cfg.rule, class) {
        (Rule::Manual, _) => Ok(cfg.manual_h.expect("validated")),
        (Rule::RegularFm, ClassSpec::Fm { m, l, .. }) => h_regular_fm(eps, *l, *m, beta, cfg.c1s),
        (Rule::RegularAnu, ClassSpec::Anu { nu, l, .. }) => h_regular_anu(eps, *l, *nu, beta),
        (Rule::Singular, ClassSpec::Anu { .. }) => h_singular(eps, beta, cfg.c6s),
        (Rule::Singular, _) => h_singular(eps, beta, cfg.c3s),
        _ => unreachable!("rejected by check_compatible"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub t_hat_star: f64,
    pub t_hat_upper_star: f64,
    #[serde(rename = "A_hat")]
    pub a_hat: [f64; 2],
}

impl Localization {
    pub fn width(&self) -> f64 {
        self.a_hat[1] - self.a_hat[0]
    }
}

/// Index of the extremum of `key` over indices in `range`, first one on ties.
fn arg_best(values: &[f64], range: std::ops::Range<usize>, key: impl Fn(f64) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in range {
        let k = key(values[i]);
        if best.is_none_or(|(_, b)| k < b) {
            best = Some((i, k));
        }
    }
    best.map(|(i, _)| i)
}

/// Quadratic through three points, in Newton form around the middle node.
struct Quadratic {
    t1: f64,
    y1: f64,
    b: f64,
    c: f64,
}

impl Quadratic {
    fn through(t: [f64; 3], y: [f64; 3]) -> Self {
        let d01 = (y[1] - y[0]) / (t[1] - t[0]);
        let d12 = (y[2] - y[1]) / (t[2] - t[1]);
        let c = (d12 - d01) / (t[2] - t[0]);
        // q(t) = y1 + b (t − t1) + c (t − t1)²
        let b = d01 + c * (t[1] - t[0]);
        Self { t1: t[1], y1: y[1], b, c }
    }

    fn at(&self, t: f64) -> f64 {
        let u = t - self.t1;
        self.y1 + u * (self.b + self.c * u)
    }

    fn vertex(&self) -> Option<f64> {
        (self.c != 0.0).then(|| self.t1 - self.b / (2.0 * self.c))
    }

    fn roots(&self) -> Vec<f64> {
        let (a, b, c) = (self.c, self.b, self.y1);
        if a == 0.0 {
            return if b != 0.0 { vec![self.t1 - c / b] } else { vec![] };
        }
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return vec![];
        }
        // Numerically stable pair.
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let mut r = vec![self.t1 + q / a];
        if q != 0.0 {
            r.push(self.t1 + c / q);
        }
        r
    }
}

/// Minimizes `key(q(t))` over `[lo, hi]` among `candidates` plus the ends;
/// the smallest `t` wins ties, and values within `tol` count as tied.
fn best_of(q: &Quadratic, lo: f64, hi: f64, candidates: &[f64], key: impl Fn(f64) -> f64, tol: f64) -> f64 {
    let mut pts: Vec<f64> = vec![lo, hi];
    pts.extend(candidates.iter().copied().filter(|t| *t > lo && *t < hi));
    pts.sort_by(f64::total_cmp);
    let mut best = (pts[0], key(q.at(pts[0])));
    for &t in &pts[1..] {
        let k = key(q.at(t));
        if k < best.1 - tol {
            best = (t, k);
        }
    }
    best.0
}

/// Refines the discrete extremum at `i` by the quadratic through its two
/// neighbours, kept inside the neighbouring cells and `[lo, hi]`.
fn refine_at(curve: &ProbeCurve, i: usize, lo: f64, hi: f64, key: impl Fn(f64) -> f64 + Copy, zeros: bool) -> f64 {
    let n = curve.t.len();
    if n < 3 || i == 0 || i + 1 == n {
        return curve.t[i];
    }
    let t = [curve.t[i - 1], curve.t[i], curve.t[i + 1]];
    let y = [curve.values[i - 1], curve.values[i], curve.values[i + 1]];
    let q = Quadratic::through(t, y);
    let (a, b) = (t[0].max(lo), t[2].min(hi));
    if a >= b {
        return curve.t[i];
    }
    let mut cand: Vec<f64> = q.vertex().into_iter().collect();
    if zeros {
        cand.extend(q.roots());
    }
    cand.push(t[1]);
    // Both roots of q sit at |q| ~ rounding; keep the choice scale-free.
    let tol = 1e-12 * y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let r = best_of(&q, a, b, &cand, key, tol);
    // Never worse than the node itself.
    if key(q.at(r)) <= key(y[1]) {
        r
    } else {
        t[1]
    }
}

fn index_range(t: &[f64], lo: f64, hi: f64) -> std::ops::Range<usize> {
    let a = t.partition_point(|&x| x < lo);
    let b = t.partition_point(|&x| x <= hi);
    a..b.max(a)
}

/// `t̂_*` and `t̂^*` over `t ∈ [0, 1]`, with `Â_h` the interval between them.
pub fn localize(curve: &ProbeCurve) -> Result<Localization> {
    let range = index_range(&curve.t, 0.0, 1.0);
    if range.is_empty() {
        return Err(invalid("curve has no points in [0, 1]"));
    }
    let v = &curve.values;
    let i_min = arg_best(v, range.clone(), |x| x).expect("non-empty");
    let i_max = arg_best(v, range, |x| -x).expect("non-empty");
    let t_min = refine_at(curve, i_min, 0.0, 1.0, |x| x, false);
    let t_max = refine_at(curve, i_max, 0.0, 1.0, |x| -x, false);
    Ok(Localization {
        t_hat_star: t_min,
        t_hat_upper_star: t_max,
        a_hat: [t_min.min(t_max), t_min.max(t_max)],
    })
}

/// Point of `a_hat` where `|ℓ̃_h|` is smallest.
///
/// The discrete argmin is refined on the quadratic interpolant `q` of the
/// curve through it and its neighbours: the result minimizes `|q|`, so a
/// sign change inside the cell is resolved to the interpolated zero.
pub fn refine(curve: &ProbeCurve, a_hat: [f64; 2]) -> Result<f64> {
    let (first, last) = match (curve.t.first(), curve.t.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(invalid("empty curve")),
    };
    if a_hat[0] > a_hat[1] || a_hat[1] < first || a_hat[0] > last {
        return Err(invalid(format!(
            "A_hat [{}, {}] lies outside the curve span [{first}, {last}]",
            a_hat[0], a_hat[1]
        )));
    }
    let (lo, hi) = (a_hat[0].max(first), a_hat[1].min(last));
    if lo == hi {
        return Ok(lo);
    }
    let range = index_range(&curve.t, lo, hi);
    let Some(i) = arg_best(&curve.values, range, f64::abs) else {
        // A_hat falls between two nodes; interpolate linearly.
        let j = curve.t.partition_point(|&x| x < lo);
        let (t0, t1) = (curve.t[j - 1], curve.t[j]);
        let lin = |t: f64| {
            let w = (t - t0) / (t1 - t0);
            (1.0 - w) * curve.values[j - 1] + w * curve.values[j]
        };
        return Ok(if lin(hi).abs() < lin(lo).abs() { hi } else { lo });
    };
    Ok(refine_at(curve, i, lo, hi, f64::abs, true))
}

/// Point of `[0, 1]` where `|w̃_h|` is largest.
pub fn baseline_argmax(curve: &ProbeCurve) -> Result<f64> {
    let range = index_range(&curve.t, 0.0, 1.0);
    let i = arg_best(&curve.values, range, |x| -x.abs())
        .ok_or_else(|| invalid("curve has no points in [0, 1]"))?;
    Ok(refine_at(curve, i, 0.0, 1.0, |x| -x.abs(), false))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub h: f64,
    pub t_hat_star: f64,
    pub t_hat_upper_star: f64,
    #[serde(rename = "A_hat")]
    pub a_hat: [f64; 2],
    pub theta_tilde: f64,
    pub probe_curve_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_theta: Option<f64>,
}

impl EstimateReport {
    pub fn localization(&self) -> Localization {
        Localization {
            t_hat_star: self.t_hat_star,
            t_hat_upper_star: self.t_hat_upper_star,
            a_hat: self.a_hat,
        }
    }
}

/// The estimator for one bandwidth, reusable across paths on a grid.
#[derive(Clone, Debug)]
pub struct Estimator {
    probe: ProbeOperator,
    baseline: Option<ProbeOperator>,
    span: (f64, f64),
}

impl Estimator {
    pub fn new(kernel: &Kernel, s: &Smoother, h: f64, grid: &Grid, with_baseline: bool) -> Result<Self> {
        let probe = ProbeOperator::new(kernel, s.eta(), h, grid, Order::Second)?;
        let baseline = if with_baseline {
            Some(ProbeOperator::new(kernel, s.eta(), h, grid, Order::First)?)
        } else {
            None
        };
        let reach = s.landmarks().q_bar() * h;
        Ok(Self {
            probe,
            baseline,
            span: (-reach, 1.0 + reach),
        })
    }

    pub fn h(&self) -> f64 {
        self.probe.h()
    }

    pub fn probe(&self) -> &ProbeOperator {
        &self.probe
    }

    /// The curve span `[−q̄h, 1 + q̄h]` before clipping to the grid.
    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    pub fn curve(&self, path: &ObservationPath) -> Result<ProbeCurve> {
        self.probe.apply(path, self.span.0, self.span.1)
    }

    pub fn run(&self, path: &ObservationPath) -> Result<EstimateReport> {
        let curve = self.curve(path)?;
        let loc = localize(&curve)?;
        let theta_tilde = refine(&curve, loc.a_hat)?;
        assert!(
            theta_tilde >= loc.a_hat[0] && theta_tilde <= loc.a_hat[1],
            "refine left A_hat"
        );
        let baseline_theta = match &self.baseline {
            Some(op) => Some(baseline_argmax(&op.apply(path, 0.0, 1.0)?)?),
            None => None,
        };
        Ok(EstimateReport {
            h: self.h(),
            t_hat_star: loc.t_hat_star,
            t_hat_upper_star: loc.t_hat_upper_star,
            a_hat: loc.a_hat,
            theta_tilde,
            probe_curve_id: format!("{}:{}:{}", curve.id(), path.kernel_id(), path.function_id()),
            baseline_theta,
        })
    }
}

/// Picks `h` by `cfg` and runs both stages on `path`.
pub fn estimate_changepoint(
    path: &ObservationPath,
    kernel: &Kernel,
    s: &Smoother,
    cfg: &BandwidthConfig,
    class: &ClassSpec,
    with_baseline: bool,
) -> Result<EstimateReport> {
    let h = match cfg.rule {
        Rule::Manual => {
            cfg.validate()?;
            cfg.manual_h.expect("validated")
        }
        _ if path.eps() == 0.0 => {
            return Err(Error::InvalidParameter("a noiseless path needs rule `manual`".into()))
        }
        _ => bandwidth(path.eps(), kernel.beta(), class, cfg)?,
    };
    Estimator::new(kernel, s, h, path.grid(), with_baseline)?.run(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::green_kernel;
    use crate::observation::PathSimulator;
    use crate::probe::ProbeKind;
    use crate::smoother::DEFAULT_ETA;
    use crate::testbed::make_jump_function;
    use std::sync::OnceLock;

    fn smoother() -> &'static Smoother {
        static S: OnceLock<Smoother> = OnceLock::new();
        S.get_or_init(|| Smoother::new(DEFAULT_ETA).unwrap())
    }

    fn curve(t: Vec<f64>, values: Vec<f64>) -> ProbeCurve {
        ProbeCurve {
            h: 0.05,
            t,
            values,
            kind: ProbeKind::Estimated,
            eps: None,
            seed: None,
        }
    }

    const FM: ClassSpec = ClassSpec::Fm { m: 1.0, l: 1.0, a: 1.0 };

    #[test]
    fn bandwidth_examples() {
        let beta1 = 1.0;
        let h = bandwidth(1e-3, beta1, &FM, &BandwidthConfig { c1s: 1.0, ..BandwidthConfig::new(Rule::RegularFm) }).unwrap();
        assert!((h - 1e-3f64.powf(0.4)).abs() < 1e-15 && (h - 0.0631).abs() < 1e-4);
        let h = h_singular(1e-3, 0.5, 1.0).unwrap();
        assert!((h - 2.628e-3).abs() < 1e-6, "{h}");
        let h = h_regular_anu(1e-4, 1.0, 1.0, 1.0).unwrap();
        let (lr, ll) = (10_000f64.ln(), 10_000f64.ln().ln());
        assert!((h - 1.0 / 3.0 / (lr - 1.5 * ll)).abs() < 1e-15);
        assert!((h - 0.05669).abs() < 1e-5, "{h}");
    }

    #[test]
    fn bandwidth_rule_mismatch() {
        let cfg = BandwidthConfig::new(Rule::RegularFm);
        assert!(bandwidth(0.01, 0.5, &FM, &cfg).is_err());
        assert!(bandwidth(0.01, 1.0, &FM, &BandwidthConfig::new(Rule::Singular)).is_err());
        assert!(bandwidth(0.01, 1.0, &FM, &BandwidthConfig::new(Rule::RegularAnu)).is_err());
        assert!(BandwidthConfig::new(Rule::Manual).validate().is_err());
        // ln(L/ε) ≤ 0 leaves no positive denominator.
        assert!(h_regular_anu(0.5, 0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn bandwidth_monotone() {
        let cfg = BandwidthConfig::new(Rule::RegularFm);
        let mut prev = 0.0;
        for eps in [0.001, 0.01, 0.1, 0.5] {
            let h = bandwidth(eps, 1.0, &FM, &cfg).unwrap();
            assert!(h > prev);
            prev = h;
        }
        let big_l = bandwidth(0.01, 1.0, &FM.with_l(10.0), &cfg).unwrap();
        assert!(big_l < bandwidth(0.01, 1.0, &FM, &cfg).unwrap());
    }

    #[test]
    fn config_json() {
        let cfg: BandwidthConfig = serde_json::from_str(r#"{"rule":"regular_fm","C1s":2.5}"#).unwrap();
        assert_eq!(cfg.c1s, 2.5);
        assert_eq!(cfg.c3s, 1.0);
        assert!(serde_json::from_str::<BandwidthConfig>(r#"{"rule":"regular_fm","C9s":1}"#).is_err());
    }

    fn synthetic(a: f64) -> (ProbeCurve, f64) {
        let s = smoother();
        let (theta, h) = (0.41, 0.05);
        let t: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
        let v = t.iter().map(|&t| -a * s.table_value(1, (theta - t) / h)).collect();
        (curve(t, v), h)
    }

    #[test]
    fn localize_synthetic() {
        let q = smoother().landmarks().q_star;
        for a in [1.0, -1.0] {
            let (c, h) = synthetic(a);
            let loc = localize(&c).unwrap();
            let (lo_expect, hi_expect) = if a > 0.0 { (0.41 + q * h, 0.41 - q * h) } else { (0.41 - q * h, 0.41 + q * h) };
            assert!((loc.t_hat_star - lo_expect).abs() < 1e-4, "{a}: {loc:?}");
            assert!((loc.t_hat_upper_star - hi_expect).abs() < 1e-4);
            assert!(loc.a_hat[0] < 0.41 && 0.41 < loc.a_hat[1]);
            let th = refine(&c, loc.a_hat).unwrap();
            assert!((th - 0.41).abs() < 1e-6, "{th}");
        }
    }

    #[test]
    fn ties_and_degenerate() {
        let t: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let c = curve(t, vec![2.0; 11]);
        let loc = localize(&c).unwrap();
        assert_eq!((loc.t_hat_star, loc.t_hat_upper_star), (0.0, 0.0));
        assert_eq!(refine(&c, [0.3, 0.3]).unwrap(), 0.3);
        assert!(refine(&c, [1.5, 2.0]).is_err());
    }

    #[test]
    fn refine_finds_sign_change() {
        let t: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let v = t.iter().map(|t| (t - 0.3337) * (2.0 - t)).collect();
        let th = refine(&curve(t, v), [0.2, 0.5]).unwrap();
        // The crossing is a root of the interpolating quadratic.
        assert!((th - 0.3337).abs() < 1e-9, "{th}");
    }

    #[test]
    fn noiseless_pipeline() {
        let grid = Grid::observation_default();
        let f = make_jump_function(0.41, 1.0, 0.5, &[], FM.with_l(5.0), grid).unwrap();
        let k = green_kernel(&[1.0]).unwrap();
        let path = PathSimulator::new(&f, &k, &grid).unwrap().simulate(0.0, 0).unwrap();
        let r = estimate_changepoint(&path, &k, smoother(), &BandwidthConfig::manual(0.05), &FM, true).unwrap();
        assert!((r.theta_tilde - 0.41).abs() < 0.05 / 50.0, "{r:?}");
        let w = r.t_hat_upper_star - r.t_hat_star;
        assert!(w.abs() > 0.75 * 0.05 && w.abs() < 1.5 * 0.05);
        assert!((r.baseline_theta.unwrap() - 0.41).abs() < 1e-3);
        // Noiseless input with a data-driven rule is refused.
        assert!(estimate_changepoint(&path, &k, smoother(), &BandwidthConfig::new(Rule::RegularFm), &FM, false).is_err());
    }

    #[test]
    fn deterministic_and_scale_equivariant() {
        let grid = Grid::observation_default();
        let f = make_jump_function(0.41, 20.0, 0.5, &[], ClassSpec::Fm { m: 1.0, l: 100.0, a: 1.0 }, grid).unwrap();
        let k = green_kernel(&[1.0]).unwrap();
        let sim = PathSimulator::new(&f, &k, &grid).unwrap();
        let est = Estimator::new(&k, smoother(), 0.08, &grid, false).unwrap();
        let path = sim.simulate(0.01, 5).unwrap();
        let a = est.run(&path).unwrap();
        assert_eq!(a, est.run(&sim.simulate(0.01, 5).unwrap()).unwrap());
        let scaled: Vec<f64> = path.increments().iter().map(|x| 4.0 * x).collect();
        let p4 = ObservationPath::new(grid, scaled, 0.04, 5, path.kernel_id(), path.function_id()).unwrap();
        let b = est.run(&p4).unwrap();
        assert_eq!(a.t_hat_star, b.t_hat_star);
        assert_eq!(a.t_hat_upper_star, b.t_hat_upper_star);
        assert!((a.theta_tilde - b.theta_tilde).abs() < 1e-12);
    }
}
