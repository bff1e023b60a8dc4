//! Probe functionals and their estimators.
//!
//! The second-derivative probe is
//! `ℓ_h(t) = h^{-3} ∫ f(x) φ″((x − t)/h) dx`, and the first-derivative
//! baseline is `w_h(t) = h^{-2} ∫ f(x) φ′((x − t)/h) dx`.
//!
//! Both are estimated from the path as `∫ γ_t dY` with
//! `γ_t(x) = G(x − t)` and
//!
//! ```text
//! Ĝ(ω) = P(ω) = (−2πiω)^k φ̂(ωh) / K̂(−ω),   k = 2 (probe) or 1 (baseline).
//! ```
//!
//! Summing over the increments gives `ℓ̃(t) = ∫ P(−ω) Ŷ(ω) e^{−2πiωt} dω`
//! with `Ŷ(ω) = Σ_i ΔY_i e^{2πiωx_i}`, so every `t` on the grid comes from
//! one inverse FFT. Points between nodes use phase-shifted inverses.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::Kernel;
use crate::observation::ObservationPath;
use crate::smoother::{phi_hat, ProbeWindow, Smoother};
use crate::spectral::{
    ensure_same_grid, inverse_ft, inverse_ft_complex, inverse_ft_offset, parse_pair, sum_transform,
    Grid, SampledSignal, SpectralSignal,
};
use crate::testbed::ChangePointFunction;

/// The evaluation grid is at least this many points per bandwidth.
pub const POINTS_PER_BANDWIDTH: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Estimated,
    Exact,
    BaselineEstimated,
    BaselineExact,
}

impl ProbeKind {
    pub fn is_baseline(self) -> bool {
        matches!(self, ProbeKind::BaselineEstimated | ProbeKind::BaselineExact)
    }
}

/// Which derivative of `φ` the functional uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    /// `w_h`, built on `φ′`.
    First,
    /// `ℓ_h`, built on `φ″`.
    Second,
}

impl Order {
    fn k(self) -> i32 {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeCurve {
    pub h: f64,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: ProbeKind,
    pub eps: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct CurveSidecar {
    h: f64,
    kind: ProbeKind,
    eps: Option<f64>,
    seed: Option<u64>,
}

impl ProbeCurve {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn id(&self) -> String {
        let kind = serde_json::to_value(self.kind).expect("kind serializes");
        format!(
            "{}:h={}:eps={}:seed={}",
            kind.as_str().unwrap_or("?"),
            self.h,
            self.eps.map_or("-".into(), |e| e.to_string()),
            self.seed.map_or("-".into(), |s| s.to_string())
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.t.len() * 48);
        out.push_str("t,value\n");
        for (t, v) in self.t.iter().zip(&self.values) {
            let _ = writeln!(out, "{t:.16e},{v:.16e}");
        }
        out
    }

    /// Writes `t,value` rows and a `<path>.json` sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv())?;
        let side = CurveSidecar {
            h: self.h,
            kind: self.kind,
            eps: self.eps,
            seed: self.seed,
        };
        std::fs::write(
            crate::observation::sidecar_path(path),
            serde_json::to_string_pretty(&side)?,
        )?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let fail = |detail: String| Error::Format {
            path: path.to_path_buf(),
            detail,
        };
        let side: CurveSidecar =
            serde_json::from_str(&std::fs::read_to_string(crate::observation::sidecar_path(path))?)?;
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        if lines.next() != Some("t,value") {
            return Err(fail("expected header `t,value`".into()));
        }
        let (mut t, mut values) = (Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let (a, b) = parse_pair(line).ok_or_else(|| fail(format!("bad row {}", i + 2)))?;
            t.push(a);
            values.push(b);
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(fail("t column is not strictly increasing".into()));
        }
        Ok(Self {
            h: side.h,
            t,
            values,
            kind: side.kind,
            eps: side.eps,
            seed: side.seed,
        })
    }
}

/// The deconvolving operator for one `(kernel, φ, h, grid, order)`.
#[derive(Clone, Debug)]
pub struct ProbeOperator {
    grid: Grid,
    h: f64,
    order: Order,
    /// `P(ω_j)` in FFT order.
    profile_hat: Vec<Complex64>,
    /// `(∫|P|²)^{1/2}`, the noise scale per unit `ε`.
    unit_sigma: f64,
}

fn check_nyquist(h: f64, grid: &Grid) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("bandwidth must be positive, got {h}")));
    }
    let band_edge = 2.0 / (3.0 * h);
    if band_edge >= grid.nyquist() {
        return Err(Error::Nyquist {
            h,
            band_edge,
            nyquist: grid.nyquist(),
        });
    }
    Ok(())
}

impl ProbeOperator {
    pub fn new(kernel: &Kernel, eta: f64, h: f64, grid: &Grid, order: Order) -> Result<Self> {
        check_nyquist(h, grid)?;
        let k = order.k();
        let profile_hat: Vec<Complex64> = (0..grid.len())
            .map(|j| {
                let w = grid.freq(j);
                let ph = phi_hat(eta, w * h);
                if ph == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, -2.0 * std::f64::consts::PI * w).powi(k) * ph
                        / kernel.khat(-w)
                }
            })
            .collect();
        let unit_sigma =
            (profile_hat.iter().map(|p| p.norm_sqr()).sum::<f64>() * grid.freq_spacing()).sqrt();
        Ok(Self {
            grid: *grid,
            h,
            order,
            profile_hat,
            unit_sigma,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn order(&self) -> Order {
        self.order
    }

    /// The profile `G` with `γ_t(x) = G(x − t)`.
    pub fn profile(&self) -> SampledSignal {
        inverse_ft(&self.profile_spectrum())
    }

    pub fn profile_complex(&self) -> Vec<Complex64> {
        inverse_ft_complex(&self.profile_spectrum())
    }

    fn profile_spectrum(&self) -> SpectralSignal {
        SpectralSignal::new(self.grid, self.profile_hat.clone()).expect("sized to grid")
    }

    /// Standard deviation of `ℓ̃_h(t) − ℓ_h(t)` for noise level `eps`; the
    /// same for every `t`.
    pub fn sigma_z(&self, eps: f64) -> f64 {
        eps * self.unit_sigma
    }

    /// Sub-cell offsets needed for a `t` spacing of at most `h/50`.
    pub fn subdivisions(&self) -> usize {
        ((POINTS_PER_BANDWIDTH * self.grid.spacing() / self.h).ceil() as usize).max(1)
    }

    /// `(t_j, Σ_i G(x_i − t_j) v_i)` for every `t_j` of the fine grid that
    /// falls in `[lo, hi]`.
    pub fn apply_increments(&self, increments: &[f64], lo: f64, hi: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if increments.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} increments for a grid of {} nodes",
                increments.len(),
                self.grid.len()
            )));
        }
        let lo = lo.max(self.grid.x_min());
        let hi = hi.min(self.grid.x(self.grid.len() - 1));
        if !(lo <= hi) {
            return Err(invalid(format!("empty evaluation span [{lo}, {hi}]")));
        }
        let y_hat = sum_transform(&self.grid, increments);
        let product: Vec<Complex64> = y_hat
            .iter()
            .zip(&self.profile_hat)
            .map(|(y, p)| y * p.conj())
            .collect();
        let spec = SpectralSignal::new(self.grid, product)?;

        let u = self.subdivisions();
        let dx = self.grid.spacing();
        let rows: Vec<Vec<f64>> = (0..u)
            .map(|i| {
                inverse_ft_offset(&spec, i as f64 * dx / u as f64)
                    .into_iter()
                    .map(|z| z.re)
                    .collect()
            })
            .collect();
        let k_lo = self.grid.floor_index(lo);
        let k_hi = self.grid.floor_index(hi);
        let mut t = Vec::with_capacity((k_hi - k_lo + 1) * u);
        let mut values = Vec::with_capacity(t.capacity());
        for k in k_lo..=k_hi {
            for (i, row) in rows.iter().enumerate() {
                let tk = self.grid.x(k) + i as f64 * dx / u as f64;
                if tk >= lo && tk <= hi {
                    t.push(tk);
                    values.push(row[k]);
                }
            }
        }
        Ok((t, values))
    }

    /// The estimated curve on `[lo, hi]`.
    pub fn apply(&self, path: &ObservationPath, lo: f64, hi: f64) -> Result<ProbeCurve> {
        ensure_same_grid(path.grid(), &self.grid, "path vs operator grid")?;
        let (t, values) = self.apply_increments(path.increments(), lo, hi)?;
        Ok(ProbeCurve {
            h: self.h,
            t,
            values,
            kind: match self.order {
                Order::Second => ProbeKind::Estimated,
                Order::First => ProbeKind::BaselineEstimated,
            },
            eps: Some(path.eps()),
            seed: Some(path.seed()),
        })
    }
}

/// `Γ_h = G`, the second-derivative profile (`γ_t(x) = G(x − t)`).
pub fn gamma_profile(kernel: &Kernel, s: &Smoother, h: f64, grid: &Grid) -> Result<SampledSignal> {
    Ok(ProbeOperator::new(kernel, s.eta(), h, grid, Order::Second)?.profile())
}

/// `ℓ̃_h` over `[lo, hi]`.
pub fn probe_estimate(
    path: &ObservationPath,
    kernel: &Kernel,
    s: &Smoother,
    h: f64,
    lo: f64,
    hi: f64,
) -> Result<ProbeCurve> {
    ProbeOperator::new(kernel, s.eta(), h, path.grid(), Order::Second)?.apply(path, lo, hi)
}

/// `w̃_h` over `[lo, hi]`.
pub fn baseline_estimate(
    path: &ObservationPath,
    kernel: &Kernel,
    s: &Smoother,
    h: f64,
    lo: f64,
    hi: f64,
) -> Result<ProbeCurve> {
    ProbeOperator::new(kernel, s.eta(), h, path.grid(), Order::First)?.apply(path, lo, hi)
}

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// End weights of the extended rule that is exact to `O(Δ⁴)`.
const END_WEIGHTS: [f64; 4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];

fn end_weight(i: usize, n: usize) -> f64 {
    let from_end = i.min(n - 1 - i);
    if from_end < 4 {
        END_WEIGHTS[from_end]
    } else {
        1.0
    }
}

/// `∫ F(x) dx` for `F = f · kernel`, with `f` possibly discontinuous at
/// `split`. Grid nodes on each side use an `O(Δ⁴)` extended rule; the two
/// partial cells next to the split use five-point Gauss-Legendre with `f`
/// evaluated off the grid.
fn split_quadrature(
    grid: &Grid,
    f: &dyn Fn(f64) -> f64,
    split: Option<f64>,
    kernel: &dyn Fn(f64) -> f64,
) -> f64 {
    let n = grid.len();
    let dx = grid.spacing();
    let piece = |a: usize, b: usize| -> f64 {
        // Nodes a..=b inclusive.
        let m = b + 1 - a;
        if m < 8 {
            return (a..=b).map(|k| dx * f(grid.x(k)) * kernel(grid.x(k))).sum::<f64>()
                - 0.5 * dx * (f(grid.x(a)) * kernel(grid.x(a)) + f(grid.x(b)) * kernel(grid.x(b)));
        }
        (a..=b)
            .map(|k| end_weight(k - a, m) * dx * f(grid.x(k)) * kernel(grid.x(k)))
            .sum()
    };
    let gauss = |a: f64, b: f64| -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        GL5.iter()
            .map(|(x, w)| {
                let y = mid + half * x;
                w * half * f(y) * kernel(y)
            })
            .sum()
    };
    match split {
        None => piece(0, n - 1),
        Some(theta) => {
            let first_right = (0..n).find(|&k| grid.x(k) > theta).unwrap_or(n);
            let last_left = (0..first_right).rev().find(|&k| grid.x(k) < theta);
            let mut total = 0.0;
            if let Some(jl) = last_left {
                total += piece(0, jl) + gauss(grid.x(jl), theta);
            }
            if first_right < n {
                total += gauss(theta, grid.x(first_right)) + piece(first_right, n - 1);
            }
            total
        }
    }
}

/// `h^{-(k+1)} ∫ f(x) φ^{(k)}((x − t)/h) dx` by quadrature on `grid`.
///
/// `split` marks a discontinuity of `f`; the quadrature never samples `f`
/// exactly there.
pub fn smoothed_derivative<W: ProbeWindow + ?Sized>(
    grid: &Grid,
    f: &dyn Fn(f64) -> f64,
    split: Option<f64>,
    window: &W,
    order: Order,
    h: f64,
    t: f64,
) -> f64 {
    let inv_h = 1.0 / h;
    let kernel = |x: f64| {
        let u = (x - t) * inv_h;
        match order {
            Order::First => window.d1(u),
            Order::Second => window.d2(u),
        }
    };
    let scale = inv_h.powi(order.k() + 1);
    scale * split_quadrature(grid, f, split, &kernel)
}

/// `ℓ_h(t) = ⟨f, ψ_t⟩` by direct quadrature on the function's grid.
pub fn probe_exact<W: ProbeWindow + ?Sized>(f: &ChangePointFunction, window: &W, h: f64, t: f64) -> f64 {
    smoothed_derivative(f.grid(), &|x| f.eval(x), Some(f.theta()), window, Order::Second, h, t)
}

/// `w_h(t)` by direct quadrature.
pub fn baseline_exact<W: ProbeWindow + ?Sized>(f: &ChangePointFunction, window: &W, h: f64, t: f64) -> f64 {
    smoothed_derivative(f.grid(), &|x| f.eval(x), Some(f.theta()), window, Order::First, h, t)
}

/// Exact curve (probe or baseline) on the given `t` values.
pub fn exact_curve<W: ProbeWindow + Sync + ?Sized>(
    f: &ChangePointFunction,
    window: &W,
    h: f64,
    t: &[f64],
    order: Order,
) -> ProbeCurve {
    use rayon::prelude::*;
    let values = t
        .par_iter()
        .map(|&ti| match order {
            Order::Second => probe_exact(f, window, h, ti),
            Order::First => baseline_exact(f, window, h, ti),
        })
        .collect();
    ProbeCurve {
        h,
        t: t.to_vec(),
        values,
        kind: match order {
            Order::Second => ProbeKind::Exact,
            Order::First => ProbeKind::BaselineExact,
        },
        eps: None,
        seed: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub inf_gap: f64,
    /// Where the infimum was attained.
    pub t_at_inf: f64,
}

/// Points per side of `θ` in the separation scan.
const SEPARATION_SCAN: usize = 400;

/// `inf_{δ < |t − θ| < q̄h} |ℓ_h(t)| − |ℓ_h(θ)|`.
pub fn separation_profile(f: &ChangePointFunction, s: &Smoother, h: f64, delta: f64) -> Result<Separation> {
    let q_bar = s.landmarks().q_bar();
    if !(delta > 0.0 && delta < q_bar * h) {
        return Err(invalid(format!(
            "delta must lie in (0, q_bar h) = (0, {}), got {delta}",
            q_bar * h
        )));
    }
    let at_theta = probe_exact(f, s, h, f.theta()).abs();
    let mut best = Separation {
        inf_gap: f64::INFINITY,
        t_at_inf: f64::NAN,
    };
    let span = q_bar * h - delta;
    for side in [-1.0, 1.0] {
        for i in 0..=SEPARATION_SCAN {
            let t = f.theta() + side * (delta + span * i as f64 / SEPARATION_SCAN as f64);
            let gap = probe_exact(f, s, h, t).abs() - at_theta;
            if gap < best.inf_gap {
                best = Separation {
                    inf_gap: gap,
                    t_at_inf: t,
                };
            }
        }
    }
    Ok(best)
}
