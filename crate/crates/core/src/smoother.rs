//! The band-pass smoothing function `φ` and its landmarks.
//!
//! `φ̂` is an even plateau bump: zero outside `1/3 ≤ |ω| ≤ 2/3`, one on
//! `[1/3 + η, 2/3 − η]`, with `C∞` ramps of width `η` built from the step
//! `S(u) = g(u) / (g(u) + g(1 − u))`, `g(u) = e^{−1/u}`.
//!
//! Derivatives are taken spectrally. Point values come from a trapezoid rule
//! over the support of `φ̂`, which converges faster than any power because the
//! integrand vanishes to all orders at both ends. Whole curves come from one
//! inverse FFT on a wide grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{inverse_ft, Grid, SampledSignal, SpectralSignal};

pub const DEFAULT_ETA: f64 = 1.0 / 64.0;

/// Wide enough that `φ`, `φ′`, `φ″` are below `1e-10` at the edges, fine
/// enough (`Δ = 1/128`) for sixth-order interpolation to sit near round-off.
pub const TABLE_HALF_WIDTH: f64 = 4096.0;
pub const TABLE_N: usize = 1 << 20;

/// Trapezoid nodes per side for pointwise evaluation.
const QUAD_INTERVALS: usize = 4096;

/// Scan step used while bracketing landmarks.
const SCAN_STEP: f64 = 1e-3;

fn g(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// Smooth step from 0 (u ≤ 0) to 1 (u ≥ 1), symmetric about `u = 1/2`.
pub fn smooth_step(u: f64) -> f64 {
    let (a, b) = (g(u), g(1.0 - u));
    a / (a + b)
}

/// The plateau bump `φ̂(ω)` for transition width `eta`.
pub fn phi_hat(eta: f64, omega: f64) -> f64 {
    let w = omega.abs();
    let (lo, hi) = (1.0 / 3.0, 2.0 / 3.0);
    if w <= lo || w >= hi {
        0.0
    } else if w < lo + eta {
        smooth_step((w - lo) / eta)
    } else if w > hi - eta {
        smooth_step((hi - w) / eta)
    } else {
        1.0
    }
}

/// Shape constants of `φ′`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmarks {
    /// Global minimiser of `φ′`, in `[3/8, 3/4]`.
    pub q_star: f64,
    /// Zero of `φ′` in `[3/4, 3/2]`.
    pub q_zero: f64,
    pub d: f64,
    /// `inf_{|x − q_star| > d/2} φ′(x) − φ′(q_star)`.
    pub r: f64,
    /// `|φ″(0)|`.
    #[serde(rename = "M")]
    pub m: f64,
}

impl Landmarks {
    /// `q̄ = q_* + 3d/4`, the half-width of the window where `φ′` has no
    /// zero other than the origin.
    pub fn q_bar(&self) -> f64 {
        self.q_star + 0.75 * self.d
    }
}

/// Something that can play the role of `φ` in the probe functionals.
pub trait ProbeWindow {
    fn d1(&self, u: f64) -> f64;
    fn d2(&self, u: f64) -> f64;
}

#[derive(Clone, Debug)]
pub struct Smoother {
    eta: f64,
    nodes: Vec<(f64, f64)>,
    phi_hat: SpectralSignal,
    phi: SampledSignal,
    phi_prime: SampledSignal,
    phi_second: SampledSignal,
    landmarks: Landmarks,
}

/// The `(−4096, 4096, 2^20)` table grid.
pub fn default_table_grid() -> Grid {
    Grid::new(-TABLE_HALF_WIDTH, TABLE_HALF_WIDTH, TABLE_N).expect("valid table grid")
}

pub fn build_smoother(eta: f64, grid: Grid) -> Result<Smoother> {
    if !(eta > 0.0 && eta < 1.0 / 32.0) {
        return Err(invalid(format!("eta must lie in (0, 1/32), got {eta}")));
    }
    if grid.nyquist() <= 2.0 / 3.0 {
        return Err(invalid(format!(
            "grid Nyquist {} does not cover the band edge 2/3",
            grid.nyquist()
        )));
    }
    let spacing = grid.spacing();
    if grid.x_min() > -2.0 || grid.x_max() < 2.0 || spacing > 1e-2 {
        return Err(invalid(format!(
            "smoother grid must cover [-2, 2] with spacing <= 1e-2, got {grid:?}"
        )));
    }

    let dw = (1.0 / 3.0) / QUAD_INTERVALS as f64;
    let nodes = (1..QUAD_INTERVALS)
        .map(|i| {
            let w = 1.0 / 3.0 + i as f64 * dw;
            (w, phi_hat(eta, w) * dw)
        })
        .collect();

    let phi_hat_sig = SpectralSignal::from_fn(grid, |w| Complex64::new(phi_hat(eta, w), 0.0));
    let deriv = |k: i32| {
        inverse_ft(&phi_hat_sig.multiply(|w| Complex64::new(0.0, -2.0 * PI * w).powi(k)))
    };
    let mut s = Smoother {
        eta,
        nodes,
        phi: deriv(0),
        phi_prime: deriv(1),
        phi_second: deriv(2),
        phi_hat: phi_hat_sig,
        landmarks: Landmarks {
            q_star: f64::NAN,
            q_zero: f64::NAN,
            d: f64::NAN,
            r: f64::NAN,
            m: f64::NAN,
        },
    };
    s.landmarks = locate_landmarks(&s)?;
    Ok(s)
}

impl Smoother {
    /// Smoother on the default table grid.
    pub fn new(eta: f64) -> Result<Self> {
        build_smoother(eta, default_table_grid())
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }

    pub fn phi_hat_at(&self, omega: f64) -> f64 {
        phi_hat(self.eta, omega)
    }

    pub fn phi_hat(&self) -> &SpectralSignal {
        &self.phi_hat
    }

    pub fn phi(&self) -> &SampledSignal {
        &self.phi
    }

    pub fn phi_prime(&self) -> &SampledSignal {
        &self.phi_prime
    }

    pub fn phi_second(&self) -> &SampledSignal {
        &self.phi_second
    }

    pub fn landmarks(&self) -> &Landmarks {
        &self.landmarks
    }

    /// `φ^{(k)}(x)` by quadrature of `∫ φ̂(ω)(−2πiω)^k e^{−2πiωx} dω`.
    pub fn eval_derivative(&self, k: u32, x: f64) -> f64 {
        let rot = Complex64::new(0.0, -1.0).powi(k as i32);
        let (w0, dw) = (self.nodes[0].0, self.nodes[1].0 - self.nodes[0].0);
        // Phasor recurrence e^{−2πiω_i x} = e^{−2πiω_0 x} · (e^{−2πi dω x})^i.
        let mut e = Complex64::from_polar(1.0, -2.0 * PI * w0 * x);
        let step = Complex64::from_polar(1.0, -2.0 * PI * dw * x);
        let mut acc = 0.0;
        for (i, &(w, wt)) in self.nodes.iter().enumerate() {
            if i % 256 == 0 {
                e = Complex64::from_polar(1.0, -2.0 * PI * w * x);
            }
            acc += wt * (2.0 * PI * w).powi(k as i32) * (rot * e).re;
            e *= step;
        }
        2.0 * acc
    }

    /// Interpolated table value of `φ^{(k)}`, `k ≤ 2`.
    pub fn table_value(&self, k: u32, x: f64) -> f64 {
        let table = match k {
            0 => &self.phi,
            1 => &self.phi_prime,
            2 => &self.phi_second,
            _ => panic!("table holds derivatives up to order 2"),
        };
        lagrange6(table, x)
    }
}

impl ProbeWindow for Smoother {
    fn d1(&self, u: f64) -> f64 {
        self.table_value(1, u)
    }

    fn d2(&self, u: f64) -> f64 {
        self.table_value(2, u)
    }
}

/// Six-point Lagrange interpolation on a uniform table; zero off the table.
pub(crate) fn lagrange6(table: &SampledSignal, x: f64) -> f64 {
    let grid = table.grid();
    let v = table.values();
    let pos = (x - grid.x_min()) / grid.spacing();
    let base = pos.floor() as i64 - 2;
    if base < 0 || base + 5 >= v.len() as i64 {
        return 0.0;
    }
    let frac = pos - (base + 2) as f64;
    let nodes = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
    if frac == 0.0 {
        return v[base as usize + 2];
    }
    let mut acc = 0.0;
    for (i, &xi) in nodes.iter().enumerate() {
        let mut w = 1.0;
        for (j, &xj) in nodes.iter().enumerate() {
            if i != j {
                w *= (frac - xj) / (xi - xj);
            }
        }
        acc += w * v[base as usize + i];
    }
    acc
}

/// Finds `q_*`, `q_0`, `d`, `r` and `M` for a built smoother.
pub fn locate_landmarks(s: &Smoother) -> Result<Landmarks> {
    let dphi = |x: f64| s.eval_derivative(1, x);

    // q_*: grid argmin of φ′ on [3/8, 3/4], then the vertex of the parabola
    // through the argmin and its neighbours.
    let (lo, hi) = (0.375, 0.75);
    let n = ((hi - lo) / SCAN_STEP).round() as usize;
    let xs: Vec<f64> = (0..=n).map(|i| lo + i as f64 * SCAN_STEP).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| dphi(x)).collect();
    let imin = argmin(&vals);
    if imin == 0 || imin == n {
        return Err(Error::LandmarkNotFound { name: "q_star", lo, hi });
    }
    let (f0, f1, f2) = (vals[imin - 1], vals[imin], vals[imin + 1]);
    let q_star = xs[imin] + 0.5 * SCAN_STEP * (f0 - f2) / (f0 - 2.0 * f1 + f2);

    // q_0: first sign change of φ′ on [3/4, 3/2], bisected.
    let (lo0, hi0) = (0.75, 1.5);
    let n0 = ((hi0 - lo0) / SCAN_STEP).round() as usize;
    let mut bracket = None;
    let mut prev = dphi(lo0);
    for i in 1..=n0 {
        let x = lo0 + i as f64 * SCAN_STEP;
        let cur = dphi(x);
        if prev < 0.0 && cur >= 0.0 {
            bracket = Some((x - SCAN_STEP, x));
            break;
        }
        prev = cur;
    }
    let (mut a, mut b) = bracket.ok_or(Error::LandmarkNotFound {
        name: "q_zero",
        lo: lo0,
        hi: hi0,
    })?;
    while b - a > 1e-10 {
        let m = 0.5 * (a + b);
        if dphi(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let q_zero = 0.5 * (a + b);
    let d = q_zero - q_star;
    let r = separation_margin(s, q_star, d);
    if !(r > 0.0) {
        return Err(Error::LandmarkNotFound {
            name: "r",
            lo: q_star - d / 2.0,
            hi: q_star + d / 2.0,
        });
    }
    Ok(Landmarks {
        q_star,
        q_zero,
        d,
        r,
        m: s.eval_derivative(2, 0.0).abs(),
    })
}

/// `inf_{|x − q_*| > d/2} φ′(x) − φ′(q_*)`: the two window edges plus every
/// local minimum of the tabulated `φ′` outside the window, each polished by
/// golden-section search on the quadrature values.
fn separation_margin(s: &Smoother, q_star: f64, d: f64) -> f64 {
    let dphi = |x: f64| s.eval_derivative(1, x);
    let base = dphi(q_star);
    let (wl, wr) = (q_star - d / 2.0, q_star + d / 2.0);
    let mut best = dphi(wl).min(dphi(wr));

    let table = s.phi_prime();
    let grid = table.grid();
    let v = table.values();
    let reach = 64.0f64.min(grid.x_max() - 1.0);
    let (k0, k1) = (grid.floor_index(-reach) + 1, grid.floor_index(reach));
    let step = grid.spacing();
    let mut candidates: Vec<usize> = (k0..k1)
        .filter(|&k| v[k] <= v[k - 1] && v[k] <= v[k + 1])
        .filter(|&k| grid.x(k) + step < wl || grid.x(k) - step > wr)
        .collect();
    candidates.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    for k in candidates {
        // The table is accurate far below this slack, so later (higher)
        // minima cannot undercut the running best.
        if v[k] > best + 1e-6 {
            break;
        }
        let (mut a, mut b) = (grid.x(k) - step, grid.x(k) + step);
        for _ in 0..48 {
            let c = b - golden * (b - a);
            let e = a + golden * (b - a);
            if dphi(c) < dphi(e) {
                b = e;
            } else {
                a = c;
            }
        }
        let x = 0.5 * (a + b);
        if (x - q_star).abs() > d / 2.0 {
            best = best.min(dphi(x));
        }
    }
    best - base
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use std::sync::OnceLock;

    fn smoother() -> &'static Smoother {
        static S: OnceLock<Smoother> = OnceLock::new();
        S.get_or_init(|| Smoother::new(DEFAULT_ETA).unwrap())
    }

    #[test]
    fn step_and_bump_shape() {
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        for eta in [1e-3, DEFAULT_ETA, 1.0 / 40.0, 0.031] {
            assert_eq!(phi_hat(eta, 0.5), 1.0);
            assert_eq!(phi_hat(eta, -0.5), 1.0);
            assert_eq!(phi_hat(eta, 1.0 / 3.0 - 1e-9), 0.0);
            assert_eq!(phi_hat(eta, 2.0 / 3.0 + 1e-9), 0.0);
            assert_eq!(phi_hat(eta, 0.0), 0.0);
            for i in 0..=1000 {
                let w = i as f64 / 1000.0;
                let v = phi_hat(eta, w);
                assert!((0.0..=1.0).contains(&v));
                assert_eq!(v, phi_hat(eta, -w));
                if (1.0 / 3.0 + eta..=2.0 / 3.0 - eta).contains(&w) {
                    assert!((v - 1.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_eta() {
        let grid = make_grid(-64.0, 64.0, 1 << 14).unwrap();
        assert!(build_smoother(0.0, grid).is_err());
        assert!(build_smoother(1.0 / 32.0, grid).is_err());
        assert!(build_smoother(-0.01, grid).is_err());
    }

    #[test]
    fn parity_and_origin_values() {
        let s = smoother();
        // φ(0) = ∫ φ̂ = 2(1/3 − η) because each ramp contributes η/2.
        let phi0 = s.eval_derivative(0, 0.0);
        assert!((phi0 - 2.0 * (1.0 / 3.0 - DEFAULT_ETA)).abs() < 1e-12);
        assert!(s.eval_derivative(1, 0.0).abs() < 1e-14);
        let table = s.phi().values();
        let max = table.iter().cloned().fold(f64::MIN, f64::max);
        assert!((max - phi0).abs() < 1e-12);

        let grid = *s.grid();
        let mid = grid.floor_index(0.0);
        assert_eq!(grid.x(mid), 0.0);
        let dp = s.phi_prime().values();
        let peak = dp.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let odd = (1..grid.len() / 2)
            .map(|k| (dp[mid + k] + dp[mid - k]).abs())
            .fold(0.0, f64::max);
        assert!(odd < 1e-8 * peak, "{odd}");
        let p = s.phi().values();
        let even = (1..grid.len() / 2)
            .map(|k| (p[mid + k] - p[mid - k]).abs())
            .fold(0.0, f64::max);
        assert!(even < 1e-9);
    }

    #[test]
    fn table_agrees_with_quadrature() {
        let s = smoother();
        for k in 0..=2 {
            for x in [-3.7, -0.41, 0.0, 0.123, 0.5, 1.9, 17.3, 250.01] {
                let q = s.eval_derivative(k, x);
                let t = s.table_value(k, x);
                assert!((q - t).abs() < 1e-9, "k={k} x={x}: {q} vs {t}");
            }
        }
    }

    #[test]
    fn moments_and_tails() {
        let s = smoother();
        let grid = *s.grid();
        let dx = grid.spacing();
        let v = s.phi_second().values();
        let m0: f64 = v.iter().sum::<f64>() * dx;
        let m1: f64 = v.iter().zip(grid.xs()).map(|(a, x)| a * x).sum::<f64>() * dx;
        assert!(m0.abs() < 1e-6 && m1.abs() < 1e-6, "{m0} {m1}");
        for sig in [s.phi(), s.phi_prime(), s.phi_second()] {
            let vals = sig.values();
            let edge = vals[..8].iter().chain(&vals[vals.len() - 8..]).fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(edge < 1e-10, "{edge}");
        }
    }

    #[test]
    fn landmarks_default_eta() {
        let l = *smoother().landmarks();
        assert!((0.375..=0.75).contains(&l.q_star), "{l:?}");
        assert!((0.75..=1.5).contains(&l.q_zero), "{l:?}");
        assert!(l.d > 0.0 && l.r > 0.0 && l.m > 0.0);
        assert!((l.d - (l.q_zero - l.q_star)).abs() < 1e-15);
        let s = smoother();
        assert!(s.eval_derivative(1, l.q_zero).abs() < 1e-8);
        // φ′ < 0 on (0, q_0).
        for i in 1..1000 {
            let x = l.q_zero * i as f64 / 1000.0;
            assert!(s.eval_derivative(1, x) < 0.0, "x={x}");
        }
        // q_* is a stationary point of φ′.
        assert!(s.eval_derivative(2, l.q_star).abs() < 1e-5);
        assert!((l.m - s.eval_derivative(2, 0.0).abs()).abs() < 1e-15);
    }

    #[test]
    fn separation_margin_matches_dense_scan() {
        // Independent scan of (13) at spacing 1e-4 over [-8, 8].
        let s = smoother();
        let l = *s.landmarks();
        let base = s.eval_derivative(1, l.q_star);
        let mut best = f64::INFINITY;
        for i in 0..=160_000 {
            let x = -8.0 + i as f64 * 1e-4;
            if (x - l.q_star).abs() > l.d / 2.0 {
                best = best.min(s.table_value(1, x) - base);
            }
        }
        assert!((best - l.r).abs() < 1e-6, "scan {best} vs {}", l.r);
    }

    #[test]
    fn landmark_json_uses_capital_m() {
        let l = *smoother().landmarks();
        let v = serde_json::to_value(l).unwrap();
        assert!(v.get("M").is_some() && v.get("q_star").is_some());
        assert!((l.q_bar() - (l.q_star + 0.75 * l.d)).abs() < 1e-15);
    }
}
