//! Uniform grids, sampled signals and the Fourier transform.
//!
//! The transform convention is fixed here and nowhere else:
//!
//! ```text
//! ĝ(ω) = ∫ g(x) e^{+2πiωx} dx,        g(x) = ∫ ĝ(ω) e^{-2πiωx} dω
//! ```
//!
//! with ω in cycles per unit length. Under this convention d/dx acts as
//! multiplication by `-2πiω`. The discrete transforms include the `Δ` / `Δω`
//! scale factors and the phase correction for a grid that does not start at
//! zero, so callers see samples of the continuous transform directly.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default observation window: `[0, 1]` padded by more than three units on
/// each side.
pub const DEFAULT_X_MIN: f64 = -4.0;
pub const DEFAULT_X_MAX: f64 = 5.0;
pub const DEFAULT_N: usize = 1 << 14;

/// A uniform grid `x_k = x_min + kΔ`, `k = 0..n`, with `Δ = (x_max - x_min)/n`.
///
/// The grid is periodic for transform purposes: `x_max` itself is not a node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "bounds must be finite, got ({x_min}, {x_max})"
            )));
        }
        if x_min >= x_max {
            return Err(Error::InvalidGrid(format!(
                "reversed bounds ({x_min}, {x_max})"
            )));
        }
        if !(x_min < 0.0 && x_max > 1.0) {
            return Err(Error::InvalidGrid(format!(
                "[0, 1] must lie strictly inside ({x_min}, {x_max})"
            )));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n must be a power of two >= 16, got {n}"
            )));
        }
        Ok(Self { x_min, x_max, n })
    }

    /// The `(-4, 5, 2^14)` observation grid used throughout the experiments.
    pub fn observation_default() -> Self {
        Self::new(DEFAULT_X_MIN, DEFAULT_X_MAX, DEFAULT_N).expect("default grid is valid")
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.spacing()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.x(k)).collect()
    }

    /// Spacing of the dual frequency axis, `1/(x_max - x_min)`.
    pub fn freq_spacing(&self) -> f64 {
        1.0 / (self.x_max - self.x_min)
    }

    /// Signed frequency index of FFT bin `j` (the Nyquist bin is negative).
    pub fn freq_index(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    pub fn freq(&self, j: usize) -> f64 {
        self.freq_index(j) as f64 * self.freq_spacing()
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.freq(j)).collect()
    }

    pub fn nyquist(&self) -> f64 {
        0.5 / self.spacing()
    }

    /// Index of the last node `<= x`, clamped to the grid.
    pub fn floor_index(&self, x: f64) -> usize {
        let k = ((x - self.x_min) / self.spacing()).floor();
        k.clamp(0.0, (self.n - 1) as f64) as usize
    }

    /// Unit-modulus phase `e^{sign·2πi·ω_j·x}` with the product reduced
    /// modulo one cycle before the trigonometric call.
    fn phase(&self, j: usize, x: f64, sign: f64) -> Complex64 {
        let cycles = (self.freq_index(j) as f64 * (x * self.freq_spacing())).rem_euclid(1.0);
        let (s, c) = (2.0 * PI * cycles).sin_cos();
        Complex64::new(c, sign * s)
    }
}

pub fn make_grid(x_min: f64, x_max: f64, n: usize) -> Result<Grid> {
    Grid::new(x_min, x_max, n)
}

/// A real function sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSignal {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledSignal {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite sample at index {k}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.xs().into_iter().map(f).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Discrete `L2` norm, `(Σ |g_k|² Δ)^{1/2}`.
    pub fn norm_l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.spacing()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Two-column CSV with header `x,value`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 48);
        out.push_str("x,value\n");
        for (k, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{:.16e},{:.16e}", self.grid.x(k), v);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parses the CSV written by [`SampledSignal::to_csv`]. The grid is
    /// recovered from the first two abscissae and the row count.
    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let fail = |detail: String| Error::Format {
            path: path.to_path_buf(),
            detail,
        };
        let mut lines = text.lines();
        match lines.next() {
            Some("x,value") => {}
            other => return Err(fail(format!("expected header `x,value`, got {other:?}"))),
        }
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let (x, v) = parse_pair(line).ok_or_else(|| fail(format!("bad row {}: {line:?}", i + 2)))?;
            xs.push(x);
            values.push(v);
        }
        if xs.len() < 2 {
            return Err(fail("fewer than two rows".into()));
        }
        let dx = xs[1] - xs[0];
        let grid = Grid::new(xs[0], xs[0] + dx * xs.len() as f64, xs.len())
            .map_err(|e| fail(e.to_string()))?;
        SampledSignal::new(grid, values).map_err(|e| fail(e.to_string()))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&text, path)
    }
}

pub(crate) fn parse_pair(line: &str) -> Option<(f64, f64)> {
    let (a, b) = line.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

/// Samples of `ĝ(ω_j)` on the dual axis of a grid, stored in FFT order
/// (non-negative frequencies first).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSignal {
    grid: Grid,
    amplitudes: Vec<Complex64>,
}

impl SpectralSignal {
    pub fn new(grid: Grid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} amplitudes for a grid of {} nodes",
                amplitudes.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, amplitudes })
    }

    /// Samples an analytic transform on the grid's frequency axis.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = (0..grid.len()).map(|j| f(grid.freq(j))).collect();
        Self { grid, amplitudes }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn freq(&self, j: usize) -> f64 {
        self.grid.freq(j)
    }

    /// `(Σ |ĝ_j|² Δω)^{1/2}`; equals [`SampledSignal::norm_l2`] by Parseval.
    pub fn norm_l2(&self) -> f64 {
        (self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.freq_spacing())
            .sqrt()
    }

    /// Pointwise product with a transfer function evaluated at each `ω_j`.
    pub fn multiply(&self, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(j, a)| a * f(self.grid.freq(j)))
            .collect();
        Self {
            grid: self.grid,
            amplitudes,
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// `Σ_k z_k e^{+2πijk/n}` when `positive` is set, `Σ_k z_k e^{-2πijk/n}` otherwise.
pub(crate) fn plan(n: usize, positive: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if positive {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unscaled forward transform of real samples: `Σ_k v_k e^{2πiω_j x_k}`.
pub(crate) fn sum_transform(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(grid.len(), true).process(&mut buf);
    for (j, a) in buf.iter_mut().enumerate() {
        *a *= grid.phase(j, grid.x_min, 1.0);
    }
    buf
}

/// `ĝ(ω_j) ≈ Δ Σ_k g(x_k) e^{2πiω_j x_k}`.
pub fn forward_ft(s: &SampledSignal) -> SpectralSignal {
    let grid = s.grid;
    let dx = grid.spacing();
    let mut amplitudes = sum_transform(&grid, &s.values);
    for a in amplitudes.iter_mut() {
        *a *= dx;
    }
    SpectralSignal { grid, amplitudes }
}

/// Evaluates `Δω Σ_j ĝ_j e^{-2πiω_j (x_k + offset)}` for every node `k`.
///
/// A non-zero `offset` evaluates the trigonometric interpolant between nodes.
pub fn inverse_ft_offset(s: &SpectralSignal, offset: f64) -> Vec<Complex64> {
    let grid = s.grid;
    let origin = grid.x_min + offset;
    let mut buf: Vec<Complex64> = s
        .amplitudes
        .iter()
        .enumerate()
        .map(|(j, a)| a * grid.phase(j, origin, -1.0))
        .collect();
    plan(grid.len(), false).process(&mut buf);
    let dw = grid.freq_spacing();
    for v in buf.iter_mut() {
        *v *= dw;
    }
    buf
}

/// Complex inverse transform; the imaginary part is a diagnostic for
/// spectra that should be Hermitian.
pub fn inverse_ft_complex(s: &SpectralSignal) -> Vec<Complex64> {
    inverse_ft_offset(s, 0.0)
}

/// Real part of the inverse transform on the grid nodes.
pub fn inverse_ft(s: &SpectralSignal) -> SampledSignal {
    let values = inverse_ft_complex(s).into_iter().map(|z| z.re).collect();
    SampledSignal {
        grid: s.grid,
        values,
    }
}

/// Anything with a closed-form Fourier transform usable as a convolution
/// multiplier.
pub trait TransferFunction {
    fn transfer(&self, omega: f64) -> Complex64;
}

/// `(Kf)(x) = ∫ K(x - y) f(y) dy`, computed as the inverse transform of
/// `K̂(ω)·f̂(ω)` (circular on the grid).
pub fn convolve<K: TransferFunction + ?Sized>(f: &SampledSignal, kernel: &K) -> SampledSignal {
    inverse_ft(&forward_ft(f).multiply(|w| kernel.transfer(w)))
}

/// Convolution starting from an already-known spectrum of `f`.
pub fn convolve_spectrum<K: TransferFunction + ?Sized>(
    f_hat: &SpectralSignal,
    kernel: &K,
) -> SampledSignal {
    inverse_ft(&f_hat.multiply(|w| kernel.transfer(w)))
}

/// Checks that two signals live on the same grid.
pub fn ensure_same_grid(a: &Grid, b: &Grid, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!("{what}: {a:?} vs {b:?}")));
    }
    Ok(())
}
