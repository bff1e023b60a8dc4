//! Convolution kernels with closed-form transforms.
//!
//! Two families are supported:
//!
//! * `green(b_1..b_k)`: `K = v_1 * ... * v_k` with
//!   `K̂(ω) = ∏ (1 − 2πiω/b_j)^{-1}` and ill-posedness index `β = k`.
//!   The time-domain factor with that transform is
//!   `v_j(x) = |b_j| e^{-b_j x}` on the half-line where `b_j x > 0`.
//! * `gamma(β)`: the gamma density with shape `β ∈ (0, 1/2]`,
//!   `K̂(ω) = (1 − 2πiω)^{-β}` on the principal branch.
//!
//! Both are probability densities, so `K̂(0) = 1`, and neither transform
//! vanishes on the real line.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{forward_ft, inverse_ft, SampledSignal, TransferFunction};

/// Band used for the audit stored on every kernel.
pub const DEFAULT_AUDIT_OMEGA_MAX: f64 = 1.0e3;
pub const DEFAULT_AUDIT_SAMPLES: usize = 400;

/// Largest tolerated log-log slope of `|K̂|(1+ω²)^{β/2}` in the far tail.
const TAIL_SLOPE_LIMIT: f64 = 0.1;

/// Serialized kernel description, e.g. `{"family":"green","b":[1.0,-1.0]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelSpec {
    Green { b: Vec<f64> },
    Gamma { beta: f64 },
}

impl KernelSpec {
    pub fn build(&self) -> Result<Kernel> {
        match self {
            KernelSpec::Green { b } => green_kernel(b),
            KernelSpec::Gamma { beta } => gamma_kernel(*beta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaBounds {
    pub kappa_low: f64,
    pub kappa_high: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    spec: KernelSpec,
    beta: f64,
    kappa: KappaBounds,
}

pub fn green_kernel(b: &[f64]) -> Result<Kernel> {
    if b.is_empty() {
        return Err(invalid("green kernel needs at least one rate"));
    }
    if let Some(bad) = b.iter().find(|v| **v == 0.0 || !v.is_finite()) {
        return Err(invalid(format!("green kernel rate must be finite and non-zero, got {bad}")));
    }
    Kernel::audited(KernelSpec::Green { b: b.to_vec() }, b.len() as f64)
}

pub fn gamma_kernel(beta: f64) -> Result<Kernel> {
    if !(beta > 0.0 && beta <= 0.5) {
        return Err(invalid(format!("gamma kernel shape must lie in (0, 1/2], got {beta}")));
    }
    Kernel::audited(KernelSpec::Gamma { beta }, beta)
}

impl Kernel {
    fn audited(spec: KernelSpec, beta: f64) -> Result<Self> {
        let mut k = Self {
            spec,
            beta,
            kappa: KappaBounds {
                kappa_low: f64::NAN,
                kappa_high: f64::NAN,
            },
        };
        k.kappa = audit_sandwich(&k, beta, DEFAULT_AUDIT_OMEGA_MAX, DEFAULT_AUDIT_SAMPLES)?;
        Ok(k)
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// Ill-posedness index.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Sandwich constants on the default audit band.
    pub fn kappa(&self) -> KappaBounds {
        self.kappa
    }

    pub fn id(&self) -> String {
        self.to_string()
    }

    pub fn khat(&self, omega: f64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        match &self.spec {
            KernelSpec::Green { b } => b.iter().fold(one, |acc, &bj| {
                acc / Complex64::new(1.0, -2.0 * PI * omega / bj)
            }),
            KernelSpec::Gamma { beta } => Complex64::new(1.0, -2.0 * PI * omega).powf(-beta),
        }
    }

    /// Time-domain density. Mixed repeated Green rates are not supported.
    pub fn k_time(&self, x: f64) -> Result<f64> {
        match &self.spec {
            KernelSpec::Green { b } => green_time(b, x),
            KernelSpec::Gamma { beta } => Ok(if x > 0.0 {
                x.powf(beta - 1.0) * (-x).exp() / statrs::function::gamma::gamma(*beta)
            } else {
                0.0
            }),
        }
    }

    /// Applies `1/K̂` spectrally, i.e. the differential operator that undoes
    /// the convolution.
    pub fn invert(&self, s: &SampledSignal) -> SampledSignal {
        inverse_ft(&forward_ft(s).multiply(|w| 1.0 / self.khat(w)))
    }
}

impl TransferFunction for Kernel {
    fn transfer(&self, omega: f64) -> Complex64 {
        self.khat(omega)
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.spec {
            KernelSpec::Green { b } => {
                let parts: Vec<String> = b.iter().map(|v| format!("{v}")).collect();
                write!(f, "green[{}]", parts.join(","))
            }
            KernelSpec::Gamma { beta } => write!(f, "gamma[{beta}]"),
        }
    }
}

/// One factor `|b| e^{-bx}` on `bx > 0`, half its edge value at zero.
fn half_line_exp(b: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.5 * b.abs()
    } else if b * x > 0.0 {
        b.abs() * (-b * x).exp()
    } else {
        0.0
    }
}

fn green_time(b: &[f64], x: f64) -> Result<f64> {
    let k = b.len();
    if b.iter().all(|&v| v == b[0]) {
        // Erlang form: k-fold self-convolution of one exponential.
        if k == 1 {
            return Ok(half_line_exp(b[0], x));
        }
        let rate = b[0];
        if rate * x <= 0.0 {
            return Ok(0.0);
        }
        let ln_fact: f64 = (1..k).map(|i| (i as f64).ln()).sum();
        let ln_val = k as f64 * rate.abs().ln() + (k - 1) as f64 * x.abs().ln() - rate * x - ln_fact;
        return Ok(ln_val.exp());
    }
    for (i, bi) in b.iter().enumerate() {
        if b[i + 1..].contains(bi) {
            return Err(Error::Unsupported(format!(
                "time-domain form for repeated rate {bi} mixed with distinct rates"
            )));
        }
    }
    // Partial fractions over distinct poles.
    Ok(b
        .iter()
        .enumerate()
        .map(|(j, &bj)| {
            let weight: f64 = b
                .iter()
                .enumerate()
                .filter(|(l, _)| *l != j)
                .map(|(_, &bl)| 1.0 / (1.0 - bj / bl))
                .product();
            weight * half_line_exp(bj, x)
        })
        .sum())
}

/// Tightest `κ, κ̄` with `κ(1+ω²)^{-β/2} ≤ |K̂(ω)| ≤ κ̄(1+ω²)^{-β/2}` on
/// `ω = 0` and a log-spaced sample of `(0, omega_max]`.
pub fn audit_assumption_k(kernel: &Kernel, omega_max: f64, n_samples: usize) -> Result<KappaBounds> {
    audit_sandwich(kernel, kernel.beta, omega_max, n_samples)
}

/// As [`audit_assumption_k`] with an explicit index `beta`.
///
/// Besides the extrema, the ratio's log-log slope is measured over two
/// decades beyond the kernel's own scale; a slope that does not flatten out
/// means `beta` is not the decay index of `K̂`.
pub fn audit_sandwich(
    kernel: &Kernel,
    beta: f64,
    omega_max: f64,
    n_samples: usize,
) -> Result<KappaBounds> {
    if !(omega_max > 0.0 && omega_max.is_finite()) {
        return Err(invalid(format!("omega_max must be positive, got {omega_max}")));
    }
    if n_samples < 2 {
        return Err(invalid("audit needs at least two samples"));
    }
    let ratio = |w: f64| kernel.khat(w).norm() * (1.0 + w * w).powf(beta / 2.0);
    let w_lo = (omega_max * 1e-6).min(1e-3);
    let step = (omega_max / w_lo).ln() / (n_samples - 1) as f64;
    let mut lo = ratio(0.0);
    let mut hi = lo;
    for i in 0..n_samples {
        let r = ratio(w_lo * (i as f64 * step).exp());
        lo = lo.min(r);
        hi = hi.max(r);
    }

    let scale = match &kernel.spec {
        KernelSpec::Green { b } => b.iter().fold(1.0f64, |m, v| m.max(v.abs())),
        KernelSpec::Gamma { .. } => 1.0,
    };
    let w_tail = omega_max.max(10.0 * scale);
    let slope = (ratio(100.0 * w_tail) / ratio(w_tail)).ln() / 100f64.ln();
    if slope.abs() > TAIL_SLOPE_LIMIT || !(lo > 0.0 && hi.is_finite()) {
        return Err(Error::SandwichViolated {
            beta,
            detail: format!(
                "ratio |K̂|(1+ω²)^(β/2) has tail log-log slope {slope:.3}, range [{lo:.3e}, {hi:.3e}]"
            ),
        });
    }
    Ok(KappaBounds {
        kappa_low: lo,
        kappa_high: hi,
    })
}
