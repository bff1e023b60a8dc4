//! Test functions with one known jump.
//!
//! `f(x) = s(x) + a·T(x − θ)` with `T(x) = 1{x ≥ 0} − Φ(x/σ)` and `s` a sum
//! of Gaussian bumps. `T` jumps by exactly one at the origin while its
//! one-sided derivatives of every order agree there, so `g_f = f′` off the
//! jump extends continuously and both class integrals are available in
//! closed form through
//!
//! ```text
//! ĝ_f(ω) = (−2πiω) ŝ(ω) − a e^{2πiωθ} e^{−2π²σ²ω²}.
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{Grid, SampledSignal, SpectralSignal};

pub const DEFAULT_THETA: f64 = 0.41;
pub const DEFAULT_SIGMA: f64 = 0.5;

/// Largest frequency the class integrals will look at before declaring the
/// integrand non-decaying.
const OMEGA_CAP: f64 = 1.0e3;

/// Fraction of the budget a tuned "hard" function aims for.
const HARD_TARGET: f64 = 0.95;

fn default_a() -> f64 {
    1.0
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

/// Smoothness class: `F_m(a, L)` or `A_ν(a, L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ClassSpec {
    Fm {
        m: f64,
        #[serde(rename = "L")]
        l: f64,
        #[serde(default = "default_a")]
        a: f64,
    },
    Anu {
        nu: f64,
        #[serde(rename = "L")]
        l: f64,
        #[serde(default = "default_a")]
        a: f64,
    },
}

impl ClassSpec {
    pub fn validate(&self) -> Result<()> {
        let (a, l) = (self.a(), self.l());
        if !(a > 0.0 && l > 0.0 && a.is_finite() && l.is_finite()) {
            return Err(invalid(format!("class needs a > 0 and L > 0, got a={a}, L={l}")));
        }
        match *self {
            ClassSpec::Fm { m, .. } if !(m >= 1.0 && m.is_finite()) => {
                Err(invalid(format!("F_m needs m >= 1, got {m}")))
            }
            ClassSpec::Anu { nu, .. } if !(nu > 0.0 && nu.is_finite()) => {
                Err(invalid(format!("A_nu needs nu > 0, got {nu}")))
            }
            _ => Ok(()),
        }
    }

    pub fn a(&self) -> f64 {
        match *self {
            ClassSpec::Fm { a, .. } | ClassSpec::Anu { a, .. } => a,
        }
    }

    pub fn l(&self) -> f64 {
        match *self {
            ClassSpec::Fm { l, .. } | ClassSpec::Anu { l, .. } => l,
        }
    }

    pub fn with_l(self, new_l: f64) -> Self {
        match self {
            ClassSpec::Fm { m, a, .. } => ClassSpec::Fm { m, l: new_l, a },
            ClassSpec::Anu { nu, a, .. } => ClassSpec::Anu { nu, l: new_l, a },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: f64,
    pub amp: f64,
    pub width: f64,
}

impl Bump {
    fn value(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        self.amp * (-0.5 * z * z).exp()
    }

    fn derivative(&self, x: f64) -> f64 {
        -self.value(x) * (x - self.center) / (self.width * self.width)
    }

    fn spectrum(&self, omega: f64) -> Complex64 {
        let w = self.width;
        let mag = self.amp * w * (2.0 * PI).sqrt() * (-2.0 * PI * PI * w * w * omega * omega).exp();
        Complex64::from_polar(mag, 2.0 * PI * omega * self.center)
    }
}

/// Config form, e.g.
/// `{"theta":0.41,"a":1.0,"sigma":0.5,"class":{"kind":"Fm","m":1,"L":5.0},"bumps":[...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub class: ClassSpec,
    #[serde(default)]
    pub bumps: Vec<Bump>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub jump_ok: bool,
    /// Value of the class integral: `∫|ĝ_f||ω|^{m−1}` for `F_m`, the square
    /// root of `∫|ĝ_f|² e^{2ν|ω|}` for `A_ν` (so it compares against `L`).
    pub smooth_budget_used: f64,
    pub budget_limit: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct ChangePointFunction {
    spec: FunctionSpec,
    sampled: SampledSignal,
}

/// Gaussian CDF of `x/σ`.
fn gauss_cdf(x: f64, sigma: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / (sigma * std::f64::consts::SQRT_2))
}

fn gauss_pdf(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}

pub fn make_jump_function(
    theta: f64,
    a_jump: f64,
    sigma: f64,
    bumps: &[Bump],
    class: ClassSpec,
    grid: Grid,
) -> Result<ChangePointFunction> {
    ChangePointFunction::new(
        FunctionSpec {
            theta,
            a: a_jump,
            sigma,
            class,
            bumps: bumps.to_vec(),
        },
        grid,
    )
}

impl ChangePointFunction {
    /// Builds and checks class membership; fails if the budget is exceeded.
    pub fn new(spec: FunctionSpec, grid: Grid) -> Result<Self> {
        let f = Self::unchecked(spec, grid)?;
        let report = check_class_membership(&f, &f.spec.class)?;
        if !report.pass {
            return Err(Error::ClassMembership(format!(
                "class integral {:.6e} against L = {:.6e}, jump ok: {}",
                report.smooth_budget_used, report.budget_limit, report.jump_ok
            )));
        }
        Ok(f)
    }

    /// Builds without the class check (parameter validation still applies).
    pub fn unchecked(spec: FunctionSpec, grid: Grid) -> Result<Self> {
        spec.class.validate()?;
        if !(0.0..=1.0).contains(&spec.theta) {
            return Err(invalid(format!("theta must lie in [0, 1], got {}", spec.theta)));
        }
        if !(spec.sigma > 0.0 && spec.sigma.is_finite()) {
            return Err(invalid(format!("sigma must be positive, got {}", spec.sigma)));
        }
        if !spec.a.is_finite() || spec.a == 0.0 {
            return Err(invalid(format!("jump must be finite and non-zero, got {}", spec.a)));
        }
        for b in &spec.bumps {
            if !(b.width > 0.0 && b.amp.is_finite() && b.center.is_finite()) {
                return Err(invalid(format!("bad bump {b:?}")));
            }
        }
        let probe = Self {
            spec,
            sampled: SampledSignal::zeros(grid),
        };
        let sampled = SampledSignal::from_fn(grid, |x| probe.eval(x))?;
        let edge = sampled.values()[0].abs().max(sampled.values()[grid.len() - 1].abs());
        if edge >= 1e-10 {
            return Err(invalid(format!(
                "f is {edge:.3e} at the grid edge; widen the grid or narrow the bumps"
            )));
        }
        Ok(Self {
            spec: probe.spec,
            sampled,
        })
    }

    pub fn spec(&self) -> &FunctionSpec {
        &self.spec
    }

    pub fn theta(&self) -> f64 {
        self.spec.theta
    }

    pub fn a_jump(&self) -> f64 {
        self.spec.a
    }

    pub fn sigma(&self) -> f64 {
        self.spec.sigma
    }

    pub fn class(&self) -> &ClassSpec {
        &self.spec.class
    }

    pub fn grid(&self) -> &Grid {
        self.sampled.grid()
    }

    pub fn sampled(&self) -> &SampledSignal {
        &self.sampled
    }

    pub fn id(&self) -> String {
        serde_json::to_string(&self.spec).expect("spec serializes")
    }

    pub fn smooth_part(&self, x: f64) -> f64 {
        self.spec.bumps.iter().map(|b| b.value(x)).sum()
    }

    /// `f(x)`, with `f(θ) = (f(θ−) + f(θ+))/2`.
    pub fn eval(&self, x: f64) -> f64 {
        let u = x - self.spec.theta;
        // 1{u ≥ 0} − Φ(u/σ), written so the far tails do not cancel.
        let template = if u > 0.0 {
            gauss_cdf(-u, self.spec.sigma)
        } else if u < 0.0 {
            -gauss_cdf(u, self.spec.sigma)
        } else {
            0.0
        };
        self.smooth_part(x) + self.spec.a * template
    }

    pub fn left_limit(&self) -> f64 {
        self.smooth_part(self.spec.theta) - 0.5 * self.spec.a
    }

    pub fn right_limit(&self) -> f64 {
        self.smooth_part(self.spec.theta) + 0.5 * self.spec.a
    }

    /// `g_f(x) = s′(x) − a φ_σ(x − θ)`, continuous through `θ`.
    pub fn g_f(&self, x: f64) -> f64 {
        let ds: f64 = self.spec.bumps.iter().map(|b| b.derivative(x)).sum();
        ds - self.spec.a * gauss_pdf(x - self.spec.theta, self.spec.sigma)
    }

    /// Closed-form `f̂(ω)`.
    pub fn spectrum_at(&self, omega: f64) -> Complex64 {
        let s: Complex64 = self.spec.bumps.iter().map(|b| b.spectrum(omega)).sum();
        if omega == 0.0 {
            return s;
        }
        let sig = self.spec.sigma;
        let num = -(-2.0 * PI * PI * sig * sig * omega * omega).exp_m1();
        let t_hat = Complex64::from_polar(num / (2.0 * PI * omega), 2.0 * PI * omega * self.spec.theta)
            * Complex64::new(0.0, 1.0);
        s + self.spec.a * t_hat
    }

    /// Closed-form `ĝ_f(ω)`.
    pub fn g_spectrum_at(&self, omega: f64) -> Complex64 {
        let s: Complex64 = self.spec.bumps.iter().map(|b| b.spectrum(omega)).sum();
        let sig = self.spec.sigma;
        let jump = Complex64::from_polar(
            self.spec.a * (-2.0 * PI * PI * sig * sig * omega * omega).exp(),
            2.0 * PI * omega * self.spec.theta,
        );
        Complex64::new(0.0, -2.0 * PI * omega) * s - jump
    }

    /// `f̂` sampled on the grid's frequency axis.
    pub fn spectrum(&self) -> SpectralSignal {
        SpectralSignal::from_fn(*self.grid(), |w| self.spectrum_at(w))
    }

    /// Smallest Gaussian width present (template or bump).
    fn min_width(&self) -> f64 {
        self.spec
            .bumps
            .iter()
            .map(|b| b.width)
            .fold(self.spec.sigma, f64::min)
    }

    /// Largest distance from the origin at which `ĝ_f` has a phase centre.
    fn max_offset(&self) -> f64 {
        self.spec
            .bumps
            .iter()
            .map(|b| b.center.abs())
            .fold(self.spec.theta.abs(), f64::max)
    }
}

/// Evaluates the class integral of Eq. (4) or Eq. (5) and compares it to `L`.
pub fn check_class_membership(f: &ChangePointFunction, class: &ClassSpec) -> Result<MembershipReport> {
    class.validate()?;
    let used = class_integral(f, class)?;
    let jump_ok = f.a_jump().abs() >= class.a();
    Ok(MembershipReport {
        jump_ok,
        smooth_budget_used: used,
        budget_limit: class.l(),
        pass: jump_ok && used <= class.l(),
    })
}

fn class_integral(f: &ChangePointFunction, class: &ClassSpec) -> Result<f64> {
    let integrand = |w: f64| -> f64 {
        let g = f.g_spectrum_at(w);
        match *class {
            ClassSpec::Fm { m, .. } => g.norm() * w.abs().powf(m - 1.0),
            ClassSpec::Anu { nu, .. } => g.norm_sqr() * (2.0 * nu * w.abs()).exp(),
        }
    };
    let (nodes, weights) = gauss_legendre(GL_ORDER);
    let panel_sum = |a: f64, b: f64, map: &dyn Fn(f64) -> (f64, f64)| -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| {
                let (omega, jac) = map(mid + half * x);
                w * half * jac * integrand(omega)
            })
            .sum()
    };

    // Panels short against the phase oscillation of |ĝ_f| and the
    // narrowest Gaussian envelope.
    let panel = (0.5 / (2.0 * f.max_offset() + 1.0)).min(0.25 / (PI * f.min_width()));
    // First panel through ω = panel·u², which smooths the |ω|^{m−1} and
    // e^{2ν|ω|} kinks at the origin.
    let mut total = panel_sum(0.0, 1.0, &|u| (panel * u * u, 2.0 * panel * u));
    let mut lo = panel;
    let mut quiet = 0;
    while quiet < 8 {
        if lo > OMEGA_CAP {
            return Err(Error::NonConvergent(format!(
                "class integrand still {:.3e} at |omega| = {OMEGA_CAP}",
                integrand(lo)
            )));
        }
        let part = panel_sum(lo, lo + panel, &|w| (w, 1.0));
        if !part.is_finite() {
            return Err(Error::NonConvergent(format!("integrand overflow near omega = {lo}")));
        }
        total += part;
        // Stop once the Gaussian envelope has clearly won.
        let edge = integrand(lo + panel);
        if part <= 1e-18 * total && edge <= integrand(lo) {
            quiet += 1;
        } else {
            quiet = 0;
        }
        lo += panel;
    }
    // The integrand is even in ω for a real f.
    let total = 2.0 * total;
    Ok(match class {
        ClassSpec::Fm { .. } => total,
        ClassSpec::Anu { .. } => total.sqrt(),
    })
}

const GL_ORDER: usize = 20;

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// `P_n`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[n - 1 - i] = x;
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

/// Scales the bump amplitudes of `spec` so the class integral lands in
/// `[0.9 L, L]`, which makes the smooth part contribute a visible bias.
pub fn tune_hard_function(spec: &FunctionSpec, grid: Grid) -> Result<(ChangePointFunction, f64)> {
    if spec.bumps.is_empty() {
        return Err(invalid("a hard function needs at least one bump to scale"));
    }
    let l = spec.class.l();
    let scaled = |c: f64| {
        let mut s = spec.clone();
        for b in &mut s.bumps {
            b.amp *= c;
        }
        s
    };
    let budget = |c: f64| -> Result<f64> {
        let f = ChangePointFunction::unchecked(scaled(c), grid)?;
        Ok(check_class_membership(&f, &spec.class)?.smooth_budget_used)
    };
    if budget(0.0)? > 0.9 * l {
        return Err(Error::ClassMembership(format!(
            "jump template alone uses more than 90% of L = {l}"
        )));
    }
    let target = HARD_TARGET * l;
    let mut hi = 1.0;
    while budget(hi)? < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NonConvergent("bump scale search diverged".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if budget(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let f = ChangePointFunction::new(scaled(lo), grid)?;
    Ok((f, lo))
}
