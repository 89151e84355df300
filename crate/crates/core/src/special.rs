//! Special functions behind the tilt equation, the tilted cumulants and the
//! Laplace exponent.
//!
//! Everything reduces to the kernel
//!
//! ```text
//! I(a, x) = ∫₀¹ e^{xu} u^{a−1} du,   a > 0, x ∈ ℝ,
//! ```
//!
//! which is `x^{−a} γ(a, x)` continued to both signs of `x`. Three regimes
//! are used, each free of cancellation:
//!
//! * `x ≥ 0`, moderate: the positive series `Σ xᵏ / (k! (a + k))`;
//! * `x ≫ a`: Watson's lemma at the upper endpoint,
//!   `I ≈ eˣ Σ (1 − a)_k / x^{k+1}` (the neglected piece is `O(x^{−a})`);
//! * `x < 0`: with `z = −x`, the Kummer form `e^{−z} Σ zᵏ / (a)_{k+1}` when
//!   `z` is small against `a + 1`, otherwise `z^{−a}(Γ(a) − Γ(a, z))` with the
//!   upper incomplete gamma from its continued fraction.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// `1/√(2π)`
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Largest `x` for which `I(a, x)` is returned as a finite `f64`.
pub const KERNEL_MAX_X: f64 = 700.0;

const EPS: f64 = 1e-17;
const MAX_TERMS: usize = 20_000;

/// Value of the kernel `I(a, x)` together with its logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    pub a: f64,
    pub x: f64,
    pub value: f64,
    pub log_value: f64,
}

/// Evaluates `I(a, x) = ∫₀¹ e^{xu} u^{a−1} du`.
pub fn kernel_i(a: f64, x: f64) -> Result<KernelEval> {
    let log_value = kernel_i_ln(a, x)?;
    let value = log_value.exp();
    if !value.is_finite() {
        return Err(Error::Range(format!("I({a}, {x}) overflows")));
    }
    Ok(KernelEval {
        a,
        x,
        value,
        log_value,
    })
}

/// `ln I(a, x)`. Finite for every `x ≤ KERNEL_MAX_X`.
pub fn kernel_i_ln(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("kernel exponent a = {a} must be positive")));
    }
    if x.is_nan() {
        return Err(Error::InvalidParameter("kernel argument is NaN".into()));
    }
    if x > KERNEL_MAX_X {
        return Err(Error::Range(format!("kernel argument x = {x} exceeds {KERNEL_MAX_X}")));
    }
    if x == 0.0 {
        return Ok(-a.ln());
    }
    if x > 0.0 {
        if x > 40.0 && x > 2.0 * a + 20.0 {
            Ok(x + upper_asymptotic(a, x).ln())
        } else {
            Ok(positive_series(a, x).ln())
        }
    } else {
        let z = -x;
        if z <= 30.0_f64.max(a + 1.0) {
            Ok(-z + kummer_series(a, z).ln())
        } else {
            lower_gamma_cf_ln(a, z)
        }
    }
}

fn positive_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0; // x^k / k!
    let mut sum = 1.0 / a;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= x / kf;
        let add = term / (a + kf);
        sum += add;
        if kf > x && add < EPS * sum {
            break;
        }
    }
    sum
}

fn upper_asymptotic(a: f64, x: f64) -> f64 {
    // Σ (1−a)_k / x^{k+1}; terminates exactly when a is a positive integer.
    let mut term = 1.0 / x;
    let mut sum = term;
    for k in 0..MAX_TERMS {
        let next = term * (1.0 - a + k as f64) / x;
        if next == 0.0 || next.abs() < EPS * sum.abs() || next.abs() > term.abs() {
            if next.abs() < term.abs() {
                sum += next;
            }
            break;
        }
        term = next;
        sum += term;
    }
    sum
}

fn kummer_series(a: f64, z: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    for k in 1..MAX_TERMS {
        term *= z / (a + k as f64);
        sum += term;
        if term < EPS * sum {
            break;
        }
    }
    sum
}

/// `ln(z^{−a} γ(a, z))` for `z > a + 1`, through `Γ(a, z)` by modified Lentz.
fn lower_gamma_cf_ln(a: f64, z: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let lg = ln_gamma(a);
    let log_scale = -z + a * z.ln() - lg;
    if log_scale < -750.0 {
        // Q(a, z) underflows: γ(a, z) = Γ(a) to double precision.
        return Ok(lg - a * z.ln());
    }
    let mut b = z + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    let mut converged = false;
    for i in 1..MAX_TERMS {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() <= 4.0 * f64::EPSILON {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence {
            what: "incomplete gamma continued fraction",
            detail: format!("a = {a}, z = {z}"),
        });
    }
    // Q(a, z) = Γ(a, z) / Γ(a)
    let q = log_scale.exp() * h;
    Ok(lg - a * z.ln() + (-q).ln_1p())
}

/// Series `Σ_{n≥2} xⁿ / (n! (n − β))`.
fn laplace_series(beta: f64, x: f64) -> f64 {
    let mut term = x; // x^n / n!, starting at n = 1
    let mut sum = 0.0;
    for n in 2..MAX_TERMS {
        let nf = n as f64;
        term *= x / nf;
        let add = term / (nf - beta);
        sum += add;
        if nf > x.abs() && add.abs() <= EPS * sum.abs() {
            break;
        }
    }
    sum
}

/// `J(x) = ∫₀¹ (e^{xu} − 1 − xu) u^{−1−β} du`, so that `ψ₀(s) = J(−s)`.
pub(crate) fn laplace_exponent(beta: f64, x: f64) -> Result<f64> {
    if x > KERNEL_MAX_X {
        return Err(Error::Range(format!("Laplace exponent argument {x} overflows")));
    }
    if x >= -2.0 {
        return Ok(laplace_series(beta, x));
    }
    // Integration by parts against u^{−1−β}:
    // J(x) = (1/β) [ −(eˣ − 1 − x) + x (I(1−β, x) − 1/(1−β)) ]
    let i = kernel_i(1.0 - beta, x)?.value;
    Ok((-(x.exp_m1() - x) + x * (i - 1.0 / (1.0 - beta))) / beta)
}

/// `ψ₀(s) = ∫₀¹ (e^{−su} − 1 + su) u^{−1−d/γ} du = Σ_{n≥2} (−s)ⁿ / (n! (n − d/γ))`.
pub fn psi0(params: &ModelParams, s: f64) -> Result<f64> {
    laplace_exponent(params.beta(), -s)
}

/// Probabilists' Hermite polynomial at zero: `0` for odd `n`,
/// `(−1)^{n/2} (n − 1)!!` for even `n`.
pub fn hermite_at_zero(n: u32) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    let mut v = 1.0;
    let mut k = n as i64 - 1;
    while k > 1 {
        v *= k as f64;
        k -= 2;
    }
    if (n / 2) % 2 == 1 {
        -v
    } else {
        v
    }
}

#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}
