//! Model parameters of the power-law shot noise and its closed-form moments.
//!
//! The Poisson intensity is not free: it is pinned to `(2γ − d)/ω_{d−1}` so
//! that the tail sum outside radius `r` has variance exactly `r^{d−2γ}`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest cumulant order served by [`ModelParams::cumulant`].
pub const MAX_CUMULANT_ORDER: u32 = 64;

/// Dimension, pathloss exponent and the constants derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: u32,
    pub gamma: f64,
    /// Poisson intensity `(2γ − d)/ω_{d−1}`.
    pub lambda: f64,
    /// `2 − d/γ`
    pub d1: f64,
    /// `2γ/d − 1`, the rate of the i.i.d. exponential spacings of `R_i^d`.
    pub d2: f64,
    /// `d1 / (1 − d/γ)`; `−d3·ρ` is the lower support edge of the standardized tail.
    pub d3: f64,
    /// Surface measure `ω_{d−1}` of the unit sphere.
    pub sphere_area: f64,
}

/// Scale quantities of the tail sum outside radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialScale {
    pub r: f64,
    /// `r^{d/2}`
    pub rho: f64,
    pub mu: f64,
    pub sigma2: f64,
}

impl RadialScale {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// `ω_{d−1} = 2π^{d/2} / Γ(d/2)`.
pub fn sphere_area(d: u32) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * PI.powf(half) / gamma_fn(half)
}

impl ModelParams {
    pub fn new(d: u32, gamma: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension d must be at least 1".into()));
        }
        if !gamma.is_finite() || gamma <= d as f64 {
            return Err(Error::InvalidParameter(format!(
                "pathloss exponent gamma = {gamma} must exceed d = {d}"
            )));
        }
        let df = d as f64;
        let beta = df / gamma;
        let sphere_area = sphere_area(d);
        let d1 = 2.0 - beta;
        Ok(Self {
            d,
            gamma,
            lambda: (2.0 * gamma - df) / sphere_area,
            d1,
            d2: 2.0 * gamma / df - 1.0,
            d3: d1 / (1.0 - beta),
            sphere_area,
        })
    }

    /// The stability index `d/γ ∈ (0, 1)`.
    #[inline]
    pub fn beta(&self) -> f64 {
        self.d as f64 / self.gamma
    }

    /// Exponent `γ/d` mapping `v = r^d` to the contribution `v^{−γ/d}`.
    #[inline]
    pub fn power(&self) -> f64 {
        self.gamma / self.d as f64
    }

    #[inline]
    pub fn rho(&self, r: f64) -> f64 {
        r.powf(self.d as f64 / 2.0)
    }

    /// `E[S̄^(r)] = d3 · r^{d−γ}`.
    pub fn mu(&self, r: f64) -> f64 {
        self.d3 * r.powf(self.d as f64 - self.gamma)
    }

    /// `σ(r) = r^{d/2 − γ}`.
    pub fn sigma(&self, r: f64) -> f64 {
        r.powf(self.d as f64 / 2.0 - self.gamma)
    }

    pub fn scale(&self, r: f64) -> RadialScale {
        let s = self.sigma(r);
        RadialScale {
            r,
            rho: self.rho(r),
            mu: self.mu(r),
            sigma2: s * s,
        }
    }

    /// Cumulant `κ_n(r) = a₁ a₂ⁿ / (n − d/γ)` of the tail sum outside `r`,
    /// with `a₁ = (λω_{d−1}/γ) r^d` and `a₂ = r^{−γ}`.
    pub fn cumulant(&self, r: f64, n: u32) -> Result<f64> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidParameter(format!("radius r = {r} must be positive")));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("cumulant order starts at 1".into()));
        }
        if n > MAX_CUMULANT_ORDER {
            return Err(Error::Range(format!(
                "cumulant order {n} exceeds the supported maximum {MAX_CUMULANT_ORDER}"
            )));
        }
        let a1 = self.lambda * self.sphere_area / self.gamma * r.powi(self.d as i32);
        // r^{−γn} can underflow for large n; combine exponents first.
        let log_val = a1.ln() - self.gamma * n as f64 * r.ln();
        Ok(log_val.exp() / (n as f64 - self.beta()))
    }

    fn require_levy(&self) -> Result<()> {
        if self.d == 2 && self.gamma == 4.0 {
            Ok(())
        } else {
            Err(Error::NoClosedForm {
                d: self.d,
                gamma: self.gamma,
            })
        }
    }

    /// Density of the full sum `S` in the Lévy case `d = 2, γ = 4`:
    /// `f_S(s) = (3/2) s^{−3/2} exp(−9π/(4s))`.
    pub fn stable_density_s(&self, s: f64) -> Result<f64> {
        self.require_levy()?;
        if !(s > 0.0) {
            return Ok(0.0);
        }
        Ok(1.5 * s.powf(-1.5) * (-9.0 * PI / (4.0 * s)).exp())
    }

    /// Distribution function of `S` in the Lévy case, `erfc(3√π / (2√s))`.
    pub fn stable_cdf_s(&self, s: f64) -> Result<f64> {
        self.require_levy()?;
        if !(s > 0.0) {
            return Ok(0.0);
        }
        Ok(statrs::function::erf::erfc(1.5 * PI.sqrt() / s.sqrt()))
    }

    /// `f_{R₁}(r₁) = d·d₂·r₁^{d−1} exp(−d₂ r₁^d)`, from the void probability.
    pub fn first_radius_density(&self, r1: f64) -> f64 {
        if !(r1 > 0.0) {
            return 0.0;
        }
        let df = self.d as f64;
        df * self.d2 * r1.powf(df - 1.0) * (-self.d2 * r1.powf(df)).exp()
    }

    /// Joint density of the `ℓ` nearest radii,
    /// `(d·d₂)^ℓ ∏ r_i^{d−1} exp(−d₂ r_ℓ^d)` on `0 < r₁ < … < r_ℓ`.
    pub fn joint_radii_density(&self, radii: &[f64]) -> Result<f64> {
        validate_radii(radii)?;
        let df = self.d as f64;
        let mut log_f = radii.len() as f64 * (df * self.d2).ln();
        for &r in radii {
            log_f += (df - 1.0) * r.ln();
        }
        log_f -= self.d2 * radii[radii.len() - 1].powf(df);
        Ok(log_f.exp())
    }
}

pub(crate) fn validate_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidParameter("radii vector is empty".into()));
    }
    if !(radii[0] > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "radii must be positive, got {}",
            radii[0]
        )));
    }
    if let Some(w) = radii.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter(format!(
            "radii must be strictly increasing, found {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}
