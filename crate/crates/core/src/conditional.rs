//! Conditional law of the nearest radius `R₁` given the total `S = s`.
//!
//! The `ℓ` nearest points are integrated against their joint density and the
//! remainder `S̄^(r_ℓ)` is replaced by its tilted Edgeworth approximation
//! `ĝ_{ℓ,k}`. In `v = r^d` coordinates the points form a rate-`d₂` Poisson
//! process, so given `v₁` the gap `T = v_ℓ − v₁` is `Gamma(ℓ − 1, d₂)` and the
//! `ℓ − 2` intermediate points are independent uniforms on `(v₁, v_ℓ)`:
//!
//! ```text
//! f̂(r₁, s) = f_{R₁}(r₁) · E_T E_U [ ĝ_{ℓ,k}(y, r_ℓ) ]
//! y = (s − Σ_{i≤ℓ} r_i^{−γ} − μ(r_ℓ)) / σ(r_ℓ)
//! ```

use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::edgeworth::{density_y, MAX_ORDER};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::oracle::QuadratureSpec;
use crate::quad::{integrate_adaptive, GaussLegendre, Tolerance};
use crate::special::normal_pdf;

/// Largest `ℓ` accepted.
pub const MAX_ELL: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalConfig {
    pub ell: usize,
    pub k: usize,
    pub a0: f64,
    pub quadrature: QuadratureSpec,
    /// Use the closed-form densities of the intermediate power sums when
    /// `(d, γ) = (2, 4)` and `ℓ ∈ {4, 5}`.
    pub reduction: bool,
    /// Relative tolerance of the nested integrals.
    pub rel_tol: f64,
    /// Quasi-Monte Carlo points per randomization for `ℓ ≥ 5`.
    pub qmc_points: usize,
    pub qmc_replicates: usize,
    pub seed: u64,
}

impl ConditionalConfig {
    /// `ℓ` nearest points with cutoff constant `a0` and `k = ⌊√(a0 ℓ)⌋`.
    pub fn new(params: &ModelParams, ell: usize, a0: f64) -> Result<Self> {
        let cfg = Self {
            ell,
            k: (a0 * ell as f64).sqrt().floor() as usize,
            a0,
            quadrature: QuadratureSpec::default(),
            reduction: true,
            rel_tol: 1e-6,
            qmc_points: 1 << 12,
            qmc_replicates: 8,
            seed: 0,
        };
        cfg.validate(params)?;
        Ok(cfg)
    }

    /// `ℓ = 4`, `a0 = 0.8/d₂`.
    pub fn default_for(params: &ModelParams) -> Self {
        Self::new(params, 4, 0.8 / params.d2).expect("default configuration is valid")
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if !(1..=MAX_ELL).contains(&self.ell) {
            return Err(Error::InvalidParameter(format!(
                "ell = {} outside 1..={MAX_ELL}",
                self.ell
            )));
        }
        if !(self.a0 > 0.0 && self.a0 < 1.0 / params.d2) {
            return Err(Error::InvalidParameter(format!(
                "a0 = {} must lie in (0, 1/d2) = (0, {})",
                self.a0,
                1.0 / params.d2
            )));
        }
        if self.k > MAX_ORDER {
            return Err(Error::InvalidParameter(format!("k = {} exceeds {MAX_ORDER}", self.k)));
        }
        if !(self.rel_tol > 0.0) || self.qmc_points == 0 || self.qmc_replicates < 2 {
            return Err(Error::InvalidParameter("invalid integration settings".into()));
        }
        Ok(())
    }

    /// Radius at or below which `ĝ` vanishes: `(a0 ℓ)^{1/d}`.
    pub fn cutoff_radius(&self, params: &ModelParams) -> f64 {
        (self.a0 * self.ell as f64).powf(1.0 / params.d as f64)
    }

    fn uses_reduction(&self, params: &ModelParams) -> bool {
        self.reduction && params.d == 2 && params.gamma == 4.0 && (self.ell == 4 || self.ell == 5)
    }

    /// Whether the intermediate points of an `ell`-point integrand are averaged by QMC.
    fn uses_qmc(&self, params: &ModelParams, ell: usize) -> bool {
        ell >= 5 && !(self.uses_reduction(params) && ell == 5)
    }
}

/// A value with an estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
}

/// `ĝ_{ℓ,k}(y, r) = ν̃_k e^{−ξy} φ(−ξ) / σ(r)` above the cutoff radius, zero at
/// or below it and outside the support of `Y^(r)`. Numerical failures inside
/// the support surface as `NaN`.
pub fn g_ellk(params: &ModelParams, y: f64, r: f64, cfg: &ConditionalConfig) -> f64 {
    if r <= cfg.cutoff_radius(params) {
        return 0.0;
    }
    if y <= -params.d3 * params.rho(r) * (1.0 - crate::tilt::SUPPORT_GUARD) {
        return 0.0;
    }
    match density_y(params, y, r, cfg.k) {
        Ok(e) => e.value / params.sigma(r),
        Err(Error::OutsideSupport { .. }) => 0.0,
        Err(_) => f64::NAN,
    }
}

/// The stand-in for the density of the far field `S̄^(r_ℓ)` evaluated at
/// the leftover `s − Σ`.
#[derive(Debug, Clone, Copy)]
enum Kernel {
    Edgeworth,
    Normal,
}

impl Kernel {
    fn eval(self, params: &ModelParams, rest: f64, r: f64, cfg: &ConditionalConfig) -> f64 {
        let sigma = params.sigma(r);
        let y = (rest - params.mu(r)) / sigma;
        match self {
            Kernel::Edgeworth => g_ellk(params, y, r, cfg),
            Kernel::Normal => normal_pdf(y) / sigma,
        }
    }

    /// Largest inner power sum with a non-negligible kernel value.
    fn budget(self, params: &ModelParams, base: f64, r: f64) -> f64 {
        match self {
            Kernel::Edgeworth => base,
            Kernel::Normal => base - params.mu(r) + 40.0 * params.sigma(r),
        }
    }

    fn cutoff(self, params: &ModelParams, cfg: &ConditionalConfig) -> f64 {
        match self {
            Kernel::Edgeworth => cfg.cutoff_radius(params).powi(params.d as i32),
            Kernel::Normal => 0.0,
        }
    }
}

struct Integrand<'a> {
    params: &'a ModelParams,
    cfg: &'a ConditionalConfig,
    kernel: Kernel,
    ell: usize,
    error: RefCell<Option<Error>>,
}

impl Integrand<'_> {
    fn tol(&self, scale_abs: f64) -> Tolerance {
        Tolerance {
            abs: scale_abs,
            rel: self.cfg.rel_tol,
            max_panels: 400,
        }
    }

    /// Inner integrals that stop short of tolerance keep their best estimate;
    /// the outer error estimate still reflects the resulting noise.
    fn record<T>(&self, r: Result<T>, fallback: T) -> T {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.error.borrow_mut().get_or_insert(e);
                fallback
            }
        }
    }

    fn take_error(&self) -> Result<()> {
        match self.error.borrow_mut().take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// `E_T E_U[kernel]` given `v₁`, with `x₁ = v₁^{−p}` already removed from `s`.
    fn outer(&self, v1: f64, s_rest: f64) -> Result<Estimate> {
        let params = self.params;
        let d = params.d as f64;
        let p = params.power();
        let q = 1.0 / p;
        let ell = self.ell;
        if ell == 1 {
            let r1 = v1.powf(1.0 / d);
            let v = self.kernel.eval(params, s_rest, r1, self.cfg);
            if self.kernel.cutoff(params, self.cfg) >= v1 {
                return Ok(Estimate { value: 0.0, abs_err: 0.0 });
            }
            return Ok(Estimate { value: v, abs_err: 0.0 });
        }
        let m = (ell - 1) as f64;
        let rate = params.d2;
        let log_norm = m * rate.ln() - statrs::function::gamma::ln_gamma(m);
        let gamma_pdf = |t: f64| (log_norm + (m - 1.0) * t.ln() - rate * t).exp();

        let mut t_lo = (self.kernel.cutoff(params, self.cfg) - v1).max(0.0);
        if let Kernel::Edgeworth = self.kernel {
            // The far field must be positive: x_ℓ < s_rest.
            if s_rest <= 0.0 {
                return Ok(Estimate { value: 0.0, abs_err: 0.0 });
            }
            t_lo = t_lo.max(s_rest.powf(-q) - v1);
        }
        let t_hi = t_lo + (m + 45.0 + 8.0 * m.sqrt()) / rate;
        if self.cfg.uses_qmc(params, ell) {
            return self.qmc(v1, s_rest, t_lo);
        }
        let mode = (m - 1.0) / rate;
        let mut points = vec![t_lo];
        for i in 1..4 {
            let t = t_lo + (t_hi - t_lo) * (i as f64 / 4.0).powi(2);
            if (mode - t).abs() > 1e-12 {
                points.push(t);
            }
        }
        if mode > t_lo && mode < t_hi {
            points.push(mode);
        }
        points.push(t_hi);
        points.sort_by(f64::total_cmp);
        points.dedup();

        let f = |t: f64| -> f64 {
            if t <= 0.0 {
                return 0.0;
            }
            let w = gamma_pdf(t);
            if w == 0.0 {
                return 0.0;
            }
            let vl = v1 + t;
            let r_l = vl.powf(1.0 / d);
            let base = s_rest - vl.powf(-p);
            w * self.middle(v1, vl, r_l, base)
        };
        let out = integrate_adaptive(f, &points, self.tol(1e-14));
        self.take_error()?;
        match out {
            Ok(o) => Ok(Estimate { value: o.value, abs_err: o.abs_err }),
            Err(Error::Quadrature { estimate, error, .. }) => Ok(Estimate { value: estimate, abs_err: error }),
            Err(e) => Err(e),
        }
    }

    /// Average of the kernel over the `ℓ − 2` intermediate points.
    fn middle(&self, v1: f64, vl: f64, r_l: f64, base: f64) -> f64 {
        let params = self.params;
        let budget = self.kernel.budget(params, base, r_l);
        if budget <= 0.0 {
            return 0.0;
        }
        let inner = self.ell - 2;
        if inner == 0 {
            return self.kernel.eval(params, base, r_l, self.cfg);
        }
        if self.cfg.uses_reduction(params) {
            let (s1, sl) = (v1.powi(-2), vl.powi(-2));
            return self.reduced(s1, sl, base, budget, r_l);
        }
        self.uniform_average(inner, v1, vl, r_l, base, budget)
    }

    /// Nested adaptive average over `depth` uniforms on `(v1, vl)`.
    fn uniform_average(&self, depth: usize, v1: f64, vl: f64, r_l: f64, rest: f64, budget: f64) -> f64 {
        let p = self.params.power();
        let q = 1.0 / p;
        if depth == 0 {
            return self.kernel.eval(self.params, rest, r_l, self.cfg);
        }
        if budget <= 0.0 {
            return 0.0;
        }
        let lo = v1.max(budget.powf(-q));
        if lo >= vl {
            return 0.0;
        }
        let f = |v: f64| {
            let x = v.powf(-p);
            self.uniform_average(depth - 1, v1, vl, r_l, rest - x, budget - x)
        };
        let out = integrate_adaptive(f, &[lo, vl], self.tol(1e-15));
        self.record(settle(out), 0.0) / (vl - v1)
    }

    /// Closed-form path for `(d, γ) = (2, 4)`: integrate against the density
    /// of the intermediate power sum.
    fn reduced(&self, s1: f64, sl: f64, base: f64, budget: f64, r_l: f64) -> f64 {
        let params = self.params;
        let cfg = self.cfg;
        let kernel = self.kernel;
        match self.ell {
            4 => {
                let hi = (2.0 * s1).min(budget);
                let lo = 2.0 * sl;
                if hi <= lo {
                    return 0.0;
                }
                let mut pts = vec![lo];
                if s1 + sl < hi {
                    pts.push(s1 + sl);
                }
                pts.push(hi);
                let f = |w: f64| two_point_density_w_unchecked(s1, sl, w) * kernel.eval(params, base - w, r_l, cfg);
                let out = integrate_adaptive(f, &pts, self.tol(1e-15));
                self.record(settle(out), 0.0)
            }
            _ => {
                let hi = (3.0 * s1).min(budget);
                let lo = 3.0 * sl;
                if hi <= lo {
                    return 0.0;
                }
                let mut pts = vec![lo];
                for kink in [2.0 * sl + s1, sl + 2.0 * s1] {
                    if kink > lo && kink < hi {
                        pts.push(kink);
                    }
                }
                pts.push(hi);
                let f = |z: f64| {
                    let dens = self.record(three_point_density_z_raw(s1, sl, z, 1e-10), 0.0);
                    dens * kernel.eval(params, base - z, r_l, cfg)
                };
                let out = integrate_adaptive(f, &pts, self.tol(1e-15));
                self.record(settle(out), 0.0)
            }
        }
    }

    /// Randomized Halton estimate of `E_T E_U[kernel]`, `T` conditioned on `T > t_lo`.
    fn qmc(&self, v1: f64, s_rest: f64, t_lo: f64) -> Result<Estimate> {
        let params = self.params;
        let d = params.d as f64;
        let p = params.power();
        let inner = self.ell - 2;
        let shape = (self.ell - 1) as f64;
        let gamma = statrs::distribution::Gamma::new(shape, params.d2)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        use statrs::distribution::ContinuousCDF;
        let f_lo = gamma.cdf(t_lo);
        let mass = 1.0 - f_lo;
        if mass <= 0.0 {
            return Ok(Estimate { value: 0.0, abs_err: 0.0 });
        }
        let dims = 1 + inner;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(v1.to_bits());
        let reps = self.cfg.qmc_replicates;
        let mut means = Vec::with_capacity(reps);
        for _ in 0..reps {
            let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
            let mut acc = 0.0;
            for i in 0..self.cfg.qmc_points {
                let pt = |j: usize| (radical_inverse(PRIMES[j], i as u64 + 1) + shift[j]).fract();
                let ut = f_lo + mass * pt(0);
                let t = gamma.inverse_cdf(ut.min(1.0 - 1e-16));
                let vl = v1 + t;
                let r_l = vl.powf(1.0 / d);
                let mut rest = s_rest - vl.powf(-p);
                for j in 0..inner {
                    let v = v1 + t * pt(1 + j);
                    rest -= v.powf(-p);
                }
                if let Kernel::Edgeworth = self.kernel {
                    if rest <= 0.0 {
                        continue;
                    }
                }
                let g = self.kernel.eval(params, rest, r_l, self.cfg);
                if g.is_nan() {
                    return Err(Error::Convergence {
                        what: "conditional integrand",
                        detail: format!("kernel failed at v1 = {v1}, t = {t}"),
                    });
                }
                acc += g;
            }
            means.push(mass * acc / self.cfg.qmc_points as f64);
        }
        let n = means.len() as f64;
        let mean = means.iter().sum::<f64>() / n;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Estimate { value: mean, abs_err: (var / n).sqrt() })
    }
}

fn settle(out: Result<crate::quad::Integral>) -> Result<f64> {
    match out {
        Ok(o) => Ok(o.value),
        Err(Error::Quadrature { estimate, .. }) => Ok(estimate),
        Err(e) => Err(e),
    }
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(base: u64, mut i: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    out
}

fn fhat_with(params: &ModelParams, r1: f64, s: f64, cfg: &ConditionalConfig, kernel: Kernel, ell: usize) -> Result<Estimate> {
    if !(r1 > 0.0) || !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("need r1 > 0 and s > 0, got r1 = {r1}, s = {s}")));
    }
    let d = params.d as f64;
    let v1 = r1.powf(d);
    let s_rest = s - r1.powf(-params.gamma);
    if let Kernel::Edgeworth = kernel {
        if s_rest <= 0.0 {
            return Ok(Estimate { value: 0.0, abs_err: 0.0 });
        }
    }
    let integrand = Integrand {
        params,
        cfg,
        kernel,
        ell,
        error: RefCell::new(None),
    };
    let inner = integrand.outer(v1, s_rest)?;
    if !inner.value.is_finite() {
        return Err(Error::Convergence {
            what: "conditional integrand",
            detail: format!("non-finite value at r1 = {r1}, s = {s}"),
        });
    }
    let w = params.first_radius_density(r1);
    Ok(Estimate { value: w * inner.value, abs_err: w * inner.abs_err })
}

/// `f̂^{ℓ,k}_{R₁,S}(r₁, s)`, an approximation of the joint density of `(R₁, S)`.
pub fn fhat_r1s(params: &ModelParams, r1: f64, s: f64, cfg: &ConditionalConfig) -> Result<Estimate> {
    cfg.validate(params)?;
    fhat_with(params, r1, s, cfg, Kernel::Edgeworth, cfg.ell)
}

/// Gaussian stand-in for the far field beyond the `n_points`-th point.
pub fn normal_baseline_r1s(params: &ModelParams, r1: f64, s: f64, n_points: usize) -> Result<Estimate> {
    if n_points == 0 || n_points > MAX_ELL {
        return Err(Error::InvalidParameter(format!("n_points = {n_points} outside 1..={MAX_ELL}")));
    }
    let mut cfg = ConditionalConfig::default_for(params);
    cfg.reduction = params.d == 2 && params.gamma == 4.0;
    fhat_with(params, r1, s, &cfg, Kernel::Normal, n_points)
}

/// Where the denominator of the conditional distribution comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FsSource {
    /// Closed-form density of `S`, falling back to the scheme when none exists.
    ClosedForm,
    /// `∫ f̂(r₁, s) dr₁` with the same configuration.
    Scheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfEstimate {
    pub r: f64,
    /// Unclamped ratio; may exceed 1 by the scheme's error.
    pub value: f64,
    pub clamped: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub abs_err: f64,
}

fn r1_lower(params: &ModelParams, s: f64) -> f64 {
    s.powf(-1.0 / params.gamma)
}

fn r1_upper(params: &ModelParams, s: f64) -> f64 {
    // f_{R₁} is below e^{−45} beyond this radius.
    (45.0 / params.d2).powf(1.0 / params.d as f64).max(r1_lower(params, s) * 1.5)
}

fn integrate_fhat(
    params: &ModelParams,
    s: f64,
    cfg: &ConditionalConfig,
    kernel: Kernel,
    ell: usize,
    a: f64,
    b: f64,
) -> Result<Estimate> {
    if b <= a {
        return Ok(Estimate { value: 0.0, abs_err: 0.0 });
    }
    // f̂ rises from zero at the support edge and concentrates there for large s.
    let (n, power) = if a <= r1_lower(params, s) { (6, 3) } else { (2, 1) };
    let pts: Vec<f64> = (0..=n).map(|i| a + (b - a) * (i as f64 / n as f64).powi(power)).collect();
    if cfg.uses_qmc(params, ell) {
        return integrate_noisy(params, s, cfg, kernel, ell, &pts);
    }
    let err: RefCell<Option<Error>> = RefCell::new(None);
    let f = |r1: f64| match fhat_with(params, r1, s, cfg, kernel, ell) {
        Ok(e) => e.value,
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let out = integrate_adaptive(f, &pts, Tolerance { abs: 1e-13, rel: cfg.rel_tol, max_panels: 400 });
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    let out = out?;
    Ok(Estimate { value: out.value, abs_err: out.abs_err })
}

/// Fixed Gauss–Legendre rules on each panel for integrands carrying QMC
/// noise, which adaptive refinement cannot push below its own scatter. The
/// error is the 10-point/5-point discrepancy plus the propagated QMC error.
fn integrate_noisy(
    params: &ModelParams,
    s: f64,
    cfg: &ConditionalConfig,
    kernel: Kernel,
    ell: usize,
    pts: &[f64],
) -> Result<Estimate> {
    let (fine, coarse) = (GaussLegendre::cached(10), GaussLegendre::cached(5));
    let (mut value, mut rule_err, mut noise) = (0.0, 0.0, 0.0);
    for w in pts.windows(2) {
        let mut hi = 0.0;
        for (x, wt) in fine.mapped(w[0], w[1]) {
            let e = fhat_with(params, x, s, cfg, kernel, ell)?;
            hi += wt * e.value;
            noise += wt * e.abs_err;
        }
        let mut lo = 0.0;
        for (x, wt) in coarse.mapped(w[0], w[1]) {
            lo += wt * fhat_with(params, x, s, cfg, kernel, ell)?.value;
        }
        value += hi;
        rule_err += (hi - lo).abs();
    }
    Ok(Estimate { value, abs_err: rule_err + noise })
}

/// `f_S(s) ≈ ∫ f̂(r₁, s) dr₁`.
pub fn fs_via_scheme(params: &ModelParams, s: f64, cfg: &ConditionalConfig) -> Result<Estimate> {
    cfg.validate(params)?;
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("s = {s} must be positive")));
    }
    let lo = r1_lower(params, s);
    let hi = r1_upper(params, s);
    integrate_fhat(params, s, cfg, Kernel::Edgeworth, cfg.ell, lo, hi)
}

fn denominator(params: &ModelParams, s: f64, cfg: &ConditionalConfig, fs: FsSource) -> Result<Estimate> {
    match fs {
        FsSource::ClosedForm => match params.stable_density_s(s) {
            Ok(v) => Ok(Estimate { value: v, abs_err: 0.0 }),
            Err(Error::NoClosedForm { .. }) => fs_via_scheme(params, s, cfg),
            Err(e) => Err(e),
        },
        FsSource::Scheme => fs_via_scheme(params, s, cfg),
    }
}

/// `P(R₁ ≤ r | S = s) ≈ ∫_{s^{−1/γ}}^r f̂(r₁, s) dr₁ / f_S(s)`.
pub fn conditional_cdf_r1(params: &ModelParams, r: f64, s: f64, cfg: &ConditionalConfig, fs: FsSource) -> Result<CdfEstimate> {
    Ok(conditional_cdf_grid(params, &[r], s, cfg, fs)?[0])
}

/// Conditional CDF at every radius of `rs` (any order), sharing the
/// integration work between neighbouring radii.
pub fn conditional_cdf_grid(
    params: &ModelParams,
    rs: &[f64],
    s: f64,
    cfg: &ConditionalConfig,
    fs: FsSource,
) -> Result<Vec<CdfEstimate>> {
    cfg.validate(params)?;
    conditional_cdf_kernel(params, rs, s, cfg, fs, Kernel::Edgeworth, cfg.ell)
}

/// Conditional CDF from the Gaussian baseline, normalized by the closed-form
/// `f_S` (or by its own mass when no closed form exists).
pub fn normal_baseline_cdf_grid(params: &ModelParams, rs: &[f64], s: f64, n_points: usize) -> Result<Vec<CdfEstimate>> {
    let mut cfg = ConditionalConfig::default_for(params);
    cfg.reduction = params.d == 2 && params.gamma == 4.0;
    if n_points == 0 || n_points > MAX_ELL {
        return Err(Error::InvalidParameter(format!("n_points = {n_points} outside 1..={MAX_ELL}")));
    }
    conditional_cdf_kernel(params, rs, s, &cfg, FsSource::ClosedForm, Kernel::Normal, n_points)
}

fn conditional_cdf_kernel(
    params: &ModelParams,
    rs: &[f64],
    s: f64,
    cfg: &ConditionalConfig,
    fs: FsSource,
    kernel: Kernel,
    ell: usize,
) -> Result<Vec<CdfEstimate>> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("s = {s} must be positive")));
    }
    let lo = match kernel {
        Kernel::Edgeworth => r1_lower(params, s),
        // The Gaussian stand-in has no support edge; start where f_{R₁} is negligible.
        Kernel::Normal => (1e-6f64).min(r1_lower(params, s) * 0.5),
    };
    let hi = r1_upper(params, s);
    let mut order: Vec<usize> = (0..rs.len()).collect();
    order.sort_by(|&a, &b| rs[a].total_cmp(&rs[b]));
    let mut cum = Estimate { value: 0.0, abs_err: 0.0 };
    let mut prev = lo;
    let mut nums = vec![Estimate { value: 0.0, abs_err: 0.0 }; rs.len()];
    for &i in &order {
        let r = rs[i].min(hi);
        if r > prev {
            let part = integrate_fhat(params, s, cfg, kernel, ell, prev, r)?;
            cum.value += part.value;
            cum.abs_err += part.abs_err;
            prev = r;
        }
        nums[i] = cum;
    }
    let denom = match (kernel, fs) {
        (Kernel::Normal, _) => match params.stable_density_s(s) {
            Ok(v) => Estimate { value: v, abs_err: 0.0 },
            Err(_) => {
                let tail = integrate_fhat(params, s, cfg, kernel, ell, prev, hi)?;
                Estimate { value: cum.value + tail.value, abs_err: cum.abs_err + tail.abs_err }
            }
        },
        (Kernel::Edgeworth, FsSource::Scheme) => {
            let tail = integrate_fhat(params, s, cfg, kernel, ell, prev, hi)?;
            Estimate { value: cum.value + tail.value, abs_err: cum.abs_err + tail.abs_err }
        }
        (Kernel::Edgeworth, FsSource::ClosedForm) => denominator(params, s, cfg, fs)?,
    };
    Ok(rs
        .iter()
        .zip(nums)
        .map(|(&r, num)| {
            let (value, abs_err) = if r <= lo {
                (0.0, 0.0)
            } else {
                let v = num.value / denom.value;
                let e = num.abs_err / denom.value + v * denom.abs_err / denom.value;
                (v, e)
            };
            CdfEstimate {
                r,
                value,
                clamped: value.clamp(0.0, 1.0),
                numerator: num.value,
                denominator: denom.value,
                abs_err,
            }
        })
        .collect())
}

/// Density of `W = r₂^{−4} + r₃^{−4}` given `r₁^{−4} = s1`, `r₄^{−4} = s4`
/// for `(d, γ) = (2, 4)`, where the two middle points are uniform in `v = r²`.
///
/// With `b = min(w − s4, s1)`:
/// `f_W(w) = (2b − w) / ((s4^{−1/2} − s1^{−1/2})² w² √(b(w − b)))` on `(2s4, 2s1)`.
pub fn two_point_density_w(s1: f64, s4: f64, w: f64) -> Result<f64> {
    if !(s4 > 0.0 && s4 < s1) {
        return Err(Error::InvalidParameter(format!("need 0 < s4 < s1, got s1 = {s1}, s4 = {s4}")));
    }
    Ok(two_point_density_w_unchecked(s1, s4, w))
}

fn two_point_density_w_unchecked(s1: f64, s4: f64, w: f64) -> f64 {
    if !(w > 2.0 * s4 && w < 2.0 * s1) {
        return 0.0;
    }
    let b = (w - s4).min(s1);
    let gap = s4.powf(-0.5) - s1.powf(-0.5);
    (2.0 * b - w) / (gap * gap * w * w * (b * (w - b)).sqrt())
}

/// Density of `Z = r₂^{−4} + r₃^{−4} + r₄^{−4}` given `r₁^{−4} = s1` and
/// `r₅^{−4} = s5` for `(d, γ) = (2, 4)`: the convolution of the single-point
/// density `x^{−3/2} / (2(s5^{−1/2} − s1^{−1/2}))` with [`two_point_density_w`].
pub fn three_point_density_z(s1: f64, s5: f64, z: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(s5 > 0.0 && s5 < s1) {
        return Err(Error::InvalidParameter(format!("need 0 < s5 < s1, got s1 = {s1}, s5 = {s5}")));
    }
    three_point_density_z_raw(s1, s5, z, spec.rel_tol.max(1e-13))
}

fn three_point_density_z_raw(s1: f64, s5: f64, z: f64, rel: f64) -> Result<f64> {
    if !(z > 3.0 * s5 && z < 3.0 * s1) {
        return Ok(0.0);
    }
    let lo = (2.0 * s5).max(z - s1);
    let hi = (2.0 * s1).min(z - s5);
    if hi <= lo {
        return Ok(0.0);
    }
    let single = 1.0 / (2.0 * (s5.powf(-0.5) - s1.powf(-0.5)));
    let mut pts = vec![lo];
    if s1 + s5 > lo && s1 + s5 < hi {
        pts.push(s1 + s5);
    }
    pts.push(hi);
    let f = |w: f64| single * (z - w).powf(-1.5) * two_point_density_w_unchecked(s1, s5, w);
    settle(integrate_adaptive(f, &pts, Tolerance { abs: 1e-300, rel, max_panels: 400 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn planar() -> ModelParams {
        ModelParams::new(2, 4.0).unwrap()
    }

    #[test]
    fn config_defaults_and_validation() {
        let p = planar();
        let c = ConditionalConfig::default_for(&p);
        assert_eq!((c.ell, c.k), (4, 1));
        assert_relative_eq!(c.a0, 0.8 / 3.0);
        assert!(ConditionalConfig::new(&p, 4, 0.34).is_err());
        assert!(ConditionalConfig::new(&p, 0, 0.1).is_err());
        assert!(ConditionalConfig::new(&p, 13, 0.1).is_err());
    }

    #[test]
    fn g_vanishes_at_cutoff_and_off_support() {
        let p = planar();
        let c = ConditionalConfig::new(&p, 9, 0.3).unwrap();
        let rc = c.cutoff_radius(&p);
        assert_eq!(g_ellk(&p, 0.5, rc, &c), 0.0);
        assert!(g_ellk(&p, 0.5, rc * 1.0001, &c) > 0.0);
        assert_eq!(g_ellk(&p, -10.0, 2.0, &c), 0.0);
        let want = density_y(&p, 0.5, 2.0, 1).unwrap().value / p.sigma(2.0);
        assert_relative_eq!(g_ellk(&p, 0.5, 2.0, &c), want, max_relative = 1e-12);
        let big = g_ellk(&p, 0.0, 50.0, &c);
        assert_relative_eq!(big, density_y(&p, 0.0, 50.0, 1).unwrap().nf_k / p.sigma(50.0), max_relative = 1e-12);
    }

    #[test]
    fn single_point_scheme_is_degenerate_integral() {
        let p = planar();
        let c = ConditionalConfig::new(&p, 1, 0.2).unwrap();
        let (r1, s) = (0.9f64, 5.0);
        let y = (s - r1.powi(-4) - p.mu(r1)) / p.sigma(r1);
        let want = p.first_radius_density(r1) * g_ellk(&p, y, r1, &c);
        assert_relative_eq!(fhat_r1s(&p, r1, s, &c).unwrap().value, want, max_relative = 1e-14);
    }

    #[test]
    fn fhat_vanishes_below_support() {
        let p = planar();
        let c = ConditionalConfig::default_for(&p);
        let s = 10.0f64;
        let edge = s.powf(-0.25);
        assert_eq!(fhat_r1s(&p, edge * (1.0 - 1e-12), s, &c).unwrap().value, 0.0);
        assert_eq!(conditional_cdf_r1(&p, edge, s, &c, FsSource::Scheme).unwrap().value, 0.0);
    }

    #[test]
    fn two_point_density_piecewise() {
        let (s1, s4) = (16.0f64, 1.0);
        // Below the kink the closed form in the (1/4) parametrisation applies.
        for w in [2.5f64, 5.0, 12.0, 16.9] {
            let t = 0.5 - s4 / w;
            let z = 2.0 * (s4.powf(-0.5) - s1.powf(-0.5)).powi(2);
            let want = 4.0 / (w * w) * t / (0.25 - t * t).sqrt() / z;
            assert_relative_eq!(two_point_density_w(s1, s4, w).unwrap(), want, max_relative = 1e-13);
        }
        assert_eq!(two_point_density_w(s1, s4, 1.9).unwrap(), 0.0);
        assert_eq!(two_point_density_w(s1, s4, 32.1).unwrap(), 0.0);
        assert!(two_point_density_w(1.0, 2.0, 2.5).is_err());
    }

    #[test]
    fn halton_is_low_discrepancy() {
        let n = 4096;
        let mean: f64 = (1..=n).map(|i| radical_inverse(3, i)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 1e-3);
    }
}
