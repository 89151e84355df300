//! Reference computations: characteristic-function inversion for the density
//! of `Y^(r)`, Monte Carlo draws of the tail sum `S̄^(r)`, and the finite-`n`
//! density comparison against the closed-form stable density.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::quad::{integrate_adaptive, GaussLegendre, Tolerance};
use crate::tilt::{solve_xi, DEFAULT_TOL};

/// Draws per RNG stream in the batched simulators. Fixing the chunk size
/// keeps results independent of the thread count.
pub const STREAM_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Truncation of the inversion integral; `None` selects it from the
    /// measured decay of the characteristic function.
    pub t_max: Option<f64>,
    pub panel_order: usize,
    pub max_panels: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            t_max: None,
            panel_order: 20,
            max_panels: 4000,
        }
    }
}

impl QuadratureSpec {
    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("quadrature tolerances must be positive".into()));
        }
        if self.panel_order < 2 || self.max_panels < 1 {
            return Err(Error::InvalidParameter("quadrature panel settings too small".into()));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("t_max = {t} must be positive")));
            }
        }
        Ok(())
    }
}

/// `J(z) = ∫₀¹ (e^{zu} − 1 − zu) u^{−1−β} du = Σ_{n≥2} zⁿ / (n! (n − β))`.
pub fn laplace_exponent_complex(beta: f64, z: Complex64) -> Complex64 {
    let az = z.norm();
    if az <= 2.0 {
        return exponent_series(beta, z, 1.0);
    }
    // Series on [0, δ] with |zδ| = 1, Gauss–Legendre panels on [δ, 1].
    let delta = 1.0 / az;
    let head = exponent_series(beta, z, delta);
    let rule = GaussLegendre::cached(20);
    let f = |u: f64| {
        let zu = z * u;
        (zu.exp() - 1.0 - zu) * u.powf(-1.0 - beta)
    };
    let width = 4.0 / az;
    let mut tail = Complex64::new(0.0, 0.0);
    let mut a = delta;
    while a < 1.0 {
        let step = (a - delta).max(delta).min(width);
        let b = (a + step).min(1.0);
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        let mut s = Complex64::new(0.0, 0.0);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            s += f(c + h * x) * *w;
        }
        tail += s * h;
        a = b;
    }
    head + tail
}

/// `Σ_{n≥2} zⁿ δ^{n−β} / (n! (n − β))`.
fn exponent_series(beta: f64, z: Complex64, delta: f64) -> Complex64 {
    let zd = z * delta;
    let mut term = zd;
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 2..400 {
        let nf = n as f64;
        term *= zd / nf;
        let add = term / (nf - beta);
        sum += add;
        if add.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum * delta.powf(-beta)
}

/// `ln χ_{Y^(r)}(t)` for complex `t`; with `t = τ − iξ` this is
/// `d₁ ρ² J((ξ + iτ)/ρ)`.
pub fn log_cf_y(params: &ModelParams, r: f64, t: Complex64) -> Result<Complex64> {
    let rho = params.rho(r);
    let z = Complex64::new(-t.im, t.re) / rho;
    if z.re > crate::special::KERNEL_MAX_X {
        return Err(Error::Range(format!("characteristic function argument {t} overflows")));
    }
    Ok(laplace_exponent_complex(params.beta(), z) * (params.d1 * rho * rho))
}

/// Characteristic function `E[e^{itY^(r)}]`, analytically continued to complex `t`.
pub fn cf_y(params: &ModelParams, r: f64, t: Complex64) -> Result<Complex64> {
    Ok(log_cf_y(params, r, t)?.exp())
}

/// Result of a density inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleDensity {
    pub value: f64,
    /// Estimated absolute error of `value`.
    pub abs_err: f64,
    pub t_max: f64,
    pub panels: usize,
    /// `ln(e^{−ξy} φ(−ξ))`; zero on the direct path.
    pub log_prefactor: f64,
    pub xi: f64,
}

/// Density of `Y^(r)` at `y` by Fourier inversion. On the tilted path the
/// contour is shifted by the tilt `ξ(y, r)`, so the integrand is the
/// characteristic function of the tilted variable.
pub fn invert_density(
    params: &ModelParams,
    y: f64,
    r: f64,
    spec: &QuadratureSpec,
    tilted: bool,
) -> Result<OracleDensity> {
    spec.validate()?;
    let rho = params.rho(r);
    let (xi, log_prefactor, spread) = if tilted {
        let s = solve_xi(params, y, r, DEFAULT_TOL)?;
        (s.xi, s.log_prefactor, s.tkappa2().sqrt())
    } else {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("radius r = {r} must be positive")));
        }
        let edge = -params.d3 * rho;
        if y <= edge {
            return Err(Error::OutsideSupport { y, lower_edge: edge });
        }
        (0.0, 0.0, 1.0)
    };
    let beta = params.beta();
    let scale = params.d1 * rho * rho;
    let x = xi / rho;
    let j0 = laplace_exponent_complex(beta, Complex64::new(x, 0.0)).re;

    // ln of the tilted characteristic function at real τ, minus i τ y.
    let log_integrand = |tau: f64| -> Complex64 {
        let j = laplace_exponent_complex(beta, Complex64::new(x, tau / rho));
        (j - j0) * scale - Complex64::new(0.0, tau * y)
    };
    let integrand = |tau: f64| log_integrand(tau).exp().re;

    let t_max = match spec.t_max {
        Some(t) => t,
        None => choose_t_max(&log_integrand, beta, spec.abs_tol)?,
    };

    // Breakpoints at the width of the (tilted) characteristic function and,
    // on the direct path, at the oscillation scale of e^{−iτy}.
    let core = 2.0 / spread;
    let osc = if !tilted && y != 0.0 { std::f64::consts::PI / y.abs() } else { t_max };
    let step = core.min(osc).max(t_max / 400.0);
    let mut points = vec![0.0];
    while *points.last().unwrap() + step < t_max {
        let next = points.last().unwrap() + step;
        points.push(next);
    }
    points.push(t_max);

    let tol = Tolerance {
        abs: spec.abs_tol * std::f64::consts::PI / 2.0,
        rel: spec.rel_tol,
        max_panels: spec.max_panels,
    };
    let integral = integrate_adaptive(integrand, &points, tol)?;
    let factor = log_prefactor.exp() / std::f64::consts::PI;
    Ok(OracleDensity {
        value: integral.value * factor,
        abs_err: integral.abs_err * factor,
        t_max,
        panels: integral.panels,
        log_prefactor,
        xi,
    })
}

/// Smallest doubling-grid `T` where the neglected tail `∫_T^∞ |χ|` is below
/// `abs_tol/10`, bounded by `|χ(T)| · T/β` for the stretched-exponential decay.
fn choose_t_max<F: Fn(f64) -> Complex64>(log_integrand: &F, beta: f64, abs_tol: f64) -> Result<f64> {
    let target = (abs_tol / 10.0).ln();
    let mut t: f64 = 0.5;
    for _ in 0..80 {
        let lm = log_integrand(t).re;
        if lm + (t / beta).ln() < target {
            let lm2 = log_integrand(2.0 * t).re;
            if lm2 < lm {
                return Ok(t);
            }
        }
        t *= 1.5;
    }
    Err(Error::Convergence {
        what: "inversion truncation",
        detail: format!("characteristic function did not decay by t = {t}"),
    })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Default truncation of the simulated annulus: `σ(tail)/σ(r) ≤ 10⁻³`.
pub fn default_tail_radius(params: &ModelParams, r: f64) -> f64 {
    let ratio = 10f64.powf(3.0 / (params.gamma - params.d as f64 / 2.0));
    r * ratio.max(8.0)
}

/// One draw of `S̄^(r)`: the points in `r < R ≤ tail_radius` are generated
/// from exponential gaps in `v = R^d` (a rate-`d₂` Poisson process) and the
/// mean `μ(tail_radius)` stands in for the far field.
pub fn simulate_sbar<R: Rng + ?Sized>(params: &ModelParams, r: f64, tail_radius: f64, rng: &mut R) -> Result<f64> {
    if !(r > 0.0) || !(tail_radius >= r) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < r ≤ tail_radius, got r = {r}, tail_radius = {tail_radius}"
        )));
    }
    let d = params.d as f64;
    let p = params.power();
    let gap = Exp::new(params.d2).expect("positive rate");
    let v_end = tail_radius.powf(d);
    let mut v = r.powf(d);
    let mut sum = 0.0;
    loop {
        v += gap.sample(rng);
        if v > v_end {
            break;
        }
        sum += v.powf(-p);
    }
    Ok(sum + params.mu(tail_radius))
}

/// `count` independent draws of `S̄^(r)`, generated in parallel in
/// fixed-size chunks; chunk `i` uses stream `i` of the seeded generator.
pub fn simulate_sbar_many(
    params: &ModelParams,
    r: f64,
    tail_radius: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let chunks = count.div_ceil(STREAM_CHUNK);
    let parts: Result<Vec<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let len = STREAM_CHUNK.min(count - c * STREAM_CHUNK);
            (0..len).map(|_| simulate_sbar(params, r, tail_radius, &mut rng)).collect()
        })
        .collect();
    Ok(parts?.into_iter().flatten().collect())
}

/// Result of [`finite_n_density_check`].
#[derive(Debug, Clone, Serialize)]
pub struct FiniteNReport {
    pub n: usize,
    pub draws: usize,
    pub s_grid: Vec<f64>,
    /// Density of `S^(n)` by Fourier inversion.
    pub finite_n: Vec<f64>,
    /// Monte Carlo estimate of the same density and its standard error.
    pub estimate: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Closed-form density of `S`.
    pub reference: Vec<f64>,
    /// `max_s |finite_n − reference|`.
    pub distance: f64,
    /// `max_s |estimate − reference|`.
    pub mc_distance: f64,
}

/// Default draw count of [`finite_n_density_check`].
pub const FINITE_N_DRAWS: usize = 1 << 14;

/// `1 − E[e^{itX}]` for `X = U^{−γ/d}`, `U` uniform on `(0, m)`.
fn summand_cf_complement(q: f64, m: f64, t: f64) -> Complex64 {
    if t == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let x0 = m.powf(-1.0 / q);
    // ∫₀^∞ (1 − e^{itx}) x^{−1−q} dx = Γ(1 − q)/q · (−it)^q
    let full = Complex64::from_polar(
        statrs::function::gamma::gamma(1.0 - q) / q * t.abs().powf(q),
        -std::f64::consts::FRAC_PI_2 * q * t.signum(),
    );
    // ∫₀^{x₀} (1 − e^{itx}) x^{−1−q} dx = −Σ_{k≥1} (it x₀)^k x₀^{−q} / (k! (k − q))
    let z = Complex64::new(0.0, t * x0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut near = Complex64::new(0.0, 0.0);
    for k in 1..200 {
        let kf = k as f64;
        term *= z / kf;
        let add = term / (kf - q);
        near -= add;
        if add.norm() <= 1e-17 * near.norm() {
            break;
        }
    }
    (full - near * x0.powf(-q)) * (q / m)
}

/// Density of `S^(n)` at each grid point by inverting `E[e^{itX}]^n`.
pub fn finite_n_density(params: &ModelParams, n: usize, s_grid: &[f64]) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let q = 1.0 / params.power();
    let m = n as f64 / params.d2;
    let nf = n as f64;
    let log_cf = |t: f64| (Complex64::new(1.0, 0.0) - summand_cf_complement(q, m, t)).ln() * nf;
    // |E e^{itX}|^n ≤ exp(−n Re(1 − φ)); stop once that is below 1e−18.
    let mut t_max: f64 = 1.0;
    while log_cf(t_max).re > -42.0 {
        t_max *= 1.25;
        if t_max > 1e8 {
            return Err(Error::Convergence {
                what: "finite-n inversion",
                detail: format!("characteristic function of S^({n}) did not decay"),
            });
        }
    }
    s_grid
        .iter()
        .map(|&s| {
            let step = (std::f64::consts::PI / s.abs().max(1e-3)).max(t_max / 2000.0);
            let mut points = vec![0.0];
            while *points.last().unwrap() + step < t_max {
                let next = points.last().unwrap() + step;
                points.push(next);
            }
            points.push(t_max);
            let tol = Tolerance {
                abs: 1e-12,
                rel: 1e-10,
                max_panels: 20_000,
            };
            let v = integrate_adaptive(|t| (log_cf(t) - Complex64::new(0.0, t * s)).exp().re, &points, tol)?;
            Ok(v.value / std::f64::consts::PI)
        })
        .collect()
}

/// Compares the density of `S^(n) = Σ_{i≤n} X_i`, `X_i = U_i^{−γ/d}` with
/// `U_i` uniform on `(0, n/d₂)` (n points uniform in the ball of matching
/// intensity), with the closed-form stable density on `s_grid`.
///
/// The reported distance uses the inverted finite-`n` density. A seeded
/// Monte Carlo estimate is returned alongside as an independent check; it
/// needs no smoothing. With `X` one
/// summand and `S'`, `M'` the sum and maximum of the other `n − 1`,
/// `f(s) = n E[f_X(s − S') 1{s − S' > M'}]`. The indicator forces every other
/// summand below `s`, so they are drawn from `X | X < s` and the estimate is
/// reweighted by `P(X < s)^{n−1}`; the same uniforms serve every grid point.
pub fn finite_n_density_check(params: &ModelParams, n: usize, s_grid: &[f64], seed: u64) -> Result<FiniteNReport> {
    finite_n_density_check_with(params, n, s_grid, FINITE_N_DRAWS, seed)
}

pub fn finite_n_density_check_with(
    params: &ModelParams,
    n: usize,
    s_grid: &[f64],
    draws: usize,
    seed: u64,
) -> Result<FiniteNReport> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n} must be at least 2")));
    }
    if s_grid.is_empty() || draws < 2 {
        return Err(Error::InvalidParameter("empty grid or too few draws".into()));
    }
    if s_grid.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidParameter("grid values must be positive".into()));
    }
    let reference: Vec<f64> = s_grid
        .iter()
        .map(|&s| params.stable_density_s(s))
        .collect::<Result<_>>()?;
    let p = params.power();
    let q = 1.0 / p;
    let m = n as f64 / params.d2;
    let x_min = m.powf(-p);
    let nf = n as f64;
    // Per grid point: lower edge of U given X < s, and the log of P(X < s)^{n−1}.
    let setup: Vec<(f64, f64, f64)> = s_grid
        .iter()
        .map(|&s| {
            let lo = s.powf(-q).min(m);
            let log_w = (nf - 1.0) * (-lo / m).ln_1p();
            (s, lo, log_w)
        })
        .collect();
    let fx = |x: f64| if x > x_min { q / m * x.powf(-q - 1.0) } else { 0.0 };

    let chunks = draws.div_ceil(STREAM_CHUNK);
    let g = s_grid.len();
    let sums: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let len = STREAM_CHUNK.min(draws - c * STREAM_CHUNK);
            let mut s1 = vec![0.0; g];
            let mut s2 = vec![0.0; g];
            let mut uniforms = vec![0.0; n - 1];
            for _ in 0..len {
                for u in uniforms.iter_mut() {
                    *u = rng.random::<f64>();
                }
                for (i, &(s, lo, log_w)) in setup.iter().enumerate() {
                    if lo >= m {
                        continue;
                    }
                    let span = m - lo;
                    let mut total = 0.0;
                    let mut largest: f64 = 0.0;
                    for &u in &uniforms {
                        let x = (lo + span * u).powf(-p);
                        total += x;
                        largest = largest.max(x);
                    }
                    let rest = s - total;
                    let v = if rest > largest { nf * fx(rest) * log_w.exp() } else { 0.0 };
                    s1[i] += v;
                    s2[i] += v * v;
                }
            }
            (s1, s2)
        })
        .collect();
    let mut estimate = vec![0.0; g];
    let mut second = vec![0.0; g];
    for (s1, s2) in &sums {
        for i in 0..g {
            estimate[i] += s1[i];
            second[i] += s2[i];
        }
    }
    let nd = draws as f64;
    let mut std_err = vec![0.0; g];
    for i in 0..g {
        estimate[i] /= nd;
        let var = (second[i] / nd - estimate[i] * estimate[i]).max(0.0);
        std_err[i] = (var / (nd - 1.0)).sqrt();
    }
    let sup = |a: &[f64]| a.iter().zip(&reference).map(|(e, f)| (e - f).abs()).fold(0.0, f64::max);
    let finite_n = finite_n_density(params, n, s_grid)?;
    Ok(FiniteNReport {
        n,
        draws,
        s_grid: s_grid.to_vec(),
        distance: sup(&finite_n),
        mc_distance: sup(&estimate),
        finite_n,
        estimate,
        std_err,
        reference,
    })
}
