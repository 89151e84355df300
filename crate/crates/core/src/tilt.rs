//! Exponential tilting of the standardized tail sum `Y^(r)`.
//!
//! For a target value `y` the tilt parameter `ξ` is the root of the mean-shift
//! equation. Writing `x = ξ/ρ` and `t = y/ρ`, the equation no longer involves
//! `r`:
//!
//! ```text
//! t = d₁ ∫₀¹ (e^{xu} − 1) u^{−d/γ} du = d₁ I(1 − d/γ, x) − d₃
//! ```
//!
//! The right-hand side is increasing and convex in `x` and sweeps `(−d₃, ∞)`.
//! The solver works on `ln I(1 − d/γ, x)`, which is close to linear in `x` on
//! the upper side and close to linear in `ln(−x)` on the lower side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::special::{kernel_i, kernel_i_ln};

/// Default residual tolerance (relative, in `y` units) of [`solve_xi`].
pub const DEFAULT_TOL: f64 = 1e-12;

/// Relative width of the rejected sliver above the lower support edge.
pub const SUPPORT_GUARD: f64 = 1e-9;

/// Largest order of tilted cumulant served.
pub const MAX_TILTED_ORDER: usize = 64;

/// A solved tilt for the point `(y, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltState {
    pub params: ModelParams,
    pub y: f64,
    pub r: f64,
    pub rho: f64,
    /// The scaled tilt `ξ/ρ`.
    pub x: f64,
    pub xi: f64,
    /// Tilted cumulants; `tkappa[n − 2]` holds `κ̃_n`.
    pub tkappa: Vec<f64>,
    /// `ln(e^{−ξy} φ_{Y^(r)}(−ξ))`.
    pub log_prefactor: f64,
}

/// Lower support edge `−d₃ ρ` of `Y^(r)`.
pub fn lower_edge(params: &ModelParams, r: f64) -> f64 {
    -params.d3 * params.rho(r)
}

/// Series of `∫₀¹ (e^{xu} − 1) u^{−β} du = Σ_{n≥1} xⁿ / (n! (n + 1 − β))`.
fn shift_series(beta: f64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for n in 1..200 {
        let nf = n as f64;
        term *= x / nf;
        let add = term / (nf + 1.0 - beta);
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Mean of the tilted variable in `ρ` units: `d₁ (I(1−β, x) − 1/(1−β))`.
pub fn tilted_mean_scaled(params: &ModelParams, x: f64) -> Result<f64> {
    let beta = params.beta();
    if x.abs() <= 1.0 {
        return Ok(params.d1 * shift_series(beta, x));
    }
    Ok(params.d1 * kernel_i(1.0 - beta, x)?.value - params.d3)
}

/// Scaled log-prefactor `h(x)`, so that `ln(e^{−ξy} φ(−ξ)) = ρ² h(ξ/ρ)`:
/// `h(x) = (d₁/β) [1 − eˣ + (1 − β) x I(1 − β, x)]`.
pub fn log_prefactor_scaled(params: &ModelParams, x: f64) -> Result<f64> {
    let beta = params.beta();
    if x.abs() <= 1.0 {
        // d₁ Σ_{n≥2} (1 − n) xⁿ / (n! (n − β))
        let mut term = x;
        let mut sum = 0.0;
        for n in 2..200 {
            let nf = n as f64;
            term *= x / nf;
            let add = (1.0 - nf) * term / (nf - beta);
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        return Ok(params.d1 * sum);
    }
    let i = kernel_i(1.0 - beta, x)?.value;
    Ok(params.d1 / beta * (-x.exp_m1() + (1.0 - beta) * x * i))
}

/// Solves the tilt equation at `(y, r)` so that the residual
/// `|ρ · tilted_mean_scaled(ξ/ρ) − y| ≤ tol · max(1, |y|)`.
///
/// The returned state carries `κ̃_2` only; see [`TiltState::with_cumulants`].
pub fn solve_xi(params: &ModelParams, y: f64, r: f64, tol: f64) -> Result<TiltState> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("radius r = {r} must be positive")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    if !y.is_finite() {
        return Err(Error::InvalidParameter(format!("y = {y} must be finite")));
    }
    let rho = params.rho(r);
    let edge = -params.d3 * rho;
    if y <= edge * (1.0 - SUPPORT_GUARD) {
        return Err(Error::OutsideSupport { y, lower_edge: edge });
    }
    let x = if y == 0.0 {
        0.0
    } else {
        solve_scaled(params, y / rho, rho, y, tol)?
    };
    let mut state = TiltState {
        params: *params,
        y,
        r,
        rho,
        x,
        xi: x * rho,
        tkappa: Vec::new(),
        log_prefactor: rho * rho * log_prefactor_scaled(params, x)?,
    };
    state.fill_cumulants(2)?;
    Ok(state)
}

/// Root of `ln I(1−β, x) = ln((t + d₃)/d₁)` by safeguarded Newton.
fn solve_scaled(params: &ModelParams, t: f64, rho: f64, y: f64, tol: f64) -> Result<f64> {
    let a = 1.0 - params.beta();
    let target = ((t + params.d3) / params.d1).ln();
    let residual = |x: f64| -> Result<f64> { Ok(rho * (tilted_mean_scaled(params, x)? - t)) };
    let slope = |x: f64| -> Result<f64> {
        // d/dx ln I(a, x) = I(a+1, x) / I(a, x)
        Ok((kernel_i_ln(a + 1.0, x)? - kernel_i_ln(a, x)?).exp())
    };
    let accept = tol * y.abs().max(1.0);

    if t > 0.0 {
        // Variable x on [0, hi].
        let f = |x: f64| -> Result<f64> { Ok(kernel_i_ln(a, x)? - target) };
        let mut lo = 0.0;
        let mut hi = 1.0f64;
        while f(hi)? < 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > crate::special::KERNEL_MAX_X {
                return Err(Error::Range(format!("tilt for y = {y} exceeds the kernel range")));
            }
        }
        let x0 = t.min(hi).max(lo);
        newton_bracketed(
            |x| Ok((f(x)?, slope(x)?)),
            lo,
            hi,
            x0,
            |x| Ok(residual(x)?.abs() <= accept),
        )
        .map_err(|e| annotate(e, y, rho))
    } else {
        // Variable w = ln(−x); F(w) = target − ln I(a, −e^w) increases in w.
        let f = |w: f64| -> Result<f64> { Ok(target - kernel_i_ln(a, -w.exp())?) };
        let df = |w: f64| -> Result<f64> { Ok(w.exp() * slope(-w.exp())?) };
        let guess = (-t).max(1e-300).ln();
        let (mut lo, mut hi) = (guess - 1.0, guess + 1.0);
        let mut step = 1.0;
        while f(lo)? > 0.0 {
            hi = lo;
            step *= 2.0;
            lo -= step;
        }
        step = 1.0;
        while f(hi)? < 0.0 {
            lo = hi;
            step *= 2.0;
            hi += step;
            if hi > 700.0 {
                return Err(Error::Convergence {
                    what: "tilt bracket",
                    detail: format!("no lower-tail bracket for y = {y}, last [{lo}, {hi}]"),
                });
            }
        }
        let w = newton_bracketed(
            |w| Ok((f(w)?, df(w)?)),
            lo,
            hi,
            guess.clamp(lo, hi),
            |w| Ok(residual(-w.exp())?.abs() <= accept),
        )
        .map_err(|e| annotate(e, y, rho))?;
        Ok(-w.exp())
    }
}

fn annotate(e: Error, y: f64, rho: f64) -> Error {
    match e {
        Error::Convergence { what, detail } => Error::Convergence {
            what,
            detail: format!("{detail} (y = {y}, rho = {rho})"),
        },
        other => other,
    }
}

/// Newton iteration for an increasing function, kept inside `[lo, hi]` with
/// bisection whenever a step leaves the bracket.
fn newton_bracketed<F, D>(mut f_df: F, mut lo: f64, mut hi: f64, x0: f64, mut done: D) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
    D: FnMut(f64) -> Result<bool>,
{
    let mut x = x0;
    for _ in 0..300 {
        let (fx, dfx) = f_df(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - fx / dfx;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        let scale = x.abs().max(next.abs()).max(1e-300);
        let settled = (next - x).abs() <= 1e-14 * scale || hi - lo <= 4.0 * f64::EPSILON * scale;
        x = next;
        if settled && done(x)? {
            return Ok(x);
        }
    }
    if done(x)? {
        return Ok(x);
    }
    Err(Error::Convergence {
        what: "tilt equation",
        detail: format!("Newton/bisection stalled in bracket [{lo}, {hi}]"),
    })
}

impl TiltState {
    /// Returns the state with `κ̃_2 … κ̃_{n_max}` populated.
    pub fn with_cumulants(mut self, n_max: usize) -> Result<Self> {
        self.fill_cumulants(n_max)?;
        Ok(self)
    }

    fn fill_cumulants(&mut self, n_max: usize) -> Result<()> {
        if !(2..=MAX_TILTED_ORDER).contains(&n_max) {
            return Err(Error::InvalidParameter(format!(
                "tilted cumulant order {n_max} outside 2..={MAX_TILTED_ORDER}"
            )));
        }
        let beta = self.params.beta();
        for n in self.tkappa.len() + 2..=n_max {
            let a = n as f64 - beta;
            let v = if self.x == 0.0 {
                1.0 / a
            } else {
                kernel_i(a, self.x)?.value
            };
            self.tkappa.push(self.params.d1 * v);
        }
        Ok(())
    }

    /// `κ̃_n`, if populated.
    pub fn tkappa(&self, n: usize) -> Option<f64> {
        n.checked_sub(2).and_then(|i| self.tkappa.get(i).copied())
    }

    pub fn tkappa2(&self) -> f64 {
        self.tkappa[0]
    }

    /// Highest populated cumulant order.
    pub fn n_max(&self) -> usize {
        self.tkappa.len() + 1
    }

    /// `ln(e^{−ξy} φ_{Y^(r)}(−ξ))`.
    pub fn log_prefactor(&self) -> f64 {
        self.log_prefactor
    }

    /// Residual of the tilt equation in `y` units.
    pub fn residual(&self) -> Result<f64> {
        Ok(self.rho * tilted_mean_scaled(&self.params, self.x)? - self.y)
    }
}

/// Populates `κ̃_2 … κ̃_{n_max}`, with `κ̃_n = d₁ I(n − d/γ, ξ/ρ)`.
pub fn tilted_cumulants(state: TiltState, n_max: usize) -> Result<TiltState> {
    state.with_cumulants(n_max)
}

/// Solves the tilt with the default tolerance and fills cumulants to `n_max`.
pub fn tilt(params: &ModelParams, y: f64, r: f64, n_max: usize) -> Result<TiltState> {
    solve_xi(params, y, r, DEFAULT_TOL)?.with_cumulants(n_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::psi0;
    use approx::assert_relative_eq;

    fn planar() -> ModelParams {
        ModelParams::new(2, 4.0).unwrap()
    }

    #[test]
    fn zero_target_gives_zero_tilt() {
        let p = planar();
        for r in [0.5, 1.0, 2.0, 8.0] {
            let s = tilt(&p, 0.0, r, 6).unwrap();
            assert_eq!(s.xi, 0.0);
            assert_eq!(s.log_prefactor, 0.0);
            assert_eq!(s.tkappa2(), 1.0);
            assert_relative_eq!(s.tkappa(3).unwrap(), 0.6, max_relative = 1e-15);
            assert_relative_eq!(s.tkappa(4).unwrap(), 1.5 / 3.5, max_relative = 1e-15);
        }
    }

    #[test]
    fn unit_variance_at_zero_tilt_for_all_models() {
        for (d, g) in [(1, 1.3), (1, 2.0), (2, 2.2), (2, 9.0), (3, 4.5)] {
            let p = ModelParams::new(d, g).unwrap();
            let s = tilt(&p, 0.0, 1.0, 2).unwrap();
            assert_relative_eq!(s.tkappa2(), 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn support_edge_rejected() {
        let p = planar();
        assert!(matches!(
            solve_xi(&p, -6.1, 2.0, DEFAULT_TOL),
            Err(Error::OutsideSupport { .. })
        ));
        assert!(solve_xi(&p, -6.0, 2.0, DEFAULT_TOL).is_err());
        let s = solve_xi(&p, -6.0 * (1.0 - 1e-8), 2.0, DEFAULT_TOL).unwrap();
        assert!(s.xi < 0.0 && s.log_prefactor < -100.0);
    }

    #[test]
    fn residual_small_across_range() {
        let p = planar();
        for r in [0.3, 1.0, 2.0, 5.0] {
            let edge = lower_edge(&p, r);
            for frac in [0.999_999, 0.99, 0.5, 0.1, 1e-6] {
                let y = edge * frac;
                let s = solve_xi(&p, y, r, DEFAULT_TOL).unwrap();
                assert!(s.residual().unwrap().abs() <= 1e-12 * y.abs().max(1.0));
            }
            for y in [1e-8, 0.1, 1.0, 10.0, 300.0] {
                let s = solve_xi(&p, y, r, DEFAULT_TOL).unwrap();
                assert!(s.residual().unwrap().abs() <= 1e-12 * y.max(1.0), "y={y} r={r}");
            }
        }
    }

    #[test]
    fn sign_and_variance_ordering() {
        let p = planar();
        for y in [-3.0, -0.5, 0.5, 3.0] {
            let s = tilt(&p, y, 2.0, 8).unwrap();
            assert_eq!(s.xi.signum(), y.signum());
            if y > 0.0 {
                assert!(s.tkappa2() > 1.0);
            } else {
                assert!(s.tkappa2() < 1.0);
            }
            for w in s.tkappa.windows(2) {
                assert!(w[0] >= w[1] && w[1] > 0.0);
            }
        }
    }

    #[test]
    fn prefactor_matches_direct_formula() {
        let p = planar();
        for (y, r) in [(1.0, 2.0), (-2.0, 2.0), (4.0, 4.0), (-1.0, 1.0), (0.3, 8.0)] {
            let s = solve_xi(&p, y, r, DEFAULT_TOL).unwrap();
            let direct = -s.xi * y + p.d1 * s.rho * s.rho * psi0(&p, -s.x).unwrap();
            assert_relative_eq!(s.log_prefactor, direct, max_relative = 1e-11, epsilon = 1e-13);
            assert!(s.log_prefactor <= 0.0);
        }
    }
}
