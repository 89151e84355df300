//! Edgeworth expansion of the tilted variable and the resulting density
//! approximation `f_Y(y) ≈ ν̃_k · e^{−ξy} φ_Y(−ξ)`.
//!
//! The coefficient `c̃_{j,ℓ}` sums `∏ κ̃_{n_i}/n_i!` over ordered tuples
//! `(n_1, …, n_ℓ)` with `n_i ≥ 3` and `Σ (n_i − 2) = j`, divided by `ℓ!`.
//! Tuples are counted by a convolution recursion in `(j, ℓ)` instead of being
//! listed.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::special::{hermite_at_zero, INV_SQRT_2PI};
use crate::tilt::{solve_xi, TiltState, DEFAULT_TOL};

/// Largest supported expansion order.
pub const MAX_ORDER: usize = 30;

/// Default expansion order.
pub const DEFAULT_ORDER: usize = 2;

#[derive(Debug, Clone, Serialize)]
pub struct EdgeworthTable {
    pub k: usize,
    /// `c[j][ℓ]` for `0 ≤ ℓ ≤ j ≤ k`; entries with `ℓ = 0` are unused.
    pub c: Vec<Vec<f64>>,
    pub nf_k: f64,
    pub state: TiltState,
}

impl EdgeworthTable {
    /// `c̃_{j,ℓ}` (zero outside `1 ≤ ℓ ≤ j ≤ k`).
    pub fn coefficient(&self, j: usize, ell: usize) -> f64 {
        if ell == 0 || ell > j || j > self.k {
            return 0.0;
        }
        self.c[j][ell]
    }
}

/// Builds `c̃_{j,ℓ}` for `j ≤ k` and evaluates `ν̃_k`. Missing tilted
/// cumulants up to order `k + 2` are filled in on a copy of `state`.
pub fn build_coefficients(state: &TiltState, k: usize) -> Result<EdgeworthTable> {
    if k > MAX_ORDER {
        return Err(Error::InvalidParameter(format!(
            "Edgeworth order {k} exceeds the maximum {MAX_ORDER}"
        )));
    }
    let mut state = state.clone();
    if state.n_max() < k + 2 {
        state = state.with_cumulants(k + 2)?;
    }

    // a[m] = κ̃_{m+2} / (m+2)!, m ≥ 1
    let mut a = vec![0.0; k + 1];
    let mut fact = 2.0;
    for (m, am) in a.iter_mut().enumerate().skip(1) {
        fact *= (m + 2) as f64;
        *am = state.tkappa(m + 2).expect("cumulants filled") / fact;
    }

    // p[ℓ][j]: sum over ordered ℓ-tuples of the products, before the 1/ℓ!.
    let mut p = vec![vec![0.0; k + 1]; k + 1];
    p[0][0] = 1.0;
    for ell in 1..=k {
        for j in ell..=k {
            let mut s = 0.0;
            for m in 1..=(j - (ell - 1)) {
                s += a[m] * p[ell - 1][j - m];
            }
            p[ell][j] = s;
        }
    }
    let mut c = vec![vec![0.0; k + 1]; k + 1];
    let mut ell_fact = 1.0;
    for ell in 1..=k {
        ell_fact *= ell as f64;
        for j in ell..=k {
            c[j][ell] = p[ell][j] / ell_fact;
        }
    }

    let nf_k = nf_from_coefficients(&c, k, state.rho, state.tkappa2());
    Ok(EdgeworthTable { k, c, nf_k, state })
}

/// `ν̃_k` from a coefficient table. Odd `j` are skipped outright because
/// every Hermite value they touch is zero, which makes `ν̃_{2m+1} = ν̃_{2m}`
/// hold bit for bit.
fn nf_from_coefficients(c: &[Vec<f64>], k: usize, rho: f64, tk2: f64) -> f64 {
    let mut bracket = 1.0;
    for j in (2..=k).step_by(2) {
        let mut inner = 0.0;
        for (ell, &cjl) in c[j].iter().enumerate().take(j + 1).skip(1) {
            let h = hermite_at_zero((j + 2 * ell) as u32);
            inner += cjl * tk2.powf(-(j as f64 / 2.0 + ell as f64)) * h;
        }
        bracket += rho.powi(-(j as i32)) * inner;
    }
    INV_SQRT_2PI / tk2.sqrt() * bracket
}

/// `ν̃_k` of a built table.
pub fn nf_k(table: &EdgeworthTable) -> f64 {
    table.nf_k
}

/// A density value with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityEval {
    pub value: f64,
    /// `ln(ν̃_k) + ln(e^{−ξy}φ(−ξ))`, or `−∞` when `ν̃_k ≤ 0`.
    pub log_value: f64,
    pub nf_k: f64,
    pub log_prefactor: f64,
    pub xi: f64,
    /// Whether `r^{d/2} ≥ √k`, and additionally `r^{d/2} ≥ k` when `y ≤ 0`.
    pub valid: bool,
}

/// Whether the order `k` is covered at `(y, ρ)` with unit constants.
pub fn order_is_covered(y: f64, rho: f64, k: usize) -> bool {
    let kf = k as f64;
    if y <= 0.0 {
        rho >= kf.sqrt().max(kf)
    } else {
        rho >= kf.sqrt()
    }
}

/// Order-`k` Edgeworth approximation of the density of `Y^(r)` at `y`.
pub fn density_y(params: &ModelParams, y: f64, r: f64, k: usize) -> Result<DensityEval> {
    let state = solve_xi(params, y, r, DEFAULT_TOL)?;
    let table = build_coefficients(&state, k)?;
    Ok(eval_from_table(&table))
}

/// Evaluates the density approximation carried by a table.
pub fn eval_from_table(table: &EdgeworthTable) -> DensityEval {
    let s = &table.state;
    let nf = table.nf_k;
    let log_value = if nf > 0.0 {
        nf.ln() + s.log_prefactor
    } else {
        f64::NEG_INFINITY
    };
    DensityEval {
        value: log_value.exp(),
        log_value,
        nf_k: nf,
        log_prefactor: s.log_prefactor,
        xi: s.xi,
        valid: nf > 0.0 && order_is_covered(s.y, s.rho, table.k),
    }
}

/// Order-`k` approximation of the density of `S̄^(r)` at `sbar`.
pub fn density_sbar(params: &ModelParams, sbar: f64, r: f64, k: usize) -> Result<DensityEval> {
    if !(sbar > 0.0) {
        return Err(Error::OutsideSupport {
            y: sbar,
            lower_edge: 0.0,
        });
    }
    let sigma = params.sigma(r);
    let y = (sbar - params.mu(r)) / sigma;
    let mut e = density_y(params, y, r, k)?;
    e.value /= sigma;
    e.log_value -= sigma.ln();
    Ok(e)
}

/// Shape of the relative-error bound with caller-supplied constants.
pub fn error_bound_form(params: &ModelParams, state: &TiltState, k: usize, c2: f64, c3: f64) -> f64 {
    let kf = k as f64;
    let lead = c2 * c3.powi(k as i32) * kf.powf(kf / 2.0);
    let tk2 = state.tkappa2();
    let base = if state.y >= 0.0 {
        1.0 / (tk2.sqrt() * state.rho)
    } else {
        tk2.powf(1.0 / params.d1 - 0.5) / state.rho
    };
    lead * base.powi(k as i32 + 1)
}
