//! Samplers for the radii of the point process, unconditionally and given
//! the value of the power sum.
//!
//! Coordinates are `u = r^d`. Under the process they form a rate-`d₂` Poisson
//! process on `(0, ∞)` and each point contributes `x = u^{−p}` with `p = γ/d`.
//! Two chains target the conditional law given the sum:
//!
//! * [`gibbs_conditional`] works with `n` i.i.d. uniform coordinates on
//!   `(0, m)` conditioned on `Σ x_j = s`, the finite model whose `n → ∞`
//!   limit (with `m = n/d₂`) is the process.
//! * [`PoissonGibbs`] targets the process itself. It keeps the `n − 1`
//!   nearest points, the `n`-th point `V` and the far field `F = s − Σ x`,
//!   whose density is the tilted Edgeworth approximation of `S̄^(V^{1/d})`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edgeworth::density_sbar;
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Seeded generator for chain or batch `stream`.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiiSample {
    pub radii: Vec<f64>,
    pub power_sum: f64,
    pub seed: u64,
    pub n: usize,
    pub d: u32,
    pub gamma: f64,
}

impl RadiiSample {
    /// `Σ r_i^{−γ}` recomputed from the radii.
    pub fn recompute_power_sum(&self) -> f64 {
        self.radii.iter().map(|r| r.powf(-self.gamma)).sum()
    }
}

/// The `count` nearest radii, `R_i = Γ_i^{1/d}` with `Γ_i` partial sums of
/// `Exp(d₂)` gaps.
pub fn sample_radii(params: &ModelParams, count: usize, seed: u64) -> Result<RadiiSample> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    let mut rng = chain_rng(seed, 0);
    let radii = sample_radii_with(params, count, &mut rng);
    let power_sum = radii.iter().map(|r| r.powf(-params.gamma)).sum();
    Ok(RadiiSample {
        radii,
        power_sum,
        seed,
        n: count,
        d: params.d,
        gamma: params.gamma,
    })
}

/// [`sample_radii`] on a caller-owned generator.
pub fn sample_radii_with<R: Rng + ?Sized>(params: &ModelParams, count: usize, rng: &mut R) -> Vec<f64> {
    let gap = Exp::new(params.d2).expect("d2 > 0");
    let inv_d = 1.0 / params.d as f64;
    let mut acc = 0.0;
    (0..count)
        .map(|_| {
            acc += gap.sample(rng);
            acc.powf(inv_d)
        })
        .collect()
}

/// Law of a pair `(u_a, u_b)` on the curve `u_a^{−p} + u_b^{−p} = w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CurveMeasure {
    /// Conditional law of two independent uniforms given their contribution
    /// `w`: `x_a` has density proportional to `x_a^{−1−q} (w − x_a)^{−1−q}`.
    #[default]
    Conditional,
    /// Normalized length measure on the curve.
    Arclength,
}

/// Draws `(u₁, u₂)`, `u₁ ≤ u₂ < m`, on the curve `u₁^{−p} + u₂^{−p} = w`
/// where `p = gamma_over_d`.
pub fn pair_resample<R: Rng + ?Sized>(
    gamma_over_d: f64,
    w: f64,
    m: f64,
    measure: CurveMeasure,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let p = gamma_over_d;
    let q = 1.0 / p;
    if !(p > 1.0) || !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("need gamma/d > 1 and m > 0, got {p}, {m}")));
    }
    let x_min = m.powf(-p);
    if !(w > 2.0 * x_min) || !w.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "pair total {w} is not above 2 m^(-gamma/d) = {}",
            2.0 * x_min
        )));
    }
    // Symmetric point u* with 2 u*^{−p} = w.
    let u_star = (w / 2.0).powf(-q);
    let h = |u: f64| (w - u.powf(-p)).max(0.0).powf(-q);
    let u2 = match measure {
        CurveMeasure::Conditional => loop {
            // u₂ ~ U(u*, m) is the truncated Pareto x₂ ∝ x^{−1−q} on (x_min, w/2].
            let u2 = u_star + (m - u_star) * rng.random::<f64>();
            let x2 = u2.powf(-p);
            let accept = (0.5 * w / (w - x2)).powf(1.0 + q);
            if rng.random::<f64>() < accept {
                break u2;
            }
        },
        CurveMeasure::Arclength => {
            let u1_lo = h(m);
            let len2 = m - u_star;
            let len1 = u_star - u1_lo;
            loop {
                let u2 = if rng.random::<f64>() * (len1 + len2) < len2 {
                    u_star + len2 * rng.random::<f64>()
                } else {
                    // The curve is symmetric: u₁ ~ U(h(m), u*) maps to u₂ = h(u₁).
                    h(u1_lo + len1 * rng.random::<f64>())
                };
                let rest = w - u2.powf(-p);
                let slope = rest.powf(-q - 1.0) * u2.powf(-p - 1.0);
                let accept = (1.0 + slope * slope).sqrt() / (1.0 + slope);
                if u2 >= u_star && u2 < m && rng.random::<f64>() < accept {
                    break u2;
                }
            }
        }
    };
    let u1 = h(u2).min(u2);
    Ok((u1, u2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsChainState {
    pub u: Vec<f64>,
    pub s: f64,
    pub sweep_count: usize,
    pub m: f64,
    /// Largest relative constraint drift repaired so far.
    pub max_drift: f64,
}

impl GibbsChainState {
    pub fn constraint(&self, gamma_over_d: f64) -> f64 {
        self.u.iter().map(|u| u.powf(-gamma_over_d)).sum()
    }

    /// Radii `u^{1/d}` in increasing order.
    pub fn sorted_radii(&self, d: u32) -> Vec<f64> {
        sorted_radii(&self.u, d)
    }
}

fn sorted_radii(u: &[f64], d: u32) -> Vec<f64> {
    let mut r: Vec<f64> = u.iter().map(|u| u.powf(1.0 / d as f64)).collect();
    r.sort_by(f64::total_cmp);
    r
}

/// Finite-box chain: `n` coordinates in `(0, m)` with `Σ u_j^{−p} = s`.
#[derive(Debug, Clone)]
pub struct BoxGibbs {
    pub state: GibbsChainState,
    pub measure: CurveMeasure,
    p: f64,
    d: u32,
    rng: ChaCha8Rng,
}

impl BoxGibbs {
    pub fn new(params: &ModelParams, n: usize, m: f64, s: f64, measure: CurveMeasure, rng: ChaCha8Rng) -> Result<Self> {
        let p = params.power();
        if n < 2 {
            return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
        }
        if !(m > 0.0) || !(s > n as f64 * m.powf(-p)) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "s = {s} is infeasible: need s > n m^(-gamma/d) = {}",
                n as f64 * m.powf(-p)
            )));
        }
        let q = 1.0 / p;
        let equal = (n as f64 / s).powf(q);
        let u = if equal < m {
            vec![equal; n]
        } else {
            // Waterfall: all but the last coordinate just inside the box.
            let x_min = m.powf(-p);
            let slack = s / (n as f64 * x_min) - 1.0;
            let x_fill = x_min * (1.0 + (0.5 * slack).min(1e-6));
            let mut u = vec![x_fill.powf(-q); n];
            u[n - 1] = (s - (n - 1) as f64 * x_fill).powf(-q);
            u
        };
        Ok(Self {
            state: GibbsChainState { u, s, sweep_count: 0, m, max_drift: 0.0 },
            measure,
            p,
            d: params.d,
            rng,
        })
    }

    /// `n` random-pair updates followed by the drift repair.
    pub fn sweep(&mut self) -> Result<()> {
        let n = self.state.u.len();
        let mut last = 0;
        for _ in 0..n {
            let a = self.rng.random_range(0..n);
            let mut b = self.rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            let w = self.state.u[a].powf(-self.p) + self.state.u[b].powf(-self.p);
            let (u1, u2) = pair_resample(self.p, w, self.state.m, self.measure, &mut self.rng).map_err(|e| {
                Error::Convergence {
                    what: "pair update",
                    detail: format!("{e}; state {:?}", self.state),
                }
            })?;
            if self.rng.random::<bool>() {
                self.state.u[a] = u1;
                self.state.u[b] = u2;
                last = b;
            } else {
                self.state.u[a] = u2;
                self.state.u[b] = u1;
                last = a;
            }
        }
        self.repair(last);
        self.state.sweep_count += 1;
        Ok(())
    }

    /// Re-solves coordinate `i` so that the constraint holds exactly.
    fn repair(&mut self, i: usize) {
        let s = self.state.s;
        let total = self.state.constraint(self.p);
        let drift = ((total - s) / s).abs();
        self.state.max_drift = self.state.max_drift.max(drift);
        if drift == 0.0 {
            return;
        }
        let xi = s - (total - self.state.u[i].powf(-self.p));
        let ui = xi.powf(-1.0 / self.p);
        if xi > 0.0 && ui < self.state.m {
            self.state.u[i] = ui;
        }
    }

    pub fn sorted_radii(&self) -> Vec<f64> {
        self.state.sorted_radii(self.d)
    }
}

/// Runs the finite-box chain for `sweeps` sweeps from the deterministic start.
pub fn gibbs_conditional(params: &ModelParams, n: usize, m: f64, s: f64, sweeps: usize, seed: u64) -> Result<GibbsChainState> {
    let mut chain = BoxGibbs::new(params, n, m, s, CurveMeasure::default(), chain_rng(seed, 0))?;
    for _ in 0..sweeps {
        chain.sweep()?;
    }
    Ok(chain.state)
}

/// The `n`-point box matching the process density: `m = n/d₂`.
pub fn matched_box(params: &ModelParams, n: usize) -> f64 {
    n as f64 / params.d2
}

/// Exact chain for the radii of the process given `S = s`.
#[derive(Debug, Clone)]
pub struct PoissonGibbs {
    params: ModelParams,
    s: f64,
    /// The `n − 1` nearest points, unordered, all below `v`.
    inner: Vec<f64>,
    v: f64,
    far: f64,
    far_log_density: f64,
    far_order: usize,
    rng: ChaCha8Rng,
    pub sweep_count: usize,
    pub proposals: usize,
    pub accepted: usize,
}

impl PoissonGibbs {
    /// Chain keeping `n` points explicitly; `far_order` is the Edgeworth order
    /// of the far-field density.
    pub fn new(params: &ModelParams, n: usize, s: f64, far_order: usize, rng: ChaCha8Rng) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("need n >= 3, got {n}")));
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!("s = {s} must be positive and finite")));
        }
        let p = params.power();
        let q = 1.0 / p;
        let inner_n = (n - 1) as f64;
        let mut v = n as f64 / params.d2;
        let mut placed = None;
        for _ in 0..200 {
            let r = v.powf(1.0 / params.d as f64);
            let far = params.mu(r).min(0.5 * s);
            let rem = s - far - v.powf(-p);
            if rem > 0.0 {
                let c = (inner_n / rem).powf(q);
                if c < v {
                    placed = Some((c, far));
                    break;
                }
            }
            v *= 1.5;
        }
        let Some((c, _)) = placed else {
            return Err(Error::InvalidParameter(format!("could not place {n} points below s = {s}")));
        };
        let inner = vec![c; n - 1];
        let far = s - inner_n * c.powf(-p) - v.powf(-p);
        let mut chain = Self {
            params: *params,
            s,
            inner,
            v,
            far,
            far_log_density: f64::NEG_INFINITY,
            far_order,
            rng,
            sweep_count: 0,
            proposals: 0,
            accepted: 0,
        };
        chain.far_log_density = chain.log_far_density(far, v);
        Ok(chain)
    }

    fn log_far_density(&self, far: f64, v: f64) -> f64 {
        if !(far > 0.0) {
            return f64::NEG_INFINITY;
        }
        let r = v.powf(1.0 / self.params.d as f64);
        match density_sbar(&self.params, far, r, self.far_order) {
            Ok(e) => e.log_value,
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn metropolis(&mut self, log_new: f64) -> bool {
        self.proposals += 1;
        let log_ratio = log_new - self.far_log_density;
        let ok = log_new > f64::NEG_INFINITY
            && (log_ratio >= 0.0 || self.far_log_density == f64::NEG_INFINITY || self.rng.random::<f64>().ln() < log_ratio);
        if ok {
            self.accepted += 1;
        }
        ok
    }

    /// One sweep: `n − 1` pair updates, `⌈(n − 1)/4⌉` single-point moves
    /// against the far field, and one move of the `n`-th point.
    pub fn sweep(&mut self) -> Result<()> {
        let p = self.params.power();
        let k = self.inner.len();
        for _ in 0..k {
            let a = self.rng.random_range(0..k);
            let mut b = self.rng.random_range(0..k - 1);
            if b >= a {
                b += 1;
            }
            let w = self.inner[a].powf(-p) + self.inner[b].powf(-p);
            let (u1, u2) = pair_resample(p, w, self.v, CurveMeasure::Conditional, &mut self.rng)?;
            if self.rng.random::<bool>() {
                self.inner[a] = u1;
                self.inner[b] = u2;
            } else {
                self.inner[a] = u2;
                self.inner[b] = u1;
            }
        }
        for _ in 0..k.div_ceil(4) {
            let a = self.rng.random_range(0..k);
            let u_new = self.v * self.rng.random::<f64>();
            let far = self.far + self.inner[a].powf(-p) - u_new.powf(-p);
            let log_new = self.log_far_density(far, self.v);
            if self.metropolis(log_new) {
                self.inner[a] = u_new;
                self.far = far;
                self.far_log_density = log_new;
            }
        }
        // The prior law of V given the inner points is max + Exp(d₂).
        let max_inner = self.inner.iter().copied().fold(0.0, f64::max);
        let v_new = max_inner + Exp::new(self.params.d2).expect("d2 > 0").sample(&mut self.rng);
        let far = self.far + self.v.powf(-p) - v_new.powf(-p);
        let log_new = self.log_far_density(far, v_new);
        if self.metropolis(log_new) {
            self.v = v_new;
            self.far = far;
            self.far_log_density = log_new;
        }
        // Absorb rounding into the far field.
        let total: f64 = self.inner.iter().map(|u| u.powf(-p)).sum::<f64>() + self.v.powf(-p);
        self.far = self.s - total;
        self.far_log_density = self.log_far_density(self.far, self.v);
        self.sweep_count += 1;
        Ok(())
    }

    /// Radii of the `n` kept points in increasing order.
    pub fn sorted_radii(&self) -> Vec<f64> {
        let mut r = sorted_radii(&self.inner, self.params.d);
        r.push(self.v.powf(1.0 / self.params.d as f64));
        r
    }

    pub fn far_field(&self) -> f64 {
        self.far
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.proposals.max(1) as f64
    }
}

/// Which chain produces the conditional radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChainKind {
    /// `n` uniform points on `(0, m)`.
    Box { m: f64, measure: CurveMeasure },
    /// The process itself with `n` explicit points.
    Poisson { far_order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n: usize,
    pub kind: ChainKind,
    /// Sweeps discarded before recording; `None` means `100·n`.
    pub burn_in: Option<usize>,
    /// Recorded sweeps per chain.
    pub sweeps: usize,
    pub chains: usize,
    /// Number of nearest radii recorded per sweep.
    pub record: usize,
    pub seed: u64,
}

/// Recorded output of one or more chains.
#[derive(Debug, Clone, Serialize)]
pub struct ChainOutput {
    /// `radii[c][t][i]`: the `i`-th nearest radius of chain `c` at sweep `t`.
    pub radii: Vec<Vec<Vec<f64>>>,
    /// `Σ ln u_j` per chain and sweep.
    pub log_sum: Vec<Vec<f64>>,
    pub acceptance: f64,
    pub max_drift: f64,
}

impl ChainOutput {
    /// Per-chain series of the `i`-th nearest radius (0-based).
    pub fn series(&self, i: usize) -> Vec<Vec<f64>> {
        self.radii.iter().map(|c| c.iter().map(|r| r[i]).collect()).collect()
    }

    /// Effective sample size of the `Σ ln u` trace summed over chains.
    pub fn ess(&self) -> f64 {
        self.log_sum.iter().map(|s| effective_sample_size(s)).sum()
    }

    pub fn total_sweeps(&self) -> usize {
        self.radii.iter().map(Vec::len).sum()
    }
}

/// Runs independent chains (chain `c` on stream `c`) given `S = s`.
pub fn run_chains(params: &ModelParams, s: f64, cfg: &ChainConfig) -> Result<ChainOutput> {
    if cfg.chains == 0 || cfg.sweeps == 0 || cfg.record == 0 || cfg.record > cfg.n {
        return Err(Error::InvalidParameter("chains, sweeps and record must be positive, record <= n".into()));
    }
    let burn = cfg.burn_in.unwrap_or(100 * cfg.n);
    let d = params.d as f64;
    // Per chain: recorded radii, Σ ln u trace, accepted, proposed, drift.
    type Run = (Vec<Vec<f64>>, Vec<f64>, usize, usize, f64);
    let runs: Vec<Result<Run>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let rng = chain_rng(cfg.seed, c as u64);
            let mut radii = Vec::with_capacity(cfg.sweeps);
            let mut log_sum = Vec::with_capacity(cfg.sweeps);
            match cfg.kind {
                ChainKind::Box { m, measure } => {
                    let mut ch = BoxGibbs::new(params, cfg.n, m, s, measure, rng)?;
                    for _ in 0..burn {
                        ch.sweep()?;
                    }
                    for _ in 0..cfg.sweeps {
                        ch.sweep()?;
                        let r = ch.sorted_radii();
                        log_sum.push(r.iter().map(|r| d * r.ln()).sum());
                        radii.push(r[..cfg.record].to_vec());
                    }
                    Ok((radii, log_sum, 0, 0, ch.state.max_drift))
                }
                ChainKind::Poisson { far_order } => {
                    let mut ch = PoissonGibbs::new(params, cfg.n, s, far_order, rng)?;
                    for _ in 0..burn {
                        ch.sweep()?;
                    }
                    for _ in 0..cfg.sweeps {
                        ch.sweep()?;
                        let r = ch.sorted_radii();
                        log_sum.push(r.iter().map(|r| d * r.ln()).sum());
                        radii.push(r[..cfg.record].to_vec());
                    }
                    Ok((radii, log_sum, ch.accepted, ch.proposals, 0.0))
                }
            }
        })
        .collect();
    let mut out = ChainOutput { radii: Vec::new(), log_sum: Vec::new(), acceptance: 0.0, max_drift: 0.0 };
    let (mut acc, mut prop) = (0usize, 0usize);
    for run in runs {
        let (r, l, a, p, drift) = run?;
        out.radii.push(r);
        out.log_sum.push(l);
        acc += a;
        prop += p;
        out.max_drift = out.max_drift.max(drift);
    }
    out.acceptance = if prop > 0 { acc as f64 / prop as f64 } else { 1.0 };
    Ok(out)
}

/// Effective sample size from the initial positive sequence of
/// autocorrelation pairs.
pub fn effective_sample_size(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return n as f64;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0 = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| {
        series[..n - lag]
            .iter()
            .zip(&series[lag..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / (n as f64 * c0)
    };
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n / 2 {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    (n as f64 / tau.max(1.0)).min(n as f64)
}

/// Batch-means standard error of the mean of each chain's series, combined
/// across chains.
pub fn batch_means_se(chains: &[Vec<f64>]) -> (f64, f64) {
    let mut batch_values = Vec::new();
    let mut total = 0.0;
    let mut count = 0usize;
    for c in chains {
        let n = c.len();
        let batches = ((n as f64).sqrt().floor() as usize).max(2).min(n.max(2));
        let size = (n / batches).max(1);
        for b in 0..n / size {
            let chunk = &c[b * size..(b + 1) * size];
            batch_values.push(chunk.iter().sum::<f64>() / size as f64);
        }
        total += c.iter().sum::<f64>();
        count += n;
    }
    let mean = total / count.max(1) as f64;
    let nb = batch_values.len();
    if nb < 2 {
        return (mean, f64::INFINITY);
    }
    let bm = batch_values.iter().sum::<f64>() / nb as f64;
    let var = batch_values.iter().map(|v| (v - bm).powi(2)).sum::<f64>() / (nb - 1) as f64;
    (mean, (var / nb as f64).sqrt())
}

/// Empirical CDF of correlated chains at `x`, with a batch-means standard error.
pub fn chain_cdf(chains: &[Vec<f64>], x: f64) -> (f64, f64) {
    let ind: Vec<Vec<f64>> = chains
        .iter()
        .map(|c| c.iter().map(|&v| if v <= x { 1.0 } else { 0.0 }).collect())
        .collect();
    batch_means_se(&ind)
}

/// Geweke z-score comparing the first 10% and last 50% of a series.
pub fn geweke_z(series: &[f64]) -> f64 {
    let n = series.len();
    let a = &series[..n / 10];
    let b = &series[n / 2..];
    let (ma, sa) = batch_means_se(&[a.to_vec()]);
    let (mb, sb) = batch_means_se(&[b.to_vec()]);
    (ma - mb) / (sa * sa + sb * sb).sqrt()
}

/// Quantile of pooled values by linear interpolation of the order statistics.
pub fn pooled_quantile(chains: &[Vec<f64>], prob: f64) -> f64 {
    let mut all: Vec<f64> = chains.iter().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    let pos = prob.clamp(0.0, 1.0) * (all.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(all.len() - 1);
    all[lo] + (pos - lo as f64) * (all[hi] - all[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominancePoint {
    pub x: f64,
    pub conditional: f64,
    pub conditional_se: f64,
    pub unconditional: f64,
    pub unconditional_se: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub ell: usize,
    pub s: f64,
    /// Comparison of `F_{R_ℓ|S=s}` with `F_{R′_{ℓ−1}}` at the deciles of the conditional sample.
    pub points: Vec<DominancePoint>,
    pub violations: usize,
    /// `a` in the escape radius `(aℓ)^{1/d}`.
    pub a: f64,
    pub escape_probability: f64,
    pub escape_se: f64,
    pub ess: f64,
}

/// Compares the conditional `R_ℓ` (finite-box chain) with the unconditional
/// `R′_{ℓ−1}` at the deciles, and estimates `P(R_ℓ ≤ (aℓ)^{1/d} | S = s)`.
/// `draws` recorded sweeps are split over `chains` chains; for `ℓ = 1` the
/// comparison is against the point mass at zero.
#[allow(clippy::too_many_arguments)]
pub fn dominance_test(
    params: &ModelParams,
    n: usize,
    m: f64,
    s: f64,
    ell: usize,
    a: f64,
    draws: usize,
    seed: u64,
) -> Result<DominanceReport> {
    if ell == 0 || ell > n {
        return Err(Error::InvalidParameter(format!("ell = {ell} outside 1..={n}")));
    }
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("a = {a} must be positive")));
    }
    let chains = 4;
    let cfg = ChainConfig {
        n,
        kind: ChainKind::Box { m, measure: CurveMeasure::Conditional },
        burn_in: None,
        sweeps: draws.div_ceil(chains),
        chains,
        record: ell,
        seed,
    };
    let out = run_chains(params, s, &cfg)?;
    let cond = out.series(ell - 1);

    let mut rng = chain_rng(seed, u64::MAX);
    let uncond: Vec<f64> = (0..draws)
        .map(|_| if ell >= 2 { sample_radii_with(params, ell - 1, &mut rng)[ell - 2] } else { 0.0 })
        .collect();
    let un_n = uncond.len() as f64;

    let mut points = Vec::with_capacity(9);
    for dec in 1..=9 {
        let x = pooled_quantile(&cond, dec as f64 / 10.0);
        let (fc, sc) = chain_cdf(&cond, x);
        let fu = uncond.iter().filter(|&&v| v <= x).count() as f64 / un_n;
        let su = (fu * (1.0 - fu) / un_n).sqrt();
        let violation = fc > fu + 3.0 * (sc * sc + su * su).sqrt();
        points.push(DominancePoint {
            x,
            conditional: fc,
            conditional_se: sc,
            unconditional: fu,
            unconditional_se: su,
            violation,
        });
    }
    let escape_r = (a * ell as f64).powf(1.0 / params.d as f64);
    let (escape_probability, escape_se) = chain_cdf(&cond, escape_r);
    Ok(DominanceReport {
        ell,
        s,
        violations: points.iter().filter(|p| p.violation).count(),
        points,
        a,
        escape_probability,
        escape_se,
        ess: out.ess(),
    })
}

/// `P(R_ℓ ≤ (aℓ)^{1/d} | S = s)` for each `ℓ` in `ells` from one set of
/// finite-box chains, with batch-means standard errors.
#[allow(clippy::too_many_arguments)]
pub fn escape_profile(
    params: &ModelParams,
    n: usize,
    m: f64,
    s: f64,
    ells: &[usize],
    a: f64,
    draws: usize,
    seed: u64,
) -> Result<Vec<(usize, f64, f64)>> {
    let top = ells.iter().copied().max().unwrap_or(0);
    if top == 0 || top > n || ells.contains(&0) {
        return Err(Error::InvalidParameter(format!("ell values must lie in 1..={n}")));
    }
    let chains = 4;
    let cfg = ChainConfig {
        n,
        kind: ChainKind::Box { m, measure: CurveMeasure::Conditional },
        burn_in: None,
        sweeps: draws.div_ceil(chains),
        chains,
        record: top,
        seed,
    };
    let out = run_chains(params, s, &cfg)?;
    Ok(ells
        .iter()
        .map(|&l| {
            let x = (a * l as f64).powf(1.0 / params.d as f64);
            let (p, se) = chain_cdf(&out.series(l - 1), x);
            (l, p, se)
        })
        .collect())
}
