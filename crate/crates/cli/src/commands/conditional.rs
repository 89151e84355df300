use clap::{Args, ValueEnum};
use serde_json::json;
use shotnoise::conditional::{conditional_cdf_grid, normal_baseline_cdf_grid, ConditionalConfig, FsSource};
use shotnoise::sampler::{chain_cdf, ChainConfig, ChainKind, CurveMeasure};
use shotnoise::ModelParams;

use crate::error::CliError;
use crate::grid::parse_grid;
use crate::table::{Cell, Table};
use crate::Common;

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Denominator {
    /// Closed-form density of the total, where one exists.
    Closed,
    /// Mass of the scheme itself.
    Scheme,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ChainChoice {
    /// Explicit points below a moving radius plus an Edgeworth far field.
    Poisson,
    /// Uniform points in a fixed box.
    Box,
}

#[derive(Args, Debug, Clone)]
pub struct GibbsOpts {
    /// Recorded sweeps per chain for the Gibbs reference; 0 disables it.
    #[arg(long, default_value_t = 0)]
    pub gibbs_draws: usize,
    #[arg(long, default_value_t = 64)]
    pub gibbs_n: usize,
    #[arg(long, value_enum, default_value_t = ChainChoice::Poisson)]
    pub gibbs_chain: ChainChoice,
    #[arg(long, default_value_t = 1)]
    pub gibbs_chains: usize,
    /// Sweeps discarded first; defaults to 100 times the point count.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Box size for the box chain; defaults to the size matching the point count.
    #[arg(long, allow_negative_numbers = true)]
    pub box_size: Option<f64>,
    /// Edgeworth order of the far field in the Poisson chain.
    #[arg(long, default_value_t = 4)]
    pub far_order: usize,
}

impl GibbsOpts {
    pub fn chain_config(&self, params: &ModelParams, record: usize, sweeps: usize, seed: u64) -> ChainConfig {
        let kind = match self.gibbs_chain {
            ChainChoice::Poisson => ChainKind::Poisson { far_order: self.far_order },
            ChainChoice::Box => ChainKind::Box {
                m: self.box_size.unwrap_or_else(|| shotnoise::sampler::matched_box(params, self.gibbs_n)),
                measure: CurveMeasure::Conditional,
            },
        };
        ChainConfig {
            n: self.gibbs_n,
            kind,
            burn_in: self.burn_in,
            sweeps,
            chains: self.gibbs_chains,
            record,
            seed,
        }
    }
}

#[derive(Args, Debug)]
pub struct ConditionalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Observed total.
    #[arg(long, allow_negative_numbers = true)]
    pub s: f64,
    /// Radii at which the CDF is reported; defaults to 41 points from the support edge to three times it.
    #[arg(long)]
    pub r: Option<String>,
    #[arg(long, default_value_t = 4)]
    pub ell: usize,
    /// Edgeworth order; defaults to the largest order the cutoff supports.
    #[arg(long)]
    pub k: Option<usize>,
    /// Cutoff constant; defaults to 0.8/d2.
    #[arg(long, allow_negative_numbers = true)]
    pub a0: Option<f64>,
    #[arg(long = "fS", value_enum, default_value_t = Denominator::Closed)]
    pub fs: Denominator,
    /// Add the Gaussian-kernel baseline.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1e-6)]
    pub rel_tol: f64,
    #[command(flatten)]
    pub gibbs: GibbsOpts,
}

pub fn run(a: &ConditionalArgs) -> Result<Table, CliError> {
    let params = a.common.params()?;
    if !(a.s > 0.0) {
        return Err(CliError::Domain(format!("s = {} must be positive", a.s)));
    }
    let edge = a.s.powf(-1.0 / params.gamma);
    let rs = match &a.r {
        Some(text) => parse_grid(text)?,
        None => (0..=40).map(|i| edge * (1.0 + i as f64 / 20.0)).collect(),
    };
    let a0 = a.a0.unwrap_or(0.8 / params.d2);
    let mut cfg = ConditionalConfig::new(&params, a.ell, a0).map_err(|e| CliError::at("configuration", e))?;
    if let Some(k) = a.k {
        cfg = cfg.with_k(k);
    }
    cfg.rel_tol = a.rel_tol;
    cfg.seed = a.common.seed;
    cfg.validate(&params).map_err(|e| CliError::at("configuration", e))?;
    let fs = match a.fs {
        Denominator::Closed => FsSource::ClosedForm,
        Denominator::Scheme => FsSource::Scheme,
    };

    let scheme = conditional_cdf_grid(&params, &rs, a.s, &cfg, fs).map_err(|e| CliError::at(format!("s = {}", a.s), e))?;
    let baseline = if a.baseline {
        Some(normal_baseline_cdf_grid(&params, &rs, a.s, a.ell).map_err(|e| CliError::at("baseline", e))?)
    } else {
        None
    };
    let gibbs = if a.gibbs.gibbs_draws > 0 {
        let cc = a.gibbs.chain_config(&params, 1, a.gibbs.gibbs_draws, a.common.seed);
        let out = shotnoise::sampler::run_chains(&params, a.s, &cc).map_err(|e| CliError::at("gibbs", e))?;
        Some((out.series(0), out.ess()))
    } else {
        None
    };

    let mut columns = vec!["r".to_string(), "cdf_scheme".into(), "cdf_scheme_clamped".into(), "cdf_scheme_abs_err".into()];
    if baseline.is_some() {
        columns.push("cdf_normal_baseline".into());
    }
    if gibbs.is_some() {
        columns.push("cdf_gibbs".into());
        columns.push("cdf_gibbs_se".into());
    }
    let mut table = Table::new("conditional", columns);
    table
        .meta("s", json!(a.s))
        .meta("ell", json!(cfg.ell))
        .meta("k", json!(cfg.k))
        .meta("a0", json!(a0))
        .meta("fS", json!(format!("{:?}", a.fs).to_lowercase()))
        .meta("rel_tol", json!(cfg.rel_tol));
    if let Some((_, ess)) = &gibbs {
        table
            .meta("gibbs_n", json!(a.gibbs.gibbs_n))
            .meta("gibbs_draws", json!(a.gibbs.gibbs_draws))
            .meta("gibbs_chains", json!(a.gibbs.gibbs_chains))
            .meta("gibbs_ess", json!(ess));
    }
    for (i, est) in scheme.iter().enumerate() {
        let mut row: Vec<Cell> = vec![rs[i].into(), est.value.into(), est.clamped.into(), est.abs_err.into()];
        if let Some(b) = &baseline {
            row.push(b[i].clamped.into());
        }
        if let Some((series, _)) = &gibbs {
            let (p, se) = chain_cdf(series, rs[i]);
            row.push(p.into());
            row.push(se.into());
        }
        table.push(row);
    }
    Ok(table)
}
