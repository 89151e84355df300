use clap::{Args, Subcommand};
use serde_json::json;
use shotnoise::oracle::{default_tail_radius, simulate_sbar_many};
use shotnoise::sampler::{chain_rng, matched_box, run_chains, sample_radii_with, ChainConfig, ChainKind, CurveMeasure};

use super::conditional::ChainChoice;
use crate::error::CliError;
use crate::table::{Cell, Table};
use crate::Common;

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(subcommand)]
    pub what: SampleKind,
}

#[derive(Subcommand, Debug)]
pub enum SampleKind {
    /// Nearest radii of the unconditioned process.
    Radii(RadiiArgs),
    /// Far field beyond a radius, simulated out to a truncation radius.
    Sbar(SbarArgs),
    /// Radii conditioned on the total, from a Gibbs chain.
    Gibbs(GibbsArgs),
}

#[derive(Args, Debug)]
pub struct RadiiArgs {
    #[command(flatten)]
    pub common: Common,
    /// Radii per draw.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub draws: usize,
}

#[derive(Args, Debug)]
pub struct SbarArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_negative_numbers = true)]
    pub r: f64,
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    /// Truncation radius; the mean of the remainder is added.
    #[arg(long, allow_negative_numbers = true)]
    pub tail_radius: Option<f64>,
}

#[derive(Args, Debug)]
pub struct GibbsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_negative_numbers = true)]
    pub s: f64,
    /// Explicit points carried by the chain.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub sweeps: usize,
    /// Nearest radii reported per sweep.
    #[arg(long, default_value_t = 4)]
    pub record: usize,
    #[arg(long, value_enum, default_value_t = ChainChoice::Poisson)]
    pub chain: ChainChoice,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub box_size: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub far_order: usize,
}

impl SampleArgs {
    pub fn common(&self) -> &Common {
        match &self.what {
            SampleKind::Radii(a) => &a.common,
            SampleKind::Sbar(a) => &a.common,
            SampleKind::Gibbs(a) => &a.common,
        }
    }
}

pub fn run(a: &SampleArgs) -> Result<Table, CliError> {
    match &a.what {
        SampleKind::Radii(a) => radii(a),
        SampleKind::Sbar(a) => sbar(a),
        SampleKind::Gibbs(a) => gibbs(a),
    }
}

fn radii(a: &RadiiArgs) -> Result<Table, CliError> {
    let params = a.common.params()?;
    if a.count == 0 || a.draws == 0 {
        return Err(CliError::Domain("count and draws must be positive".into()));
    }
    let mut columns = vec!["draw".to_string()];
    columns.extend((1..=a.count).map(|i| format!("r{i}")));
    columns.push("power_sum".into());
    let mut table = Table::new("sample radii", columns);
    table.meta("count", json!(a.count)).meta("draws", json!(a.draws));
    for draw in 0..a.draws {
        let mut rng = chain_rng(a.common.seed, draw as u64);
        let r = sample_radii_with(&params, a.count, &mut rng);
        let sum: f64 = r.iter().map(|&x| x.powf(-params.gamma)).sum();
        let mut row: Vec<Cell> = vec![draw.into()];
        row.extend(r.into_iter().map(Cell::from));
        row.push(sum.into());
        table.push(row);
    }
    Ok(table)
}

fn sbar(a: &SbarArgs) -> Result<Table, CliError> {
    let params = a.common.params()?;
    if !(a.r > 0.0) || a.draws == 0 {
        return Err(CliError::Domain("r and draws must be positive".into()));
    }
    let tail = a.tail_radius.unwrap_or_else(|| default_tail_radius(&params, a.r));
    let draws = simulate_sbar_many(&params, a.r, tail, a.draws, a.common.seed).map_err(|e| CliError::at("sbar", e))?;
    let (mu, sigma) = (params.mu(a.r), params.sigma(a.r));
    let mut table = Table::new("sample sbar", vec!["draw".into(), "sbar".into(), "y".into()]);
    table.meta("r", json!(a.r)).meta("tail_radius", json!(tail));
    for (i, x) in draws.into_iter().enumerate() {
        table.push(vec![i.into(), x.into(), ((x - mu) / sigma).into()]);
    }
    Ok(table)
}

fn gibbs(a: &GibbsArgs) -> Result<Table, CliError> {
    let params = a.common.params()?;
    if !(a.s > 0.0) {
        return Err(CliError::Domain(format!("s = {} must be positive", a.s)));
    }
    let kind = match a.chain {
        ChainChoice::Poisson => ChainKind::Poisson { far_order: a.far_order },
        ChainChoice::Box => ChainKind::Box {
            m: a.box_size.unwrap_or_else(|| matched_box(&params, a.n)),
            measure: CurveMeasure::Conditional,
        },
    };
    let cfg = ChainConfig {
        n: a.n,
        kind,
        burn_in: a.burn_in,
        sweeps: a.sweeps,
        chains: a.chains,
        record: a.record,
        seed: a.common.seed,
    };
    let out = run_chains(&params, a.s, &cfg).map_err(|e| CliError::at("gibbs", e))?;
    let mut columns = vec!["chain".to_string(), "sweep".into()];
    columns.extend((1..=a.record).map(|i| format!("r{i}")));
    columns.push("log_sum".into());
    let mut table = Table::new("sample gibbs", columns);
    table
        .meta("s", json!(a.s))
        .meta("n", json!(a.n))
        .meta("chain", json!(format!("{:?}", a.chain).to_lowercase()))
        .meta("acceptance", json!(out.acceptance))
        .meta("ess", json!(out.ess()))
        .meta("max_drift", json!(out.max_drift));
    for (c, chain) in out.radii.iter().enumerate() {
        for (t, radii) in chain.iter().enumerate() {
            let mut row: Vec<Cell> = vec![c.into(), t.into()];
            row.extend(radii.iter().map(|&r| Cell::from(r)));
            row.push(out.log_sum[c][t].into());
            table.push(row);
        }
    }
    Ok(table)
}
