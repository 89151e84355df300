use clap::Args;
use rayon::prelude::*;
use serde_json::json;
use shotnoise::edgeworth::{density_sbar, density_y};
use shotnoise::oracle::{invert_density, QuadratureSpec};

use crate::error::CliError;
use crate::grid::{parse_grid, parse_orders};
use crate::table::{Cell, Table};
use crate::Common;

#[derive(Args, Debug)]
pub struct DensityArgs {
    #[command(flatten)]
    pub common: Common,
    /// Inner radius of the far field.
    #[arg(long, allow_negative_numbers = true)]
    pub r: f64,
    /// Comma-separated Edgeworth orders.
    #[arg(long, default_value = "2")]
    pub k: String,
    /// Grid of standardized values: `start:stop:step` (starts at `start`, never passes `stop`) or a comma list.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "sbar", required_unless_present = "sbar")]
    pub y: Option<String>,
    /// Grid of raw far-field values instead of `y`.
    #[arg(long, allow_hyphen_values = true)]
    pub sbar: Option<String>,
    /// Add the Fourier-inversion oracle and relative errors.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1e-13)]
    pub abs_tol: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1e-11)]
    pub rel_tol: f64,
}

pub fn run(a: &DensityArgs) -> Result<Table, CliError> {
    let params = a.common.params()?;
    let orders = parse_orders(&a.k)?;
    let raw = a.sbar.is_some();
    let grid = parse_grid(a.sbar.as_deref().or(a.y.as_deref()).unwrap_or_default())?;
    if !(a.r > 0.0) {
        return Err(CliError::Domain(format!("r = {} must be positive", a.r)));
    }
    let spec = QuadratureSpec { abs_tol: a.abs_tol, rel_tol: a.rel_tol, ..QuadratureSpec::default() };
    let (mu, sigma) = (params.mu(a.r), params.sigma(a.r));

    let mut columns = vec![if raw { "sbar" } else { "y" }.to_string()];
    if raw {
        columns.push("y".into());
    }
    columns.extend(orders.iter().map(|k| format!("edgeworth_k{k}")));
    columns.extend(orders.iter().map(|k| format!("valid_k{k}")));
    if a.oracle {
        columns.push("oracle".into());
        columns.extend(orders.iter().map(|k| format!("rel_error_k{k}")));
    }

    let rows: Vec<Result<Vec<Cell>, CliError>> = grid
        .par_iter()
        .map(|&g| {
            let y = if raw { (g - mu) / sigma } else { g };
            let at = || format!("y = {y}, r = {}", a.r);
            let mut values = Vec::with_capacity(orders.len());
            let mut valid = Vec::with_capacity(orders.len());
            for &k in &orders {
                let e = if raw { density_sbar(&params, g, a.r, k) } else { density_y(&params, y, a.r, k) }
                    .map_err(|e| CliError::at(at(), e))?;
                values.push(e.value);
                valid.push(e.valid);
            }
            let mut row: Vec<Cell> = vec![g.into()];
            if raw {
                row.push(y.into());
            }
            row.extend(values.iter().map(|&v| Cell::from(v)));
            row.extend(valid.iter().map(|&v| Cell::from(v)));
            if a.oracle {
                let o = invert_density(&params, y, a.r, &spec, true).map_err(|e| CliError::at(at(), e))?;
                let oracle = if raw { o.value / sigma } else { o.value };
                row.push(oracle.into());
                row.extend(values.iter().map(|&v| Cell::from((v - oracle).abs() / oracle)));
            }
            Ok(row)
        })
        .collect();

    let mut table = Table::new("density", columns);
    table
        .meta("r", json!(a.r))
        .meta("orders", json!(orders))
        .meta("oracle_abs_tol", json!(a.abs_tol))
        .meta("oracle_rel_tol", json!(a.rel_tol));
    for row in rows {
        table.push(row?);
    }
    Ok(table)
}
