use clap::Args;
use rayon::prelude::*;
use serde_json::json;
use shotnoise::tilt::{tilt, DEFAULT_TOL};

use crate::error::CliError;
use crate::grid::parse_grid;
use crate::table::{Cell, Table};
use crate::Common;

#[derive(Args, Debug)]
pub struct TiltArgs {
    #[command(flatten)]
    pub common: Common,
    /// Inner radius of the far field.
    #[arg(long, allow_negative_numbers = true)]
    pub r: f64,
    /// Grid of standardized values: `start:stop:step` or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    pub y: String,
    /// Highest tilted cumulant reported.
    #[arg(long, default_value_t = 6)]
    pub n_max: usize,
}

pub fn run(a: &TiltArgs) -> Result<Table, CliError> {
    let params = a.common.params()?;
    let grid = parse_grid(&a.y)?;
    if a.n_max < 2 {
        return Err(CliError::Domain("n-max must be at least 2".into()));
    }
    let mut columns: Vec<String> = ["y", "xi", "x"].iter().map(|s| s.to_string()).collect();
    columns.extend((2..=a.n_max).map(|n| format!("tkappa{n}")));
    columns.extend(["log_prefactor", "residual"].iter().map(|s| s.to_string()));
    let rows: Vec<Result<Vec<Cell>, CliError>> = grid
        .par_iter()
        .map(|&y| {
            let s = tilt(&params, y, a.r, a.n_max).map_err(|e| CliError::at(format!("y = {y}, r = {}", a.r), e))?;
            let mut row: Vec<Cell> = vec![y.into(), s.xi.into(), s.x.into()];
            row.extend((2..=a.n_max).map(|n| Cell::from(s.tkappa(n).unwrap_or(f64::NAN))));
            row.push(s.log_prefactor.into());
            row.push(s.residual().map_err(|e| CliError::at(format!("y = {y}"), e))?.into());
            Ok(row)
        })
        .collect();
    let mut table = Table::new("tilt", columns);
    table.meta("r", json!(a.r)).meta("tolerance", json!(DEFAULT_TOL));
    for row in rows {
        table.push(row?);
    }
    Ok(table)
}
