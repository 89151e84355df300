//! `shotnoise`: density tables, tilt diagnostics, conditional laws of the
//! nearest radius, samplers and self-checks, written as CSV or JSON.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod grid;
mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shotnoise::ModelParams;

use error::CliError;
use table::{Format, Table};

#[derive(Parser)]
#[command(name = "shotnoise", version, about = "Power-law shot noise: densities, conditional radii and samplers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Spatial dimension.
    #[arg(long, default_value_t = 2)]
    pub d: u32,
    /// Pathloss exponent, greater than d.
    #[arg(long, allow_negative_numbers = true, default_value_t = 4.0)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Seed for every random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Common {
    pub fn params(&self) -> Result<ModelParams, CliError> {
        ModelParams::new(self.d, self.gamma).map_err(|e| CliError::at("model", e))
    }

    fn emit(&self, mut table: Table) -> Result<(), CliError> {
        table
            .meta("d", self.d.into())
            .meta("gamma", self.gamma.into())
            .meta("seed", self.seed.into());
        match &self.output {
            Some(path) => {
                let mut w = BufWriter::new(File::create(path)?);
                table.write(self.format, &mut w)?;
                w.flush()?;
            }
            None => {
                let stdout = io::stdout();
                let mut w = stdout.lock();
                table.write(self.format, &mut w)?;
            }
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Edgeworth density of the standardized far field, optionally against the Fourier oracle.
    Density(commands::density::DensityArgs),
    /// Tilt parameter, tilted cumulants and prefactor on a grid.
    Tilt(commands::tilt::TiltArgs),
    /// Conditional CDF of the nearest radius given the total.
    Conditional(commands::conditional::ConditionalArgs),
    /// Draw radii, far fields or conditional chains.
    Sample(commands::sample::SampleArgs),
    /// Run the built-in invariant checks.
    Validate(commands::validate::ValidateArgs),
}

fn configure_threads() {
    if let Ok(v) = std::env::var("SHOTNOISE_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                // Fails only if a pool already exists, which cannot happen this early.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Density(a) => a.common.emit(commands::density::run(&a)?),
        Command::Tilt(a) => a.common.emit(commands::tilt::run(&a)?),
        Command::Conditional(a) => a.common.emit(commands::conditional::run(&a)?),
        Command::Sample(a) => {
            let common = a.common().clone();
            common.emit(commands::sample::run(&a)?)
        }
        Command::Validate(a) => {
            let (table, failures) = commands::validate::run(&a)?;
            a.common.emit(table)?;
            if failures > 0 {
                return Err(CliError::Numeric(format!("{failures} check(s) failed")));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
