//! Command-line front end.
//!
//! ```text
//! taylor-lsv price    --model heston.txt --order 2 --strikes=-0.2,-0.1,0,0.1,0.2 --maturities 0.25
//! taylor-lsv smile    --model three_halves.txt --order 3 --strikes=-0.1,0,0.1 --maturities 0.125,0.25
//! taylor-lsv yield    --model jdcev.txt --order 4 --maturities 1,2,5
//! taylor-lsv validate --model heston.txt --paths 100000 --seed 7 --out smile.csv
//! taylor-lsv expand   --model three_halves.txt --order 1
//! ```
//!
//! Strikes are log-strike offsets `k - x`; maturities are absolute times `T`
//! (the model file's `t` is the valuation time). Numbers are written with 17
//! significant digits. Grid points run in parallel but rows are always
//! emitted in grid order.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::{Error, Result, MAX_ORDER};
use crate::expansion::{dump_ln, CorrectionOperators};
use crate::impliedvol::iv_expand;
use crate::model::{ModelFile, Payoff};
use crate::validate::{
    csv_number, dynamics_for, mc_price_many, write_bond_validation_csv, write_smile_validation_csv, BondValidationRow,
    MCConfig, SmileValidationRow,
};

#[derive(Debug, Parser)]
#[command(name = "taylor-lsv", version, about = "Taylor-series prices and implied vols for LSV models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Price,
    Smile,
    Yield,
    Validate,
    Expand,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Price series u_0..u_N and their sum at every grid point.
    Price(RunArgs),
    /// Implied-vol series sigma_0..sigma_N per strike and maturity.
    Smile(RunArgs),
    /// Bond yields -log(u)/tau using partial sums of order 0..N.
    Yield(RunArgs),
    /// Monte Carlo comparison (smile for calls/puts, prices for bonds).
    Validate(RunArgs),
    /// Normal-ordered dump of the correction operator L_N.
    Expand(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PayoffKind {
    Call,
    Put,
    Bond,
    Forward,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Model file (`key = value` lines).
    #[arg(long)]
    pub model: PathBuf,
    /// Expansion order N; defaults to the model file's `order`.
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long, value_enum)]
    pub payoff: Option<PayoffKind>,
    /// Comma-separated log-strike offsets k - x.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub strikes: String,
    /// Comma-separated maturities T.
    #[arg(long, default_value = "0.25")]
    pub maturities: String,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything a subcommand needs, validated.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub model: ModelFile,
    pub payoff: PayoffKind,
    pub strike_offsets: Vec<f64>,
    pub maturities: Vec<f64>,
    pub order: usize,
    pub out: Option<PathBuf>,
    pub mc: MCConfig,
}

fn parse_grid(name: &str, text: &str) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Usage(format!("--{name}: `{s}` is not a finite number")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::Usage(format!("--{name} is empty")));
    }
    Ok(values)
}

impl RunConfig {
    pub fn from_args(command: CommandKind, args: &RunArgs) -> Result<Self> {
        let text = fs::read_to_string(&args.model)
            .map_err(|e| Error::Input(format!("cannot read model file {}: {e}", args.model.display())))?;
        let mut model = ModelFile::parse(&text)?;
        let order = args.order.unwrap_or(model.order);
        if order > MAX_ORDER {
            return Err(crate::error::order_cap_error(order));
        }
        model.order = model.order.max(order);
        let payoff = args.payoff.unwrap_or(match command {
            CommandKind::Yield => PayoffKind::Bond,
            _ => PayoffKind::Call,
        });
        let maturities = parse_grid("maturities", &args.maturities)?;
        if let Some(&bad) = maturities.iter().find(|&&m| m <= model.t0) {
            return Err(Error::Usage(format!("maturity {bad} is not after the valuation time {}", model.t0)));
        }
        Ok(RunConfig {
            command,
            model,
            payoff,
            strike_offsets: parse_grid("strikes", &args.strikes)?,
            maturities,
            order,
            out: args.out.clone(),
            mc: MCConfig { paths: args.paths, seed: args.seed, ..MCConfig::default() },
        })
    }

    fn vanilla(&self) -> bool {
        matches!(self.payoff, PayoffKind::Call | PayoffKind::Put)
    }

    fn payoff_at(&self, offset: f64) -> Payoff {
        let k = self.model.x + offset;
        match self.payoff {
            PayoffKind::Call => Payoff::call(k),
            PayoffKind::Put => Payoff::put(k),
            PayoffKind::Bond => Payoff::Bond,
            PayoffKind::Forward => Payoff::Forward,
        }
    }

    /// `(T, k - x)` pairs in output order; one pair per maturity for strike-free payoffs.
    fn grid(&self) -> Vec<(f64, Option<f64>)> {
        let mut g = Vec::new();
        for &m in &self.maturities {
            if self.vanilla() {
                g.extend(self.strike_offsets.iter().map(|&o| (m, Some(o))));
            } else {
                g.push((m, None));
            }
        }
        g
    }

    fn operators(&self) -> Result<CorrectionOperators> {
        let spec = self.model.spec()?;
        let at_point = spec.point() == (self.model.x, self.model.y);
        CorrectionOperators::build(&spec, self.order, at_point)
    }
}

fn row(cells: impl IntoIterator<Item = String>) -> String {
    cells.into_iter().collect::<Vec<_>>().join(",")
}

fn cmd_price(cfg: &RunConfig, w: &mut Vec<u8>) -> Result<()> {
    let ops = cfg.operators()?;
    let m = &cfg.model;
    let grid = cfg.grid();
    let rows = grid
        .par_iter()
        .map(|&(mat, off)| ops.price(&cfg.payoff_at(off.unwrap_or(0.0)), m.t0, mat, m.x, m.y))
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["maturity".to_string()];
    if cfg.vanilla() {
        header.push("strike_offset".into());
    }
    header.extend((0..=cfg.order).map(|n| format!("u_{n}")));
    header.push("total".into());
    writeln!(w, "{}", header.join(","))?;
    for ((mat, off), e) in grid.iter().zip(&rows) {
        let mut cells = vec![csv_number(*mat)];
        cells.extend(off.map(csv_number));
        cells.extend(e.values().into_iter().map(csv_number));
        cells.push(csv_number(e.total()));
        writeln!(w, "{}", row(cells))?;
    }
    Ok(())
}

fn cmd_smile(cfg: &RunConfig, w: &mut Vec<u8>) -> Result<()> {
    if !cfg.vanilla() {
        return Err(Error::Usage("smile needs a call or put payoff".into()));
    }
    let ops = cfg.operators()?;
    let m = &cfg.model;
    let grid = cfg.grid();
    let rows = grid
        .par_iter()
        .map(|&(mat, off)| iv_expand(&ops.price(&cfg.payoff_at(off.unwrap_or(0.0)), m.t0, mat, m.x, m.y)?))
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["maturity".to_string(), "strike_offset".into()];
    header.extend((0..=cfg.order).map(|n| format!("sigma_{n}")));
    header.push("total".into());
    writeln!(w, "{}", header.join(","))?;
    for ((mat, off), iv) in grid.iter().zip(&rows) {
        let mut cells = vec![csv_number(*mat), csv_number(off.unwrap_or(0.0))];
        cells.extend(iv.terms.iter().copied().map(csv_number));
        cells.push(csv_number(iv.total()));
        writeln!(w, "{}", row(cells))?;
    }
    Ok(())
}

fn cmd_yield(cfg: &RunConfig, w: &mut Vec<u8>) -> Result<()> {
    if cfg.payoff != PayoffKind::Bond {
        return Err(Error::Usage("yield is defined for the bond payoff only".into()));
    }
    let ops = cfg.operators()?;
    let m = &cfg.model;
    let rows = cfg
        .maturities
        .par_iter()
        .map(|&mat| {
            let e = ops.price(&Payoff::Bond, m.t0, mat, m.x, m.y)?;
            (0..=cfg.order)
                .map(|n| {
                    let p = e.partial_sum(n);
                    if p > 0.0 {
                        Ok(-p.ln() / e.tau)
                    } else {
                        Err(Error::Domain(format!("bond price {p} at order {n}, maturity {mat} is not positive")))
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["maturity".to_string()];
    header.extend((0..=cfg.order).map(|n| format!("yield_order_{n}")));
    writeln!(w, "{}", header.join(","))?;
    for (mat, ys) in cfg.maturities.iter().zip(&rows) {
        let mut cells = vec![csv_number(*mat)];
        cells.extend(ys.iter().copied().map(csv_number));
        writeln!(w, "{}", row(cells))?;
    }
    Ok(())
}

fn cmd_validate(cfg: &RunConfig, w: &mut Vec<u8>) -> Result<()> {
    let dynamics = dynamics_for(&cfg.model.kind)?;
    let ops = cfg.operators()?;
    let m = &cfg.model;
    match cfg.payoff {
        PayoffKind::Call | PayoffKind::Put => {
            let [mat] = cfg.maturities[..] else {
                return Err(Error::Usage("validate compares one smile; give a single maturity".into()));
            };
            let payoffs: Vec<Payoff> = cfg.strike_offsets.iter().map(|&o| cfg.payoff_at(o)).collect();
            let mc = mc_price_many(dynamics.as_ref(), &payoffs, m.t0, mat, m.x, m.y, &cfg.mc)?;
            let approx = payoffs
                .par_iter()
                .map(|p| Ok(iv_expand(&ops.price(p, m.t0, mat, m.x, m.y)?)?.total()))
                .collect::<Result<Vec<_>>>()?;
            let rows: Vec<SmileValidationRow> = cfg
                .strike_offsets
                .iter()
                .zip(&mc)
                .zip(approx)
                .map(|((&o, r), a)| SmileValidationRow {
                    strike_offset: o,
                    mc_iv: r.implied_vol,
                    mc_stderr: r.iv_std_error,
                    approx_iv: a,
                })
                .collect();
            write_smile_validation_csv(w, cfg.order, &rows)
        }
        PayoffKind::Bond | PayoffKind::Forward => {
            let payoff = cfg.payoff_at(0.0);
            let mut rows = Vec::with_capacity(cfg.maturities.len());
            for &mat in &cfg.maturities {
                let r =
                    mc_price_many(dynamics.as_ref(), std::slice::from_ref(&payoff), m.t0, mat, m.x, m.y, &cfg.mc)?[0];
                let e = ops.price(&payoff, m.t0, mat, m.x, m.y)?;
                rows.push(BondValidationRow {
                    maturity: mat,
                    mc_price: r.price_mean,
                    mc_stderr: r.std_error,
                    approx_price: e.total(),
                });
            }
            write_bond_validation_csv(w, cfg.order, &rows)
        }
    }
}

fn cmd_expand(cfg: &RunConfig, w: &mut Vec<u8>) -> Result<()> {
    let spec = cfg.model.spec()?;
    write!(w, "{}", dump_ln(&spec, cfg.order)?)?;
    Ok(())
}

/// Runs one subcommand, writing to `cfg.out` or `stdout`.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let mut buf = Vec::new();
    match cfg.command {
        CommandKind::Price => cmd_price(cfg, &mut buf)?,
        CommandKind::Smile => cmd_smile(cfg, &mut buf)?,
        CommandKind::Yield => cmd_yield(cfg, &mut buf)?,
        CommandKind::Validate => cmd_validate(cfg, &mut buf)?,
        CommandKind::Expand => cmd_expand(cfg, &mut buf)?,
    }
    match &cfg.out {
        Some(path) => fs::write(path, buf)?,
        None => io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

/// Exit status for an error: 2 for usage problems, 3 for capability limits, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::Parse { .. } => 2,
        Error::Capability(_) => 3,
        _ => 1,
    }
}

/// Entry point shared by the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let (kind, args) = match &cli.command {
        Command::Price(a) => (CommandKind::Price, a),
        Command::Smile(a) => (CommandKind::Smile, a),
        Command::Yield(a) => (CommandKind::Yield, a),
        Command::Validate(a) => (CommandKind::Validate, a),
        Command::Expand(a) => (CommandKind::Expand, a),
    };
    match RunConfig::from_args(kind, args).and_then(|cfg| run(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("taylor-lsv: {e}");
            exit_code(&e)
        }
    }
}
