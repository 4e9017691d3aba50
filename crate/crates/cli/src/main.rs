//! `qmeasure`: classify chain instruments, sweep chain lengths, resolve the
//! time dynamics, run the oracle equivalence matrix, and demo the generic
//! framework. Every command writes CSV.
//!
//! Exit codes: 0 success, 1 a check failed, 2 invalid configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, Validated, ValidationError};

#[derive(Parser)]
#[command(
    name = "qmeasure",
    version,
    about = "Quantum measurement statistics and spin-chain instruments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output CSV path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (defaults to the number of CPUs). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for randomized instances.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Extra `key=value` settings, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Default)]
struct ChainArgs {
    /// Half chain length; the chain has 2L+1 spins.
    #[arg(long = "L")]
    l: Option<String>,
    /// Initial polarization in [-1, 1].
    #[arg(long, allow_hyphen_values = true)]
    m: Option<String>,
    /// Coupling in radians; accepts `pi/2`, `3*pi/8`, ...
    #[arg(long = "J", allow_hyphen_values = true)]
    j: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Verdict, overlaps and decay rate for one chain.
    Classify {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long)]
        tol_ideal: Option<String>,
        #[arg(long)]
        tol_eta: Option<String>,
    },
    /// Overlaps and per-spin log rate over a range of L at fixed (m, J).
    Sweep {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long = "L-min")]
        l_min: Option<String>,
        #[arg(long = "L-max")]
        l_max: Option<String>,
        #[arg(long = "L-step")]
        l_step: Option<String>,
    },
    /// Time-resolved F-tensor through the critical time.
    TimeSeries {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        b: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        c_supp: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        d: Option<String>,
        #[arg(long)]
        grid_points: Option<String>,
        #[arg(long)]
        grid_dt: Option<String>,
        #[arg(long)]
        t_max: Option<String>,
        #[arg(long)]
        tol_stat: Option<String>,
        /// Comma-separated real amplitudes of the microstate.
        #[arg(long, allow_hyphen_values = true)]
        psi: Option<String>,
    },
    /// Closed forms against enumeration, dense operators and dynamics.
    OracleCheck {
        #[arg(long = "L-max")]
        l_max: Option<String>,
        /// Replace every check tolerance.
        #[arg(long)]
        tol: Option<String>,
    },
    /// Expectation, pointer weights, conditionals and reduced state for a
    /// random or embedded-chain instrument.
    FrameworkDemo {
        #[command(flatten)]
        chain: ChainArgs,
        /// `random` or `embedded`.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        dim: Option<String>,
        #[arg(long)]
        t: Option<String>,
        /// `random`, `identity` or `diagonal`.
        #[arg(long)]
        observable: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        psi: Option<String>,
    },
}

fn apply_chain(cfg: &mut RunConfig, chain: &ChainArgs) -> Validated<()> {
    cfg.set_opt("L", &chain.l)?;
    cfg.set_opt("m", &chain.m)?;
    cfg.set_opt("J", &chain.j)
}

fn build_config(cli: &Cli) -> Validated<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ValidationError(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    match &cli.command {
        Command::Classify {
            chain,
            tol_ideal,
            tol_eta,
        } => {
            apply_chain(&mut cfg, chain)?;
            cfg.set_opt("tol.ideal", tol_ideal)?;
            cfg.set_opt("tol.eta", tol_eta)?;
        }
        Command::Sweep {
            chain,
            l_min,
            l_max,
            l_step,
        } => {
            apply_chain(&mut cfg, chain)?;
            cfg.set_opt("sweep.L_min", l_min)?;
            cfg.set_opt("sweep.L_max", l_max)?;
            cfg.set_opt("sweep.L_step", l_step)?;
        }
        Command::TimeSeries {
            chain,
            a,
            b,
            c_supp,
            d,
            grid_points,
            grid_dt,
            t_max,
            tol_stat,
            psi,
        } => {
            apply_chain(&mut cfg, chain)?;
            cfg.set_opt("a", a)?;
            cfg.set_opt("b", b)?;
            cfg.set_opt("c_supp", c_supp)?;
            cfg.set_opt("d", d)?;
            cfg.set_opt("grid.points", grid_points)?;
            cfg.set_opt("grid.dt", grid_dt)?;
            cfg.set_opt("t_max", t_max)?;
            cfg.set_opt("tol.stat", tol_stat)?;
            cfg.set_opt("psi", psi)?;
        }
        Command::OracleCheck { l_max, tol } => {
            cfg.set_opt("oracle.L_max", l_max)?;
            cfg.set_opt("tol.check", tol)?;
        }
        Command::FrameworkDemo {
            chain,
            model,
            n,
            dim,
            t,
            observable,
            psi,
        } => {
            apply_chain(&mut cfg, chain)?;
            cfg.set_opt("demo.model", model)?;
            cfg.set_opt("demo.n", n)?;
            cfg.set_opt("demo.dim", dim)?;
            cfg.set_opt("demo.t", t)?;
            cfg.set_opt("demo.observable", observable)?;
            cfg.set_opt("psi", psi)?;
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    let cfg = match build_config(cli) {
        Ok(cfg) => cfg,
        Err(e) => return Ok(validation_exit(&e)),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Ok(validation_exit(&ValidationError(
                "--threads must be at least 1".into(),
            )));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let result = pool.install(|| match &cli.command {
        Command::Classify { .. } => commands::classify_cmd(&cfg),
        Command::Sweep { .. } => commands::sweep_cmd(&cfg),
        Command::TimeSeries { .. } => commands::time_series_cmd(&cfg),
        Command::OracleCheck { .. } => commands::oracle_check_cmd(&cfg),
        Command::FrameworkDemo { .. } => commands::framework_demo_cmd(&cfg, cli.seed),
    });
    let (csv, outcome) = match result {
        Ok(v) => v,
        Err(e) => return Ok(validation_exit(&e)),
    };
    csv.emit(cli.out.as_deref())?;
    Ok(match outcome {
        commands::Outcome::Pass => ExitCode::SUCCESS,
        commands::Outcome::Fail(msg) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
    })
}

fn validation_exit(e: &ValidationError) -> ExitCode {
    eprintln!("invalid configuration: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
