//! `dualchan`: run dual-map experiments and print JSON reports.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 when an input or a
//! certificate fails validation.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use dualchan::certificates::{certify_base_norm, CertificateReport};
use dualchan::channels::{is_cptp, random_channel, ChannelFile, CPTP_TOL};
use dualchan::conjugate::{estimate_conjugate_with_workers, quasiprob_weights, EstimationReport};
use dualchan::petz::{estimate_petz_with_workers, run_petz_attempts};
use dualchan::report::{to_json, transpose_report};
use dualchan::sampling::hoeffding_rounds;

mod input;

#[derive(Parser)]
#[command(name = "dualchan", version, about = "Simulate transpose, conjugate and adjoint of quantum channels")]
struct Cli {
    /// Worker threads for sampling; results do not depend on it.
    #[arg(long, global = true, env = "DUALCHAN_WORKERS", default_value_t = 1)]
    workers: usize,

    /// Tolerance for validating input channels and states.
    #[arg(long = "validation-tol", global = true, default_value_t = CPTP_TOL)]
    validation_tol: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact teleportation transpose of a channel on one input state.
    TransposeSim {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        state: PathBuf,
    },
    /// Quasi-probability estimate of tr[O N*(rho)].
    ConjugateEstimate {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        /// Target accuracy; with --delta sets the Hoeffding round count.
        #[arg(long, requires = "delta", required_unless_present = "rounds")]
        eps: Option<f64>,
        #[arg(long, requires = "eps")]
        delta: Option<f64>,
        /// Explicit round count, overriding --eps/--delta.
        #[arg(long, conflicts_with_all = ["eps", "delta"])]
        rounds: Option<u64>,
        #[arg(long)]
        seed: u64,
    },
    /// Estimate of tr[O P(omega)] for the Petz recovery map.
    PetzEstimate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, requires = "delta", required_unless_present = "attempts")]
        eps: Option<f64>,
        #[arg(long, requires = "eps")]
        delta: Option<f64>,
        /// Explicit attempt count, overriding the budget.
        #[arg(long, conflicts_with_all = ["eps", "delta"])]
        attempts: Option<u64>,
        #[arg(long)]
        seed: u64,
    },
    /// Check the optimal-overhead certificates; a grid when maxima are given.
    CertifyBasenorm {
        #[arg(long)]
        da: usize,
        #[arg(long)]
        db: usize,
        #[arg(long)]
        da_max: Option<usize>,
        #[arg(long)]
        db_max: Option<usize>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Write a random channel file.
    GenChannel {
        #[arg(long)]
        din: usize,
        #[arg(long)]
        dout: usize,
        #[arg(long)]
        rank: usize,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct ConjugateOutput {
    #[serde(flatten)]
    report: EstimationReport,
    epsilon: Option<f64>,
    delta: Option<f64>,
}

#[derive(Serialize)]
struct Grid {
    reports: Vec<CertificateReport>,
    pass: bool,
}

#[derive(Serialize)]
struct GenOutput {
    path: Option<PathBuf>,
    d_in: usize,
    d_out: usize,
    rank: usize,
    seed: u64,
    cptp: dualchan::channels::CptpReport,
}

/// Runs a command; `Ok(false)` means the report was produced but failed.
fn run(cli: Cli) -> Result<bool> {
    let tol = cli.validation_tol;
    let (json, ok) = match cli.command {
        Command::TransposeSim { channel, state } => {
            let n = input::load_channel(&channel, tol)?;
            let rho = input::load_state(&state, tol)?;
            (to_json("transpose-sim", &transpose_report(&n, &rho)?)?, true)
        }
        Command::ConjugateEstimate {
            channel,
            state,
            obs,
            eps,
            delta,
            rounds,
            seed,
        } => {
            let n = input::load_channel(&channel, tol)?;
            let rho = input::load_state(&state, tol)?;
            let o = input::load_observable(&obs)?;
            let rounds = match (rounds, eps, delta) {
                (Some(r), _, _) => r,
                (None, Some(e), Some(d)) => hoeffding_rounds(e, d, quasiprob_weights(n.d_in(), n.d_out()).gamma)?,
                _ => unreachable!("clap enforces --rounds or --eps/--delta"),
            };
            let report = estimate_conjugate_with_workers(&n, &rho, &o, rounds, seed, cli.workers)?;
            let out = ConjugateOutput {
                report,
                epsilon: eps,
                delta,
            };
            (to_json("conjugate-estimate", &out)?, true)
        }
        Command::PetzEstimate {
            instance,
            eps,
            delta,
            attempts,
            seed,
        } => {
            let inst = input::load_instance(&instance, tol)?;
            let report = match (attempts, eps, delta) {
                (Some(m), _, _) => run_petz_attempts(&inst, m, seed, cli.workers)?,
                (None, Some(e), Some(d)) => estimate_petz_with_workers(&inst, e, d, seed, cli.workers)?,
                _ => unreachable!("clap enforces --attempts or --eps/--delta"),
            };
            (to_json("petz-estimate", &report)?, true)
        }
        Command::CertifyBasenorm {
            da,
            db,
            da_max,
            db_max,
            tol: cert_tol,
        } => {
            anyhow::ensure!(da >= 2 && db >= 2, "dimensions must be at least 2, got ({da}, {db})");
            anyhow::ensure!(cert_tol > 0.0, "tolerance must be positive");
            if da_max.is_none() && db_max.is_none() {
                let r = certify_base_norm(da, db, cert_tol);
                let pass = r.pass;
                (to_json("certify-basenorm", &r)?, pass)
            } else {
                let (ha, hb) = (da_max.unwrap_or(da), db_max.unwrap_or(db));
                anyhow::ensure!(ha >= da && hb >= db, "grid maxima below the minima");
                let reports: Vec<CertificateReport> = (da..=ha)
                    .flat_map(|a| (db..=hb).map(move |b| (a, b)))
                    .map(|(a, b)| certify_base_norm(a, b, cert_tol))
                    .collect();
                let pass = reports.iter().all(|r| r.pass);
                (to_json("certify-basenorm", &Grid { reports, pass })?, pass)
            }
        }
        Command::GenChannel {
            din,
            dout,
            rank,
            seed,
            output,
        } => {
            let n = random_channel(din, dout, rank, seed)?;
            let file = serde_json::to_string_pretty(&ChannelFile::from_channel(&n))?;
            let cptp = is_cptp(n.choi(), din, dout, tol);
            match &output {
                Some(p) => {
                    std::fs::write(p, &file).with_context(|| format!("cannot write {}", p.display()))?;
                    let out = GenOutput {
                        path: output.clone(),
                        d_in: din,
                        d_out: dout,
                        rank,
                        seed,
                        cptp,
                    };
                    (to_json("gen-channel", &out)?, true)
                }
                None => (file, true),
            }
        }
    };
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{json}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
        _ => {}
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
