//! Command-line frontend: run scenarios, verify chains, export graphs and
//! trust snapshots, inspect facilitator histories.
//!
//! Exit codes: 0 ok, 1 validation error, 2 verification failure, 3 I/O error.

use clap::{Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use uberledger::meta::{export_graph, serialize_ntriples, trust_triples};
use uberledger::sim::{load_world, parse_scenario, render_csv, run_scenario, save_world, World};

#[derive(Parser)]
#[command(name = "uberledger", version, about = "Cross-chain transfer simulator with a meta-ledger of facilitator outcomes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config; writes metrics.csv, meta.nt and world.json
    Run {
        /// Scenario config file
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing)
        #[arg(long)]
        out: PathBuf,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Verify every ledger chain and the meta chain of a snapshot
    Verify {
        /// Snapshot file, or a directory containing world.json
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Export the meta-ledger as a graph
    ExportGraph {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Ntriples)]
        format: Format,
    },
    /// Export the trust snapshot
    ExportTrust {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Print one facilitator's verdict history as CSV rows
    History {
        #[arg(long)]
        snapshot: PathBuf,
        /// Facilitator name; unknown names print nothing
        #[arg(long)]
        facilitator: String,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Ntriples,
}

enum AppError {
    Validation(String),
    Verification(String),
    Io(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Validation(_) => 1,
            AppError::Verification(_) => 2,
            AppError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Validation(m) | AppError::Verification(m) | AppError::Io(m) => m,
        }
    }
}

fn read_file(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path)
        .map_err(|e| AppError::Io(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), AppError> {
    std::fs::write(path, contents)
        .map_err(|e| AppError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Accept either the snapshot file itself or the run's output directory.
fn snapshot_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("world.json")
    } else {
        path.to_path_buf()
    }
}

fn load_snapshot(path: &Path) -> Result<World, AppError> {
    let file = snapshot_path(path);
    if !file.exists() {
        return Err(AppError::Io(format!("no snapshot found at {}", file.display())));
    }
    let text = read_file(&file)?;
    load_world(&text).map_err(|e| AppError::Io(format!("unreadable snapshot {}: {e}", file.display())))
}

fn cmd_run(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), AppError> {
    let text = read_file(config)?;
    let mut cfg = parse_scenario(&text).map_err(|e| AppError::Validation(e.to_string()))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let (metrics, world) = run_scenario(&cfg).map_err(|e| AppError::Validation(e.to_string()))?;
    std::fs::create_dir_all(out)
        .map_err(|e| AppError::Io(format!("cannot create {}: {e}", out.display())))?;
    write_file(&out.join("metrics.csv"), &render_csv(&metrics))?;
    write_file(&out.join("meta.nt"), &serialize_ntriples(&export_graph(&world.meta)))?;
    write_file(&out.join("world.json"), &save_world(&world))?;
    let conservation = if metrics.all_conserved() { "ok" } else { "VIOLATED" };
    println!(
        "released={} forfeited={} conservation={conservation}",
        metrics.released, metrics.forfeited
    );
    Ok(())
}

fn cmd_verify(snapshot: &Path) -> Result<(), AppError> {
    let world = load_snapshot(snapshot)?;
    for (id, ledger) in &world.ledgers {
        if let Err(v) = ledger.verify() {
            return Err(AppError::Verification(format!("ledger {id}: {v}")));
        }
    }
    if let Err(v) = world.meta.verify() {
        return Err(AppError::Verification(format!("meta-ledger: {v}")));
    }
    println!("ok: {} ledgers and the meta chain verify", world.ledgers.len());
    Ok(())
}

fn records_csv(world: &World) -> String {
    let mut out =
        String::from("transfer_id,source,dest,payer,payee,amount_src,amount_dst,fee_total,outcome,tick\n");
    for r in world.meta.records() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.transfer_id,
            r.source_ledger,
            r.dest_ledger,
            r.payer,
            r.payee,
            r.amount_src,
            r.amount_dst,
            r.fee_total,
            r.outcome.as_str(),
            r.tick
        );
    }
    out
}

fn cmd_export_graph(snapshot: &Path, format: Format) -> Result<(), AppError> {
    let world = load_snapshot(snapshot)?;
    match format {
        Format::Ntriples => print!("{}", serialize_ntriples(&export_graph(&world.meta))),
        Format::Csv => print!("{}", records_csv(&world)),
    }
    Ok(())
}

fn cmd_export_trust(snapshot: &Path, format: Format) -> Result<(), AppError> {
    let world = load_snapshot(snapshot)?;
    match format {
        Format::Ntriples => {
            let triples = trust_triples(world.trust.iter());
            print!("{}", serialize_ntriples(&triples));
        }
        Format::Csv => {
            let mut out = String::from("facilitator,trust\n");
            for (id, score) in world.trust.iter() {
                let _ = writeln!(out, "{id},{score:.9}");
            }
            print!("{out}");
        }
    }
    Ok(())
}

fn cmd_history(snapshot: &Path, facilitator: &str) -> Result<(), AppError> {
    let world = load_snapshot(snapshot)?;
    let id = uberledger::interchain::FacilitatorId::new(facilitator)
        .map_err(|e| AppError::Validation(e.to_string()))?;
    for entry in world.meta.facilitator_history(&id) {
        println!(
            "{},{},{},{}",
            entry.transfer_id,
            entry.attested.as_str(),
            entry.outcome.as_str(),
            entry.tick
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match &cli.command {
        Command::Run { config, out, seed } => cmd_run(config, out, *seed),
        Command::Verify { snapshot } => cmd_verify(snapshot),
        Command::ExportGraph { snapshot, format } => cmd_export_graph(snapshot, *format),
        Command::ExportTrust { snapshot, format } => cmd_export_trust(snapshot, *format),
        Command::History { snapshot, facilitator } => cmd_history(snapshot, facilitator),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
