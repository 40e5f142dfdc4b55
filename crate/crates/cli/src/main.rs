use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use soo_platform::export::export_soo_csv;
use soo_platform::replay::{read_log, replay};
use soo_platform::{FileStore, Platform, PlatformConfig, SystemClock};
use soo_sim::{simulate, Scenario};

#[derive(Parser)]
#[command(name = "soo", version, about = "Set-of-objectives platform")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API over a persistent event log.
    Serve {
        /// JSON platform config; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
        /// Event log, created if missing and replayed if present.
        #[arg(long, default_value = "soo-events.jsonl")]
        log: PathBuf,
    },
    /// Run a synthetic crowd and print its report.
    Simulate {
        /// JSON scenario file.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        scenario: Option<PathBuf>,
        /// Built-in scenario instead of a file.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Where to write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Where to write the run's event log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Rebuild state from a log and print a summary.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
    /// Write the active tree of a log as CSV.
    Export {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        csv: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Pilot,
    Noiseless,
    Synonyms,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Serve { config, listen, log } => serve(config.as_deref(), &listen, &log),
        Command::Simulate {
            scenario,
            preset,
            seed,
            report,
            log,
        } => run_simulation(scenario.as_deref(), preset, seed, report.as_deref(), log.as_deref()),
        Command::Replay { log } => summarize(&log),
        Command::Export { log, csv } => export(&log, &csv),
    }
}

fn serve(config: Option<&Path>, listen: &str, log: &Path) -> Result<()> {
    let config = match config {
        Some(path) => PlatformConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => PlatformConfig::default(),
    };
    let (store, _) =
        FileStore::open(log).with_context(|| format!("opening log {}", log.display()))?;
    let platform = Platform::open(Box::new(store), Box::new(SystemClock), config)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .with_context(|| format!("binding {listen}"))?;
        println!("listening on {}", listener.local_addr()?);
        std::io::stdout().flush()?;
        axum::serve(listener, soo_platform::api::router(platform)).await?;
        Ok(())
    })
}

fn run_simulation(
    scenario: Option<&Path>,
    preset: Option<Preset>,
    seed: Option<u64>,
    report: Option<&Path>,
    log: Option<&Path>,
) -> Result<()> {
    let mut scenario = match (scenario, preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading scenario {}", path.display()))?;
            serde_json::from_str::<Scenario>(&text)
                .with_context(|| format!("parsing scenario {}", path.display()))?
        }
        (None, Some(p)) => {
            let seed = seed.unwrap_or(1);
            match p {
                Preset::Pilot => Scenario::pilot(seed),
                Preset::Noiseless => Scenario::noiseless(seed, 10),
                Preset::Synonyms => Scenario::synonyms(seed),
            }
        }
        (None, None) => bail!("either --scenario or --preset is required"),
    };
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let run = simulate(&scenario)?;
    let json = serde_json::to_string_pretty(&run.report)?;
    println!("{json}");
    println!("{}", run.report);
    if let Some(path) = report {
        fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = log {
        let text: String = run.events.iter().map(|e| e.to_line() + "\n").collect();
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn summarize(log: &Path) -> Result<()> {
    let events = read_log(log)?;
    let state = replay(&events)?;
    let (_, hash) = state.tree.snapshot();
    println!("events      {}", events.len());
    println!("last seq    {}", state.seq);
    println!("phase       {:?}", state.tree.phase());
    println!("elements    {}", state.tree.active_elements().count());
    println!("answers     {}", state.answer_count);
    println!("snapshot    {hash}");
    for m in state.tree.milestones() {
        let weights = if m.weights.is_some() { "weighted" } else { "unweighted" };
        println!("milestone {} at seq {} {} {weights}", m.id, m.at_seq, m.snapshot_hash);
    }
    Ok(())
}

fn export(log: &Path, csv: &Path) -> Result<()> {
    let state = replay(&read_log(log)?)?;
    fs::write(csv, export_soo_csv(&state)).with_context(|| format!("writing {}", csv.display()))?;
    Ok(())
}
