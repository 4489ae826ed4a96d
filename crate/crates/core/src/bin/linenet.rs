use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linenet::experiment::{self, ExperimentConfig, Report, ScenarioKind, PRESETS};
use linenet::Error;

#[derive(Parser)]
#[command(name = "linenet", version, about = "User-to-server allocation experiments on the line and in the plane")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate allocation policies on random line instances.
    Simulate(Common),
    /// Evaluate closed-form expected distances and costs.
    Analytic(Common),
    /// Heterogeneous server capacities: analytic value against simulation.
    Hetcap(Common),
    /// Assign users of one line instance (CSV in, assignment CSV out).
    Assign(Common),
    /// Planar matching through a one-dimensional embedding.
    Embed(Common),
    /// Run a scenario over a parameter grid.
    Sweep(Common),
    /// MTR, then every other policy on the MTR-matched users.
    Compare(Common),
    /// List built-in scenarios.
    Presets,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario name (see `linenet presets`).
    #[arg(long)]
    scenario: Option<String>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; trial k uses seed + k.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Input CSV for assign (role,location,capacity) or embed (role,x,y).
    #[arg(long)]
    input: Option<PathBuf>,
}

fn default_preset(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::Simulate => "bulk-mm1",
        ScenarioKind::Analytic => "analytic-basic",
        ScenarioKind::Hetcap => "heterogeneous-capacity",
        ScenarioKind::Assign => "assign-basic",
        ScenarioKind::Embed => "planar-matching",
        ScenarioKind::Sweep => "policy-comparison",
        ScenarioKind::Compare => "compare-basic",
    }
}

fn load(kind: ScenarioKind, args: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match (&args.config, &args.scenario) {
        (Some(_), Some(_)) => return Err(Error::Config(vec!["give either --config or --scenario, not both".into()])),
        (Some(path), None) => ExperimentConfig::from_path(path)?,
        (None, Some(name)) => experiment::preset(name)
            .ok_or_else(|| Error::Config(vec![format!("scenario: unknown preset {name:?}; known: {}", PRESETS.join(", "))]))?,
        (None, None) if kind == ScenarioKind::Assign && args.input.is_some() => ExperimentConfig::new(kind),
        (None, None) if kind == ScenarioKind::Embed && args.input.is_some() => ExperimentConfig::new(kind),
        (None, None) => experiment::preset(default_preset(kind)).expect("default preset"),
    };
    if cfg.scenario != kind {
        return Err(Error::Config(vec![format!(
            "scenario: config describes {:?} but the {} subcommand was used",
            cfg.scenario.name(),
            kind.name()
        )]));
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.clone());
    }
    if let Some(i) = &args.input {
        cfg.instance = Some(i.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sink(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn emit(report: &Report, path: &Option<PathBuf>) -> Result<(), Error> {
    let mut w = sink(path)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn execute(kind: ScenarioKind, args: &Common) -> Result<(), Error> {
    let cfg = load(kind, args)?;
    match kind {
        ScenarioKind::Embed if cfg.instance.is_some() => {
            let inst = experiment::embed_instance(&cfg, 0)?;
            let (table, summary) = experiment::embed_assignment(&inst, &cfg.embedding)?;
            emit(&table, &cfg.output)?;
            // summary goes to stdout; after the table when both share it
            if cfg.output.is_none() {
                println!();
            }
            emit(&summary, &None)
        }
        ScenarioKind::Compare => emit(&experiment::compare_policies(&cfg)?, &cfg.output),
        ScenarioKind::Sweep => emit(&experiment::sweep(&cfg)?, &cfg.output),
        _ => emit(&experiment::run(&cfg)?, &cfg.output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Simulate(a) => (ScenarioKind::Simulate, a),
        Command::Analytic(a) => (ScenarioKind::Analytic, a),
        Command::Hetcap(a) => (ScenarioKind::Hetcap, a),
        Command::Assign(a) => (ScenarioKind::Assign, a),
        Command::Embed(a) => (ScenarioKind::Embed, a),
        Command::Sweep(a) => (ScenarioKind::Sweep, a),
        Command::Compare(a) => (ScenarioKind::Compare, a),
        Command::Presets => {
            for name in PRESETS {
                let cfg = experiment::preset(name).expect("listed preset");
                println!("{name}\t{}", cfg.scenario.name());
            }
            return ExitCode::SUCCESS;
        }
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Config(list)) => {
            eprintln!("configuration error:");
            for m in list {
                eprintln!("  {m}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
