//! wavecrew command line: single-task runs, corpus benchmarks, Monte-Carlo
//! sweeps, gain maps, and ledger inspection.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use wavecrew_core::agents::{BackendConfig, BackendMode};
use wavecrew_core::harness::{
    compute_metrics, emit_report, load_corpus, render_table, run_corpus, write_run_ledger,
    BatchSetup, CorpusTask, Report, RunLedgerEntry,
};
use wavecrew_core::memory::{Stage, SystemMemory};
use wavecrew_core::orchestrator::{OrchestratorConfig, TaskStatus};
use wavecrew_phy::gainmap::gain_map;
use wavecrew_phy::solvers::sweep::{DEFAULT_ANTENNA_GRID, DEFAULT_POWER_GRID_DBM};
use wavecrew_phy::solvers::{sweep_antennas, sweep_power};
use wavecrew_phy::ScenarioConfig;

#[derive(Parser)]
#[command(
    name = "wavecrew",
    version,
    about = "Multi-agent wireless optimization pipeline"
)]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic component.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one task from a JSON task file through the pipeline.
    Run(RunArgs),
    /// Run a task corpus and emit the metrics table.
    Bench(BenchArgs),
    /// Monte-Carlo sweep over transmit power or antenna count.
    Sweep(SweepArgs),
    /// Sample the channel gain map over the drop region.
    Gainmap(GainmapArgs),
    /// Print a task's records from a ledger file.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BackendArg {
    Scripted,
    Live,
}

#[derive(Args)]
struct RunArgs {
    /// Task file: one JSON object {task_id, query, domain_tags?, fixtures_ref}.
    #[arg(long)]
    task: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendArg::Scripted)]
    backend: BackendArg,
    /// Override the simulation attempt budget.
    #[arg(long)]
    max_attempts: Option<u32>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Fixture-set root for scripted replay; defaults to the config value.
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Corpus file: a JSON array of task objects.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendArg::Scripted)]
    backend: BackendArg,
    /// Worker threads for task execution.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[arg(long)]
    max_attempts: Option<u32>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SweepAxisArg {
    Power,
    Antennas,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep axis.
    #[arg(value_enum)]
    axis: SweepAxisArg,
    /// Monte-Carlo drops per grid point.
    #[arg(long, default_value_t = 50)]
    drops: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct GainmapArgs {
    /// Grid step in metres.
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    /// Ledger file (JSONL) written by run or bench.
    #[arg(long)]
    ledger: PathBuf,
    /// Task id to print.
    #[arg(long)]
    task: String,
}

/// Mirror of the TOML config file. Every key is optional; flags win.
#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    orchestrator: OrchestratorConfig,
    scenario: ScenarioConfig,
    backend: BackendConfig,
    sandbox_timeout_s: u64,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            orchestrator: OrchestratorConfig::default(),
            scenario: ScenarioConfig::default(),
            backend: BackendConfig::default(),
            sandbox_timeout_s: 120,
        }
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let raw =
        std::fs::read_to_string(path).with_context(|| format!("read config {}", path.display()))?;
    toml::from_str(&raw).with_context(|| format!("parse config {}", path.display()))
}

fn stage_label(stage: Stage) -> String {
    serde_json::to_value(stage)
        .expect("stage serializes")
        .as_str()
        .expect("stage is a string")
        .to_string()
}

fn batch_setup(
    mut cfg: FileConfig,
    backend: BackendArg,
    max_attempts: Option<u32>,
    fixtures: Option<PathBuf>,
    out: &Path,
) -> anyhow::Result<BatchSetup> {
    cfg.backend.mode = match backend {
        BackendArg::Scripted => BackendMode::Scripted,
        BackendArg::Live => BackendMode::Live,
    };
    if let Some(n) = max_attempts {
        cfg.orchestrator.max_attempts = n;
    }
    if let Some(dir) = fixtures {
        cfg.backend.fixture_dir = dir;
    }
    cfg.orchestrator
        .validate()
        .map_err(|reason| anyhow::anyhow!("invalid orchestrator config: {reason}"))?;
    cfg.backend.validate().context("invalid backend config")?;
    cfg.scenario.validate().context("invalid scenario config")?;
    Ok(BatchSetup {
        orchestrator: cfg.orchestrator,
        fixtures_root: cfg.backend.fixture_dir.clone(),
        backend: cfg.backend,
        out_dir: out.to_path_buf(),
        scenario: cfg.scenario,
        sandbox_timeout: Duration::from_secs(cfg.sandbox_timeout_s),
    })
}

fn print_outcome(entry: &RunLedgerEntry, out_dir: &Path) {
    let outcome = &entry.outcome;
    match &outcome.status {
        TaskStatus::Solved => println!(
            "task {}: solved in {} attempt(s), score {:.2}",
            entry.task_id,
            outcome.attempts_used,
            outcome.final_score.unwrap_or(0.0)
        ),
        TaskStatus::Exhausted => println!(
            "task {}: exhausted after {} attempt(s)",
            entry.task_id, outcome.attempts_used
        ),
        TaskStatus::Aborted { stage, reason } => println!(
            "task {}: aborted at {}: {reason}",
            entry.task_id,
            stage_label(*stage)
        ),
    }
    println!(
        "ledger: {}",
        out_dir.join(&entry.task_id).join("ledger.jsonl").display()
    );
}

fn cmd_run(cfg: FileConfig, args: RunArgs) -> anyhow::Result<ExitCode> {
    let raw = std::fs::read_to_string(&args.task)
        .with_context(|| format!("read task file {}", args.task.display()))?;
    let task: CorpusTask = serde_json::from_str(&raw)
        .with_context(|| format!("parse task file {}", args.task.display()))?;
    let setup = batch_setup(
        cfg,
        args.backend,
        args.max_attempts,
        args.fixtures,
        &args.out,
    )?;
    let entries = run_corpus(std::slice::from_ref(&task), &setup, 1);
    let entry = &entries[0];
    print_outcome(entry, &setup.out_dir);
    Ok(if entry.outcome.is_solved() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_bench(cfg: FileConfig, args: BenchArgs) -> anyhow::Result<ExitCode> {
    let tasks = load_corpus(&args.corpus)?;
    let setup = batch_setup(
        cfg,
        args.backend,
        args.max_attempts,
        args.fixtures,
        &args.out,
    )?;
    let entries = run_corpus(&tasks, &setup, args.parallel);
    write_run_ledger(&entries, &setup.out_dir.join("run_ledger.jsonl"))?;
    let metrics = compute_metrics(&entries)?;
    let paths = emit_report(&Report::Metrics(&metrics), &setup.out_dir)?;
    print!("{}", render_table(&metrics));
    for path in paths {
        eprintln!("wrote {}", path.display());
    }
    let aborted = entries
        .iter()
        .filter(|e| matches!(e.outcome.status, TaskStatus::Aborted { .. }))
        .count();
    if aborted > 0 {
        eprintln!("{aborted} task(s) aborted; see per-task ledgers");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(cfg: FileConfig, seed: u64, args: SweepArgs) -> anyhow::Result<ExitCode> {
    if args.drops == 0 {
        bail!("--drops must be at least 1");
    }
    cfg.scenario.validate().context("invalid scenario config")?;
    let result = match args.axis {
        SweepAxisArg::Power => {
            sweep_power(&cfg.scenario, &DEFAULT_POWER_GRID_DBM, args.drops, seed)?
        }
        SweepAxisArg::Antennas => {
            sweep_antennas(&cfg.scenario, &DEFAULT_ANTENNA_GRID, args.drops, seed)?
        }
    };
    let paths = emit_report(&Report::Sweep(&result), &args.out)?;
    println!(
        "swept {} over {} grid points, {} drops each",
        result.axis.label(),
        result.points.len(),
        result.drops
    );
    for point in &result.points {
        let cells: Vec<String> = point
            .stats
            .iter()
            .map(|s| format!("{}={:.3}", s.solver.label(), s.mean_rate_bps_hz))
            .collect();
        println!(
            "  {}={}: {}",
            result.axis.label(),
            point.axis_value,
            cells.join(" ")
        );
    }
    println!("wrote {}", paths[0].display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_gainmap(cfg: FileConfig, seed: u64, args: GainmapArgs) -> anyhow::Result<ExitCode> {
    if !(args.step > 0.0) {
        bail!("--step must be positive");
    }
    cfg.scenario.validate().context("invalid scenario config")?;
    let map = gain_map(&cfg.scenario, args.step, seed);
    let paths = emit_report(&Report::GainMap(&map), &args.out)?;
    println!(
        "gain map: {} x {} points at {} m spacing",
        map.xs.len(),
        map.ys.len(),
        map.step_m
    );
    println!("wrote {}", paths[0].display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_inspect(args: InspectArgs) -> anyhow::Result<ExitCode> {
    let memory = SystemMemory::restore(&args.ledger)
        .with_context(|| format!("restore ledger {}", args.ledger.display()))?;
    let records = memory.query(&args.task, None, None);
    if records.is_empty() {
        bail!(
            "no records for task {:?} in {}",
            args.task,
            args.ledger.display()
        );
    }
    for record in records {
        let payload = record.payload.to_string();
        let short: String = payload.chars().take(100).collect();
        let ellipsis = if payload.chars().count() > 100 {
            "..."
        } else {
            ""
        };
        println!(
            "{:>4}  {:<10}  {:<19}  {:<17}  {short}{ellipsis}",
            record.seq,
            stage_label(record.stage),
            record.role.slug(),
            record.kind
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Run(args) => cmd_run(cfg, args),
        Command::Bench(args) => cmd_bench(cfg, args),
        Command::Sweep(args) => cmd_sweep(cfg, cli.seed, args),
        Command::Gainmap(args) => cmd_gainmap(cfg, cli.seed, args),
        Command::Inspect(args) => cmd_inspect(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
