use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gridmind_core::cogmap::{CotVariant, Fidelity};
use gridmind_core::dataset::{
    dataset_files, generate_dataset, read_records, verify_dataset, DatasetConfig,
};
use gridmind_core::exec::Exec;
use gridmind_core::generate::{GenParams, Split};
use gridmind_core::harness::{
    evaluate_batch, serve, AgentKind, EvalConfig, EvalItem, Mode, DEFAULT_MAX_STEPS,
};
use gridmind_core::stats::{dataset_stats, export_heatmap, Metric};

#[derive(Parser)]
#[command(
    name = "gridmind",
    version,
    about = "Gridworld planning datasets and agent evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sharded JSONL dataset plus its statistics file.
    Generate(GenerateArgs),
    /// Re-check every record of a dataset; exits nonzero on any violation.
    Verify {
        path: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Aggregate statistics and export a per-size heatmap.
    Stats {
        path: PathBuf,
        #[arg(long, default_value = "complexity")]
        heatmap: Metric,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Run an agent over the environments of a dataset.
    Eval(EvalArgs),
    /// Serve a scripted agent over the JSON-lines protocol on stdin/stdout.
    Serve {
        #[arg(long, default_value = "oracle")]
        agent: String,
        #[arg(long, default_value = "reachable")]
        mode: Mode,
        #[arg(long, env = "GRIDMIND_SEED", default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    split: Split,
    #[arg(long)]
    variant: CotVariant,
    #[arg(long)]
    count: u64,
    #[arg(long, env = "GRIDMIND_SEED")]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    shards: usize,
    #[arg(long)]
    out: PathBuf,
    /// 0 uses every core, 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value_t = GenParams::DEFAULT_WALL_DENSITY)]
    wall_density: f64,
    #[arg(long, default_value_t = GenParams::DEFAULT_PIT_DENSITY)]
    pit_density: f64,
    /// Write the first backtrack entry fused with its action, e.g. "(3, 2)up".
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset file or directory whose environments are evaluated.
    #[arg(long)]
    test_file: PathBuf,
    /// oracle, random, dfs, const:WORD, plans:FILE, bridge:URL or bridge:stdio:COMMAND
    #[arg(long)]
    agent: String,
    #[arg(long, default_value = "reachable")]
    mode: Mode,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: usize,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, env = "GRIDMIND_SEED", default_value_t = 0)]
    seed: u64,
    /// Per-turn timeout for bridged agents, in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Evaluate only the first N environments.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    report: PathBuf,
    /// JSONL file receiving one transcript per episode.
    #[arg(long)]
    transcripts: Option<PathBuf>,
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut config = DatasetConfig::new(args.split, args.variant, args.count, args.seed);
    config.shards = args.shards;
    config.params.wall_density = args.wall_density;
    config.params.pit_density = args.pit_density;
    if args.strict {
        config.fidelity = Fidelity::Strict;
    }
    let summary = generate_dataset(&config, &args.out, Exec::with_workers(args.workers))?;
    for f in &summary.files {
        println!("{}", f.display());
    }
    println!("{}", summary.stats_file.display());
    Ok(())
}

fn verify(path: &Path, workers: usize) -> Result<bool> {
    let files = dataset_files(path)?;
    if files.is_empty() {
        bail!("no .jsonl files under {}", path.display());
    }
    let report = verify_dataset(&files, Exec::with_workers(workers))?;
    for v in &report.violations {
        let index = v.index.map_or_else(|| "?".to_string(), |i| i.to_string());
        for p in &v.problems {
            println!("{}:{} (index {index}): {p}", v.file.display(), v.line);
        }
    }
    println!(
        "{} files, {} records, {} violations",
        report.files,
        report.records,
        report.violations.len()
    );
    Ok(report.is_clean())
}

fn stats(path: &Path, metric: Metric, out: &Path) -> Result<()> {
    let records = read_records(&dataset_files(path)?)?;
    let report = dataset_stats(&records)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let json = out.join("stats.json");
    fs::write(&json, report.to_json_pretty())
        .with_context(|| format!("writing {}", json.display()))?;
    let (csv, svg) = export_heatmap(&report, metric, out)?;
    for p in [json, csv, svg] {
        println!("{}", p.display());
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let mut agent: AgentKind = args.agent.parse().map_err(anyhow::Error::msg)?;
    if let AgentKind::Bridge(config) = &mut agent {
        config.timeout = Duration::from_secs(args.timeout);
    }
    let mut records = read_records(&dataset_files(&args.test_file)?)?;
    if let Some(n) = args.limit {
        records.truncate(n);
    }
    let items: Vec<EvalItem> = records
        .into_iter()
        .map(|r| EvalItem {
            record_index: r.index,
            spec: r.spec,
        })
        .collect();
    let config = EvalConfig {
        mode: args.mode,
        max_steps: args.max_steps,
        seed: args.seed,
        exec: Exec::with_workers(args.workers),
    };
    let output = evaluate_batch(&items, &agent, &config);
    let report = &output.report;
    fs::write(&args.report, serde_json::to_string_pretty(report)?)
        .with_context(|| format!("writing {}", args.report.display()))?;
    if let Some(path) = &args.transcripts {
        let mut f = std::io::BufWriter::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        );
        for (summary, transcript) in report.results.iter().zip(&output.transcripts) {
            let line = serde_json::json!({
                "episode": summary.episode,
                "index": summary.record_index,
                "outcome": summary.outcome,
                "messages": transcript,
            });
            writeln!(f, "{line}")?;
        }
        f.flush()?;
    }
    for (outcome, rate) in &report.rates {
        println!("{outcome:<9} {:>6} {:>8.4}", report.counts[outcome], rate);
    }
    if report.aborted > 0 {
        println!("aborted   {:>6}", report.aborted);
    }
    Ok(())
}

fn serve_stdio(agent: &str, mode: Mode, seed: u64) -> Result<()> {
    let agent: AgentKind = agent.parse().map_err(anyhow::Error::msg)?;
    let stdin = std::io::stdin().lock();
    let stdout = std::io::stdout().lock();
    serve(stdin, stdout, &agent, mode, seed)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => generate(args).map(|_| true),
        Command::Verify { path, workers } => verify(&path, workers),
        Command::Stats { path, heatmap, out } => stats(&path, heatmap, &out).map(|_| true),
        Command::Eval(args) => eval(args).map(|_| true),
        Command::Serve { agent, mode, seed } => serve_stdio(&agent, mode, seed).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
