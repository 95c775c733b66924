//! `lobsim`: run simulations, compute stylized-fact reports, compare reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use lobsim::compare::compare;
use lobsim::config::PRESETS;
use lobsim::ingest::{self, ReadMode};
use lobsim::metrics::{analyze, AnalysisOptions, MetricEntry, MetricReport, Source};
use lobsim::types::parse_duration;
use lobsim::{EventType, SimConfig};

/// Default directory for outputs when `--out` is omitted.
const OUT_DIR_ENV: &str = "LOBSIM_OUT_DIR";

#[derive(Parser)]
#[command(name = "lobsim", version, about = "Limit order book simulator and stylized-fact metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulated session and write its event log.
    Simulate(SimulateArgs),
    /// Compute metrics over event logs (or quote snapshots) into a JSON report.
    Analyze(AnalyzeArgs),
    /// Compare two metric reports.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Shipped configuration.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS), conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Consecutive seeds to run, starting at --seed; run in parallel.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// Event log path (`.gz` compresses). With --runs > 1 the seed is
    /// inserted before the extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Event logs; the first drives single-trace metrics, all feed `cross.*`.
    #[arg(long, num_args = 1.., required_unless_present = "quotes", conflicts_with = "quotes")]
    events: Vec<PathBuf>,
    /// Best-quote snapshot log, for data without order-level events.
    #[arg(long)]
    quotes: Option<PathBuf>,
    /// Comma-separated metric ids, or `all`.
    #[arg(long, default_value = "all")]
    metrics: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base return scale.
    #[arg(long, default_value = "60s")]
    dt: String,
    /// Aggregation interval for volume, volatility and impact.
    #[arg(long, default_value = "5m")]
    tau: String,
    /// Impact participation bins.
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Drop invalid rows instead of aborting.
    #[arg(long)]
    lenient: bool,
    /// Also write each metric's curve as `<dir>/<metric id>.csv`.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    candidate: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn default_out(name: &str) -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
        .join(name)
}

/// `events.csv` + seed 7 -> `events-seed7.csv`, keeping `.csv.gz` intact.
fn seeded_path(path: &Path, seed: u64) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let (stem, ext) = match name.find('.') {
        Some(i) => name.split_at(i),
        None => (name.as_str(), ""),
    };
    path.with_file_name(format!("{stem}-seed{seed}{ext}"))
}

/// The configuration used for a log sits next to it.
fn config_sidecar(events: &Path) -> PathBuf {
    let mut s = events.as_os_str().to_owned();
    s.push(".config.toml");
    PathBuf::from(s)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let (config, label) = match (&args.preset, &args.config) {
        (Some(p), _) => (SimConfig::preset(p)?, p.clone()),
        (None, Some(path)) => (
            SimConfig::from_file(path)?,
            path.file_stem().map_or("config".into(), |s| s.to_string_lossy().into_owned()),
        ),
        (None, None) => unreachable!("clap requires one of --preset/--config"),
    };
    if args.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let base = args.out.unwrap_or_else(|| default_out(&format!("{label}.csv")));
    let seeds: Vec<u64> = (0..args.runs).map(|i| args.seed + i).collect();
    let path_for = |seed| if args.runs == 1 { base.clone() } else { seeded_path(&base, seed) };

    let started = Instant::now();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let results: Vec<Result<()>> = std::thread::scope(|scope| {
        let chunks: Vec<Vec<u64>> = (0..threads)
            .map(|t| seeds.iter().copied().skip(t).step_by(threads).collect())
            .collect();
        let handles: Vec<_> = chunks
            .into_iter()
            .filter(|c| !c.is_empty())
            .map(|chunk| {
                let config = &config;
                let path_for = &path_for;
                scope.spawn(move || {
                    chunk
                        .into_iter()
                        .map(|seed| run_one(config, seed, &path_for(seed)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    for r in results {
        r?;
    }
    eprintln!(
        "{} run(s) of `{label}` finished in {:.2}s",
        seeds.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn run_one(config: &SimConfig, seed: u64, out: &Path) -> Result<()> {
    let started = Instant::now();
    let run = lobsim::simulate(config, seed)?;
    ingest::write_event_log(&run.trace, out)?;
    std::fs::write(config_sidecar(out), {
        let mut c = config.clone();
        c.seed = seed;
        c.to_toml()
    })
    .with_context(|| format!("writing config next to {}", out.display()))?;
    let counts: Vec<String> = [
        EventType::SubmitLimit,
        EventType::SubmitMarket,
        EventType::Cancel,
        EventType::Execute,
    ]
    .iter()
    .map(|t| format!("{t}={}", run.trace.count(*t)))
    .collect();
    eprintln!(
        "seed {seed}: {} events ({}), {} messages expired at close, {:.2}s -> {}",
        run.trace.len(),
        counts.join(" "),
        run.stats.messages_expired,
        started.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn analyze_cmd(args: AnalyzeArgs) -> Result<()> {
    let opts = AnalysisOptions {
        dt: parse_duration(&args.dt).map_err(anyhow::Error::msg)?,
        tau: parse_duration(&args.tau).map_err(anyhow::Error::msg)?,
        bins: args.bins,
        ..Default::default()
    };
    opts.validate()?;
    let mode = if args.lenient { ReadMode::Lenient } else { ReadMode::Strict };
    let mut traces = Vec::new();
    for path in &args.events {
        let outcome = ingest::read_event_log(path, mode).with_context(|| format!("reading {}", path.display()))?;
        for v in &outcome.violations {
            eprintln!("{}: dropped {v}", path.display());
        }
        info!("{}: {} events", path.display(), outcome.trace.len());
        traces.push(outcome.trace);
    }
    let snaps;
    let source = match &args.quotes {
        Some(q) => {
            snaps = ingest::read_quote_log(q).with_context(|| format!("reading {}", q.display()))?;
            Source::Quotes(&snaps)
        }
        None => Source::Events(&traces),
    };
    let mut report = analyze(source, &opts)?;
    if args.metrics.trim() != "all" {
        let ids: Vec<String> = args
            .metrics
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        report = report.select(&ids)?;
    }
    let inputs: Vec<String> = args
        .events
        .iter()
        .chain(args.quotes.iter())
        .map(|p| p.display().to_string())
        .collect();
    report.insert("meta.inputs", MetricEntry::note(serde_json::to_string(&inputs)?));
    if let Some(first) = args.events.first() {
        if let Ok(cfg) = std::fs::read_to_string(config_sidecar(first)) {
            report.insert("meta.config", MetricEntry::note(cfg));
        }
    }
    let out = args.out.unwrap_or_else(|| default_out("report.json"));
    ingest::write_report(&report, &out)?;
    if let Some(dir) = &args.curves {
        write_curves(&report, dir)?;
    }
    let unavailable = report.entries.values().filter(|e| !e.is_available()).count();
    eprintln!(
        "{} metrics ({unavailable} unavailable) -> {}",
        report.entries.keys().filter(|k| !k.starts_with("meta.")).count(),
        out.display()
    );
    Ok(())
}

fn write_curves(report: &MetricReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (id, entry) in report.entries.iter().filter(|(_, e)| !e.curve.is_empty()) {
        let mut text = String::from("x,y\n");
        for [x, y] in &entry.curve {
            text.push_str(&format!("{x},{y}\n"));
        }
        let path = dir.join(format!("{id}.csv"));
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn compare_cmd(args: CompareArgs) -> Result<()> {
    let baseline = ingest::read_report(&args.baseline).with_context(|| format!("reading {}", args.baseline.display()))?;
    let candidate =
        ingest::read_report(&args.candidate).with_context(|| format!("reading {}", args.candidate.display()))?;
    let diff = compare(&baseline, &candidate);
    let out = args.out.unwrap_or_else(|| default_out("diff.json"));
    std::fs::write(&out, diff.to_json_bytes()?).with_context(|| format!("writing {}", out.display()))?;
    eprintln!(
        "{} common, {} only in baseline, {} only in candidate -> {}",
        diff.common.len(),
        diff.missing_in_candidate.len(),
        diff.missing_in_baseline.len(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Compare(a) => compare_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
