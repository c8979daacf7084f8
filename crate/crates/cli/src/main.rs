//! `bbandit`: run, sweep and plot blocked collaborative bandit experiments.

mod config;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blocked_bandits::baselines::{CollabConfig, EtcConfig, PbLatticeConfig};
use blocked_bandits::completion::diagnostics;
use blocked_bandits::env::{generate_instance, Dataset, GeneratorSpec, Instance};
use blocked_bandits::harness::{
    aggregate, sweep, write_csv, Algorithm, CellResult, CellRun, SweepReport, SweepSpec,
};
use blocked_bandits::{par, Error};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::{load, parse_seeds, RunConfig, Seeds, SweepConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(name = "bbandit", version, about)]
struct Cli {
    /// Config file (JSON) for `run` and `sweep`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `out_dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seeds: a count `n` (0..n), a range `a..b` or a list `a,b,c`.
    #[arg(long, global = true, value_parser = parse_seeds)]
    seeds: Option<Seeds>,
    /// Worker threads; BB_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one algorithm on one instance.
    Run,
    /// Run a grid of instances, algorithms, seeds and horizons.
    Sweep,
    /// Compare PB-LATTICE, ETC (m = 10, 30) and Collaborative-Greedy at
    /// M = N = 150 * scale, T = 60 * scale.
    Paperfig {
        #[arg(value_enum)]
        dataset: FigDataset,
        #[arg(default_value_t = 1.0)]
        scale: f64,
    },
    /// Print incoherence, condition number and cluster imbalance of an
    /// exported instance.
    Diag { instance: PathBuf },
    /// Export a generated instance as JSON.
    Generate {
        /// Generator spec (JSON).
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout if absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FigDataset {
    D1,
    D2,
    D3,
}

impl From<FigDataset> for Dataset {
    fn from(d: FigDataset) -> Self {
        match d {
            FigDataset::D1 => Dataset::D1,
            FigDataset::D2 => Dataset::D2,
            FigDataset::D3 => Dataset::D3,
        }
    }
}

struct Ctx {
    out_dir: Option<PathBuf>,
    seeds: Option<Vec<u64>>,
    quiet: bool,
}

impl Ctx {
    fn out_dir(&self, from_config: Option<&PathBuf>) -> Result<PathBuf, CliError> {
        let dir = self
            .out_dir
            .clone()
            .or_else(|| from_config.cloned())
            .unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(dir)
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn write_results(path: &Path, results: &[CellResult]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_csv(results, std::io::BufWriter::new(file))?;
    Ok(())
}

fn print_table(ctx: &Ctx, report: &SweepReport) {
    ctx.say(format!(
        "{:<12} {:<16} {:>6} {:>12} {:>10} {:>10} {:>10}",
        "dataset", "algorithm", "runs", "regret", "stderr", "min", "max"
    ));
    for c in &report.cells {
        match c.regret {
            Some(s) => ctx.say(format!(
                "{:<12} {:<16} {:>6} {:>12.4} {:>10.4} {:>10.4} {:>10.4}",
                c.dataset, c.algorithm, s.n, s.mean, s.stderr, s.min, s.max
            )),
            None => ctx.say(format!(
                "{:<12} {:<16} {:>6} {:>12}",
                c.dataset, c.algorithm, 0, "failed"
            )),
        }
    }
    for f in &report.failures {
        log::warn!(
            "{} {} seed {} failed: {}",
            f.dataset,
            f.algorithm,
            f.seed,
            f.error
        );
    }
}

fn finish_sweep(
    ctx: &Ctx,
    spec: &SweepSpec,
    results: &[CellResult],
    dir: &Path,
    stem: &str,
) -> Result<SweepReport, CliError> {
    let report = SweepReport::new(spec, results);
    write_results(&dir.join(format!("{stem}.csv")), results)?;
    write_json(&dir.join("summary.json"), &report)?;
    print_table(ctx, &report);
    if !report.failures.is_empty() {
        return Err(CliError::Runtime(format!(
            "{} of {} cells failed; see summary.json",
            report.failures.len(),
            results.len()
        )));
    }
    Ok(report)
}

fn cmd_run(ctx: &Ctx, path: &Path) -> Result<(), CliError> {
    let mut cfg: RunConfig = load(path)?;
    if let Some(seeds) = &ctx.seeds {
        cfg.seeds = seeds.clone();
    }
    cfg.validate()?;
    let dir = ctx.out_dir(cfg.out_dir.as_ref())?;
    let fixed = match &cfg.instance_file {
        Some(file) => {
            let text = fs::read_to_string(file)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", file.display())))?;
            Some(Instance::from_json(&text)?)
        }
        None => None,
    };
    let label = cfg.algorithm.label();
    let dataset = cfg
        .instance
        .as_ref()
        .map_or("file", |s| s.dataset.name())
        .to_string();
    let runs = par::map(&cfg.seeds, |&seed| -> Result<_, Error> {
        let inst = match (&fixed, &cfg.instance) {
            (Some(inst), _) => inst.clone(),
            (None, Some(spec)) => generate_instance(spec, seed)?,
            (None, None) => unreachable!("validated"),
        };
        let ep = cfg.algorithm.run(&inst, seed)?;
        ep.ledger.audit()?;
        Ok((inst.budget(), ep))
    });
    let mut results = Vec::with_capacity(runs.len());
    for (&seed, run) in cfg.seeds.iter().zip(runs) {
        let (budget, ep) = run?;
        if cfg.event_log {
            let path = dir.join(format!("events-{seed}.jsonl"));
            let file = fs::File::create(&path).map_err(io_err(&path))?;
            ep.log.write_jsonl(std::io::BufWriter::new(file))?;
        }
        results.push(CellResult {
            dataset: dataset.clone(),
            instance: 0,
            horizon: ep.trace.horizon,
            algorithm: label.clone(),
            seed,
            outcome: Ok(CellRun {
                max_count: ep.ledger.max_count(),
                budget,
                roundwise_mean_reward: ep.trace.roundwise_mean_reward,
                cumulative_regret: ep.trace.cumulative_regret,
            }),
        });
    }
    write_results(&dir.join("trace.csv"), &results)?;
    let cells = aggregate(&results);
    write_json(
        &dir.join("summary.json"),
        &serde_json::json!({ "config": cfg, "cells": cells }),
    )?;
    if let Some(s) = cells[0].regret {
        ctx.say(format!(
            "{label}: regret {:.4} +- {:.4} over {} seeds ({})",
            s.mean,
            s.stderr,
            s.n,
            dir.display()
        ));
    }
    Ok(())
}

fn cmd_sweep(ctx: &Ctx, path: &Path) -> Result<(), CliError> {
    let mut cfg: SweepConfig = load(path)?;
    if let Some(seeds) = &ctx.seeds {
        cfg.seeds = seeds.clone();
    }
    let spec = cfg.spec();
    spec.validate()?;
    let dir = ctx.out_dir(cfg.out_dir.as_ref())?;
    let results = sweep(&spec)?;
    finish_sweep(ctx, &spec, &results, &dir, "sweep").map(|_| ())
}

/// The comparison grid of `paperfig`.
pub fn paperfig_spec(dataset: Dataset, scale: f64, seeds: Vec<u64>) -> Result<SweepSpec, CliError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(CliError::Config(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let clusters = 4;
    let n = ((150.0 * scale).round() as usize).max(clusters);
    let horizon = ((60.0 * scale).round() as usize).max(1);
    Ok(SweepSpec {
        instances: vec![GeneratorSpec::preset(dataset, n, n, clusters, horizon, 1)],
        algorithms: vec![
            Algorithm::Pblattice(PbLatticeConfig::default()),
            Algorithm::Etc(EtcConfig::with_rounds(10)),
            Algorithm::Etc(EtcConfig::with_rounds(30)),
            Algorithm::CollabGreedy(CollabConfig::default()),
        ],
        seeds,
        horizons: vec![],
    })
}

fn cmd_paperfig(ctx: &Ctx, dataset: Dataset, scale: f64) -> Result<(), CliError> {
    let spec = paperfig_spec(
        dataset,
        scale,
        ctx.seeds.clone().unwrap_or_else(|| (0..5).collect()),
    )?;
    let dir = ctx.out_dir(None)?;
    let results = sweep(&spec)?;
    let stem = format!("paperfig_{}", dataset.name());
    let report = finish_sweep(ctx, &spec, &results, &dir, &stem)?;
    let data = format!("{stem}.dat");
    let data_path = dir.join(&data);
    fs::write(&data_path, plot::curves(&report.cells)).map_err(io_err(&data_path))?;
    let title = format!("{} at scale {scale}", dataset.name());
    let script_path = dir.join(format!("{stem}.gp"));
    fs::write(
        &script_path,
        plot::gnuplot_script(&report.cells, &data, &title),
    )
    .map_err(io_err(&script_path))?;
    ctx.say(format!(
        "wrote {stem}.csv, {data} and {stem}.gp to {}",
        dir.display()
    ));
    Ok(())
}

fn cmd_diag(ctx: &Ctx, path: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let inst = Instance::from_json(&text)?;
    let d = diagnostics(
        inst.mean_reward_matrix(),
        inst.cluster_of(),
        inst.clusters(),
    )?;
    if ctx.quiet {
        return Ok(());
    }
    println!("mu {}", d.mu());
    println!("mu_row {}", d.mu_row);
    println!("mu_col {}", d.mu_col);
    println!("kappa {}", d.kappa);
    println!("tau {}", d.tau);
    Ok(())
}

fn cmd_generate(spec: &Path, seed: u64, output: Option<&Path>) -> Result<(), CliError> {
    let spec: GeneratorSpec = load(spec)?;
    let text = generate_instance(&spec, seed)?.to_json()?;
    match output {
        Some(path) => fs::write(path, text + "\n").map_err(io_err(path)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    match std::env::var("BB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "BB_THREADS must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(flag),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        if !par::configure_threads(n) && par::is_parallel() {
            log::warn!("thread pool already initialised; ignoring thread count {n}");
        }
    }
    let ctx = Ctx {
        out_dir: cli.out_dir,
        seeds: cli.seeds.map(|s| s.0),
        quiet: cli.quiet,
    };
    let need_config = || {
        cli.config
            .clone()
            .ok_or_else(|| CliError::Config("this command needs --config".into()))
    };
    match cli.command {
        Command::Run => cmd_run(&ctx, &need_config()?),
        Command::Sweep => cmd_sweep(&ctx, &need_config()?),
        Command::Paperfig { dataset, scale } => cmd_paperfig(&ctx, dataset.into(), scale),
        Command::Diag { instance } => cmd_diag(&ctx, &instance),
        Command::Generate { spec, seed, output } => cmd_generate(&spec, seed, output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.kind().to_string();
            let detail = e.to_string();
            let first = detail
                .lines()
                .next()
                .unwrap_or(&msg)
                .trim_start_matches("error: ");
            return report(&CliError::Config(first.to_string()));
        }
    };
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> ExitCode {
    let (kind, msg, code) = match e {
        CliError::Config(m) => ("config", m, 1),
        CliError::Runtime(m) => ("runtime", m, 2),
    };
    eprintln!("{}", serde_json::json!({ "error": kind, "message": msg }));
    ExitCode::from(code)
}
