use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, CommandFactory, Parser, Subcommand};

use biogrid_core::agents::{Policy, PolicyKind};
use biogrid_core::envs::{env_registry, registry_config, EnvConfig, EnvId};
use biogrid_core::harness::{
    derive_seed, init_threads_from_env, policy_rng, run_benchmark, run_suite, write_report,
    BenchmarkOptions, BenchmarkReport, Phase, ReportFormat, SeedSpec, WriteOptions,
};
use biogrid_core::protocol::{serve, Endpoint};
use biogrid_core::render::render_frame;
use biogrid_core::world::WorldState;

#[derive(Debug, Parser)]
#[command(
    name = "biogrid",
    version,
    about = "Multi-objective gridworld benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one environment with one baseline policy and write a report.
    Bench(BenchArgs),
    /// Print one episode step by step.
    Replay(ReplayArgs),
    /// List the registered environments and their score dimensions.
    ListEnvs,
    /// Serve the line-delimited JSON protocol.
    Serve {
        /// `host:port` or `stdio:`
        #[arg(long, default_value = "127.0.0.1:7878")]
        endpoint: Endpoint,
    },
    /// Run every environment against both baselines.
    Suite(SuiteArgs),
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Write 0 for wall_clock_s so repeated runs are byte-identical.
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_parser = env_parser())]
    env: EnvId,
    #[arg(long, default_value = "random")]
    policy: PolicyKind,
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    /// Override the episode length.
    #[arg(long)]
    steps: Option<u32>,
    #[arg(long, default_value = "test")]
    phase: Phase,
    /// TOML config replacing the registry defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long, value_parser = env_parser())]
    env: EnvId,
    #[arg(long, default_value = "random")]
    policy: PolicyKind,
    #[arg(long, default_value = "test")]
    phase: Phase,
    #[arg(long, default_value_t = 0)]
    episode: u64,
    /// Print an ASCII frame before each step's scores.
    #[arg(long)]
    render: bool,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    #[arg(long, default_value = "test")]
    phase: Phase,
    #[command(flatten)]
    report: ReportArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            eprint!("{text}");
            if !text.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn env_parser() -> impl TypedValueParser<Value = EnvId> {
    PossibleValuesParser::new(EnvId::ALL.map(EnvId::name))
        .map(|name| name.parse::<EnvId>().expect("registered name"))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Bench(args) => bench(args),
        Command::Replay(args) => replay(args),
        Command::ListEnvs => list_envs(),
        Command::Serve { endpoint } => {
            if let Endpoint::Tcp(addr) = &endpoint {
                eprintln!("listening on {addr}");
            }
            serve(&endpoint).context("server failed")
        }
        Command::Suite(args) => suite(args),
    }
}

fn load_config(env: EnvId, path: Option<&Path>) -> Result<EnvConfig> {
    let Some(path) = path else {
        return Ok(registry_config(env));
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config =
        EnvConfig::from_toml_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    anyhow::ensure!(
        config.env_id == env,
        "{} configures {}, not {}",
        path.display(),
        config.env_id,
        env
    );
    Ok(config)
}

fn emit(report: &BenchmarkReport, args: &ReportArgs) -> Result<()> {
    let options = WriteOptions {
        omit_timing: args.omit_timing,
    };
    match &args.out {
        Some(path) => write_report(report, args.format, path, options)?,
        None => {
            let text = match args.format {
                ReportFormat::Csv => report.to_csv(options)?,
                ReportFormat::Json => report.to_json(options)? + "\n",
            };
            io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    init_threads_from_env();
    let config = load_config(args.env, args.config.as_deref())?;
    let options = BenchmarkOptions {
        episodes: args.episodes,
        phase: args.phase,
        steps: args.steps,
        parallel: true,
    };
    let row = run_benchmark(&config, args.policy, options)?;
    emit(&BenchmarkReport { rows: vec![row] }, &args.report)
}

fn suite(args: SuiteArgs) -> Result<()> {
    init_threads_from_env();
    let options = BenchmarkOptions {
        episodes: args.episodes,
        phase: args.phase,
        ..BenchmarkOptions::default()
    };
    let report = run_suite(options)?;
    emit(&report, &args.report)
}

fn replay(args: ReplayArgs) -> Result<()> {
    let config = Arc::new(registry_config(args.env));
    let spec = SeedSpec::new(args.env.name(), args.phase, args.episode);
    let seed = derive_seed(&spec);
    let mut world = WorldState::new(Arc::clone(&config), seed)?;
    let mut policies: Vec<Policy> = (0..config.n_agents)
        .map(|i| Policy::new(args.policy, &config, policy_rng(seed, i)))
        .collect();
    let mut out = io::BufWriter::new(io::stdout().lock());
    let mut observations = world.observe_all();
    while !world.is_done() {
        if args.render {
            writeln!(out, "tick {}", world.tick())?;
            out.write_all(render_frame(&world).as_bytes())?;
        }
        let actions: Vec<_> = policies
            .iter_mut()
            .zip(&observations)
            .map(|(p, o)| p.act(o))
            .collect();
        let outcome = world.step(&actions)?;
        for (agent, scores) in outcome.scores.iter().enumerate() {
            write!(
                out,
                "step {} agent {} action {}",
                world.tick(),
                agent,
                actions[agent].name()
            )?;
            for (d, x) in scores.iter() {
                write!(out, " {d}={x}")?;
            }
            writeln!(out)?;
        }
        observations = outcome.observations;
    }
    if args.render {
        writeln!(out, "tick {}", world.tick())?;
        out.write_all(render_frame(&world).as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn list_envs() -> Result<()> {
    let mut out = io::stdout().lock();
    for config in env_registry() {
        let dims: Vec<String> = config
            .active_dimensions
            .iter()
            .map(|d| d.to_string())
            .collect();
        writeln!(
            out,
            "{:<28} {:>2} agent(s) {}x{} {} steps  {}",
            config.env_id.name(),
            config.n_agents,
            config.width,
            config.height,
            config.episode_length,
            dims.join(",")
        )?;
    }
    Ok(())
}
