use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use hyseek_cli::commands::{self, resolve_out_dir};
use hyseek_cli::config::RunConfig;

/// Run, sweep and compare extremum-seeking scenarios.
#[derive(Parser)]
#[command(name = "hyseek", version)]
struct Cli {
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the scenario registry.
    List {
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Simulate one configuration and export the arc.
    Run(Common),
    /// Run one simulation per value of `sweep.param`.
    Sweep(Common),
    /// Measure closeness to the scenario's reference arc.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// Run file with dotted `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario name; shorthand for `--set scenario.name=...`.
    #[arg(long)]
    scenario: Option<String>,
    /// Extra `key=value` settings applied after the run file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory; otherwise `output.dir`, then `$HYSEEK_OUT_DIR`, then `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized selections; overrides `solver.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<(RunConfig, PathBuf)> {
        let mut cfg = match (&self.config, &self.scenario) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::for_scenario(name),
            (None, None) => anyhow::bail!("pass --config or --scenario"),
        };
        if let Some(name) = &self.scenario {
            cfg.scenario = name.clone();
        }
        for pair in &self.set {
            cfg.set_pair(pair)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        let out = resolve_out_dir(self.out.as_deref(), &cfg);
        Ok((cfg, out))
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::List { json } => commands::list(json),
        Cmd::Run(c) => {
            let (cfg, out) = c.resolve()?;
            commands::run(&cfg, &out)
        }
        Cmd::Sweep(c) => {
            let (cfg, out) = c.resolve()?;
            commands::sweep(&cfg, &out)
        }
        Cmd::Compare(c) => {
            let (cfg, out) = c.resolve()?;
            commands::compare(&cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
