mod commands;
mod config;
mod error;
mod manifest;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Config, MediatorKind};
use crate::error::CliError;
use crate::manifest::{RunManifest, MANIFEST_FILE};

#[derive(Parser)]
#[command(name = "parity-qst", version, about = "Quantum state transfer through a parity-protected Rabi mediator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    mediator: Option<MediatorKind>,
    /// Overwrite an existing run in --out.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Mediator spectrum over a parameter sweep.
    Spectrum {
        /// param:start:stop:points
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Population inversion and correlations between the external qubits.
    Transfer {
        /// Skip the full-model evolution.
        #[arg(long)]
        effective_only: bool,
    },
    /// Bloch-averaged state-transfer fidelity.
    Qst,
    /// Symmetry, selection-rule, convergence and thermal-state checks.
    Check,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Transfer { .. } => "transfer",
            Command::Qst => "qst",
            Command::Check => "check",
        }
    }
}

fn resolve(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = config::load(cli.config.as_deref())?;
    if let Some(n) = cli.samples {
        cfg.qst.samples = n;
    }
    if let Some(s) = cli.seed {
        cfg.qst.seed = s;
    }
    if let Some(m) = cli.mediator {
        cfg.mediator.kind = m;
    }
    if let Command::Spectrum { sweep: Some(s) } = &cli.command {
        cfg.spectrum.sweep = s.clone();
    }
    if let Command::Transfer { effective_only: true } = &cli.command {
        cfg.transfer.effective_only = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_outputs(dir: &Path, subcommand: &str, cfg: &Config, out: &commands::Output) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut names: Vec<String> = out.files.iter().map(|(n, _)| n.clone()).collect();
    for (name, bytes) in &out.files {
        fs::write(dir.join(name), bytes)?;
    }
    names.push(MANIFEST_FILE.to_string());
    let manifest = RunManifest::new(subcommand, cfg, names);
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest).expect("serializable"))?;
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let cfg = resolve(cli)?;
    if cli.out.join(MANIFEST_FILE).exists() && !cli.force {
        return Err(CliError::Exists(cli.out.clone()));
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let out = match &cli.command {
        Command::Spectrum { .. } => commands::spectrum(&cfg, cli.plot)?,
        Command::Transfer { effective_only } => commands::transfer(&cfg, *effective_only, cli.plot)?,
        Command::Qst => commands::qst(&cfg, cli.plot)?,
        Command::Check => commands::check(&cfg)?,
    };
    write_outputs(&cli.out, cli.command.name(), &cfg, &out)?;
    print!("{}", out.report);
    Ok(!out.check_failed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
