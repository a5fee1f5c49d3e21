mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{Flags, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "linni", version, about = "Rigidity thresholds, quotients, branches and flows for the Neumann problem -Δu + λu = u^p")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FlowKind {
    Heat,
    Nonlinear,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Explicit lower and upper bounds on the rigidity threshold.
    Bounds,
    /// Spectral gap and its eigenfunction.
    Eigen,
    /// Minimize the interpolation quotient for each parameter in --lambda.
    Quotient,
    /// Bracket the threshold μ₂ by bisection on the sign of the deficit.
    Mu2,
    /// Trace the bifurcating branch and estimate μ₁.
    Mu1,
    /// Run the heat or the nonlinear flow.
    Flow {
        #[arg(value_enum)]
        kind: FlowKind,
    },
    /// Keller-Lieb-Thirring duality for each value in --mu.
    Klt,
    /// One-page JSON summary for a domain and exponent.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bounds => "bounds",
            Command::Eigen => "eigen",
            Command::Quotient => "quotient",
            Command::Mu2 => "mu2",
            Command::Mu1 => "mu1",
            Command::Flow { kind: FlowKind::Heat } => "flow-heat",
            Command::Flow { kind: FlowKind::Nonlinear } => "flow-nonlinear",
            Command::Klt => "klt",
            Command::Report => "report",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match RunConfig::resolve(&cli.flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let name = cli.command.name();
    let hash = cfg.hash(name);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .expect("thread pool");
    let result = pool.install(|| match cli.command {
        Command::Bounds => commands::bounds(&cfg),
        Command::Eigen => commands::eigen(&cfg),
        Command::Quotient => commands::quotient(&cfg),
        Command::Mu2 => commands::mu2(&cfg),
        Command::Mu1 => commands::mu1(&cfg),
        Command::Flow { kind: FlowKind::Heat } => commands::flow(&cfg, false),
        Command::Flow { kind: FlowKind::Nonlinear } => commands::flow(&cfg, true),
        Command::Klt => commands::klt(&cfg),
        Command::Report => commands::report(&cfg),
    });
    match result {
        Ok(out) => match write_output(&cfg, &out.render(name, &hash)) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Err(commands::Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Solver(e)) => {
            let diag = serde_json::json!({
                "command": name,
                "config_sha256": hash,
                "config": cfg,
                "error": e.to_string(),
            });
            let text = serde_json::to_string_pretty(&diag).expect("diagnostics serialize");
            eprintln!("{text}");
            if let Some(path) = cfg.out_path() {
                let mut p = path.as_os_str().to_owned();
                p.push(".diagnostics.json");
                let _ = std::fs::write(p, format!("{text}\n"));
            }
            ExitCode::from(1)
        }
    }
}

fn write_output(cfg: &RunConfig, text: &str) -> std::io::Result<()> {
    match cfg.out_path() {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}
