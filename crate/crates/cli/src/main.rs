use clap::{Parser, Subcommand};
use covllg::config::RunConfig;
use covllg::run::{execute, Command, EXIT_CONFIG};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "covllg", version, about = "Landau-Lifshitz-Gilbert runs, moving-frame diagnostics and Picard solves")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// run configuration (TOML); defaults apply when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory, overriding `output.dir`
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// scenario seed, overriding `scenario.seed`
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// start from a field checkpoint instead of the configured scenario
    #[arg(long, global = true)]
    resume: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Sub {
    /// Evolve the configured initial field and record norms and monitors
    RunLlg,
    /// Extract frames, connections and identity residuals along a run or from a checkpoint
    RunFrames,
    /// Solve the Ginzburg-Landau system for the frame data of the initial field
    RunPicard,
    /// Like run-llg with every monitor switched on
    Monitor,
    /// Print the reference configuration, or write it to OUT/reference.toml
    GenConfig,
}

fn load(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| e.to_string())?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    if let Some(seed) = cli.seed {
        cfg.scenario.seed = seed;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Sub::RunLlg => Command::RunLlg,
        Sub::RunFrames => Command::RunFrames,
        Sub::RunPicard => Command::RunPicard,
        Sub::Monitor => Command::Monitor,
        Sub::GenConfig => {
            let text = RunConfig::reference_text();
            return match &cli.out {
                None => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Some(dir) => match std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join("reference.toml"), text)) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => {
                        eprintln!("error: {e}");
                        ExitCode::from(EXIT_CONFIG as u8)
                    }
                },
            };
        }
    };
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    ExitCode::from(execute(command, &cfg, cli.resume.as_deref()) as u8)
}
