use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use varsob::run::{exit_code, run, RunConfig, COMMANDS};
use varsob::Error;

#[derive(Parser, Debug)]
#[command(name = "varsob", version, about = "Variable-exponent Sobolev constant experiments")]
struct Args {
    /// One of: norm, modular, sobolev-min, talenti, localized, scaling, continuity,
    /// dilation, thm61, subcritical-ball, cc-check, classify, check-relations.
    /// Falls back to the `command` field of the config.
    command: Option<String>,

    /// JSON run configuration; every field has a default.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for the CSV table and summary.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    #[arg(long)]
    seed: Option<u64>,

    /// Cells along the longest side of the domain.
    #[arg(long)]
    resolution: Option<usize>,

    /// Only report errors.
    #[arg(long)]
    quiet: bool,
}

fn load(args: &Args) -> Result<(String, RunConfig), Error> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(res) = args.resolution {
        cfg.resolution = res;
    }
    let command = args
        .command
        .clone()
        .or_else(|| cfg.command.clone())
        .ok_or_else(|| Error::Config(format!("no command given; expected one of {}", COMMANDS.join(", "))))?;
    Ok((command, cfg))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = load(&args).and_then(|(command, cfg)| run(&command, &cfg, &args.out));
    match outcome {
        Ok(o) => {
            if !args.quiet {
                let verdict = match o.verdict {
                    Some(true) => "pass",
                    Some(false) => "fail",
                    None => "none",
                };
                println!("verdict: {verdict}");
                println!("table: {}", o.csv.display());
                println!("summary: {}", o.summary_path.display());
            }
            ExitCode::from(exit_code(o.verdict) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
