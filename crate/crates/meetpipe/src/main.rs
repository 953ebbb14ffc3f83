use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use meetpipe::error::{Error, Result};
use meetpipe::formats::segment_json;
use meetpipe::pipeline::{
    evaluate_corpus, evaluate_meeting, run_corpus, simulate, EvalConfig, PipelineConfig, SimSpec,
    Stage,
};

/// Meeting transcription pipeline: separation, VAD, ASR adapters,
/// syntax-aware diarization, and exact scoring.
#[derive(Parser)]
#[command(name = "meetpipe", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic meeting corpus with ground truth.
    Simulate(SimulateArgs),
    /// Run the processing pipeline over a meeting or corpus directory.
    Run(RunArgs),
    /// Score a hypothesis directory against a truth directory.
    Evaluate(EvaluateArgs),
    /// Score a single hypothesis file against a single truth file.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation spec file (flat key = value).
    #[arg(long)]
    spec: PathBuf,
    /// Output corpus directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the spec's base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    /// Meeting directory (with mixture.wav) or corpus directory of meetings.
    input: PathBuf,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Pipeline config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parallel meetings.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the sub-segmentation scheme.
    #[arg(long)]
    scheme: Option<String>,
    /// Stop after this stage (css, vad, asr, diarize).
    #[arg(long)]
    stage: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Truth corpus directory (per-meeting truth.json).
    #[arg(long)]
    truth: PathBuf,
    /// Hypothesis directory (per-meeting words.json).
    #[arg(long)]
    hyp: PathBuf,
    /// Write the JSON report here (default: <hyp>/report.json).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Truth segment-JSON file.
    #[arg(long)]
    truth: PathBuf,
    /// Hypothesis segment-JSON file.
    #[arg(long)]
    hyp: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let mut spec = SimSpec::read_file(&args.spec)?;
            if let Some(seed) = args.seed {
                spec.mix.seed = seed;
            }
            let ids = simulate(&spec, &args.out)?;
            println!("simulated {} meetings under {}", ids.len(), args.out.display());
            Ok(())
        }
        Command::Run(args) => {
            let mut cfg = match &args.config {
                Some(path) => PipelineConfig::read_file(path)?,
                None => PipelineConfig::default(),
            };
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(scheme) = &args.scheme {
                cfg.scheme = meetpipe::diarize::Scheme::from_str(scheme)
                    .map_err(|e| Error::Usage(e.to_string()))?;
            }
            let stage = match &args.stage {
                Some(s) => Some(Stage::from_str(s).map_err(|e| Error::Usage(e.to_string()))?),
                None => None,
            };
            let ids = run_corpus(&cfg, &args.input, &args.out, args.jobs, stage)?;
            println!("processed {} meetings into {}", ids.len(), args.out.display());
            Ok(())
        }
        Command::Evaluate(args) => {
            let report = evaluate_corpus(&args.truth, &args.hyp, &EvalConfig::default())?;
            let out = args
                .out
                .clone()
                .unwrap_or_else(|| args.hyp.join("report.json"));
            std::fs::write(&out, report.to_json()?).map_err(|e| Error::io(&out, e))?;
            print!("{}", report.to_text());
            println!("report written to {}", out.display());
            Ok(())
        }
        Command::Metrics(args) => {
            let truth = segment_json::read_file(&args.truth)?;
            let hyp = segment_json::read_file(&args.hyp)?;
            let report = evaluate_meeting("single", &truth, &hyp, &EvalConfig::default())?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::parse("report", e.to_string()))?;
            println!("{json}");
            Ok(())
        }
    }
}
