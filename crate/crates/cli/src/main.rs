//! `riddle`: evaluation, timing simulation and live replay from the command line.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 backend failure.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use riddle_core::adapters::{load_replay_transcript, serve_qa};
use riddle_core::config::AppConfig;
use riddle_core::dataset::{load_annotations, load_riddle_dataset, write_annotations, write_riddle_csv, RiddleDataset};
use riddle_core::harness::{
    evaluate, human_benchmark, render_report, render_timing, run_live, synthetic_annotations, synthetic_dataset,
    write_output, EvalError, Protocol, QaBackend, ReportFormat, VoteGranularity,
};
use riddle_core::pipeline::{simulate_timing, write_pipeline_log, Clock, ExecutionMode};

#[derive(Parser)]
#[command(name = "riddle", version, about = "Riddle-round answering: evaluation, timing and live replay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `eval.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: ReportFormat,
}

#[derive(Args, Clone)]
struct DatasetArgs {
    /// Riddle CSV.
    #[arg(long)]
    dataset: PathBuf,
    /// Contest year for rows without a `Year` cell.
    #[arg(long, default_value_t = 2019)]
    year: i32,
}

#[derive(Subcommand)]
enum Command {
    /// Every clue at once, one QA sample per riddle.
    EvalAllClues {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DatasetArgs,
    },
    /// Growing input through the voting policy.
    EvalMockLive {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DatasetArgs,
        /// Overrides `eval.threshold`.
        #[arg(long)]
        threshold: Option<u32>,
        /// Overrides `eval.vote_granularity` (per_chunk or per_clue).
        #[arg(long, value_parser = parse_granularity)]
        granularity: Option<VoteGranularity>,
    },
    /// Scores human annotations (clue number and correctness per riddle).
    HumanBenchmark {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        annotations: PathBuf,
    },
    /// Lag of the four-stage chain on a virtual clock.
    SimulateTiming {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        chunks: usize,
        /// Overrides `pipeline.mode` (sequential or pipelined).
        #[arg(long, value_parser = parse_mode)]
        mode: Option<ExecutionMode>,
    },
    /// Replays a timed transcript through the live chain and scores it.
    RunLive {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DatasetArgs,
        /// CSV with start_s, end_s, text and optional riddle_id.
        #[arg(long)]
        transcript: PathBuf,
        /// Event log (line-delimited JSON).
        #[arg(long)]
        events: Option<PathBuf>,
        /// Overrides `pipeline.clock` (virtual or wall).
        #[arg(long, value_parser = parse_clock)]
        clock: Option<Clock>,
        /// Treat any "riddle" token as a riddle start.
        #[arg(long)]
        lenient: bool,
    },
    /// Serves the configured QA backend as line-delimited JSON on stdin/stdout.
    QaServe {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        data: DatasetArgs,
    },
    /// Writes a seeded synthetic dataset, and optionally synthetic annotations.
    Synthesize {
        #[arg(long, default_value_t = 156)]
        n: usize,
        #[arg(long, default_value_t = 2019)]
        year: i32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dataset CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Annotation CSV to write.
        #[arg(long, requires = "correct")]
        annotations: Option<PathBuf>,
        /// Riddles marked correct in the annotations.
        #[arg(long)]
        correct: Option<usize>,
    },
}

fn parse_granularity(s: &str) -> Result<VoteGranularity, String> {
    match s {
        "per_chunk" | "per-chunk" => Ok(VoteGranularity::PerChunk),
        "per_clue" | "per-clue" => Ok(VoteGranularity::PerClue),
        _ => Err(format!("{s:?}: expected per_chunk or per_clue")),
    }
}

fn parse_mode(s: &str) -> Result<ExecutionMode, String> {
    match s {
        "sequential" => Ok(ExecutionMode::Sequential),
        "pipelined" => Ok(ExecutionMode::Pipelined),
        _ => Err(format!("{s:?}: expected sequential or pipelined")),
    }
}

fn parse_clock(s: &str) -> Result<Clock, String> {
    match s {
        "virtual" => Ok(Clock::Virtual),
        "wall" => Ok(Clock::Wall),
        _ => Err(format!("{s:?}: expected virtual or wall")),
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<AppConfig, EvalError> {
    let mut config = match path {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    if let Some(seed) = seed {
        config.eval.seed = seed;
    }
    Ok(config)
}

fn load_dataset(data: &DatasetArgs) -> Result<RiddleDataset, EvalError> {
    Ok(load_riddle_dataset(&data.dataset, data.year)?)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), EvalError> {
    match out {
        Some(path) => write_output(path, bytes),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|source| EvalError::Io { path: "<stdout>".into(), source })
        }
    }
}

fn run(command: Command) -> Result<(), EvalError> {
    match command {
        Command::EvalAllClues { common, data } => {
            let config = load_config(common.config.as_deref(), common.seed)?;
            let dataset = load_dataset(&data)?;
            let eval = riddle_core::EvalConfig { protocol: Protocol::AllClues, ..config.eval_config() };
            let report = evaluate(&dataset, &eval, &config.prompt)?;
            emit(common.out.as_deref(), &render_report(&report, common.format))
        }
        Command::EvalMockLive { common, data, threshold, granularity } => {
            let mut config = load_config(common.config.as_deref(), common.seed)?;
            if let Some(t) = threshold {
                config.eval.threshold = t;
            }
            if let Some(g) = granularity {
                config.eval.vote_granularity = g;
            }
            let dataset = load_dataset(&data)?;
            let eval = riddle_core::EvalConfig { protocol: Protocol::MockLive, ..config.eval_config() };
            eval.validate()?;
            let report = evaluate(&dataset, &eval, &config.prompt)?;
            emit(common.out.as_deref(), &render_report(&report, common.format))
        }
        Command::HumanBenchmark { common, data, annotations } => {
            load_config(common.config.as_deref(), common.seed)?;
            let dataset = load_dataset(&data)?;
            let annotations = load_annotations(&annotations)?;
            let report = human_benchmark(&dataset, &annotations)?;
            emit(common.out.as_deref(), &render_report(&report, common.format))
        }
        Command::SimulateTiming { common, chunks, mode } => {
            let mut config = load_config(common.config.as_deref(), common.seed)?;
            if let Some(m) = mode {
                config.pipeline.mode = m;
            }
            let plan = config.stage_plan()?;
            let report = simulate_timing(&plan, &config.chunking, chunks, config.eval.seed)?;
            log::info!("max lag {:.3}s, mean lag {:.3}s", report.max_lag_s, report.mean_lag_s);
            emit(common.out.as_deref(), &render_timing(&report, common.format))
        }
        Command::RunLive { common, data, transcript, events, clock, lenient } => {
            let mut config = load_config(common.config.as_deref(), common.seed)?;
            if let Some(c) = clock {
                config.pipeline.clock = c;
            }
            if lenient {
                config.detector.lenient_keyword = true;
            }
            let dataset = load_dataset(&data)?;
            let transcript = load_replay_transcript(&transcript)?;
            let pipeline = config.pipeline_config()?;
            let qa = config.qa.build(&dataset)?;
            let out = run_live(&dataset, &transcript, &config.stt, qa.as_ref(), config.tts.latency_s, &pipeline)?;
            if let Some(path) = events {
                let mut log = Vec::new();
                write_pipeline_log(&mut log, &out.run.events)
                    .map_err(|source| EvalError::Io { path: path.clone(), source })?;
                write_output(&path, &log)?;
            }
            emit(common.out.as_deref(), &render_report(&out.report, common.format))
        }
        Command::QaServe { config, data } => {
            let config = load_config(config.as_deref(), None)?;
            if matches!(config.qa, QaBackend::Process { .. } | QaBackend::Socket { .. }) {
                return Err(EvalError::Config("qa-serve needs an in-process backend (oracle or constant)".into()));
            }
            let dataset = load_dataset(&data)?;
            let qa = config.qa.build(&dataset)?;
            let stdin = io::stdin().lock();
            let served = serve_qa(stdin, io::stdout().lock(), qa.as_ref())
                .map_err(|source| EvalError::Io { path: "<stdio>".into(), source })?;
            log::info!("served {served} requests");
            Ok(())
        }
        Command::Synthesize { n, year, seed, out, annotations, correct } => {
            let dataset = synthetic_dataset(n, year, seed);
            let mut buf = Vec::new();
            write_riddle_csv(&mut buf, &dataset.riddles)?;
            write_output(&out, &buf)?;
            if let (Some(path), Some(correct)) = (annotations, correct) {
                if correct > n {
                    return Err(EvalError::Config(format!("--correct {correct} exceeds --n {n}")));
                }
                let mut buf = Vec::new();
                write_annotations(&mut buf, &synthetic_annotations(&dataset, correct, seed))?;
                write_output(&path, &buf)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
