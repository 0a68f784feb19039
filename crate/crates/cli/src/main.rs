use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use njr_core::bench::{run_suite, BenchConfig};
use njr_core::config::{execute, AgentKind, RunConfig, StdinSource};
use njr_core::nfi::HandlerMode;
use njr_core::{ErrorClass, RunError};

#[derive(Parser)]
#[command(
    name = "njr",
    version,
    about = "Run programs with embedded natural-code blocks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one program and print its final value.
    Run {
        program: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Read `input()` lines from this file instead of standard input.
        #[arg(long, value_name = "FILE")]
        stdin: Option<PathBuf>,
    },
    /// Run every program in a suite directory and report pass rates.
    Bench {
        suite_dir: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Number of programs to run concurrently.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Write the JSON report here.
        #[arg(long, value_name = "FILE")]
        report_out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// scripted, replay or llm.
    #[arg(long, default_value = "scripted")]
    agent: String,
    /// shared, eval, tools or isolated.
    #[arg(long, default_value = "shared")]
    mode: String,
    #[arg(long, value_name = "FILE")]
    script: Option<PathBuf>,
    /// Recorded trace to replay.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    trace_out: Option<PathBuf>,
    #[arg(long)]
    cache: bool,
    #[arg(long, value_name = "FILE")]
    cache_path: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    max_effects: usize,
    /// Per-block timeout in seconds.
    #[arg(long, default_value_t = 1000.0)]
    timeout: f64,
    #[arg(long, default_value = "gpt-4o-mini")]
    model: String,
    #[arg(long, overrides_with = "no_eager")]
    eager: bool,
    #[arg(long = "no-eager", overrides_with = "eager")]
    no_eager: bool,
}

impl Common {
    fn config(self) -> Result<RunConfig, RunError> {
        let agent = AgentKind::from_name(&self.agent)
            .ok_or_else(|| RunError::Usage(format!("unknown agent `{}`", self.agent)))?;
        let mode = HandlerMode::from_name(&self.mode)
            .ok_or_else(|| RunError::Usage(format!("unknown mode `{}`", self.mode)))?;
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err(RunError::Usage("--timeout must be positive".into()));
        }
        Ok(RunConfig {
            agent,
            mode,
            max_effects: self.max_effects,
            timeout: Duration::from_secs_f64(self.timeout),
            eager: !self.no_eager,
            cache: self.cache,
            script: self.script,
            trace: self.trace,
            trace_out: self.trace_out,
            cache_path: self.cache_path,
            model: self.model,
            ..RunConfig::default()
        })
    }
}

fn fail(e: &RunError) -> ExitCode {
    let class = e.class();
    eprintln!("njr: {}: {e}", class.name());
    code(class)
}

fn code(class: ErrorClass) -> ExitCode {
    ExitCode::from(class.exit_code() as u8)
}

fn cmd_run(program: &Path, common: Common, stdin: Option<PathBuf>) -> ExitCode {
    let mut config = match common.config() {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    config.stdin = stdin.map_or(StdinSource::Terminal, StdinSource::File);
    config.live_output = true;
    let exec = match execute(&config, program, None) {
        Ok(x) => x,
        Err(e) => return fail(&e),
    };
    let r = &exec.result;
    if config.cache {
        eprintln!(
            "njr: cache hits {}, agent calls {}",
            exec.cache_hits, exec.inner_agent_calls
        );
    }
    match &r.outcome {
        Ok(_) => {
            if let Some(v) = r.display_value() {
                println!("{v}");
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("njr: {}: {f}", f.class().name());
            code(f.class())
        }
    }
}

fn cmd_bench(
    suite: &Path,
    common: Common,
    repeats: usize,
    parallel: usize,
    report_out: Option<PathBuf>,
) -> ExitCode {
    let base = match common.config() {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let cfg = BenchConfig {
        base,
        repeats,
        parallel,
    };
    let report = match run_suite(suite, &cfg) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    print!("{}", report.table());
    if let Some(path) = report_out {
        if let Err(e) = std::fs::write(&path, report.to_json()) {
            return fail(&RunError::Io(e));
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            program,
            common,
            stdin,
        } => cmd_run(&program, common, stdin),
        Command::Bench {
            suite_dir,
            common,
            repeats,
            parallel,
            report_out,
        } => cmd_bench(&suite_dir, common, repeats, parallel, report_out),
    }
}
