mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Value};

use regcomp::stats::experiments::CriterionOutcome;
use regcomp::Error;

use args::Cli;
use output::{now, Artifacts, Manifest};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or out-of-domain parameters.
    Invalid(String),
    /// Numerical or I/O failure during a run.
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::Domain(_)
            | Error::InfeasibleThreshold { .. }
            | Error::NonSummable(_)
            | Error::OverflowBudget { .. }
            | Error::TruncationRequired(_)
            | Error::DegenerateStop(_)
            | Error::UnsupportedIntegrator(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// What a command produced, for the manifest and the exit status.
#[derive(Default)]
pub struct Outcome {
    pub criteria: Vec<CriterionOutcome>,
    pub config: Option<Value>,
    pub seed: Option<u64>,
}

impl Outcome {
    fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed())
    }
}

pub fn print_criterion(c: &CriterionOutcome) {
    let tag = if c.passed() { "PASS" } else { "FAIL" };
    println!("{tag} {}", c.title);
    for check in &c.checks {
        println!("    {check}");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let started = now();
    let mut artifacts = Artifacts::new(commands::out_dir(cli.command, &cli.flags));
    let mut outcome = Outcome::default();
    let result = commands::run(cli.command, &cli.flags, &mut artifacts, &mut outcome);

    let (code, status, summary) = match &result {
        Ok(()) => {
            let passed = outcome.passed();
            let summary = json!(outcome
                .criteria
                .iter()
                .map(|c| json!({"title": c.title, "passed": c.passed(), "checks": c.checks.len()}))
                .collect::<Vec<_>>());
            if passed {
                (0u8, "pass", summary)
            } else {
                (1, "fail", summary)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            (e.exit_code(), "error", json!({"error": e.to_string()}))
        }
    };
    if let Some(dir) = artifacts.dir().map(|d| d.to_path_buf()) {
        let manifest = Manifest {
            command: cli.command.name().to_string(),
            argv,
            started,
            config: outcome.config.clone(),
            seed: outcome.seed,
        };
        let mut listed = artifacts.written.clone();
        listed.push("manifest.json".into());
        let body = manifest.finish(&listed, status, code as i32, summary);
        let text = serde_json::to_string_pretty(&body).expect("manifest serializes");
        if let Err(e) = output::write_atomic(&dir, "manifest.json", text.as_bytes()) {
            eprintln!("error: cannot write manifest: {e}");
            return ExitCode::from(1);
        }
    }
    ExitCode::from(code)
}
