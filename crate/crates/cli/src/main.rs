//! `reeblab`: runs one laboratory pipeline from a JSON config and writes
//! JSON/CSV reports.
//!
//! Exit codes: 0 success, 2 schema or precondition error, 3 numerical
//! failure, 4 inconclusive criterion verdict, 5 I/O failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use log::{info, warn, LevelFilter};
use serde_json::Value;

use commands::{Context, Status};
use config::RunConfig;
use output::{write_artifacts, ErrorReport, Header};

pub const SEED_ENV: &str = "REEBLAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "reeblab", version, about = "Reeb flow laboratory driven by JSON configs")]
struct Args {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: hardware parallelism).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    verbose: bool,
}

pub enum CliError {
    Schema { message: String, key: Option<String> },
    Core(reeblab::Error),
    Io(String),
}

impl CliError {
    pub fn schema(message: String) -> Self {
        let key = offending_key(&message);
        CliError::Schema { message, key }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema { .. } => 2,
            CliError::Core(e) if e.is_contract_violation() => 2,
            CliError::Core(_) => 3,
            CliError::Io(_) => 5,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Schema { .. } => "schema",
            CliError::Core(e) if e.is_contract_violation() => "precondition",
            CliError::Core(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    fn report(&self, header: Option<Header>) -> ErrorReport {
        let (message, key) = match self {
            CliError::Schema { message, key } => (message.clone(), key.clone()),
            CliError::Core(e) => (e.to_string(), None),
            CliError::Io(m) => (m.clone(), None),
        };
        ErrorReport {
            status: "error",
            exit_code: self.exit_code() as i32,
            kind: self.kind(),
            message,
            key,
            header,
        }
    }
}

impl From<reeblab::Error> for CliError {
    fn from(e: reeblab::Error) -> Self {
        CliError::Core(e)
    }
}

/// Field named in a serde "unknown field" or "missing field" message.
fn offending_key(message: &str) -> Option<String> {
    ["unknown field `", "missing field `", "unknown variant `"]
        .iter()
        .find_map(|p| {
            let rest = &message[message.find(p)? + p.len()..];
            Some(rest[..rest.find('`')?].to_string())
        })
}

struct Prepared {
    config: RunConfig,
    seed: Option<u64>,
    header: Header,
    out_dir: PathBuf,
}

fn load_config(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::schema(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::schema(format!("config is not valid JSON: {e}")))
}

fn prepare(raw: Value, args: &Args) -> Result<Prepared, CliError> {
    let mut config: RunConfig = serde_json::from_value(raw).map_err(|e| CliError::schema(e.to_string()))?;
    let model = config.model();
    let mut seed = config.seed.or(model.seed);
    if let Ok(s) = std::env::var(SEED_ENV) {
        let v: u64 = s
            .trim()
            .parse()
            .map_err(|_| CliError::schema(format!("{SEED_ENV}={s:?} is not a non-negative integer")))?;
        warn!("{SEED_ENV}={v} overrides config seed {seed:?}");
        seed = Some(v);
    }
    if config.command.is_stochastic() && seed.is_none() {
        return Err(CliError::Schema {
            message: format!("command {} is stochastic and requires a seed", config.command.name()),
            key: Some("seed".into()),
        });
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    // the hash covers everything that determines the results
    config.seed = seed;
    config.model = Some(model);
    let canonical = serde_json::to_string(&RunConfig {
        output_dir: None,
        ..config.clone()
    })
    .expect("config serializes");
    let header = Header::new(config.command.name(), &canonical, seed);
    Ok(Prepared {
        config,
        seed,
        header,
        out_dir,
    })
}

fn fail(err: &CliError, header: Option<Header>, out_dir: Option<&Path>) -> ExitCode {
    let report = err.report(header).to_json();
    if let Some(dir) = out_dir {
        let written = fs::create_dir_all(dir).and_then(|_| fs::write(dir.join("error.json"), &report));
        if let Err(e) = written {
            warn!("could not write error.json: {e}");
        }
    }
    eprint!("{report}");
    ExitCode::from(err.exit_code())
}

fn run(args: &Args) -> ExitCode {
    let level = if args.verbose {
        LevelFilter::Info
    } else {
        LevelFilter::Warn
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .init();
    let raw = match load_config(&args.config) {
        Ok(v) => v,
        Err(e) => return fail(&e, None, args.out.as_deref()),
    };
    let fallback_dir = args
        .out
        .clone()
        .or_else(|| raw.get("output_dir").and_then(Value::as_str).map(PathBuf::from));
    let prep = match prepare(raw, args) {
        Ok(p) => p,
        Err(e) => return fail(&e, None, fallback_dir.as_deref()),
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("thread pool: {e}");
        }
    }
    info!(
        "command {} on {} with {} threads",
        prep.config.command.name(),
        prep.config.model().model,
        rayon::current_num_threads()
    );
    let ctx = Context {
        config: &prep.config,
        seed: prep.seed,
    };
    let outcome = match commands::dispatch(&ctx) {
        Ok(o) => o,
        Err(e) => return fail(&e, Some(prep.header), Some(&prep.out_dir)),
    };
    let paths = match write_artifacts(&prep.out_dir, &prep.header, &outcome.artifacts) {
        Ok(p) => p,
        Err(e) => {
            let err = CliError::Io(format!("writing reports to {}: {e}", prep.out_dir.display()));
            return fail(&err, Some(prep.header), Some(&prep.out_dir));
        }
    };
    for p in &paths {
        info!("wrote {}", p.display());
    }
    info!("{}", outcome.summary);
    match outcome.status {
        Status::Ok => {
            let _ = fs::remove_file(prep.out_dir.join("error.json"));
            ExitCode::SUCCESS
        }
        Status::Inconclusive => {
            warn!("inconclusive: {}", outcome.summary);
            let _ = fs::remove_file(prep.out_dir.join("error.json"));
            ExitCode::from(4)
        }
        Status::Failed(msg) => {
            let err = CliError::Core(reeblab::Error::Numerical(msg));
            fail(&err, Some(prep.header), Some(&prep.out_dir))
        }
    }
}

fn main() -> ExitCode {
    run(&Args::parse())
}
