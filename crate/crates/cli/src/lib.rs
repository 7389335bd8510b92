//! The `tundra` command-line tool.
//!
//! Exit codes: 0 on success, 2 for usage and validation errors, 3 when a
//! job or other execution step fails.

pub mod bench;
mod commands;
pub mod rpc;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use tundra_core::{Engine, Error};
use tundra_repo::RepoError;

pub const WORKERS_ENV: &str = "TUNDRA_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_EXEC: i32 = 3;

/// A failed command, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn exec(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_EXEC,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Whether an engine error is the caller's fault (2) or an execution
/// failure (3).
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Job(_) | Error::Io(_) | Error::Fit(_) | Error::NoJobYet => EXIT_EXEC,
        Error::Stage { source, .. } => exit_code(source),
        _ => EXIT_USAGE,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<RepoError> for Failure {
    fn from(e: RepoError) -> Failure {
        let code = match e {
            RepoError::MalformedManifest { .. } | RepoError::UnknownModel(_) => EXIT_USAGE,
            _ => EXIT_EXEC,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::exec(format!("i/o error: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(name = "tundra", version, about = "Data-parallel image ML pipelines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct WorkerArgs {
    /// Worker threads; defaults to $TUNDRA_WORKERS, then the CPU count.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl WorkerArgs {
    pub fn engine(&self) -> Result<Arc<Engine>, Failure> {
        Ok(Engine::with_workers(self.count()?)?)
    }

    pub fn count(&self) -> Result<usize, Failure> {
        if let Some(n) = self.workers {
            return Ok(n);
        }
        default_workers()
    }
}

pub fn default_workers() -> Result<usize, Failure> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("{WORKERS_ENV}={v:?} is not a worker count"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a pipeline spec on a corpus or rows file and write the output.
    Run {
        #[arg(long)]
        pipeline: PathBuf,
        /// Corpus directory or rows file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Partitions of the input; defaults to twice the workers.
        #[arg(long)]
        partitions: Option<usize>,
        #[command(flatten)]
        workers: WorkerArgs,
    },
    /// Run the transfer-learning ladder on a corpus.
    Experiment {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "LR120,RN1,RN2,RN2+A,RN2+A+E")]
        variants: String,
        /// Network manifest; the reference network is generated when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<i64>,
        #[command(flatten)]
        workers: WorkerArgs,
    },
    /// Write a synthetic camera-trap corpus.
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        cameras: usize,
        #[arg(long, default_value_t = 3)]
        bursts_per_camera: usize,
        #[arg(long, default_value_t = 4)]
        burst_len: usize,
        #[arg(long, default_value_t = 0.1)]
        leopard_frac: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time image featurization at several worker counts.
    Bench {
        #[arg(long, default_value_t = 2000)]
        images: usize,
        #[arg(long, default_value = "1,2,4")]
        workers: String,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        #[arg(long, default_value_t = bench::DEFAULT_PARTITIONS)]
        partitions: usize,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Model repository access.
    Repo {
        #[command(subcommand)]
        action: RepoCommand,
    },
    /// Write the reference network (manifest, weights and a repository
    /// manifest listing both).
    GenModel {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = tundra_graph::reference::DEFAULT_SEED)]
        seed: u64,
    },
    /// Write the registry document consumed by the bindings generator.
    GenBindings {
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve line-delimited RPC requests on stdin/stdout.
    ServeRpc {
        #[command(flatten)]
        workers: WorkerArgs,
    },
    /// Convert a corpus directory or rows file to a rows file.
    Export {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Comma-separated columns to keep.
        #[arg(long)]
        columns: Option<String>,
        /// Partitions of the input; rows are written in partition order.
        #[arg(long)]
        partitions: Option<usize>,
        #[command(flatten)]
        workers: WorkerArgs,
    },
}

#[derive(Subcommand, Debug)]
pub enum RepoCommand {
    /// Fetch a model into the cache and print its path.
    Fetch {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        name: String,
        /// Defaults to $TUNDRA_CACHE, then ./tundra-cache.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Print the manifest entries.
    List {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Check a file against a SHA-256; exits 3 on mismatch.
    Verify {
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        sha256: String,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = write!(err, "{e}");
            return EXIT_USAGE;
        }
        Err(e) => {
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match commands::dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {f}");
            f.code
        }
    }
}
