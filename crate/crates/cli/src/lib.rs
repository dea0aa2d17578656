//! Batch front end: every subcommand reads CSV inputs, writes CSV artifacts
//! into an output directory and records a `manifest.json` from which the
//! run can be repeated byte for byte.

pub mod args;
mod commands;
pub mod manifest;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::Parser;

use args::{Cli, Command, Invocation, OUT_ENV};
use manifest::{digest, FileDigest, Manifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] triadic::Error),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        use triadic::Error as E;
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Core(E::Training(_) | E::DegenerateClass { .. } | E::Io(_)) => EXIT_RUNTIME,
            Failure::Core(_) => EXIT_VALIDATION,
        }
    }
}

/// Collects the files a command writes.
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
    seeds: Vec<u64>,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self, Failure> {
        fs::create_dir_all(&dir)?;
        Ok(Output { dir, files: Vec::new(), seeds: Vec::new() })
    }

    /// Opens `name` (relative to the output directory) for writing.
    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(BufWriter::new(File::create(path)?))
    }

    pub fn record_seeds(&mut self, seeds: &[u64]) {
        self.seeds.extend_from_slice(seeds);
    }
}

fn default_out() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("triadic-out"))
}

fn absolute(p: &Path) -> Result<PathBuf, Failure> {
    fs::canonicalize(p).map_err(|e| triadic::Error::NotFound(format!("{}: {e}", p.display())).into())
}

/// Makes input paths absolute so the manifest does not depend on the
/// working directory, and returns them.
fn resolve_inputs(cmd: &mut Command) -> Result<Vec<PathBuf>, Failure> {
    let mut paths = Vec::new();
    let mut fix = |p: &mut PathBuf| -> Result<(), Failure> {
        *p = absolute(p)?;
        paths.push(p.clone());
        Ok(())
    };
    match cmd {
        Command::Stats(a) => {
            fix(&mut a.input.nodes)?;
            fix(&mut a.input.edges)?;
        }
        Command::Influence(a) => {
            fix(&mut a.nodes)?;
            fix(&mut a.edges)?;
        }
        Command::TrainLocal(a) => {
            fix(&mut a.input.nodes)?;
            fix(&mut a.input.edges)?;
        }
        Command::Curves(a) => {
            fix(&mut a.input.nodes)?;
            fix(&mut a.input.edges)?;
        }
        Command::Embed(a) => {
            fix(&mut a.input.nodes)?;
            fix(&mut a.input.edges)?;
        }
        Command::TrainGlobal(a) => {
            fix(&mut a.input.nodes)?;
            fix(&mut a.input.edges)?;
            if let Some(e) = &mut a.embeddings {
                fix(e)?;
            }
        }
        Command::Simulate(_) => {}
    }
    Ok(paths)
}

/// Runs `cmd`, writing artifacts and the manifest into `dir`.
pub fn execute(mut cmd: Command, dir: &Path) -> Result<Manifest, Failure> {
    let inputs = resolve_inputs(&mut cmd)?;
    let mut out = Output::new(dir.to_path_buf())?;
    commands::dispatch(&cmd, &mut out)?;
    let inputs = inputs
        .iter()
        .map(|p| Ok(FileDigest { path: p.display().to_string(), sha256: digest(p)? }))
        .collect::<Result<Vec<_>, Failure>>()?;
    let artifacts = out
        .files
        .iter()
        .map(|f| Ok(FileDigest { path: f.clone(), sha256: digest(&dir.join(f))? }))
        .collect::<Result<Vec<_>, Failure>>()?;
    let manifest = Manifest {
        tool: "triadic".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd,
        seeds: out.seeds,
        inputs,
        artifacts,
    };
    manifest.write(dir)?;
    Ok(manifest)
}

/// Parses `argv` (including the program name), runs it and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let dir = cli.out.unwrap_or_else(default_out);
    let cmd = match cli.command {
        Invocation::Run(cmd) => Ok(cmd),
        Invocation::Config { file } => fs::read_to_string(&file)
            .map_err(Failure::from)
            .and_then(|t| serde_json::from_str(&t).map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))),
        Invocation::Rerun { manifest } => Manifest::read(&manifest).map(|m| m.command),
    };
    match cmd.and_then(|cmd| execute(cmd, &dir)) {
        Ok(m) => {
            log::info!("wrote {} artifacts to {}", m.artifacts.len(), dir.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
