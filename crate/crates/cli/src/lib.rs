//! `bear` command-line interface.
//!
//! Exit codes: 0 ok, 2 usage, 3 format, 4 numerical failure, 5 I/O,
//! 6 domain (negative input to an NMF path).

pub mod args;
pub mod budget;
pub mod commands;
pub mod error;
pub mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgMatches, CommandFactory, FromArgMatches};

use crate::args::{Cli, Command, CommonArgs, ReplayArgs};
pub use crate::error::CliError;
pub use crate::manifest::RunManifest;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cmd = Cli::command();
    let matches = match cmd.clone().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cmd, &matches) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("bear: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: &clap::Command, matches: &ArgMatches) -> Result<(), CliError> {
    let cli = Cli::from_arg_matches(matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let (name, sub_matches) = matches.subcommand().expect("a subcommand is required");
    let sub = cmd.find_subcommand(name).expect("parsed subcommand exists");
    let mut manifest = RunManifest::new(name);
    manifest.record_args(sub, sub_matches);

    let start = Instant::now();
    let (first_output, common): (Option<PathBuf>, &CommonArgs) = match &cli.command {
        Command::Decompose(a) => (commands::decompose(a, &mut manifest)?, &a.common),
        Command::Greedy(a) => (commands::greedy(a, &mut manifest)?, &a.common),
        Command::Nmf(a) => (commands::nmf(a, &mut manifest)?, &a.common),
        Command::Cascade(a) => (commands::cascade(a, &mut manifest)?, &a.common),
        Command::Bench(a) => (commands::bench(a, &mut manifest)?, &a.common),
        Command::Gen(a) => (commands::gen(a, &mut manifest)?, &a.common),
        Command::Info(a) => (commands::info(a, &mut manifest)?, &a.common),
        Command::Replay(a) => return replay(cmd, a),
    };
    manifest.set("wall_time_seconds", start.elapsed().as_secs_f64());
    let path = common
        .manifest
        .clone()
        .or_else(|| first_output.as_deref().map(manifest::default_path));
    if let Some(path) = path {
        manifest.write_atomic(&path)?;
    }
    Ok(())
}

fn replay(cmd: &clap::Command, a: &ReplayArgs) -> Result<(), CliError> {
    let recorded = RunManifest::read(&a.from)?;
    let rename = |p: &str| -> Option<String> {
        let dir = a.out_dir.as_ref()?;
        let name = Path::new(p).file_name()?;
        Some(dir.join(name).to_string_lossy().into_owned())
    };
    let argv = recorded.replay_args(cmd, rename)?;
    eprintln!("replaying: {}", argv[1..].join(" "));
    let matches = cmd
        .clone()
        .try_get_matches_from(&argv)
        .map_err(|e| CliError::Format(format!("{}: recorded arguments do not parse: {e}", a.from.display())))?;
    if matches!(matches.subcommand_name(), Some("replay")) {
        return Err(CliError::Usage("a replay manifest cannot replay itself".into()));
    }
    execute(cmd, &matches)
}
