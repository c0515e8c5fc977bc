//! Flat `key=value` run manifests.
//!
//! Keys used:
//! - `command`, `version`, `seed`, `wall_time_seconds`
//! - `arg.<flag>` for every resolved option, defaults included
//! - `result.<name>` for scalar results and `trace.<name>` for comma-separated
//!   per-epoch series

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ArgMatches;

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.set("command", command);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m
    }

    /// Inserts or replaces `key`.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        assert!(!key.contains(['=', '\n']) && !value.contains('\n'), "manifest entry {key:?} is not flat");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn set_result(&mut self, name: &str, value: impl ToString) {
        self.set(&format!("result.{name}"), value);
    }

    /// Stores a series with shortest round-trip formatting.
    pub fn set_trace(&mut self, name: &str, values: &[f64]) {
        let joined: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
        self.set(&format!("trace.{name}"), joined.join(","));
    }

    /// Records every argument of a parsed subcommand, defaults included.
    /// Repeated values are joined with commas.
    pub fn record_args(&mut self, cmd: &clap::Command, matches: &ArgMatches) {
        for arg in cmd.get_arguments() {
            let Some(long) = arg.get_long() else { continue };
            let id = arg.get_id().as_str();
            if long == "manifest" {
                continue;
            }
            let Some(raw) = matches.get_raw(id) else { continue };
            let values: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            self.set(&format!("arg.{long}"), values.join(","));
        }
    }

    /// Rebuilds an argument vector that parses to the recorded configuration.
    /// `rename` may rewrite output paths (flags starting with `out`).
    pub fn replay_args(
        &self,
        cmd: &clap::Command,
        rename: impl Fn(&str) -> Option<String>,
    ) -> Result<Vec<String>, CliError> {
        let command = self
            .get("command")
            .ok_or_else(|| CliError::Usage("manifest has no command entry".into()))?;
        let sub = cmd
            .find_subcommand(command)
            .ok_or_else(|| CliError::Usage(format!("manifest names unknown command {command:?}")))?;
        let mut argv = vec!["bear".to_string(), command.to_string()];
        for (key, value) in &self.entries {
            let Some(long) = key.strip_prefix("arg.") else { continue };
            let arg = sub
                .get_arguments()
                .find(|a| a.get_long() == Some(long))
                .ok_or_else(|| CliError::Usage(format!("manifest has unknown option --{long}")))?;
            if arg.get_action().takes_values() {
                let value = if long.starts_with("out") { rename(value).unwrap_or_else(|| value.clone()) } else { value.clone() };
                argv.push(format!("--{long}"));
                argv.push(value);
            } else if value == "true" {
                argv.push(format!("--{long}"));
            }
        }
        Ok(argv)
    }

    pub fn render(&self) -> String {
        let mut s = String::from("# bear run manifest\n");
        for (k, v) in &self.entries {
            s.push_str(k);
            s.push('=');
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut m = Self::default();
        for (no, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", no + 1))?;
            m.set(k, v);
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn write_atomic(&self, path: &Path) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(self.render().as_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }
}

/// `<output>.manifest` next to the first output.
pub fn default_path(first_output: &Path) -> PathBuf {
    let mut p = first_output.as_os_str().to_owned();
    p.push(".manifest");
    PathBuf::from(p)
}
