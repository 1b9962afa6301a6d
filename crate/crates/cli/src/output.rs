//! Rendering, file output and run manifests.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{Cli, Format};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or inputs that fail validation (exit 1).
    Validation(String),
    /// The solver could not decide; the report was still written (exit 2).
    Undecided,
    /// Reading or writing a file failed (exit 3).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Undecided => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "{m}"),
            CliError::Undecided => write!(f, "solver undecided within its iteration budget"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

/// Float formatting for CSV: 17 significant digits, '.' decimal point.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text from a header and rows of already formatted cells.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Quotes a text CSV cell when needed.
pub fn text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Serialize)]
struct OutputFile {
    path: PathBuf,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    subcommand: &'a str,
    parameters: serde_json::Value,
    seed: u64,
    format: Format,
    version: &'a str,
    outputs: Vec<OutputFile>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn subcommand_parameters(cli: &Cli) -> serde_json::Value {
    // externally tagged enum: {"name": {...}}
    match serde_json::to_value(&cli.command) {
        Ok(serde_json::Value::Object(map)) => {
            map.into_iter().next().map(|(_, v)| v).unwrap_or_default()
        }
        Ok(v) => v,
        Err(_) => serde_json::Value::Null,
    }
}

/// Writes the rendered result to `--out` (with its manifest) or stdout.
pub fn emit<T: Serialize>(
    cli: &Cli,
    subcommand: &str,
    json: &T,
    csv_text: Option<String>,
    default: Format,
) -> Result<(), CliError> {
    let format = cli.format.unwrap_or(default);
    let body = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(json)
                .map_err(|e| CliError::Validation(format!("cannot serialize result: {e}")))?;
            s.push('\n');
            s
        }
        Format::Csv => csv_text
            .ok_or_else(|| CliError::Validation(format!("{subcommand} has no CSV output")))?,
    };
    match &cli.out {
        None => {
            std::io::stdout()
                .write_all(body.as_bytes())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
        }
        Some(path) => {
            std::fs::write(path, &body)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let manifest = RunManifest {
                subcommand,
                parameters: subcommand_parameters(cli),
                seed: cli.seed,
                format,
                version: env!("CARGO_PKG_VERSION"),
                outputs: vec![OutputFile {
                    path: path.clone(),
                    sha256: hex::encode(Sha256::digest(body.as_bytes())),
                }],
            };
            let mut m = serde_json::to_string_pretty(&manifest)
                .map_err(|e| CliError::Validation(format!("cannot serialize manifest: {e}")))?;
            m.push('\n');
            let mpath = manifest_path(path);
            std::fs::write(&mpath, m)
                .map_err(|e| CliError::Io(format!("{}: {e}", mpath.display())))?;
        }
    }
    Ok(())
}
