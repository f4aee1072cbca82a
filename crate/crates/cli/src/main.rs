mod args;
mod commands;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::Parser;
use serde::{Deserialize, Serialize};

use args::{Cli, Command};
use commands::{Context, Output};

/// Sidecar written next to every `--out` file.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    subcommand: String,
    argv: Vec<String>,
    parameters: serde_json::Value,
    catalog_version: String,
    seed: Option<u64>,
    outputs: Vec<PathBuf>,
    tool_version: String,
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn subcommand_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Params(_) => "params",
        Command::Bistability(_) => "bistability",
        Command::Spectrum(_) => "spectrum",
        Command::Surface(_) => "surface",
        Command::Stability(_) => "stability",
        Command::Hysteresis(_) => "hysteresis",
        Command::Metrology(_) => "metrology",
        Command::Table1 => "table1",
        Command::Pulling(_) => "pulling",
        Command::Locksim(_) => "locksim",
        Command::Replay { .. } => "replay",
    }
}

fn run(argv: Vec<String>) -> Result<()> {
    let cli = Cli::try_parse_from(&argv).unwrap_or_else(|e| e.exit());
    if let Command::Replay { manifest } = &cli.command {
        let text = fs::read_to_string(manifest).with_context(|| format!("reading {}", manifest.display()))?;
        let m: RunManifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", manifest.display()))?;
        if m.argv.get(1).is_some_and(|a| a == "replay") {
            bail!("manifest records a replay");
        }
        return run(m.argv);
    }

    let ctx = Context::new(cli.global.clone())?;
    let out = commands::run(&cli.command, &ctx)?;
    emit(&cli, &argv, out)
}

fn emit(cli: &Cli, argv: &[String], out: Output) -> Result<()> {
    let body = if cli.global.json { serde_json::to_string_pretty(&out.json)? + "\n" } else { out.text };
    let Some(path) = &cli.global.out else {
        return match std::io::stdout().lock().write_all(body.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        };
    };
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    let mut outputs = vec![path.clone()];
    if let (true, Some(script)) = (cli.global.gnuplot, &out.gnuplot) {
        let mut gp = path.as_os_str().to_owned();
        gp.push(".gp");
        let gp = PathBuf::from(gp);
        let data = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        fs::write(&gp, script.replace("{data}", &data))?;
        outputs.push(gp);
    }
    outputs.extend(out.extra_outputs);
    let manifest = RunManifest {
        subcommand: subcommand_name(&cli.command).to_string(),
        argv: argv.to_vec(),
        parameters: serde_json::json!({ "global": cli.global, "resolved": out.resolved }),
        catalog_version: out.catalog_version,
        seed: out.seed,
        outputs,
        tool_version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
    };
    fs::write(manifest_path(path), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

/// 2 for invalid input, 3 when a numerical procedure failed on valid input.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<narrowline_core::Error>()) {
        Some(e) if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
