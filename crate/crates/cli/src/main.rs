//! `rovpol`: rovibrational polariton calculations for two HCl molecules in
//! an infrared cavity.
//!
//! Every run writes its CSV/JSON artifacts and a `manifest.json` recording
//! the resolved configuration, the arguments and the hash of every output.
//! `rovpol rerun --manifest <file>` repeats a run from the manifest alone.

mod commands;
mod error;
mod manifest;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rovpol::moldata::{load_system, BundledSystem, SystemSpec};

use crate::commands::{Artifacts, RunCommand, Settings};
use crate::error::{CliError, Result};
use crate::manifest::{RunManifest, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(
    name = "rovpol",
    version,
    about = "Rovibrational polaritons of two HCl molecules in an IR cavity"
)]
struct Cli {
    /// System configuration (JSON).
    #[arg(long, global = true, conflicts_with = "system")]
    config: Option<PathBuf>,
    /// Bundled system: mixed, identical or hcl37.
    #[arg(long, global = true)]
    system: Option<String>,
    /// Override the light-matter coupling strength (cm^-1).
    #[arg(long, global = true)]
    coupling: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "rovpol-out")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, global = true, env = "ROVPOL_THREADS")]
    threads: Option<usize>,
    /// Surface grid points per axis.
    #[arg(long, global = true, default_value_t = rovpol::vpes::DEFAULT_GRID)]
    grid: usize,
    /// Skip SVG rendering.
    #[arg(long, global = true)]
    no_svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    #[command(flatten)]
    Run(RunCommand),
    /// Repeat a run from its manifest and compare output hashes.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn resolve_spec(cli: &Cli) -> Result<SystemSpec> {
    let spec = match &cli.config {
        Some(path) => {
            if !path.is_file() {
                return Err(CliError::Usage(format!("config file {} not found", path.display())));
            }
            load_system(path)?
        }
        None => cli
            .system
            .as_deref()
            .unwrap_or("mixed")
            .parse::<BundledSystem>()?
            .spec(),
    };
    match cli.coupling {
        Some(g) if !(g.is_finite() && g >= 0.0) => Err(CliError::Usage(format!("--coupling must be >= 0, got {g}"))),
        Some(g) => Ok(spec.with_coupling(g)),
        None => Ok(spec),
    }
}

fn systems_for(command: &RunCommand, cli: &Cli) -> Result<Vec<SystemSpec>> {
    match command {
        RunCommand::ReproducePaper(_) => {
            if cli.config.is_some() || cli.system.is_some() || cli.coupling.is_some() {
                return Err(CliError::Usage(
                    "reproduce-paper uses the bundled systems; drop --config/--system/--coupling".into(),
                ));
            }
            Ok(
                [BundledSystem::Mixed, BundledSystem::Identical, BundledSystem::Hcl37Pair]
                    .map(BundledSystem::spec)
                    .to_vec(),
            )
        }
        _ => Ok(vec![resolve_spec(cli)?]),
    }
}

fn execute(command: &RunCommand, systems: &[SystemSpec], settings: &Settings, art: &mut Artifacts) -> Result<()> {
    let first = || {
        systems
            .first()
            .ok_or_else(|| CliError::Manifest("no system configuration".into()))
    };
    match command {
        RunCommand::Vpes(args) => {
            let meta = commands::vpes(first()?, args, settings, art, "")?;
            println!("{} degeneracies located", meta.degeneracies.len());
        }
        RunCommand::Topology(args) => {
            let rep = commands::topology(first()?, args, settings, art)?;
            for p in &rep.phases {
                println!("alpha_{}{} = {:+.4} pi", p.pair.0, p.pair.1, p.alpha_over_pi);
            }
            println!("diag(D) = {:?}, K = {}", rep.d_diagonal, rep.k);
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
        }
        RunCommand::Spectrum(args) => {
            let run = commands::compute_spectrum(first()?, args)?;
            commands::write_spectrum(&run, art, "")?;
            println!("{} lines in window", run.summary.n_lines);
        }
        RunCommand::Dynamics(args) => {
            let run = commands::compute_dynamics(first()?, args)?;
            commands::write_dynamics(&run, first()?, art, "")?;
            if !run.summary.quadrature_resolved {
                eprintln!(
                    "warning: doubling the projector nodes moves populations by {:.1e} (> {:.0e})",
                    run.summary.quadrature_change,
                    commands::QUADRATURE_TOL
                );
            }
            println!("max norm drift {:.1e}", run.summary.max_norm_drift);
        }
        RunCommand::ReproducePaper(args) => commands::reproduce(systems, args, settings, art)?,
    }
    Ok(())
}

/// Runs `command` into `out` and writes the manifest, also when the run fails
/// part-way so the artifacts written so far stay accounted for.
fn run_into(out: &Path, command: RunCommand, systems: Vec<SystemSpec>, settings: Settings) -> Result<RunManifest> {
    let started = chrono::Utc::now().to_rfc3339();
    let mut manifest = RunManifest::new(command, systems, settings, rayon::current_num_threads(), started)?;
    let mut art = Artifacts::new(out, settings.svg)?;
    let outcome = execute(&manifest.command, &manifest.systems, &settings, &mut art);
    manifest.finished = chrono::Utc::now().to_rfc3339();
    manifest.outputs = std::mem::take(&mut art.files);
    let path = art.root().join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_json()?).map_err(|source| CliError::Output { path, source })?;
    outcome.map(|()| manifest)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let settings = Settings {
        grid: cli.grid,
        svg: !cli.no_svg,
    };
    match &cli.command {
        Command::Run(command) => {
            let systems = systems_for(command, &cli)?;
            let manifest = run_into(&cli.out, command.clone(), systems, settings)?;
            println!(
                "wrote {} files to {} (input hash {})",
                manifest.outputs.len(),
                cli.out.display(),
                &manifest.input_hash[..12]
            );
        }
        Command::Rerun { manifest } => {
            let old = RunManifest::load(manifest)?;
            let new = run_into(&cli.out, old.command.clone(), old.systems.clone(), old.settings)?;
            let differing: Vec<&String> = old
                .outputs
                .iter()
                .filter(|(k, v)| new.outputs.get(*k) != Some(v))
                .map(|(k, _)| k)
                .collect();
            if !differing.is_empty() || old.outputs.len() != new.outputs.len() {
                return Err(CliError::Mismatch(differing.into_iter().cloned().collect()));
            }
            println!("reproduced {} files with identical hashes", new.outputs.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
