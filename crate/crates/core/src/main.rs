use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use kirchhoff::cli::{run, Command, RunConfig};

#[derive(Parser)]
#[command(name = "kirchhoff-lab", version, about = "Kirchhoff ground states, spectra and perturbed solves")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ground state profile and its constants.
    GroundState(Common),
    /// Sector spectra and the nondegeneracy certificate.
    Spectrum(Common),
    /// Concentration sweep over the configured ε values.
    Perturb(Common),
    /// Local Pohozaev identity at a single ε.
    Pohozaev(Common),
    /// Energy expansion remainders.
    Expansion(Common),
    /// Summary of the reports already in the output directory.
    Report(Common),
}

#[derive(clap::Args)]
struct Common {
    /// JSON run config; defaults apply to missing fields.
    config: Option<PathBuf>,
    /// Output directory, overriding the environment and the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    let args = Args::parse();
    let (command, common) = match args.command {
        Cmd::GroundState(c) => (Command::GroundState, c),
        Cmd::Spectrum(c) => (Command::Spectrum, c),
        Cmd::Perturb(c) => (Command::Perturb, c),
        Cmd::Pohozaev(c) => (Command::Pohozaev, c),
        Cmd::Expansion(c) => (Command::Expansion, c),
        Cmd::Report(c) => (Command::Report, c),
    };
    let cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let out = cfg.resolve_out_dir(common.out.as_deref());
    let report = run(command, &cfg, &out).with_context(|| format!("{} failed", command.name()))?;
    for c in &report.checks {
        println!(
            "{:<4} {:<40} {:.4e} {} {:.4e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.relation,
            c.tolerance
        );
    }
    println!("wrote {} artifacts to {}", report.artifacts.len(), out.display());
    Ok(())
}
