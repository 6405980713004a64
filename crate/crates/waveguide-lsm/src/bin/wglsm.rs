//! Command-line front end: `simulate`, `invert` and `pipeline` over a TOML
//! run configuration. Exit codes: 0 on success, 2 on configuration or input
//! errors, 3 on numeric failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use waveguide_lsm::cli::{cmd_invert, cmd_pipeline, cmd_simulate, InvertReport, RunConfig};
use waveguide_lsm::Result;

#[derive(Parser)]
#[command(
    name = "wglsm",
    version,
    about = "Waveguide scattering synthesis and sampling-method reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize multistatic near-field data and write <out>/data.nfm
    Simulate(CommonArgs),
    /// Reconstruct an indicator field from an NFM v1 data file
    Invert {
        #[command(flatten)]
        common: CommonArgs,
        /// Data file to invert (default: <out>/data.nfm)
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Simulate, then invert the file just written
    Pipeline(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Worker thread count (default: all cores); never affects results
    #[arg(long)]
    threads: Option<usize>,
    /// Override the configured noise seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn load(&self) -> Result<RunConfig> {
        if let Some(n) = self.threads {
            // Ignore the error from an already-initialized pool (tests or a
            // second call); the pool size only changes timing, not output.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
        let mut config = RunConfig::load(&self.config)?;
        config.apply_overrides(self.seed, self.out.as_ref().and_then(|p| p.to_str()));
        Ok(config)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: &Command) -> Result<()> {
    match command {
        Command::Simulate(common) => {
            let config = common.load()?;
            let report = cmd_simulate(&config)?;
            println!(
                "wrote {} ({}x{} entries, {} support cells)",
                report.nfm_path.display(),
                report.rows,
                report.rows,
                report.support_cells
            );
        }
        Command::Invert { common, data } => {
            let config = common.load()?;
            let nfm_path = data
                .clone()
                .unwrap_or_else(|| config.out_dir().join("data.nfm"));
            print_invert(cmd_invert(&config, &nfm_path)?);
        }
        Command::Pipeline(common) => {
            let config = common.load()?;
            let (sim, inv) = cmd_pipeline(&config)?;
            println!(
                "wrote {} ({}x{} entries, {} support cells)",
                sim.nfm_path.display(),
                sim.rows,
                sim.rows,
                sim.support_cells
            );
            print_invert(inv);
        }
    }
    Ok(())
}

fn print_invert(report: InvertReport) {
    println!(
        "wrote {} and {} ({} of {} sampling points valid)",
        report.csv_path.display(),
        report.sidecar_path.display(),
        report.valid_points,
        report.total_points
    );
    if let Some(vtk) = &report.vtk_path {
        println!("wrote {}", vtk.display());
    }
    if let Some(peak) = report.peak {
        println!("indicator peak at ({}, {}, {})", peak[0], peak[1], peak[2]);
    }
    for (c, level) in &report.iso_levels {
        match level {
            Some(l) => println!("iso level C = {c}: {l}"),
            None => println!("iso level C = {c}: undefined (no valid values)"),
        }
    }
}
