use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ppbs_cli::{
    cmd_certify, cmd_simulate, cmd_sweep, load_circuit, load_counts, render_report, write_report, write_simulation,
    write_sweep, CliError, Provenance, Report, Result, SweepMode,
};
use ppbs_core::ingest::Format;
use ppbs_core::Execution;

#[derive(Parser)]
#[command(name = "ppbs-cnot", version, about = "Simulate and certify the PPBS linear-optical CNOT gate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a circuit and write its truth tables and report.
    Simulate {
        /// Built-in circuit name or circuit JSON file.
        #[arg(long, default_value = "compact-cnot")]
        circuit: String,
        /// Photon indistinguishability; defaults to the circuit's own value.
        #[arg(long)]
        lambda: Option<f64>,
        /// Also write sweep.csv over this many evenly spaced lambda values.
        #[arg(long)]
        sweep_points: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify a gate from measured ZZ and XX coincidence counts.
    Certify {
        #[arg(long)]
        zz: PathBuf,
        #[arg(long)]
        xx: PathBuf,
        /// Count-table format; inferred from the file extension by default.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate many noise settings and write one CSV row per setting.
    Sweep {
        #[arg(long, default_value = "compact-cnot")]
        circuit: String,
        /// Evenly spaced lambda values in [0, 1].
        #[arg(long, default_value_t = 11, conflicts_with = "random")]
        points: usize,
        /// Number of random noise settings instead of a lambda grid.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evaluate on the calling thread only.
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the human-readable report for data (--zz/--xx) or a simulation.
    Report {
        #[arg(long, conflicts_with_all = ["zz", "xx"])]
        circuit: Option<String>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, requires = "xx")]
        zz: Option<PathBuf>,
        #[arg(long, requires = "zz")]
        xx: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Also write report.txt into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn certify(zz: &Path, xx: &Path, format: Option<FormatArg>) -> Result<Report> {
    let format = format.map(Format::from);
    let provenance = Provenance::Data { zz: zz.display().to_string(), xx: xx.display().to_string() };
    cmd_certify(&load_counts(zz, format)?, &load_counts(xx, format)?, provenance)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { circuit, lambda, sweep_points, out } => {
            let spec = load_circuit(&circuit)?;
            let sim = cmd_simulate(&spec, &circuit, lambda)?;
            match out {
                Some(dir) => {
                    write_simulation(&dir, &sim)?;
                    if let Some(points) = sweep_points {
                        write_sweep(&dir, &cmd_sweep(&spec, SweepMode::Lambda { points }, Execution::default())?)?;
                    }
                }
                None => print!("{}", sim.report.to_json()),
            }
        }
        Command::Certify { zz, xx, format, out } => {
            let report = certify(&zz, &xx, format)?;
            match out {
                Some(dir) => write_report(&dir, &report)?,
                None => print!("{}", report.to_json()),
            }
        }
        Command::Sweep { circuit, points, random, seed, sequential, out } => {
            let spec = load_circuit(&circuit)?;
            let mode = match random {
                Some(settings) => SweepMode::Random { settings, seed },
                None => SweepMode::Lambda { points },
            };
            let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
            let csv = cmd_sweep(&spec, mode, exec)?;
            match out {
                Some(dir) => write_sweep(&dir, &csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Report { circuit, lambda, zz, xx, format, out } => {
            let report = match (zz, xx) {
                (Some(zz), Some(xx)) => certify(&zz, &xx, format)?,
                _ => {
                    let name = circuit.unwrap_or_else(|| "compact-cnot".into());
                    cmd_simulate(&load_circuit(&name)?, &name, lambda)?.report
                }
            };
            let text = render_report(&report);
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
                let path = dir.join("report.txt");
                std::fs::write(&path, &text).map_err(|source| CliError::Io { path, source })?;
            }
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
