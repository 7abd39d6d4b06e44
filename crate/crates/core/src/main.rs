use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fluxseek::harness::{
    efficiency_table, oracle_sweep, write_csv, Config, RunOptions, Simulation, CONFIG_ENV,
};
use fluxseek::{Error, Result};

#[derive(Parser)]
#[command(name = "fluxseek", version, about = "Induction motor drive efficiency search simulator")]
struct Cli {
    /// Configuration file; the built-in default is used when absent.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named scenario and write its telemetry as CSV.
    Run {
        scenario: String,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Hold rated flux for the whole run.
        #[arg(long)]
        no_flc: bool,
        /// Disable torque compensation.
        #[arg(long)]
        no_comp: bool,
        /// Record every integration step instead of the configured decimation.
        #[arg(long)]
        every_step: bool,
    },
    /// Steady-state input power over a grid of excitation currents.
    Sweep {
        #[arg(long)]
        speed: Option<f64>,
        #[arg(long)]
        torque: f64,
        #[arg(long, default_value_t = 201)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Efficiency with and without the search at the configured load fractions.
    Table {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write CSV instead of the text table.
        #[arg(long)]
        csv: bool,
    },
    /// List the scenarios in the configuration.
    Scenarios,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(path: Option<&Path>) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
        source,
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::builtin(),
    };
    match cli.command {
        Command::Run {
            scenario,
            out,
            no_flc,
            no_comp,
            every_step,
        } => {
            let mut sc = config
                .scenario(&scenario)
                .ok_or_else(|| Error::config("scenario", format!("no scenario named `{scenario}`")))?
                .clone();
            sc.flc &= !no_flc;
            sc.compensator &= !no_comp;
            let result = Simulation::new(&config, &sc)?.run(RunOptions {
                decimation: if every_step { 1 } else { config.simulation.decimation },
                tail_window: config.search.period,
            })?;
            let out = out.as_deref();
            write_csv(output(out)?, &result.records).map_err(io_err(out))?;
            let s = &result.summary;
            eprintln!(
                "{}: {} steps, final i_ds_cmd {:.4} A, mean P_in {:.1} W over the last {} s{}",
                sc.name,
                s.steps,
                s.final_i_ds_command,
                s.tail_p_in,
                config.search.period,
                match s.converged_at {
                    Some((t, n)) => format!(", converged at {t:.2} s after {n} samples"),
                    None => String::new(),
                }
            );
        }
        Command::Sweep {
            speed,
            torque,
            grid,
            out,
        } => {
            let speed = speed.unwrap_or(config.params.spec().rated_speed);
            let sweep = oracle_sweep(&config.params, speed, torque, grid)?;
            let path = out.as_deref();
            let mut w = output(path)?;
            (|| -> io::Result<()> {
                writeln!(w, "i_ds,i_qs,psi_dr,p_in,p_out,efficiency,losses")?;
                for p in &sweep.curve {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{}",
                        p.i_ds,
                        p.i_qs,
                        p.rotor_flux,
                        p.p_in,
                        p.p_out,
                        p.efficiency(),
                        p.losses.total
                    )?;
                }
                w.flush()
            })()
            .map_err(io_err(path))?;
            eprintln!(
                "minimum P_in {:.2} W at i_ds = {:.4} A ({} infeasible grid points)",
                sweep.best.p_in, sweep.best.i_ds, sweep.infeasible
            );
        }
        Command::Table { out, csv } => {
            let report = efficiency_table(&config, &config.table.load_fractions, config.table_speed())?;
            let path = out.as_deref();
            let mut w = output(path)?;
            if csv {
                report.write_csv(&mut w)
            } else {
                w.write_all(report.render_text().as_bytes()).and_then(|_| w.flush())
            }
            .map_err(io_err(path))?;
        }
        Command::Scenarios => {
            for s in &config.scenarios {
                println!("{}\t{} s", s.name, s.duration);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
