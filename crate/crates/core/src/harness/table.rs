//! Rated-flux versus fuzzy-search efficiency at several load fractions.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::thread;

use crate::error::Result;
use crate::harness::config::Config;
use crate::harness::scenario::Scenario;
use crate::harness::sim::run_scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub load_fraction: f64,
    pub load_torque: f64,
    pub p_in: f64,
    pub p_out: f64,
    pub efficiency: f64,
    pub converged: bool,
    pub samples_to_converge: Option<u32>,
    pub final_i_ds_command: f64,
    pub max_search_speed_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport {
    pub speed: f64,
    pub rated_flux: Vec<TableRow>,
    pub searched: Vec<TableRow>,
}

fn fraction_label(f: f64) -> String {
    const NAMED: [(f64, &str); 5] = [(0.25, "1/4"), (1.0 / 3.0, "1/3"), (0.5, "1/2"), (0.75, "3/4"), (1.0, "1")];
    NAMED
        .iter()
        .find(|(v, _)| (v - f).abs() < 1e-9)
        .map_or_else(|| format!("{f:.2}"), |(_, s)| (*s).to_string())
}

fn run_row(config: &Config, fraction: f64, speed: f64, flc: bool) -> Result<TableRow> {
    let load = fraction * config.params.spec().rated_torque;
    let mut scenario = Scenario::constant(format!("table-{fraction}"), config.table.duration, speed, load);
    scenario.flc = flc;
    let run = run_scenario(&scenario, config)?;
    let s = &run.summary;
    Ok(TableRow {
        load_fraction: fraction,
        load_torque: load,
        p_in: s.tail_p_in,
        p_out: s.tail_p_out,
        efficiency: s.tail_p_out / s.tail_p_in,
        converged: !flc || s.converged_at_end,
        samples_to_converge: s.converged_at.map(|(_, n)| n),
        final_i_ds_command: s.final_i_ds_command,
        max_search_speed_error: s.max_search_speed_error,
    })
}

/// Runs every (fraction, search on/off) pair on its own thread. Results do
/// not depend on scheduling.
pub fn efficiency_table(config: &Config, fractions: &[f64], speed: f64) -> Result<EfficiencyReport> {
    let (rated_flux, searched) = thread::scope(|scope| {
        let spawn = |flc: bool| -> Vec<_> {
            fractions
                .iter()
                .map(|&f| scope.spawn(move || run_row(config, f, speed, flc)))
                .collect()
        };
        let off = spawn(false);
        let on = spawn(true);
        let join = |hs: Vec<thread::ScopedJoinHandle<'_, Result<TableRow>>>| {
            hs.into_iter()
                .map(|h| h.join().expect("table worker panicked"))
                .collect::<Result<Vec<_>>>()
        };
        (join(off), join(on))
    });
    Ok(EfficiencyReport {
        speed,
        rated_flux: rated_flux?,
        searched: searched?,
    })
}

impl EfficiencyReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Speed {} rad/s", self.speed);
        for (title, rows) in [
            ("Rated flux", &self.rated_flux),
            ("Fuzzy efficiency search", &self.searched),
        ] {
            let _ = writeln!(out, "\n{title}");
            let _ = writeln!(
                out,
                "{:<20}{:>12}{:>12}{:>12}{:>10}",
                "Load torque (N m)", "P_in (kW)", "P_out (kW)", "Eff. (%)", "i_ds (A)"
            );
            for r in rows {
                let flag = if r.converged { "" } else { "  not converged" };
                let _ = writeln!(
                    out,
                    "{:<20}{:>12.3}{:>12.3}{:>12.2}{:>10.3}{flag}",
                    format!("{:.2} ({} F.L.)", r.load_torque, fraction_label(r.load_fraction)),
                    r.p_in / 1e3,
                    r.p_out / 1e3,
                    r.efficiency * 100.0,
                    r.final_i_ds_command,
                );
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "search,load_fraction,load_torque,p_in,p_out,efficiency,i_ds_cmd,converged,samples")?;
        for (tag, rows) in [("off", &self.rated_flux), ("on", &self.searched)] {
            for r in rows {
                let samples = r.samples_to_converge.map(|n| n.to_string()).unwrap_or_default();
                writeln!(
                    w,
                    "{tag},{},{},{},{},{},{},{},{samples}",
                    r.load_fraction, r.load_torque, r.p_in, r.p_out, r.efficiency, r.final_i_ds_command, r.converged
                )?;
            }
        }
        w.flush()
    }
}
