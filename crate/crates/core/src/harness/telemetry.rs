use std::io::{self, Write};

use crate::optimizer::SearchMode;

/// Fixed CSV header; column order matches [`TelemetryRecord::write_csv_row`].
pub const CSV_HEADER: &str = "time,omega_ref,omega_r,i_ds_cmd,i_qs_cmd,i_ds,i_qs,psi_dr,torque,load_torque,loss_cu_s,loss_cu_r,loss_fe,loss_conv,p_in,p_out,efficiency,mode";

/// Signals of one integration step, taken at the end of the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRecord {
    pub time: f64,
    pub omega_ref: f64,
    pub omega_r: f64,
    pub i_ds_cmd: f64,
    pub i_qs_cmd: f64,
    pub i_ds: f64,
    pub i_qs: f64,
    pub psi_dr: f64,
    pub torque: f64,
    pub load_torque: f64,
    pub loss_cu_s: f64,
    pub loss_cu_r: f64,
    pub loss_fe: f64,
    pub loss_conv: f64,
    pub p_in: f64,
    pub p_out: f64,
    /// `p_out / p_in`, absent unless `p_in > 0`.
    pub efficiency: Option<f64>,
    pub mode: SearchMode,
}

impl TelemetryRecord {
    pub fn write_csv_row<W: Write>(&self, mut w: W) -> io::Result<()> {
        let eff = self.efficiency.map(|e| e.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.time,
            self.omega_ref,
            self.omega_r,
            self.i_ds_cmd,
            self.i_qs_cmd,
            self.i_ds,
            self.i_qs,
            self.psi_dr,
            self.torque,
            self.load_torque,
            self.loss_cu_s,
            self.loss_cu_r,
            self.loss_fe,
            self.loss_conv,
            self.p_in,
            self.p_out,
            eff,
            self.mode.tag(),
        )
    }
}

pub fn write_csv<W: Write>(mut w: W, records: &[TelemetryRecord]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        r.write_csv_row(&mut w)?;
    }
    w.flush()
}
