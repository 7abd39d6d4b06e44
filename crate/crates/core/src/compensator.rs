//! Feedforward torque-current compensation for falling rotor flux.
//!
//! Torque is `K_t psi i_qs`, so holding it while flux decays after an excitation
//! step means scaling the torque current by the inverse flux ratio. The anchor
//! `(psi(0), i_qs*(0))` is latched at each search sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::MachineParams;

/// Where the compensator reads rotor flux from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxSource {
    /// The simulated flux.
    #[default]
    Measured,
    /// Closed-form first-order response to the latest excitation command.
    Predicted,
}

/// Which form of the compensation law is applied between samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompensationForm {
    /// `-dpsi i_qs*(0) / (psi(0) + dpsi)` against the latched anchor.
    #[default]
    Continuous,
    /// Incremental `(psi(k-1) - psi(k)) / psi(k) * i_qs*(k-1)`, accumulated every step.
    Discrete,
}

/// Torque-current correction that keeps `psi * i_qs` equal to the anchor product.
pub fn continuous_compensation(
    psi_at_step: f64,
    iqs_at_step: f64,
    delta_psi: f64,
    flux_floor: f64,
) -> Result<f64> {
    let psi = psi_at_step + delta_psi;
    if !(psi > flux_floor) {
        return Err(Error::FluxFloor { psi, floor: flux_floor });
    }
    Ok(-delta_psi * iqs_at_step / psi)
}

pub fn discrete_compensation(psi_prev: f64, psi_now: f64, iqs_prev: f64, flux_floor: f64) -> Result<f64> {
    if !(psi_now > flux_floor) {
        return Err(Error::FluxFloor { psi: psi_now, floor: flux_floor });
    }
    Ok((psi_prev - psi_now) / psi_now * iqs_prev)
}

/// Rotor flux `t` seconds after the excitation command moved to `i_ds_new`.
pub fn predicted_flux_trajectory(params: &MachineParams, psi0: f64, i_ds_new: f64, t: f64) -> f64 {
    let target = params.spec().magnetizing_inductance * i_ds_new;
    target + (psi0 - target) * (-t / params.rotor_time_constant()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompensatorSettings {
    pub enabled: bool,
    #[serde(default)]
    pub flux_source: FluxSource,
    #[serde(default)]
    pub form: CompensationForm,
}

impl Default for CompensatorSettings {
    fn default() -> Self {
        CompensatorSettings {
            enabled: true,
            flux_source: FluxSource::Measured,
            form: CompensationForm::Continuous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Anchor {
    psi: f64,
    iqs: f64,
    time: f64,
    i_ds_command: f64,
}

/// Latched compensation state owned by the simulation loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Compensator {
    settings: CompensatorSettings,
    anchor: Option<Anchor>,
    /// Discrete form: running sum of increments and the flux seen last step.
    accumulated: f64,
    previous_psi: Option<f64>,
    output: f64,
}

impl Compensator {
    pub fn new(settings: CompensatorSettings) -> Self {
        Compensator {
            settings,
            anchor: None,
            accumulated: 0.0,
            previous_psi: None,
            output: 0.0,
        }
    }

    pub fn settings(&self) -> &CompensatorSettings {
        &self.settings
    }

    pub fn is_latched(&self) -> bool {
        self.anchor.is_some()
    }

    /// Last computed correction, A.
    pub fn output(&self) -> f64 {
        self.output
    }

    /// Latches a new anchor and returns the correction accumulated so far, which
    /// the caller folds into the speed-loop integrator.
    pub fn latch(&mut self, psi: f64, iqs: f64, time: f64, i_ds_command: f64) -> f64 {
        let carried = self.release();
        if self.settings.enabled {
            self.anchor = Some(Anchor {
                psi,
                iqs,
                time,
                i_ds_command,
            });
            self.previous_psi = Some(psi);
        }
        carried
    }

    /// Drops the anchor; returns the outstanding correction.
    pub fn release(&mut self) -> f64 {
        let carried = self.output;
        self.anchor = None;
        self.previous_psi = None;
        self.accumulated = 0.0;
        self.output = 0.0;
        carried
    }

    /// Correction for the current integration step.
    ///
    /// `psi_measured` is the simulated flux; `iqs_previous` is the total torque
    /// current command of the previous step (used by the discrete form).
    pub fn update(
        &mut self,
        params: &MachineParams,
        psi_measured: f64,
        iqs_previous: f64,
        time: f64,
    ) -> Result<f64> {
        let Some(anchor) = self.anchor else {
            self.output = 0.0;
            return Ok(0.0);
        };
        let psi = match self.settings.flux_source {
            FluxSource::Measured => psi_measured,
            FluxSource::Predicted => {
                predicted_flux_trajectory(params, anchor.psi, anchor.i_ds_command, time - anchor.time)
            }
        };
        let floor = params.flux_floor();
        self.output = match self.settings.form {
            CompensationForm::Continuous => continuous_compensation(anchor.psi, anchor.iqs, psi - anchor.psi, floor)?,
            CompensationForm::Discrete => {
                let psi_prev = self.previous_psi.unwrap_or(psi);
                self.accumulated += discrete_compensation(psi_prev, psi, iqs_previous, floor)?;
                self.previous_psi = Some(psi);
                self.accumulated
            }
        };
        Ok(self.output)
    }
}
