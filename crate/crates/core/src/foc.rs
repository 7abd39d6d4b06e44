//! Speed loop and current command limiting of the indirect field-oriented drive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::MachineParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedLoopGains {
    pub kp: f64,
    pub ki: f64,
}

impl SpeedLoopGains {
    /// Places both closed-loop poles of `J s^2 + (B + K kp) s + K ki` at
    /// `-bandwidth * damping +- ...`, with `K = K_t * rated_flux` the torque per
    /// amp at rated flux.
    pub fn pole_placement(params: &MachineParams, bandwidth: f64, damping: f64) -> Self {
        let k = params.torque_constant_flux() * params.rated_flux();
        let (j, b) = (params.spec().inertia, params.spec().friction);
        SpeedLoopGains {
            kp: ((2.0 * damping * bandwidth * j - b) / k).max(0.0),
            ki: bandwidth * bandwidth * j / k,
        }
    }
}

/// PI speed regulator producing the torque-current command.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedLoop {
    kp: f64,
    ki: f64,
    integrator: f64,
    output_limit: f64,
}

impl SpeedLoop {
    pub fn new(gains: SpeedLoopGains, output_limit: f64) -> Result<Self> {
        if !(gains.kp.is_finite() && gains.kp >= 0.0) {
            return Err(Error::config("speed_loop.kp", "must be finite and non-negative"));
        }
        if !(gains.ki.is_finite() && gains.ki >= 0.0) {
            return Err(Error::config("speed_loop.ki", "must be finite and non-negative"));
        }
        if !(output_limit.is_finite() && output_limit > 0.0) {
            return Err(Error::config("machine.max_torque_current", "must be positive"));
        }
        Ok(SpeedLoop {
            kp: gains.kp,
            ki: gains.ki,
            integrator: 0.0,
            output_limit,
        })
    }

    pub fn integrator(&self) -> f64 {
        self.integrator
    }

    pub fn output_limit(&self) -> f64 {
        self.output_limit
    }

    /// One controller update. The integrator is frozen while the unclamped
    /// output is saturated in the direction the error would push it.
    pub fn step(&mut self, omega_ref: f64, omega_r: f64, dt: f64) -> f64 {
        let error = omega_ref - omega_r;
        let proportional = self.kp * error;
        let candidate = self.integrator + self.ki * error * dt;
        let unclamped = proportional + candidate;
        let pushing_high = unclamped > self.output_limit && error > 0.0;
        let pushing_low = unclamped < -self.output_limit && error < 0.0;
        if !(pushing_high || pushing_low) {
            self.integrator = candidate.clamp(-self.output_limit, self.output_limit);
        }
        (proportional + self.integrator).clamp(-self.output_limit, self.output_limit)
    }

    /// Folds a feedforward term into the integrator so that removing the
    /// feedforward leaves the total command unchanged.
    pub fn absorb(&mut self, delta: f64) {
        self.integrator = (self.integrator + delta).clamp(-self.output_limit, self.output_limit);
    }

    /// Presets the integrator, e.g. to the steady torque current of a known load.
    pub fn preload(&mut self, integrator: f64) {
        self.integrator = integrator.clamp(-self.output_limit, self.output_limit);
    }
}

/// Excitation command of the transient switch position.
pub fn rated_flux_command(params: &MachineParams) -> f64 {
    params.spec().rated_excitation_current
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveCommand {
    pub speed_reference: f64,
    pub i_ds_command: f64,
    pub i_qs_command: f64,
}

impl DriveCommand {
    /// Builds a command with the excitation clamped into
    /// `[min_excitation_current, rated_excitation_current]` and the torque current
    /// into `+-max_torque_current`.
    pub fn limited(params: &MachineParams, speed_reference: f64, i_ds: f64, i_qs: f64) -> Self {
        let s = params.spec();
        let i_max = s.max_torque_current;
        DriveCommand {
            speed_reference,
            i_ds_command: i_ds.clamp(s.min_excitation_current, s.rated_excitation_current),
            i_qs_command: i_qs.clamp(-i_max, i_max),
        }
    }
}
