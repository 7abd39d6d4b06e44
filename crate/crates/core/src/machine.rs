//! Induction machine in the rotor-flux-oriented synchronous frame.
//!
//! The stator electrical transients are collapsed into a first-order lag of the
//! d/q currents toward their commands, which stands in for a current-regulated
//! inverter. Rotor flux, rotor speed, the two current lags and the synchronous
//! angle are advanced together by one RK4 step.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::ode::rk4;

/// Raw machine constants as they appear in the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineConfig {
    pub stator_resistance: f64,
    pub rotor_resistance: f64,
    pub magnetizing_inductance: f64,
    pub rotor_inductance: f64,
    pub pole_pairs: u32,
    pub inertia: f64,
    pub friction: f64,
    pub iron_loss_eddy_coeff: f64,
    pub iron_loss_hysteresis_coeff: f64,
    pub converter_fixed_loss: f64,
    pub converter_resistive_coeff: f64,
    pub current_tracking_time_constant: f64,
    pub rated_excitation_current: f64,
    pub min_excitation_current: f64,
    pub max_torque_current: f64,
    pub rated_speed: f64,
    pub rated_torque: f64,
    /// Lower clamp on rotor flux as a fraction of rated flux.
    #[serde(default = "default_flux_floor_fraction")]
    pub flux_floor_fraction: f64,
}

fn default_flux_floor_fraction() -> f64 {
    0.05
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            stator_resistance: 1.0,
            rotor_resistance: 1.04,
            magnetizing_inductance: 0.15,
            rotor_inductance: 0.156,
            pole_pairs: 2,
            inertia: 0.05,
            friction: 0.002,
            iron_loss_eddy_coeff: 0.005,
            iron_loss_hysteresis_coeff: 0.8,
            converter_fixed_loss: 100.0,
            converter_resistive_coeff: 0.3,
            current_tracking_time_constant: 0.002,
            rated_excitation_current: 6.0,
            min_excitation_current: 1.2,
            max_torque_current: 25.0,
            rated_speed: 150.0,
            rated_torque: 24.0,
            flux_floor_fraction: default_flux_floor_fraction(),
        }
    }
}

/// Validated machine model with its derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineParams {
    spec: MachineConfig,
    rotor_time_constant: f64,
    torque_constant_flux: f64,
    torque_constant_current: f64,
    rated_flux: f64,
    flux_floor: f64,
}

impl MachineParams {
    pub fn new(spec: MachineConfig) -> Result<Self> {
        let positive = [
            ("stator_resistance", spec.stator_resistance),
            ("rotor_resistance", spec.rotor_resistance),
            ("magnetizing_inductance", spec.magnetizing_inductance),
            ("rotor_inductance", spec.rotor_inductance),
            ("inertia", spec.inertia),
            ("current_tracking_time_constant", spec.current_tracking_time_constant),
            ("rated_excitation_current", spec.rated_excitation_current),
            ("min_excitation_current", spec.min_excitation_current),
            ("max_torque_current", spec.max_torque_current),
            ("rated_speed", spec.rated_speed),
            ("rated_torque", spec.rated_torque),
            ("flux_floor_fraction", spec.flux_floor_fraction),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(
                    format!("machine.{key}"),
                    format!("must be finite and strictly positive, got {value}"),
                ));
            }
        }
        let non_negative = [
            ("friction", spec.friction),
            ("iron_loss_eddy_coeff", spec.iron_loss_eddy_coeff),
            ("iron_loss_hysteresis_coeff", spec.iron_loss_hysteresis_coeff),
            ("converter_fixed_loss", spec.converter_fixed_loss),
            ("converter_resistive_coeff", spec.converter_resistive_coeff),
        ];
        for (key, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::config(
                    format!("machine.{key}"),
                    format!("must be finite and non-negative, got {value}"),
                ));
            }
        }
        if spec.pole_pairs == 0 {
            return Err(Error::config("machine.pole_pairs", "must be at least 1"));
        }
        if spec.rotor_inductance < spec.magnetizing_inductance {
            return Err(Error::config(
                "machine.rotor_inductance",
                "must not be smaller than magnetizing_inductance",
            ));
        }
        if spec.min_excitation_current >= spec.rated_excitation_current {
            return Err(Error::config(
                "machine.min_excitation_current",
                format!(
                    "must be below rated_excitation_current ({} >= {})",
                    spec.min_excitation_current, spec.rated_excitation_current
                ),
            ));
        }
        if spec.flux_floor_fraction >= spec.min_excitation_current / spec.rated_excitation_current
        {
            return Err(Error::config(
                "machine.flux_floor_fraction",
                "flux floor must lie below the flux reached at min_excitation_current",
            ));
        }

        let rotor_time_constant = spec.rotor_inductance / spec.rotor_resistance;
        let lm_over_lr = spec.magnetizing_inductance / spec.rotor_inductance;
        let torque_constant_flux = 1.5 * f64::from(spec.pole_pairs) * lm_over_lr;
        let torque_constant_current = torque_constant_flux * spec.magnetizing_inductance;
        let rated_flux = spec.magnetizing_inductance * spec.rated_excitation_current;
        let flux_floor = spec.flux_floor_fraction * rated_flux;

        Ok(MachineParams {
            spec,
            rotor_time_constant,
            torque_constant_flux,
            torque_constant_current,
            rated_flux,
            flux_floor,
        })
    }

    pub fn spec(&self) -> &MachineConfig {
        &self.spec
    }

    /// L_r / R_r.
    pub fn rotor_time_constant(&self) -> f64 {
        self.rotor_time_constant
    }

    /// Multiplies rotor flux and torque current: `T_e = K_t * psi_dr * i_qs`.
    pub fn torque_constant_flux(&self) -> f64 {
        self.torque_constant_flux
    }

    /// Multiplies the two current commands in the torque estimate; equals
    /// `torque_constant_flux * L_m`, so both agree at field-oriented steady state.
    pub fn torque_constant_current(&self) -> f64 {
        self.torque_constant_current
    }

    pub fn rated_flux(&self) -> f64 {
        self.rated_flux
    }

    pub fn flux_floor(&self) -> f64 {
        self.flux_floor
    }

    pub fn pole_pairs(&self) -> f64 {
        f64::from(self.spec.pole_pairs)
    }

    fn check_step(&self, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidStep {
                dt,
                reason: "must be finite and positive",
            });
        }
        if dt > self.rotor_time_constant / 10.0 {
            return Err(Error::InvalidStep {
                dt,
                reason: "exceeds a tenth of the rotor time constant",
            });
        }
        Ok(())
    }

    /// Advances rotor flux by one RK4 step of `dpsi/dt = (L_m i_ds - psi) / tau_r`
    /// with the d-axis current held constant over the step.
    pub fn step_rotor_flux(
        &self,
        state: &MachineState,
        i_ds_actual: f64,
        dt: f64,
    ) -> Result<MachineState> {
        self.check_step(dt)?;
        state.check_finite()?;
        ensure_finite("d-axis current", &[i_ds_actual])?;
        let target = self.spec.magnetizing_inductance * i_ds_actual;
        let tau = self.rotor_time_constant;
        let [psi] = rk4([state.rotor_flux], dt, |x| [(target - x[0]) / tau]);
        let next = MachineState {
            rotor_flux: psi.max(self.flux_floor),
            simulated_time: state.simulated_time + dt,
            ..*state
        };
        next.check_finite()?;
        Ok(next)
    }

    pub fn developed_torque(&self, psi_dr: f64, i_qs: f64) -> f64 {
        self.torque_constant_flux * i_qs * psi_dr
    }

    /// Electrical slip frequency that keeps the frame aligned with rotor flux.
    pub fn slip_frequency(&self, i_qs: f64, psi_dr: f64) -> Result<f64> {
        if !(psi_dr >= self.flux_floor) {
            return Err(Error::FluxFloor {
                psi: psi_dr,
                floor: self.flux_floor,
            });
        }
        Ok(self.spec.magnetizing_inductance * i_qs / (self.rotor_time_constant * psi_dr))
    }

    /// Electrical frequency of the synchronous frame at `state`.
    pub fn synchronous_speed(&self, state: &MachineState) -> Result<f64> {
        Ok(self.pole_pairs() * state.rotor_speed + self.slip_frequency(state.i_qs, state.rotor_flux)?)
    }

    /// Advances rotor speed under `J dw/dt = T_e - T_load - B w` with constant torques,
    /// and the synchronous angle by `(p w + w_sl) dt`.
    pub fn step_mechanical(
        &self,
        state: &MachineState,
        torque: f64,
        load_torque: f64,
        dt: f64,
    ) -> Result<MachineState> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidStep {
                dt,
                reason: "must be finite and positive",
            });
        }
        state.check_finite()?;
        ensure_finite("torque", &[torque, load_torque])?;
        let slip = self.slip_frequency(state.i_qs, state.rotor_flux)?;
        let (j, b, p) = (self.spec.inertia, self.spec.friction, self.pole_pairs());
        let [omega, theta] = rk4([state.rotor_speed, state.synchronous_angle], dt, |x| {
            [(torque - load_torque - b * x[0]) / j, p * x[0] + slip]
        });
        let next = MachineState {
            rotor_speed: omega,
            synchronous_angle: theta,
            simulated_time: state.simulated_time + dt,
            ..*state
        };
        next.check_finite()?;
        Ok(next)
    }

    /// Advances the full coupled model one step with the current commands and
    /// load torque held over the step.
    pub fn step(
        &self,
        state: &MachineState,
        i_ds_command: f64,
        i_qs_command: f64,
        load_torque: f64,
        tracking: CurrentTracking,
        dt: f64,
    ) -> Result<MachineState> {
        self.check_step(dt)?;
        state.check_finite()?;
        ensure_finite("current command", &[i_ds_command, i_qs_command, load_torque])?;

        let (i_ds0, i_qs0) = match tracking {
            CurrentTracking::Lag => (state.i_ds, state.i_qs),
            CurrentTracking::Instantaneous => (i_ds_command, i_qs_command),
        };
        let lag = match tracking {
            CurrentTracking::Lag => Some(self.spec.current_tracking_time_constant),
            CurrentTracking::Instantaneous => None,
        };
        let lm = self.spec.magnetizing_inductance;
        let tau_r = self.rotor_time_constant;
        let (j, b, p) = (self.spec.inertia, self.spec.friction, self.pole_pairs());
        let kt = self.torque_constant_flux;
        let floor = self.flux_floor;

        let x0 = [state.rotor_flux, state.rotor_speed, i_ds0, i_qs0, state.synchronous_angle];
        let [psi, omega, i_ds, i_qs, theta] = rk4(x0, dt, |x| {
            let [psi, omega, i_ds, i_qs, _] = *x;
            let psi_eff = psi.max(floor);
            let (di_ds, di_qs) = match lag {
                Some(tau_i) => ((i_ds_command - i_ds) / tau_i, (i_qs_command - i_qs) / tau_i),
                None => (0.0, 0.0),
            };
            [
                (lm * i_ds - psi) / tau_r,
                (kt * psi * i_qs - load_torque - b * omega) / j,
                di_ds,
                di_qs,
                p * omega + lm * i_qs / (tau_r * psi_eff),
            ]
        });

        let next = MachineState {
            rotor_flux: psi.max(floor),
            rotor_speed: omega,
            i_ds,
            i_qs,
            synchronous_angle: theta,
            simulated_time: state.simulated_time + dt,
        };
        next.check_finite()?;
        Ok(next)
    }

    pub fn compute_losses(&self, state: &MachineState, omega_e: f64) -> LossBreakdown {
        let s = &self.spec;
        let current_sq = state.i_ds * state.i_ds + state.i_qs * state.i_qs;
        let coupling = s.magnetizing_inductance / s.rotor_inductance;
        let stator_copper = 1.5 * s.stator_resistance * current_sq;
        let rotor_copper = 1.5 * s.rotor_resistance * coupling * coupling * state.i_qs * state.i_qs;
        let iron = (s.iron_loss_eddy_coeff * omega_e * omega_e
            + s.iron_loss_hysteresis_coeff * omega_e.abs())
            * state.rotor_flux
            * state.rotor_flux;
        let converter = s.converter_fixed_loss + s.converter_resistive_coeff * current_sq;
        LossBreakdown::new(stator_copper, rotor_copper, iron, converter)
    }
}

/// DC-link power: shaft power plus every modelled loss.
pub fn input_power(state: &MachineState, torque: f64, losses: &LossBreakdown) -> f64 {
    torque * state.rotor_speed + losses.total
}

/// How the actual stator currents follow their commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentTracking {
    /// First-order lag with `current_tracking_time_constant`.
    #[default]
    Lag,
    /// Currents equal their commands at the start of every step.
    Instantaneous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineState {
    pub rotor_flux: f64,
    /// Mechanical rotor speed, rad/s.
    pub rotor_speed: f64,
    pub i_ds: f64,
    pub i_qs: f64,
    pub synchronous_angle: f64,
    pub simulated_time: f64,
}

impl MachineState {
    /// Machine at standstill, already excited to rated flux.
    pub fn fluxed_at_rest(params: &MachineParams) -> Self {
        MachineState {
            rotor_flux: params.rated_flux(),
            rotor_speed: 0.0,
            i_ds: params.spec().rated_excitation_current,
            i_qs: 0.0,
            synchronous_angle: 0.0,
            simulated_time: 0.0,
        }
    }

    fn check_finite(&self) -> Result<()> {
        ensure_finite(
            "machine state",
            &[
                self.rotor_flux,
                self.rotor_speed,
                self.i_ds,
                self.i_qs,
                self.synchronous_angle,
                self.simulated_time,
            ],
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub stator_copper: f64,
    pub rotor_copper: f64,
    pub iron: f64,
    pub converter: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(stator_copper: f64, rotor_copper: f64, iron: f64, converter: f64) -> Self {
        LossBreakdown {
            stator_copper,
            rotor_copper,
            iron,
            converter,
            total: stator_copper + rotor_copper + iron + converter,
        }
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn params() -> MachineParams {
        MachineParams::new(MachineConfig::default()).unwrap()
    }

    fn at_flux(p: &MachineParams, psi: f64) -> MachineState {
        MachineState {
            rotor_flux: psi,
            ..MachineState::fluxed_at_rest(p)
        }
    }

    #[test]
    fn derived_constants() {
        let p = params();
        assert_eq!(p.rotor_time_constant(), 0.156 / 1.04);
        assert_relative_eq!(p.rated_flux(), 0.9, epsilon = 1e-15);
        assert_relative_eq!(p.torque_constant_flux(), 3.0 * 0.15 / 0.156, epsilon = 1e-15);
        assert_relative_eq!(
            p.torque_constant_current(),
            p.torque_constant_flux() * 0.15,
            epsilon = 1e-15
        );
    }

    #[test]
    fn rejects_min_excitation_at_or_above_rated() {
        let cfg = MachineConfig {
            min_excitation_current: 6.0,
            ..MachineConfig::default()
        };
        let err = MachineParams::new(cfg).unwrap_err();
        assert!(err.to_string().contains("machine.min_excitation_current"), "{err}");
    }

    #[test]
    fn rejects_non_positive_resistance() {
        let cfg = MachineConfig {
            rotor_resistance: 0.0,
            ..MachineConfig::default()
        };
        assert!(matches!(MachineParams::new(cfg), Err(Error::Config { key, .. }) if key == "machine.rotor_resistance"));
    }

    #[test]
    fn flux_equilibrium_is_fixed_point() {
        let p = params();
        let s = at_flux(&p, 0.15 * 4.0);
        let next = p.step_rotor_flux(&s, 4.0, 1e-3).unwrap();
        assert_eq!(next.rotor_flux, s.rotor_flux);
    }

    #[test]
    fn flux_one_time_constant_matches_closed_form() {
        let p = params();
        let tau = p.rotor_time_constant();
        let n = 1500;
        let dt = tau / n as f64;
        let mut s = at_flux(&p, p.rated_flux());
        for _ in 0..n {
            s = p.step_rotor_flux(&s, 3.0, dt).unwrap();
        }
        let expected = p.rated_flux() * (0.5 + 0.5 * (-1.0f64).exp());
        assert_relative_eq!(s.rotor_flux, expected, max_relative = 1e-4);
        assert_relative_eq!(expected / p.rated_flux(), 0.6839, max_relative = 1e-4);
    }

    #[test]
    fn flux_after_five_time_constants_near_target() {
        let p = params();
        let tau = p.rotor_time_constant();
        let dt = 1e-4;
        let steps = (5.0 * tau / dt).round() as usize;
        let mut s = at_flux(&p, p.rated_flux());
        for _ in 0..steps {
            s = p.step_rotor_flux(&s, 3.0, dt).unwrap();
        }
        let target = 0.15 * 3.0;
        assert!((s.rotor_flux - target).abs() / target < 0.01);
        let expected = target + (p.rated_flux() - target) * (-5.0f64).exp();
        assert_relative_eq!(s.rotor_flux, expected, max_relative = 1e-4);
    }

    #[test]
    fn flux_is_floored() {
        let p = params();
        let mut s = at_flux(&p, p.rated_flux());
        for _ in 0..20_000 {
            s = p.step_rotor_flux(&s, -5.0, 1e-3).unwrap();
        }
        assert_eq!(s.rotor_flux, p.flux_floor());
    }

    #[test]
    fn flux_step_rejects_bad_inputs() {
        let p = params();
        let s = at_flux(&p, p.rated_flux());
        assert!(matches!(p.step_rotor_flux(&s, f64::NAN, 1e-4), Err(Error::NonFinite { .. })));
        assert!(matches!(p.step_rotor_flux(&s, 1.0, 0.0), Err(Error::InvalidStep { .. })));
        assert!(matches!(p.step_rotor_flux(&s, 1.0, 0.1), Err(Error::InvalidStep { .. })));
    }

    #[test]
    fn torque_equation() {
        let p = params();
        assert_eq!(p.developed_torque(0.9, 0.0), 0.0);
        assert_eq!(p.developed_torque(0.0, 7.0), 0.0);
        let kt = p.torque_constant_flux();
        assert_relative_eq!(p.developed_torque(0.8, 10.0), kt * 8.0, epsilon = 1e-12);
        let custom = MachineParams::new(MachineConfig {
            // K_t = 1.5 * p * L_m / L_r = 1.5 with p = 1 and L_m = L_r.
            pole_pairs: 1,
            rotor_inductance: 0.15,
            ..MachineConfig::default()
        })
        .unwrap();
        assert_relative_eq!(custom.developed_torque(0.8, 10.0), 12.0, epsilon = 1e-12);
    }

    #[test]
    fn slip_frequency_cases() {
        let p = params();
        assert_eq!(p.slip_frequency(0.0, 0.9).unwrap(), 0.0);
        assert!(matches!(p.slip_frequency(1.0, 0.0), Err(Error::FluxFloor { .. })));
        // tau_r = 0.2 s: L_r = 0.2 * R_r.
        let q = MachineParams::new(MachineConfig {
            rotor_inductance: 0.2,
            rotor_resistance: 1.0,
            ..MachineConfig::default()
        })
        .unwrap();
        let i = 5.0;
        let psi = 0.15 * i;
        assert_relative_eq!(q.slip_frequency(i, psi).unwrap(), 5.0, max_relative = 1e-12);
        assert!(q.slip_frequency(-i, psi).unwrap() < 0.0);
    }

    #[test]
    fn mechanical_balance_holds_speed() {
        let p = MachineParams::new(MachineConfig {
            friction: 0.0,
            ..MachineConfig::default()
        })
        .unwrap();
        let s = MachineState {
            rotor_speed: 42.0,
            ..MachineState::fluxed_at_rest(&p)
        };
        let next = p.step_mechanical(&s, 5.0, 5.0, 1e-3).unwrap();
        assert_eq!(next.rotor_speed, 42.0);
    }

    #[test]
    fn constant_acceleration_from_rest() {
        let p = MachineParams::new(MachineConfig {
            friction: 0.0,
            inertia: 0.1,
            ..MachineConfig::default()
        })
        .unwrap();
        let mut s = MachineState::fluxed_at_rest(&p);
        for _ in 0..10_000 {
            s = p.step_mechanical(&s, 3.0, 2.0, 1e-4).unwrap();
        }
        assert_relative_eq!(s.rotor_speed, 10.0, max_relative = 1e-4);
    }

    #[test]
    fn friction_decay_matches_exponential() {
        let p = MachineParams::new(MachineConfig {
            friction: 0.05,
            inertia: 0.1,
            ..MachineConfig::default()
        })
        .unwrap();
        let tau_m: f64 = 0.1 / 0.05;
        let dt = 1e-3;
        let mut s = MachineState {
            rotor_speed: 100.0,
            ..MachineState::fluxed_at_rest(&p)
        };
        let steps = (3.0 * tau_m / dt).round() as usize;
        for k in 1..=steps {
            s = p.step_mechanical(&s, 0.0, 0.0, dt).unwrap();
            let expected = 100.0 * (-(k as f64) * dt / tau_m).exp();
            assert_relative_eq!(s.rotor_speed, expected, max_relative = 1e-3);
        }
    }

    #[test]
    fn synchronous_angle_advances_with_slip() {
        let p = params();
        let s = MachineState {
            rotor_speed: 100.0,
            i_qs: 6.0,
            ..MachineState::fluxed_at_rest(&p)
        };
        let te = p.developed_torque(s.rotor_flux, s.i_qs);
        let next = p
            .step_mechanical(&s, te, te - p.spec().friction * 100.0, 1e-4)
            .unwrap();
        let slip = p.slip_frequency(6.0, s.rotor_flux).unwrap();
        assert_relative_eq!(next.synchronous_angle, (2.0 * 100.0 + slip) * 1e-4, max_relative = 1e-9);
    }

    #[test]
    fn losses_with_no_excitation_are_converter_fixed_only() {
        let p = params();
        let s = MachineState {
            rotor_flux: 0.0,
            i_ds: 0.0,
            i_qs: 0.0,
            ..MachineState::fluxed_at_rest(&p)
        };
        let l = p.compute_losses(&s, 0.0);
        assert_eq!(l.stator_copper, 0.0);
        assert_eq!(l.rotor_copper, 0.0);
        assert_eq!(l.iron, 0.0);
        assert_eq!(l.converter, 100.0);
        assert_eq!(l.total, 100.0);
    }

    #[test]
    fn halving_flux_quarters_iron_loss() {
        let p = params();
        let s = MachineState {
            i_qs: 4.0,
            ..MachineState::fluxed_at_rest(&p)
        };
        let half = MachineState {
            rotor_flux: s.rotor_flux / 2.0,
            ..s
        };
        let full = p.compute_losses(&s, 300.0).iron;
        assert_relative_eq!(p.compute_losses(&half, 300.0).iron, full / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn default_losses_at_rated_point_match_hand_sum() {
        // Rated flux, i_ds = 6 A, i_qs = 9.5 A, omega_e = 310 rad/s, evaluated by hand:
        //   stator copper  1.5 * 1.0 * (36 + 90.25)                 = 189.375
        //   rotor copper   1.5 * 1.04 * (0.15/0.156)^2 * 90.25      = 130.16826923076923
        //   iron           (0.005 * 96100 + 0.8 * 310) * 0.81       = 590.085
        //   converter      100 + 0.3 * 126.25                       = 137.875
        let p = params();
        let s = MachineState {
            i_qs: 9.5,
            ..MachineState::fluxed_at_rest(&p)
        };
        let l = p.compute_losses(&s, 310.0);
        assert_relative_eq!(l.stator_copper, 189.375, max_relative = 1e-14);
        assert_relative_eq!(l.rotor_copper, 130.168_269_230_769_23, max_relative = 1e-14);
        assert_relative_eq!(l.iron, 590.085, max_relative = 1e-14);
        assert_relative_eq!(l.converter, 137.875, max_relative = 1e-14);
        assert_relative_eq!(l.total, 1_047.503_269_230_769, max_relative = 1e-14);
    }

    #[test]
    fn input_power_is_shaft_plus_losses() {
        let p = params();
        let s = MachineState {
            rotor_speed: 100.0,
            ..MachineState::fluxed_at_rest(&p)
        };
        assert_eq!(input_power(&s, 0.0, &LossBreakdown::default()), 0.0);
        let losses = LossBreakdown::new(100.0, 50.0, 200.0, 50.0);
        assert_eq!(input_power(&s, 10.0, &losses), 1400.0);
        // Tables-style row formatting: 1.9 kW out of 3.5 kW in rounds into 54..57 %.
        let eff = (1900.0f64 / 3500.0 * 100.0).round();
        assert!((54.0..=57.0).contains(&eff));
    }

    #[test]
    fn coupled_step_holds_field_oriented_equilibrium() {
        let p = params();
        let iqs = 5.0;
        let te = p.developed_torque(p.rated_flux(), iqs);
        let omega = 120.0;
        let load = te - p.spec().friction * omega;
        let s = MachineState {
            rotor_speed: omega,
            i_qs: iqs,
            ..MachineState::fluxed_at_rest(&p)
        };
        let next = p.step(&s, 6.0, iqs, load, CurrentTracking::Lag, 1e-4).unwrap();
        assert_relative_eq!(next.rotor_flux, s.rotor_flux, max_relative = 1e-15);
        assert_relative_eq!(next.rotor_speed, omega, max_relative = 1e-13);
        assert_eq!(next.i_ds, 6.0);
        assert_eq!(next.i_qs, iqs);
    }

    #[test]
    fn current_lag_tracks_command() {
        let p = params();
        let mut s = MachineState::fluxed_at_rest(&p);
        let tau_i = p.spec().current_tracking_time_constant;
        let dt = 1e-4;
        let steps = (tau_i / dt).round() as usize;
        for _ in 0..steps {
            s = p.step(&s, 6.0, 10.0, 0.0, CurrentTracking::Lag, dt).unwrap();
        }
        assert_relative_eq!(s.i_qs, 10.0 * (1.0 - (-1.0f64).exp()), max_relative = 1e-6);
    }

    #[test]
    fn coupled_step_rejects_non_finite() {
        let p = params();
        let s = MachineState::fluxed_at_rest(&p);
        assert!(matches!(
            p.step(&s, f64::INFINITY, 0.0, 0.0, CurrentTracking::Lag, 1e-4),
            Err(Error::NonFinite { .. })
        ));
    }
}
