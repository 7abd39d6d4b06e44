//! Fixed-step closed loop: speed PI, rated-flux / search switch, feedforward
//! compensation, current lag, flux and mechanical dynamics, losses and power.

use crate::compensator::{Compensator, CompensatorSettings};
use crate::error::{Error, Result};
use crate::foc::{rated_flux_command, DriveCommand, SpeedLoop};
use crate::harness::config::Config;
use crate::harness::scenario::Scenario;
use crate::harness::telemetry::TelemetryRecord;
use crate::machine::{input_power, CurrentTracking, MachineState};
use crate::optimizer::{SearchMode, SearchState};

/// One dc-link power sample taken by the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchEvent {
    pub time: f64,
    pub power: f64,
    pub power_change: Option<f64>,
    pub applied_step: f64,
    pub i_ds_command: f64,
    pub current_base: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Keep one record every this many steps; 0 keeps none.
    pub decimation: u32,
    /// Length of the closing window over which input and output power are averaged.
    pub tail_window: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: u64,
    pub final_state: MachineState,
    pub final_mode: SearchMode,
    pub final_i_ds_command: f64,
    pub search_entered_at: Option<f64>,
    /// Time and sample count at which the search first reported convergence.
    pub converged_at: Option<(f64, u32)>,
    pub converged_at_end: bool,
    /// Largest `|omega_ref - omega_r|` seen while searching.
    pub max_search_speed_error: f64,
    pub abandoned_at: Vec<f64>,
    pub tail_p_in: f64,
    pub tail_p_out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub records: Vec<TelemetryRecord>,
    pub events: Vec<SearchEvent>,
    pub summary: RunSummary,
}

pub struct Simulation<'a> {
    config: &'a Config,
    scenario: &'a Scenario,
    dt: f64,
    tracking: CurrentTracking,
    state: MachineState,
    speed_loop: SpeedLoop,
    search: SearchState,
    compensator: Compensator,
    i_ds_cmd: f64,
    i_qs_cmd: f64,
    step_index: u64,
    previous_refs: Option<(f64, f64)>,
    power: f64,
    events: Vec<SearchEvent>,
    search_entered_at: Option<f64>,
    converged_at: Option<(f64, u32)>,
    max_search_speed_error: f64,
    abandoned_at: Vec<f64>,
}

impl<'a> Simulation<'a> {
    pub fn new(config: &'a Config, scenario: &'a Scenario) -> Result<Self> {
        scenario.validate(&format!("scenario `{}`", scenario.name))?;
        let params = &config.params;
        let speed_loop = SpeedLoop::new(config.speed_loop, params.spec().max_torque_current)?;
        let search = SearchState::new(config.search, params)?;
        let compensator = Compensator::new(CompensatorSettings {
            enabled: config.compensator.enabled && scenario.compensator,
            ..config.compensator
        });
        let state = MachineState::fluxed_at_rest(params);
        let power = Self::power_of(config, &state)?.2;
        Ok(Simulation {
            config,
            scenario,
            dt: scenario.dt.unwrap_or(config.simulation.dt),
            tracking: config.simulation.current_tracking,
            state,
            speed_loop,
            search,
            compensator,
            i_ds_cmd: rated_flux_command(params),
            i_qs_cmd: 0.0,
            step_index: 0,
            previous_refs: None,
            power,
            events: Vec::new(),
            search_entered_at: None,
            converged_at: None,
            max_search_speed_error: 0.0,
            abandoned_at: Vec::new(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.dt
    }

    pub fn state(&self) -> &MachineState {
        &self.state
    }

    pub fn mode(&self) -> SearchMode {
        self.search.mode()
    }

    pub fn search(&self) -> &SearchState {
        &self.search
    }

    pub fn speed_loop(&self) -> &SpeedLoop {
        &self.speed_loop
    }

    pub fn events(&self) -> &[SearchEvent] {
        &self.events
    }

    pub fn i_ds_command(&self) -> f64 {
        self.i_ds_cmd
    }

    /// Number of integration steps the scenario lasts.
    pub fn total_steps(&self) -> u64 {
        (self.scenario.duration / self.dt).round() as u64
    }

    /// (torque, losses, input power) of a state.
    fn power_of(config: &Config, state: &MachineState) -> Result<(f64, crate::machine::LossBreakdown, f64)> {
        let params = &config.params;
        let torque = params.developed_torque(state.rotor_flux, state.i_qs);
        let omega_e = params.synchronous_speed(state)?;
        let losses = params.compute_losses(state, omega_e);
        let p_in = input_power(state, torque, &losses);
        Ok((torque, losses, p_in))
    }

    /// Advances one integration step and returns the signals at its end.
    pub fn step(&mut self) -> Result<TelemetryRecord> {
        let k = self.step_index;
        self.advance().map_err(|e| match e {
            Error::Diverged { .. } => e,
            other => Error::Diverged {
                step: k,
                source: Box::new(other),
            },
        })
    }

    fn advance(&mut self) -> Result<TelemetryRecord> {
        let params = &self.config.params;
        let dt = self.dt;
        let t = self.time();
        let omega_ref = self.scenario.speed_profile.value_at(t);
        let load = self.scenario.load_profile.value_at(t);
        let changed = self
            .previous_refs
            .is_some_and(|prev| prev != (omega_ref, load));
        self.previous_refs = Some((omega_ref, load));
        let speed_error = omega_ref - self.state.rotor_speed;

        let rated = rated_flux_command(params);
        if self.scenario.flc {
            let before = self.search.mode();
            if self.search.update_mode(speed_error, changed) {
                self.abandoned_at.push(t);
            }
            if self.search.mode() == SearchMode::TransientRatedFlux {
                let carried = self.compensator.release();
                self.speed_loop.absorb(carried);
                self.i_ds_cmd = rated;
            } else if before == SearchMode::TransientRatedFlux {
                self.i_ds_cmd = rated;
                self.search_entered_at.get_or_insert(t);
            }
        } else {
            self.i_ds_cmd = rated;
        }

        let sample_due = self.scenario.flc && self.search.tick(dt);
        if sample_due {
            let out = self.search.search_sample(
                &self.config.controller,
                self.power,
                self.state.rotor_speed,
                self.i_ds_cmd,
                self.i_qs_cmd,
            )?;
            self.i_ds_cmd = out.i_ds_command;
            let converged = self.search.converged();
            if converged && self.converged_at.is_none() {
                self.converged_at = Some((t, self.search.samples()));
            }
            self.events.push(SearchEvent {
                time: t,
                power: self.power,
                power_change: out.power_change,
                applied_step: out.applied_step,
                i_ds_command: out.i_ds_command,
                current_base: out.current_base,
                converged,
            });
            let carried = self.compensator.release();
            self.speed_loop.absorb(carried);
        }

        let i_qs_pi = self.speed_loop.step(omega_ref, self.state.rotor_speed, dt);
        if sample_due {
            self.compensator
                .latch(self.state.rotor_flux, i_qs_pi, t, self.i_ds_cmd);
        }
        let correction = self
            .compensator
            .update(params, self.state.rotor_flux, self.i_qs_cmd, t)?;
        let command = DriveCommand::limited(params, omega_ref, self.i_ds_cmd, i_qs_pi + correction);
        self.i_ds_cmd = command.i_ds_command;
        self.i_qs_cmd = command.i_qs_command;

        self.state = params.step(
            &self.state,
            command.i_ds_command,
            command.i_qs_command,
            load,
            self.tracking,
            dt,
        )?;
        self.step_index += 1;

        let (torque, losses, p_in) = Self::power_of(self.config, &self.state)?;
        self.power = p_in;
        let p_out = torque * self.state.rotor_speed;
        let mode = self.search.mode();
        if mode == SearchMode::SteadySearch {
            let err = (omega_ref - self.state.rotor_speed).abs();
            self.max_search_speed_error = self.max_search_speed_error.max(err);
        }
        Ok(TelemetryRecord {
            time: self.time(),
            omega_ref,
            omega_r: self.state.rotor_speed,
            i_ds_cmd: command.i_ds_command,
            i_qs_cmd: command.i_qs_command,
            i_ds: self.state.i_ds,
            i_qs: self.state.i_qs,
            psi_dr: self.state.rotor_flux,
            torque,
            load_torque: load,
            loss_cu_s: losses.stator_copper,
            loss_cu_r: losses.rotor_copper,
            loss_fe: losses.iron,
            loss_conv: losses.converter,
            p_in,
            p_out,
            efficiency: (p_in > 0.0).then(|| p_out / p_in),
            mode,
        })
    }

    /// Runs the scenario to completion.
    pub fn run(mut self, opts: RunOptions) -> Result<RunResult> {
        let total = self.total_steps();
        let tail_steps = ((opts.tail_window / self.dt).round() as u64).clamp(1, total.max(1));
        let tail_start = total.saturating_sub(tail_steps);
        let mut records = Vec::new();
        let (mut p_in_sum, mut p_out_sum, mut tail_n) = (0.0, 0.0, 0u64);
        for k in 0..total {
            let rec = self.step()?;
            if opts.decimation > 0 && (k + 1) % u64::from(opts.decimation) == 0 {
                records.push(rec);
            }
            if k >= tail_start {
                p_in_sum += rec.p_in;
                p_out_sum += rec.p_out;
                tail_n += 1;
            }
        }
        let n = tail_n.max(1) as f64;
        let summary = RunSummary {
            steps: total,
            final_state: self.state,
            final_mode: self.search.mode(),
            final_i_ds_command: self.i_ds_cmd,
            search_entered_at: self.search_entered_at,
            converged_at: self.converged_at,
            converged_at_end: self.search.converged(),
            max_search_speed_error: self.max_search_speed_error,
            abandoned_at: self.abandoned_at,
            tail_p_in: p_in_sum / n,
            tail_p_out: p_out_sum / n,
        };
        Ok(RunResult {
            records,
            events: self.events,
            summary,
        })
    }
}

/// Runs `scenario` with the configured decimation, averaging power over the
/// final search period.
pub fn run_scenario(scenario: &Scenario, config: &Config) -> Result<RunResult> {
    Simulation::new(config, scenario)?.run(RunOptions {
        decimation: config.simulation.decimation,
        tail_window: config.search.period,
    })
}
