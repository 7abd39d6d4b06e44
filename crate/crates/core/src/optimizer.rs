//! Efficiency search supervisor.
//!
//! Holds rated flux while the drive is in a transient, switches to the search
//! once the speed error has stayed inside a band long enough, samples dc-link
//! power every search period and applies the fuzzy excitation step. Any change
//! of the speed or load command drops back to rated flux with cleared history.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{EfficiencyController, EfficiencyInput};
use crate::machine::MachineParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    #[default]
    TransientRatedFlux,
    SteadySearch,
}

impl SearchMode {
    pub fn tag(self) -> &'static str {
        match self {
            SearchMode::TransientRatedFlux => "transient",
            SearchMode::SteadySearch => "search",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSettings {
    /// Seconds between dc-link power samples.
    pub period: f64,
    /// Speed-error band as a fraction of rated speed.
    pub steady_band_fraction: f64,
    /// Consecutive in-band integration steps before the search starts.
    pub steady_steps: u32,
    /// Applied steps below this fraction of the current base count as settled.
    pub convergence_fraction: f64,
    /// Consecutive settled samples that mark convergence.
    pub convergence_samples: u32,
    /// Size of the opening decrement, per unit of the current base.
    pub probe_step_pu: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            period: 0.25,
            steady_band_fraction: 0.005,
            steady_steps: 200,
            convergence_fraction: 0.01,
            convergence_samples: 3,
            probe_step_pu: 0.5,
        }
    }
}

impl SearchSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::config("search.period", "must be positive"));
        }
        if !(self.steady_band_fraction > 0.0 && self.steady_band_fraction < 1.0) {
            return Err(Error::config("search.steady_band_fraction", "must lie in (0, 1)"));
        }
        if self.steady_steps == 0 {
            return Err(Error::config("search.steady_steps", "must be at least 1"));
        }
        if !(self.convergence_fraction > 0.0 && self.convergence_fraction < 1.0) {
            return Err(Error::config("search.convergence_fraction", "must lie in (0, 1)"));
        }
        if self.convergence_samples == 0 {
            return Err(Error::config("search.convergence_samples", "must be at least 1"));
        }
        if !(self.probe_step_pu > 0.0 && self.probe_step_pu <= 1.0) {
            return Err(Error::config("search.probe_step_pu", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Result of one power sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOutcome {
    pub i_ds_command: f64,
    /// Step actually applied after clamping, A.
    pub applied_step: f64,
    /// Power change that drove the step; `None` on the priming sample.
    pub power_change: Option<f64>,
    pub current_base: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    settings: SearchSettings,
    band: f64,
    min_excitation: f64,
    rated_excitation: f64,
    mode: SearchMode,
    previous_power: Option<f64>,
    last_step: f64,
    /// Last nonzero applied step; the controller's direction input.
    last_move: f64,
    steady_counter: u32,
    /// Integration steps since the last sample.
    sample_timer: u64,
    samples: u32,
    settled_samples: u32,
    converged: bool,
}

impl SearchState {
    pub fn new(settings: SearchSettings, params: &MachineParams) -> Result<Self> {
        settings.validate()?;
        let spec = params.spec();
        Ok(SearchState {
            settings,
            band: settings.steady_band_fraction * spec.rated_speed,
            min_excitation: spec.min_excitation_current,
            rated_excitation: spec.rated_excitation_current,
            mode: SearchMode::TransientRatedFlux,
            previous_power: None,
            last_step: 0.0,
            last_move: 0.0,
            steady_counter: 0,
            sample_timer: 0,
            samples: 0,
            settled_samples: 0,
            converged: false,
        })
    }

    pub fn mode(&self) -> SearchMode {
        self.mode
    }

    pub fn last_step(&self) -> f64 {
        self.last_step
    }

    pub fn previous_power(&self) -> Option<f64> {
        self.previous_power
    }

    pub fn steady_counter(&self) -> u32 {
        self.steady_counter
    }

    /// Samples taken since the search was entered.
    pub fn samples(&self) -> u32 {
        self.samples
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn settings(&self) -> &SearchSettings {
        &self.settings
    }

    /// Seconds since the last power sample.
    pub fn sample_timer(&self, dt: f64) -> f64 {
        self.sample_timer as f64 * dt
    }

    fn clear_history(&mut self) {
        self.previous_power = None;
        self.last_step = 0.0;
        self.last_move = 0.0;
        self.sample_timer = 0;
        self.samples = 0;
        self.settled_samples = 0;
        self.converged = false;
    }

    /// Mode transition for one integration step. Returns `true` when the
    /// search was abandoned on this step.
    pub fn update_mode(&mut self, speed_error: f64, command_changed: bool) -> bool {
        if command_changed || !(speed_error.abs() <= self.band) {
            let abandoned = self.mode == SearchMode::SteadySearch;
            self.mode = SearchMode::TransientRatedFlux;
            self.steady_counter = 0;
            self.clear_history();
            return abandoned;
        }
        if self.mode == SearchMode::TransientRatedFlux {
            self.steady_counter += 1;
            if self.steady_counter >= self.settings.steady_steps {
                self.mode = SearchMode::SteadySearch;
                self.clear_history();
            }
        }
        false
    }

    /// Advances the sample timer by one integration step; `true` when a power
    /// sample is due on this step.
    pub fn tick(&mut self, dt: f64) -> bool {
        if self.mode != SearchMode::SteadySearch {
            return false;
        }
        self.sample_timer += 1;
        let due = (self.settings.period / dt).round().max(1.0) as u64;
        if self.sample_timer >= due {
            self.sample_timer = 0;
            true
        } else {
            false
        }
    }

    /// Takes one dc-link power sample and returns the new excitation command.
    ///
    /// The first sample after entering the search only records the power; the
    /// second applies the opening decrement; later samples apply the fuzzy step.
    pub fn search_sample(
        &mut self,
        controller: &EfficiencyController,
        power: f64,
        omega_r: f64,
        i_ds_cmd: f64,
        i_qs_cmd: f64,
    ) -> Result<SampleOutcome> {
        if self.mode != SearchMode::SteadySearch {
            return Err(Error::Contract("power sampled outside the steady-state search"));
        }
        let Some(previous) = self.previous_power else {
            self.previous_power = Some(power);
            self.samples = 1;
            return Ok(SampleOutcome {
                i_ds_command: i_ds_cmd,
                applied_step: 0.0,
                power_change: None,
                current_base: None,
            });
        };
        let power_change = power - previous;
        let current_base = controller.current_base(omega_r, i_ds_cmd, i_qs_cmd)?;
        let requested = if self.samples == 1 {
            -self.settings.probe_step_pu * current_base
        } else {
            controller
                .step(&EfficiencyInput {
                    power_change,
                    omega_r,
                    i_ds_cmd,
                    i_qs_cmd,
                    last_step: self.last_move,
                })?
                .step
        };
        let command = (i_ds_cmd + requested).clamp(self.min_excitation, self.rated_excitation);
        let applied = command - i_ds_cmd;

        self.previous_power = Some(power);
        self.last_step = applied;
        if applied != 0.0 {
            self.last_move = applied;
        }
        self.samples += 1;
        if applied.abs() < self.settings.convergence_fraction * current_base {
            self.settled_samples += 1;
        } else {
            self.settled_samples = 0;
        }
        self.converged = self.settled_samples >= self.settings.convergence_samples;

        Ok(SampleOutcome {
            i_ds_command: command,
            applied_step: applied,
            power_change: Some(power_change),
            current_base: Some(current_base),
        })
    }
}
