//! Steady-state reference: the operating point in closed form for a given
//! excitation, and a brute-force sweep of excitation for the minimum input power.

use crate::error::{Error, Result};
use crate::machine::{input_power, LossBreakdown, MachineParams, MachineState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyPoint {
    pub i_ds: f64,
    pub i_qs: f64,
    pub rotor_flux: f64,
    pub torque: f64,
    pub losses: LossBreakdown,
    pub p_in: f64,
    pub p_out: f64,
}

impl SteadyPoint {
    pub fn efficiency(&self) -> f64 {
        self.p_out / self.p_in
    }
}

/// Field-oriented steady state at `speed` carrying `load_torque` with
/// excitation `i_ds`. `None` when the required torque current exceeds its limit.
pub fn steady_state(params: &MachineParams, speed: f64, load_torque: f64, i_ds: f64) -> Result<Option<SteadyPoint>> {
    let s = params.spec();
    let psi = s.magnetizing_inductance * i_ds;
    if psi < params.flux_floor() {
        return Err(Error::FluxFloor {
            psi,
            floor: params.flux_floor(),
        });
    }
    let torque = load_torque + s.friction * speed;
    let i_qs = torque / (params.torque_constant_flux() * psi);
    if i_qs.abs() > s.max_torque_current {
        return Ok(None);
    }
    let state = MachineState {
        rotor_flux: psi,
        rotor_speed: speed,
        i_ds,
        i_qs,
        synchronous_angle: 0.0,
        simulated_time: 0.0,
    };
    let omega_e = params.synchronous_speed(&state)?;
    let losses = params.compute_losses(&state, omega_e);
    let p_in = input_power(&state, torque, &losses);
    Ok(Some(SteadyPoint {
        i_ds,
        i_qs,
        rotor_flux: psi,
        torque,
        losses,
        p_in,
        p_out: torque * speed,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub best: SteadyPoint,
    /// Feasible points, from rated excitation downwards.
    pub curve: Vec<SteadyPoint>,
    pub infeasible: usize,
}

/// Evaluates `grid` excitation levels evenly spaced from rated down to the
/// minimum and returns the one with the lowest input power.
pub fn oracle_sweep(params: &MachineParams, speed: f64, load_torque: f64, grid: usize) -> Result<SweepResult> {
    if grid == 0 {
        return Err(Error::config("grid", "must be at least 1"));
    }
    let s = params.spec();
    let (hi, lo) = (s.rated_excitation_current, s.min_excitation_current);
    if steady_state(params, speed, load_torque, hi)?.is_none() {
        return Err(Error::config(
            "torque",
            format!("{load_torque} N m at {speed} rad/s needs more than the torque current limit at rated flux"),
        ));
    }
    let mut curve = Vec::with_capacity(grid);
    let mut infeasible = 0;
    for k in 0..grid {
        let i_ds = if grid == 1 {
            hi
        } else {
            hi - (hi - lo) * k as f64 / (grid - 1) as f64
        };
        match steady_state(params, speed, load_torque, i_ds)? {
            Some(p) => curve.push(p),
            None => infeasible += 1,
        }
    }
    let best = *curve
        .iter()
        .min_by(|a, b| a.p_in.total_cmp(&b.p_in))
        .expect("rated excitation is feasible");
    Ok(SweepResult {
        best,
        curve,
        infeasible,
    })
}
