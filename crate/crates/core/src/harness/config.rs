//! TOML configuration: one file describes the machine, every controller and
//! the scenarios. Every constructed type is validated on load and unknown keys
//! are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compensator::CompensatorSettings;
use crate::error::{Error, Result};
use crate::foc::{SpeedLoop, SpeedLoopGains};
use crate::fuzzy::{
    EfficiencyController, FuzzyRuleBase, MembershipFunction, OperatingEnvelope, Rule,
    RuleBaseConfig, ScalingGains,
};
use crate::harness::scenario::Scenario;
use crate::machine::{CurrentTracking, MachineConfig, MachineParams};
use crate::optimizer::SearchSettings;

/// The commented default configuration shipped with the crate.
pub const DEFAULT_CONFIG: &str = include_str!("../../config/default.toml");

/// Environment variable consulted when no `--config` flag is given.
pub const CONFIG_ENV: &str = "FLUXSEEK_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSettings {
    pub dt: f64,
    /// Emit one telemetry record every this many integration steps.
    pub decimation: u32,
    #[serde(default)]
    pub current_tracking: CurrentTracking,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings {
            dt: 1e-4,
            decimation: 10,
            current_tracking: CurrentTracking::Lag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSettings {
    pub duration: f64,
    pub load_fractions: Vec<f64>,
    /// Defaults to rated speed.
    #[serde(default)]
    pub speed: Option<f64>,
}

impl Default for TableSettings {
    fn default() -> Self {
        TableSettings {
            duration: 15.0,
            load_fractions: vec![0.25, 1.0 / 3.0, 0.5, 0.75],
            speed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzyConfig {
    pub gains: ScalingGains,
    pub envelope: OperatingEnvelope,
    pub power_change_sets: Vec<MembershipFunction>,
    pub last_action_sets: Vec<MembershipFunction>,
    pub output_sets: Vec<MembershipFunction>,
    pub rules: Vec<Rule>,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        let rb = RuleBaseConfig::default();
        FuzzyConfig {
            gains: ScalingGains::default(),
            envelope: OperatingEnvelope {
                max_speed: 180.0,
                max_torque: 30.0,
            },
            power_change_sets: rb.power_change_sets,
            last_action_sets: rb.last_action_sets,
            output_sets: rb.output_sets,
            rules: rb.rules,
        }
    }
}

/// File layout, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub machine: MachineConfig,
    pub speed_loop: SpeedLoopGains,
    pub fuzzy: FuzzyConfig,
    pub search: SearchSettings,
    pub compensator: CompensatorSettings,
    pub simulation: SimulationSettings,
    #[serde(default)]
    pub table: TableSettings,
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<Scenario>,
}

/// Fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub params: MachineParams,
    pub speed_loop: SpeedLoopGains,
    pub controller: EfficiencyController,
    pub search: SearchSettings,
    pub compensator: CompensatorSettings,
    pub simulation: SimulationSettings,
    pub table: TableSettings,
    pub scenarios: Vec<Scenario>,
}

impl Config {
    pub fn from_file(file: ConfigFile) -> Result<Self> {
        let params = MachineParams::new(file.machine)?;
        SpeedLoop::new(file.speed_loop, params.spec().max_torque_current)?;
        file.fuzzy.gains.validate(&file.fuzzy.envelope)?;
        let rules = FuzzyRuleBase::new(RuleBaseConfig {
            power_change_sets: file.fuzzy.power_change_sets,
            last_action_sets: file.fuzzy.last_action_sets,
            output_sets: file.fuzzy.output_sets,
            rules: file.fuzzy.rules,
        })?;
        let controller = EfficiencyController::new(rules, file.fuzzy.gains, &params);
        file.search.validate()?;
        validate_simulation(&file.simulation, &params)?;
        validate_table(&file.table)?;
        for (i, s) in file.scenarios.iter().enumerate() {
            s.validate(&format!("scenario[{i}]"))?;
            if let Some(dt) = s.dt {
                validate_dt(&format!("scenario[{i}].dt"), dt, &params)?;
            }
            if file.scenarios[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::config(
                    format!("scenario[{i}].name"),
                    format!("duplicate scenario name `{}`", s.name),
                ));
            }
        }
        Ok(Config {
            params,
            speed_loop: file.speed_loop,
            controller,
            search: file.search,
            compensator: file.compensator,
            simulation: file.simulation,
            table: file.table,
            scenarios: file.scenarios,
        })
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        Config::from_file(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Config::parse(&text, path)
    }

    /// The shipped default configuration.
    pub fn builtin() -> Self {
        Config::parse(DEFAULT_CONFIG, Path::new("<built-in default.toml>"))
            .expect("shipped default configuration is valid")
    }

    pub fn scenario(&self, name: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    pub fn table_speed(&self) -> f64 {
        self.table.speed.unwrap_or(self.params.spec().rated_speed)
    }
}

fn validate_dt(key: &str, dt: f64, params: &MachineParams) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::config(key, "must be positive"));
    }
    if dt > params.rotor_time_constant() / 10.0 {
        return Err(Error::config(key, "must not exceed a tenth of the rotor time constant"));
    }
    if dt > params.spec().current_tracking_time_constant / 2.0 {
        return Err(Error::config(key, "must not exceed half the current tracking time constant"));
    }
    Ok(())
}

fn validate_simulation(sim: &SimulationSettings, params: &MachineParams) -> Result<()> {
    validate_dt("simulation.dt", sim.dt, params)?;
    if sim.decimation == 0 {
        return Err(Error::config("simulation.decimation", "must be at least 1"));
    }
    Ok(())
}

fn validate_table(table: &TableSettings) -> Result<()> {
    if !(table.duration.is_finite() && table.duration > 0.0) {
        return Err(Error::config("table.duration", "must be positive"));
    }
    if table.load_fractions.is_empty() || table.load_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.5)) {
        return Err(Error::config("table.load_fractions", "needs fractions in (0, 1.5]"));
    }
    if let Some(speed) = table.speed {
        if !(speed.is_finite() && speed > 0.0) {
            return Err(Error::config("table.speed", "must be positive"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_file() -> ConfigFile {
        toml::from_str(DEFAULT_CONFIG).unwrap()
    }

    #[test]
    fn shipped_config_loads() {
        let cfg = Config::builtin();
        assert!(!cfg.scenarios.is_empty());
    }

    #[test]
    fn shipped_config_matches_code_defaults() {
        let f = default_file();
        assert_eq!(f.machine, MachineConfig::default());
        assert_eq!(f.search, SearchSettings::default());
        assert_eq!(f.compensator, CompensatorSettings::default());
        assert_eq!(f.simulation, SimulationSettings::default());
        assert_eq!(f.table, TableSettings::default());
        let fuzzy = FuzzyConfig::default();
        assert_eq!(f.fuzzy.gains, fuzzy.gains);
        assert_eq!(f.fuzzy.envelope, fuzzy.envelope);
        assert_eq!(f.fuzzy.rules, fuzzy.rules);
        assert_eq!(f.fuzzy.last_action_sets, fuzzy.last_action_sets);
        for (a, b) in f.fuzzy.power_change_sets.iter().zip(&fuzzy.power_change_sets) {
            assert_eq!(a.label, b.label);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn speed_loop_defaults_follow_pole_placement() {
        let f = default_file();
        let params = MachineParams::new(f.machine).unwrap();
        let g = SpeedLoopGains::pole_placement(&params, 30.0, 1.0);
        assert!((f.speed_loop.kp - g.kp).abs() / g.kp < 1e-3, "{} vs {}", f.speed_loop.kp, g.kp);
        assert!((f.speed_loop.ki - g.ki).abs() / g.ki < 1e-3, "{} vs {}", f.speed_loop.ki, g.ki);
    }

    #[test]
    fn invariant_violation_names_the_key() {
        let text = DEFAULT_CONFIG.replace("min_excitation_current = 1.2", "min_excitation_current = 6.5");
        let err = Config::parse(&text, Path::new("x.toml")).unwrap_err().to_string();
        assert!(err.contains("machine.min_excitation_current"), "{err}");
    }

    #[test]
    fn missing_rule_is_a_totality_error() {
        let mut f = default_file();
        f.fuzzy.rules.pop();
        let err = Config::from_file(f).unwrap_err().to_string();
        assert!(err.contains("not total"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = DEFAULT_CONFIG.replace("[search]", "[search]\nsurprise = 1");
        let err = Config::parse(&text, Path::new("x.toml")).unwrap_err().to_string();
        assert!(err.contains("surprise"), "{err}");
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(Config::load("/definitely/not/here.toml"), Err(Error::Io { .. })));
    }

    #[test]
    fn duplicate_scenario_names_are_rejected() {
        let mut f = default_file();
        let dup = f.scenarios[0].clone();
        f.scenarios.push(dup);
        assert!(Config::from_file(f).is_err());
    }
}
