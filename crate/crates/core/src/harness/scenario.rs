use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant signal given as `(time, value)` breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile(pub Vec<(f64, f64)>);

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile(vec![(0.0, value)])
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        let first = self
            .0
            .first()
            .ok_or_else(|| Error::config(key, "needs at least one breakpoint"))?;
        if first.0 != 0.0 {
            return Err(Error::config(key, "first breakpoint must be at t = 0"));
        }
        if self.0.iter().any(|(t, v)| !(t.is_finite() && v.is_finite())) {
            return Err(Error::config(key, "breakpoints must be finite"));
        }
        if self.0.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::config(key, "breakpoint times must be strictly increasing"));
        }
        Ok(())
    }

    /// Value of the last breakpoint at or before `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.0.partition_point(|&(bt, _)| bt <= t);
        self.0[idx.saturating_sub(1)].1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    /// Overrides the simulation step when set.
    #[serde(default)]
    pub dt: Option<f64>,
    pub speed_profile: Profile,
    pub load_profile: Profile,
    #[serde(default = "yes")]
    pub flc: bool,
    #[serde(default = "yes")]
    pub compensator: bool,
}

fn yes() -> bool {
    true
}

impl Scenario {
    pub fn constant(name: impl Into<String>, duration: f64, speed: f64, load: f64) -> Self {
        Scenario {
            name: name.into(),
            duration,
            dt: None,
            speed_profile: Profile::constant(speed),
            load_profile: Profile::constant(load),
            flc: true,
            compensator: true,
        }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config(format!("{key}.name"), "must not be empty"));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::config(format!("{key}.duration"), "must be finite and non-negative"));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::config(format!("{key}.dt"), "must be positive"));
            }
        }
        self.speed_profile.validate(&format!("{key}.speed_profile"))?;
        self.load_profile.validate(&format!("{key}.load_profile"))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_lookup() {
        let p = Profile(vec![(0.0, 1.0), (2.0, 5.0), (3.0, -1.0)]);
        assert_eq!(p.value_at(0.0), 1.0);
        assert_eq!(p.value_at(1.999), 1.0);
        assert_eq!(p.value_at(2.0), 5.0);
        assert_eq!(p.value_at(100.0), -1.0);
    }

    #[test]
    fn profile_validation() {
        assert!(Profile(vec![]).validate("p").is_err());
        assert!(Profile(vec![(0.5, 1.0)]).validate("p").is_err());
        assert!(Profile(vec![(0.0, 1.0), (0.0, 2.0)]).validate("p").is_err());
        assert!(Profile(vec![(0.0, 1.0), (1.0, 2.0)]).validate("p").is_ok());
    }

    #[test]
    fn scenario_validation() {
        let mut s = Scenario::constant("x", 1.0, 100.0, 5.0);
        assert!(s.validate("scenario[0]").is_ok());
        s.duration = -1.0;
        let err = s.validate("scenario[0]").unwrap_err().to_string();
        assert!(err.contains("scenario[0].duration"), "{err}");
    }
}
