//! Fuzzy efficiency controller.
//!
//! The dc-link power change and the last excitation step are brought to per
//! unit with speed- and torque-dependent base values, fuzzified over `[-1, 1]`,
//! run through a 7x2 rule table with `min` as the AND operator, and the
//! excitation step is recovered by height defuzzification and scaled back to
//! amperes.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::MachineParams;

/// Linguistic tag of a fuzzy set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    NB,
    NM,
    NS,
    ZE,
    PS,
    PM,
    PB,
    N,
    P,
}

impl Label {
    pub const SEVEN: [Label; 7] = [
        Label::NB,
        Label::NM,
        Label::NS,
        Label::ZE,
        Label::PS,
        Label::PM,
        Label::PB,
    ];
    pub const SIGN: [Label; 2] = [Label::N, Label::P];
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Which side of a set, if any, stays at full membership past its center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shoulder {
    #[default]
    None,
    Left,
    Right,
}

/// Triangular membership function on the normalized axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembershipFunction {
    pub label: Label,
    pub left_foot: f64,
    pub center: f64,
    pub right_foot: f64,
    #[serde(default)]
    pub shoulder: Shoulder,
}

impl MembershipFunction {
    pub fn triangle(label: Label, left_foot: f64, center: f64, right_foot: f64) -> Self {
        MembershipFunction {
            label,
            left_foot,
            center,
            right_foot,
            shoulder: Shoulder::None,
        }
    }

    pub fn with_shoulder(self, shoulder: Shoulder) -> Self {
        MembershipFunction { shoulder, ..self }
    }

    fn validate(&self, key: &str) -> Result<()> {
        let pts = [self.left_foot, self.center, self.right_foot];
        if pts.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(key, "breakpoints must be finite"));
        }
        if !(self.left_foot <= self.center && self.center <= self.right_foot) {
            return Err(Error::config(
                key,
                format!("{}: need left_foot <= center <= right_foot", self.label),
            ));
        }
        if !(-1.0..=1.0).contains(&self.center) {
            return Err(Error::config(key, format!("{}: center outside [-1, 1]", self.label)));
        }
        Ok(())
    }

    /// Membership degree at `x` (not clamped here).
    pub fn degree(&self, x: f64) -> f64 {
        if x < self.center {
            if self.shoulder == Shoulder::Left || x == self.center {
                1.0
            } else if x <= self.left_foot {
                0.0
            } else {
                (x - self.left_foot) / (self.center - self.left_foot)
            }
        } else if x > self.center {
            if self.shoulder == Shoulder::Right {
                1.0
            } else if x >= self.right_foot {
                0.0
            } else {
                (self.right_foot - x) / (self.right_foot - self.center)
            }
        } else {
            1.0
        }
    }

    fn breakpoints(&self) -> [f64; 3] {
        [self.left_foot, self.center, self.right_foot]
    }
}

/// Degrees of every set at `clamp(x, -1, 1)`, in set order.
pub fn fuzzify(x: f64, sets: &[MembershipFunction]) -> Vec<(Label, f64)> {
    let x = x.clamp(-1.0, 1.0);
    sets.iter().map(|s| (s.label, s.degree(x))).collect()
}

/// Evenly spaced 50 %-overlap partition of `[-1, 1]` with shouldered ends.
pub fn uniform_seven_partition() -> Vec<MembershipFunction> {
    let centers: Vec<f64> = (0..7).map(|i| f64::from(i - 3) / 3.0).collect();
    Label::SEVEN
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let left = centers[i.saturating_sub(1)];
            let right = centers[(i + 1).min(6)];
            let mf = MembershipFunction::triangle(label, left, centers[i], right);
            match i {
                0 => mf.with_shoulder(Shoulder::Left),
                6 => mf.with_shoulder(Shoulder::Right),
                _ => mf,
            }
        })
        .collect()
}

/// Two sign sets centered at +-0.5 that overlap on `(-half_width, half_width)`.
pub fn sign_partition(half_width: f64) -> Vec<MembershipFunction> {
    vec![
        MembershipFunction::triangle(Label::N, -1.0, -0.5, half_width).with_shoulder(Shoulder::Left),
        MembershipFunction::triangle(Label::P, -half_width, 0.5, 1.0).with_shoulder(Shoulder::Right),
    ]
}

/// Largest allowed half-width of the region where N and P both fire.
pub const MAX_SIGN_OVERLAP: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub power_change: Label,
    pub last_action: Label,
    pub output: Label,
}

impl Rule {
    pub fn new(power_change: Label, last_action: Label, output: Label) -> Self {
        Rule {
            power_change,
            last_action,
            output,
        }
    }
}

fn default_rules() -> Vec<Rule> {
    use Label::*;
    let continue_on_n = [NB, NM, NS, ZE, PS, PS, PM];
    let continue_on_p = [PB, PM, PS, ZE, NS, NS, NM];
    let mut rules = Vec::with_capacity(14);
    for (i, &dp) in Label::SEVEN.iter().enumerate() {
        rules.push(Rule::new(dp, N, continue_on_n[i]));
        rules.push(Rule::new(dp, P, continue_on_p[i]));
    }
    rules
}

/// Unvalidated rule-base description, the shape used in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleBaseConfig {
    pub power_change_sets: Vec<MembershipFunction>,
    pub last_action_sets: Vec<MembershipFunction>,
    pub output_sets: Vec<MembershipFunction>,
    pub rules: Vec<Rule>,
}

impl Default for RuleBaseConfig {
    fn default() -> Self {
        RuleBaseConfig {
            power_change_sets: uniform_seven_partition(),
            last_action_sets: sign_partition(0.05),
            output_sets: uniform_seven_partition(),
            rules: default_rules(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyRuleBase {
    power_change_sets: Vec<MembershipFunction>,
    last_action_sets: Vec<MembershipFunction>,
    output_sets: Vec<MembershipFunction>,
    rules: Vec<Rule>,
    /// Center of each rule's consequent, aligned with `rules`.
    consequent_centers: Vec<f64>,
}

impl FuzzyRuleBase {
    pub fn new(cfg: RuleBaseConfig) -> Result<Self> {
        check_sets("fuzzy.power_change_sets", &cfg.power_change_sets, &Label::SEVEN)?;
        check_sets("fuzzy.last_action_sets", &cfg.last_action_sets, &Label::SIGN)?;
        check_sets("fuzzy.output_sets", &cfg.output_sets, &Label::SEVEN)?;
        check_coverage("fuzzy.power_change_sets", &cfg.power_change_sets)?;
        check_coverage("fuzzy.last_action_sets", &cfg.last_action_sets)?;
        check_sign_overlap(&cfg.last_action_sets)?;

        let mut seen = BTreeSet::new();
        for (i, rule) in cfg.rules.iter().enumerate() {
            let key = format!("fuzzy.rules[{i}]");
            if !Label::SEVEN.contains(&rule.power_change) {
                return Err(Error::config(key, format!("{} is not a power-change label", rule.power_change)));
            }
            if !Label::SIGN.contains(&rule.last_action) {
                return Err(Error::config(key, format!("{} is not a last-action label", rule.last_action)));
            }
            if !Label::SEVEN.contains(&rule.output) {
                return Err(Error::config(key, format!("{} is not an output label", rule.output)));
            }
            if !seen.insert((rule.power_change, rule.last_action)) {
                return Err(Error::config(
                    key,
                    format!("duplicate rule for ({}, {})", rule.power_change, rule.last_action),
                ));
            }
        }
        for &dp in &Label::SEVEN {
            for &last in &Label::SIGN {
                if !seen.contains(&(dp, last)) {
                    return Err(Error::config(
                        "fuzzy.rules",
                        format!("rule table is not total: no rule for ({dp}, {last})"),
                    ));
                }
            }
        }

        let consequent_centers = cfg
            .rules
            .iter()
            .map(|r| center_of(&cfg.output_sets, r.output))
            .collect();
        Ok(FuzzyRuleBase {
            power_change_sets: cfg.power_change_sets,
            last_action_sets: cfg.last_action_sets,
            output_sets: cfg.output_sets,
            rules: cfg.rules,
            consequent_centers,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn power_change_sets(&self) -> &[MembershipFunction] {
        &self.power_change_sets
    }

    pub fn last_action_sets(&self) -> &[MembershipFunction] {
        &self.last_action_sets
    }

    pub fn output_sets(&self) -> &[MembershipFunction] {
        &self.output_sets
    }

    /// Firing strength of every rule, in rule order.
    pub fn infer(&self, power_change_pu: f64, last_action_pu: f64) -> Vec<f64> {
        let dp = fuzzify(power_change_pu, &self.power_change_sets);
        let last = fuzzify(last_action_pu, &self.last_action_sets);
        let degree = |degrees: &[(Label, f64)], label: Label| {
            degrees
                .iter()
                .find(|(l, _)| *l == label)
                .map_or(0.0, |&(_, d)| d)
        };
        self.rules
            .iter()
            .map(|r| degree(&dp, r.power_change).min(degree(&last, r.last_action)))
            .collect()
    }

    pub fn defuzzify(&self, strengths: &[f64]) -> Result<f64> {
        height_defuzzify(strengths.iter().copied().zip(self.consequent_centers.iter().copied()))
    }

    /// Normalized excitation step for normalized inputs.
    pub fn evaluate(&self, power_change_pu: f64, last_action_pu: f64) -> Result<f64> {
        self.defuzzify(&self.infer(power_change_pu, last_action_pu))
    }
}

fn center_of(sets: &[MembershipFunction], label: Label) -> f64 {
    sets.iter()
        .find(|s| s.label == label)
        .map(|s| s.center)
        .expect("labels checked on construction")
}

fn check_sets(key: &str, sets: &[MembershipFunction], labels: &[Label]) -> Result<()> {
    for (i, s) in sets.iter().enumerate() {
        s.validate(&format!("{key}[{i}]"))?;
    }
    let have: BTreeSet<Label> = sets.iter().map(|s| s.label).collect();
    let want: BTreeSet<Label> = labels.iter().copied().collect();
    if sets.len() != labels.len() || have != want {
        let names: Vec<String> = labels.iter().map(ToString::to_string).collect();
        return Err(Error::config(
            key,
            format!("expected exactly the sets {}", names.join(", ")),
        ));
    }
    Ok(())
}

/// Every point of `[-1, 1]` must have a set with nonzero degree. The degrees are
/// piecewise linear, so it is enough to look at every breakpoint and at the
/// midpoint of every gap between consecutive breakpoints.
fn check_coverage(key: &str, sets: &[MembershipFunction]) -> Result<()> {
    let mut pts: Vec<f64> = sets
        .iter()
        .flat_map(|s| s.breakpoints())
        .chain([-1.0, 1.0])
        .filter(|x| (-1.0..=1.0).contains(x))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mids: Vec<f64> = pts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    for x in pts.iter().chain(&mids) {
        if sets.iter().all(|s| s.degree(*x) <= 0.0) {
            return Err(Error::config(key, format!("no set covers x = {x}")));
        }
    }
    Ok(())
}

fn check_sign_overlap(sets: &[MembershipFunction]) -> Result<()> {
    let key = "fuzzy.last_action_sets";
    let n = sets.iter().find(|s| s.label == Label::N).expect("checked");
    let p = sets.iter().find(|s| s.label == Label::P).expect("checked");
    if !(n.degree(0.0) > 0.0 && p.degree(0.0) > 0.0) {
        return Err(Error::config(key, "N and P must both fire at zero"));
    }
    if n.shoulder == Shoulder::Right || p.shoulder == Shoulder::Left {
        return Err(Error::config(key, "N may only shoulder left and P only right"));
    }
    if n.right_foot > MAX_SIGN_OVERLAP || p.left_foot < -MAX_SIGN_OVERLAP {
        return Err(Error::config(
            key,
            format!("N and P may only overlap within +-{MAX_SIGN_OVERLAP}"),
        ));
    }
    Ok(())
}

/// Strength-weighted mean of consequent centers, `sum(w c) / sum(w)`.
pub fn height_defuzzify(weighted: impl IntoIterator<Item = (f64, f64)>) -> Result<f64> {
    let (num, den) = weighted
        .into_iter()
        .fold((0.0, 0.0), |(num, den), (w, c)| (num + w * c, den + w));
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::Inference)
    }
}

/// Coefficients of the per-unit base values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingGains {
    /// W s/rad
    pub a: f64,
    /// W
    pub b: f64,
    /// A s/rad
    pub c1: f64,
    /// A/(N m)
    pub c2: f64,
    /// A
    pub c3: f64,
}

impl Default for ScalingGains {
    fn default() -> Self {
        ScalingGains {
            a: 1.8,
            b: 30.0,
            c1: 0.006,
            c2: 0.02,
            c3: 0.72,
        }
    }
}

/// Speed and torque range over which both base values must stay positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingEnvelope {
    pub max_speed: f64,
    pub max_torque: f64,
}

impl ScalingGains {
    /// Checks positivity of both base values at the corners of
    /// `[0, max_speed] x [0, max_torque]`; both are affine, so corners suffice.
    pub fn validate(&self, envelope: &OperatingEnvelope) -> Result<()> {
        let coeffs = [
            ("a", self.a),
            ("b", self.b),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
        ];
        for (name, v) in coeffs {
            if !v.is_finite() {
                return Err(Error::config(format!("fuzzy.gains.{name}"), "must be finite"));
            }
        }
        if !(envelope.max_speed > 0.0 && envelope.max_torque >= 0.0) {
            return Err(Error::config("fuzzy.envelope", "max_speed must be positive and max_torque non-negative"));
        }
        for w in [0.0, envelope.max_speed] {
            if self.input_gain(w).is_err() {
                return Err(Error::config(
                    "fuzzy.gains.b",
                    format!("input gain a*w + b is not positive at w = {w}"),
                ));
            }
            for t in [0.0, envelope.max_torque] {
                if self.output_gain(w, t).is_err() {
                    return Err(Error::config(
                        "fuzzy.gains.c3",
                        format!("output gain c1*w - c2*T + c3 is not positive at w = {w}, T = {t}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Power base value `P_b = a w + b`.
    pub fn input_gain(&self, omega_r: f64) -> Result<f64> {
        let pb = self.a * omega_r + self.b;
        if pb > 0.0 {
            Ok(pb)
        } else {
            Err(Error::config(
                "fuzzy.gains",
                format!("input gain {pb} W is not positive at w = {omega_r} rad/s"),
            ))
        }
    }

    /// Current base value `I_b = c1 w - c2 T + c3`.
    pub fn output_gain(&self, omega_r: f64, torque_estimate: f64) -> Result<f64> {
        let ib = self.c1 * omega_r - self.c2 * torque_estimate + self.c3;
        if ib > 0.0 {
            Ok(ib)
        } else {
            Err(Error::config(
                "fuzzy.gains",
                format!("output gain {ib} A is not positive at w = {omega_r} rad/s, T = {torque_estimate} N m"),
            ))
        }
    }
}

/// Torque estimate from the current commands, `K * i_ds* * i_qs*`.
pub fn estimate_torque(params: &MachineParams, i_ds_cmd: f64, i_qs_cmd: f64) -> f64 {
    params.torque_constant_current() * i_ds_cmd * i_qs_cmd
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyInput {
    /// Change of sampled dc-link power since the previous sample, W.
    pub power_change: f64,
    pub omega_r: f64,
    pub i_ds_cmd: f64,
    pub i_qs_cmd: f64,
    /// Last applied excitation step, A.
    pub last_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyStep {
    /// Requested excitation step, A.
    pub step: f64,
    pub power_base: f64,
    pub current_base: f64,
}

/// Rule base plus the per-unit scaling around it.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyController {
    rules: FuzzyRuleBase,
    gains: ScalingGains,
    torque_constant_current: f64,
}

impl EfficiencyController {
    pub fn new(rules: FuzzyRuleBase, gains: ScalingGains, params: &MachineParams) -> Self {
        EfficiencyController {
            rules,
            gains,
            torque_constant_current: params.torque_constant_current(),
        }
    }

    pub fn rules(&self) -> &FuzzyRuleBase {
        &self.rules
    }

    pub fn gains(&self) -> &ScalingGains {
        &self.gains
    }

    /// Current base value at an operating point, from the torque estimate of
    /// the commands.
    pub fn current_base(&self, omega_r: f64, i_ds_cmd: f64, i_qs_cmd: f64) -> Result<f64> {
        let torque = self.torque_constant_current * i_ds_cmd * i_qs_cmd;
        self.gains.output_gain(omega_r, torque)
    }

    pub fn step(&self, input: &EfficiencyInput) -> Result<EfficiencyStep> {
        let power_base = self.gains.input_gain(input.omega_r)?;
        let current_base = self.current_base(input.omega_r, input.i_ds_cmd, input.i_qs_cmd)?;
        let pu = self
            .rules
            .evaluate(input.power_change / power_base, input.last_step / current_base)?;
        Ok(EfficiencyStep {
            step: current_base * pu,
            power_base,
            current_base,
        })
    }
}
