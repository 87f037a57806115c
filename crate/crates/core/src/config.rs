//! CAMO thresholds, boost parameters and their defaults.
//!
//! Per-class parameters use a two-level lookup: a class-specific override,
//! else the global default. Only minority classes may carry overrides.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassLabel, ClassRegistry};

/// Vote-count triggers of the boost function (`v >= 2`, `v >= 3`). Not configurable.
pub const BOOST_VOTE_TRIGGERS: [usize; 2] = [2, 3];
/// Mean-confidence triggers of the boost function (`p̄ < 0.7`, `p̄ < 0.6`). Not configurable.
pub const BOOST_CONFIDENCE_TRIGGERS: [f64; 2] = [0.7, 0.6];

/// Class-specific presets for the emotion task: (class, base boost, isolated-vote threshold).
pub const EMOTION_PRESETS: [(&str, f64, f64); 2] = [("surprise", 2.5, 0.75), ("love", 1.8, 0.82)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassParam<T> {
    pub default: T,
    #[serde(default = "IndexMap::new", skip_serializing_if = "IndexMap::is_empty")]
    pub per_class: IndexMap<ClassLabel, T>,
}

impl<T: Copy> ClassParam<T> {
    pub fn global(default: T) -> Self {
        ClassParam {
            default,
            per_class: IndexMap::new(),
        }
    }

    pub fn get(&self, class: &str) -> T {
        self.per_class.get(class).copied().unwrap_or(self.default)
    }

    pub fn set(&mut self, class: impl Into<ClassLabel>, value: T) {
        self.per_class.insert(class.into(), value);
    }

    /// Sets the default and every existing override to `value`.
    pub fn set_all(&mut self, value: T) {
        self.default = value;
        self.per_class.values_mut().for_each(|v| *v = value);
    }

    fn materialize(&mut self, registry: &ClassRegistry) {
        for c in registry.minority() {
            let v = self.get(c.as_str());
            self.per_class.insert(c.clone(), v);
        }
    }

    fn values(&self) -> impl Iterator<Item = (Option<&ClassLabel>, T)> + '_ {
        std::iter::once((None, self.default))
            .chain(self.per_class.iter().map(|(k, v)| (Some(k), *v)))
    }
}

/// Every CAMO threshold and boost parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CamoConfig {
    /// Minimum votes for strong minority consensus.
    pub theta1: ClassParam<u32>,
    /// Vote level at which the weaker mean-confidence bar `tau2` applies.
    pub theta2: ClassParam<u32>,
    /// Mean voter confidence bar for consensus.
    pub tau1: ClassParam<f64>,
    pub tau2: ClassParam<f64>,
    /// Max voter confidence bar for consensus.
    pub tau3: ClassParam<f64>,
    /// Isolated-vote confidence bar.
    pub tau4: ClassParam<f64>,
    /// Ensemble mean confidence ceiling for an isolated vote.
    pub tau5: ClassParam<f64>,
    /// Ensemble mean confidence below which the ensemble counts as uncertain.
    pub tau6: f64,
    /// Confidence spread above which the ensemble counts as uncertain.
    pub tau7: f64,
    pub tau8: ClassParam<f64>,
    /// Max voter confidence bar when a minority class ties for the most votes.
    pub tau9: ClassParam<f64>,
    pub beta_base: ClassParam<f64>,
    pub beta_max: f64,
    pub alpha: [f64; 4],
    /// Lets the uncertainty stage select a minority class nobody voted for,
    /// following the `V(c) >= 1 or p̄ < tau8` disjunction literally.
    #[serde(default)]
    pub literal_c4: bool,
}

impl Default for CamoConfig {
    fn default() -> Self {
        CamoConfig {
            theta1: ClassParam::global(2),
            theta2: ClassParam::global(3),
            tau1: ClassParam::global(0.70),
            tau2: ClassParam::global(0.60),
            tau3: ClassParam::global(0.82),
            tau4: ClassParam::global(0.82),
            tau5: ClassParam::global(0.66),
            tau6: 0.66,
            tau7: 0.15,
            tau8: ClassParam::global(0.60),
            tau9: ClassParam::global(0.75),
            beta_base: ClassParam::global(1.5),
            beta_max: 2.5,
            alpha: [0.25; 4],
            literal_c4: false,
        }
    }
}

/// Default configuration for `registry`, including the emotion-task
/// overrides for minority classes named exactly `surprise` or `love`.
pub fn default_config(registry: &ClassRegistry) -> CamoConfig {
    let mut config = CamoConfig::default();
    for class in registry.minority() {
        if let Some(&(_, beta, tau4)) = EMOTION_PRESETS
            .iter()
            .find(|(n, _, _)| *n == class.as_str())
        {
            config.beta_base.set(class.clone(), beta);
            config.tau4.set(class.clone(), tau4);
        }
    }
    config
}

/// Names accepted by [`CamoConfig::set_param`].
pub const PARAM_NAMES: [&str; 17] = [
    "theta1",
    "theta2",
    "tau1",
    "tau2",
    "tau3",
    "tau4",
    "tau5",
    "tau6",
    "tau7",
    "tau8",
    "tau9",
    "beta_base",
    "beta_max",
    "alpha1",
    "alpha2",
    "alpha3",
    "alpha4",
];

impl CamoConfig {
    /// Checks range and ordering invariants against the registry's minority set.
    /// The same configuration with every per-class parameter spelled out
    /// for each minority class, so an echo never depends on presets.
    pub fn explicit(mut self, registry: &ClassRegistry) -> Self {
        self.theta1.materialize(registry);
        self.theta2.materialize(registry);
        self.tau1.materialize(registry);
        self.tau2.materialize(registry);
        self.tau3.materialize(registry);
        self.tau4.materialize(registry);
        self.tau5.materialize(registry);
        self.tau8.materialize(registry);
        self.tau9.materialize(registry);
        self.beta_base.materialize(registry);
        self
    }

    pub fn validate(&self, registry: &ClassRegistry) -> Result<()> {
        let fail = |msg: String| Err(Error::InvariantViolation(msg));

        let overrides_ok = |name: &str, keys: Vec<&ClassLabel>| -> Result<()> {
            for k in keys {
                match registry.index_of(k.as_str()) {
                    Some(i) if registry.is_minority(i) => {}
                    Some(_) => {
                        return Err(Error::InvariantViolation(format!(
                            "{name}: override for majority class '{k}'"
                        )))
                    }
                    None => {
                        return Err(Error::InvariantViolation(format!(
                            "{name}: unknown class '{k}'"
                        )))
                    }
                }
            }
            Ok(())
        };

        let taus = [
            ("tau1", &self.tau1),
            ("tau2", &self.tau2),
            ("tau3", &self.tau3),
            ("tau4", &self.tau4),
            ("tau5", &self.tau5),
            ("tau8", &self.tau8),
            ("tau9", &self.tau9),
        ];
        for (name, p) in taus {
            overrides_ok(name, p.per_class.keys().collect())?;
            for (k, v) in p.values() {
                if !(0.0..=1.0).contains(&v) {
                    return fail(format!("{}: {v} outside [0, 1]", qualified(name, k)));
                }
            }
        }
        for (name, v) in [("tau6", self.tau6), ("tau7", self.tau7)] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name}: {v} outside [0, 1]"));
            }
        }

        overrides_ok("theta1", self.theta1.per_class.keys().collect())?;
        overrides_ok("theta2", self.theta2.per_class.keys().collect())?;
        overrides_ok("beta_base", self.beta_base.per_class.keys().collect())?;

        if !(self.beta_max.is_finite() && self.beta_max >= 1.0) {
            return fail(format!("beta_max: {} must be >= 1", self.beta_max));
        }
        for (i, a) in self.alpha.iter().enumerate() {
            if !(a.is_finite() && *a >= 0.0) {
                return fail(format!("alpha{}: {a} must be >= 0", i + 1));
            }
        }

        let check_class = |label: Option<&ClassLabel>| -> Result<()> {
            let (t1, t2, base) = match label {
                Some(c) => (
                    self.theta1.get(c.as_str()),
                    self.theta2.get(c.as_str()),
                    self.beta_base.get(c.as_str()),
                ),
                None => (
                    self.theta1.default,
                    self.theta2.default,
                    self.beta_base.default,
                ),
            };
            if t1 < 1 || t1 > t2 {
                return Err(Error::InvariantViolation(format!(
                    "{}: need 1 <= theta1 ({t1}) <= theta2 ({t2})",
                    label.map_or("default".to_string(), |c| c.to_string())
                )));
            }
            if !(base.is_finite() && base >= 1.0 && base <= self.beta_max) {
                return Err(Error::InvariantViolation(format!(
                    "{}: need 1 <= beta_base ({base}) <= beta_max ({})",
                    label.map_or("default".to_string(), |c| c.to_string()),
                    self.beta_max
                )));
            }
            Ok(())
        };
        check_class(None)?;
        for c in registry.minority() {
            check_class(Some(c))?;
        }
        Ok(())
    }

    /// Sets one parameter by name. `name` may carry a `.class` suffix to
    /// target one class's override; otherwise the default and every
    /// existing override take the value.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let (base, class) = match name.split_once('.') {
            Some((b, c)) => (b, Some(ClassLabel::from(c))),
            None => (name, None),
        };
        let unknown = || Error::UnknownKey(format!("{name} (valid: {})", PARAM_NAMES.join(", ")));

        fn apply<T: Copy>(p: &mut ClassParam<T>, class: Option<ClassLabel>, v: T) {
            match class {
                Some(c) => p.set(c, v),
                None => p.set_all(v),
            }
        }

        let global = |class: &Option<ClassLabel>| -> Result<()> {
            match class {
                Some(_) => Err(Error::InvariantViolation(format!(
                    "{base} has no per-class values"
                ))),
                None => Ok(()),
            }
        };

        match base {
            "theta1" | "theta2" => {
                if value.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&value) {
                    return Err(Error::InvariantViolation(format!(
                        "{base} must be a non-negative integer, got {value}"
                    )));
                }
                let p = if base == "theta1" {
                    &mut self.theta1
                } else {
                    &mut self.theta2
                };
                apply(p, class, value as u32);
            }
            "tau1" => apply(&mut self.tau1, class, value),
            "tau2" => apply(&mut self.tau2, class, value),
            "tau3" => apply(&mut self.tau3, class, value),
            "tau4" => apply(&mut self.tau4, class, value),
            "tau5" => apply(&mut self.tau5, class, value),
            "tau8" => apply(&mut self.tau8, class, value),
            "tau9" => apply(&mut self.tau9, class, value),
            "beta_base" => apply(&mut self.beta_base, class, value),
            "tau6" => {
                global(&class)?;
                self.tau6 = value;
            }
            "tau7" => {
                global(&class)?;
                self.tau7 = value;
            }
            "beta_max" => {
                global(&class)?;
                self.beta_max = value;
            }
            "alpha1" | "alpha2" | "alpha3" | "alpha4" => {
                global(&class)?;
                let i = base.as_bytes()[5] - b'1';
                self.alpha[i as usize] = value;
            }
            _ => return Err(unknown()),
        }
        Ok(())
    }
}

fn qualified(name: &str, class: Option<&ClassLabel>) -> String {
    match class {
        Some(c) => format!("{name}.{c}"),
        None => name.to_string(),
    }
}

/// A per-class parameter as written in a run config: a bare value sets the
/// default, an object may set the default and individual class overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamOverride<T> {
    Value(T),
    Detailed {
        #[serde(default)]
        default: Option<T>,
        #[serde(default)]
        per_class: IndexMap<ClassLabel, T>,
    },
}

impl<T: Copy> ParamOverride<T> {
    fn apply_to(&self, param: &mut ClassParam<T>) {
        match self {
            ParamOverride::Value(v) => param.default = *v,
            ParamOverride::Detailed { default, per_class } => {
                if let Some(d) = default {
                    param.default = *d;
                }
                for (k, v) in per_class {
                    param.per_class.insert(k.clone(), *v);
                }
            }
        }
    }
}

/// Partial CAMO configuration; absent fields keep their [`default_config`] values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CamoOverrides {
    pub theta1: Option<ParamOverride<u32>>,
    pub theta2: Option<ParamOverride<u32>>,
    pub tau1: Option<ParamOverride<f64>>,
    pub tau2: Option<ParamOverride<f64>>,
    pub tau3: Option<ParamOverride<f64>>,
    pub tau4: Option<ParamOverride<f64>>,
    pub tau5: Option<ParamOverride<f64>>,
    pub tau6: Option<f64>,
    pub tau7: Option<f64>,
    pub tau8: Option<ParamOverride<f64>>,
    pub tau9: Option<ParamOverride<f64>>,
    pub beta_base: Option<ParamOverride<f64>>,
    pub beta_max: Option<f64>,
    pub alpha: Option<[f64; 4]>,
    pub literal_c4: Option<bool>,
}

impl CamoOverrides {
    pub fn apply(&self, mut config: CamoConfig) -> CamoConfig {
        macro_rules! per_class {
            ($($f:ident),*) => {$(
                if let Some(o) = &self.$f { o.apply_to(&mut config.$f); }
            )*};
        }
        macro_rules! scalar {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f { config.$f = v; }
            )*};
        }
        per_class!(theta1, theta2, tau1, tau2, tau3, tau4, tau5, tau8, tau9, beta_base);
        scalar!(tau6, tau7, beta_max, alpha, literal_c4);
        config
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bea() -> ClassRegistry {
        ClassRegistry::new(["Yes", "No", "To some extent"], ["To some extent"], None).unwrap()
    }

    fn emotion() -> ClassRegistry {
        ClassRegistry::new(
            ["sadness", "joy", "love", "anger", "fear", "surprise"],
            ["surprise", "love"],
            None,
        )
        .unwrap()
    }

    #[test]
    fn bea_defaults() {
        let c = default_config(&bea());
        assert_eq!(c.theta1.get("To some extent"), 2);
        assert_eq!(c.tau4.get("To some extent"), 0.82);
        assert_eq!(c.tau3.get("To some extent"), 0.82);
        assert_eq!(c.tau5.get("To some extent"), 0.66);
        assert_eq!(c.tau6, 0.66);
        assert_eq!(c.beta_max, 2.5);
        assert_eq!(c.beta_base.get("To some extent"), 1.5);
        c.validate(&bea()).unwrap();
    }

    #[test]
    fn emotion_presets() {
        let c = default_config(&emotion());
        assert_eq!(c.beta_base.get("surprise"), 2.5);
        assert_eq!(c.beta_base.get("love"), 1.8);
        assert_eq!(c.tau4.get("surprise"), 0.75);
        assert_eq!(c.tau4.get("love"), 0.82);
        assert_eq!(c.tau6, 0.66);
        c.validate(&emotion()).unwrap();
    }

    #[test]
    fn presets_need_exact_names() {
        let r = ClassRegistry::new(["joy", "Surprise"], ["Surprise"], None).unwrap();
        let c = default_config(&r);
        assert!(c.beta_base.per_class.is_empty());
    }

    #[test]
    fn max_boost_from_default_base_reaches_cap() {
        let c = CamoConfig::default();
        assert_eq!(
            c.beta_base.default + c.alpha.iter().sum::<f64>(),
            c.beta_max
        );
    }

    #[test]
    fn invariant_violations() {
        let r = bea();
        let mut c = default_config(&r);
        c.tau6 = 1.5;
        assert!(matches!(c.validate(&r), Err(Error::InvariantViolation(_))));

        let mut c = default_config(&r);
        c.theta1.set("To some extent", 4);
        assert!(c.validate(&r).is_err());

        let mut c = default_config(&r);
        c.beta_base.set("To some extent", 3.0);
        assert!(c.validate(&r).is_err());

        let mut c = default_config(&r);
        c.tau1.set("Yes", 0.5);
        assert!(c.validate(&r).is_err());

        let mut c = default_config(&r);
        c.alpha[2] = -0.1;
        assert!(c.validate(&r).is_err());
    }

    #[test]
    fn set_param_by_name() {
        let r = emotion();
        let mut c = default_config(&r);
        c.set_param("tau4", 0.9).unwrap();
        assert_eq!(c.tau4.get("surprise"), 0.9);
        c.set_param("beta_base.love", 2.0).unwrap();
        assert_eq!(c.beta_base.get("love"), 2.0);
        assert_eq!(c.beta_base.get("surprise"), 2.5);
        c.set_param("alpha3", 0.1).unwrap();
        assert_eq!(c.alpha, [0.25, 0.25, 0.1, 0.25]);
        assert!(matches!(
            c.set_param("tau10", 0.1),
            Err(Error::UnknownKey(_))
        ));
        assert!(c.set_param("theta1", 2.5).is_err());
        assert!(c.set_param("tau6.love", 0.5).is_err());
    }

    #[test]
    fn overrides_merge_onto_defaults() {
        let r = emotion();
        let o: CamoOverrides = serde_json::from_str(
            r#"{"beta_base": {"per_class": {"love": 2.0}}, "tau1": 0.8, "tau6": 0.5}"#,
        )
        .unwrap();
        let c = o.apply(default_config(&r));
        assert_eq!(c.beta_base.get("love"), 2.0);
        assert_eq!(c.beta_base.get("surprise"), 2.5);
        assert_eq!(c.tau1.default, 0.8);
        assert_eq!(c.tau6, 0.5);
        assert!(serde_json::from_str::<CamoOverrides>(r#"{"tau10": 0.5}"#).is_err());
    }

    #[test]
    fn config_round_trips() {
        let c = default_config(&emotion());
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<CamoConfig>(&s).unwrap(), c);
    }
}
