use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{default_config, CamoConfig, CamoOverrides, ParamOverride};
use crate::error::{Error, Result};
use crate::metrics::LenientMap;
use crate::model::{ClassRegistry, RegistryDoc};
use crate::strategies::{StrategyId, StrategySpec};

/// A strategy entry: a bare id or an object with parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum StrategyEntry {
    Id(StrategyId),
    Spec(StrategySpec),
}

impl<'de> Deserialize<'de> for StrategyEntry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) => {
                s.parse().map(StrategyEntry::Id).map_err(D::Error::custom)
            }
            v @ serde_json::Value::Object(_) => serde_json::from_value(v)
                .map(StrategyEntry::Spec)
                .map_err(D::Error::custom),
            other => Err(D::Error::custom(format!(
                "strategy entry must be a string or object, got {other}"
            ))),
        }
    }
}

impl StrategyEntry {
    fn into_spec(self) -> StrategySpec {
        match self {
            StrategyEntry::Id(id) => StrategySpec::new(id),
            StrategyEntry::Spec(s) => s,
        }
    }
}

/// The run configuration document as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub registry: RegistryDoc,
    #[serde(default)]
    pub camo: CamoOverrides,
    #[serde(default)]
    pub strategies: Vec<StrategyEntry>,
    #[serde(default)]
    pub lenient_map: Option<LenientMap>,
    #[serde(default)]
    pub seed: u64,
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub registry: ClassRegistry,
    pub camo: CamoConfig,
    pub strategies: Vec<StrategySpec>,
    pub lenient_map: LenientMap,
    pub seed: u64,
}

impl RunConfig {
    /// Resolves a config document: defaults fill absent CAMO fields (and
    /// per-class values are spelled out for every minority class), the
    /// strategy list defaults to `camo` alone, the lenient map to
    /// [`LenientMap::default_for`].
    pub fn resolve(doc: RunConfigFile) -> Result<Self> {
        let registry = ClassRegistry::try_from(doc.registry)?;
        let camo = doc
            .camo
            .apply(default_config(&registry))
            .explicit(&registry);
        camo.validate(&registry)?;
        let mut strategies: Vec<StrategySpec> = doc
            .strategies
            .into_iter()
            .map(StrategyEntry::into_spec)
            .collect();
        if strategies.is_empty() {
            strategies.push(StrategySpec::new(StrategyId::Camo));
        }
        for s in &strategies {
            s.validate()?;
        }
        let lenient_map = doc
            .lenient_map
            .unwrap_or_else(|| LenientMap::default_for(&registry));
        lenient_map.validate(&registry)?;
        Ok(RunConfig {
            registry,
            camo,
            strategies,
            lenient_map,
            seed: doc.seed,
        })
    }

    /// The resolved configuration as a document that resolves back to `self`.
    pub fn to_doc(&self) -> RunConfigFile {
        fn full<T: Copy>(p: &crate::config::ClassParam<T>) -> Option<ParamOverride<T>> {
            Some(ParamOverride::Detailed {
                default: Some(p.default),
                per_class: p.per_class.clone(),
            })
        }
        let c = &self.camo;
        RunConfigFile {
            registry: self.registry.to_doc(),
            camo: CamoOverrides {
                theta1: full(&c.theta1),
                theta2: full(&c.theta2),
                tau1: full(&c.tau1),
                tau2: full(&c.tau2),
                tau3: full(&c.tau3),
                tau4: full(&c.tau4),
                tau5: full(&c.tau5),
                tau6: Some(c.tau6),
                tau7: Some(c.tau7),
                tau8: full(&c.tau8),
                tau9: full(&c.tau9),
                beta_base: full(&c.beta_base),
                beta_max: Some(c.beta_max),
                alpha: Some(c.alpha),
                literal_c4: Some(c.literal_c4),
            },
            strategies: self
                .strategies
                .iter()
                .cloned()
                .map(StrategyEntry::Spec)
                .collect(),
            lenient_map: Some(self.lenient_map.clone()),
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("config serializes")
    }
}

fn json_error(e: serde_json::Error) -> Error {
    let message = e.to_string();
    if ["unknown field", "unknown variant", "unknown key"]
        .iter()
        .any(|p| message.starts_with(p))
    {
        Error::UnknownKey(message)
    } else {
        Error::Parse {
            line: e.line(),
            message,
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc: RunConfigFile = serde_json::from_str(text).map_err(json_error)?;
    RunConfig::resolve(doc)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Parses a standalone JSON document of a `serde` type, mapping errors like configs.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(json_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"registry": {"classes": ["Yes", "No", "To some extent"], "minority": ["To some extent"]}}"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.camo, default_config(&c.registry).explicit(&c.registry));
        assert_eq!(c.strategies, vec![StrategySpec::new(StrategyId::Camo)]);
        assert_eq!(
            c.lenient_map.apply(&"To some extent".into()).as_str(),
            "Yes"
        );
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn class_specific_boost() {
        let c = parse_config(
            r#"{"registry": {"classes": ["joy", "love", "surprise"], "minority": ["love", "surprise"]},
                "camo": {"beta_base": {"per_class": {"surprise": 2.5}}},
                "strategies": ["camo", {"id": "dynamic_threshold", "margin": 0.2}],
                "seed": 7}"#,
        )
        .unwrap();
        assert_eq!(c.camo.beta_base.get("surprise"), 2.5);
        assert_eq!(c.strategies[1].margin(), 0.2);
        let engine = crate::engine::CamoEngine::new(c.registry.clone(), c.camo.clone()).unwrap();
        assert_eq!(engine.boost("surprise", 0, 0.99).unwrap(), 2.5);
    }

    #[test]
    fn out_of_range_threshold() {
        let text = MINIMAL.replace("}}", r#"}, "camo": {"tau6": 1.5}}"#);
        assert!(matches!(
            parse_config(&text),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("}}", r#"}, "camo": {"tau_6": 0.5}}"#);
        assert!(matches!(parse_config(&text), Err(Error::UnknownKey(_))));
        let text = MINIMAL.replace("}}", r#"}, "sede": 3}"#);
        assert!(matches!(parse_config(&text), Err(Error::UnknownKey(_))));
    }

    #[test]
    fn bad_registry_and_syntax() {
        assert!(matches!(
            parse_config(r#"{"registry": {"classes": ["A"]}}"#),
            Err(Error::InvalidRegistry(_))
        ));
        assert!(matches!(
            parse_config("{\n\"registry\": "),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn echo_resolves_to_itself() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.camo.set_param("tau4", 0.9).unwrap();
        let back = parse_config(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }
}
