//! Suitability verdicts from predicted levels and declared symptoms.
//!
//! The rules are configurable policy loaded from TOML, not medical guidance.
//! General-population rules keyed on the PM2.5 class always apply; each
//! declared symptom adds its own threshold rules. The verdict is the most
//! severe outcome over every fired rule.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{AqiClass, AqiTable, Parameter, PollutantVector};
use crate::error::{Error, Result};

pub const DEFAULT_RULES: &str = include_str!("../config/default_rules.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symptom {
    Asthma,
    Copd,
    HeartCondition,
    Pregnancy,
    Child,
    Elderly,
    EyeIrritation,
    Allergy,
}

/// The token that stands for an empty profile.
pub const NO_SYMPTOMS: &str = "none";

impl Symptom {
    pub const ALL: [Symptom; 8] = [
        Symptom::Asthma,
        Symptom::Copd,
        Symptom::HeartCondition,
        Symptom::Pregnancy,
        Symptom::Child,
        Symptom::Elderly,
        Symptom::EyeIrritation,
        Symptom::Allergy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Symptom::Asthma => "asthma",
            Symptom::Copd => "copd",
            Symptom::HeartCondition => "heart-condition",
            Symptom::Pregnancy => "pregnancy",
            Symptom::Child => "child",
            Symptom::Elderly => "elderly",
            Symptom::EyeIrritation => "eye-irritation",
            Symptom::Allergy => "allergy",
        }
    }

    /// Every accepted token, including `none`.
    pub fn vocabulary() -> Vec<&'static str> {
        Symptom::ALL
            .iter()
            .map(|s| s.name())
            .chain([NO_SYMPTOMS])
            .collect()
    }
}

impl fmt::Display for Symptom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Symptom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Symptom::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::UnknownSymptom(s.to_owned()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymptomProfile {
    symptoms: BTreeSet<Symptom>,
}

impl SymptomProfile {
    pub fn new(symptoms: impl IntoIterator<Item = Symptom>) -> Self {
        Self {
            symptoms: symptoms.into_iter().collect(),
        }
    }

    /// Parses a comma-separated list. `none` contributes nothing, blank
    /// input is the empty profile, and the first unknown token is an error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut symptoms = BTreeSet::new();
        for token in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            if token == NO_SYMPTOMS {
                continue;
            }
            symptoms.insert(token.parse()?);
        }
        Ok(Self { symptoms })
    }

    pub fn symptoms(&self) -> &BTreeSet<Symptom> {
        &self.symptoms
    }

    pub fn is_empty(&self) -> bool {
        self.symptoms.is_empty()
    }

    pub fn with(mut self, symptom: Symptom) -> Self {
        self.symptoms.insert(symptom);
        self
    }
}

impl fmt::Display for SymptomProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.symptoms.is_empty() {
            return f.write_str(NO_SYMPTOMS);
        }
        let names: Vec<&str> = self.symptoms.iter().map(|s| s.name()).collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Suitable,
    Caution,
    Unsuitable,
}

impl Verdict {
    pub fn key(self) -> &'static str {
        match self {
            Verdict::Suitable => "suitable",
            Verdict::Caution => "caution",
            Verdict::Unsuitable => "unsuitable",
        }
    }

    /// Localisation key resolved by the UI.
    pub fn advisory_key(self) -> String {
        format!("advisory.{}", self.key())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub pollutant: Parameter,
    pub caution: f64,
    pub unsuitable: f64,
}

/// Class bands at which the general-population rules fire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralRule {
    pub caution_from: AqiClass,
    pub unsuitable_from: AqiClass,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuleTable {
    pub version: u32,
    pub policy: String,
    pub general: GeneralRule,
    pub symptoms: BTreeMap<Symptom, Vec<Rule>>,
    pub aqi: AqiTable,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    version: u32,
    #[serde(default)]
    policy: String,
    general: GeneralRule,
    #[serde(default)]
    symptoms: BTreeMap<String, RawSymptom>,
    aqi: Option<AqiTable>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSymptom {
    rules: Vec<RawRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    pollutant: String,
    caution: f64,
    unsuitable: f64,
}

fn rules_error(location: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Rules {
        location: location.into(),
        reason: reason.into(),
    }
}

impl RuleTable {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawTable = toml::from_str(text).map_err(|e| {
            let location = e
                .span()
                .map(|s| {
                    let line = text[..s.start].lines().count().max(1);
                    format!("line {line}")
                })
                .unwrap_or_else(|| "document".to_owned());
            rules_error(location, e.message().to_owned())
        })?;
        if raw.version != 1 {
            return Err(rules_error(
                "version",
                format!("unsupported rules version {}", raw.version),
            ));
        }
        if raw.general.caution_from > raw.general.unsuitable_from {
            return Err(rules_error(
                "general",
                "caution_from must not be a worse class than unsuitable_from",
            ));
        }
        let aqi = raw.aqi.unwrap_or_else(AqiTable::epa);
        aqi.validate()?;
        let mut symptoms = BTreeMap::new();
        for (name, section) in raw.symptoms {
            let symptom: Symptom = name.parse().map_err(|_| {
                rules_error(
                    format!("symptoms.{name}"),
                    format!("unknown symptom `{name}`"),
                )
            })?;
            let mut rules = Vec::with_capacity(section.rules.len());
            for (i, r) in section.rules.into_iter().enumerate() {
                let location = format!("symptoms.{name}.rules[{i}]");
                let pollutant: Parameter = r.pollutant.parse().map_err(|_| {
                    rules_error(&location, format!("unknown pollutant `{}`", r.pollutant))
                })?;
                if !(r.caution.is_finite() && r.unsuitable.is_finite() && r.caution >= 0.0) {
                    return Err(rules_error(
                        &location,
                        "thresholds must be finite and non-negative",
                    ));
                }
                if r.caution >= r.unsuitable {
                    return Err(rules_error(
                        &location,
                        format!(
                            "caution threshold {} must be below unsuitable threshold {}",
                            r.caution, r.unsuitable
                        ),
                    ));
                }
                rules.push(Rule {
                    pollutant,
                    caution: r.caution,
                    unsuitable: r.unsuitable,
                });
            }
            symptoms.insert(symptom, rules);
        }
        Ok(Self {
            version: raw.version,
            policy: raw.policy,
            general: raw.general,
            symptoms,
            aqi,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Rules { location, reason } => Error::Rules {
                location: format!("{}: {location}", path.display()),
                reason,
            },
            other => other,
        })
    }

    /// The shipped example policy.
    pub fn default_policy() -> Self {
        Self::parse(DEFAULT_RULES).expect("shipped rules are valid")
    }
}

pub fn load_rules(path: &Path) -> Result<RuleTable> {
    RuleTable::load(path)
}

/// Where a fired rule came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "symptom")]
pub enum RuleSource {
    General,
    Symptom(Symptom),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriggeredRule {
    pub source: RuleSource,
    pub pollutant: Parameter,
    pub value: f64,
    /// The value was strictly above this threshold.
    pub threshold: f64,
    pub severity: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub verdict: Verdict,
    pub triggered: Vec<TriggeredRule>,
    pub aqi_class: AqiClass,
    pub advisory: String,
}

/// Class for a possibly out-of-range prediction: negative values count as
/// zero and non-finite values as the worst class.
fn prediction_class(table: &AqiTable, pm25: f64) -> AqiClass {
    if !pm25.is_finite() {
        return AqiClass::Severe;
    }
    table.classify(pm25.max(0.0)).unwrap_or(AqiClass::Severe)
}

fn fire(value: f64, caution: f64, unsuitable: f64) -> Option<(Verdict, f64)> {
    if value > unsuitable || value.is_nan() {
        Some((Verdict::Unsuitable, unsuitable))
    } else if value > caution {
        Some((Verdict::Caution, caution))
    } else {
        None
    }
}

pub fn recommend(
    prediction: &PollutantVector,
    profile: &SymptomProfile,
    rules: &RuleTable,
) -> Recommendation {
    let pm25 = prediction.pm25;
    let aqi_class = prediction_class(&rules.aqi, pm25);
    let mut triggered = Vec::new();

    let general = &rules.general;
    let general_severity = if aqi_class >= general.unsuitable_from {
        Some((Verdict::Unsuitable, general.unsuitable_from))
    } else if aqi_class >= general.caution_from {
        Some((Verdict::Caution, general.caution_from))
    } else {
        None
    };
    if let Some((severity, class)) = general_severity {
        triggered.push(TriggeredRule {
            source: RuleSource::General,
            pollutant: Parameter::Pm25,
            value: pm25,
            threshold: rules.aqi.lower_bound(class),
            severity,
        });
    }

    for symptom in profile.symptoms() {
        for rule in rules.symptoms.get(symptom).into_iter().flatten() {
            let value = prediction.get(rule.pollutant);
            if let Some((severity, threshold)) = fire(value, rule.caution, rule.unsuitable) {
                triggered.push(TriggeredRule {
                    source: RuleSource::Symptom(*symptom),
                    pollutant: rule.pollutant,
                    value,
                    threshold,
                    severity,
                });
            }
        }
    }

    let verdict = triggered
        .iter()
        .map(|t| t.severity)
        .max()
        .unwrap_or(Verdict::Suitable);
    Recommendation {
        verdict,
        triggered,
        aqi_class,
        advisory: verdict.advisory_key(),
    }
}
