use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Six ordered air quality classes keyed on PM2.5.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AqiClass {
    Good,
    Moderate,
    UnhealthySensitive,
    Unhealthy,
    VeryUnhealthy,
    Severe,
}

impl AqiClass {
    pub const ALL: [AqiClass; 6] = [
        AqiClass::Good,
        AqiClass::Moderate,
        AqiClass::UnhealthySensitive,
        AqiClass::Unhealthy,
        AqiClass::VeryUnhealthy,
        AqiClass::Severe,
    ];

    pub fn key(self) -> &'static str {
        match self {
            AqiClass::Good => "good",
            AqiClass::Moderate => "moderate",
            AqiClass::UnhealthySensitive => "unhealthy_sensitive",
            AqiClass::Unhealthy => "unhealthy",
            AqiClass::VeryUnhealthy => "very_unhealthy",
            AqiClass::Severe => "severe",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AqiClass::Good => "Good",
            AqiClass::Moderate => "Moderate",
            AqiClass::UnhealthySensitive => "Unhealthy for Sensitive Groups",
            AqiClass::Unhealthy => "Unhealthy",
            AqiClass::VeryUnhealthy => "Very Unhealthy",
            AqiClass::Severe => "Severe",
        }
    }
}

impl fmt::Display for AqiClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

const EPA_TABLE: &str = include_str!("../../config/aqi_epa.toml");
const CPCB_TABLE: &str = include_str!("../../config/aqi_cpcb.toml");

/// Inclusive PM2.5 upper bounds for the first five classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AqiTable {
    pub name: String,
    pub good: f64,
    pub moderate: f64,
    pub unhealthy_sensitive: f64,
    pub unhealthy: f64,
    pub very_unhealthy: f64,
}

impl Default for AqiTable {
    fn default() -> Self {
        Self::epa()
    }
}

impl AqiTable {
    pub fn epa() -> Self {
        Self::parse(EPA_TABLE).expect("bundled EPA table is valid")
    }

    pub fn cpcb() -> Self {
        Self::parse(CPCB_TABLE).expect("bundled CPCB table is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: AqiTable = toml::from_str(text).map_err(|e| Error::Rules {
            location: "aqi table".into(),
            reason: e.to_string(),
        })?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn bounds(&self) -> [f64; 5] {
        [
            self.good,
            self.moderate,
            self.unhealthy_sensitive,
            self.unhealthy,
            self.very_unhealthy,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.bounds();
        if b[0] < 0.0
            || b.windows(2)
                .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
            || b.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Rules {
                location: format!("aqi table `{}`", self.name),
                reason: format!(
                    "class bounds must be non-negative and strictly increasing, got {b:?}"
                ),
            });
        }
        Ok(())
    }

    /// Lowest class whose upper bound is at least `pm25`.
    pub fn classify(&self, pm25: f64) -> Result<AqiClass> {
        if pm25.is_nan() || pm25 < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "pm25 must be non-negative, got {pm25}"
            )));
        }
        Ok(self
            .bounds()
            .iter()
            .position(|&bound| pm25 <= bound)
            .map_or(AqiClass::Severe, |i| AqiClass::ALL[i]))
    }

    /// Smallest concentration strictly above which `class` (or worse) applies.
    pub fn lower_bound(&self, class: AqiClass) -> f64 {
        match class {
            AqiClass::Good => 0.0,
            other => self.bounds()[other as usize - 1],
        }
    }
}

/// Classify with the default (EPA) table.
pub fn classify_aqi(pm25: f64) -> Result<AqiClass> {
    AqiTable::epa().classify(pm25)
}
