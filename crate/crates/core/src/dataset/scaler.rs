use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pollutant::{Parameter, PollutantVector, PARAMETER_COUNT};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

/// Per-parameter min-max scaling fitted on the training split.
///
/// Values outside the fitted range map outside `[0, 1]`; nothing is
/// clamped, so `unscale` stays the exact inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelScaler {
    ranges: [Range; PARAMETER_COUNT],
}

impl LabelScaler {
    pub fn fit<'a>(labels: impl IntoIterator<Item = &'a PollutantVector>) -> Result<Self> {
        let mut ranges = [Range {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }; PARAMETER_COUNT];
        let mut seen = 0usize;
        for label in labels {
            seen += 1;
            for (range, v) in ranges.iter_mut().zip(label.to_array()) {
                range.min = range.min.min(v);
                range.max = range.max.max(v);
            }
        }
        if seen == 0 {
            return Err(Error::Empty("scaler needs at least one training label"));
        }
        Self::from_ranges(ranges)
    }

    pub fn from_ranges(ranges: [Range; PARAMETER_COUNT]) -> Result<Self> {
        for (p, r) in Parameter::ALL.into_iter().zip(&ranges) {
            if !(r.min.is_finite() && r.max.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{p} range must be finite, got [{}, {}]",
                    r.min, r.max
                )));
            }
            if r.max <= r.min {
                return Err(Error::DegenerateParameter {
                    parameter: p.name(),
                    value: r.min,
                });
            }
        }
        Ok(Self { ranges })
    }

    pub fn range(&self, parameter: Parameter) -> Range {
        self.ranges[parameter.index()]
    }

    pub fn ranges(&self) -> &[Range; PARAMETER_COUNT] {
        &self.ranges
    }

    pub fn scale(&self, v: &PollutantVector) -> [f64; PARAMETER_COUNT] {
        let mut out = v.to_array();
        for (x, r) in out.iter_mut().zip(&self.ranges) {
            *x = (*x - r.min) / (r.max - r.min);
        }
        out
    }

    pub fn unscale(&self, scaled: &[f64; PARAMETER_COUNT]) -> PollutantVector {
        let mut out = *scaled;
        for (x, r) in out.iter_mut().zip(&self.ranges) {
            *x = *x * (r.max - r.min) + r.min;
        }
        PollutantVector::from_array(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl Serialize for LabelScaler {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<&str, Range> = Parameter::ALL
            .into_iter()
            .map(|p| (p.name(), self.range(p)))
            .collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LabelScaler {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let map = BTreeMap::<String, Range>::deserialize(deserializer)?;
        for key in map.keys() {
            key.parse::<Parameter>().map_err(D::Error::custom)?;
        }
        let mut ranges = [Range { min: 0.0, max: 1.0 }; PARAMETER_COUNT];
        for p in Parameter::ALL {
            ranges[p.index()] = *map
                .get(p.name())
                .ok_or_else(|| D::Error::custom(format!("missing range for `{p}`")))?;
        }
        LabelScaler::from_ranges(ranges).map_err(D::Error::custom)
    }
}
