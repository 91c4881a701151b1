use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The seven regression targets, in model output order. The first two are
/// the pollutant head, the remaining five the second head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    Pm25,
    Pm10,
    So2,
    O3,
    No2,
    Co,
    Aqi,
}

pub const PARAMETER_COUNT: usize = 7;
pub const POLLUTANT_HEAD: usize = 2;
pub const REMAINING_HEAD: usize = 5;

impl Parameter {
    pub const ALL: [Parameter; PARAMETER_COUNT] = [
        Parameter::Pm25,
        Parameter::Pm10,
        Parameter::So2,
        Parameter::O3,
        Parameter::No2,
        Parameter::Co,
        Parameter::Aqi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::Pm25 => "pm25",
            Parameter::Pm10 => "pm10",
            Parameter::So2 => "so2",
            Parameter::O3 => "o3",
            Parameter::No2 => "no2",
            Parameter::Co => "co",
            Parameter::Aqi => "aqi",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Parameter::Co => "mg/m³",
            Parameter::Aqi => "index",
            _ => "µg/m³",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Parameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown pollutant `{s}`")))
    }
}

/// Measured or predicted levels, in native units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PollutantVector {
    pub pm25: f64,
    pub pm10: f64,
    pub so2: f64,
    pub o3: f64,
    pub no2: f64,
    pub co: f64,
    pub aqi: f64,
}

impl PollutantVector {
    pub fn from_array(v: [f64; PARAMETER_COUNT]) -> Self {
        let [pm25, pm10, so2, o3, no2, co, aqi] = v;
        Self {
            pm25,
            pm10,
            so2,
            o3,
            no2,
            co,
            aqi,
        }
    }

    pub fn to_array(&self) -> [f64; PARAMETER_COUNT] {
        [
            self.pm25, self.pm10, self.so2, self.o3, self.no2, self.co, self.aqi,
        ]
    }

    pub fn get(&self, parameter: Parameter) -> f64 {
        self.to_array()[parameter.index()]
    }

    pub fn set(&mut self, parameter: Parameter, value: f64) {
        let mut values = self.to_array();
        values[parameter.index()] = value;
        *self = Self::from_array(values);
    }

    pub fn validate(&self) -> Result<()> {
        for p in Parameter::ALL {
            let v = self.get(p);
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{p} must be a non-negative finite value, got {v}"
                )));
            }
        }
        Ok(())
    }
}
