//! Physical constants and unit conversions.

use serde::{Deserialize, Serialize};

/// Propagation speed used throughout (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Wavelength in meters for a frequency in Hz.
pub fn wavelength(freq_hz: f64) -> f64 {
    SPEED_OF_LIGHT / freq_hz
}

/// Wavenumber 2πf/c in rad/m.
pub fn wavenumber(freq_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * freq_hz / SPEED_OF_LIGHT
}

/// A power level. The dBm value is kept next to the linear value so that
/// configs round-trip exactly; the linear value is computed once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Power {
    dbm: f64,
    watts: f64,
}

impl Power {
    pub fn from_dbm(dbm: f64) -> Self {
        Power { dbm, watts: dbm_to_watts(dbm) }
    }

    pub fn from_watts(watts: f64) -> Self {
        Power { dbm: watts_to_dbm(watts), watts }
    }

    pub fn dbm(&self) -> f64 {
        self.dbm
    }

    pub fn watts(&self) -> f64 {
        self.watts
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1e3).log10()
}

/// Which physical dimension a quantity string carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Frequency,
    Angle,
    Power,
}

impl Dimension {
    fn suffixes(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[("km", 1e3), ("mm", 1e-3), ("cm", 1e-2), ("m", 1.0)],
            Dimension::Frequency => &[("GHz", 1e9), ("MHz", 1e6), ("kHz", 1e3), ("Hz", 1.0)],
            Dimension::Angle => &[("deg", std::f64::consts::PI / 180.0), ("rad", 1.0)],
            // dBm is handled separately; these are linear scales.
            Dimension::Power => &[("dBm", f64::NAN), ("mW", 1e-3), ("W", 1.0)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Length => "length",
            Dimension::Frequency => "frequency",
            Dimension::Angle => "angle",
            Dimension::Power => "power",
        }
    }
}

const ALL_DIMENSIONS: [Dimension; 4] = [Dimension::Power, Dimension::Frequency, Dimension::Angle, Dimension::Length];

/// Split "10 GHz" into the number and its suffix entry for `dim`.
fn split_quantity(text: &str, dim: Dimension) -> std::result::Result<(f64, &'static str, f64), String> {
    let t = text.trim();
    // Longest matching suffix over every dimension, so "dBm" is not read as "m".
    let best = ALL_DIMENSIONS
        .iter()
        .flat_map(|&d| d.suffixes().iter().map(move |&(s, k)| (d, s, k)))
        .filter(|(_, s, _)| t.ends_with(s))
        .max_by_key(|(d, s, _)| (s.len(), *d == dim));
    let (suffix, scale) = match best {
        Some((d, s, k)) if d == dim => (s, k),
        Some((d, _, _)) => return Err(format!("unit mismatch: expected a {}, got a {} ('{t}')", dim.name(), d.name())),
        None => return Err(format!("expected a {} with a unit suffix, got '{t}'", dim.name())),
    };
    let number = t[..t.len() - suffix.len()].trim();
    let v: f64 = number.parse().map_err(|_| format!("'{number}' is not a number"))?;
    if !v.is_finite() {
        return Err(format!("'{t}' is not finite"));
    }
    Ok((v, suffix, scale))
}

macro_rules! quantity {
    ($name:ident, $dim:expr, $unit:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
        pub struct $name(pub f64);

        impl $name {
            pub fn value(self) -> f64 {
                self.0
            }
        }

        impl std::str::FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                let (v, _, scale) = split_quantity(s, $dim)?;
                Ok($name(v * scale))
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{} {}", self.0, $unit)
            }
        }
    };
}

quantity!(Length, Dimension::Length, "m");
quantity!(Frequency, Dimension::Frequency, "Hz");
quantity!(Angle, Dimension::Angle, "rad");

impl std::str::FromStr for Power {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (v, suffix, scale) = split_quantity(s, Dimension::Power)?;
        if suffix == "dBm" {
            Ok(Power::from_dbm(v))
        } else if v > 0.0 {
            Ok(Power::from_watts(v * scale))
        } else {
            Err(format!("linear power must be positive, got '{}'", s.trim()))
        }
    }
}

impl std::fmt::Display for Power {
    /// dBm when that reproduces the stored pair exactly, watts otherwise.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if Power::from_dbm(self.dbm) == *self {
            write!(f, "{} dBm", self.dbm)
        } else {
            write!(f, "{} W", self.watts)
        }
    }
}
