//! Physical quantities with optional unit suffixes.
//!
//! Configuration files accept either a bare number, which is taken to be in
//! SI base units, or a string such as `"40 µm"`, `"220nm"`, `"7.1 uA"` or
//! `"100 ms"`. Everything is normalized to SI on the way in and serialized
//! back out as a plain SI number.

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("cannot parse {input:?} as a quantity in {unit}: {reason}")]
pub struct UnitError {
    pub input: String,
    pub unit: &'static str,
    pub reason: String,
}

/// Parses `input` as a value in `unit` (`"m"`, `"A"`, `"V"`, `"s"`, `"W"`,
/// `"Hz"`), honoring the usual SI prefixes from pico to giga.
pub fn parse_quantity(input: &str, unit: &'static str) -> Result<f64, UnitError> {
    let err = |reason: &str| UnitError {
        input: input.to_string(),
        unit,
        reason: reason.to_string(),
    };
    let trimmed = input.trim();
    let split = trimmed
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E') && exponent_follows(&trimmed[i..])))
        })
        .map(|(i, _)| i)
        .unwrap_or(trimmed.len());
    let (number, suffix) = trimmed.split_at(split);
    let value: f64 = number.trim().parse().map_err(|_| err("bad number"))?;
    if !value.is_finite() {
        return Err(err("value is not finite"));
    }
    let suffix = suffix.trim();
    if suffix.is_empty() {
        return Ok(value);
    }
    let prefix = suffix
        .strip_suffix(unit)
        .ok_or_else(|| err("unexpected unit suffix"))?;
    // divide by exact powers of ten so "40 um" is the double nearest 4e-5
    let (factor, divide) = match prefix {
        "" => (1.0, false),
        "p" => (1e12, true),
        "n" => (1e9, true),
        "u" | "µ" | "μ" => (1e6, true),
        "m" => (1e3, true),
        "k" => (1e3, false),
        "M" => (1e6, false),
        "G" => (1e9, false),
        _ => return Err(err("unknown SI prefix")),
    };
    Ok(if divide { value / factor } else { value * factor })
}

fn exponent_follows(rest: &str) -> bool {
    let mut chars = rest.chars().skip(1);
    match chars.next() {
        Some(c) if c.is_ascii_digit() => true,
        Some('+') | Some('-') => chars.next().is_some_and(|c| c.is_ascii_digit()),
        _ => false,
    }
}

macro_rules! quantity {
    ($(#[$doc:meta])* $name:ident, $unit:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
        pub struct $name(pub f64);

        impl $name {
            pub const UNIT: &'static str = $unit;

            pub fn parse(input: &str) -> Result<Self, UnitError> {
                parse_quantity(input, $unit).map($name)
            }

            pub fn get(self) -> f64 {
                self.0
            }
        }

        impl From<f64> for $name {
            fn from(v: f64) -> Self {
                $name(v)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{} {}", self.0, $unit)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_f64(self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                #[derive(Deserialize)]
                #[serde(untagged)]
                enum Raw {
                    Number(f64),
                    Text(String),
                }
                match Raw::deserialize(d)? {
                    Raw::Number(v) if v.is_finite() => Ok($name(v)),
                    Raw::Number(_) => Err(de::Error::custom("non-finite quantity")),
                    Raw::Text(s) => $name::parse(&s).map_err(de::Error::custom),
                }
            }
        }
    };
}

quantity!(
    /// Length in meters.
    Meters,
    "m"
);
quantity!(
    /// Current in amperes.
    Amperes,
    "A"
);
quantity!(
    /// Voltage in volts.
    Volts,
    "V"
);
quantity!(
    /// Time in seconds.
    Seconds,
    "s"
);
quantity!(
    /// Optical power in watts.
    Watts,
    "W"
);
quantity!(
    /// Rate in hertz.
    Hertz,
    "Hz"
);
