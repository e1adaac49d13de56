//! Session-relative time.
//!
//! All session timestamps and spans are measured from session start. They are
//! stored as whole milliseconds so that sums of stage spans telescope exactly
//! to the session duration, and they travel over the wire and on disk as
//! fractional seconds.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A session-relative instant or span with millisecond resolution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Seconds(u64);

impl Seconds {
    pub const ZERO: Seconds = Seconds(0);

    pub const fn from_millis(ms: u64) -> Self {
        Seconds(ms)
    }

    pub const fn from_secs(secs: u64) -> Self {
        Seconds(secs * 1000)
    }

    /// Rounds to the nearest millisecond. Rejects negative, NaN and
    /// out-of-range values.
    pub fn try_from_secs_f64(secs: f64) -> Option<Self> {
        if !secs.is_finite() || !(0.0..=1.0e12).contains(&secs) {
            return None;
        }
        Some(Seconds((secs * 1000.0).round() as u64))
    }

    /// Panics on invalid input; use in tests and for literals.
    pub fn from_secs_f64(secs: f64) -> Self {
        Self::try_from_secs_f64(secs).unwrap_or_else(|| panic!("invalid session time {secs}"))
    }

    pub const fn as_millis(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn saturating_sub(self, other: Seconds) -> Seconds {
        Seconds(self.0.saturating_sub(other.0))
    }

    pub fn checked_sub(self, other: Seconds) -> Option<Seconds> {
        self.0.checked_sub(other.0).map(Seconds)
    }

    /// Integer midpoint, used for half splits.
    pub fn half(self) -> Seconds {
        Seconds(self.0 / 2)
    }
}

impl Add for Seconds {
    type Output = Seconds;
    fn add(self, rhs: Seconds) -> Seconds {
        Seconds(self.0 + rhs.0)
    }
}

impl Sub for Seconds {
    type Output = Seconds;
    fn sub(self, rhs: Seconds) -> Seconds {
        Seconds(
            self.0
                .checked_sub(rhs.0)
                .expect("session time subtraction underflow"),
        )
    }
}

impl Sum for Seconds {
    fn sum<I: Iterator<Item = Seconds>>(iter: I) -> Seconds {
        Seconds(iter.map(|s| s.0).sum())
    }
}

impl fmt::Display for Seconds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1000, self.0 % 1000)
    }
}

impl Serialize for Seconds {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_secs_f64())
    }
}

impl<'de> Deserialize<'de> for Seconds {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let secs = f64::deserialize(deserializer)?;
        Seconds::try_from_secs_f64(secs)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid session time {secs}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_millis() {
        assert_eq!(Seconds::from_secs_f64(29.9).as_millis(), 29_900);
        assert_eq!(Seconds::from_secs_f64(0.0004).as_millis(), 0);
        assert!(Seconds::try_from_secs_f64(-1.0).is_none());
        assert!(Seconds::try_from_secs_f64(f64::NAN).is_none());
    }

    #[test]
    fn serde_uses_fractional_seconds() {
        let s = Seconds::from_millis(12_345);
        assert_eq!(serde_json::to_string(&s).unwrap(), "12.345");
        let back: Seconds = serde_json::from_str("12.345").unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<Seconds>("-3").is_err());
    }

    #[test]
    fn display_is_fixed_point() {
        assert_eq!(Seconds::from_millis(100_050).to_string(), "100.050");
    }
}
