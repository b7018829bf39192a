//! Time units and durations.
//!
//! Every duration in the crate is stored as an integer number of
//! milliseconds, so unit conversions between second/minute/hour/day/year are
//! exact and simulation timers count down without floating-point drift.
//! A year is fixed at 8760 hours.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MS_PER_SECOND: i64 = 1_000;
pub const MS_PER_MINUTE: i64 = 60 * MS_PER_SECOND;
pub const MS_PER_HOUR: i64 = 60 * MS_PER_MINUTE;
pub const MS_PER_DAY: i64 = 24 * MS_PER_HOUR;
pub const HOURS_PER_YEAR: i64 = 8760;
pub const MS_PER_YEAR: i64 = HOURS_PER_YEAR * MS_PER_HOUR;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimeError {
    #[error("unknown time unit `{0}`")]
    UnknownUnit(String),
    #[error("malformed duration `{0}`")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Second,
    Minute,
    Hour,
    Day,
    Year,
}

impl TimeUnit {
    pub const ALL: [TimeUnit; 5] = [
        TimeUnit::Second,
        TimeUnit::Minute,
        TimeUnit::Hour,
        TimeUnit::Day,
        TimeUnit::Year,
    ];

    pub fn millis(self) -> i64 {
        match self {
            TimeUnit::Second => MS_PER_SECOND,
            TimeUnit::Minute => MS_PER_MINUTE,
            TimeUnit::Hour => MS_PER_HOUR,
            TimeUnit::Day => MS_PER_DAY,
            TimeUnit::Year => MS_PER_YEAR,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            TimeUnit::Second => "s",
            TimeUnit::Minute => "min",
            TimeUnit::Hour => "h",
            TimeUnit::Day => "d",
            TimeUnit::Year => "yr",
        }
    }
}

impl FromStr for TimeUnit {
    type Err = TimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s" | "sec" | "secs" | "second" | "seconds" => Ok(TimeUnit::Second),
            "min" | "mins" | "minute" | "minutes" => Ok(TimeUnit::Minute),
            "h" | "hr" | "hrs" | "hour" | "hours" => Ok(TimeUnit::Hour),
            "d" | "day" | "days" => Ok(TimeUnit::Day),
            "y" | "yr" | "yrs" | "year" | "years" => Ok(TimeUnit::Year),
            other => Err(TimeError::UnknownUnit(other.to_string())),
        }
    }
}

/// A non-negative span of time with millisecond resolution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Duration(i64);

impl Duration {
    pub const ZERO: Duration = Duration(0);

    pub const fn from_millis(ms: i64) -> Self {
        Duration(ms)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    /// Converts `value` expressed in `unit`, rounding to the nearest millisecond.
    pub fn from_unit(value: f64, unit: TimeUnit) -> Self {
        Duration((value * unit.millis() as f64).round() as i64)
    }

    pub fn to_unit(self, unit: TimeUnit) -> f64 {
        self.0 as f64 / unit.millis() as f64
    }

    pub fn seconds(v: f64) -> Self {
        Self::from_unit(v, TimeUnit::Second)
    }

    pub fn minutes(v: f64) -> Self {
        Self::from_unit(v, TimeUnit::Minute)
    }

    pub fn hours(v: f64) -> Self {
        Self::from_unit(v, TimeUnit::Hour)
    }

    pub fn years(v: f64) -> Self {
        Self::from_unit(v, TimeUnit::Year)
    }

    pub fn as_hours(self) -> f64 {
        self.to_unit(TimeUnit::Hour)
    }

    pub fn as_years(self) -> f64 {
        self.to_unit(TimeUnit::Year)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn saturating_sub(self, other: Duration) -> Duration {
        Duration((self.0 - other.0).max(0))
    }

    /// Signed difference in milliseconds.
    pub fn signed_diff(self, other: Duration) -> i64 {
        self.0 - other.0
    }

    /// Whole number of `step`s that fit in `self`, or `None` if `step` does
    /// not divide `self` exactly.
    pub fn exact_div(self, step: Duration) -> Option<i64> {
        if step.0 <= 0 || self.0 % step.0 != 0 {
            None
        } else {
            Some(self.0 / step.0)
        }
    }

    /// Picks the largest unit that represents the duration without a
    /// fractional part, falling back to hours.
    fn display_unit(self) -> TimeUnit {
        for unit in [TimeUnit::Hour, TimeUnit::Minute, TimeUnit::Second] {
            if self.0 % unit.millis() == 0 {
                return unit;
            }
        }
        TimeUnit::Hour
    }
}

impl Add for Duration {
    type Output = Duration;
    fn add(self, rhs: Duration) -> Duration {
        Duration(self.0 + rhs.0)
    }
}

impl AddAssign for Duration {
    fn add_assign(&mut self, rhs: Duration) {
        self.0 += rhs.0;
    }
}

impl Sub for Duration {
    type Output = Duration;
    fn sub(self, rhs: Duration) -> Duration {
        Duration(self.0 - rhs.0)
    }
}

impl Mul<i64> for Duration {
    type Output = Duration;
    fn mul(self, rhs: i64) -> Duration {
        Duration(self.0 * rhs)
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = self.display_unit();
        write!(f, "{} {}", self.to_unit(unit), unit.symbol())
    }
}

impl FromStr for Duration {
    type Err = TimeError;

    /// Parses `"<number> <unit>"`; the space is optional (`"5min"`, `"0.3 h"`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let split = s
            .find(|c: char| c.is_ascii_alphabetic())
            .ok_or_else(|| TimeError::Malformed(s.to_string()))?;
        let (num, unit) = s.split_at(split);
        let value: f64 = num
            .trim()
            .parse()
            .map_err(|_| TimeError::Malformed(s.to_string()))?;
        if !value.is_finite() || value < 0.0 {
            return Err(TimeError::Malformed(s.to_string()));
        }
        Ok(Duration::from_unit(value, unit.parse()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_table_style_durations() {
        assert_eq!("2 s".parse::<Duration>().unwrap(), Duration::seconds(2.0));
        assert_eq!("5 min".parse::<Duration>().unwrap(), Duration::minutes(5.0));
        assert_eq!("0.3 h".parse::<Duration>().unwrap(), Duration::from_millis(1_080_000));
        assert_eq!("4h".parse::<Duration>().unwrap(), Duration::hours(4.0));
        assert_eq!("1 yr".parse::<Duration>().unwrap(), Duration::hours(8760.0));
        assert!("4".parse::<Duration>().is_err());
        assert!("4 fortnights".parse::<Duration>().is_err());
        assert!("-1 h".parse::<Duration>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for d in [
            Duration::seconds(2.0),
            Duration::minutes(5.0),
            Duration::hours(0.3),
            Duration::hours(8760.0),
            Duration::from_millis(1),
        ] {
            assert_eq!(d.to_string().parse::<Duration>().unwrap(), d, "{d}");
        }
    }

    #[test]
    fn exact_division() {
        assert_eq!(Duration::hours(8760.0).exact_div(Duration::hours(1.0)), Some(8760));
        assert_eq!(Duration::hours(1.0).exact_div(Duration::minutes(7.0)), None);
    }

    proptest! {
        #[test]
        fn unit_round_trip_is_identity(ms in 0i64..(100 * MS_PER_YEAR), idx in 0usize..5) {
            let unit = TimeUnit::ALL[idx];
            let d = Duration::from_millis(ms);
            prop_assert_eq!(Duration::from_unit(d.to_unit(unit), unit), d);
        }

        #[test]
        fn whole_units_convert_exactly(n in 0i64..10_000, idx in 0usize..5) {
            let unit = TimeUnit::ALL[idx];
            let d = Duration::from_unit(n as f64, unit);
            prop_assert_eq!(d.millis(), n * unit.millis());
            prop_assert_eq!(d.to_unit(unit), n as f64);
        }
    }
}
