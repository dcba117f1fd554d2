use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, FixedOffset, NaiveDate, SubsecRound, TimeZone, Utc};
use serde::{Deserialize, Serialize};

/// Timestamps are UTC instants at second resolution.
pub type Timestamp = DateTime<Utc>;

/// Display format used by the live table, worklists and CSV exports.
pub const DISPLAY_FORMAT: &str = "%d-%m-%Y %H:%M:%S";

/// Rendering of an absent timestamp.
pub const NIL: &str = "Nil";

/// Zone used for "today" boundaries and human-facing rendering.
///
/// Sri Lanka has used a fixed +05:30 offset since 2006, so a fixed offset is
/// enough for `Asia/Colombo`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DisplayZone {
    offset: FixedOffset,
}

impl DisplayZone {
    pub fn colombo() -> Self {
        DisplayZone {
            offset: FixedOffset::east_opt(5 * 3600 + 1800).unwrap(),
        }
    }

    pub fn utc() -> Self {
        DisplayZone {
            offset: FixedOffset::east_opt(0).unwrap(),
        }
    }

    pub fn offset(&self) -> FixedOffset {
        self.offset
    }

    pub fn format(&self, ts: &Timestamp) -> String {
        ts.with_timezone(&self.offset)
            .format(DISPLAY_FORMAT)
            .to_string()
    }

    pub fn format_opt(&self, ts: Option<&Timestamp>) -> String {
        ts.map_or_else(|| NIL.to_string(), |t| self.format(t))
    }

    pub fn local_date(&self, ts: &Timestamp) -> NaiveDate {
        ts.with_timezone(&self.offset).date_naive()
    }

    /// Parses a `DD-MM-YYYY HH:MM:SS` wall-clock string in this zone.
    pub fn parse_display(&self, s: &str) -> Option<Timestamp> {
        let naive = chrono::NaiveDateTime::parse_from_str(s, DISPLAY_FORMAT).ok()?;
        self.offset
            .from_local_datetime(&naive)
            .single()
            .map(|t| t.with_timezone(&Utc))
    }
}

impl Default for DisplayZone {
    fn default() -> Self {
        Self::colombo()
    }
}

impl fmt::Display for DisplayZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.offset)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown timezone {0:?} (expected Asia/Colombo, UTC or a fixed offset like +05:30)")]
pub struct UnknownZone(pub String);

impl FromStr for DisplayZone {
    type Err = UnknownZone;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Asia/Colombo" | "SL" => Ok(Self::colombo()),
            "UTC" | "Etc/UTC" | "Z" => Ok(Self::utc()),
            other => {
                let (sign, rest) = match other.as_bytes().first() {
                    Some(b'+') => (1, &other[1..]),
                    Some(b'-') => (-1, &other[1..]),
                    _ => return Err(UnknownZone(s.to_string())),
                };
                let (h, m) = rest
                    .split_once(':')
                    .ok_or_else(|| UnknownZone(s.to_string()))?;
                let h: i32 = h.parse().map_err(|_| UnknownZone(s.to_string()))?;
                let m: i32 = m.parse().map_err(|_| UnknownZone(s.to_string()))?;
                if h > 14 || m > 59 {
                    return Err(UnknownZone(s.to_string()));
                }
                FixedOffset::east_opt(sign * (h * 3600 + m * 60))
                    .map(|offset| DisplayZone { offset })
                    .ok_or_else(|| UnknownZone(s.to_string()))
            }
        }
    }
}

impl Serialize for DisplayZone {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.offset.to_string())
    }
}

impl<'de> Deserialize<'de> for DisplayZone {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses an RFC 3339 instant (any offset) into a UTC timestamp.
pub fn parse_instant(s: &str) -> Option<Timestamp> {
    DateTime::parse_from_rfc3339(s.trim())
        .ok()
        .map(|t| t.with_timezone(&Utc))
}

pub fn days(n: i64) -> Duration {
    Duration::days(n)
}

/// Source of the single authoritative service time.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Utc::now().trunc_subsecs(0)
    }
}

/// A settable clock for scenarios, seeding and tests.
#[derive(Debug, Clone)]
pub struct ManualClock(Arc<Mutex<Timestamp>>);

impl ManualClock {
    pub fn new(at: Timestamp) -> Self {
        ManualClock(Arc::new(Mutex::new(at)))
    }

    pub fn set(&self, at: Timestamp) {
        *self.0.lock().unwrap() = at;
    }

    pub fn advance(&self, by: Duration) {
        let mut t = self.0.lock().unwrap();
        *t += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        *self.0.lock().unwrap()
    }
}
