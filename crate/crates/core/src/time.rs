//! Time-of-day intervals.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Minutes in a day.
pub const DAY_MINUTES: u32 = 1440;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TimeError {
    #[error("invalid interval [{0}, {1})")]
    BadInterval(u32, u32),
    #[error("alpha must be in 1..=1440, got {0}")]
    BadAlpha(u32),
    #[error("invalid time of day `{0}` (expected HH:MM)")]
    BadClock(String),
}

/// Half-open interval `[start, end)` in minutes since midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[u32; 2]", into = "[u32; 2]")]
pub struct TimeInterval {
    start: u32,
    end: u32,
}

impl TimeInterval {
    pub fn new(start: u32, end: u32) -> Result<Self, TimeError> {
        if start < end && end <= DAY_MINUTES {
            Ok(TimeInterval { start, end })
        } else {
            Err(TimeError::BadInterval(start, end))
        }
    }

    pub const fn whole_day() -> Self {
        TimeInterval {
            start: 0,
            end: DAY_MINUTES,
        }
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn end(&self) -> u32 {
        self.end
    }

    pub fn width(&self) -> u32 {
        self.end - self.start
    }

    pub fn contains(&self, minute: f64) -> bool {
        self.start as f64 <= minute && minute < self.end as f64
    }

    /// True when `self` touches or overlaps the closed window.
    pub fn intersects(&self, w: &Window) -> bool {
        self.start as f64 <= w.end && w.start < self.end as f64
    }

    /// Length of the intersection with a closed window (0 for a point hit).
    pub fn overlap(&self, w: &Window) -> f64 {
        (w.end.min(self.end as f64) - w.start.max(self.start as f64)).max(0.0)
    }

    /// Union of two touching intervals.
    pub fn join(&self, next: &TimeInterval) -> Option<TimeInterval> {
        (self.end == next.start).then_some(TimeInterval {
            start: self.start,
            end: next.end,
        })
    }

    pub fn midpoint(&self) -> f64 {
        (self.start + self.end) as f64 / 2.0
    }
}

impl TryFrom<[u32; 2]> for TimeInterval {
    type Error = TimeError;
    fn try_from(v: [u32; 2]) -> Result<Self, TimeError> {
        TimeInterval::new(v[0], v[1])
    }
}

impl From<TimeInterval> for [u32; 2] {
    fn from(i: TimeInterval) -> Self {
        [i.start, i.end]
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {})",
            format_clock(self.start as f64),
            format_clock(self.end as f64)
        )
    }
}

/// Closed window `[start, end]` of possible arrival minutes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn point(t: f64) -> Self {
        Window { start: t, end: t }
    }

    /// Shift by `min` and enlarge by `max`, both in minutes; clamps into the day.
    pub fn shift_enlarge(&self, min: f64, max: f64) -> Window {
        let day = DAY_MINUTES as f64;
        Window {
            start: (self.start + min).min(day),
            end: (self.end + max).min(day),
        }
    }
}

/// Splits the day into `⌈1440/alpha⌉` intervals of width `alpha`; the last may be shorter.
pub fn partition_day(alpha: u32) -> Result<Vec<TimeInterval>, TimeError> {
    if !(1..=DAY_MINUTES).contains(&alpha) {
        return Err(TimeError::BadAlpha(alpha));
    }
    Ok((0..DAY_MINUTES.div_ceil(alpha))
        .map(|j| TimeInterval {
            start: j * alpha,
            end: ((j + 1) * alpha).min(DAY_MINUTES),
        })
        .collect())
}

/// Index of the interval of `partition_day(alpha)` containing `minute`.
pub fn interval_index(alpha: u32, minute: f64) -> usize {
    let last = DAY_MINUTES.div_ceil(alpha) as usize - 1;
    ((minute.max(0.0) / alpha as f64) as usize).min(last)
}

pub fn parse_clock(s: &str) -> Result<f64, TimeError> {
    let bad = || TimeError::BadClock(s.to_string());
    let (h, m) = s.trim().split_once(':').ok_or_else(bad)?;
    let h: u32 = h.parse().map_err(|_| bad())?;
    let m: u32 = m.parse().map_err(|_| bad())?;
    if h >= 24 || m >= 60 {
        return Err(bad());
    }
    Ok((h * 60 + m) as f64)
}

pub fn format_clock(minute: f64) -> String {
    let m = minute.round() as u32;
    format!("{:02}:{:02}", m / 60, m % 60)
}
