//! Calendar months in `YYYY-MM` form.
//!
//! Months key everything in the snapshot layer: cache filenames, snapshot
//! records, and block timelines. They order chronologically and iterate as
//! inclusive ranges.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A calendar month, e.g. `2024-07`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Month {
    year: u16,
    month: u8,
}

/// Error parsing a `YYYY-MM` string.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid month {input:?}: expected YYYY-MM with year 0001-9999 and month 01-12")]
pub struct MonthParseError {
    pub input: String,
}

impl Month {
    pub fn new(year: u16, month: u8) -> Result<Self, MonthParseError> {
        if (1..=9999).contains(&year) && (1..=12).contains(&month) {
            Ok(Month { year, month })
        } else {
            Err(MonthParseError {
                input: format!("{year:04}-{month:02}"),
            })
        }
    }

    pub fn year(&self) -> u16 {
        self.year
    }

    pub fn month(&self) -> u8 {
        self.month
    }

    /// Number of days in this month (Gregorian, with leap years).
    pub fn days(&self) -> u8 {
        match self.month {
            1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
            4 | 6 | 9 | 11 => 30,
            2 => {
                let y = self.year as u32;
                if y % 4 == 0 && (y % 100 != 0 || y % 400 == 0) {
                    29
                } else {
                    28
                }
            }
            _ => unreachable!("month validated on construction"),
        }
    }

    /// Zero-based linear index (for distance arithmetic).
    pub fn index(&self) -> u32 {
        self.year as u32 * 12 + (self.month as u32 - 1)
    }

    pub fn next(&self) -> Option<Month> {
        if self.month == 12 {
            Month::new(self.year.checked_add(1)?, 1).ok()
        } else {
            Some(Month {
                year: self.year,
                month: self.month + 1,
            })
        }
    }

    pub fn prev(&self) -> Option<Month> {
        if self.month == 1 {
            Month::new(self.year.checked_sub(1)?, 12).ok()
        } else {
            Some(Month {
                year: self.year,
                month: self.month - 1,
            })
        }
    }

    /// Inclusive range `self..=end`, empty if `end < self`.
    pub fn range_to(&self, end: Month) -> MonthRange {
        MonthRange {
            next: Some(*self),
            end,
        }
    }

    /// First instant of the month as an archive-style `YYYYMMDDhhmmss` stamp.
    pub fn start_stamp(&self) -> String {
        format!("{:04}{:02}01000000", self.year, self.month)
    }

    /// Last instant of the month as an archive-style `YYYYMMDDhhmmss` stamp.
    pub fn end_stamp(&self) -> String {
        format!("{:04}{:02}{:02}235959", self.year, self.month, self.days())
    }

    /// Mid-month instant (the 15th, noon) as an archive-style stamp. Capture
    /// selection prefers the snapshot closest to this point.
    pub fn midpoint_stamp(&self) -> String {
        format!("{:04}{:02}15120000", self.year, self.month)
    }
}

/// Inclusive iterator over consecutive months.
#[derive(Debug, Clone)]
pub struct MonthRange {
    next: Option<Month>,
    end: Month,
}

impl Iterator for MonthRange {
    type Item = Month;

    fn next(&mut self) -> Option<Month> {
        let cur = self.next?;
        if cur > self.end {
            self.next = None;
            return None;
        }
        self.next = cur.next();
        Some(cur)
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = MonthParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || MonthParseError {
            input: s.to_string(),
        };
        let (y, m) = s.split_once('-').ok_or_else(err)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(err());
        }
        let year: u16 = y.parse().map_err(|_| err())?;
        let month: u8 = m.parse().map_err(|_| err())?;
        Month::new(year, month).map_err(|_| err())
    }
}

impl From<Month> for String {
    fn from(m: Month) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for Month {
    type Error = MonthParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
