//! Discrete time grid and calendar projections.
//!
//! Slot `k` covers `[epoch + k*T, epoch + (k+1)*T)` where `T` is `slot_hours`.
//! Weekdays are numbered 1 (Monday) to 7 (Sunday); the hour projection returns
//! the slot-of-day index, which equals the hour of day when `T` is one hour.

use std::collections::BTreeSet;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a time slot relative to the calendar epoch.
pub type Slot = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CalendarRepr")]
pub struct Calendar {
    epoch: NaiveDateTime,
    slot_hours: u32,
}

impl Calendar {
    /// The epoch must fall on a slot boundary of its day and `slot_hours` must divide 24.
    pub fn new(epoch: NaiveDateTime, slot_hours: u32) -> Result<Self> {
        if slot_hours == 0 || 24 % slot_hours != 0 {
            return Err(Error::InvalidCalendar(format!(
                "slot_hours must divide 24, got {slot_hours}"
            )));
        }
        if epoch.minute() != 0 || epoch.second() != 0 || epoch.nanosecond() != 0 {
            return Err(Error::InvalidCalendar(format!(
                "epoch {epoch} is not on an hour boundary"
            )));
        }
        if epoch.hour() % slot_hours != 0 {
            return Err(Error::InvalidCalendar(format!(
                "epoch hour {} is not a multiple of slot_hours {slot_hours}",
                epoch.hour()
            )));
        }
        Ok(Self { epoch, slot_hours })
    }

    /// One-hour slots anchored at midnight of `date`.
    pub fn hourly(date: NaiveDate) -> Self {
        Self {
            epoch: date.and_hms_opt(0, 0, 0).expect("midnight is valid"),
            slot_hours: 1,
        }
    }

    pub fn epoch(&self) -> NaiveDateTime {
        self.epoch
    }

    pub fn slot_hours(&self) -> u32 {
        self.slot_hours
    }

    pub fn slots_per_day(&self) -> u32 {
        24 / self.slot_hours
    }

    pub fn slots_per_week(&self) -> i64 {
        7 * self.slots_per_day() as i64
    }

    /// Start instant of slot `k`.
    pub fn datetime_of(&self, k: Slot) -> NaiveDateTime {
        self.epoch + Duration::hours(k * self.slot_hours as i64)
    }

    /// Slot containing the instant `at` (floor division, valid before the epoch too).
    pub fn slot_of(&self, at: NaiveDateTime) -> Slot {
        let secs = (at - self.epoch).num_seconds();
        secs.div_euclid(self.slot_hours as i64 * 3600)
    }

    pub fn weekday_of(&self, k: Slot) -> u8 {
        self.datetime_of(k).weekday().number_from_monday() as u8
    }

    /// Slot-of-day index `floor(hour / slot_hours)`.
    pub fn hour_of(&self, k: Slot) -> u32 {
        self.datetime_of(k).hour() / self.slot_hours
    }

    pub fn date_of(&self, k: Slot) -> NaiveDate {
        self.datetime_of(k).date()
    }

    /// First slot of the day containing `k`.
    pub fn day_start(&self, k: Slot) -> Slot {
        k - self.hour_of(k) as i64
    }

    /// First slot of calendar day `date`.
    pub fn slot_of_date(&self, date: NaiveDate) -> Slot {
        self.slot_of(date.and_hms_opt(0, 0, 0).expect("midnight is valid"))
    }
}

#[derive(Deserialize)]
struct CalendarRepr {
    epoch: NaiveDateTime,
    slot_hours: u32,
}

impl TryFrom<CalendarRepr> for Calendar {
    type Error = Error;

    fn try_from(r: CalendarRepr) -> Result<Self> {
        Calendar::new(r.epoch, r.slot_hours)
    }
}

/// Weekly opening hours of a pick-up point, as half-open hour ranges `[open, close)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpeningHours {
    /// Index 0 is Monday. `None` means closed all day.
    days: [Option<(u32, u32)>; 7],
}

impl OpeningHours {
    pub fn new(days: [Option<(u32, u32)>; 7]) -> Result<Self> {
        for (i, d) in days.iter().enumerate() {
            if let Some((open, close)) = d {
                if open >= close || *close > 24 {
                    return Err(Error::InvalidCalendar(format!(
                        "weekday {}: invalid opening range {open}..{close}",
                        i + 1
                    )));
                }
            }
        }
        Ok(Self { days })
    }

    /// Open every day around the clock.
    pub fn always() -> Self {
        Self {
            days: [Some((0, 24)); 7],
        }
    }

    /// 9:00 to 19:00 Monday to Saturday, 9:00 to 12:00 on Sunday.
    pub fn shop_default() -> Self {
        let mut days = [Some((9, 19)); 7];
        days[6] = Some((9, 12));
        Self { days }
    }

    pub fn range(&self, weekday: u8) -> Option<(u32, u32)> {
        self.days.get(weekday.checked_sub(1)? as usize).copied().flatten()
    }

    /// Whether the hour-of-day cell `(weekday, hour)` is within opening hours.
    pub fn is_open_cell(&self, weekday: u8, hour: u32) -> bool {
        matches!(self.range(weekday), Some((open, close)) if hour >= open && hour < close)
    }

    pub fn check_cell(&self, weekday: u8, hour: u32) -> Result<()> {
        if self.is_open_cell(weekday, hour) {
            Ok(())
        } else {
            Err(Error::ClosedCell { weekday, hour })
        }
    }

    /// All open `(weekday, hour)` cells in weekday-then-hour order.
    pub fn cells(&self) -> Vec<(u8, u32)> {
        (1..=7u8)
            .flat_map(|w| {
                self.range(w)
                    .map(|(o, c)| (o..c).map(move |h| (w, h)).collect::<Vec<_>>())
                    .unwrap_or_default()
            })
            .collect()
    }

    /// Whether slot `k` is open, judged by the hour at which the slot starts.
    pub fn is_open(&self, cal: &Calendar, k: Slot) -> bool {
        let at = cal.datetime_of(k);
        self.is_open_cell(at.weekday().number_from_monday() as u8, at.hour())
    }
}

impl Default for OpeningHours {
    fn default() -> Self {
        Self::shop_default()
    }
}

/// Known closing days (public holidays, exceptional closures).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosureCalendar {
    dates: BTreeSet<NaiveDate>,
}

impl ClosureCalendar {
    pub fn new(dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        Self {
            dates: dates.into_iter().collect(),
        }
    }

    /// Parses newline-delimited ISO dates; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dates = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let d = NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|e| Error::Parse {
                row: i + 1,
                reason: format!("bad date {line:?}: {e}"),
            })?;
            dates.insert(d);
        }
        Ok(Self { dates })
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.dates.contains(&date)
    }

    pub fn is_closed(&self, cal: &Calendar, k: Slot) -> bool {
        self.contains(cal.date_of(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monday() -> Calendar {
        Calendar::hourly(NaiveDate::from_ymd_opt(2024, 1, 1).unwrap())
    }

    #[test]
    fn weekday_projection() {
        let cal = monday();
        assert_eq!(cal.weekday_of(0), 1);
        assert_eq!(cal.weekday_of(25), 2);
        assert_eq!(cal.weekday_of(168), 1);
        assert_eq!(cal.weekday_of(-1), 7);
    }

    #[test]
    fn hour_projection() {
        let cal = monday();
        assert_eq!(cal.hour_of(0), 0);
        assert_eq!(cal.hour_of(25), 1);
        assert_eq!(cal.hour_of(47), 23);
    }

    #[test]
    fn coarse_slots_bin_hours() {
        let epoch = NaiveDate::from_ymd_opt(2024, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let cal = Calendar::new(epoch, 3).unwrap();
        assert_eq!(cal.slots_per_day(), 8);
        assert_eq!(cal.hour_of(9), 1);
        assert_eq!(cal.weekday_of(8), 2);
        assert!(Calendar::new(epoch, 5).is_err());
    }

    #[test]
    fn slot_round_trip_and_day_start() {
        let cal = monday();
        for k in [-30, 0, 13, 200, 5000] {
            assert_eq!(cal.slot_of(cal.datetime_of(k)), k);
            let start = cal.day_start(k);
            assert_eq!(cal.hour_of(start), 0);
            assert_eq!(cal.date_of(start), cal.date_of(k));
        }
    }

    #[test]
    fn shop_opening_cells() {
        let oh = OpeningHours::shop_default();
        assert_eq!(oh.cells().len(), 6 * 10 + 3);
        assert!(oh.check_cell(7, 15).is_err());
        assert!(oh.check_cell(7, 11).is_ok());
        assert!(oh.check_cell(1, 19).is_err());
    }

    #[test]
    fn closure_file_parsing() {
        let c = ClosureCalendar::parse("2024-01-01\n\n# note\n2024-05-01\n").unwrap();
        assert!(c.contains(NaiveDate::from_ymd_opt(2024, 5, 1).unwrap()));
        let err = ClosureCalendar::parse("2024-01-01\nnope\n").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }));
    }
}
