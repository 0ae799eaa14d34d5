//! Future order arrivals: Poisson counts per slot with intensity
//! `lambda(t, c) = rho_c(weekday(t), hour(t)) * mu_c(day(t))`.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::calendar::{Calendar, Slot};
use crate::error::{Error, Result};
use crate::parcel::{EventLog, StatusId};

/// Expected order counts per slot, split by carrier.
pub trait IntensitySource: Sync {
    /// `(carrier, lambda)` pairs for slot `t`; a `None` carrier means unattributed.
    fn components(&self, t: Slot) -> Vec<(Option<String>, f64)>;

    fn total(&self, t: Slot) -> f64 {
        self.components(t).iter().map(|(_, l)| l).sum()
    }
}

/// Same intensity in every slot, with no carrier attribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantIntensity(pub f64);

impl IntensitySource for ConstantIntensity {
    fn components(&self, _t: Slot) -> Vec<(Option<String>, f64)> {
        vec![(None, self.0)]
    }
}

/// `ln m!` for small and moderate `m` by direct summation.
fn ln_factorial(m: u64) -> f64 {
    (2..=m).map(|i| (i as f64).ln()).sum()
}

/// Poisson probability `e^{-lambda} lambda^m / m!`, computed in log space.
pub fn poisson_pmf(m: u64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    (-lambda + m as f64 * lambda.ln() - ln_factorial(m)).exp()
}

/// Smallest `m` with `P(M <= m) >= coverage` for `M ~ Poisson(lambda)`.
pub fn poisson_truncation(lambda: f64, coverage: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let mut ln_term = -lambda;
    let mut cdf = 0.0;
    let mut m = 0u64;
    loop {
        cdf += ln_term.exp();
        if cdf >= coverage {
            return m;
        }
        m += 1;
        ln_term += lambda.ln() - (m as f64).ln();
        // past the mode with negligible terms: floating-point cdf has saturated
        if m as f64 > lambda && ln_term < -745.0 {
            return m;
        }
    }
}

/// Share of a carrier's daily take-overs falling in each slot of the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyProfile {
    slots_per_day: u32,
    rows: BTreeMap<String, BTreeMap<u8, Vec<f64>>>,
    working_days: BTreeMap<String, BTreeSet<u8>>,
}

impl HourlyProfile {
    /// Builds a profile from explicit rows; every row must sum to one.
    pub fn new(
        slots_per_day: u32,
        rows: BTreeMap<String, BTreeMap<u8, Vec<f64>>>,
        working_days: BTreeMap<String, BTreeSet<u8>>,
    ) -> Result<Self> {
        let p = Self {
            slots_per_day,
            rows,
            working_days,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (c, days) in &self.rows {
            for (w, row) in days {
                let s: f64 = row.iter().sum();
                if !(1..=7).contains(w)
                    || row.len() != self.slots_per_day as usize
                    || row.iter().any(|x| *x < 0.0)
                    || (s - 1.0).abs() > 1e-9
                {
                    return Err(Error::InvalidPmf(format!(
                        "hourly profile row ({w}, {c}) is not a distribution over {} slots",
                        self.slots_per_day
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn carriers(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    pub fn rho(&self, weekday: u8, hour: u32, carrier: &str) -> f64 {
        self.rows
            .get(carrier)
            .and_then(|d| d.get(&weekday))
            .and_then(|r| r.get(hour as usize))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn row(&self, weekday: u8, carrier: &str) -> Option<&[f64]> {
        self.rows.get(carrier)?.get(&weekday).map(Vec::as_slice)
    }

    pub fn is_working_day(&self, weekday: u8, carrier: &str) -> bool {
        self.working_days
            .get(carrier)
            .is_some_and(|d| d.contains(&weekday))
    }
}

/// Empirical hourly breakdown of take-overs (entries into `entry_status`).
///
/// Weekdays without data for a carrier get a uniform row over the hours in which
/// that carrier was ever active. A carrier's working days are the weekdays on
/// which it took over at least one parcel.
pub fn fit_hourly_profile(
    log: &EventLog,
    calendar: &Calendar,
    entry_status: StatusId,
) -> Result<HourlyProfile> {
    let spd = calendar.slots_per_day() as usize;
    let mut counts: BTreeMap<String, BTreeMap<u8, Vec<f64>>> = BTreeMap::new();
    for r in log.rows() {
        if let Some(t) = r.entry(entry_status) {
            let row = counts
                .entry(r.carrier.clone())
                .or_default()
                .entry(calendar.weekday_of(t))
                .or_insert_with(|| vec![0.0; spd]);
            row[calendar.hour_of(t) as usize] += 1.0;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut rows = BTreeMap::new();
    let mut working_days = BTreeMap::new();
    for (carrier, days) in counts {
        let mut active = vec![false; spd];
        for row in days.values() {
            for (h, c) in row.iter().enumerate() {
                active[h] |= *c > 0.0;
            }
        }
        let n_active = active.iter().filter(|a| **a).count() as f64;
        let uniform: Vec<f64> = active
            .iter()
            .map(|a| if *a { 1.0 / n_active } else { 0.0 })
            .collect();
        let mut full = BTreeMap::new();
        for w in 1..=7u8 {
            let row = match days.get(&w) {
                Some(row) => {
                    let total: f64 = row.iter().sum();
                    row.iter().map(|c| c / total).collect()
                }
                None => uniform.clone(),
            };
            full.insert(w, row);
        }
        working_days.insert(carrier.clone(), days.keys().copied().collect());
        rows.insert(carrier, full);
    }
    HourlyProfile::new(spd as u32, rows, working_days)
}

/// Point forecaster for a daily count series.
pub trait DailyForecaster: Sync {
    /// Forecasts for days `1..=days_ahead` after the last observation.
    fn forecast(&self, history: &[f64], days_ahead: usize) -> Result<Vec<f64>>;
}

/// Seasonal-naive forecaster averaging the last `cycles` seasons, with an
/// optional damped linear trend measured between the last two seasons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonalTrendForecaster {
    pub period: usize,
    pub cycles: usize,
    /// Trend damping factor in `(0, 1]`; `None` disables the trend.
    pub damping: Option<f64>,
}

impl Default for SeasonalTrendForecaster {
    fn default() -> Self {
        Self {
            period: 7,
            cycles: 2,
            damping: Some(0.8),
        }
    }
}

impl DailyForecaster for SeasonalTrendForecaster {
    fn forecast(&self, history: &[f64], days_ahead: usize) -> Result<Vec<f64>> {
        let p = self.period;
        let need = p * self.cycles.max(2);
        if history.len() < need {
            return Err(Error::InsufficientHistory {
                need,
                got: history.len(),
            });
        }
        let n = history.len();
        let mean = |a: usize, b: usize| history[a..b].iter().sum::<f64>() / (b - a) as f64;
        let slope = match self.damping {
            Some(_) => (mean(n - p, n) - mean(n - 2 * p, n - p)) / p as f64,
            None => 0.0,
        };
        let out = (1..=days_ahead)
            .map(|h| {
                let target = n - 1 + h;
                let lag = p * h.div_ceil(p);
                let idx: Vec<usize> = (0..self.cycles).map(|c| target - lag - p * c).collect();
                let base = idx.iter().map(|&i| history[i]).sum::<f64>() / idx.len() as f64;
                let centre = idx.iter().sum::<usize>() as f64 / idx.len() as f64;
                let dist = target as f64 - centre;
                let steps = match self.damping {
                    Some(phi) if phi < 1.0 => phi * (1.0 - phi.powf(dist)) / (1.0 - phi),
                    Some(_) => dist,
                    None => 0.0,
                };
                (base + slope * steps).max(0.0)
            })
            .collect();
        Ok(out)
    }
}

/// Daily take-over counts per carrier on a shared contiguous day range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyVolumeModel {
    start: NaiveDate,
    series: BTreeMap<String, Vec<f64>>,
}

impl DailyVolumeModel {
    pub fn new(start: NaiveDate, series: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let lens: BTreeSet<usize> = series.values().map(Vec::len).collect();
        if lens.len() > 1 {
            return Err(Error::InvalidQuery("carrier series differ in length".into()));
        }
        Ok(Self { start, series })
    }

    /// Counts of entries into `entry_status` per carrier and day, from the first
    /// day with a take-over through `through` inclusive.
    pub fn from_log(
        log: &EventLog,
        calendar: &Calendar,
        entry_status: StatusId,
        through: NaiveDate,
    ) -> Result<Self> {
        let events: Vec<(NaiveDate, &str)> = log
            .rows()
            .iter()
            .filter_map(|r| {
                r.entry(entry_status)
                    .map(|t| (calendar.date_of(t), r.carrier.as_str()))
            })
            .collect();
        let start = events
            .iter()
            .map(|(d, _)| *d)
            .min()
            .ok_or(Error::EmptyLog)?;
        Ok(Self::from_daily_counts(
            start,
            through,
            events.into_iter().map(|(d, c)| (d, c.to_string(), 1.0)),
        ))
    }

    /// Aggregates `(date, carrier, count)` rows over `start..=through`; missing days are zero.
    pub fn from_daily_counts(
        start: NaiveDate,
        through: NaiveDate,
        rows: impl IntoIterator<Item = (NaiveDate, String, f64)>,
    ) -> Self {
        let days = ((through - start).num_days() + 1).max(0) as usize;
        let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (d, c, n) in rows {
            let s = series.entry(c).or_insert_with(|| vec![0.0; days]);
            let i = (d - start).num_days();
            if i >= 0 && (i as usize) < days {
                s[i as usize] += n;
            }
        }
        Self { start, series }
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn days(&self) -> usize {
        self.series.values().next().map_or(0, Vec::len)
    }

    /// Day after the last observed day.
    pub fn next_day(&self) -> NaiveDate {
        self.start + Duration::days(self.days() as i64)
    }

    pub fn series(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.series
    }

    /// Model restricted to days strictly before `day`.
    pub fn until(&self, day: NaiveDate) -> Self {
        let keep = (day - self.start).num_days().clamp(0, self.days() as i64) as usize;
        Self {
            start: self.start,
            series: self
                .series
                .iter()
                .map(|(c, s)| (c.clone(), s[..keep].to_vec()))
                .collect(),
        }
    }

    /// `(date, carrier, count)` rows in date-then-carrier order.
    pub fn rows(&self) -> Vec<(NaiveDate, String, f64)> {
        (0..self.days())
            .flat_map(|i| {
                let d = self.start + Duration::days(i as i64);
                self.series.iter().map(move |(c, s)| (d, c.clone(), s[i]))
            })
            .collect()
    }
}

/// Point forecasts of daily volume per carrier for the `days_ahead` days after the history.
pub fn forecast_daily_volume(
    model: &DailyVolumeModel,
    forecaster: &dyn DailyForecaster,
    days_ahead: usize,
) -> Result<BTreeMap<String, Vec<f64>>> {
    model
        .series
        .iter()
        .map(|(c, s)| Ok((c.clone(), forecaster.forecast(s, days_ahead)?)))
        .collect()
}

/// Forecast order intensity for slots after an anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderIntensity {
    calendar: Calendar,
    profile: HourlyProfile,
    first_day: NaiveDate,
    volumes: BTreeMap<String, Vec<f64>>,
    after: Slot,
}

impl OrderIntensity {
    /// `volumes[c][i]` is the expected volume of carrier `c` on `first_day + i`.
    /// Slots at or before `after` have zero intensity.
    pub fn new(
        calendar: Calendar,
        profile: HourlyProfile,
        first_day: NaiveDate,
        volumes: BTreeMap<String, Vec<f64>>,
        after: Slot,
    ) -> Self {
        Self {
            calendar,
            profile,
            first_day,
            volumes,
            after,
        }
    }

    /// Forecasts volumes from `model` for the days from `model.next_day()` far
    /// enough to cover `horizon` slots after `anchor`.
    pub fn forecast(
        calendar: Calendar,
        profile: HourlyProfile,
        model: &DailyVolumeModel,
        forecaster: &dyn DailyForecaster,
        anchor: Slot,
        horizon: Slot,
    ) -> Result<Self> {
        let last = calendar.date_of(anchor + horizon);
        let first_day = model.next_day();
        let days = ((last - first_day).num_days() + 1).max(1) as usize;
        let volumes = forecast_daily_volume(model, forecaster, days)?;
        Ok(Self::new(calendar, profile, first_day, volumes, anchor))
    }

    pub fn profile(&self) -> &HourlyProfile {
        &self.profile
    }

    /// Expected take-overs by `carrier` in slot `t`.
    pub fn lambda(&self, t: Slot, carrier: &str) -> f64 {
        if t <= self.after {
            return 0.0;
        }
        let w = self.calendar.weekday_of(t);
        if !self.profile.is_working_day(w, carrier) {
            return 0.0;
        }
        let day = (self.calendar.date_of(t) - self.first_day).num_days();
        let mu = match self.volumes.get(carrier) {
            Some(v) if day >= 0 => v.get(day as usize).copied().unwrap_or(0.0),
            _ => 0.0,
        };
        self.profile.rho(w, self.calendar.hour_of(t), carrier) * mu
    }
}

impl IntensitySource for OrderIntensity {
    fn components(&self, t: Slot) -> Vec<(Option<String>, f64)> {
        self.profile
            .carriers()
            .map(|c| (Some(c.to_string()), self.lambda(t, c)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parcel::ParcelRecord;

    fn cal() -> Calendar {
        Calendar::hourly(NaiveDate::from_ymd_opt(2024, 1, 1).unwrap())
    }

    fn takeover(id: usize, carrier: &str, t: Slot) -> ParcelRecord {
        ParcelRecord::new(
            format!("p{id}"),
            None,
            carrier,
            "pup",
            [(2, t)].into_iter().collect(),
        )
        .unwrap()
    }

    #[test]
    fn truncation_values() {
        assert_eq!(poisson_truncation(0.0, 0.99), 0);
        assert_eq!(poisson_truncation(1.0, 0.99), 4);
        assert_eq!(poisson_truncation(5.0, 0.99), 11);
    }

    #[test]
    fn truncation_survives_large_rates() {
        let m = poisson_truncation(2000.0, 0.99);
        assert!(m > 2000 && m < 2200, "{m}");
    }

    #[test]
    fn profile_from_single_hour() {
        let rows = (0..4).map(|i| takeover(i, "c1", 8 + 168 * i as i64)).collect();
        let log = EventLog::from_rows(rows);
        let p = fit_hourly_profile(&log, &cal(), 2).unwrap();
        assert_eq!(p.rho(1, 8, "c1"), 1.0);
        assert_eq!(p.rho(1, 9, "c1"), 0.0);
        assert!(p.is_working_day(1, "c1"));
        assert!(!p.is_working_day(7, "c1"));
        // unseen weekday is uniform over active hours
        assert_eq!(p.rho(3, 8, "c1"), 1.0);
    }

    #[test]
    fn profile_two_spikes_and_counts() {
        let mut rows = vec![takeover(0, "c1", 8), takeover(1, "c1", 14)];
        // Tuesdays: three at 08:00, one at 09:00
        rows.extend((0..3).map(|i| takeover(10 + i, "c1", 24 + 8)));
        rows.push(takeover(20, "c1", 24 + 9));
        let p = fit_hourly_profile(&EventLog::from_rows(rows), &cal(), 2).unwrap();
        assert_eq!(p.rho(1, 8, "c1"), 0.5);
        assert_eq!(p.rho(1, 14, "c1"), 0.5);
        assert_eq!(p.rho(2, 8, "c1"), 0.75);
        assert_eq!(p.rho(2, 9, "c1"), 0.25);
        for w in 1..=7 {
            let s: f64 = p.row(w, "c1").unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_log_is_rejected() {
        assert!(matches!(
            fit_hourly_profile(&EventLog::from_rows(vec![]), &cal(), 2),
            Err(Error::EmptyLog)
        ));
    }

    #[test]
    fn forecaster_fixed_points() {
        let f = SeasonalTrendForecaster::default();
        let constant = vec![10.0; 21];
        for v in f.forecast(&constant, 9).unwrap() {
            assert!((v - 10.0).abs() < 1e-12);
        }
        let zeros = vec![0.0; 14];
        assert_eq!(f.forecast(&zeros, 3).unwrap(), vec![0.0; 3]);
        let week = [12.0, 10.0, 10.0, 10.0, 10.0, 8.0, 0.0];
        let hist: Vec<f64> = week.iter().cycle().take(28).copied().collect();
        let out = f.forecast(&hist, 7).unwrap();
        for (o, w) in out.iter().zip(week) {
            assert!((o - w).abs() <= 0.5);
        }
        assert!(matches!(
            f.forecast(&hist[..10], 1),
            Err(Error::InsufficientHistory { need: 14, got: 10 })
        ));
    }

    #[test]
    fn undamped_trend_extends_lines() {
        let f = SeasonalTrendForecaster {
            damping: Some(1.0),
            ..Default::default()
        };
        let hist: Vec<f64> = (0..21).map(|i| 5.0 + 0.5 * i as f64).collect();
        let out = f.forecast(&hist, 10).unwrap();
        for (h, v) in out.iter().enumerate() {
            assert!((v - (5.0 + 0.5 * (20 + h + 1) as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn intensity_product_and_daily_additivity() {
        let cal = cal();
        let mut row = vec![0.0; 24];
        row[8] = 0.25;
        row[14] = 0.75;
        let rows = [(
            "c1".to_string(),
            (1..=6u8).map(|w| (w, row.clone())).collect::<BTreeMap<_, _>>(),
        )]
        .into_iter()
        .collect();
        let working = [("c1".to_string(), (1..=6u8).collect())].into_iter().collect();
        let profile = HourlyProfile::new(24, rows, working).unwrap();
        let first = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let vols = [("c1".to_string(), vec![8.0; 7])].into_iter().collect();
        let lam = OrderIntensity::new(cal, profile, first, vols, -1);
        assert_eq!(lam.lambda(8, "c1"), 2.0);
        assert_eq!(lam.lambda(9, "c1"), 0.0);
        // Sunday
        assert_eq!(lam.lambda(6 * 24 + 8, "c1"), 0.0);
        assert_eq!(lam.lambda(8, "c2"), 0.0);
        for day in 0..6 {
            let total: f64 = (0..24).map(|h| lam.total(day * 24 + h)).sum();
            assert!((total - 8.0).abs() < 1e-9);
        }
    }

    #[test]
    fn volume_model_counts_and_until() {
        let rows = vec![
            takeover(0, "c1", 10),
            takeover(1, "c1", 11),
            takeover(2, "c2", 30),
        ];
        let log = EventLog::from_rows(rows);
        let through = NaiveDate::from_ymd_opt(2024, 1, 3).unwrap();
        let m = DailyVolumeModel::from_log(&log, &cal(), 2, through).unwrap();
        assert_eq!(m.series()["c1"], vec![2.0, 0.0, 0.0]);
        assert_eq!(m.series()["c2"], vec![0.0, 1.0, 0.0]);
        assert_eq!(m.next_day(), NaiveDate::from_ymd_opt(2024, 1, 4).unwrap());
        assert_eq!(m.until(NaiveDate::from_ymd_opt(2024, 1, 2).unwrap()).days(), 1);
        assert_eq!(m.rows().len(), 6);
    }
}
