//! Reference point forecasters for daily series: seasonal naive and additive
//! Holt-Winters.

use serde::{Deserialize, Serialize};

use crate::arrivals::DailyForecaster;
use crate::error::{Error, Result};

/// Value one season before each target day.
pub fn seasonal_naive(series: &[f64], period: usize, horizon: usize) -> Result<Vec<f64>> {
    if period == 0 || series.len() < period {
        return Err(Error::InsufficientHistory {
            need: period.max(1),
            got: series.len(),
        });
    }
    let n = series.len();
    Ok((1..=horizon)
        .map(|h| series[n - 1 + h - period * h.div_ceil(period)])
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonalNaive {
    pub period: usize,
}

impl Default for SeasonalNaive {
    fn default() -> Self {
        Self { period: 7 }
    }
}

impl DailyForecaster for SeasonalNaive {
    fn forecast(&self, history: &[f64], days_ahead: usize) -> Result<Vec<f64>> {
        seasonal_naive(history, self.period, days_ahead)
    }
}

/// Smoothing parameters of additive Holt-Winters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HwParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Fitted additive Holt-Winters state at the end of a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoltWinters {
    pub params: HwParams,
    pub period: usize,
    pub level: f64,
    pub trend: f64,
    /// Seasonal terms of the last `period` observations, oldest first.
    pub season: Vec<f64>,
    /// One-step-ahead squared error over the observations after the first season.
    pub sse: f64,
}

const GRID: [f64; 13] = [
    0.0, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
];

impl HoltWinters {
    /// Runs the recursion with fixed parameters.
    ///
    /// Initial level and trend come from the means of the first two seasons; the
    /// initial seasonal terms are the first season's deviations from that line.
    pub fn fit_with(series: &[f64], period: usize, params: HwParams) -> Result<Self> {
        let m = period;
        if m == 0 || series.len() < 2 * m {
            return Err(Error::InsufficientHistory {
                need: 2 * m.max(1),
                got: series.len(),
            });
        }
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let mean1 = mean(&series[..m]);
        let mean2 = mean(&series[m..2 * m]);
        let centre = (m as f64 - 1.0) / 2.0;
        let mut trend = (mean2 - mean1) / m as f64;
        let mut level = mean1 + trend * centre;
        let mut season: Vec<f64> = (0..m)
            .map(|i| series[i] - (mean1 + trend * (i as f64 - centre)))
            .collect();
        let HwParams { alpha, beta, gamma } = params;
        let mut sse = 0.0;
        for (t, &y) in series.iter().enumerate().skip(m) {
            let s_old = season[t % m];
            let err = y - (level + trend + s_old);
            sse += err * err;
            let prev = level;
            level = alpha * (y - s_old) + (1.0 - alpha) * (level + trend);
            trend = beta * (level - prev) + (1.0 - beta) * trend;
            season[t % m] = gamma * (y - level) + (1.0 - gamma) * s_old;
        }
        let n = series.len();
        let season = (0..m).map(|i| season[(n - m + i) % m]).collect();
        Ok(Self {
            params,
            period: m,
            level,
            trend,
            season,
            sse,
        })
    }

    /// Grid search over the smoothing parameters minimizing the in-sample
    /// one-step squared error. Ties keep the first grid point.
    pub fn fit(series: &[f64], period: usize) -> Result<Self> {
        let mut best: Option<Self> = None;
        for &alpha in &GRID[1..] {
            for &beta in &GRID {
                for &gamma in &GRID {
                    let hw = Self::fit_with(series, period, HwParams { alpha, beta, gamma })?;
                    if best.as_ref().map_or(true, |b| hw.sse < b.sse) {
                        best = Some(hw);
                    }
                }
            }
        }
        best.ok_or(Error::InsufficientHistory { need: 2 * period, got: series.len() })
    }

    /// Forecasts for `1..=horizon` steps after the series.
    pub fn forecast(&self, horizon: usize) -> Vec<f64> {
        (1..=horizon)
            .map(|h| self.level + h as f64 * self.trend + self.season[(h - 1) % self.period])
            .collect()
    }
}

/// Holt-Winters refitted on every call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoltWintersForecaster {
    pub period: usize,
    /// Clamp forecasts at zero.
    pub non_negative: bool,
}

impl Default for HoltWintersForecaster {
    fn default() -> Self {
        Self {
            period: 7,
            non_negative: true,
        }
    }
}

impl DailyForecaster for HoltWintersForecaster {
    fn forecast(&self, history: &[f64], days_ahead: usize) -> Result<Vec<f64>> {
        let f = HoltWinters::fit(history, self.period)?.forecast(days_ahead);
        Ok(if self.non_negative {
            f.into_iter().map(|x| x.max(0.0)).collect()
        } else {
            f
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seasonal_naive_examples() {
        let week = [12.0, 10.0, 10.0, 10.0, 10.0, 8.0, 0.0];
        let series: Vec<f64> = week.iter().cycle().take(21).copied().collect();
        assert_eq!(seasonal_naive(&series, 7, 7).unwrap(), week.to_vec());
        assert_eq!(seasonal_naive(&[4.0; 9], 7, 10).unwrap(), vec![4.0; 10]);
        assert_eq!(seasonal_naive(&week, 7, 1).unwrap(), vec![12.0]);
        assert!(matches!(
            seasonal_naive(&week[..3], 7, 1),
            Err(Error::InsufficientHistory { need: 7, got: 3 })
        ));
    }

    #[test]
    fn holt_winters_constant() {
        let hw = HoltWinters::fit(&[5.0; 30], 7).unwrap();
        for f in hw.forecast(10) {
            assert!((f - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn holt_winters_linear_trend() {
        let series: Vec<f64> = (0..28).map(|t| 3.0 + 0.5 * t as f64).collect();
        let p = HwParams {
            alpha: 0.3,
            beta: 0.1,
            gamma: 0.2,
        };
        let hw = HoltWinters::fit_with(&series, 7, p).unwrap();
        for (h, f) in hw.forecast(5).into_iter().enumerate() {
            let expected = 3.0 + 0.5 * (28 + h) as f64;
            assert!((f - expected).abs() < 1e-9, "{f} vs {expected}");
        }
        assert!(hw.sse < 1e-18);
    }

    #[test]
    fn holt_winters_periodic() {
        let week = [12.0, 10.0, 10.0, 10.0, 10.0, 8.0, 0.0];
        let series: Vec<f64> = week.iter().cycle().take(35).copied().collect();
        let f = HoltWintersForecaster::default().forecast(&series, 14).unwrap();
        for (h, x) in f.iter().enumerate() {
            assert!((x - week[h % 7]).abs() <= 0.5);
        }
        assert!(HoltWinters::fit(&series[..10], 7).is_err());
    }
}
