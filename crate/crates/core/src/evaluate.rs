//! Rolling-origin evaluation of load forecasts at midnight anchors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{seasonal_naive, HoltWinters};
use crate::calendar::Slot;
use crate::engine::ForecastConfig;
use crate::error::{Error, Result};
use crate::parcel::EventLog;
use crate::pipeline::{fit_models, forecast_at, FitConfig};

pub const DEFAULT_HORIZONS: [Slot; 4] = [13, 37, 61, 85];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lifecycle,
    SeasonalNaive,
    HoltWinters,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Lifecycle, Method::SeasonalNaive, Method::HoltWinters];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lifecycle => "lifecycle",
            Method::SeasonalNaive => "seasonal-naive",
            Method::HoltWinters => "holt-winters",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidQuery(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub horizons: Vec<Slot>,
    pub methods: Vec<Method>,
    /// Days of history before the first anchor.
    pub warmup_days: usize,
    /// Season length of the baselines, in days.
    pub period: usize,
    pub fit: FitConfig,
    pub forecast: ForecastConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            horizons: DEFAULT_HORIZONS.to_vec(),
            methods: Method::ALL.to_vec(),
            warmup_days: 28,
            period: 7,
            fit: FitConfig::default(),
            forecast: ForecastConfig::default(),
        }
    }
}

/// One scored forecast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub method: Method,
    pub k: Slot,
    pub j: Slot,
    pub predicted: f64,
    pub actual: f64,
}

/// Error summary of one method at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: Method,
    pub j: Slot,
    pub n: usize,
    pub mae: f64,
    pub mape: f64,
    /// Forecasts left out of the MAPE because the true load was zero.
    pub mape_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub anchors: Vec<Slot>,
    pub rows: Vec<EvalRow>,
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    pub fn row(&self, method: Method, j: Slot) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.method == method && r.j == j)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "j", "n", "mae", "mape", "mape_excluded"])?;
        for r in &self.rows {
            w.write_record([
                r.method.name().to_string(),
                r.j.to_string(),
                r.n.to_string(),
                format!("{:.6}", r.mae),
                format!("{:.6}", r.mape),
                r.mape_excluded.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_predictions_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "k", "j", "predicted", "actual"])?;
        for p in &self.predictions {
            w.write_record([
                p.method.name().to_string(),
                p.k.to_string(),
                p.j.to_string(),
                format!("{:.6}", p.predicted),
                format!("{}", p.actual),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// MAE and MAPE (percent, over nonzero truths) of `(predicted, actual)` pairs.
pub fn error_summary(pairs: &[(f64, f64)]) -> (f64, f64, usize) {
    let n = pairs.len().max(1) as f64;
    let mae = pairs.iter().map(|(p, a)| (p - a).abs()).sum::<f64>() / n;
    let nonzero: Vec<f64> = pairs
        .iter()
        .filter(|(_, a)| *a > 0.0)
        .map(|(p, a)| (p - a).abs() / a)
        .collect();
    let mape = if nonzero.is_empty() {
        0.0
    } else {
        100.0 * nonzero.iter().sum::<f64>() / nonzero.len() as f64
    };
    (mae, mape, pairs.len() - nonzero.len())
}

/// Daily series of the load at slot-of-day `hour`, for days whose slot is at or before `k`.
fn daily_at_hour(load: &[u32], spd: Slot, hour: Slot, k: Slot) -> Vec<f64> {
    (0..)
        .map(|d| d * spd + hour)
        .take_while(|&t| t <= k && (t as usize) < load.len())
        .map(|t| load[t as usize] as f64)
        .collect()
}

fn baseline(method: Method, load: &[u32], spd: Slot, k: Slot, j: Slot, period: usize) -> Result<f64> {
    let target = k + j;
    let hour = target.rem_euclid(spd);
    let series = daily_at_hour(load, spd, hour, k);
    let last_day = (series.len() as Slot) - 1;
    let steps = (target.div_euclid(spd) - last_day) as usize;
    if steps == 0 {
        return Err(Error::InvalidQuery(format!("target {target} already observed at {k}")));
    }
    let f = match method {
        Method::SeasonalNaive => seasonal_naive(&series, period, steps)?,
        Method::HoltWinters => HoltWinters::fit(&series, period)?.forecast(steps),
        Method::Lifecycle => unreachable!("not a baseline"),
    };
    Ok(f[steps - 1].max(0.0))
}

/// Midnight anchors after the warm-up whose every horizon is inside the load series.
pub fn midnight_anchors(load_len: usize, spd: Slot, warmup_days: usize, max_j: Slot) -> Vec<Slot> {
    (warmup_days as Slot..)
        .map(|d| d * spd)
        .take_while(|k| k + max_j < load_len as Slot)
        .collect()
}

/// Forecasts at every midnight anchor with every method and scores them
/// against the true load. Fails if methods end up scored on different
/// `(anchor, horizon)` pairs.
pub fn evaluate(log: &EventLog, load: &[u32], cfg: &EvalConfig) -> Result<EvalReport> {
    let cal = cfg.fit.calendar()?;
    let spd = cal.slots_per_day() as Slot;
    let max_j = cfg.horizons.iter().copied().max().unwrap_or(0);
    let anchors = midnight_anchors(load.len(), spd, cfg.warmup_days, max_j);
    if anchors.is_empty() {
        return Err(Error::InsufficientHistory {
            need: cfg.warmup_days * spd as usize + max_j as usize + 1,
            got: load.len(),
        });
    }
    let forecast_cfg = ForecastConfig {
        pup: Some(cfg.fit.pup.clone()),
        ..cfg.forecast.clone()
    };
    let per_anchor: Vec<Result<Vec<Prediction>>> = crate::par_map(&anchors, |&k| {
        let mut out = Vec::new();
        let actual = |j: Slot| load[(k + j) as usize] as f64;
        for &method in &cfg.methods {
            let predicted: Vec<f64> = match method {
                Method::Lifecycle => {
                    let visible = log.visible_at(k);
                    let models = fit_models(&visible, &cfg.fit)?;
                    forecast_at(
                        &models,
                        log,
                        k,
                        &cfg.horizons,
                        &cfg.fit.volume_forecaster,
                        &forecast_cfg,
                    )?
                    .iter()
                    .map(|f| f.pmf.mean())
                    .collect()
                }
                m => cfg
                    .horizons
                    .iter()
                    .map(|&j| baseline(m, load, spd, k, j, cfg.period))
                    .collect::<Result<_>>()?,
            };
            for (&j, p) in cfg.horizons.iter().zip(predicted) {
                out.push(Prediction {
                    method,
                    k,
                    j,
                    predicted: p,
                    actual: actual(j),
                });
            }
        }
        Ok(out)
    });
    let mut predictions = Vec::new();
    for p in per_anchor {
        predictions.extend(p?);
    }
    check_alignment(&predictions, &cfg.methods)?;
    let mut groups: BTreeMap<(usize, Slot), Vec<(f64, f64)>> = BTreeMap::new();
    for p in &predictions {
        let mi = cfg.methods.iter().position(|m| *m == p.method).expect("listed");
        groups.entry((mi, p.j)).or_default().push((p.predicted, p.actual));
    }
    let rows = groups
        .into_iter()
        .map(|((mi, j), pairs)| {
            let (mae, mape, excluded) = error_summary(&pairs);
            EvalRow {
                method: cfg.methods[mi],
                j,
                n: pairs.len(),
                mae,
                mape,
                mape_excluded: excluded,
            }
        })
        .collect();
    Ok(EvalReport {
        anchors,
        rows,
        predictions,
    })
}

/// Every method must be scored on the same `(anchor, horizon)` pairs.
pub fn check_alignment(predictions: &[Prediction], methods: &[Method]) -> Result<()> {
    let mut sets: BTreeMap<Method, BTreeSet<(Slot, Slot)>> =
        methods.iter().map(|m| (*m, BTreeSet::new())).collect();
    for p in predictions {
        sets.get_mut(&p.method)
            .ok_or_else(|| Error::Misaligned(format!("unexpected method {}", p.method)))?
            .insert((p.k, p.j));
    }
    let mut it = sets.iter();
    if let Some((first, reference)) = it.next() {
        for (m, s) in it {
            if s != reference {
                return Err(Error::Misaligned(format!(
                    "{m} scored on {} pairs, {first} on {}",
                    s.len(),
                    reference.len()
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_excludes_zero_truth() {
        let (mae, mape, excl) = error_summary(&[(1.0, 2.0), (3.0, 0.0), (4.0, 4.0)]);
        assert!((mae - 4.0 / 3.0).abs() < 1e-15);
        assert!((mape - 25.0).abs() < 1e-12);
        assert_eq!(excl, 1);
    }

    #[test]
    fn misalignment_is_detected() {
        let p = |method, k| Prediction {
            method,
            k,
            j: 13,
            predicted: 0.0,
            actual: 0.0,
        };
        let ok = [p(Method::Lifecycle, 0), p(Method::SeasonalNaive, 0)];
        assert!(check_alignment(&ok, &[Method::Lifecycle, Method::SeasonalNaive]).is_ok());
        let bad = [p(Method::Lifecycle, 0), p(Method::SeasonalNaive, 24)];
        assert!(matches!(
            check_alignment(&bad, &[Method::Lifecycle, Method::SeasonalNaive]),
            Err(Error::Misaligned(_))
        ));
    }

    #[test]
    fn seasonal_naive_is_exact_on_weekly_load() {
        let spd = 24;
        let week: Vec<u32> = (0..7 * spd).map(|t| ((t * 7) % 11) as u32).collect();
        let load: Vec<u32> = week.iter().cycle().take(8 * 7 * spd as usize).copied().collect();
        for k in midnight_anchors(load.len(), spd, 14, 85) {
            for j in DEFAULT_HORIZONS {
                let f = baseline(Method::SeasonalNaive, &load, spd, k, j, 7).unwrap();
                assert_eq!(f, load[(k + j) as usize] as f64);
            }
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("sarima".parse::<Method>().is_err());
    }
}
