//! Empirical estimation of transition kernels and retailer/carrier selection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::calendar::{Calendar, OpeningHours};
use crate::error::{Error, Result};
use crate::kernel::{ConditioningKey, Feature, StatusKernel, TransitionKernel};
use crate::parcel::{EventLog, StatusId};
use crate::pmf::HoldingTimePmf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationConfig {
    /// Minimum completed transitions for a conditioned key; sparser keys fall back.
    pub min_count: usize,
    /// Laplace pseudo-count added to every holding time.
    pub alpha: f64,
    pub transit_support: usize,
    pub pickup_support: usize,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            min_count: 20,
            alpha: 0.0,
            transit_support: 100,
            pickup_support: 336,
        }
    }
}

/// A fitted status kernel with the number of observations behind every key.
#[derive(Debug, Clone, PartialEq)]
pub struct StatusFit {
    pub kernel: StatusKernel,
    pub counts: BTreeMap<ConditioningKey, usize>,
    /// Fraction of observations beyond the support that were dropped.
    pub truncated: f64,
}

/// Empirical holding-time pmfs of `status` for parcels targeting `pup`.
///
/// Only transitions completed by the log cutoff count. Keys are grouped at
/// every schema prefix; a conditioned key is stored when it has at least
/// `min_count` observations (and passes `accept`), the pooled key whenever
/// there is any observation.
pub fn estimate_status_kernel(
    log: &EventLog,
    calendar: &Calendar,
    pup: &str,
    status: StatusId,
    schema: &[Feature],
    support_max: usize,
    cfg: &EstimationConfig,
    accept: &dyn Fn(&ConditioningKey) -> bool,
) -> Result<StatusFit> {
    let log = log.for_pup(pup);
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut groups: BTreeMap<ConditioningKey, Vec<i64>> = BTreeMap::new();
    for r in log.rows() {
        let (Some(t0), Some(t1)) = (r.entry(status), r.entry(status + 1)) else {
            continue;
        };
        let key = ConditioningKey::from_context(
            schema,
            calendar.weekday_of(t0),
            calendar.hour_of(t0),
            &r.attrs(),
        );
        for level in 0..=schema.len() {
            let feats = &schema[..level];
            if feats.iter().all(|f| key.has(*f)) {
                groups.entry(key.restrict(feats)).or_default().push(t1 - t0);
            }
        }
    }
    if groups.is_empty() {
        return Err(Error::NoCompletedTransitions {
            status,
            pup: pup.to_string(),
        });
    }
    let mut kernel = StatusKernel::new(schema.to_vec(), support_max);
    let mut counts = BTreeMap::new();
    let mut truncated = 0.0;
    for (key, delays) in groups {
        let pooled = key == ConditioningKey::default();
        let keep = pooled || (delays.len() >= cfg.min_count && accept(&key));
        if !keep {
            continue;
        }
        let n = delays.len();
        let (pmf, dropped) = HoldingTimePmf::from_observations(delays, support_max, cfg.alpha)?;
        if pooled {
            truncated = dropped;
            if dropped > 0.0 {
                log::info!(
                    "status {status}: {:.2}% of holding times beyond {support_max} slots truncated",
                    100.0 * dropped
                );
            }
        }
        counts.insert(key.clone(), n);
        kernel.insert(key, pmf)?;
    }
    Ok(StatusFit {
        kernel,
        counts,
        truncated,
    })
}

/// Delivery-delay pmfs conditioned on carrier and take-over weekday.
pub fn estimate_transit_kernel(
    log: &EventLog,
    calendar: &Calendar,
    pup: &str,
    status: StatusId,
    cfg: &EstimationConfig,
) -> Result<StatusFit> {
    estimate_status_kernel(
        log,
        calendar,
        pup,
        status,
        &[Feature::Carrier, Feature::Weekday],
        cfg.transit_support,
        cfg,
        &|_| true,
    )
}

/// Pickup-delay pmfs conditioned on delivery weekday and hour; only cells within
/// opening hours are stored as fully conditioned keys.
pub fn estimate_pickup_kernel(
    log: &EventLog,
    calendar: &Calendar,
    pup: &str,
    status: StatusId,
    opening: &OpeningHours,
    cfg: &EstimationConfig,
) -> Result<StatusFit> {
    estimate_status_kernel(
        log,
        calendar,
        pup,
        status,
        &[Feature::Weekday, Feature::Hour],
        cfg.pickup_support,
        cfg,
        &|key| match (key.weekday, key.hour) {
            (Some(w), Some(h)) => opening.is_open_cell(w, h),
            _ => true,
        },
    )
}

/// Fits every status from `entry_status` to the pickup status.
///
/// The last two statuses use the transit and pickup schemas; earlier ones are
/// conditioned on retailer (order preparation, status 0) or carrier, then
/// weekday and hour.
pub fn fit_transition_kernel(
    log: &EventLog,
    calendar: &Calendar,
    pup: &str,
    n_statuses: StatusId,
    entry_status: StatusId,
    opening: &OpeningHours,
    cfg: &EstimationConfig,
) -> Result<(TransitionKernel, BTreeMap<StatusId, StatusFit>)> {
    let mut kernel = TransitionKernel::new(*calendar, n_statuses, entry_status)?;
    let mut fits = BTreeMap::new();
    for n in entry_status..n_statuses {
        let fit = if n + 1 == n_statuses {
            estimate_pickup_kernel(log, calendar, pup, n, opening, cfg)?
        } else if n + 2 == n_statuses {
            estimate_transit_kernel(log, calendar, pup, n, cfg)?
        } else {
            let lead = if n == 0 {
                Feature::Retailer
            } else {
                Feature::Carrier
            };
            estimate_status_kernel(
                log,
                calendar,
                pup,
                n,
                &[lead, Feature::Weekday, Feature::Hour],
                cfg.transit_support,
                cfg,
                &|_| true,
            )?
        };
        kernel.set_status(n, fit.kernel.clone())?;
        fits.insert(n, fit);
    }
    Ok((kernel, fits))
}

/// Retailer and carrier selection probabilities. The empty string stands for an
/// unknown retailer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionModel {
    pub p_retailer: BTreeMap<String, f64>,
    pub p_carrier_given_retailer: BTreeMap<String, BTreeMap<String, f64>>,
}

fn retailer_label(r: &Option<String>) -> String {
    r.clone().unwrap_or_default()
}

fn retailer_option(label: &str) -> Option<String> {
    (!label.is_empty()).then(|| label.to_string())
}

impl SelectionModel {
    /// `(retailer, carrier, P(R=r) P(C=c|R=r))` for every pair with mass.
    pub fn joint(&self) -> Vec<(Option<String>, String, f64)> {
        self.p_retailer
            .iter()
            .flat_map(|(r, pr)| {
                self.p_carrier_given_retailer
                    .get(r)
                    .into_iter()
                    .flatten()
                    .map(move |(c, pc)| (retailer_option(r), c.clone(), pr * pc))
            })
            .filter(|(_, _, p)| *p > 0.0)
            .collect()
    }

    /// `P(R=r | C=carrier)`; a single unknown retailer when the carrier is unseen.
    pub fn retailers_given_carrier(&self, carrier: &str) -> Vec<(Option<String>, f64)> {
        let weights: Vec<(Option<String>, f64)> = self
            .joint()
            .into_iter()
            .filter(|(_, c, _)| c == carrier)
            .map(|(r, _, p)| (r, p))
            .collect();
        let total: f64 = weights.iter().map(|(_, p)| p).sum();
        if total <= 0.0 {
            return vec![(None, 1.0)];
        }
        weights.into_iter().map(|(r, p)| (r, p / total)).collect()
    }
}

/// Empirical retailer shares and carrier shares per retailer.
pub fn estimate_selection(log: &EventLog) -> Result<SelectionModel> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut by_retailer: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for r in log.rows() {
        *by_retailer
            .entry(retailer_label(&r.retailer))
            .or_default()
            .entry(r.carrier.clone())
            .or_default() += 1.0;
    }
    let total = log.len() as f64;
    let mut model = SelectionModel::default();
    for (r, carriers) in by_retailer {
        let n: f64 = carriers.values().sum();
        model.p_retailer.insert(r.clone(), n / total);
        model.p_carrier_given_retailer.insert(
            r,
            carriers.into_iter().map(|(c, k)| (c, k / n)).collect(),
        );
    }
    Ok(model)
}
