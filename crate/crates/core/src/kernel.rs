//! Transition kernels: conditional holding-time pmfs per status.
//!
//! A [`TransitionKernel`] stores, for every non-absorbing status, pmfs keyed by a
//! [`ConditioningKey`] built from the status schema. Lookups fall back
//! hierarchically by dropping the last schema feature until a stored key matches.
//! The probability engine consumes kernels through [`HopKernels`], which resolves
//! the pmf of a single parcel given the status and the slot it was entered.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::calendar::{Calendar, ClosureCalendar, OpeningHours, Slot};
use crate::error::{Error, Result};
use crate::parcel::{ParcelAttrs, StatusId};
use crate::pmf::HoldingTimePmf;

/// Holding-time pmfs resolved for one parcel.
pub trait HopKernels: Sync {
    /// The absorbing status `N`; statuses `0..N` have holding-time pmfs.
    fn n_statuses(&self) -> StatusId;

    /// Pmf of the time spent in `status` when it was entered at slot `entered`.
    fn holding(&self, status: StatusId, entered: Slot) -> Result<Cow<'_, HoldingTimePmf>>;
}

/// Source of per-parcel [`HopKernels`].
pub trait KernelProvider: Sync {
    fn n_statuses(&self) -> StatusId;

    /// First status for which parcels are observed; future orders enter here.
    fn entry_status(&self) -> StatusId;

    fn bind<'a>(&'a self, attrs: &ParcelAttrs) -> Box<dyn HopKernels + 'a>;

    /// Kernels pooled over all context features, used when a parcel's own
    /// kernels contradict its observed history.
    fn pooled<'a>(&'a self) -> Box<dyn HopKernels + 'a>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Weekday,
    Hour,
    Carrier,
    Retailer,
    Pup,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConditioningKey {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weekday: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hour: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retailer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pup: Option<String>,
}

impl ConditioningKey {
    /// Key for a parcel entering a status at `(weekday, hour)` with the given attributes.
    pub fn from_context(schema: &[Feature], weekday: u8, hour: u32, attrs: &ParcelAttrs) -> Self {
        let full = Self {
            weekday: Some(weekday),
            hour: Some(hour),
            carrier: attrs.carrier.clone(),
            retailer: attrs.retailer.clone(),
            pup: attrs.pup.clone(),
        };
        full.restrict(schema)
    }

    pub fn has(&self, f: Feature) -> bool {
        match f {
            Feature::Weekday => self.weekday.is_some(),
            Feature::Hour => self.hour.is_some(),
            Feature::Carrier => self.carrier.is_some(),
            Feature::Retailer => self.retailer.is_some(),
            Feature::Pup => self.pup.is_some(),
        }
    }

    /// Copy keeping only the listed features.
    pub fn restrict(&self, features: &[Feature]) -> Self {
        let keep = |f| features.contains(&f);
        Self {
            weekday: self.weekday.filter(|_| keep(Feature::Weekday)),
            hour: self.hour.filter(|_| keep(Feature::Hour)),
            carrier: self.carrier.clone().filter(|_| keep(Feature::Carrier)),
            retailer: self.retailer.clone().filter(|_| keep(Feature::Retailer)),
            pup: self.pup.clone().filter(|_| keep(Feature::Pup)),
        }
    }
}

impl fmt::Display for ConditioningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(w) = self.weekday {
            parts.push(format!("weekday={w}"));
        }
        if let Some(h) = self.hour {
            parts.push(format!("hour={h}"));
        }
        if let Some(c) = &self.carrier {
            parts.push(format!("carrier={c}"));
        }
        if let Some(r) = &self.retailer {
            parts.push(format!("retailer={r}"));
        }
        if let Some(p) = &self.pup {
            parts.push(format!("pup={p}"));
        }
        if parts.is_empty() {
            write!(f, "{{pooled}}")
        } else {
            write!(f, "{{{}}}", parts.join(","))
        }
    }
}

/// Holding-time pmfs of one status.
///
/// The schema is ordered from the most to the least robust feature: fallback
/// drops features from the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StatusKernelRepr", into = "StatusKernelRepr")]
pub struct StatusKernel {
    schema: Vec<Feature>,
    support_max: usize,
    entries: BTreeMap<ConditioningKey, HoldingTimePmf>,
}

#[derive(Serialize, Deserialize)]
struct StatusKernelRepr {
    schema: Vec<Feature>,
    support_max: usize,
    entries: Vec<KeyedPmf>,
}

#[derive(Serialize, Deserialize)]
struct KeyedPmf {
    key: ConditioningKey,
    probs: HoldingTimePmf,
}

impl TryFrom<StatusKernelRepr> for StatusKernel {
    type Error = Error;

    fn try_from(r: StatusKernelRepr) -> Result<Self> {
        let mut k = StatusKernel::new(r.schema, r.support_max);
        for e in r.entries {
            k.insert(e.key, e.probs)?;
        }
        Ok(k)
    }
}

impl From<StatusKernel> for StatusKernelRepr {
    fn from(k: StatusKernel) -> Self {
        Self {
            schema: k.schema,
            support_max: k.support_max,
            entries: k
                .entries
                .into_iter()
                .map(|(key, probs)| KeyedPmf { key, probs })
                .collect(),
        }
    }
}

impl StatusKernel {
    pub fn new(schema: Vec<Feature>, support_max: usize) -> Self {
        Self {
            schema,
            support_max,
            entries: BTreeMap::new(),
        }
    }

    /// Single pooled pmf with an empty schema.
    pub fn pooled(pmf: HoldingTimePmf) -> Self {
        let mut k = Self::new(Vec::new(), pmf.support_max());
        k.entries.insert(ConditioningKey::default(), pmf);
        k
    }

    pub fn schema(&self) -> &[Feature] {
        &self.schema
    }

    pub fn support_max(&self) -> usize {
        self.support_max
    }

    pub fn entries(&self) -> &BTreeMap<ConditioningKey, HoldingTimePmf> {
        &self.entries
    }

    /// Stores a pmf under a key that uses a prefix of the schema.
    pub fn insert(&mut self, key: ConditioningKey, pmf: HoldingTimePmf) -> Result<()> {
        if pmf.support_max() != self.support_max {
            return Err(Error::InvalidPmf(format!(
                "support {} differs from status support {}",
                pmf.support_max(),
                self.support_max
            )));
        }
        let level = self.schema.iter().take_while(|f| key.has(**f)).count();
        if key.restrict(&self.schema[..level]) != key {
            return Err(Error::InvalidPmf(format!(
                "key {key} is not a schema prefix of {:?}",
                self.schema
            )));
        }
        self.entries.insert(key, pmf);
        Ok(())
    }

    /// Most specific stored pmf for `key`, falling back by dropping trailing features.
    pub fn lookup(&self, key: &ConditioningKey) -> Option<&HoldingTimePmf> {
        (0..=self.schema.len()).rev().find_map(|level| {
            let feats = &self.schema[..level];
            if feats.iter().all(|f| key.has(*f)) {
                self.entries.get(&key.restrict(feats))
            } else {
                None
            }
        })
    }
}

/// The family of holding-time pmfs `f_n` for statuses `entry_status..N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransitionKernelRepr", into = "TransitionKernelRepr")]
pub struct TransitionKernel {
    calendar: Calendar,
    n_statuses: StatusId,
    entry_status: StatusId,
    statuses: BTreeMap<StatusId, StatusKernel>,
}

#[derive(Serialize, Deserialize)]
struct TransitionKernelRepr {
    epoch: chrono::NaiveDateTime,
    slot_hours: u32,
    n_statuses: StatusId,
    entry_status: StatusId,
    statuses: BTreeMap<StatusId, StatusKernel>,
}

impl TryFrom<TransitionKernelRepr> for TransitionKernel {
    type Error = Error;

    fn try_from(r: TransitionKernelRepr) -> Result<Self> {
        let mut k = TransitionKernel::new(
            Calendar::new(r.epoch, r.slot_hours)?,
            r.n_statuses,
            r.entry_status,
        )?;
        for (n, s) in r.statuses {
            k.set_status(n, s)?;
        }
        Ok(k)
    }
}

impl From<TransitionKernel> for TransitionKernelRepr {
    fn from(k: TransitionKernel) -> Self {
        Self {
            epoch: k.calendar.epoch(),
            slot_hours: k.calendar.slot_hours(),
            n_statuses: k.n_statuses,
            entry_status: k.entry_status,
            statuses: k.statuses,
        }
    }
}

impl TransitionKernel {
    pub fn new(calendar: Calendar, n_statuses: StatusId, entry_status: StatusId) -> Result<Self> {
        if n_statuses < 1 || entry_status >= n_statuses {
            return Err(Error::InvalidQuery(format!(
                "entry status {entry_status} must be below absorbing status {n_statuses}"
            )));
        }
        Ok(Self {
            calendar,
            n_statuses,
            entry_status,
            statuses: BTreeMap::new(),
        })
    }

    pub fn calendar(&self) -> &Calendar {
        &self.calendar
    }

    pub fn statuses(&self) -> &BTreeMap<StatusId, StatusKernel> {
        &self.statuses
    }

    pub fn status(&self, n: StatusId) -> Option<&StatusKernel> {
        self.statuses.get(&n)
    }

    pub fn set_status(&mut self, n: StatusId, kernel: StatusKernel) -> Result<()> {
        if n >= self.n_statuses {
            return Err(Error::UnknownStatus {
                status: n,
                absorbing: self.n_statuses,
            });
        }
        if n < self.entry_status {
            return Err(Error::InvalidQuery(format!(
                "status {n} precedes entry status {}",
                self.entry_status
            )));
        }
        self.statuses.insert(n, kernel);
        Ok(())
    }

    /// Pmf of status `n` under `key`, with hierarchical fallback.
    pub fn lookup(&self, n: StatusId, key: &ConditioningKey) -> Result<&HoldingTimePmf> {
        if n >= self.n_statuses {
            return Err(Error::UnknownStatus {
                status: n,
                absorbing: self.n_statuses,
            });
        }
        self.statuses
            .get(&n)
            .and_then(|s| s.lookup(key))
            .ok_or_else(|| Error::MissingKernel {
                status: n,
                key: key.to_string(),
            })
    }

    /// Every stored pmf, for invariant checks.
    pub fn pmfs(&self) -> impl Iterator<Item = (StatusId, &ConditioningKey, &HoldingTimePmf)> {
        self.statuses
            .iter()
            .flat_map(|(n, s)| s.entries.iter().map(move |(k, p)| (*n, k, p)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    fn bind_attrs(&self, attrs: Option<&ParcelAttrs>) -> BoundKernel<'_> {
        let spd = self.calendar.slots_per_day() as usize;
        let week = 7 * spd;
        let tables = self
            .statuses
            .iter()
            .map(|(&n, sk)| {
                let cells = (0..week)
                    .map(|i| {
                        let key = match attrs {
                            Some(a) => ConditioningKey::from_context(
                                &sk.schema,
                                (i / spd) as u8 + 1,
                                (i % spd) as u32,
                                a,
                            ),
                            None => ConditioningKey::default(),
                        };
                        sk.lookup(&key).ok_or_else(|| key.to_string())
                    })
                    .collect();
                (n, cells)
            })
            .collect();
        let base = (self.calendar.weekday_of(0) as i64 - 1) * spd as i64
            + self.calendar.hour_of(0) as i64;
        BoundKernel {
            n_statuses: self.n_statuses,
            base,
            week: week as i64,
            tables,
        }
    }
}

/// A kernel resolved for one set of parcel attributes, indexed by slot of week.
struct BoundKernel<'a> {
    n_statuses: StatusId,
    base: i64,
    week: i64,
    tables: BTreeMap<StatusId, Vec<std::result::Result<&'a HoldingTimePmf, String>>>,
}

impl HopKernels for BoundKernel<'_> {
    fn n_statuses(&self) -> StatusId {
        self.n_statuses
    }

    fn holding(&self, status: StatusId, entered: Slot) -> Result<Cow<'_, HoldingTimePmf>> {
        if status >= self.n_statuses {
            return Err(Error::UnknownStatus {
                status,
                absorbing: self.n_statuses,
            });
        }
        let cells = self.tables.get(&status).ok_or_else(|| Error::MissingKernel {
            status,
            key: "any".into(),
        })?;
        let idx = (self.base + entered).rem_euclid(self.week) as usize;
        match &cells[idx] {
            Ok(p) => Ok(Cow::Borrowed(*p)),
            Err(key) => Err(Error::MissingKernel {
                status,
                key: key.clone(),
            }),
        }
    }
}

impl KernelProvider for TransitionKernel {
    fn n_statuses(&self) -> StatusId {
        self.n_statuses
    }

    fn entry_status(&self) -> StatusId {
        self.entry_status
    }

    fn bind<'a>(&'a self, attrs: &ParcelAttrs) -> Box<dyn HopKernels + 'a> {
        Box::new(self.bind_attrs(Some(attrs)))
    }

    fn pooled<'a>(&'a self) -> Box<dyn HopKernels + 'a> {
        Box::new(self.bind_attrs(None))
    }
}

/// Time-homogeneous kernels without context: `pmfs[n]` is the pmf of status `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticKernels {
    pmfs: Vec<HoldingTimePmf>,
    entry_status: StatusId,
}

impl StaticKernels {
    pub fn new(pmfs: Vec<HoldingTimePmf>) -> Self {
        Self {
            pmfs,
            entry_status: 0,
        }
    }

    pub fn with_entry_status(mut self, entry_status: StatusId) -> Self {
        self.entry_status = entry_status;
        self
    }
}

impl HopKernels for StaticKernels {
    fn n_statuses(&self) -> StatusId {
        self.pmfs.len() as StatusId
    }

    fn holding(&self, status: StatusId, _entered: Slot) -> Result<Cow<'_, HoldingTimePmf>> {
        self.pmfs
            .get(status as usize)
            .map(Cow::Borrowed)
            .ok_or(Error::UnknownStatus {
                status,
                absorbing: self.pmfs.len() as StatusId,
            })
    }
}

impl KernelProvider for StaticKernels {
    fn n_statuses(&self) -> StatusId {
        self.pmfs.len() as StatusId
    }

    fn entry_status(&self) -> StatusId {
        self.entry_status
    }

    fn bind<'a>(&'a self, _attrs: &ParcelAttrs) -> Box<dyn HopKernels + 'a> {
        Box::new(self.clone())
    }

    fn pooled<'a>(&'a self) -> Box<dyn HopKernels + 'a> {
        Box::new(self.clone())
    }
}

/// Kernels whose pmf cycles with the entry slot: status `n` entered at `t` uses
/// `table[n][t mod table[n].len()]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicKernels {
    table: Vec<Vec<HoldingTimePmf>>,
}

impl PeriodicKernels {
    pub fn new(table: Vec<Vec<HoldingTimePmf>>) -> Result<Self> {
        if table.iter().any(|t| t.is_empty()) {
            return Err(Error::InvalidQuery("empty pmf cycle".into()));
        }
        Ok(Self { table })
    }

    pub fn table(&self) -> &[Vec<HoldingTimePmf>] {
        &self.table
    }
}

impl HopKernels for PeriodicKernels {
    fn n_statuses(&self) -> StatusId {
        self.table.len() as StatusId
    }

    fn holding(&self, status: StatusId, entered: Slot) -> Result<Cow<'_, HoldingTimePmf>> {
        let cycle = self.table.get(status as usize).ok_or(Error::UnknownStatus {
            status,
            absorbing: self.table.len() as StatusId,
        })?;
        Ok(Cow::Borrowed(
            &cycle[entered.rem_euclid(cycle.len() as i64) as usize],
        ))
    }
}

/// Moves mass that would complete a hop inside a closed slot to the next open
/// slot; mass with no open slot left within the support lands on `support_max`.
pub fn shift_closed_mass(
    pmf: &HoldingTimePmf,
    entered: Slot,
    is_closed: impl Fn(Slot) -> bool,
    is_open: impl Fn(Slot) -> bool,
) -> Result<HoldingTimePmf> {
    let support = pmf.support_max();
    let mut out = vec![0.0; support + 1];
    for (d, &p) in pmf.probs().iter().enumerate().skip(1) {
        if p == 0.0 {
            continue;
        }
        let target = if is_closed(entered + d as i64) {
            (d + 1..=support)
                .find(|&e| is_open(entered + e as i64))
                .unwrap_or(support)
        } else {
            d
        };
        out[target] += p;
    }
    HoldingTimePmf::new(out)
}

/// Kernel view accounting for known closing days.
pub struct ClosureView<'a, P: KernelProvider + ?Sized> {
    inner: &'a P,
    calendar: Calendar,
    closures: &'a ClosureCalendar,
    opening: Option<&'a OpeningHours>,
    shifted: Vec<StatusId>,
}

impl<'a, P: KernelProvider + ?Sized> ClosureView<'a, P> {
    /// Shifts the delivery hop (`N-2`) and the pickup hop (`N-1`).
    pub fn new(
        inner: &'a P,
        calendar: Calendar,
        closures: &'a ClosureCalendar,
        opening: Option<&'a OpeningHours>,
    ) -> Self {
        let n = inner.n_statuses();
        let shifted = [n.checked_sub(2), n.checked_sub(1)]
            .into_iter()
            .flatten()
            .filter(|s| *s >= inner.entry_status())
            .collect();
        Self {
            inner,
            calendar,
            closures,
            opening,
            shifted,
        }
    }

    fn wrap<'b>(&'b self, hops: Box<dyn HopKernels + 'b>) -> Box<dyn HopKernels + 'b> {
        if self.closures.is_empty() {
            return hops;
        }
        Box::new(ClosedHops {
            inner: hops,
            calendar: self.calendar,
            closures: self.closures,
            opening: self.opening,
            shifted: &self.shifted,
        })
    }
}

/// Kernel view where mass landing on closed days moves to the next open slot.
pub fn apply_closure_calendar<'a, P: KernelProvider + ?Sized>(
    kernel: &'a P,
    calendar: Calendar,
    closures: &'a ClosureCalendar,
    opening: Option<&'a OpeningHours>,
) -> ClosureView<'a, P> {
    ClosureView::new(kernel, calendar, closures, opening)
}

impl<P: KernelProvider + ?Sized> KernelProvider for ClosureView<'_, P> {
    fn n_statuses(&self) -> StatusId {
        self.inner.n_statuses()
    }

    fn entry_status(&self) -> StatusId {
        self.inner.entry_status()
    }

    fn bind<'a>(&'a self, attrs: &ParcelAttrs) -> Box<dyn HopKernels + 'a> {
        self.wrap(self.inner.bind(attrs))
    }

    fn pooled<'a>(&'a self) -> Box<dyn HopKernels + 'a> {
        self.wrap(self.inner.pooled())
    }
}

struct ClosedHops<'a> {
    inner: Box<dyn HopKernels + 'a>,
    calendar: Calendar,
    closures: &'a ClosureCalendar,
    opening: Option<&'a OpeningHours>,
    shifted: &'a [StatusId],
}

impl HopKernels for ClosedHops<'_> {
    fn n_statuses(&self) -> StatusId {
        self.inner.n_statuses()
    }

    fn holding(&self, status: StatusId, entered: Slot) -> Result<Cow<'_, HoldingTimePmf>> {
        let base = self.inner.holding(status, entered)?;
        if !self.shifted.contains(&status) {
            return Ok(base);
        }
        let closed = |t: Slot| self.closures.is_closed(&self.calendar, t);
        let open = |t: Slot| {
            !closed(t)
                && self
                    .opening
                    .map_or(true, |o| o.is_open(&self.calendar, t))
        };
        Ok(Cow::Owned(shift_closed_mass(&base, entered, closed, open)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn cal() -> Calendar {
        Calendar::hourly(NaiveDate::from_ymd_opt(2024, 1, 1).unwrap())
    }

    fn pickup_kernel() -> TransitionKernel {
        let mut k = TransitionKernel::new(cal(), 4, 2).unwrap();
        let mut s = StatusKernel::new(vec![Feature::Weekday, Feature::Hour], 4);
        let specific = HoldingTimePmf::point_mass(1, 4).unwrap();
        let pooled = HoldingTimePmf::uniform(1, 4).unwrap();
        s.insert(
            ConditioningKey {
                weekday: Some(1),
                hour: Some(10),
                ..Default::default()
            },
            specific,
        )
        .unwrap();
        s.insert(ConditioningKey::default(), pooled).unwrap();
        k.set_status(3, s).unwrap();
        k
    }

    #[test]
    fn lookup_direct_and_fallback() {
        let k = pickup_kernel();
        let key = ConditioningKey {
            weekday: Some(1),
            hour: Some(10),
            ..Default::default()
        };
        assert_eq!(k.lookup(3, &key).unwrap().pmf(1), 1.0);
        let unseen = ConditioningKey {
            weekday: Some(2),
            hour: Some(10),
            ..Default::default()
        };
        assert_eq!(k.lookup(3, &unseen).unwrap().pmf(1), 0.25);
        assert!(matches!(
            k.lookup(4, &key),
            Err(Error::UnknownStatus { status: 4, .. })
        ));
        assert!(matches!(k.lookup(2, &key), Err(Error::MissingKernel { .. })));
    }

    #[test]
    fn missing_without_fallback() {
        let mut s = StatusKernel::new(vec![Feature::Carrier], 3);
        s.insert(
            ConditioningKey {
                carrier: Some("c1".into()),
                ..Default::default()
            },
            HoldingTimePmf::point_mass(2, 3).unwrap(),
        )
        .unwrap();
        assert!(s
            .lookup(&ConditioningKey {
                carrier: Some("c2".into()),
                ..Default::default()
            })
            .is_none());
    }

    #[test]
    fn insert_rejects_non_prefix_keys() {
        let mut s = StatusKernel::new(vec![Feature::Carrier, Feature::Weekday], 3);
        let bad = ConditioningKey {
            weekday: Some(1),
            ..Default::default()
        };
        assert!(s.insert(bad, HoldingTimePmf::point_mass(1, 3).unwrap()).is_err());
        let wrong_support = HoldingTimePmf::point_mass(1, 5).unwrap();
        assert!(s.insert(ConditioningKey::default(), wrong_support).is_err());
    }

    #[test]
    fn bound_kernel_uses_entry_slot() {
        let k = pickup_kernel();
        let b = k.bind(&ParcelAttrs::default());
        // slot 10 is Monday 10:00
        assert_eq!(b.holding(3, 10).unwrap().pmf(1), 1.0);
        assert_eq!(b.holding(3, 11).unwrap().pmf(1), 0.25);
        assert_eq!(b.holding(3, 10 + 168).unwrap().pmf(1), 1.0);
        assert!(b.holding(4, 10).is_err());
        assert!(b.holding(2, 10).is_err());
        let pooled = k.pooled();
        assert_eq!(pooled.holding(3, 10).unwrap().pmf(1), 0.25);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut k = pickup_kernel();
        let mut s = StatusKernel::new(vec![Feature::Carrier, Feature::Weekday], 5);
        s.insert(
            ConditioningKey::default(),
            HoldingTimePmf::from_weights(&[0.0, 1.0, 3.0, 7.0, 11.0, 13.0]).unwrap(),
        )
        .unwrap();
        k.set_status(2, s).unwrap();
        let json = k.to_json().unwrap();
        let back = TransitionKernel::from_json(&json).unwrap();
        assert_eq!(back, k);
        for ((_, _, a), (_, _, b)) in k.pmfs().zip(back.pmfs()) {
            let bits_a: Vec<u64> = a.probs().iter().map(|x| x.to_bits()).collect();
            let bits_b: Vec<u64> = b.probs().iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn closure_shift_moves_mass_to_next_open_slot() {
        // Delivered Saturday 2024-01-06 10:00 (slot 130); Sunday closed.
        let cal = cal();
        let sat10 = 5 * 24 + 10;
        let mut w = vec![0.0; 60];
        w[5] = 0.8;
        w[26] = 0.2; // Sunday 12:00
        let pmf = HoldingTimePmf::from_weights(&w).unwrap();
        let closures = ClosureCalendar::new([NaiveDate::from_ymd_opt(2024, 1, 7).unwrap()]);
        let oh = OpeningHours::shop_default();
        let out = shift_closed_mass(
            &pmf,
            sat10,
            |t| closures.is_closed(&cal, t),
            |t| !closures.is_closed(&cal, t) && oh.is_open(&cal, t),
        )
        .unwrap();
        // Monday 09:00 is slot 177, i.e. 47 slots after Saturday 10:00
        assert!((out.pmf(47) - 0.2).abs() < 1e-15);
        assert!((out.pmf(5) - 0.8).abs() < 1e-15);
        assert!((out.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fully_closed_support_forces_return() {
        let pmf = HoldingTimePmf::uniform(1, 5).unwrap();
        let out = shift_closed_mass(&pmf, 0, |_| true, |_| false).unwrap();
        assert!((out.pmf(5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closure_view_identity_without_closures() {
        let k = pickup_kernel();
        let none = ClosureCalendar::default();
        let view = apply_closure_calendar(&k, *k.calendar(), &none, None);
        let a = k.bind(&ParcelAttrs::default());
        let b = view.bind(&ParcelAttrs::default());
        for t in 0..200 {
            assert_eq!(a.holding(3, t).unwrap(), b.holding(3, t).unwrap());
        }
    }
}
