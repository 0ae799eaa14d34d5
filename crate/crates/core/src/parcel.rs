//! Parcel records and event logs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::calendar::Slot;
use crate::error::{Error, Result};

/// Status index in the life cycle: 0 is order confirmed, `N-1` delivered, `N` picked up.
pub type StatusId = u32;

/// Context features a holding-time pmf may be conditioned on, besides the entry time.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParcelAttrs {
    pub retailer: Option<String>,
    pub carrier: Option<String>,
    pub pup: Option<String>,
}

impl ParcelAttrs {
    pub fn carrier(carrier: impl Into<String>) -> Self {
        Self {
            carrier: Some(carrier.into()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParcelRecord {
    pub id: String,
    pub retailer: Option<String>,
    pub carrier: String,
    pub pup: String,
    entries: BTreeMap<StatusId, Slot>,
}

impl ParcelRecord {
    /// Entry times must strictly increase with the status index.
    pub fn new(
        id: impl Into<String>,
        retailer: Option<String>,
        carrier: impl Into<String>,
        pup: impl Into<String>,
        entries: BTreeMap<StatusId, Slot>,
    ) -> Result<Self> {
        let rec = Self {
            id: id.into(),
            retailer,
            carrier: carrier.into(),
            pup: pup.into(),
            entries,
        };
        rec.validate()?;
        Ok(rec)
    }

    fn validate(&self) -> Result<()> {
        let mut prev: Option<(StatusId, Slot)> = None;
        for (&n, &t) in &self.entries {
            if let Some((pn, pt)) = prev {
                if t <= pt {
                    return Err(Error::InvalidRecord {
                        parcel: self.id.clone(),
                        reason: format!("status {n} entered at {t}, not after status {pn} at {pt}"),
                    });
                }
            }
            prev = Some((n, t));
        }
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<StatusId, Slot> {
        &self.entries
    }

    pub fn entry(&self, status: StatusId) -> Option<Slot> {
        self.entries.get(&status).copied()
    }

    /// Records entry into `status`; fails if the ordering invariant would break.
    pub fn set_entry(&mut self, status: StatusId, at: Slot) -> Result<()> {
        let old = self.entries.insert(status, at);
        if let Err(e) = self.validate() {
            match old {
                Some(t) => self.entries.insert(status, t),
                None => self.entries.remove(&status),
            };
            return Err(e);
        }
        Ok(())
    }

    pub fn attrs(&self) -> ParcelAttrs {
        ParcelAttrs {
            retailer: self.retailer.clone(),
            carrier: Some(self.carrier.clone()),
            pup: Some(self.pup.clone()),
        }
    }

    /// Latest status entered at or before `k`, with its entry time.
    pub fn status_at(&self, k: Slot) -> Option<(StatusId, Slot)> {
        self.entries
            .iter()
            .rev()
            .find(|(_, &t)| t <= k)
            .map(|(&n, &t)| (n, t))
    }

    /// Copy keeping only events at or before `cutoff`; `None` if nothing is visible.
    pub fn visible_at(&self, cutoff: Slot) -> Option<Self> {
        let entries: BTreeMap<_, _> = self
            .entries
            .iter()
            .filter(|(_, &t)| t <= cutoff)
            .map(|(&n, &t)| (n, t))
            .collect();
        if entries.is_empty() {
            return None;
        }
        Some(Self {
            entries,
            ..self.clone()
        })
    }
}

/// A parcel whose status is known at the forecast anchor and which may still
/// contribute to the load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveParcel {
    pub id: String,
    pub attrs: ParcelAttrs,
    pub status: StatusId,
    pub entered: Slot,
}

/// Parcel records as visible at `cutoff`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLog {
    rows: Vec<ParcelRecord>,
    cutoff: Slot,
}

impl EventLog {
    pub fn new(rows: Vec<ParcelRecord>, cutoff: Slot) -> Result<Self> {
        if let Some(r) = rows
            .iter()
            .find(|r| r.entries.values().any(|&t| t > cutoff))
        {
            return Err(Error::InvalidRecord {
                parcel: r.id.clone(),
                reason: format!("event after observation cutoff {cutoff}"),
            });
        }
        Ok(Self { rows, cutoff })
    }

    /// Cutoff set to the latest event time.
    pub fn from_rows(rows: Vec<ParcelRecord>) -> Self {
        let cutoff = rows
            .iter()
            .flat_map(|r| r.entries.values().copied())
            .max()
            .unwrap_or(0);
        Self { rows, cutoff }
    }

    pub fn rows(&self) -> &[ParcelRecord] {
        &self.rows
    }

    pub fn cutoff(&self) -> Slot {
        self.cutoff
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// The log as it would have been observed at an earlier `cutoff`.
    pub fn visible_at(&self, cutoff: Slot) -> Self {
        let cutoff = cutoff.min(self.cutoff);
        Self {
            rows: self
                .rows
                .iter()
                .filter_map(|r| r.visible_at(cutoff))
                .collect(),
            cutoff,
        }
    }

    pub fn for_pup(&self, pup: &str) -> Self {
        Self {
            rows: self.rows.iter().filter(|r| r.pup == pup).cloned().collect(),
            cutoff: self.cutoff,
        }
    }

    /// Parcels with a known status at `k` that have not reached the absorbing status.
    pub fn active_at(&self, k: Slot, n_statuses: StatusId) -> Vec<ActiveParcel> {
        self.rows
            .iter()
            .filter_map(|r| {
                let (status, entered) = r.status_at(k)?;
                (status < n_statuses).then(|| ActiveParcel {
                    id: r.id.clone(),
                    attrs: r.attrs(),
                    status,
                    entered,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(entries: &[(StatusId, Slot)]) -> Result<ParcelRecord> {
        ParcelRecord::new(
            "p1",
            None,
            "c1",
            "pup",
            entries.iter().copied().collect(),
        )
    }

    #[test]
    fn rejects_non_increasing_entries() {
        assert!(rec(&[(2, 5), (3, 5)]).is_err());
        assert!(rec(&[(2, 5), (3, 4)]).is_err());
        assert!(rec(&[(2, 5), (4, 9)]).is_ok());
        let mut r = rec(&[(2, 5)]).unwrap();
        assert!(r.set_entry(3, 3).is_err());
        assert_eq!(r.entry(3), None);
    }

    #[test]
    fn status_lookup_and_truncation() {
        let r = rec(&[(2, 5), (3, 30), (4, 40)]).unwrap();
        assert_eq!(r.status_at(4), None);
        assert_eq!(r.status_at(29), Some((2, 5)));
        assert_eq!(r.status_at(30), Some((3, 30)));
        let v = r.visible_at(35).unwrap();
        assert_eq!(v.entry(4), None);
        assert!(r.visible_at(1).is_none());
    }

    #[test]
    fn log_cutoff_invariant() {
        let r = rec(&[(2, 5), (3, 30)]).unwrap();
        assert!(EventLog::new(vec![r.clone()], 20).is_err());
        let log = EventLog::new(vec![r], 30).unwrap();
        let early = log.visible_at(10);
        assert_eq!(early.cutoff(), 10);
        assert_eq!(early.rows()[0].entry(3), None);
        assert_eq!(log.active_at(31, 4).len(), 1);
        assert_eq!(log.active_at(31, 3).len(), 0);
    }
}
