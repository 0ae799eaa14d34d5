//! Brute-force references for contribution probabilities: exhaustive path
//! enumeration and conditional Monte Carlo by rejection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calendar::Slot;
use crate::engine::{contribution_prob, prob_future_order_contributes};
use crate::error::{Error, Result};
use crate::kernel::{HopKernels, PeriodicKernels};
use crate::parcel::StatusId;
use crate::pmf::HoldingTimePmf;
use crate::sim::{child_seed, rng_from_seed, sample_holding};

/// Largest number of paths [`enumerate_contribution_prob`] will visit.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// Smallest acceptance rate tolerated by [`mc_contribution_prob`].
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// Smallest sample size for [`mc_contribution_prob`].
pub const MIN_SAMPLES: u64 = 10_000;

/// What is known about a parcel at the anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    /// In `status` since `entered` and still there at the anchor.
    Known { status: StatusId, entered: Slot },
    /// An order entering `entry_status` at `t0`, after the anchor.
    FutureOrder { entry_status: StatusId, t0: Slot },
}

impl Evidence {
    fn start(self) -> (StatusId, Slot) {
        match self {
            Evidence::Known { status, entered } => (status, entered),
            Evidence::FutureOrder { entry_status, t0 } => (entry_status, t0),
        }
    }

    fn conditioned(self) -> bool {
        matches!(self, Evidence::Known { .. })
    }
}

/// Closed-form value for the same evidence, dispatching like the forecaster.
pub fn closed_form(hops: &dyn HopKernels, evidence: Evidence, k: Slot, j: Slot) -> Result<f64> {
    match evidence {
        Evidence::Known { status, entered } => {
            contribution_prob(hops, status, entered, k, j).map(|p| p.value())
        }
        Evidence::FutureOrder { entry_status, t0 } => {
            prob_future_order_contributes(hops, entry_status, t0, k, j).map(|p| p.value())
        }
    }
}

struct Enumeration<'a> {
    hops: &'a dyn HopKernels,
    end: Slot,
    paths: u64,
    /// Mass of paths satisfying the evidence.
    evidence: f64,
    /// Mass of paths satisfying the evidence and occupying the pickup point at `end`.
    hit: f64,
}

impl Enumeration<'_> {
    /// Visits every continuation from `status` entered at `t` with path weight `w`.
    fn visit(&mut self, status: StatusId, t: Slot, w: f64, delivered: Option<Slot>) -> Result<()> {
        let n = self.hops.n_statuses();
        if status == n {
            self.paths += 1;
            if self.paths > ENUMERATION_LIMIT {
                return Err(Error::TooLarge {
                    paths: self.paths,
                    limit: ENUMERATION_LIMIT,
                });
            }
            if delivered.is_some_and(|d| d <= self.end) && t > self.end {
                self.hit += w;
            }
            return Ok(());
        }
        let pmf = self.hops.holding(status, t)?;
        for (d, &p) in pmf.probs().iter().enumerate() {
            if p > 0.0 {
                let next = t + d as Slot;
                let delivered = if status + 1 == n - 1 { Some(next) } else { delivered };
                self.visit(status + 1, next, w * p, delivered)?;
            }
        }
        Ok(())
    }
}

/// Exact contribution probability by summing the probability of every path of
/// holding times. Known parcels are conditioned on not having left their status by `k`.
pub fn enumerate_contribution_prob(
    hops: &dyn HopKernels,
    evidence: Evidence,
    k: Slot,
    j: Slot,
) -> Result<f64> {
    let n = hops.n_statuses();
    let (status, entered) = evidence.start();
    if status >= n {
        return Ok(0.0);
    }
    let mut e = Enumeration {
        hops,
        end: k + j,
        paths: 0,
        evidence: 0.0,
        hit: 0.0,
    };
    let delivered = (status == n - 1).then_some(entered);
    if !evidence.conditioned() {
        e.evidence = 1.0;
        e.visit(status, entered, 1.0, delivered)?;
        return Ok(e.hit);
    }
    let pmf = hops.holding(status, entered)?;
    for (d, &p) in pmf.probs().iter().enumerate() {
        let next = entered + d as Slot;
        if p > 0.0 && next > k {
            e.evidence += p;
            let delivered = if status + 1 == n - 1 { Some(next) } else { delivered };
            e.visit(status + 1, next, p, delivered)?;
        }
    }
    if e.evidence <= 0.0 {
        return Err(Error::ImpossibleEvidence(format!(
            "status {status} entered at {entered} cannot still be held at {k}"
        )));
    }
    Ok(e.hit / e.evidence)
}

/// Monte Carlo estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub p: f64,
    pub stderr: f64,
    pub accepted: u64,
    pub attempts: u64,
}

impl McEstimate {
    /// Whether `value` lies within `z` standard errors of the estimate.
    pub fn brackets(&self, value: f64, z: f64) -> bool {
        (value - self.p).abs() <= z * self.stderr + 1e-12
    }
}

/// One simulated path: `(accepted, occupies at end)`.
fn sample_path<R: Rng + ?Sized>(
    rng: &mut R,
    hops: &dyn HopKernels,
    evidence: Evidence,
    k: Slot,
    end: Slot,
) -> Result<(bool, bool)> {
    let n = hops.n_statuses();
    let (status, entered) = evidence.start();
    let mut t = entered;
    let mut delivered = (status == n - 1).then_some(entered);
    for s in status..n {
        t += sample_holding(rng, &*hops.holding(s, t)?);
        if s == status && evidence.conditioned() && t <= k {
            return Ok((false, false));
        }
        if s + 1 == n - 1 {
            delivered = Some(t);
        }
    }
    Ok((true, delivered.is_some_and(|d| d <= end) && t > end))
}

/// Conditional Monte Carlo estimate from `n_samples` accepted paths.
///
/// Paths violating the evidence are rejected; the run fails with
/// `ConditioningTooRare` when the acceptance rate falls below [`MIN_ACCEPTANCE`].
/// Work is split into chunks seeded by `child_seed(seed, chunk)`.
pub fn mc_contribution_prob(
    hops: &dyn HopKernels,
    evidence: Evidence,
    k: Slot,
    j: Slot,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidQuery(format!(
            "need at least {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    let (status, _) = evidence.start();
    if status >= hops.n_statuses() {
        return Ok(McEstimate {
            p: 0.0,
            stderr: 0.0,
            accepted: n_samples,
            attempts: n_samples,
        });
    }
    const CHUNKS: u64 = 16;
    // attempts after which the empirical acceptance rate is trusted
    const PROBE: u64 = 100_000;
    let chunks: Vec<u64> = (0..CHUNKS).collect();
    let end = k + j;
    let parts: Vec<Result<(u64, u64, u64)>> = crate::par_map(&chunks, |&c| {
        let target = n_samples / CHUNKS + u64::from(c < n_samples % CHUNKS);
        let max_attempts = (target as f64 / MIN_ACCEPTANCE).ceil() as u64;
        let mut rng = rng_from_seed(child_seed(seed, c));
        let (mut accepted, mut hits, mut attempts) = (0u64, 0u64, 0u64);
        while accepted < target {
            let rare = attempts >= PROBE && (accepted as f64) < attempts as f64 * MIN_ACCEPTANCE;
            if rare || attempts >= max_attempts {
                return Err(Error::ConditioningTooRare {
                    rate: accepted as f64 / attempts as f64,
                    attempts,
                });
            }
            attempts += 1;
            let (ok, hit) = sample_path(&mut rng, hops, evidence, k, end)?;
            accepted += u64::from(ok);
            hits += u64::from(ok && hit);
        }
        Ok((accepted, hits, attempts))
    });
    let (mut accepted, mut hits, mut attempts) = (0, 0, 0);
    for part in parts {
        let (a, h, t) = part?;
        accepted += a;
        hits += h;
        attempts += t;
    }
    let p = hits as f64 / accepted as f64;
    Ok(McEstimate {
        p,
        stderr: (p * (1.0 - p) / accepted as f64).sqrt(),
        accepted,
        attempts,
    })
}

/// Which closed form a random instance exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Delivered,
    LastHop,
    MultiHop,
    FutureOrder,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 4] = [
        InstanceKind::Delivered,
        InstanceKind::LastHop,
        InstanceKind::MultiHop,
        InstanceKind::FutureOrder,
    ];
}

/// A small time-inhomogeneous system with one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub kind: InstanceKind,
    pub kernels: PeriodicKernels,
    pub evidence: Evidence,
    pub k: Slot,
    pub j: Slot,
}

fn random_pmf<R: Rng + ?Sized>(rng: &mut R, max_support: usize) -> HoldingTimePmf {
    let support = rng.gen_range(1..=max_support);
    loop {
        let mut w = vec![0.0; support + 1];
        for x in w.iter_mut().skip(1) {
            if rng.gen_bool(0.75) {
                *x = rng.gen_range(0.05..1.0);
            }
        }
        if let Ok(p) = HoldingTimePmf::from_weights(&w) {
            return p;
        }
    }
}

/// Random instance of `kind`: at most 5 statuses with pmfs, supports at most
/// `max_support`, pmfs cycling with the entry slot over periods of 1 to 3, and
/// horizons `j` in `1..=12`. Known parcels always have positive evidence mass.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    kind: InstanceKind,
    max_support: usize,
) -> Instance {
    let min_n = match kind {
        InstanceKind::Delivered => 1,
        InstanceKind::LastHop => 2,
        InstanceKind::MultiHop => 3,
        InstanceKind::FutureOrder => 2,
    };
    loop {
        let n = rng.gen_range(min_n..=5usize);
        let table: Vec<Vec<HoldingTimePmf>> = (0..n)
            .map(|_| {
                let period = rng.gen_range(1..=3);
                (0..period).map(|_| random_pmf(rng, max_support)).collect()
            })
            .collect();
        let kernels = PeriodicKernels::new(table).expect("non-empty cycles");
        let k: Slot = rng.gen_range(10..20);
        let j: Slot = rng.gen_range(1..=12);
        let n_st = n as StatusId;
        let evidence = match kind {
            InstanceKind::FutureOrder => Evidence::FutureOrder {
                entry_status: rng.gen_range(0..n_st - 1),
                t0: k + rng.gen_range(1..=j),
            },
            _ => {
                let status = match kind {
                    InstanceKind::Delivered => n_st - 1,
                    InstanceKind::LastHop => n_st - 2,
                    _ => rng.gen_range(0..n_st - 2),
                };
                Evidence::Known {
                    status,
                    entered: k - rng.gen_range(0..max_support as Slot),
                }
            }
        };
        if let Evidence::Known { status, entered } = evidence {
            let pmf = kernels.holding(status, entered).expect("status in range");
            if pmf.survival(k - entered) <= 0.0 {
                continue;
            }
        }
        return Instance {
            kind,
            kernels,
            evidence,
            k,
            j,
        };
    }
}

/// Seeded batch of instances cycling through every kind.
pub fn random_instances(count: usize, max_support: usize, seed: u64) -> Vec<Instance> {
    (0..count)
        .map(|i| {
            let mut rng = rng_from_seed(child_seed(seed, i as u64));
            random_instance(&mut rng, InstanceKind::ALL[i % 4], max_support)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::StaticKernels;

    fn uni(lo: usize, hi: usize) -> HoldingTimePmf {
        HoldingTimePmf::uniform(lo, hi).unwrap()
    }

    #[test]
    fn single_hop_partial_sums() {
        let k = StaticKernels::new(vec![uni(1, 4)]);
        let ev = Evidence::Known {
            status: 0,
            entered: 0,
        };
        let p = enumerate_contribution_prob(&k, ev, 1, 1).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn infeasible_future_order_is_zero() {
        let k = StaticKernels::new(vec![uni(1, 2), uni(1, 2), uni(1, 2)]);
        let ev = Evidence::FutureOrder {
            entry_status: 0,
            t0: 5,
        };
        assert_eq!(enumerate_contribution_prob(&k, ev, 3, 3).unwrap(), 0.0);
    }

    #[test]
    fn two_hop_matches_closed_form() {
        let k = StaticKernels::new(vec![uni(1, 2), uni(1, 2)]);
        let ev = Evidence::Known {
            status: 0,
            entered: 0,
        };
        let e = enumerate_contribution_prob(&k, ev, 0, 2).unwrap();
        let c = closed_form(&k, ev, 0, 2).unwrap();
        assert!((e - c).abs() < 1e-12);
        assert!((e - 0.75).abs() < 1e-15);
    }

    #[test]
    fn enumeration_limit() {
        let wide = HoldingTimePmf::uniform(1, 40).unwrap();
        let k = StaticKernels::new(vec![wide.clone(), wide.clone(), wide.clone(), wide.clone(), wide]);
        let ev = Evidence::Known {
            status: 0,
            entered: 0,
        };
        assert!(matches!(
            enumerate_contribution_prob(&k, ev, 0, 5),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn deterministic_monte_carlo_is_exact() {
        let k = StaticKernels::new(vec![
            HoldingTimePmf::point_mass(1, 1).unwrap(),
            HoldingTimePmf::point_mass(3, 3).unwrap(),
        ]);
        let ev = Evidence::Known {
            status: 0,
            entered: 0,
        };
        let est = mc_contribution_prob(&k, ev, 0, 2, 10_000, 1).unwrap();
        assert_eq!(est.p, 1.0);
        assert_eq!(est.stderr, 0.0);
        let est = mc_contribution_prob(&k, ev, 0, 5, 10_000, 1).unwrap();
        assert_eq!(est.p, 0.0);
    }

    #[test]
    fn rare_conditioning_is_reported() {
        let mut w = vec![0.0; 6];
        w[1] = 1.0 - 1e-7;
        w[5] = 1e-7;
        let k = StaticKernels::new(vec![HoldingTimePmf::new(w).unwrap()]);
        let ev = Evidence::Known {
            status: 0,
            entered: 0,
        };
        assert!(matches!(
            mc_contribution_prob(&k, ev, 3, 1, 10_000, 1),
            Err(Error::ConditioningTooRare { .. })
        ));
        assert!(mc_contribution_prob(&k, ev, 3, 1, 100, 1).is_err());
    }

    #[test]
    fn monte_carlo_hand_case() {
        let k = StaticKernels::new(vec![uni(1, 4)]);
        let ev = Evidence::Known {
            status: 0,
            entered: 0,
        };
        let est = mc_contribution_prob(&k, ev, 1, 1, 100_000, 9).unwrap();
        assert!(est.brackets(2.0 / 3.0, 3.0), "{est:?}");
    }

    #[test]
    fn instances_have_valid_evidence() {
        for inst in random_instances(80, 6, 3) {
            let n = inst.kernels.n_statuses();
            assert!(n <= 5 && inst.j <= 12);
            assert!(inst.kernels.table().iter().flatten().all(|p| p.support_max() <= 6));
            let e = enumerate_contribution_prob(&inst.kernels, inst.evidence, inst.k, inst.j);
            assert!(e.is_ok(), "{inst:?}");
        }
    }
}
