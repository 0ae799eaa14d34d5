//! Contribution probabilities of individual parcels and assembly of the load pmf.
//!
//! A parcel contributes to the load at `k + j` when it has been delivered at or
//! before `k + j` and not yet picked up. Given its current status and entry time,
//! the delivery time is propagated forward status by status as a distribution
//! over slots in `(k, k + j]`; the pickup survival is applied last.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::arrivals::{poisson_pmf, poisson_truncation, IntensitySource};
use crate::calendar::Slot;
use crate::error::{Error, Result};
use crate::estimation::SelectionModel;
use crate::kernel::{HopKernels, KernelProvider};
use crate::load::LoadPmf;
use crate::parcel::{ActiveParcel, ParcelAttrs, StatusId};

/// Probability that a parcel occupies the pickup point at the target slot.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContributionProb(f64);

impl ContributionProb {
    /// Clamps round-off just outside `[0, 1]`.
    pub fn new(p: f64) -> Self {
        Self(p.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Unnormalized distribution of an entry time: `probs[i]` is the mass at `start + i`.
#[derive(Debug, Clone)]
struct Arrivals {
    start: Slot,
    probs: Vec<f64>,
}

impl Arrivals {
    fn at(&self, t: Slot) -> f64 {
        usize::try_from(t - self.start)
            .ok()
            .and_then(|i| self.probs.get(i).copied())
            .unwrap_or(0.0)
    }

    fn iter(&self) -> impl Iterator<Item = (Slot, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, p)| (self.start + i as Slot, *p))
    }
}

fn check_status(hops: &dyn HopKernels, status: StatusId, max: StatusId) -> Result<()> {
    if status > max {
        return Err(Error::InvalidQuery(format!(
            "status {status} out of range for {} statuses",
            hops.n_statuses()
        )));
    }
    Ok(())
}

/// Leaving `status` (entered at `entered`) within `(k, end]`, together with
/// `P(leave after k)`.
fn first_hop(
    hops: &dyn HopKernels,
    status: StatusId,
    entered: Slot,
    k: Slot,
    end: Slot,
) -> Result<(Arrivals, f64)> {
    let pmf = hops.holding(status, entered)?;
    let start = k + 1;
    let probs = (start..=end).map(|t| pmf.pmf(t - entered)).collect();
    Ok((Arrivals { start, probs }, pmf.survival(k - entered)))
}

/// Entry-time distribution of `status + 1` given that of `status`, up to `end`.
fn advance(hops: &dyn HopKernels, status: StatusId, from: &Arrivals, end: Slot) -> Result<Arrivals> {
    let start = from.start + 1;
    let mut probs = vec![0.0; (end - start + 1).max(0) as usize];
    for (t, w) in from.iter() {
        let pmf = hops.holding(status, t)?;
        let last = end.min(t + pmf.support_max() as Slot);
        for u in t + 1..=last {
            probs[(u - start) as usize] += w * pmf.pmf(u - t);
        }
    }
    Ok(Arrivals { start, probs })
}

/// Mass delivered by `end` and still waiting at `end`.
fn still_waiting(hops: &dyn HopKernels, delivered: &Arrivals, end: Slot) -> Result<f64> {
    let last = hops.n_statuses() - 1;
    let mut total = 0.0;
    for (t, w) in delivered.iter() {
        if t > end {
            break;
        }
        total += w * hops.holding(last, t)?.survival(end - t);
    }
    Ok(total)
}

fn impossible(status: StatusId, entered: Slot, k: Slot) -> Error {
    Error::ImpossibleEvidence(format!(
        "status {status} entered at {entered} cannot still be held at {k}"
    ))
}

/// A delivered parcel: probability that it is still waiting `j` slots after `k`.
pub fn prob_still_stored(
    hops: &dyn HopKernels,
    t_delivered: Slot,
    k: Slot,
    j: Slot,
) -> Result<ContributionProb> {
    if t_delivered > k || j < 0 {
        return Err(Error::InvalidQuery(format!(
            "delivery at {t_delivered} after anchor {k} or negative horizon {j}"
        )));
    }
    let last = hops.n_statuses() - 1;
    let pmf = hops.holding(last, t_delivered)?;
    let den = pmf.survival(k - t_delivered);
    if den <= 0.0 {
        return Err(impossible(last, t_delivered, k));
    }
    Ok(ContributionProb::new(pmf.survival(k + j - t_delivered) / den))
}

/// A parcel in the last transit status: delivered within `(k, k + j]` and not
/// picked up by `k + j`.
///
/// Written as the product of the delivery probability within the horizon and
/// the probability of no pickup given such a delivery.
pub fn prob_delivered_and_stored_last_hop(
    hops: &dyn HopKernels,
    t_transit: Slot,
    k: Slot,
    j: Slot,
) -> Result<ContributionProb> {
    let n = hops.n_statuses();
    if n < 2 || t_transit > k || j < 0 {
        return Err(Error::InvalidQuery(format!(
            "transit entry {t_transit} after anchor {k} or bad horizon {j}"
        )));
    }
    let transit = hops.holding(n - 2, t_transit)?;
    let end = k + j;
    let den = transit.survival(k - t_transit);
    if den <= 0.0 {
        return Err(impossible(n - 2, t_transit, k));
    }
    let mut delivered = 0.0;
    let mut picked = 0.0;
    for t in k + 1..=end {
        let f = transit.pmf(t - t_transit);
        if f == 0.0 {
            continue;
        }
        delivered += f;
        picked += f * hops.holding(n - 1, t)?.cdf(end - t);
    }
    if delivered == 0.0 {
        return Ok(ContributionProb::new(0.0));
    }
    Ok(ContributionProb::new(
        (delivered / den) * (1.0 - picked / delivered),
    ))
}

/// Probability of leaving status `n` (entered at `t_n`) after `k` and reaching
/// the delivered status exactly at `t_target`, summed over intermediate times.
pub fn chain_prob_g(
    hops: &dyn HopKernels,
    n: StatusId,
    t_n: Slot,
    t_target: Slot,
    k: Slot,
) -> Result<f64> {
    let last = hops.n_statuses() - 1;
    if n >= last {
        return Err(Error::InvalidQuery(format!(
            "chain must start before the delivered status {last}, got {n}"
        )));
    }
    if t_target <= k {
        return Ok(0.0);
    }
    let (mut a, _) = first_hop(hops, n, t_n, k, t_target)?;
    for m in n + 1..last {
        a = advance(hops, m, &a, t_target)?;
    }
    Ok(a.at(t_target))
}

/// A parcel in any status up to the last transit status: delivered within
/// `(k, k + j]` and still waiting at `k + j`, given it has not left status `n` by `k`.
pub fn prob_delivered_and_stored_multi_hop(
    hops: &dyn HopKernels,
    n: StatusId,
    t_n: Slot,
    k: Slot,
    j: Slot,
) -> Result<ContributionProb> {
    let total = hops.n_statuses();
    if total < 2 {
        return Err(Error::InvalidQuery("need at least two statuses".into()));
    }
    check_status(hops, n, total - 2)?;
    if t_n > k || j < 0 {
        return Err(Error::InvalidQuery(format!(
            "entry {t_n} after anchor {k} or negative horizon {j}"
        )));
    }
    let end = k + j;
    let (mut a, den) = first_hop(hops, n, t_n, k, end)?;
    if den <= 0.0 {
        return Err(impossible(n, t_n, k));
    }
    for m in n + 1..total - 1 {
        a = advance(hops, m, &a, end)?;
    }
    Ok(ContributionProb::new(still_waiting(hops, &a, end)? / den))
}

/// An order entering `entry_status` at `t0` in `(k, k + j]`: probability that it
/// is waiting at the pickup point at `k + j`.
pub fn prob_future_order_contributes(
    hops: &dyn HopKernels,
    entry_status: StatusId,
    t0: Slot,
    k: Slot,
    j: Slot,
) -> Result<ContributionProb> {
    let total = hops.n_statuses();
    if total < 1 {
        return Err(Error::InvalidQuery("need at least one status".into()));
    }
    check_status(hops, entry_status, total - 1)?;
    let end = k + j;
    if t0 <= k || t0 > end {
        return Err(Error::InvalidQuery(format!(
            "order time {t0} outside ({k}, {end}]"
        )));
    }
    // each remaining hop to delivery takes at least one slot
    if t0 + Slot::from(total - 1 - entry_status) > end {
        return Ok(ContributionProb::new(0.0));
    }
    let mut a = Arrivals {
        start: t0,
        probs: vec![1.0],
    };
    for m in entry_status..total - 1 {
        a = advance(hops, m, &a, end)?;
    }
    Ok(ContributionProb::new(still_waiting(hops, &a, end)?))
}

/// Dispatches on the current status of a known parcel.
pub fn contribution_prob(
    hops: &dyn HopKernels,
    status: StatusId,
    entered: Slot,
    k: Slot,
    j: Slot,
) -> Result<ContributionProb> {
    let n = hops.n_statuses();
    match status {
        s if s >= n => Ok(ContributionProb::new(0.0)),
        s if s + 1 == n => prob_still_stored(hops, entered, k, j),
        s if s + 2 == n => prob_delivered_and_stored_last_hop(hops, entered, k, j),
        s => prob_delivered_and_stored_multi_hop(hops, s, entered, k, j),
    }
}

/// Count of orders `M ~ Poisson(lambda)`, each contributing independently with
/// probability `p`, truncated at the smallest `m` reaching `coverage`.
///
/// Returns the renormalized pmf and the Poisson mass kept before renormalization.
pub fn poisson_mixture(lambda: f64, p: f64, coverage: f64) -> (LoadPmf, f64) {
    let m_max = poisson_truncation(lambda, coverage);
    let step = LoadPmf::bernoulli(p);
    let mut binom = LoadPmf::zero();
    let mut out = vec![0.0; m_max as usize + 1];
    let mut kept = 0.0;
    for m in 0..=m_max {
        let w = poisson_pmf(m, lambda);
        kept += w;
        for (l, b) in binom.probs().iter().enumerate() {
            out[l] += w * b;
        }
        binom = binom.convolve(&step);
    }
    (LoadPmf::from_raw(out).renormalized(), kept)
}

/// Options of the load forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    /// Poisson cdf level at which the number of future orders per slot is truncated.
    pub coverage: f64,
    /// Pickup point attached to the attributes of future orders.
    pub pup: Option<String>,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            coverage: 0.99,
            pup: None,
        }
    }
}

type BoundCache<'a> = BTreeMap<ParcelAttrs, Box<dyn HopKernels + 'a>>;

fn bind_all<'a>(
    provider: &'a dyn KernelProvider,
    attrs: impl IntoIterator<Item = ParcelAttrs>,
) -> BoundCache<'a> {
    let mut cache = BoundCache::new();
    for a in attrs {
        if !cache.contains_key(&a) {
            let hops = provider.bind(&a);
            cache.insert(a, hops);
        }
    }
    cache
}

/// Future orders per slot `k + i`, `i` in `1..j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FutureOrders {
    pub pmf: LoadPmf,
    /// `(slot, lambda, p, kept Poisson mass)` for every slot with positive intensity.
    pub slots: Vec<(Slot, f64, f64, f64)>,
}

impl FutureOrders {
    /// Sum of `lambda * p` over slots, the mean without truncation.
    pub fn thinned_mean(&self) -> f64 {
        self.slots.iter().map(|(_, l, p, _)| l * p).sum()
    }
}

/// Retailer/carrier mixture weights for orders of one intensity component.
fn selection_weights(
    selection: &SelectionModel,
    carrier: Option<&str>,
) -> Vec<(Option<String>, Option<String>, f64)> {
    match carrier {
        Some(c) => selection
            .retailers_given_carrier(c)
            .into_iter()
            .map(|(r, w)| (r, Some(c.to_string()), w))
            .collect(),
        None => {
            let joint = selection.joint();
            if joint.is_empty() {
                vec![(None, None, 1.0)]
            } else {
                joint.into_iter().map(|(r, c, w)| (r, Some(c), w)).collect()
            }
        }
    }
}

/// Load pmf of orders not yet placed at `k`.
pub fn future_orders_pmf(
    provider: &dyn KernelProvider,
    intensity: &dyn IntensitySource,
    selection: &SelectionModel,
    k: Slot,
    j: Slot,
    cfg: &ForecastConfig,
) -> Result<FutureOrders> {
    if j < 1 {
        return Err(Error::InvalidQuery(format!("horizon {j} < 1")));
    }
    let attrs = |r: &Option<String>, c: &Option<String>| ParcelAttrs {
        retailer: r.clone(),
        carrier: c.clone(),
        pup: cfg.pup.clone(),
    };
    let mut plan = Vec::new();
    for i in 1..j {
        let t0 = k + i;
        let mut weights = Vec::new();
        let mut lambda = 0.0;
        for (c, l) in intensity.components(t0) {
            if l <= 0.0 {
                continue;
            }
            lambda += l;
            for (r, c, w) in selection_weights(selection, c.as_deref()) {
                weights.push((attrs(&r, &c), l * w));
            }
        }
        if lambda > 0.0 {
            plan.push((t0, lambda, weights));
        }
    }
    let cache = bind_all(
        provider,
        plan.iter().flat_map(|(_, _, w)| w.iter().map(|(a, _)| a.clone())),
    );
    let entry = provider.entry_status();
    let probs: Vec<Result<f64>> = crate::par_map(&plan, |(t0, lambda, weights)| {
        let mut acc = 0.0;
        for (a, w) in weights {
            acc += w * prob_future_order_contributes(cache[a].as_ref(), entry, *t0, k, j)?.value();
        }
        Ok((acc / lambda).clamp(0.0, 1.0))
    });
    let mut pmf = LoadPmf::zero();
    let mut slots = Vec::with_capacity(plan.len());
    for ((t0, lambda, _), p) in plan.iter().zip(probs) {
        let p = p?;
        let (mix, kept) = poisson_mixture(*lambda, p, cfg.coverage);
        pmf = pmf.convolve(&mix);
        slots.push((*t0, *lambda, p, kept));
    }
    Ok(FutureOrders {
        pmf: pmf.trimmed(),
        slots,
    })
}

/// Load forecast for one anchor and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadForecast {
    pub pmf: LoadPmf,
    /// `(parcel id, contribution probability)` for every known parcel.
    pub parcels: Vec<(String, f64)>,
    pub future: FutureOrders,
    pub diagnostics: Vec<String>,
}

/// Load pmf at `k + j` from the parcels known at `k` plus future orders.
///
/// A parcel whose history is impossible under its own kernels is evaluated with
/// the pooled kernels; if that also fails it is taken as already returned.
pub fn predict_load_pmf(
    provider: &dyn KernelProvider,
    parcels: &[ActiveParcel],
    intensity: &dyn IntensitySource,
    selection: &SelectionModel,
    k: Slot,
    j: Slot,
    cfg: &ForecastConfig,
) -> Result<LoadForecast> {
    if let Some(p) = parcels.iter().find(|p| p.entered > k) {
        return Err(Error::InvalidQuery(format!(
            "parcel {} entered status {} at {}, after anchor {k}",
            p.id, p.status, p.entered
        )));
    }
    let n = provider.n_statuses();
    let live: Vec<&ActiveParcel> = parcels.iter().filter(|p| p.status < n).collect();
    let cache = bind_all(provider, live.iter().map(|p| p.attrs.clone()));
    let pooled = provider.pooled();
    let results: Vec<Result<(f64, Option<String>)>> = crate::par_map(&live, |p| {
        match contribution_prob(cache[&p.attrs].as_ref(), p.status, p.entered, k, j) {
            Ok(c) => Ok((c.value(), None)),
            Err(Error::ImpossibleEvidence(why)) => {
                match contribution_prob(pooled.as_ref(), p.status, p.entered, k, j) {
                    Ok(c) => Ok((
                        c.value(),
                        Some(format!("parcel {}: {why}; used pooled kernels", p.id)),
                    )),
                    Err(Error::ImpossibleEvidence(_)) => Ok((
                        0.0,
                        Some(format!("parcel {}: {why}; treated as returned", p.id)),
                    )),
                    Err(e) => Err(e),
                }
            }
            Err(e) => Err(e),
        }
    });
    let mut pmf = LoadPmf::zero();
    let mut probs = Vec::with_capacity(live.len());
    let mut diagnostics = Vec::new();
    for (p, r) in live.iter().zip(results) {
        let (prob, diag) = r?;
        if let Some(d) = diag {
            log::debug!("{d}");
            diagnostics.push(d);
        }
        if prob > 0.0 {
            pmf = pmf.convolve(&LoadPmf::bernoulli(prob));
        }
        probs.push((p.id.clone(), prob));
    }
    let future = future_orders_pmf(provider, intensity, selection, k, j, cfg)?;
    let pmf = pmf.convolve(&future.pmf).trimmed();
    Ok(LoadForecast {
        pmf,
        parcels: probs,
        future,
        diagnostics,
    })
}

/// Serialized forecast for one pickup point, anchor and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub pup: String,
    pub k: Slot,
    pub j: Slot,
    pub pmf: LoadPmf,
    pub mean: f64,
    pub q05: usize,
    pub q50: usize,
    pub q95: usize,
    pub diagnostics: Vec<String>,
}

impl ForecastRecord {
    pub fn new(pup: impl Into<String>, k: Slot, j: Slot, forecast: LoadForecast) -> Result<Self> {
        let pmf = forecast.pmf;
        Ok(Self {
            pup: pup.into(),
            k,
            j,
            mean: pmf.mean(),
            q05: pmf.quantile(0.05)?,
            q50: pmf.quantile(0.5)?,
            q95: pmf.quantile(0.95)?,
            pmf,
            diagnostics: forecast.diagnostics,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrivals::ConstantIntensity;
    use crate::kernel::StaticKernels;
    use crate::pmf::HoldingTimePmf;

    fn uni(lo: usize, hi: usize) -> HoldingTimePmf {
        HoldingTimePmf::uniform(lo, hi).unwrap()
    }

    fn point(d: usize, support: usize) -> HoldingTimePmf {
        HoldingTimePmf::point_mass(d, support).unwrap()
    }

    #[test]
    fn still_stored_hand_case() {
        let k = StaticKernels::new(vec![uni(1, 4)]);
        let p = prob_still_stored(&k, 0, 1, 1).unwrap().value();
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
        // no pickup opportunity in (1, 3]
        let k = StaticKernels::new(vec![uni(5, 6)]);
        assert_eq!(prob_still_stored(&k, 0, 1, 2).unwrap().value(), 1.0);
    }

    #[test]
    fn still_stored_rejects_impossible_evidence() {
        let k = StaticKernels::new(vec![uni(1, 2)]);
        assert!(matches!(
            prob_still_stored(&k, 0, 2, 1),
            Err(Error::ImpossibleEvidence(_))
        ));
    }

    #[test]
    fn last_hop_certain_delivery_no_pickup() {
        let k = StaticKernels::new(vec![point(1, 3), point(5, 6)]);
        let p = prob_delivered_and_stored_last_hop(&k, 10, 10, 2).unwrap().value();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn last_hop_uniform_by_hand() {
        // delivery at k+1 or k+2 (1/2 each), pickup 1 or 2 slots later
        // still there at k+2: delivered k+1 and pickup delay 2 (1/4), or delivered k+2 (1/2)
        let k = StaticKernels::new(vec![uni(1, 2), uni(1, 2)]);
        let p = prob_delivered_and_stored_last_hop(&k, 0, 0, 2).unwrap().value();
        assert!((p - 0.75).abs() < 1e-15);
    }

    #[test]
    fn chain_examples() {
        let single = StaticKernels::new(vec![uni(1, 3), uni(1, 2)]);
        for t in 1..5 {
            assert_eq!(chain_prob_g(&single, 0, 0, t, 0).unwrap(), uni(1, 3).pmf(t));
        }
        let det = StaticKernels::new(vec![point(1, 2), point(1, 2), uni(1, 2)]);
        assert_eq!(chain_prob_g(&det, 0, 5, 7, 5).unwrap(), 1.0);
        assert_eq!(chain_prob_g(&det, 0, 5, 8, 5).unwrap(), 0.0);
        let two = StaticKernels::new(vec![uni(1, 2), uni(1, 2), uni(1, 2)]);
        let g: Vec<f64> = (2..=4).map(|t| chain_prob_g(&two, 0, 0, t, 0).unwrap()).collect();
        assert_eq!(g, vec![0.25, 0.5, 0.25]);
        assert_eq!(chain_prob_g(&two, 0, 0, 1, 0).unwrap(), 0.0);
    }

    #[test]
    fn multi_hop_deterministic_chain() {
        // N = 5: statuses 0..=4 have pmfs, 5 absorbing; pickup far beyond the horizon
        let k = StaticKernels::new(vec![
            point(1, 2),
            point(1, 2),
            point(1, 2),
            point(1, 2),
            point(20, 20),
        ]);
        let p = prob_delivered_and_stored_multi_hop(&k, 1, 10, 10, 4).unwrap();
        assert_eq!(p.value(), 1.0);
    }

    #[test]
    fn multi_hop_impossible_evidence() {
        let k = StaticKernels::new(vec![uni(1, 2), uni(1, 2), uni(1, 2), uni(1, 2)]);
        assert!(matches!(
            prob_delivered_and_stored_multi_hop(&k, 1, 0, 5, 3),
            Err(Error::ImpossibleEvidence(_))
        ));
    }

    #[test]
    fn multi_hop_degenerates_to_last_hop() {
        let k = StaticKernels::new(vec![uni(1, 3), uni(2, 5), uni(1, 4)]);
        for j in 0..10 {
            let a = prob_delivered_and_stored_multi_hop(&k, 1, 3, 4, j).unwrap().value();
            let b = prob_delivered_and_stored_last_hop(&k, 3, 4, j).unwrap().value();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn future_order_examples() {
        let k = StaticKernels::new(vec![uni(1, 2), uni(1, 2), uni(1, 2), uni(1, 2)]);
        assert_eq!(prob_future_order_contributes(&k, 0, 8, 0, 8).unwrap().value(), 0.0);
        let det = StaticKernels::new(vec![point(1, 2), point(1, 2), point(1, 2), point(9, 9)]);
        assert_eq!(prob_future_order_contributes(&det, 0, 1, 0, 4).unwrap().value(), 1.0);
        assert!(prob_future_order_contributes(&det, 0, 0, 0, 4).is_err());
    }

    #[test]
    fn poisson_mixture_keeps_coverage() {
        for &lambda in &[0.3, 1.0, 5.0, 17.5] {
            let (mix, kept) = poisson_mixture(lambda, 0.4, 0.99);
            assert!(kept >= 0.99);
            assert!((mix.total_mass() - 1.0).abs() < 1e-12);
        }
        let (mix, kept) = poisson_mixture(0.0, 0.4, 0.99);
        assert_eq!(mix, LoadPmf::zero());
        assert_eq!(kept, 1.0);
    }

    #[test]
    fn zero_intensity_gives_point_mass() {
        let k = StaticKernels::new(vec![uni(1, 2), uni(1, 2)]);
        let f = future_orders_pmf(
            &k,
            &ConstantIntensity(0.0),
            &SelectionModel::default(),
            0,
            10,
            &ForecastConfig::default(),
        )
        .unwrap();
        assert_eq!(f.pmf, LoadPmf::zero());
        let none = predict_load_pmf(
            &k,
            &[],
            &ConstantIntensity(0.0),
            &SelectionModel::default(),
            0,
            10,
            &ForecastConfig::default(),
        )
        .unwrap();
        assert_eq!(none.pmf, LoadPmf::zero());
    }

    #[test]
    fn thinning_identity() {
        let k = StaticKernels::new(vec![uni(1, 3), uni(1, 4)]);
        let cfg = ForecastConfig {
            coverage: 1.0 - 1e-14,
            ..Default::default()
        };
        let f = future_orders_pmf(
            &k,
            &ConstantIntensity(2.5),
            &SelectionModel::default(),
            0,
            6,
            &cfg,
        )
        .unwrap();
        let expected: f64 = (1..6)
            .map(|i| 2.5 * prob_future_order_contributes(&k, 0, i, 0, 6).unwrap().value())
            .sum();
        assert!((f.pmf.mean() - expected).abs() < 1e-6);
        assert!((f.thinned_mean() - expected).abs() < 1e-12);
    }

    #[test]
    fn two_delivered_parcels() {
        let k = StaticKernels::new(vec![uni(1, 2), uni(1, 2)]);
        let parcels: Vec<ActiveParcel> = (0..2)
            .map(|i| ActiveParcel {
                id: format!("p{i}"),
                attrs: ParcelAttrs::default(),
                status: 1,
                entered: 0,
            })
            .collect();
        // delivered at 0, still there at 0: survival(1)/survival(0) = 1/2
        let f = predict_load_pmf(
            &k,
            &parcels,
            &ConstantIntensity(0.0),
            &SelectionModel::default(),
            0,
            1,
            &ForecastConfig::default(),
        )
        .unwrap();
        assert_eq!(f.pmf.probs(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn impossible_parcel_is_downgraded() {
        let k = StaticKernels::new(vec![uni(1, 2), uni(1, 2)]);
        let stale = ActiveParcel {
            id: "old".into(),
            attrs: ParcelAttrs::default(),
            status: 1,
            entered: 0,
        };
        let f = predict_load_pmf(
            &k,
            &[stale],
            &ConstantIntensity(0.0),
            &SelectionModel::default(),
            5,
            1,
            &ForecastConfig::default(),
        )
        .unwrap();
        assert_eq!(f.pmf, LoadPmf::zero());
        assert_eq!(f.diagnostics.len(), 1);
    }

    #[test]
    fn record_json_fields() {
        let k = StaticKernels::new(vec![uni(1, 2), uni(1, 2)]);
        let f = predict_load_pmf(
            &k,
            &[],
            &ConstantIntensity(1.0),
            &SelectionModel::default(),
            0,
            5,
            &ForecastConfig::default(),
        )
        .unwrap();
        let rec = ForecastRecord::new("pup", 0, 5, f).unwrap();
        let v: serde_json::Value = serde_json::to_value(&rec).unwrap();
        for key in ["pup", "k", "j", "pmf", "mean", "q05", "q50", "q95", "diagnostics"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(rec.q05 <= rec.q50 && rec.q50 <= rec.q95);
    }
}
