//! Holding-time distributions: pmfs over the number of slots spent in a status.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a stored holding-time pmf.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Dense pmf over holding times `0..=support_max` slots.
///
/// `probs[0]` is always zero: a transition takes at least one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct HoldingTimePmf {
    probs: Vec<f64>,
    cdf: Vec<f64>,
    /// `tail[i] = P(H > i)`, accumulated from the top so it is exactly zero past the support.
    tail: Vec<f64>,
}

impl HoldingTimePmf {
    /// Validates and wraps raw probabilities indexed by holding time.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidPmf("support_max must be at least 1".into()));
        }
        if probs[0] != 0.0 {
            return Err(Error::InvalidPmf(format!(
                "mass at zero delay must be 0, got {}",
                probs[0]
            )));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidPmf(format!("entry {i} is {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidPmf(format!("total mass {total} is not 1")));
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let mut tail = vec![0.0; probs.len()];
        for i in (0..probs.len() - 1).rev() {
            tail[i] = tail[i + 1] + probs[i + 1];
        }
        Ok(Self { probs, cdf, tail })
    }

    /// Normalizes non-negative weights over `1..=support_max` (index 0 is ignored).
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().skip(1).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidPmf("weights carry no mass".into()));
        }
        let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        probs[0] = 0.0;
        Self::new(probs)
    }

    /// Empirical pmf from holding-time observations.
    ///
    /// Observations beyond `support_max` are dropped and the remainder renormalized;
    /// the dropped fraction is returned alongside. `alpha` adds Laplace pseudo-counts
    /// to every holding time in `1..=support_max`.
    pub fn from_observations(
        delays: impl IntoIterator<Item = i64>,
        support_max: usize,
        alpha: f64,
    ) -> Result<(Self, f64)> {
        let mut counts = vec![0.0; support_max + 1];
        let mut total = 0usize;
        let mut dropped = 0usize;
        for d in delays {
            total += 1;
            if d < 1 {
                return Err(Error::InvalidPmf(format!("observed holding time {d} < 1")));
            }
            match counts.get_mut(d as usize) {
                Some(c) => *c += 1.0,
                None => dropped += 1,
            }
        }
        if total == dropped && alpha <= 0.0 {
            return Err(Error::InvalidPmf("no observation within support".into()));
        }
        for c in counts.iter_mut().skip(1) {
            *c += alpha;
        }
        let frac = if total == 0 {
            0.0
        } else {
            dropped as f64 / total as f64
        };
        Ok((Self::from_weights(&counts)?, frac))
    }

    /// All mass on holding time `delay`.
    pub fn point_mass(delay: usize, support_max: usize) -> Result<Self> {
        if delay == 0 || delay > support_max {
            return Err(Error::InvalidPmf(format!(
                "point mass at {delay} outside 1..={support_max}"
            )));
        }
        let mut probs = vec![0.0; support_max + 1];
        probs[delay] = 1.0;
        Self::new(probs)
    }

    /// Uniform over `lo..=hi`.
    pub fn uniform(lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(Error::InvalidPmf(format!("bad uniform range {lo}..={hi}")));
        }
        let mut w = vec![0.0; hi + 1];
        for x in &mut w[lo..=hi] {
            *x = 1.0;
        }
        Self::from_weights(&w)
    }

    pub fn support_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `P(H = delay)`; zero outside the support.
    pub fn pmf(&self, delay: i64) -> f64 {
        if delay < 0 {
            return 0.0;
        }
        self.probs.get(delay as usize).copied().unwrap_or(0.0)
    }

    /// `P(H <= delay)`.
    pub fn cdf(&self, delay: i64) -> f64 {
        if delay < 0 {
            return 0.0;
        }
        match self.cdf.get(delay as usize) {
            Some(c) => *c,
            None => *self.cdf.last().expect("non-empty"),
        }
    }

    /// `P(H > delay)`.
    pub fn survival(&self, delay: i64) -> f64 {
        if delay < 0 {
            return 1.0;
        }
        self.tail.get(delay as usize).copied().unwrap_or(0.0)
    }

    /// Smallest holding time whose cdf exceeds `u`, for `u` in `[0, 1)`.
    pub fn inverse_cdf(&self, u: f64) -> usize {
        let i = self.cdf.partition_point(|c| *c <= u);
        if i < self.probs.len() {
            return i;
        }
        // u above the rounded total mass
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(d, p)| d as f64 * p)
            .sum()
    }

    /// Total variation distance, padding the shorter support with zeros.
    pub fn total_variation(&self, other: &Self) -> f64 {
        let n = self.probs.len().max(other.probs.len());
        0.5 * (0..n as i64)
            .map(|d| (self.pmf(d) - other.pmf(d)).abs())
            .sum::<f64>()
    }
}

impl TryFrom<Vec<f64>> for HoldingTimePmf {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<HoldingTimePmf> for Vec<f64> {
    fn from(p: HoldingTimePmf) -> Self {
        p.probs
    }
}
