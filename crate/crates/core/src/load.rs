//! Distributions of the number of stored parcels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a load pmf after convolutions.
pub const LOAD_MASS_TOLERANCE: f64 = 1e-6;

/// Trailing entries below this are trimmed.
const TRIM_BELOW: f64 = 1e-12;

/// Pmf over parcel counts `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoadPmf {
    probs: Vec<f64>,
}

/// Point functional extracted from a load pmf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointMode {
    Mean,
    Median,
    Quantile(f64),
}

impl LoadPmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPmf("empty load pmf".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidPmf("negative or non-finite load mass".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > LOAD_MASS_TOLERANCE {
            return Err(Error::InvalidPmf(format!("load pmf mass {total} is not 1")));
        }
        Ok(Self { probs })
    }

    /// All mass on zero parcels.
    pub fn zero() -> Self {
        Self { probs: vec![1.0] }
    }

    pub fn point_mass(count: usize) -> Self {
        let mut probs = vec![0.0; count + 1];
        probs[count] = 1.0;
        Self { probs }
    }

    /// Contribution of a single parcel present with probability `p`.
    pub fn bernoulli(p: f64) -> Self {
        let p = p.clamp(0.0, 1.0);
        Self {
            probs: vec![1.0 - p, p],
        }
    }

    /// Wraps raw weights without checking the mass; the caller guarantees normalization.
    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn pmf(&self, count: usize) -> f64 {
        self.probs.get(count).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Distribution of the sum of two independent counts.
    pub fn convolve(&self, other: &Self) -> Self {
        let mut out = vec![0.0; self.probs.len() + other.probs.len() - 1];
        for (i, &a) in self.probs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.probs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self { probs: out }
    }

    /// Drops negligible trailing mass and renormalizes.
    pub fn trimmed(mut self) -> Self {
        while self.probs.len() > 1 && self.probs.last().is_some_and(|p| *p < TRIM_BELOW) {
            self.probs.pop();
        }
        self.renormalized()
    }

    pub fn renormalized(mut self) -> Self {
        let total = self.total_mass();
        if total > 0.0 {
            for p in &mut self.probs {
                *p /= total;
            }
        }
        self
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(l, p)| l as f64 * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(l, p)| (l as f64 - m).powi(2) * p)
            .sum()
    }

    /// Smallest count whose cdf reaches `q`.
    pub fn quantile(&self, q: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidQuantile(q));
        }
        let mut acc = 0.0;
        for (l, p) in self.probs.iter().enumerate() {
            acc += p;
            if acc >= q - 1e-12 {
                return Ok(l);
            }
        }
        Ok(self.probs.len() - 1)
    }

    pub fn point(&self, mode: PointMode) -> Result<f64> {
        match mode {
            PointMode::Mean => Ok(self.mean()),
            PointMode::Median => self.quantile(0.5).map(|l| l as f64),
            PointMode::Quantile(q) => self.quantile(q).map(|l| l as f64),
        }
    }

    /// Total variation distance to another pmf over counts.
    pub fn total_variation(&self, other: &[f64]) -> f64 {
        let n = self.probs.len().max(other.len());
        0.5 * (0..n)
            .map(|i| (self.pmf(i) - other.get(i).copied().unwrap_or(0.0)).abs())
            .sum::<f64>()
    }
}

/// Convolution of two load pmfs.
pub fn convolve(a: &LoadPmf, b: &LoadPmf) -> LoadPmf {
    a.convolve(b)
}

/// Requested functional of a load pmf.
pub fn point_forecast(pmf: &LoadPmf, mode: PointMode) -> Result<f64> {
    pmf.point(mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn identity_and_coin() {
        let p = LoadPmf::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(LoadPmf::zero().convolve(&p), p);
        let coin = LoadPmf::bernoulli(0.5);
        assert_eq!(coin.convolve(&coin).probs(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn point_functionals() {
        let p = LoadPmf::new(vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(point_forecast(&p, PointMode::Mean).unwrap(), 1.0);
        assert_eq!(LoadPmf::point_mass(7).point(PointMode::Median).unwrap(), 7.0);
        let half = LoadPmf::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(half.point(PointMode::Quantile(0.9)).unwrap(), 1.0);
        assert_eq!(half.point(PointMode::Quantile(0.5)).unwrap(), 0.0);
        assert!(matches!(
            half.point(PointMode::Quantile(1.5)),
            Err(Error::InvalidQuantile(_))
        ));
    }

    #[test]
    fn trimming_keeps_mass() {
        let p = LoadPmf::from_raw(vec![0.5, 0.5, 1e-15, 0.0]).trimmed();
        assert_eq!(p.len(), 2);
        assert!((p.total_mass() - 1.0).abs() < 1e-15);
    }

    fn pmf_strategy() -> impl Strategy<Value = LoadPmf> {
        prop::collection::vec(0.0f64..1.0, 1..8).prop_filter_map("mass", |w| {
            let t: f64 = w.iter().sum();
            (t > 1e-3).then(|| LoadPmf::from_raw(w.iter().map(|x| x / t).collect()))
        })
    }

    proptest! {
        #[test]
        fn convolution_is_commutative_and_associative(
            a in pmf_strategy(), b in pmf_strategy(), c in pmf_strategy()
        ) {
            prop_assert!(close(a.convolve(&b).probs(), b.convolve(&a).probs(), 1e-12));
            let left = a.convolve(&b).convolve(&c);
            let right = a.convolve(&b.convolve(&c));
            prop_assert!(close(left.probs(), right.probs(), 1e-12));
        }

        #[test]
        fn convolution_adds_means_and_keeps_mass(a in pmf_strategy(), b in pmf_strategy()) {
            let s = a.convolve(&b);
            prop_assert!((s.mean() - a.mean() - b.mean()).abs() < 1e-9);
            prop_assert!((s.total_mass() - 1.0).abs() < 1e-12);
            prop_assert_eq!(s.len(), a.len() + b.len() - 1);
        }

        #[test]
        fn bernoulli_means_add(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0) {
            let s = LoadPmf::bernoulli(p1).convolve(&LoadPmf::bernoulli(p2));
            prop_assert!((s.mean() - p1 - p2).abs() < 1e-12);
        }
    }
}
