//! Microstate spaces, distributions on the probability simplex, count vectors and
//! the entropy/divergence primitives built on them.
//!
//! Logarithms are natural throughout; every entropy and divergence is in nats.
//! The convention `0 · log 0 = 0` applies wherever a probability vanishes.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution as _};

use crate::{Error, Result};
use statrs::function::factorial::ln_factorial;

/// Tolerance on `Σ p = 1` for validated distributions.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Inputs read from files are renormalized when their sum is within this of 1.
pub const INGEST_TOLERANCE: f64 = 1e-6;

/// Ordered, uniquely labelled set of microstates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MicrostateSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl MicrostateSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidSpace(format!(
                "need at least 2 microstates, got {}",
                labels.len()
            )));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::InvalidSpace(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { labels, index })
    }

    /// The `2^L` configurations of `L` binary spins as bitstrings in lexicographic
    /// order. Character `i` (0-based) is the value of spin `i + 1`.
    pub fn spins(l: usize) -> Result<Self> {
        if l == 0 || l > 20 {
            return Err(Error::InvalidSpace(format!(
                "spin count {l} outside 1..=20"
            )));
        }
        let labels = (0..1usize << l)
            .map(|alpha| {
                (0..l)
                    .map(|i| {
                        if spin_value(alpha, i + 1, l) {
                            '1'
                        } else {
                            '0'
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(labels)
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// Value of spin `i` (1-based) in microstate `alpha` of an `l`-spin space, under the
/// lexicographic bitstring order (spin 1 is the most significant bit).
#[inline]
pub fn spin_value(alpha: usize, i: usize, l: usize) -> bool {
    (alpha >> (l - i)) & 1 == 1
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates non-negativity and `|Σ p − 1| ≤ 1e-12`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution(
                "empty probability vector".into(),
            ));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::InvalidDistribution(format!("entry {i} is {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Accepts vectors whose sum is within `1e-6` of one and rescales them.
    pub fn renormalized(probs: Vec<f64>) -> Result<Self> {
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::InvalidDistribution(format!("entry {i} is {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > INGEST_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Self::new(probs.into_iter().map(|p| p / sum).collect())
    }

    /// Normalizes non-negative weights with a positive sum.
    pub fn normalize(weights: Vec<f64>) -> Result<Self> {
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::InvalidDistribution(format!("weight {i} is {w}")));
        }
        if !(weights.iter().sum::<f64>() > 0.0) {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Ok(Self::from_weights(weights))
    }

    /// Normalizes weights already known to be valid.
    pub(crate) fn from_weights(mut w: Vec<f64>) -> Self {
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= sum);
        Self { probs: w }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Self { probs }
    }

    pub fn from_counts(c: &CountVector) -> Self {
        let n = c.total() as f64;
        Self {
            probs: c.counts().iter().map(|&k| k as f64 / n).collect(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    /// Microstates with probability exactly zero; these are excluded from modeling.
    pub fn excluded(&self) -> Vec<usize> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn support(&self) -> SupportMask {
        SupportMask::new(self.probs.iter().map(|&p| p > 0.0).collect())
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Selects the working microstates of a model. Results on the working space are
/// mapped back to the full space by inserting zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportMask {
    keep: Vec<bool>,
}

impl SupportMask {
    pub fn new(keep: Vec<bool>) -> Self {
        Self { keep }
    }

    pub fn full(n: usize) -> Self {
        Self {
            keep: vec![true; n],
        }
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn is_full(&self) -> bool {
        self.keep.iter().all(|&k| k)
    }

    pub fn full_len(&self) -> usize {
        self.keep.len()
    }

    pub fn count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.keep
            .iter()
            .enumerate()
            .filter(|(_, &k)| k)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn intersect(&self, other: &SupportMask) -> SupportMask {
        SupportMask::new(
            self.keep
                .iter()
                .zip(&other.keep)
                .map(|(a, b)| *a && *b)
                .collect(),
        )
    }

    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.keep)
            .filter(|(_, &k)| k)
            .map(|(x, _)| *x)
            .collect()
    }

    /// Full-space mask keeping the microstates that `inner`, a mask over this
    /// mask's kept states, keeps.
    pub fn compose(&self, inner: &SupportMask) -> SupportMask {
        let mut it = inner.keep.iter();
        SupportMask::new(
            self.keep
                .iter()
                .map(|&k| k && *it.next().expect("mask length mismatch"))
                .collect(),
        )
    }

    pub fn expand(&self, v: &[f64]) -> Vec<f64> {
        let mut it = v.iter();
        let out = self
            .keep
            .iter()
            .map(|&k| {
                if k {
                    *it.next().expect("mask/vector length mismatch")
                } else {
                    0.0
                }
            })
            .collect();
        debug_assert!(it.next().is_none());
        out
    }
}

/// Non-negative integer counts per microstate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector {
    counts: Vec<u64>,
    total: u64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidCounts("total count is zero".into()));
        }
        Ok(Self { counts, total })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Shannon entropy `−Σ p log p`.
pub fn entropy(p: &Distribution) -> f64 {
    entropy_of(p.probs())
}

pub(crate) fn entropy_of(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Kullback-Leibler divergence `Σ f log(f / q)`.
pub fn kl_divergence(f: &Distribution, q: &Distribution) -> Result<f64> {
    kl_of(f.probs(), q.probs())
}

pub(crate) fn kl_of(f: &[f64], q: &[f64]) -> Result<f64> {
    if f.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: f.len(),
            found: q.len(),
        });
    }
    let mut s = 0.0;
    for (i, (&fi, &qi)) in f.iter().zip(q).enumerate() {
        if fi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::SupportViolation { index: i });
            }
            s += fi * (fi / qi).ln();
        }
    }
    Ok(s.max(0.0))
}

/// KL divergence that reports a support violation as `+∞` instead of an error.
pub fn kl_or_infinite(f: &Distribution, q: &Distribution) -> f64 {
    match kl_divergence(f, q) {
        Ok(v) => v,
        Err(Error::SupportViolation { .. }) => f64::INFINITY,
        Err(e) => panic!("{e}"),
    }
}

/// Cross entropy `−Σ f log q`.
pub fn cross_entropy(f: &Distribution, q: &Distribution) -> Result<f64> {
    if f.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: f.len(),
            found: q.len(),
        });
    }
    let mut s = 0.0;
    for (i, (&fi, &qi)) in f.probs().iter().zip(q.probs()).enumerate() {
        if fi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::SupportViolation { index: i });
            }
            s -= fi * qi.ln();
        }
    }
    Ok(s)
}

/// Exact log-probability of counts `c` under a multinomial with cell
/// probabilities `q`.
pub fn log_multinomial_pmf(c: &CountVector, q: &Distribution) -> Result<f64> {
    if c.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            found: c.len(),
        });
    }
    let mut lp = ln_factorial(c.total());
    for (i, (&k, &qi)) in c.counts().iter().zip(q.probs()).enumerate() {
        if k == 0 {
            continue;
        }
        if qi <= 0.0 {
            return Err(Error::SupportViolation { index: i });
        }
        lp += k as f64 * qi.ln() - ln_factorial(k);
    }
    Ok(lp)
}

/// Draws multinomial counts of size `n` from `q` by sequential conditional
/// binomials. Deterministic for a given generator state.
pub fn multinomial_sample<R: Rng + ?Sized>(q: &Distribution, n: u64, rng: &mut R) -> CountVector {
    assert!(n >= 1, "sample size must be positive");
    let probs = q.probs();
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass_left = 1.0_f64;
    let last = probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1);
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == last {
            counts[i] = remaining;
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let cond = (p / mass_left).clamp(0.0, 1.0);
        let k = if cond >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, cond)
                .expect("valid binomial parameters")
                .sample(rng)
        };
        counts[i] = k;
        remaining -= k;
        mass_left -= p;
    }
    CountVector { counts, total: n }
}
