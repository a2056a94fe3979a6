use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a p.m.f.
pub const PMF_SUM_TOL: f64 = 1e-12;

/// Probability mass function of the signed per-slot excess energy, supported
/// on the integers `-M..=M` (in energy units).
///
/// `probs[k + M]` is the probability of an excess of `k` units; negative `k`
/// are deficits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmfRepr", into = "PmfRepr")]
pub struct ExcessPmf {
    max_jump: usize,
    probs: Vec<f64>,
}

/// Serialized form: a list of `[value, probability]` pairs.
#[derive(Serialize, Deserialize)]
struct PmfRepr(Vec<(i64, f64)>);

impl TryFrom<PmfRepr> for ExcessPmf {
    type Error = Error;
    fn try_from(r: PmfRepr) -> Result<Self> {
        ExcessPmf::from_pairs(&r.0)
    }
}

impl From<ExcessPmf> for PmfRepr {
    fn from(p: ExcessPmf) -> Self {
        PmfRepr(p.support().filter(|(_, w)| *w > 0.0).collect())
    }
}

impl ExcessPmf {
    /// `probs` lists the probabilities of `-M, ..., 0, ..., M` in order.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len().is_multiple_of(2) {
            return Err(Error::validation("pmf", "support must be symmetric: expected 2M + 1 entries"));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::validation("pmf", format!("probabilities must be in [0, 1], got {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(Error::validation("pmf", format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self {
            max_jump: probs.len() / 2,
            probs,
        })
    }

    /// Builds a p.m.f. from `(value, probability)` pairs; repeated values add up.
    pub fn from_pairs(pairs: &[(i64, f64)]) -> Result<Self> {
        let m = pairs.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut probs = vec![0.0; 2 * m + 1];
        for &(k, p) in pairs {
            probs[(k + m as i64) as usize] += p;
        }
        Self::new(probs)
    }

    /// `{-1: d, 0: 1 - a - d, +1: a}`.
    pub fn three_point(a: f64, d: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&d) || a + d > 1.0 + PMF_SUM_TOL {
            return Err(Error::validation("pmf", format!("need a, d >= 0 and a + d <= 1, got a = {a}, d = {d}")));
        }
        Self::new(vec![d, (1.0 - a - d).max(0.0), a])
    }

    /// Largest jump `M`.
    pub fn max_jump(&self) -> usize {
        self.max_jump
    }

    /// Probability of an excess of exactly `k` units.
    pub fn prob(&self, k: i64) -> f64 {
        let idx = k + self.max_jump as i64;
        if idx < 0 || idx as usize >= self.probs.len() {
            0.0
        } else {
            self.probs[idx as usize]
        }
    }

    /// `d_i`: probability of a deficit of `i` units.
    pub fn deficit_prob(&self, i: usize) -> f64 {
        self.prob(-(i as i64))
    }

    /// `a_i`: probability of an excess of `i` units.
    pub fn excess_prob(&self, i: usize) -> f64 {
        self.prob(i as i64)
    }

    /// `(value, probability)` over the full support, ascending.
    pub fn support(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let m = self.max_jump as i64;
        self.probs.iter().enumerate().map(move |(i, p)| (i as i64 - m, *p))
    }

    pub fn mean(&self) -> f64 {
        self.support().map(|(k, p)| k as f64 * p).sum()
    }

    /// Inverse-CDF draw from a uniform `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> i64 {
        let mut acc = 0.0;
        let mut last = -(self.max_jump as i64);
        for (k, p) in self.support() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = k;
            if u < acc {
                return k;
            }
        }
        last
    }
}
