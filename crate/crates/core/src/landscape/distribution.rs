//! Discrete market-price distributions over the integer grid.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tolerance on the total mass of a pmf.
pub const PMF_SUM_TOLERANCE: f64 = 1e-9;

/// A probability mass function over price levels `0..L-1`.
///
/// Entries are nonnegative and sum to 1 within [`PMF_SUM_TOLERANCE`]. This is
/// the universal market-price representation: every fitted model renders its
/// forecast as one of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriceDistribution {
    pmf: Vec<f64>,
}

impl PriceDistribution {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.len() < 2 {
            return Err(Error::config("pmf needs at least 2 levels"));
        }
        if pmf.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::data("pmf entries must be finite and nonnegative"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOLERANCE {
            return Err(Error::data(format!("pmf sums to {total}, not 1")));
        }
        Ok(PriceDistribution { pmf })
    }

    /// Normalizes nonnegative weights into a pmf.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::data("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::data("weights must carry positive total mass"));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(levels: usize) -> Self {
        let p = 1.0 / levels as f64;
        PriceDistribution {
            pmf: vec![p; levels],
        }
    }

    pub fn point_mass(level: u32, levels: usize) -> Result<Self> {
        if level as usize >= levels {
            return Err(Error::Range(format!(
                "level {level} outside grid of {levels}"
            )));
        }
        let mut pmf = vec![0.0; levels];
        pmf[level as usize] = 1.0;
        Ok(PriceDistribution { pmf })
    }

    pub fn levels(&self) -> usize {
        self.pmf.len()
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Mass at a single level; 0 outside the grid.
    pub fn mass_at(&self, level: u32) -> f64 {
        self.pmf.get(level as usize).copied().unwrap_or(0.0)
    }

    /// `P(price < bid)` — the probability a strict-win bid at `bid` beats the
    /// market. Saturates at 1 for bids above the grid.
    pub fn prob_below(&self, bid: u32) -> f64 {
        let upto = (bid as usize).min(self.pmf.len());
        self.pmf[..upto].iter().sum()
    }

    /// `P(price >= level)`.
    pub fn mass_at_or_above(&self, level: u32) -> f64 {
        let from = (level as usize).min(self.pmf.len());
        self.pmf[from..].iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(z, &p)| z as f64 * p)
            .sum()
    }

    pub fn argmax(&self) -> u32 {
        let mut best = 0usize;
        for (i, &p) in self.pmf.iter().enumerate() {
            if p > self.pmf[best] {
                best = i;
            }
        }
        best as u32
    }
}

impl TryFrom<Vec<f64>> for PriceDistribution {
    type Error = Error;

    fn try_from(pmf: Vec<f64>) -> Result<Self> {
        PriceDistribution::new(pmf)
    }
}

impl From<PriceDistribution> for Vec<f64> {
    fn from(dist: PriceDistribution) -> Vec<f64> {
        dist.pmf
    }
}
