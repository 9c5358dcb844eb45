//! Kaplan-Meier product-limit estimation over censored bid logs.

use super::PriceDistribution;
use crate::bidlog::CampaignDataset;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A product-limit survival curve over price levels.
///
/// `points` holds, for each distinct uncensored price `z` in ascending
/// order, the survival value just after the events at `z`, i.e.
/// `S(z) = P(price > z)`. Before the first event the survival is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub points: Vec<(u32, f64)>,
    pub price_levels: usize,
}

impl SurvivalCurve {
    pub fn validate(&self) -> Result<()> {
        let mut prev_z = None;
        let mut prev_s = 1.0;
        for &(z, s) in &self.points {
            if z as usize >= self.price_levels {
                return Err(Error::Range(format!(
                    "curve point {z} outside grid of {}",
                    self.price_levels
                )));
            }
            if prev_z.is_some_and(|p| z <= p) {
                return Err(Error::data("curve points must be strictly ascending"));
            }
            if !(0.0..=1.0).contains(&s) || s > prev_s + 1e-12 {
                return Err(Error::data("survival must be nonincreasing in [0, 1]"));
            }
            prev_z = Some(z);
            prev_s = s;
        }
        Ok(())
    }
}

/// Fits the product-limit estimator.
///
/// At each distinct uncensored price `z` (ascending), `S <- S * (n - d) / n`
/// with `d` the uncensored count at `z` and `n` the records still at risk.
/// A record censored at `z` stays in the risk set for the events at `z`.
pub fn km_fit(dataset: &CampaignDataset) -> Result<SurvivalCurve> {
    if dataset.is_empty() {
        return Err(Error::data("cannot fit a survival curve to an empty dataset"));
    }
    let levels = dataset.price_levels();
    let mut events = vec![0u64; levels]; // uncensored count per price
    let mut censorings = vec![0u64; levels]; // censored count per lower bound
    let mut uncensored_total = 0u64;
    for record in dataset.records() {
        match record.market_price() {
            Some(price) => {
                events[price as usize] += 1;
                uncensored_total += 1;
            }
            None => censorings[record.lower_bound().expect("censored") as usize] += 1,
        }
    }
    if uncensored_total == 0 {
        return Err(Error::data("fully censored dataset: no observed market prices"));
    }

    let mut at_risk = dataset.len() as u64;
    let mut survival = 1.0;
    let mut points = Vec::new();
    for z in 0..levels {
        // Censored-at-z records count toward the risk set at z, so remove
        // them only after the event at z is processed.
        let d = events[z];
        if d > 0 {
            survival *= (at_risk - d) as f64 / at_risk as f64;
            points.push((z as u32, survival));
        }
        at_risk -= d + censorings[z];
    }

    Ok(SurvivalCurve {
        points,
        price_levels: levels,
    })
}

/// Converts a survival curve into a pmf by successive differences, assigning
/// the residual mass after the last event to the top grid level.
pub fn survival_to_distribution(curve: &SurvivalCurve) -> Result<PriceDistribution> {
    curve.validate()?;
    let levels = curve.price_levels;
    let mut pmf = vec![0.0; levels];
    let mut prev = 1.0;
    for &(z, s) in &curve.points {
        pmf[z as usize] += prev - s;
        prev = s;
    }
    pmf[levels - 1] += prev;
    PriceDistribution::from_weights(pmf)
}
