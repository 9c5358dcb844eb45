//! A single handle over the three fitted market-price models.

use super::forecaster::{self, EpochStats, ForecasterParams, TrainConfig};
use super::gamma::{gamma_discretize, gamma_fit, GammaParams};
use super::km::{km_fit, survival_to_distribution, SurvivalCurve};
use super::PriceDistribution;
use crate::bidlog::{BidRecord, CampaignDataset};
use crate::error::{Error, Result};
use ndarray::Array1;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A fitted market-price model, ready to forecast price distributions.
///
/// KM and gamma models are unconditional: they ignore record features and
/// recurrent state. The forecaster conditions on both.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarketModel {
    Km {
        price_levels: usize,
        curve: SurvivalCurve,
        #[serde(skip)]
        cached: Option<PriceDistribution>,
    },
    Gamma {
        price_levels: usize,
        params: GammaParams,
        #[serde(skip)]
        cached: Option<PriceDistribution>,
    },
    Forecaster { params: Box<ForecasterParams> },
}

/// Recurrent prediction state; inert for the unconditional models.
#[derive(Debug, Clone)]
pub struct ModelState {
    hidden: Option<Array1<f64>>,
}

impl MarketModel {
    pub fn fit_km(dataset: &CampaignDataset) -> Result<Self> {
        let curve = km_fit(dataset)?;
        let cached = Some(survival_to_distribution(&curve)?);
        Ok(MarketModel::Km {
            price_levels: dataset.price_levels(),
            curve,
            cached,
        })
    }

    pub fn fit_gamma(dataset: &CampaignDataset) -> Result<Self> {
        let params = gamma_fit(dataset)?;
        let cached = Some(gamma_discretize(&params, dataset.price_levels())?);
        Ok(MarketModel::Gamma {
            price_levels: dataset.price_levels(),
            params,
            cached,
        })
    }

    pub fn fit_forecaster(
        dataset: &CampaignDataset,
        cfg: &TrainConfig,
    ) -> Result<(Self, Vec<EpochStats>)> {
        let (params, history) = forecaster::train(dataset, cfg)?;
        Ok((MarketModel::Forecaster { params: Box::new(params) }, history))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MarketModel::Km { .. } => "km",
            MarketModel::Gamma { .. } => "gamma",
            MarketModel::Forecaster { .. } => "forecaster",
        }
    }

    pub fn price_levels(&self) -> usize {
        match self {
            MarketModel::Km { price_levels, .. } | MarketModel::Gamma { price_levels, .. } => {
                *price_levels
            }
            MarketModel::Forecaster { params } => params.levels(),
        }
    }

    pub fn initial_state(&self) -> ModelState {
        ModelState {
            hidden: match self {
                MarketModel::Forecaster { params } => Some(params.initial_state()),
                _ => None,
            },
        }
    }

    /// Forecasts the market-price distribution for one record, advancing the
    /// recurrent state when the model is a forecaster.
    pub fn predict(&self, record: &BidRecord, state: &mut ModelState) -> Result<PriceDistribution> {
        match self {
            MarketModel::Km { curve, cached, .. } => match cached {
                Some(dist) => Ok(dist.clone()),
                None => survival_to_distribution(curve),
            },
            MarketModel::Gamma {
                params,
                cached,
                price_levels,
            } => match cached {
                Some(dist) => Ok(dist.clone()),
                None => gamma_discretize(params, *price_levels),
            },
            MarketModel::Forecaster { params } => {
                let hidden = state
                    .hidden
                    .get_or_insert_with(|| params.initial_state());
                let (dist, next) = forecaster::forward_predict(record, hidden, params)?;
                *hidden = next;
                Ok(dist)
            }
        }
    }

    /// The model's unconditional forecast: what it predicts from a fresh
    /// state for a featureless record.
    pub fn baseline_distribution(&self) -> Result<PriceDistribution> {
        let placeholder = BidRecord {
            campaign_id: String::new(),
            timestamp: 0,
            features: Vec::new(),
            logged_bid: 0,
            outcome: crate::bidlog::AuctionOutcome::Observed { market_price: 0 },
            click: false,
            pctr: 0.0,
        };
        self.predict(&placeholder, &mut self.initial_state())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: MarketModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read model {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<()> {
        match self {
            MarketModel::Km {
                curve,
                price_levels,
                ..
            } => {
                if curve.price_levels != *price_levels {
                    return Err(Error::Dimension(
                        "curve grid does not match model grid".into(),
                    ));
                }
                curve.validate()
            }
            MarketModel::Gamma { params, .. } => params.validate(),
            MarketModel::Forecaster { .. } => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bidlog::{generate_synthetic, PriceLaw, SyntheticConfig};

    fn point_dataset() -> CampaignDataset {
        generate_synthetic(&SyntheticConfig {
            n: 30,
            price_law: PriceLaw::Point { level: 9 },
            feature_vocab: vec![2],
            seed: 1,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn km_model_from_point_mass_data_is_a_point_mass() {
        let model = MarketModel::fit_km(&point_dataset()).unwrap();
        let dist = model.baseline_distribution().unwrap();
        assert_eq!(dist.mass_at(9), 1.0);
    }

    #[test]
    fn predictions_are_normalized_for_every_kind() {
        let ds = generate_synthetic(&SyntheticConfig {
            n: 60,
            price_law: PriceLaw::Gamma {
                shape: 4.0,
                scale: 8.0,
            },
            feature_vocab: vec![3],
            seed: 2,
            ..Default::default()
        })
        .unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            embed_dim: 4,
            hidden_dim: 4,
            ..Default::default()
        };
        let models = vec![
            MarketModel::fit_km(&ds).unwrap(),
            MarketModel::fit_gamma(&ds).unwrap(),
            MarketModel::fit_forecaster(&ds, &cfg).unwrap().0,
        ];
        for model in models {
            let mut state = model.initial_state();
            for record in ds.records().iter().take(5) {
                let dist = model.predict(record, &mut state).unwrap();
                let total: f64 = dist.pmf().iter().sum();
                assert!((total - 1.0).abs() < 1e-9, "{} sums to {total}", model.kind());
            }
        }
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let ds = point_dataset();
        let cfg = TrainConfig {
            epochs: 2,
            embed_dim: 3,
            hidden_dim: 4,
            seed: 5,
            ..Default::default()
        };
        let (model, _) = MarketModel::fit_forecaster(&ds, &cfg).unwrap();
        let json = model.to_json().unwrap();
        let back = MarketModel::from_json(&json).unwrap();
        let mut s1 = model.initial_state();
        let mut s2 = back.initial_state();
        for record in ds.records() {
            let a = model.predict(record, &mut s1).unwrap();
            let b = back.predict(record, &mut s2).unwrap();
            assert_eq!(a.pmf(), b.pmf());
        }
    }

    #[test]
    fn loading_garbage_fails() {
        assert!(MarketModel::from_json("{\"kind\":\"km\"}").is_err());
        assert!(MarketModel::from_json("not json").is_err());
    }
}
