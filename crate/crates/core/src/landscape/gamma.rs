//! Gamma market-price model: method-of-moments fit and grid discretization.

use super::PriceDistribution;
use crate::bidlog::CampaignDataset;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

/// Shape/scale parameters of a gamma price model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl GammaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.shape.is_finite() && self.scale.is_finite() && self.shape > 0.0 && self.scale > 0.0)
        {
            return Err(Error::data(format!(
                "gamma parameters must be positive and finite, got ({}, {})",
                self.shape, self.scale
            )));
        }
        Ok(())
    }
}

/// Method-of-moments fit on the uncensored market prices:
/// `k = mean^2 / var`, `theta = var / mean` with the population variance.
pub fn gamma_fit(dataset: &CampaignDataset) -> Result<GammaParams> {
    let prices: Vec<f64> = dataset
        .uncensored()
        .map(|r| r.market_price().expect("uncensored") as f64)
        .collect();
    if prices.len() < 2 {
        return Err(Error::data(format!(
            "degenerate gamma fit: need at least 2 uncensored records, found {}",
            prices.len()
        )));
    }
    let n = prices.len() as f64;
    let mean = prices.iter().sum::<f64>() / n;
    let var = prices.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 || mean <= 0.0 {
        return Err(Error::data(
            "degenerate gamma fit: zero price variance or zero mean",
        ));
    }
    Ok(GammaParams {
        shape: mean * mean / var,
        scale: var / mean,
    })
}

/// Discretizes the continuous gamma onto the grid: each level `z < L-1` gets
/// the mass of `[z, z+1)`, the top level absorbs the upper tail.
pub fn gamma_discretize(params: &GammaParams, levels: usize) -> Result<PriceDistribution> {
    params.validate()?;
    // statrs parameterizes by rate = 1 / scale.
    let gamma = Gamma::new(params.shape, 1.0 / params.scale)
        .map_err(|e| Error::data(format!("gamma distribution: {e}")))?;
    let mut weights = Vec::with_capacity(levels);
    let mut cdf_z = 0.0;
    for z in 0..levels - 1 {
        let cdf_next = gamma.cdf((z + 1) as f64);
        weights.push((cdf_next - cdf_z).max(0.0));
        cdf_z = cdf_next;
    }
    weights.push((1.0 - cdf_z).max(0.0));
    PriceDistribution::from_weights(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::km::tests::dataset;
    use approx::assert_abs_diff_eq;

    #[test]
    fn moments_fixture() {
        let ds = dataset(&[1, 2, 3, 4], &[], 301);
        let params = gamma_fit(&ds).unwrap();
        assert_abs_diff_eq!(params.shape, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(params.scale, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn constant_prices_are_degenerate() {
        let ds = dataset(&[7, 7, 7], &[], 301);
        assert!(gamma_fit(&ds).is_err());
        let ds = dataset(&[7], &[], 301);
        assert!(gamma_fit(&ds).is_err());
    }

    #[test]
    fn censored_records_are_ignored_by_the_fit() {
        let with = dataset(&[1, 2, 3, 4], &[9, 9], 301);
        let without = dataset(&[1, 2, 3, 4], &[], 301);
        assert_eq!(gamma_fit(&with).unwrap(), gamma_fit(&without).unwrap());
    }

    #[test]
    fn recovers_generator_parameters() {
        use crate::bidlog::{generate_synthetic, PriceLaw, SyntheticConfig};
        let config = SyntheticConfig {
            n: 10_000,
            price_law: PriceLaw::Gamma {
                shape: 5.0,
                scale: 10.0,
            },
            seed: 17,
            ..Default::default()
        };
        let ds = generate_synthetic(&config).unwrap();
        let params = gamma_fit(&ds).unwrap();
        assert!(
            (params.shape - 5.0).abs() / 5.0 < 0.1,
            "shape {} off by more than 10%",
            params.shape
        );
    }

    #[test]
    fn fit_error_shrinks_with_sample_size() {
        use crate::bidlog::{generate_synthetic, PriceLaw, SyntheticConfig};
        let fit_at = |n: usize| {
            let config = SyntheticConfig {
                n,
                price_law: PriceLaw::Gamma {
                    shape: 5.0,
                    scale: 10.0,
                },
                seed: 23,
                ..Default::default()
            };
            gamma_fit(&generate_synthetic(&config).unwrap()).unwrap()
        };
        let err = |p: GammaParams| (p.shape - 5.0).abs() / 5.0 + (p.scale - 10.0).abs() / 10.0;
        assert!(err(fit_at(100_000)) < err(fit_at(1_000)));
    }

    #[test]
    fn discretized_pmf_is_normalized() {
        let dist = gamma_discretize(
            &GammaParams {
                shape: 5.0,
                scale: 10.0,
            },
            301,
        )
        .unwrap();
        assert_abs_diff_eq!(dist.pmf().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn discretized_mode_sits_near_continuous_mode() {
        // Continuous mode at (k - 1) * theta = 40.
        let dist = gamma_discretize(
            &GammaParams {
                shape: 5.0,
                scale: 10.0,
            },
            301,
        )
        .unwrap();
        let mode = dist.argmax();
        assert!((39..=41).contains(&mode), "argmax {mode} not near 40");
    }

    #[test]
    fn discretized_mean_matches_quadrature_oracle() {
        // Independent route: per-bucket Simpson quadrature of the density,
        // rather than cdf differences.
        let params = GammaParams {
            shape: 5.0,
            scale: 10.0,
        };
        let levels = 301usize;
        let density = |x: f64| {
            // k = 5 is integral, so Gamma(k) = 4! = 24.
            x.powi(4) * (-x / params.scale).exp() / (24.0 * params.scale.powi(5))
        };
        let mut oracle_mean = 0.0;
        let mut mass_below_top = 0.0;
        for z in 0..levels - 1 {
            let (a, b) = (z as f64, z as f64 + 1.0);
            let bucket = (b - a) / 6.0 * (density(a) + 4.0 * density(0.5 * (a + b)) + density(b));
            oracle_mean += z as f64 * bucket;
            mass_below_top += bucket;
        }
        oracle_mean += (levels - 1) as f64 * (1.0 - mass_below_top);

        let dist = gamma_discretize(&params, levels).unwrap();
        assert_abs_diff_eq!(dist.mean(), oracle_mean, epsilon = 1e-3);
        // Flooring to buckets shifts the continuous mean of 50 down ~0.5.
        assert!((dist.mean() - 49.5).abs() < 0.2, "mean {}", dist.mean());
    }
}
