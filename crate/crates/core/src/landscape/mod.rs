//! Market-price distribution models.
//!
//! Three routes to a [`PriceDistribution`]: the Kaplan-Meier product-limit
//! estimator, a method-of-moments gamma model, and a recurrent forecaster
//! conditioned on impression features.

mod distribution;
mod forecaster;
mod gamma;
mod km;
mod model;

pub use distribution::{PriceDistribution, PMF_SUM_TOLERANCE};
pub use forecaster::{
    forward_predict, loss_mse, loss_total, rnn_step, sequence_gradients, sequence_loss, sgd_step,
    train, EpochStats, ForecasterParams, Gradients, LossBreakdown, TrainConfig,
};
pub use gamma::{gamma_discretize, gamma_fit, GammaParams};
pub use km::{km_fit, survival_to_distribution, SurvivalCurve};
pub use model::{MarketModel, ModelState};
