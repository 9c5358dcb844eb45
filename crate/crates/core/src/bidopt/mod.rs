//! The bidding MDP: win probabilities, immediate rewards, exact and
//! truncated backward-induction solvers, and the baseline bid rules.

mod rules;
mod solver;

pub use rules::{adjust_bid, linear_bid, mcpc_bid};
pub use solver::{brute_force_oracle, solve_exact, solve_truncated, ValueTable};

use crate::error::{Error, Result};
use crate::landscape::PriceDistribution;
use serde::{Deserialize, Serialize};

/// What the bidder maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Expected clicks.
    Clicks,
    /// Expected click value minus expected payment.
    Surplus,
}

/// How a won auction is priced and charged against the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payment {
    /// Pay the market price (the budget drops by the market price on a win).
    SecondPrice,
    /// Pay the bid on a win.
    FirstPrice,
    /// Pay the bid on a win; mirrors a Bellman recursion that always charges
    /// the bid itself.
    LiteralBid,
}

impl Payment {
    pub fn charge(self, bid: u32, market_price: u32) -> u32 {
        match self {
            Payment::SecondPrice => market_price,
            Payment::FirstPrice | Payment::LiteralBid => bid,
        }
    }
}

/// Configuration of one MDP solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Initial budget in grid price units.
    pub budget: u32,
    /// Episode length: auctions remaining at the start.
    pub horizon: usize,
    #[serde(default = "default_objective")]
    pub objective: Objective,
    /// Value of one click in price units (surplus objective only).
    #[serde(default = "default_click_value")]
    pub click_value: f64,
    #[serde(default = "default_payment")]
    pub payment: Payment,
    /// Discount factor in (0, 1].
    #[serde(default = "default_discount")]
    pub discount: f64,
    /// Budget cap for the truncated solver; rows above it clamp down.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncate_at: Option<u32>,
}

fn default_objective() -> Objective {
    Objective::Clicks
}
fn default_click_value() -> f64 {
    0.0
}
fn default_payment() -> Payment {
    Payment::SecondPrice
}
fn default_discount() -> f64 {
    1.0
}

impl SolverConfig {
    pub fn new(budget: u32, horizon: usize) -> Self {
        SolverConfig {
            budget,
            horizon,
            objective: default_objective(),
            click_value: default_click_value(),
            payment: default_payment(),
            discount: default_discount(),
            truncate_at: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::config(format!(
                "discount must lie in (0, 1], got {}",
                self.discount
            )));
        }
        if !self.click_value.is_finite() || self.click_value < 0.0 {
            return Err(Error::config("click value must be finite and nonnegative"));
        }
        if let Some(bmax) = self.truncate_at {
            if bmax == 0 || bmax > self.budget {
                return Err(Error::config(format!(
                    "truncation point must lie in 1..=budget, got {bmax}"
                )));
            }
        }
        Ok(())
    }
}

/// The market environment a solve runs against: a price distribution plus
/// the expected CTR per auction.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    pub price_dist: PriceDistribution,
    pub mean_ctr: f64,
}

impl TransitionModel {
    pub fn new(price_dist: PriceDistribution, mean_ctr: f64) -> Result<Self> {
        if !mean_ctr.is_finite() || !(0.0..=1.0).contains(&mean_ctr) {
            return Err(Error::config(format!("mean_ctr {mean_ctr} outside [0, 1]")));
        }
        Ok(TransitionModel {
            price_dist,
            mean_ctr,
        })
    }

    /// Highest grid bid.
    pub fn price_cap(&self) -> u32 {
        (self.price_dist.levels() - 1) as u32
    }
}

/// Probability of winning at bid `x` under the strict-win rule:
/// `P(market price < x)`.
pub fn win_prob(x: u32, dist: &PriceDistribution) -> f64 {
    dist.prob_below(x)
}

/// Expected payment conditional on winning at bid `x` under second-price
/// rules: `E[m | m < x]`. Errors when the win probability is zero.
pub fn expected_payment_on_win(x: u32, dist: &PriceDistribution) -> Result<f64> {
    let p_win = win_prob(x, dist);
    if p_win <= 0.0 {
        return Err(Error::data(format!(
            "expected payment undefined: bid {x} never wins"
        )));
    }
    let upto = (x as usize).min(dist.levels());
    let weighted: f64 = dist.pmf()[..upto]
        .iter()
        .enumerate()
        .map(|(m, &p)| m as f64 * p)
        .sum();
    Ok(weighted / p_win)
}

/// Expected immediate reward of bidding `x` in one auction.
///
/// Clicks objective: `P(win) * mean_ctr`. Surplus objective: `P(win)` times
/// click value minus the expected payment (the bid itself under first-price
/// and literal-bid payment).
pub fn immediate_value(x: u32, model: &TransitionModel, config: &SolverConfig) -> f64 {
    let p_win = win_prob(x, &model.price_dist);
    match config.objective {
        Objective::Clicks => p_win * model.mean_ctr,
        Objective::Surplus => {
            if p_win <= 0.0 {
                return 0.0;
            }
            let expected_pay = match config.payment {
                Payment::SecondPrice => {
                    expected_payment_on_win(x, &model.price_dist).expect("p_win > 0")
                }
                Payment::FirstPrice | Payment::LiteralBid => x as f64,
            };
            p_win * (model.mean_ctr * config.click_value - expected_pay)
        }
    }
}
