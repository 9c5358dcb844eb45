//! Backward-induction solvers for the bidding MDP and the exhaustive
//! enumeration oracle used to cross-check them.

use super::{Objective, Payment, SolverConfig, TransitionModel};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Optimal value function and bid policy over the budget x horizon grid.
///
/// `value(b, t)` is the maximal expected remaining reward with budget `b`
/// and `t` auctions left; `optimal_bid(b, t)` the bid attaining it, ties
/// broken toward the smaller bid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ValueTableJson", into = "ValueTableJson")]
pub struct ValueTable {
    budget: u32,
    horizon: usize,
    values: Vec<f64>,
    policy: Vec<u32>,
}

/// Row-major wire format: row `b`, column `t`.
#[derive(Serialize, Deserialize)]
struct ValueTableJson {
    budget: u32,
    horizon: usize,
    values: Vec<f64>,
    policy: Vec<u32>,
}

impl From<ValueTable> for ValueTableJson {
    fn from(t: ValueTable) -> Self {
        ValueTableJson {
            budget: t.budget,
            horizon: t.horizon,
            values: t.values,
            policy: t.policy,
        }
    }
}

impl TryFrom<ValueTableJson> for ValueTable {
    type Error = Error;

    fn try_from(j: ValueTableJson) -> Result<Self> {
        let cells = (j.budget as usize + 1) * (j.horizon + 1);
        if j.values.len() != cells || j.policy.len() != cells {
            return Err(Error::Dimension(format!(
                "value table expects {cells} cells, found {} values and {} policy entries",
                j.values.len(),
                j.policy.len()
            )));
        }
        Ok(ValueTable {
            budget: j.budget,
            horizon: j.horizon,
            values: j.values,
            policy: j.policy,
        })
    }
}

impl ValueTable {
    pub fn budget(&self) -> u32 {
        self.budget
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    fn index(&self, b: u32, t: usize) -> usize {
        b as usize * (self.horizon + 1) + t
    }

    fn check(&self, b: u32, t: usize) -> Result<()> {
        if b > self.budget || t > self.horizon {
            return Err(Error::Range(format!(
                "cell ({b}, {t}) outside table of budget {} and horizon {}",
                self.budget, self.horizon
            )));
        }
        Ok(())
    }

    pub fn value(&self, b: u32, t: usize) -> Result<f64> {
        self.check(b, t)?;
        Ok(self.values[self.index(b, t)])
    }

    /// The stored argmax bid for the cell.
    pub fn optimal_bid(&self, b: u32, t: usize) -> Result<u32> {
        self.check(b, t)?;
        Ok(self.policy[self.index(b, t)])
    }

    /// Lookup with budget and horizon clamped into the grid; the bid a
    /// replayed policy uses when the live state exceeds what was solved.
    pub fn bid_clamped(&self, b: u32, t: usize) -> u32 {
        let b = b.min(self.budget);
        let t = t.min(self.horizon);
        self.policy[self.index(b, t)]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, serde_json::to_string(self)?)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read table {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Exact backward induction over `(budget, auctions-left)`.
///
/// `V(b, 0) = 0`; otherwise the max over feasible integer bids of the
/// immediate reward plus the discounted expectation over price outcomes:
/// a win at market price `m < x` charges the payment and continues from the
/// reduced budget, a loss continues from `(b, t-1)`.
pub fn solve_exact(model: &TransitionModel, config: &SolverConfig) -> Result<ValueTable> {
    config.validate()?;
    let budget = config.budget;
    let horizon = config.horizon;
    let cap = model.price_cap();
    let pmf = model.price_dist.pmf();
    let gamma = config.discount;
    let ctr = model.mean_ctr;

    // prefix_win[x] = P(m < x); prefix_cost[x] = E[m; m < x].
    let mut prefix_win = vec![0.0; cap as usize + 2];
    let mut prefix_cost = vec![0.0; cap as usize + 2];
    for m in 0..=cap as usize {
        prefix_win[m + 1] = prefix_win[m] + pmf[m];
        prefix_cost[m + 1] = prefix_cost[m] + m as f64 * pmf[m];
    }

    let width = horizon + 1;
    let cells = (budget as usize + 1) * width;
    let mut values = vec![0.0; cells];
    let mut policy = vec![0u32; cells];
    let idx = |b: u32, t: usize| b as usize * width + t;

    for t in 1..=horizon {
        for b in 0..=budget {
            let stay = values[idx(b, t - 1)];
            let mut best_value = gamma * stay;
            let mut best_bid = 0u32;
            let mut win_part = 0.0;
            for x in 1..=b.min(cap) {
                let p_win = prefix_win[x as usize];
                win_part = match config.payment {
                    Payment::SecondPrice => {
                        win_part + pmf[(x - 1) as usize] * values[idx(b - (x - 1), t - 1)]
                    }
                    Payment::FirstPrice | Payment::LiteralBid => {
                        p_win * values[idx(b - x, t - 1)]
                    }
                };
                let reward = match config.objective {
                    Objective::Clicks => p_win * ctr,
                    Objective::Surplus => {
                        let expected_pay = match config.payment {
                            Payment::SecondPrice => prefix_cost[x as usize],
                            Payment::FirstPrice | Payment::LiteralBid => p_win * x as f64,
                        };
                        p_win * ctr * config.click_value - expected_pay
                    }
                };
                let value = reward + gamma * (win_part + (1.0 - p_win) * stay);
                if value > best_value {
                    best_value = value;
                    best_bid = x;
                }
            }
            values[idx(b, t)] = best_value;
            policy[idx(b, t)] = best_bid;
        }
    }

    Ok(ValueTable {
        budget,
        horizon,
        values,
        policy,
    })
}

/// Truncated solve: exact backward induction up to `truncate_at`, with every
/// higher budget row clamped to the row at the truncation point. Identical
/// to [`solve_exact`] when `truncate_at` equals the budget (or is unset).
pub fn solve_truncated(model: &TransitionModel, config: &SolverConfig) -> Result<ValueTable> {
    config.validate()?;
    let bmax = config.truncate_at.unwrap_or(config.budget);
    let mut inner_config = config.clone();
    inner_config.budget = bmax;
    inner_config.truncate_at = None;
    let inner = solve_exact(model, &inner_config)?;
    if bmax == config.budget {
        return Ok(inner);
    }

    let width = config.horizon + 1;
    let mut values = inner.values;
    let mut policy = inner.policy;
    values.reserve((config.budget - bmax) as usize * width);
    policy.reserve((config.budget - bmax) as usize * width);
    let top_row = bmax as usize * width;
    for _ in bmax..config.budget {
        for t in 0..width {
            values.push(values[top_row + t]);
            policy.push(policy[top_row + t]);
        }
    }
    Ok(ValueTable {
        budget: config.budget,
        horizon: config.horizon,
        values,
        policy,
    })
}

/// Exhaustive-enumeration value of the MDP, with no Bellman table: plain
/// recursion over every bid choice and every price outcome. Only accepts
/// tiny instances; the independent cross-check for [`solve_exact`].
pub fn brute_force_oracle(model: &TransitionModel, config: &SolverConfig) -> Result<f64> {
    config.validate()?;
    if config.horizon > 5 || config.budget > 10 || model.price_dist.levels() > 4 {
        return Err(Error::config(format!(
            "oracle refuses instances beyond T=5, B=10, L=4 (got T={}, B={}, L={})",
            config.horizon,
            config.budget,
            model.price_dist.levels()
        )));
    }
    Ok(enumerate(config.budget, config.horizon, model, config))
}

fn enumerate(b: u32, t: usize, model: &TransitionModel, config: &SolverConfig) -> f64 {
    if t == 0 {
        return 0.0;
    }
    let cap = model.price_cap();
    let pmf = model.price_dist.pmf();
    let mut best = f64::NEG_INFINITY;
    for x in 0..=b.min(cap) {
        let mut value = 0.0;
        for (m, &p) in pmf.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let m = m as u32;
            if x > m {
                let pay = config.payment.charge(x, m);
                let reward = match config.objective {
                    Objective::Clicks => model.mean_ctr,
                    Objective::Surplus => model.mean_ctr * config.click_value - pay as f64,
                };
                value += p * (reward + config.discount * enumerate(b - pay, t - 1, model, config));
            } else {
                value += p * config.discount * enumerate(b, t - 1, model, config);
            }
        }
        if value > best {
            best = value;
        }
    }
    best
}
