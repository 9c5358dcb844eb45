//! Auction replay: runs a bidder over a logged campaign in consecutive
//! budget-capped episodes and aggregates Table-style reports.

use crate::bidlog::{BidRecord, CampaignDataset};
use crate::bidopt::{adjust_bid, linear_bid, mcpc_bid, Payment, ValueTable};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Episode shape for replay: `N` auctions per episode, each with a fresh
/// budget derived from the training data (or overridden outright).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeConfig {
    /// Auctions per episode.
    #[serde(default = "default_auctions")]
    pub auctions_per_episode: usize,
    /// Budget fraction `c0`: the episode budget is `c0 * N` times the mean
    /// winning price of the training log.
    #[serde(default = "default_fraction")]
    pub budget_fraction: f64,
    /// Explicit episode budget; wins over the derived one when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_override: Option<u32>,
    #[serde(default = "default_payment")]
    pub payment: Payment,
}

fn default_auctions() -> usize {
    1000
}

fn default_fraction() -> f64 {
    1.0 / 16.0
}

fn default_payment() -> Payment {
    Payment::SecondPrice
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            auctions_per_episode: default_auctions(),
            budget_fraction: default_fraction(),
            budget_override: None,
            payment: default_payment(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.auctions_per_episode == 0 {
            return Err(Error::config("episodes need at least one auction"));
        }
        if !(self.budget_fraction.is_finite() && self.budget_fraction > 0.0) {
            return Err(Error::config("budget fraction must be positive"));
        }
        Ok(())
    }
}

/// Outcome totals of a replay, Table-2 shaped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub auctions: u64,
    /// Won auctions.
    pub impressions: u64,
    pub clicks: u64,
    /// Total spend in grid price units.
    pub cost: u64,
}

impl CampaignReport {
    pub fn absorb(&mut self, other: &CampaignReport) {
        self.auctions += other.auctions;
        self.impressions += other.impressions;
        self.clicks += other.clicks;
        self.cost += other.cost;
    }

    pub fn win_rate(&self) -> Option<f64> {
        derive_report_metrics(self.auctions, self.impressions, self.clicks, self.cost).0
    }

    pub fn cpm(&self) -> Option<f64> {
        derive_report_metrics(self.auctions, self.impressions, self.clicks, self.cost).1
    }

    pub fn ecpc(&self) -> Option<f64> {
        derive_report_metrics(self.auctions, self.impressions, self.clicks, self.cost).2
    }
}

/// Derived report columns: win rate, CPM, and eCPC, following the table
/// conventions `cost/impressions` and `cost/clicks/1000`. Zero denominators
/// yield `None`, never a fault.
pub fn derive_report_metrics(
    auctions: u64,
    impressions: u64,
    clicks: u64,
    cost: u64,
) -> (Option<f64>, Option<f64>, Option<f64>) {
    let win_rate = (auctions > 0).then(|| impressions as f64 / auctions as f64);
    let cpm = (impressions > 0).then(|| cost as f64 / impressions as f64);
    let ecpc = (clicks > 0).then(|| cost as f64 / clicks as f64 / 1000.0);
    (win_rate, cpm, ecpc)
}

/// A bidding strategy replayed against the log. Bids may be infeasible; the
/// replay clamps them to the live budget and the grid cap.
pub trait Bidder {
    fn bid(&mut self, remaining_budget: u32, remaining_auctions: usize, record: &BidRecord)
        -> u32;

    /// Row label in reports.
    fn name(&self) -> &str;
}

/// Replays the solved MDP policy.
pub struct PolicyBidder<'a> {
    table: &'a ValueTable,
}

impl<'a> PolicyBidder<'a> {
    pub fn new(table: &'a ValueTable) -> Self {
        PolicyBidder { table }
    }
}

impl Bidder for PolicyBidder<'_> {
    fn bid(&mut self, remaining_budget: u32, remaining_auctions: usize, _record: &BidRecord) -> u32 {
        self.table.bid_clamped(remaining_budget, remaining_auctions)
    }

    fn name(&self) -> &str {
        "RLB"
    }
}

/// Max-cost-per-click baseline.
pub struct McpcBidder {
    pub max_cpc: f64,
    pub cap: u32,
}

impl Bidder for McpcBidder {
    fn bid(&mut self, _b: u32, _t: usize, record: &BidRecord) -> u32 {
        mcpc_bid(record.pctr, self.max_cpc, self.cap)
    }

    fn name(&self) -> &str {
        "MCPC"
    }
}

/// Linear bidding baseline.
pub struct LinearBidder {
    pub base_bid: u32,
    pub avg_ctr: f64,
    pub cap: u32,
}

impl Bidder for LinearBidder {
    fn bid(&mut self, _b: u32, _t: usize, record: &BidRecord) -> u32 {
        linear_bid(record.pctr, self.base_bid, self.avg_ctr, self.cap).unwrap_or(0)
    }

    fn name(&self) -> &str {
        "LB"
    }
}

/// Bids a constant amount; `u32::MAX` makes an adversarial max bidder.
pub struct ConstantBidder {
    pub bid: u32,
}

impl Bidder for ConstantBidder {
    fn bid(&mut self, _b: u32, _t: usize, _record: &BidRecord) -> u32 {
        self.bid
    }

    fn name(&self) -> &str {
        "CONST"
    }
}

/// Episode budget from the training log: `round(c0 * N * mean winning
/// price)`, where the mean is over uncensored records. The explicit override
/// wins when present.
pub fn compute_episode_budget(
    train_dataset: &CampaignDataset,
    config: &EpisodeConfig,
) -> Result<u32> {
    config.validate()?;
    if let Some(budget) = config.budget_override {
        return Ok(budget);
    }
    let mut total = 0u64;
    let mut wins = 0u64;
    for record in train_dataset.uncensored() {
        total += record.market_price().expect("uncensored") as u64;
        wins += 1;
    }
    if wins == 0 {
        return Err(Error::data(
            "cannot derive an episode budget: training log has no wins",
        ));
    }
    let mean_win_price = total as f64 / wins as f64;
    Ok((config.budget_fraction * config.auctions_per_episode as f64 * mean_win_price).round()
        as u32)
}

/// Replays one episode of at most `N` records under a hard budget.
///
/// Every record must carry its original market price; the strict-win rule
/// decides the outcome, winners are charged per the payment mode, and the
/// cumulative spend can never exceed the episode budget.
pub fn run_episode(
    records: &[BidRecord],
    bidder: &mut dyn Bidder,
    budget: u32,
    payment: Payment,
    cap: u32,
) -> Result<CampaignReport> {
    let mut report = CampaignReport::default();
    let mut remaining = budget;
    for (i, record) in records.iter().enumerate() {
        let market_price = record
            .market_price()
            .ok_or_else(|| Error::data("replay requires uncensored logs"))?;
        let proposed = bidder.bid(remaining, records.len() - i, record);
        let bid = adjust_bid(proposed, remaining, cap);
        report.auctions += 1;
        if bid > market_price {
            let pay = payment.charge(bid, market_price);
            assert!(pay <= remaining, "episode overspent its budget");
            remaining -= pay;
            report.impressions += 1;
            report.clicks += record.click as u64;
            report.cost += pay as u64;
        }
    }
    Ok(report)
}

/// Splits the log into consecutive episodes of `N` auctions, replays each
/// with a fresh budget, and sums the reports. A final partial episode keeps
/// a pro-rated budget.
pub fn run_campaign(
    dataset: &CampaignDataset,
    bidder: &mut dyn Bidder,
    config: &EpisodeConfig,
    budget: u32,
) -> Result<CampaignReport> {
    config.validate()?;
    let n = config.auctions_per_episode;
    let cap = dataset.price_cap();
    let mut report = CampaignReport::default();
    for episode in dataset.records().chunks(n) {
        let episode_budget = if episode.len() == n {
            budget
        } else {
            (budget as f64 * episode.len() as f64 / n as f64).round() as u32
        };
        let one = run_episode(episode, bidder, episode_budget, config.payment, cap)?;
        report.absorb(&one);
    }
    Ok(report)
}
