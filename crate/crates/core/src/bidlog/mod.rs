//! Bid-log data model: auction records, datasets, censoring and splits.
//!
//! Prices live on an integer grid `0..L-1` (`price_levels = L`, default 301).
//! A lost auction is a right-censored observation: the market price is
//! unknown but bounded below by the losing bid.

mod parse;
mod synthetic;

pub use parse::{parse_log, write_tsv, LogSchema, ParseOptions, ParseStats};
pub use synthetic::{generate_synthetic, PriceLaw, SyntheticConfig};

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default price-grid size. iPinYou-style paying prices are small integers;
/// 0..=300 covers them.
pub const DEFAULT_PRICE_LEVELS: usize = 301;

/// What we learned about the market price in one auction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuctionOutcome {
    /// Won (or otherwise fully logged): the market price was observed.
    Observed { market_price: u32 },
    /// Lost: only a lower bound (the losing bid) on the market price is known.
    Censored { lower_bound: u32 },
}

/// One auction observation from a bid log.
#[derive(Debug, Clone, PartialEq)]
pub struct BidRecord {
    pub campaign_id: String,
    /// Ordering key, arbitrary units.
    pub timestamp: i64,
    /// Categorical tokens, `field:value` strings, passed through verbatim.
    pub features: Vec<String>,
    /// The bid that was placed when the log was written. Bids are actions,
    /// not market observations, and may exceed the price grid.
    pub logged_bid: u32,
    pub outcome: AuctionOutcome,
    pub click: bool,
    /// CTR estimate for this impression, in `[0, 1]`.
    pub pctr: f64,
}

impl BidRecord {
    pub fn is_censored(&self) -> bool {
        matches!(self.outcome, AuctionOutcome::Censored { .. })
    }

    pub fn market_price(&self) -> Option<u32> {
        match self.outcome {
            AuctionOutcome::Observed { market_price } => Some(market_price),
            AuctionOutcome::Censored { .. } => None,
        }
    }

    pub fn lower_bound(&self) -> Option<u32> {
        match self.outcome {
            AuctionOutcome::Observed { .. } => None,
            AuctionOutcome::Censored { lower_bound } => Some(lower_bound),
        }
    }

    fn validate(&self, price_levels: usize) -> Result<()> {
        let cap = (price_levels - 1) as u32;
        let price = match self.outcome {
            AuctionOutcome::Observed { market_price } => market_price,
            AuctionOutcome::Censored { lower_bound } => lower_bound,
        };
        if price > cap {
            return Err(Error::data(format!(
                "market price {price} exceeds grid max {cap}"
            )));
        }
        if !self.pctr.is_finite() || !(0.0..=1.0).contains(&self.pctr) {
            return Err(Error::data(format!("pctr {} outside [0, 1]", self.pctr)));
        }
        Ok(())
    }
}

/// A timestamp-ordered sequence of bid records on a shared price grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignDataset {
    records: Vec<BidRecord>,
    price_levels: usize,
}

impl CampaignDataset {
    /// Builds a dataset, sorting records stably by timestamp and checking
    /// that every price field fits the grid.
    pub fn new(mut records: Vec<BidRecord>, price_levels: usize) -> Result<Self> {
        if price_levels < 2 {
            return Err(Error::config("price_levels must be at least 2"));
        }
        for r in &records {
            r.validate(price_levels)?;
        }
        records.sort_by_key(|r| r.timestamp);
        Ok(CampaignDataset {
            records,
            price_levels,
        })
    }

    pub fn records(&self) -> &[BidRecord] {
        &self.records
    }

    pub fn price_levels(&self) -> usize {
        self.price_levels
    }

    /// Highest representable price level, `L - 1`.
    pub fn price_cap(&self) -> u32 {
        (self.price_levels - 1) as u32
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn uncensored(&self) -> impl Iterator<Item = &BidRecord> {
        self.records.iter().filter(|r| !r.is_censored())
    }

    pub fn censored_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_censored()).count()
    }

    /// Mean CTR estimate over all records; 0 for an empty dataset.
    pub fn mean_pctr(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.pctr).sum::<f64>() / self.records.len() as f64
    }
}

/// Replays a bid policy against observed market prices, turning lost
/// auctions into right-censored records.
///
/// A record wins iff `policy_bid > market_price` (ties lose). Losers keep
/// only the losing bid as a lower bound. Every record's `logged_bid` becomes
/// the policy bid; clicks, CTR estimates, and features are untouched.
pub fn apply_censoring(dataset: &CampaignDataset, policy_bids: &[u32]) -> Result<CampaignDataset> {
    if policy_bids.len() != dataset.len() {
        return Err(Error::Dimension(format!(
            "{} policy bids for {} records",
            policy_bids.len(),
            dataset.len()
        )));
    }
    let mut records = Vec::with_capacity(dataset.len());
    for (record, &bid) in dataset.records().iter().zip(policy_bids) {
        let market_price = record.market_price().ok_or_else(|| {
            Error::data("apply_censoring requires fully observed market prices")
        })?;
        let outcome = if bid > market_price {
            AuctionOutcome::Observed { market_price }
        } else {
            AuctionOutcome::Censored { lower_bound: bid }
        };
        records.push(BidRecord {
            logged_bid: bid,
            outcome,
            ..record.clone()
        });
    }
    CampaignDataset::new(records, dataset.price_levels())
}

/// Seeded random partition into `(train, test)` with `fraction` of records
/// in the train part. Timestamp order is preserved within each part.
pub fn train_test_split(
    dataset: &CampaignDataset,
    fraction: f64,
    seed: u64,
) -> Result<(CampaignDataset, CampaignDataset)> {
    if dataset.is_empty() {
        return Err(Error::data("cannot split an empty dataset"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let n = dataset.len();
    let take = (n as f64 * fraction).round() as usize;
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut in_train = vec![false; n];
    for &i in &indices[..take] {
        in_train[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(take), Vec::with_capacity(n - take));
    for (record, &keep) in dataset.records().iter().zip(&in_train) {
        if keep {
            train.push(record.clone());
        } else {
            test.push(record.clone());
        }
    }
    Ok((
        CampaignDataset::new(train, dataset.price_levels())?,
        CampaignDataset::new(test, dataset.price_levels())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(ts: i64, price: u32, click: bool, pctr: f64) -> BidRecord {
        BidRecord {
            campaign_id: "test".into(),
            timestamp: ts,
            features: vec![format!("f0:v{}", ts % 3)],
            logged_bid: price.saturating_add(1).min(300),
            outcome: AuctionOutcome::Observed {
                market_price: price,
            },
            click,
            pctr,
        }
    }

    fn dataset(prices: &[u32]) -> CampaignDataset {
        let records = prices
            .iter()
            .enumerate()
            .map(|(i, &p)| record(i as i64, p, i % 2 == 0, 0.01))
            .collect();
        CampaignDataset::new(records, DEFAULT_PRICE_LEVELS).unwrap()
    }

    #[test]
    fn dataset_sorts_by_timestamp() {
        let mut records = vec![record(5, 1, false, 0.1), record(2, 2, false, 0.1)];
        records[0].campaign_id = "late".into();
        let ds = CampaignDataset::new(records, 301).unwrap();
        assert_eq!(ds.records()[0].timestamp, 2);
        assert_eq!(ds.records()[1].campaign_id, "late");
    }

    #[test]
    fn dataset_rejects_out_of_grid_prices() {
        let r = record(0, 301, false, 0.1);
        assert!(CampaignDataset::new(vec![r], 301).is_err());
    }

    #[test]
    fn dataset_rejects_bad_pctr() {
        let mut r = record(0, 10, false, 0.1);
        r.pctr = 1.5;
        assert!(CampaignDataset::new(vec![r], 301).is_err());
    }

    #[test]
    fn censoring_with_above_grid_bid_censors_nothing() {
        let ds = dataset(&[1, 2, 3, 200, 300]);
        // A bid of L sits above every grid price, so nothing is censored.
        let out = apply_censoring(&ds, &[301; 5]).unwrap();
        assert_eq!(out.censored_count(), 0);
    }

    #[test]
    fn censoring_with_zero_bid_censors_everything() {
        let ds = dataset(&[0, 1, 2]);
        let out = apply_censoring(&ds, &[0, 0, 0]).unwrap();
        assert_eq!(out.censored_count(), 3);
        for r in out.records() {
            assert_eq!(r.lower_bound(), Some(0));
        }
    }

    #[test]
    fn censoring_applies_strict_win_rule() {
        let ds = dataset(&[1, 2, 3]);
        let out = apply_censoring(&ds, &[2, 2, 2]).unwrap();
        let rs = out.records();
        assert_eq!(rs[0].market_price(), Some(1));
        assert_eq!(rs[1].lower_bound(), Some(2));
        assert_eq!(rs[2].lower_bound(), Some(2));
    }

    #[test]
    fn censoring_preserves_labels_and_features() {
        let ds = dataset(&[5, 10, 15, 20]);
        let out = apply_censoring(&ds, &[12, 12, 12, 12]).unwrap();
        assert_eq!(out.len(), ds.len());
        for (a, b) in ds.records().iter().zip(out.records()) {
            assert_eq!(a.click, b.click);
            assert_eq!(a.pctr, b.pctr);
            assert_eq!(a.features, b.features);
            assert_eq!(b.logged_bid, 12);
        }
    }

    #[test]
    fn censoring_rejects_censored_input() {
        let ds = dataset(&[1, 2]);
        let once = apply_censoring(&ds, &[1, 1]).unwrap();
        assert!(apply_censoring(&once, &[5, 5]).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = dataset(&(0..10).collect::<Vec<u32>>());
        let (a, b) = train_test_split(&ds, 0.5, 7).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(b.len(), 5);
        let (a2, b2) = train_test_split(&ds, 0.5, 7).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
    }

    #[test]
    fn split_is_a_partition() {
        let ds = dataset(&(0..23).collect::<Vec<u32>>());
        let (a, b) = train_test_split(&ds, 0.3, 99).unwrap();
        let mut merged: Vec<BidRecord> = a.records().to_vec();
        merged.extend_from_slice(b.records());
        merged.sort_by_key(|r| r.timestamp);
        assert_eq!(merged, ds.records());
    }

    #[test]
    fn split_rejects_empty_dataset() {
        let ds = CampaignDataset::new(vec![], 301).unwrap();
        assert!(train_test_split(&ds, 0.5, 1).is_err());
    }
}
