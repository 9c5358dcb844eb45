//! Evaluation metrics for market-price models: AUC, log loss, ANLP.

use crate::bidlog::CampaignDataset;
use crate::error::{Error, Result};
use crate::landscape::{MarketModel, PriceDistribution};

/// Default floor inside logarithms.
pub const DEFAULT_LOG_EPSILON: f64 = 1e-12;

/// Mann-Whitney AUC: the probability a uniformly random positive outscores a
/// random negative, ties counting one half.
///
/// Computed via average ranks, which equals the O(n^2) pairwise count.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::data("undefined AUC: labels contain a single class"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("AUC scores".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of positive ranks with average ranks across ties.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j share the average rank.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum += avg_rank;
            }
        }
        i = j;
    }
    let n_pos = positives as f64;
    let n_neg = negatives as f64;
    Ok((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// Binary cross-entropy with an epsilon floor inside the logarithms.
pub fn log_loss(probs: &[f64], labels: &[bool], epsilon: f64) -> Result<f64> {
    if probs.is_empty() || probs.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "log_loss needs equal nonempty inputs, got {} and {}",
            probs.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        let p_event = if y { p } else { 1.0 - p };
        total -= p_event.max(epsilon).ln();
    }
    Ok(total / probs.len() as f64)
}

/// Average negative log probability of the true price under each forecast.
/// Callers must pass uncensored observations only.
pub fn anlp(
    distributions: &[PriceDistribution],
    true_prices: &[u32],
    epsilon: f64,
) -> Result<f64> {
    if distributions.is_empty() || distributions.len() != true_prices.len() {
        return Err(Error::Dimension(format!(
            "anlp needs equal nonempty inputs, got {} and {}",
            distributions.len(),
            true_prices.len()
        )));
    }
    let mut total = 0.0;
    for (dist, &price) in distributions.iter().zip(true_prices) {
        if price as usize >= dist.levels() {
            return Err(Error::Range(format!(
                "true price {price} outside grid of {}",
                dist.levels()
            )));
        }
        total -= dist.mass_at(price).max(epsilon).ln();
    }
    Ok(total / distributions.len() as f64)
}

/// Walks a dataset in order and evaluates the model's ANLP on it.
/// Errors on censored records: filter or replay them out first.
pub fn anlp_model(model: &MarketModel, dataset: &CampaignDataset, epsilon: f64) -> Result<f64> {
    if model.price_levels() != dataset.price_levels() {
        return Err(Error::config(format!(
            "model grid {} does not match dataset grid {}",
            model.price_levels(),
            dataset.price_levels()
        )));
    }
    let mut state = model.initial_state();
    let mut total = 0.0;
    let mut count = 0usize;
    for record in dataset.records() {
        let dist = model.predict(record, &mut state)?;
        let price = record.market_price().ok_or_else(|| {
            Error::data("anlp is defined on uncensored records only; filter the dataset")
        })?;
        total -= dist.mass_at(price).max(epsilon).ln();
        count += 1;
    }
    if count == 0 {
        return Err(Error::data("anlp over an empty dataset"));
    }
    Ok(total / count as f64)
}

/// One Table-1 row: win/lose AUC and log loss at the logged bid, plus the
/// ANLP of the price forecasts on the uncensored records.
#[derive(Debug, Clone, Copy)]
pub struct ModelScores {
    /// `None` when the log has only wins or only losses.
    pub auc: Option<f64>,
    pub log_loss: f64,
    pub anlp: f64,
}

/// Scores a model over a dataset in one forward pass: the win/lose task uses
/// every record, the ANLP only the uncensored ones.
pub fn evaluate_model(
    model: &MarketModel,
    dataset: &CampaignDataset,
    epsilon: f64,
) -> Result<ModelScores> {
    if model.price_levels() != dataset.price_levels() {
        return Err(Error::config(format!(
            "model grid {} does not match dataset grid {}",
            model.price_levels(),
            dataset.price_levels()
        )));
    }
    if dataset.is_empty() {
        return Err(Error::data("cannot evaluate a model on an empty dataset"));
    }
    let mut state = model.initial_state();
    let mut scores = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    let mut nlp_total = 0.0;
    let mut nlp_count = 0usize;
    for record in dataset.records() {
        let dist = model.predict(record, &mut state)?;
        scores.push(dist.prob_below(record.logged_bid));
        labels.push(!record.is_censored());
        if let Some(price) = record.market_price() {
            nlp_total -= dist.mass_at(price).max(epsilon).ln();
            nlp_count += 1;
        }
    }
    if nlp_count == 0 {
        return Err(Error::data(
            "cannot evaluate ANLP: the dataset has no uncensored records",
        ));
    }
    let auc_value = match auc(&scores, &labels) {
        Ok(v) => Some(v),
        Err(Error::Data(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ModelScores {
        auc: auc_value,
        log_loss: log_loss(&scores, &labels, epsilon)?,
        anlp: nlp_total / nlp_count as f64,
    })
}

/// Builds the win/lose classification task behind the Table-1 AUC:
/// score = predicted win probability at the logged bid, label = realized win.
pub fn win_auc_inputs(
    model: &MarketModel,
    dataset: &CampaignDataset,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if model.price_levels() != dataset.price_levels() {
        return Err(Error::config(format!(
            "model grid {} does not match dataset grid {}",
            model.price_levels(),
            dataset.price_levels()
        )));
    }
    let mut state = model.initial_state();
    let mut scores = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    for record in dataset.records() {
        let dist = model.predict(record, &mut state)?;
        scores.push(dist.prob_below(record.logged_bid));
        labels.push(!record.is_censored());
    }
    Ok((scores, labels))
}
