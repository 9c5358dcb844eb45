//! Recurrent landscape forecaster.
//!
//! Architecture: mean of learned token embeddings -> GRU cell -> affine
//! output layer -> softmax over price levels. Trained with minibatch SGD;
//! gradients are hand-rolled reverse-mode through the whole stack.
//!
//! Uncensored records contribute a squared-distance term against their
//! one-hot price vector; censored records contribute the negative log of
//! the predicted mass at or above their lower bound, weighted by the
//! censored-loss weight.

use super::PriceDistribution;
use crate::bidlog::{BidRecord, CampaignDataset};
use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Training hyperparameters for the forecaster.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// SGD step size.
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Frobenius penalty on the embedding table and GRU weight matrices.
    #[serde(default = "default_lambda")]
    pub lambda_recurrent: f64,
    /// Frobenius penalty on the output-layer weights.
    #[serde(default = "default_lambda")]
    pub lambda_output: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_minibatch")]
    pub minibatch: usize,
    #[serde(default)]
    pub seed: u64,
    /// Floor inside logarithms.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Weight of the censored survival term in the total loss.
    #[serde(default = "default_censored_weight")]
    pub censored_weight: f64,
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    #[serde(default = "default_hidden_dim")]
    pub hidden_dim: usize,
}

fn default_lr() -> f64 {
    0.01
}
fn default_lambda() -> f64 {
    1e-4
}
fn default_epochs() -> usize {
    30
}
fn default_minibatch() -> usize {
    64
}
fn default_epsilon() -> f64 {
    1e-12
}
fn default_censored_weight() -> f64 {
    0.25
}
fn default_embed_dim() -> usize {
    16
}
fn default_hidden_dim() -> usize {
    32
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: default_lr(),
            lambda_recurrent: default_lambda(),
            lambda_output: default_lambda(),
            epochs: default_epochs(),
            minibatch: default_minibatch(),
            seed: 0,
            epsilon: default_epsilon(),
            censored_weight: default_censored_weight(),
            embed_dim: default_embed_dim(),
            hidden_dim: default_hidden_dim(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-6) {
            return Err(Error::config("epsilon must lie in (0, 1e-6]"));
        }
        if self.lambda_recurrent < 0.0 || self.lambda_output < 0.0 || self.censored_weight < 0.0 {
            return Err(Error::config("regularization weights must be nonnegative"));
        }
        if self.minibatch == 0 || self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::config("minibatch and layer sizes must be >= 1"));
        }
        Ok(())
    }
}

/// Parameters of the landscape forecaster.
///
/// Unknown tokens map to embedding row 0; vocabulary tokens occupy rows
/// `1..=V`. GRU weight matrices act on the concatenation `[x, h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecasterParams {
    vocab: BTreeMap<String, usize>,
    pub embedding: Array2<f64>,
    pub w_update: Array2<f64>,
    pub b_update: Array1<f64>,
    pub w_reset: Array2<f64>,
    pub b_reset: Array1<f64>,
    pub w_cand: Array2<f64>,
    pub b_cand: Array1<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

impl ForecasterParams {
    /// Seeded uniform init in `[-0.1, 0.1]`.
    pub fn init(
        vocab: BTreeMap<String, usize>,
        embed_dim: usize,
        hidden_dim: usize,
        levels: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mat = |rows: usize, cols: usize| {
            Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-0.1..0.1))
        };
        let rows = vocab.len() + 1;
        let embedding = mat(rows, embed_dim);
        let w_update = mat(hidden_dim, embed_dim + hidden_dim);
        let b_update = Array1::zeros(hidden_dim);
        let w_reset = mat(hidden_dim, embed_dim + hidden_dim);
        let b_reset = Array1::zeros(hidden_dim);
        let w_cand = mat(hidden_dim, embed_dim + hidden_dim);
        let b_cand = Array1::zeros(hidden_dim);
        let w_out = mat(levels, hidden_dim);
        let b_out = Array1::zeros(levels);
        ForecasterParams {
            vocab,
            embedding,
            w_update,
            b_update,
            w_reset,
            b_reset,
            w_cand,
            b_cand,
            w_out,
            b_out,
        }
    }

    /// Token -> embedding-row map built from every token in the dataset.
    pub fn build_vocab(dataset: &CampaignDataset) -> BTreeMap<String, usize> {
        let mut tokens: Vec<&str> = dataset
            .records()
            .iter()
            .flat_map(|r| r.features.iter().map(String::as_str))
            .collect();
        tokens.sort_unstable();
        tokens.dedup();
        tokens
            .into_iter()
            .enumerate()
            .map(|(i, t)| (t.to_string(), i + 1))
            .collect()
    }

    pub fn vocab(&self) -> &BTreeMap<String, usize> {
        &self.vocab
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_out.ncols()
    }

    pub fn levels(&self) -> usize {
        self.w_out.nrows()
    }

    pub fn initial_state(&self) -> Array1<f64> {
        Array1::zeros(self.hidden_dim())
    }

    /// Mean of the record's token embeddings (row indices returned for
    /// backprop). A record with no features reads the fallback row.
    fn embed(&self, record: &BidRecord) -> (Array1<f64>, Vec<usize>) {
        let rows: Vec<usize> = if record.features.is_empty() {
            vec![0]
        } else {
            record
                .features
                .iter()
                .map(|t| self.vocab.get(t).copied().unwrap_or(0))
                .collect()
        };
        let mut x = Array1::zeros(self.embed_dim());
        for &row in &rows {
            x += &self.embedding.row(row);
        }
        x /= rows.len() as f64;
        (x, rows)
    }

    fn validate_dims(&self) -> Result<()> {
        let (e, d, l) = (self.embed_dim(), self.hidden_dim(), self.levels());
        let gate_ok = |w: &Array2<f64>, b: &Array1<f64>| w.dim() == (d, e + d) && b.len() == d;
        if !gate_ok(&self.w_update, &self.b_update)
            || !gate_ok(&self.w_reset, &self.b_reset)
            || !gate_ok(&self.w_cand, &self.b_cand)
            || self.b_out.len() != l
        {
            return Err(Error::Dimension("inconsistent forecaster shapes".into()));
        }
        if self.vocab.len() + 1 != self.embedding.nrows()
            || self.vocab.values().any(|&r| r == 0 || r > self.vocab.len())
        {
            return Err(Error::Dimension("vocab does not match embedding table".into()));
        }
        let finite = |a: &Array2<f64>| a.iter().all(|v| v.is_finite());
        let finite1 = |a: &Array1<f64>| a.iter().all(|v| v.is_finite());
        if !(finite(&self.embedding)
            && finite(&self.w_update)
            && finite(&self.w_reset)
            && finite(&self.w_cand)
            && finite(&self.w_out)
            && finite1(&self.b_update)
            && finite1(&self.b_reset)
            && finite1(&self.b_cand)
            && finite1(&self.b_out))
        {
            return Err(Error::NonFinite("forecaster parameters".into()));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One GRU update:
/// `z = sig(Wz [x,h] + bz)`, `r = sig(Wr [x,h] + br)`,
/// `hhat = tanh(Wh [x, r*h] + bh)`, `h' = (1-z)*h + z*hhat`.
pub fn rnn_step(
    x: &Array1<f64>,
    h_prev: &Array1<f64>,
    params: &ForecasterParams,
) -> Result<Array1<f64>> {
    Ok(rnn_step_cached(x, h_prev, params)?.h)
}

struct GruCache {
    z: Array1<f64>,
    r: Array1<f64>,
    hhat: Array1<f64>,
    h: Array1<f64>,
}

fn rnn_step_cached(
    x: &Array1<f64>,
    h_prev: &Array1<f64>,
    params: &ForecasterParams,
) -> Result<GruCache> {
    let (e, d) = (params.embed_dim(), params.hidden_dim());
    if x.len() != e || h_prev.len() != d {
        return Err(Error::Dimension(format!(
            "rnn_step expects input {e} and hidden {d}, got {} and {}",
            x.len(),
            h_prev.len()
        )));
    }
    let mut concat = Array1::zeros(e + d);
    concat.slice_mut(ndarray::s![..e]).assign(x);
    concat.slice_mut(ndarray::s![e..]).assign(h_prev);

    let z = (params.w_update.dot(&concat) + &params.b_update).mapv(sigmoid);
    let r = (params.w_reset.dot(&concat) + &params.b_reset).mapv(sigmoid);

    let mut gated = Array1::zeros(e + d);
    gated.slice_mut(ndarray::s![..e]).assign(x);
    gated.slice_mut(ndarray::s![e..]).assign(&(&r * h_prev));
    let hhat = (params.w_cand.dot(&gated) + &params.b_cand).mapv(f64::tanh);

    let h = (1.0 - &z) * h_prev + &z * &hhat;
    Ok(GruCache { z, r, hhat, h })
}

fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exp = logits.mapv(|v| (v - max).exp());
    let total = exp.sum();
    exp / total
}

/// Embeds a record, advances the recurrent state, and renders the price
/// forecast as a normalized distribution.
pub fn forward_predict(
    record: &BidRecord,
    h_prev: &Array1<f64>,
    params: &ForecasterParams,
) -> Result<(PriceDistribution, Array1<f64>)> {
    let (x, _) = params.embed(record);
    let h = rnn_step(&x, h_prev, params)?;
    let probs = softmax(&(params.w_out.dot(&h) + &params.b_out));
    Ok((PriceDistribution::new(probs.to_vec())?, h))
}

/// Mean squared Euclidean distance between predicted and target landscapes.
pub fn loss_mse(predictions: &[PriceDistribution], targets: &[PriceDistribution]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(Error::Dimension(format!(
            "loss_mse needs equal nonempty sequences, got {} and {}",
            predictions.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        if p.levels() != t.levels() {
            return Err(Error::Dimension("prediction/target level mismatch".into()));
        }
        total += p
            .pmf()
            .iter()
            .zip(t.pmf())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(total / predictions.len() as f64)
}

fn frob_sq(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Adds the Frobenius penalties and the weighted censored term to a data
/// loss. Only weight matrices are regularized, never biases.
pub fn loss_total(
    loss: f64,
    params: &ForecasterParams,
    lambda_recurrent: f64,
    lambda_output: f64,
    censored_terms: f64,
    censored_weight: f64,
) -> f64 {
    let recurrent = frob_sq(&params.embedding)
        + frob_sq(&params.w_update)
        + frob_sq(&params.w_reset)
        + frob_sq(&params.w_cand);
    loss + lambda_recurrent * recurrent
        + lambda_output * frob_sq(&params.w_out)
        + censored_weight * censored_terms
}

/// Per-parameter gradients of the data loss (regularization is applied by
/// [`sgd_step`], not accumulated here).
#[derive(Debug, Clone)]
pub struct Gradients {
    pub embedding: Array2<f64>,
    pub w_update: Array2<f64>,
    pub b_update: Array1<f64>,
    pub w_reset: Array2<f64>,
    pub b_reset: Array1<f64>,
    pub w_cand: Array2<f64>,
    pub b_cand: Array1<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

impl Gradients {
    pub fn zeros(params: &ForecasterParams) -> Self {
        Gradients {
            embedding: Array2::zeros(params.embedding.dim()),
            w_update: Array2::zeros(params.w_update.dim()),
            b_update: Array1::zeros(params.b_update.len()),
            w_reset: Array2::zeros(params.w_reset.dim()),
            b_reset: Array1::zeros(params.b_reset.len()),
            w_cand: Array2::zeros(params.w_cand.dim()),
            b_cand: Array1::zeros(params.b_cand.len()),
            w_out: Array2::zeros(params.w_out.dim()),
            b_out: Array1::zeros(params.b_out.len()),
        }
    }
}

/// One SGD update: `p <- p - eta * grad - eta * lambda_block * 2p`, with
/// `lambda_recurrent` on the embedding and GRU weights, `lambda_output` on
/// the output weights, and no decay on biases.
pub fn sgd_step(
    params: &mut ForecasterParams,
    grads: &Gradients,
    learning_rate: f64,
    lambda_recurrent: f64,
    lambda_output: f64,
) -> Result<()> {
    let blocks: [(&str, &Array2<f64>); 5] = [
        ("embedding", &grads.embedding),
        ("w_update", &grads.w_update),
        ("w_reset", &grads.w_reset),
        ("w_cand", &grads.w_cand),
        ("w_out", &grads.w_out),
    ];
    for (name, block) in blocks {
        if block.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient block {name}")));
        }
    }
    let biases: [(&str, &Array1<f64>); 4] = [
        ("b_update", &grads.b_update),
        ("b_reset", &grads.b_reset),
        ("b_cand", &grads.b_cand),
        ("b_out", &grads.b_out),
    ];
    for (name, block) in biases {
        if block.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient block {name}")));
        }
    }

    let decay = |w: &mut Array2<f64>, g: &Array2<f64>, lambda: f64| {
        ndarray::Zip::from(w).and(g).for_each(|p, &grad| {
            *p -= learning_rate * grad + learning_rate * lambda * 2.0 * *p;
        });
    };
    decay(&mut params.embedding, &grads.embedding, lambda_recurrent);
    decay(&mut params.w_update, &grads.w_update, lambda_recurrent);
    decay(&mut params.w_reset, &grads.w_reset, lambda_recurrent);
    decay(&mut params.w_cand, &grads.w_cand, lambda_recurrent);
    decay(&mut params.w_out, &grads.w_out, lambda_output);
    params.b_update.scaled_add(-learning_rate, &grads.b_update);
    params.b_reset.scaled_add(-learning_rate, &grads.b_reset);
    params.b_cand.scaled_add(-learning_rate, &grads.b_cand);
    params.b_out.scaled_add(-learning_rate, &grads.b_out);
    Ok(())
}

/// Data-loss pieces of one record sequence.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossBreakdown {
    /// Mean squared distance over uncensored steps (0 if none).
    pub mse: f64,
    /// Mean `-ln(mass >= lower_bound)` over censored steps (0 if none).
    pub censored: f64,
    pub uncensored_steps: usize,
    pub censored_steps: usize,
}

impl LossBreakdown {
    /// Total including regularization, as used for the SGD objective.
    pub fn total(&self, params: &ForecasterParams, cfg: &TrainConfig) -> f64 {
        loss_total(
            self.mse,
            params,
            cfg.lambda_recurrent,
            cfg.lambda_output,
            self.censored,
            cfg.censored_weight,
        )
    }
}

struct StepCache {
    rows: Vec<usize>,
    x: Array1<f64>,
    h_prev: Array1<f64>,
    gru: GruCache,
    probs: Array1<f64>,
}

fn forward_sequence(
    params: &ForecasterParams,
    records: &[BidRecord],
    h0: &Array1<f64>,
    cfg: &TrainConfig,
) -> Result<(Vec<StepCache>, LossBreakdown)> {
    let mut caches = Vec::with_capacity(records.len());
    let mut h = h0.clone();
    let mut breakdown = LossBreakdown::default();
    let mut mse_sum = 0.0;
    let mut cens_sum = 0.0;
    for record in records {
        let (x, rows) = params.embed(record);
        let gru = rnn_step_cached(&x, &h, params)?;
        let probs = softmax(&(params.w_out.dot(&gru.h) + &params.b_out));
        match record.market_price() {
            Some(price) => {
                let target = price as usize;
                let mut sq = 0.0;
                for (i, &p) in probs.iter().enumerate() {
                    let y = if i == target { 1.0 } else { 0.0 };
                    sq += (p - y) * (p - y);
                }
                mse_sum += sq;
                breakdown.uncensored_steps += 1;
            }
            None => {
                let lb = record.lower_bound().expect("censored") as usize;
                let mass: f64 = probs.iter().skip(lb).sum();
                cens_sum += -(mass.max(cfg.epsilon)).ln();
                breakdown.censored_steps += 1;
            }
        }
        let h_prev = std::mem::replace(&mut h, gru.h.clone());
        caches.push(StepCache {
            rows,
            x,
            h_prev,
            gru,
            probs,
        });
    }
    if breakdown.uncensored_steps > 0 {
        breakdown.mse = mse_sum / breakdown.uncensored_steps as f64;
    }
    if breakdown.censored_steps > 0 {
        breakdown.censored = cens_sum / breakdown.censored_steps as f64;
    }
    Ok((caches, breakdown))
}

/// Forward pass over a record sequence: data-loss breakdown plus the final
/// hidden state.
pub fn sequence_loss(
    params: &ForecasterParams,
    records: &[BidRecord],
    h0: &Array1<f64>,
    cfg: &TrainConfig,
) -> Result<(LossBreakdown, Array1<f64>)> {
    let (caches, breakdown) = forward_sequence(params, records, h0, cfg)?;
    let h_end = caches.last().map_or_else(|| h0.clone(), |c| c.gru.h.clone());
    Ok((breakdown, h_end))
}

/// Reverse-mode gradients of the sequence data loss
/// (`mse + censored_weight * censored`) with respect to every parameter.
pub fn sequence_gradients(
    params: &ForecasterParams,
    records: &[BidRecord],
    h0: &Array1<f64>,
    cfg: &TrainConfig,
) -> Result<(LossBreakdown, Gradients, Array1<f64>)> {
    let (caches, breakdown) = forward_sequence(params, records, h0, cfg)?;
    let mut grads = Gradients::zeros(params);
    let (e, d) = (params.embed_dim(), params.hidden_dim());
    let unc_scale = if breakdown.uncensored_steps > 0 {
        1.0 / breakdown.uncensored_steps as f64
    } else {
        0.0
    };
    let cen_scale = if breakdown.censored_steps > 0 {
        cfg.censored_weight / breakdown.censored_steps as f64
    } else {
        0.0
    };

    let mut dh_carry: Array1<f64> = Array1::zeros(d);
    for (cache, record) in caches.iter().zip(records).rev() {
        let probs = &cache.probs;
        // dL/dp, then through the softmax Jacobian to the logits.
        let mut dp = Array1::zeros(probs.len());
        match record.market_price() {
            Some(price) => {
                let target = price as usize;
                for (i, v) in dp.iter_mut().enumerate() {
                    let y = if i == target { 1.0 } else { 0.0 };
                    *v = 2.0 * (probs[i] - y) * unc_scale;
                }
            }
            None => {
                let lb = record.lower_bound().expect("censored") as usize;
                let mass: f64 = probs.iter().skip(lb).sum();
                // Below the floor the loss is clamped flat, so the gradient
                // stays zero.
                if mass > cfg.epsilon {
                    for v in dp.iter_mut().skip(lb) {
                        *v = -cen_scale / mass;
                    }
                }
            }
        }
        let inner: f64 = dp.iter().zip(probs.iter()).map(|(a, b)| a * b).sum();
        let dlogits = probs * &(dp - inner);

        // Output layer.
        for (i, &dl) in dlogits.iter().enumerate() {
            grads.b_out[i] += dl;
            for (j, &hj) in cache.gru.h.iter().enumerate() {
                grads.w_out[[i, j]] += dl * hj;
            }
        }
        let dh = params.w_out.t().dot(&dlogits) + &dh_carry;

        // GRU cell.
        let gru = &cache.gru;
        let dz = &dh * &(&gru.hhat - &cache.h_prev);
        let dhhat = &dh * &gru.z;
        let mut dh_prev = &dh * &(1.0 - &gru.z);

        let da_cand = &dhhat * &gru.hhat.mapv(|v| 1.0 - v * v);
        let mut gated = Array1::zeros(e + d);
        gated.slice_mut(ndarray::s![..e]).assign(&cache.x);
        gated
            .slice_mut(ndarray::s![e..])
            .assign(&(&gru.r * &cache.h_prev));
        accumulate_outer(&mut grads.w_cand, &da_cand, &gated);
        grads.b_cand += &da_cand;
        let dgated = params.w_cand.t().dot(&da_cand);
        let mut dx = dgated.slice(ndarray::s![..e]).to_owned();
        let drh = dgated.slice(ndarray::s![e..]).to_owned();
        let dr = &drh * &cache.h_prev;
        dh_prev += &(&drh * &gru.r);

        let da_update = &dz * &gru.z.mapv(|v| v * (1.0 - v));
        let da_reset = &dr * &gru.r.mapv(|v| v * (1.0 - v));
        let mut concat = Array1::zeros(e + d);
        concat.slice_mut(ndarray::s![..e]).assign(&cache.x);
        concat.slice_mut(ndarray::s![e..]).assign(&cache.h_prev);
        accumulate_outer(&mut grads.w_update, &da_update, &concat);
        grads.b_update += &da_update;
        accumulate_outer(&mut grads.w_reset, &da_reset, &concat);
        grads.b_reset += &da_reset;
        let dconcat = params.w_update.t().dot(&da_update) + params.w_reset.t().dot(&da_reset);
        dx += &dconcat.slice(ndarray::s![..e]);
        dh_prev += &dconcat.slice(ndarray::s![e..]);

        // Token embeddings: the mean splits the gradient evenly.
        let per_row = &dx / cache.rows.len() as f64;
        for &row in &cache.rows {
            for (j, &g) in per_row.iter().enumerate() {
                grads.embedding[[row, j]] += g;
            }
        }

        dh_carry = dh_prev;
    }

    let h_end = caches.last().map_or_else(|| h0.clone(), |c| c.gru.h.clone());
    Ok((breakdown, grads, h_end))
}

fn accumulate_outer(acc: &mut Array2<f64>, col: &Array1<f64>, row: &Array1<f64>) {
    for (i, &c) in col.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            acc[[i, j]] += c * r;
        }
    }
}

/// Per-epoch training losses (`mse` is the data term, `total` adds
/// regularization and the censored term, evaluated at epoch end).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mse: f64,
    pub total: f64,
}

/// Trains the forecaster with minibatch SGD over the timestamp-ordered log.
///
/// Backpropagation is truncated at minibatch boundaries: the hidden state
/// carries across chunks within an epoch but gradients do not. Deterministic
/// given the seed.
pub fn train(
    dataset: &CampaignDataset,
    cfg: &TrainConfig,
) -> Result<(ForecasterParams, Vec<EpochStats>)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::data("cannot train on an empty dataset"));
    }
    let vocab = ForecasterParams::build_vocab(dataset);
    let mut params = ForecasterParams::init(
        vocab,
        cfg.embed_dim,
        cfg.hidden_dim,
        dataset.price_levels(),
        cfg.seed,
    );

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut h = params.initial_state();
        let mut mse_sum = 0.0;
        let mut mse_count = 0usize;
        let mut cens_sum = 0.0;
        let mut cens_count = 0usize;
        for (chunk_idx, chunk) in dataset.records().chunks(cfg.minibatch).enumerate() {
            let (breakdown, grads, h_end) = sequence_gradients(&params, chunk, &h, cfg)?;
            let chunk_total = breakdown.total(&params, cfg);
            if !chunk_total.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss at epoch {epoch}, batch {chunk_idx}"
                )));
            }
            sgd_step(
                &mut params,
                &grads,
                cfg.learning_rate,
                cfg.lambda_recurrent,
                cfg.lambda_output,
            )?;
            mse_sum += breakdown.mse * breakdown.uncensored_steps as f64;
            mse_count += breakdown.uncensored_steps;
            cens_sum += breakdown.censored * breakdown.censored_steps as f64;
            cens_count += breakdown.censored_steps;
            h = h_end;
        }
        let mse = if mse_count > 0 {
            mse_sum / mse_count as f64
        } else {
            0.0
        };
        let censored = if cens_count > 0 {
            cens_sum / cens_count as f64
        } else {
            0.0
        };
        let total = loss_total(
            mse,
            &params,
            cfg.lambda_recurrent,
            cfg.lambda_output,
            censored,
            cfg.censored_weight,
        );
        log::debug!("epoch {epoch}: L={mse:.6} L_total={total:.6}");
        history.push(EpochStats {
            epoch,
            mse,
            total,
        });
    }
    Ok((params, history))
}

/// Serialization mirror with explicit dimensions.
#[derive(Serialize, Deserialize)]
struct ForecasterJson {
    vocab: BTreeMap<String, usize>,
    embed_dim: usize,
    hidden_dim: usize,
    levels: usize,
    embedding: Vec<Vec<f64>>,
    w_update: Vec<Vec<f64>>,
    b_update: Vec<f64>,
    w_reset: Vec<Vec<f64>>,
    b_reset: Vec<f64>,
    w_cand: Vec<Vec<f64>>,
    b_cand: Vec<f64>,
    w_out: Vec<Vec<f64>>,
    b_out: Vec<f64>,
}

fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|row| row.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>, cols: usize) -> Result<Array2<f64>> {
    let nrows = rows.len();
    let mut flat = Vec::with_capacity(nrows * cols);
    for row in rows {
        if row.len() != cols {
            return Err(Error::Dimension(format!(
                "expected rows of {cols} entries, found {}",
                row.len()
            )));
        }
        flat.extend(row);
    }
    Array2::from_shape_vec((nrows, cols), flat)
        .map_err(|e| Error::Dimension(format!("matrix shape: {e}")))
}

impl Serialize for ForecasterParams {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ForecasterJson {
            vocab: self.vocab.clone(),
            embed_dim: self.embed_dim(),
            hidden_dim: self.hidden_dim(),
            levels: self.levels(),
            embedding: to_rows(&self.embedding),
            w_update: to_rows(&self.w_update),
            b_update: self.b_update.to_vec(),
            w_reset: to_rows(&self.w_reset),
            b_reset: self.b_reset.to_vec(),
            w_cand: to_rows(&self.w_cand),
            b_cand: self.b_cand.to_vec(),
            w_out: to_rows(&self.w_out),
            b_out: self.b_out.to_vec(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ForecasterParams {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let json = ForecasterJson::deserialize(deserializer)?;
        let (e, d) = (json.embed_dim, json.hidden_dim);
        let build = || -> Result<ForecasterParams> {
            let params = ForecasterParams {
                vocab: json.vocab,
                embedding: from_rows(json.embedding, e)?,
                w_update: from_rows(json.w_update, e + d)?,
                b_update: Array1::from_vec(json.b_update),
                w_reset: from_rows(json.w_reset, e + d)?,
                b_reset: Array1::from_vec(json.b_reset),
                w_cand: from_rows(json.w_cand, e + d)?,
                b_cand: Array1::from_vec(json.b_cand),
                w_out: from_rows(json.w_out, d)?,
                b_out: Array1::from_vec(json.b_out),
            };
            params.validate_dims()?;
            if params.levels() != json.levels {
                return Err(Error::Dimension("levels field does not match output layer".into()));
            }
            Ok(params)
        };
        build().map_err(serde::de::Error::custom)
    }
}
