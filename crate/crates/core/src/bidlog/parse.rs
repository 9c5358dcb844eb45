//! Tab-separated bid-log ingestion and the matching writer.
//!
//! A log line is a fixed set of tab-separated columns; a JSON schema maps
//! column positions to record fields. Market prices are clamped to the grid
//! (and counted); bids pass through unclamped.

use super::{AuctionOutcome, BidRecord, CampaignDataset};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Column map for a TSV bid log. Indices are 0-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSchema {
    /// Column holding the logged bid.
    pub bid: usize,
    /// Column holding the paying (market) price. Empty on censored lines.
    pub pay: usize,
    /// Column holding the click label, `0` or `1`.
    pub click: usize,
    /// Columns holding categorical feature tokens, passed through verbatim.
    #[serde(default)]
    pub features: Vec<usize>,
    /// Optional ordering column; line number is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub campaign: Option<usize>,
    /// Optional CTR-estimate column; 0.0 is assumed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pctr: Option<usize>,
    /// Optional censor flag column (`0`/`1`). Absent means fully observed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censored: Option<usize>,
    /// Column holding the losing bid for censored lines. Required if
    /// `censored` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<usize>,
}

impl LogSchema {
    /// The schema matching [`write_tsv`]'s column layout.
    pub fn canonical(feature_count: usize) -> Self {
        LogSchema {
            timestamp: Some(0),
            campaign: Some(1),
            bid: 2,
            pay: 3,
            censored: Some(4),
            lower_bound: Some(5),
            click: 6,
            pctr: Some(7),
            features: (8..8 + feature_count).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: LogSchema = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("invalid log schema: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.censored.is_some() && self.lower_bound.is_none() {
            return Err(Error::config(
                "schema names a censored column but no lower_bound column",
            ));
        }
        Ok(())
    }

    fn max_index(&self) -> usize {
        let mut max = self.bid.max(self.pay).max(self.click);
        for &f in &self.features {
            max = max.max(f);
        }
        for idx in [
            self.timestamp,
            self.campaign,
            self.pctr,
            self.censored,
            self.lower_bound,
        ]
        .into_iter()
        .flatten()
        {
            max = max.max(idx);
        }
        max
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub price_levels: usize,
    /// Fail on the first malformed line instead of skipping it.
    pub strict: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            price_levels: super::DEFAULT_PRICE_LEVELS,
            strict: true,
        }
    }
}

/// Ingestion counters reported alongside a parsed dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub lines: usize,
    pub parsed: usize,
    pub skipped: usize,
    /// Market prices that fell outside the grid and were clamped to `L-1`.
    pub clamped: usize,
}

/// Parses a TSV bid log into a dataset. Blank lines are ignored; malformed
/// lines either abort (strict) or are skipped and counted.
pub fn parse_log(
    reader: impl BufRead,
    schema: &LogSchema,
    opts: &ParseOptions,
) -> Result<(CampaignDataset, ParseStats)> {
    schema.validate()?;
    let needed = schema.max_index() + 1;
    let cap = (opts.price_levels - 1) as u32;
    let mut stats = ParseStats::default();
    let mut records = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        stats.lines += 1;
        match parse_line(&line, line_no, schema, needed, cap, &mut stats) {
            Ok(record) => {
                records.push(record);
                stats.parsed += 1;
            }
            Err(e) if opts.strict => return Err(e),
            Err(_) => stats.skipped += 1,
        }
    }
    let dataset = CampaignDataset::new(records, opts.price_levels)?;
    Ok((dataset, stats))
}

fn parse_line(
    line: &str,
    line_no: usize,
    schema: &LogSchema,
    needed: usize,
    cap: u32,
    stats: &mut ParseStats,
) -> Result<BidRecord> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() < needed {
        return Err(malformed(
            line_no,
            format!("expected at least {needed} columns, found {}", cols.len()),
        ));
    }

    let bid: u32 = field(cols[schema.bid], line_no, "bid")?;
    let click = match cols[schema.click] {
        "0" => false,
        "1" => true,
        other => return Err(malformed(line_no, format!("click must be 0 or 1, got {other:?}"))),
    };

    let censored = match schema.censored {
        Some(idx) => match cols[idx] {
            "0" => false,
            "1" => true,
            other => {
                return Err(malformed(
                    line_no,
                    format!("censored flag must be 0 or 1, got {other:?}"),
                ))
            }
        },
        None => false,
    };
    let outcome = if censored {
        let idx = schema.lower_bound.expect("validated");
        let lb: u32 = field(cols[idx], line_no, "lower_bound")?;
        AuctionOutcome::Censored {
            lower_bound: clamp_price(lb, cap, stats),
        }
    } else {
        let pay: u32 = field(cols[schema.pay], line_no, "pay")?;
        AuctionOutcome::Observed {
            market_price: clamp_price(pay, cap, stats),
        }
    };

    let timestamp = match schema.timestamp {
        Some(idx) => field(cols[idx], line_no, "timestamp")?,
        None => line_no as i64,
    };
    let campaign_id = schema
        .campaign
        .map(|idx| cols[idx].to_string())
        .unwrap_or_default();
    let pctr: f64 = match schema.pctr {
        Some(idx) => field(cols[idx], line_no, "pctr")?,
        None => 0.0,
    };
    if !pctr.is_finite() || !(0.0..=1.0).contains(&pctr) {
        return Err(malformed(line_no, format!("pctr {pctr} outside [0, 1]")));
    }
    let features = schema
        .features
        .iter()
        .map(|&idx| cols[idx].to_string())
        .collect();

    Ok(BidRecord {
        campaign_id,
        timestamp,
        features,
        logged_bid: bid,
        outcome,
        click,
        pctr,
    })
}

fn clamp_price(price: u32, cap: u32, stats: &mut ParseStats) -> u32 {
    if price > cap {
        stats.clamped += 1;
        cap
    } else {
        price
    }
}

fn field<T: std::str::FromStr>(raw: &str, line_no: usize, name: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| malformed(line_no, format!("bad {name} value {raw:?}")))
}

fn malformed(line: usize, message: String) -> Error {
    Error::Parse { line, message }
}

/// Writes a dataset in the canonical column layout (see
/// [`LogSchema::canonical`]). All records must carry the same number of
/// feature tokens.
pub fn write_tsv(dataset: &CampaignDataset, mut writer: impl Write) -> Result<()> {
    let feature_count = dataset.records().first().map_or(0, |r| r.features.len());
    for record in dataset.records() {
        if record.features.len() != feature_count {
            return Err(Error::data(
                "cannot serialize records with differing feature counts",
            ));
        }
        let (pay, censored, lower) = match record.outcome {
            AuctionOutcome::Observed { market_price } => (market_price.to_string(), "0", String::new()),
            AuctionOutcome::Censored { lower_bound } => (String::new(), "1", lower_bound.to_string()),
        };
        write!(
            writer,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            record.timestamp,
            record.campaign_id,
            record.logged_bid,
            pay,
            censored,
            lower,
            record.click as u8,
            record.pctr,
        )?;
        for token in &record.features {
            write!(writer, "\t{token}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}
