//! Bid clamping and the MCPC / linear baseline bid rules.

use crate::error::{Error, Result};

/// Clamps a proposed bid to the remaining budget and the bid cap. This is
/// the hard budget guarantee: an infeasible bid is cut down, never placed.
pub fn adjust_bid(bid: u32, remaining_budget: u32, cap: u32) -> u32 {
    bid.min(remaining_budget).min(cap)
}

/// Max-cost-per-click rule: bid the CTR-scaled maximum willingness to pay
/// for a click, rounded to the grid.
pub fn mcpc_bid(pctr: f64, max_cpc: f64, cap: u32) -> u32 {
    let raw = (max_cpc * pctr).round();
    if raw <= 0.0 {
        0
    } else if raw >= cap as f64 {
        cap
    } else {
        raw as u32
    }
}

/// Linear bidding: scale a base bid by how this impression's CTR compares
/// to the average.
pub fn linear_bid(pctr: f64, base_bid: u32, avg_ctr: f64, cap: u32) -> Result<u32> {
    if !(avg_ctr.is_finite() && avg_ctr > 0.0) {
        return Err(Error::config(format!(
            "linear bidding needs a positive average CTR, got {avg_ctr}"
        )));
    }
    let raw = (base_bid as f64 * pctr / avg_ctr).round();
    Ok(if raw <= 0.0 {
        0
    } else if raw >= cap as f64 {
        cap
    } else {
        raw as u32
    })
}
