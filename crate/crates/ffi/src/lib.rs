//! C ABI for the bidcraft engine.
//!
//! Conventions:
//! * Heap objects travel as opaque handles (`BcDataset`, `BcModel`,
//!   `BcTable`); free them with the matching `bc_*_free`.
//! * Every fallible call returns a [`BcStatus`]; on failure,
//!   [`bc_last_error`] holds a message valid until the next call on the
//!   same thread.
//! * Strings returned by the library are freed with [`bc_string_free`].
//! * Structured parameters arrive as JSON (same schemas as the CLI's run
//!   config sections).

use bidcraft_core::bidlog::{
    generate_synthetic, parse_log, CampaignDataset, LogSchema, ParseOptions, SyntheticConfig,
};
use bidcraft_core::bidopt::{
    solve_exact, solve_truncated, SolverConfig, TransitionModel, ValueTable,
};
use bidcraft_core::error::Error;
use bidcraft_core::landscape::{MarketModel, TrainConfig};
use bidcraft_core::metrics::evaluate_model;
use bidcraft_core::simulator::{
    compute_episode_budget, run_campaign, ConstantBidder, EpisodeConfig, LinearBidder, McpcBidder,
    PolicyBidder,
};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

/// Result code of a bidcraft call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcStatus {
    BcOk = 0,
    /// Null pointer, bad UTF-8, or invalid configuration.
    BcInvalidArgument = 1,
    /// Malformed input data.
    BcParseError = 2,
    /// The data cannot support the operation.
    BcDataError = 3,
    /// Filesystem or serialization failure.
    BcIoError = 4,
    /// Non-finite numbers or dimension mismatches.
    BcNumericError = 5,
    /// An index outside a table or grid.
    BcRangeError = 6,
    /// The library panicked; state may be inconsistent.
    BcPanic = 7,
}

/// Opaque bid-log handle.
pub struct BcDataset(CampaignDataset);
/// Opaque fitted-model handle.
pub struct BcModel(MarketModel);
/// Opaque value-table handle.
pub struct BcTable(ValueTable);

/// Replayable bidding strategies for [`bc_simulate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcBidder {
    /// Solved MDP policy; requires a table handle. `param` is ignored.
    BcBidderRlb = 0,
    /// Linear bidding; `param` is the base bid.
    BcBidderLinear = 1,
    /// Max cost per click; `param` is the max CPC.
    BcBidderMcpc = 2,
    /// Constant bid; `param` is the bid.
    BcBidderConstant = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> BcStatus {
    match err {
        Error::Config(_) => BcStatus::BcInvalidArgument,
        Error::Parse { .. } => BcStatus::BcParseError,
        Error::Data(_) => BcStatus::BcDataError,
        Error::Io(_) | Error::Json(_) => BcStatus::BcIoError,
        Error::Dimension(_) | Error::NonFinite(_) => BcStatus::BcNumericError,
        Error::Range(_) => BcStatus::BcRangeError,
    }
}

fn fail(err: Error) -> BcStatus {
    let status = status_of(&err);
    set_error(&err.to_string());
    status
}

fn invalid(message: &str) -> BcStatus {
    set_error(message);
    BcStatus::BcInvalidArgument
}

/// Runs a closure, converting panics into `BcPanic` instead of unwinding
/// across the C boundary.
fn guarded(body: impl FnOnce() -> BcStatus) -> BcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            BcStatus::BcPanic
        }
    }
}

/// # Safety
/// `raw` must be null or a NUL-terminated string valid for the call.
unsafe fn utf8_arg<'a>(raw: *const c_char, name: &str) -> Result<&'a str, BcStatus> {
    if raw.is_null() {
        return Err(invalid(&format!("{name} is null")));
    }
    CStr::from_ptr(raw)
        .to_str()
        .map_err(|_| invalid(&format!("{name} is not valid UTF-8")))
}

unsafe fn deref<'a, T>(raw: *const T, name: &str) -> Result<&'a T, BcStatus> {
    raw.as_ref()
        .ok_or_else(|| invalid(&format!("{name} is null")))
}

fn emit<T>(value: T, out: *mut *mut T) -> BcStatus {
    if out.is_null() {
        return invalid("out pointer is null");
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    BcStatus::BcOk
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next bidcraft call from the same thread.
#[no_mangle]
pub extern "C" fn bc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn bc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Frees a string returned by the library. Null is a no-op.
///
/// # Safety
/// `s` must be null or a pointer previously returned by a `bc_*` call that
/// documents this free function, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Generates a synthetic bid log. `config_json` follows the CLI's
/// `synthetic` section schema.
///
/// # Safety
/// `config_json` must be a valid NUL-terminated string and `out` a valid
/// destination pointer.
#[no_mangle]
pub unsafe extern "C" fn bc_dataset_generate(
    config_json: *const c_char,
    out: *mut *mut BcDataset,
) -> BcStatus {
    guarded(|| {
        let json = match utf8_arg(config_json, "config_json") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let config: SyntheticConfig = match serde_json::from_str(json) {
            Ok(v) => v,
            Err(e) => return invalid(&format!("bad synthetic config: {e}")),
        };
        match generate_synthetic(&config) {
            Ok(ds) => emit(BcDataset(ds), out),
            Err(e) => fail(e),
        }
    })
}

/// Parses a TSV bid log with a JSON column schema file.
///
/// # Safety
/// Path arguments must be valid NUL-terminated strings; `out` must be a
/// valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn bc_dataset_read_tsv(
    data_path: *const c_char,
    schema_path: *const c_char,
    price_levels: usize,
    strict: bool,
    out: *mut *mut BcDataset,
) -> BcStatus {
    guarded(|| {
        let data = match utf8_arg(data_path, "data_path") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let schema_file = match utf8_arg(schema_path, "schema_path") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let schema_text = match std::fs::read_to_string(schema_file) {
            Ok(v) => v,
            Err(e) => {
                return fail(Error::Config(format!(
                    "cannot read schema {schema_file}: {e}"
                )))
            }
        };
        let schema = match LogSchema::from_json(&schema_text) {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        let file = match std::fs::File::open(data) {
            Ok(v) => v,
            Err(e) => return fail(Error::Data(format!("cannot read data {data}: {e}"))),
        };
        let opts = ParseOptions {
            price_levels,
            strict,
        };
        match parse_log(BufReader::new(file), &schema, &opts) {
            Ok((ds, _stats)) => emit(BcDataset(ds), out),
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn bc_dataset_len(ds: *const BcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn bc_dataset_price_levels(ds: *const BcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.price_levels())
}

/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn bc_dataset_censored_count(ds: *const BcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.censored_count())
}

/// # Safety
/// `ds` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bc_dataset_free(ds: *mut BcDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Fits the Kaplan-Meier model.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn bc_model_fit_km(
    ds: *const BcDataset,
    out: *mut *mut BcModel,
) -> BcStatus {
    guarded(|| {
        let ds = match deref(ds, "dataset") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match MarketModel::fit_km(&ds.0) {
            Ok(model) => emit(BcModel(model), out),
            Err(e) => fail(e),
        }
    })
}

/// Fits the gamma model.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn bc_model_fit_gamma(
    ds: *const BcDataset,
    out: *mut *mut BcModel,
) -> BcStatus {
    guarded(|| {
        let ds = match deref(ds, "dataset") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match MarketModel::fit_gamma(&ds.0) {
            Ok(model) => emit(BcModel(model), out),
            Err(e) => fail(e),
        }
    })
}

/// Trains the recurrent forecaster. `train_config_json` follows the CLI's
/// `train` section schema; pass `"{}"` for defaults.
///
/// # Safety
/// `ds` must be a live dataset handle, `train_config_json` a valid string,
/// and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn bc_model_fit_forecaster(
    ds: *const BcDataset,
    train_config_json: *const c_char,
    out: *mut *mut BcModel,
) -> BcStatus {
    guarded(|| {
        let ds = match deref(ds, "dataset") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let json = match utf8_arg(train_config_json, "train_config_json") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let cfg: TrainConfig = match serde_json::from_str(json) {
            Ok(v) => v,
            Err(e) => return invalid(&format!("bad train config: {e}")),
        };
        match MarketModel::fit_forecaster(&ds.0, &cfg) {
            Ok((model, _history)) => emit(BcModel(model), out),
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid
/// destination pointer.
#[no_mangle]
pub unsafe extern "C" fn bc_model_load(path: *const c_char, out: *mut *mut BcModel) -> BcStatus {
    guarded(|| {
        let path = match utf8_arg(path, "path") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match MarketModel::load(Path::new(path)) {
            Ok(model) => emit(BcModel(model), out),
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `model` must be a live model handle and `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn bc_model_save(model: *const BcModel, path: *const c_char) -> BcStatus {
    guarded(|| {
        let model = match deref(model, "model") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let path = match utf8_arg(path, "path") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let json = match model.0.to_json() {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        match std::fs::write(path, json) {
            Ok(()) => BcStatus::BcOk,
            Err(e) => fail(Error::Io(e)),
        }
    })
}

/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn bc_model_price_levels(model: *const BcModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.price_levels())
}

/// Writes the model's unconditional price pmf into `out`, which must hold
/// `len >= bc_model_price_levels(model)` doubles.
///
/// # Safety
/// `model` must be a live model handle and `out` writable for `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn bc_model_pmf(
    model: *const BcModel,
    out: *mut f64,
    len: usize,
) -> BcStatus {
    guarded(|| {
        let model = match deref(model, "model") {
            Ok(v) => v,
            Err(s) => return s,
        };
        if out.is_null() {
            return invalid("out buffer is null");
        }
        let dist = match model.0.baseline_distribution() {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        if len < dist.levels() {
            return invalid(&format!(
                "buffer of {len} doubles cannot hold {} levels",
                dist.levels()
            ));
        }
        ptr::copy_nonoverlapping(dist.pmf().as_ptr(), out, dist.levels());
        BcStatus::BcOk
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bc_model_free(model: *mut BcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Solves the bidding MDP against the model's price distribution.
/// `solver_json` follows the CLI's `solver` section schema (budget and
/// horizon required); truncation runs when it names `truncate_at`.
///
/// # Safety
/// `model` must be a live model handle, `solver_json` a valid string, and
/// `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn bc_solve(
    model: *const BcModel,
    mean_ctr: f64,
    solver_json: *const c_char,
    out: *mut *mut BcTable,
) -> BcStatus {
    guarded(|| {
        let model = match deref(model, "model") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let json = match utf8_arg(solver_json, "solver_json") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let config: SolverConfig = match serde_json::from_str(json) {
            Ok(v) => v,
            Err(e) => return invalid(&format!("bad solver config: {e}")),
        };
        let dist = match model.0.baseline_distribution() {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        let transition = match TransitionModel::new(dist, mean_ctr) {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        let solved = if config.truncate_at.is_some() {
            solve_truncated(&transition, &config)
        } else {
            solve_exact(&transition, &config)
        };
        match solved {
            Ok(table) => emit(BcTable(table), out),
            Err(e) => fail(e),
        }
    })
}

/// Loads a value table saved by the CLI's solve command.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid
/// destination pointer.
#[no_mangle]
pub unsafe extern "C" fn bc_table_load(path: *const c_char, out: *mut *mut BcTable) -> BcStatus {
    guarded(|| {
        let path = match utf8_arg(path, "path") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match ValueTable::load(Path::new(path)) {
            Ok(table) => emit(BcTable(table), out),
            Err(e) => fail(e),
        }
    })
}

/// Reads one value-table cell.
///
/// # Safety
/// `table` must be a live table handle and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn bc_table_value(
    table: *const BcTable,
    budget: u32,
    auctions_left: usize,
    out: *mut f64,
) -> BcStatus {
    guarded(|| {
        let table = match deref(table, "table") {
            Ok(v) => v,
            Err(s) => return s,
        };
        if out.is_null() {
            return invalid("out pointer is null");
        }
        match table.0.value(budget, auctions_left) {
            Ok(v) => {
                *out = v;
                BcStatus::BcOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Reads the optimal bid for one cell.
///
/// # Safety
/// `table` must be a live table handle and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn bc_table_bid(
    table: *const BcTable,
    budget: u32,
    auctions_left: usize,
    out: *mut u32,
) -> BcStatus {
    guarded(|| {
        let table = match deref(table, "table") {
            Ok(v) => v,
            Err(s) => return s,
        };
        if out.is_null() {
            return invalid("out pointer is null");
        }
        match table.0.optimal_bid(budget, auctions_left) {
            Ok(v) => {
                *out = v;
                BcStatus::BcOk
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `table` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bc_table_free(table: *mut BcTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Scores a model on a dataset. An undefined AUC (single-class labels)
/// comes back as NaN.
///
/// # Safety
/// Handles must be live; out pointers must be valid destinations.
#[no_mangle]
pub unsafe extern "C" fn bc_evaluate(
    model: *const BcModel,
    ds: *const BcDataset,
    epsilon: f64,
    out_auc: *mut f64,
    out_log_loss: *mut f64,
    out_anlp: *mut f64,
) -> BcStatus {
    guarded(|| {
        let model = match deref(model, "model") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let ds = match deref(ds, "dataset") {
            Ok(v) => v,
            Err(s) => return s,
        };
        if out_auc.is_null() || out_log_loss.is_null() || out_anlp.is_null() {
            return invalid("out pointer is null");
        }
        match evaluate_model(&model.0, &ds.0, epsilon) {
            Ok(scores) => {
                *out_auc = scores.auc.unwrap_or(f64::NAN);
                *out_log_loss = scores.log_loss;
                *out_anlp = scores.anlp;
                BcStatus::BcOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Derives the per-episode budget from a training log. `episode_json`
/// follows the CLI's `episode` section schema; pass `"{}"` for defaults.
///
/// # Safety
/// `train` must be a live dataset handle, `episode_json` a valid string,
/// and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn bc_episode_budget(
    train: *const BcDataset,
    episode_json: *const c_char,
    out: *mut u32,
) -> BcStatus {
    guarded(|| {
        let train = match deref(train, "train dataset") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let json = match utf8_arg(episode_json, "episode_json") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let config: EpisodeConfig = match serde_json::from_str(json) {
            Ok(v) => v,
            Err(e) => return invalid(&format!("bad episode config: {e}")),
        };
        if out.is_null() {
            return invalid("out pointer is null");
        }
        match compute_episode_budget(&train.0, &config) {
            Ok(b) => {
                *out = b;
                BcStatus::BcOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Replays one bidder over the dataset in budget-capped episodes and
/// returns the campaign report as a JSON string (free it with
/// [`bc_string_free`]). `table` is required for the RLB bidder and ignored
/// otherwise.
///
/// # Safety
/// Handles must be live, `episode_json` a valid string, and `out_json` a
/// valid destination.
#[no_mangle]
pub unsafe extern "C" fn bc_simulate(
    ds: *const BcDataset,
    episode_json: *const c_char,
    bidder: BcBidder,
    param: f64,
    table: *const BcTable,
    budget: u32,
    out_json: *mut *mut c_char,
) -> BcStatus {
    guarded(|| {
        let ds = match deref(ds, "dataset") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let json = match utf8_arg(episode_json, "episode_json") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let config: EpisodeConfig = match serde_json::from_str(json) {
            Ok(v) => v,
            Err(e) => return invalid(&format!("bad episode config: {e}")),
        };
        if out_json.is_null() {
            return invalid("out pointer is null");
        }
        let cap = ds.0.price_cap();
        let report = match bidder {
            BcBidder::BcBidderRlb => {
                let table = match deref(table, "table") {
                    Ok(v) => v,
                    Err(s) => return s,
                };
                let mut bidder = PolicyBidder::new(&table.0);
                run_campaign(&ds.0, &mut bidder, &config, budget)
            }
            BcBidder::BcBidderLinear => {
                let mut bidder = LinearBidder {
                    base_bid: param.max(0.0).round() as u32,
                    avg_ctr: ds.0.mean_pctr(),
                    cap,
                };
                run_campaign(&ds.0, &mut bidder, &config, budget)
            }
            BcBidder::BcBidderMcpc => {
                let mut bidder = McpcBidder {
                    max_cpc: param,
                    cap,
                };
                run_campaign(&ds.0, &mut bidder, &config, budget)
            }
            BcBidder::BcBidderConstant => {
                let mut bidder = ConstantBidder {
                    bid: param.max(0.0).round() as u32,
                };
                run_campaign(&ds.0, &mut bidder, &config, budget)
            }
        };
        let report = match report {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        let payload = serde_json::json!({
            "auctions": report.auctions,
            "impressions": report.impressions,
            "clicks": report.clicks,
            "cost": report.cost,
            "win_rate": report.win_rate(),
            "cpm": report.cpm(),
            "ecpc": report.ecpc(),
        });
        match CString::new(payload.to_string()) {
            Ok(s) => {
                *out_json = s.into_raw();
                BcStatus::BcOk
            }
            Err(_) => invalid("report JSON contained a NUL byte"),
        }
    })
}
