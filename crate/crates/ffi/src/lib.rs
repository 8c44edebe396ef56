//! C ABI over the `mcsa` clearing engine.
//!
//! Scenarios and auction outcomes cross the boundary as opaque handles. Every
//! fallible call returns an [`McsaStatus`] and writes its result through an
//! out-pointer; the message behind the last non-OK status on the calling
//! thread is available from [`mcsa_last_error`]. Amounts are integer micros.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_traits::ToPrimitive;
use thiserror::Error;

use mcsa::clearing::dump_diagnostics;
use mcsa::evaluation::{compute_metrics, pure_allocation_with_groups, Metrics};
use mcsa::harness::ExperimentConfig;
use mcsa::{
    parse_scenario, run_auction, serialize_scenario, AuctionConfig, AuctionOutcome, Bidding, BiddingPattern,
    BuyerDistribution, Length, Money, Scenario,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McsaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Generate = 5,
    Settle = 6,
    OutOfRange = 7,
    Overflow = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McsaBidding {
    Mmin = 0,
    Gmax = 1,
}

/// Parameters for a generated market. Start from
/// [`mcsa_market_params_default`] and override fields.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct McsaMarketParams {
    pub sellers: u32,
    pub buyers: u32,
    pub distance_micros: u64,
    pub area_micros: u64,
    pub c_max: u32,
    pub d_max: u32,
    pub base_bid_micros: u64,
    /// Two 20x20 hotspots of 20 buyers each instead of a uniform layout.
    pub clustered: bool,
}

/// One winner: channels traded and the total paid to or charged by it.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct McsaAward {
    pub id: u32,
    pub channels: u32,
    pub amount_micros: i64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct McsaMetrics {
    pub efficiency_micros: i64,
    pub channels_traded: u64,
    pub per_channel_efficiency: f64,
    /// Meaningful only when `has_degradation` is set.
    pub degradation: f64,
    pub has_degradation: bool,
    pub pa_efficiency_micros: i64,
}

/// Opaque market handle.
pub struct McsaScenario {
    inner: Scenario,
}

/// Opaque result of one auction.
pub struct McsaOutcome {
    scenario: Scenario,
    outcome: AuctionOutcome,
    metrics: Metrics,
}

#[derive(Debug, Error)]
enum FfiError {
    #[error("null pointer passed as `{0}`")]
    Null(&'static str),
    #[error("input is not UTF-8")]
    Utf8,
    #[error(transparent)]
    Parse(#[from] mcsa::scenario_io::ScenarioFileError),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Generate(#[from] mcsa::generate::GenError),
    #[error(transparent)]
    Settle(#[from] mcsa::clearing::SettleError),
    #[error("index {index} out of range for {len} entries")]
    OutOfRange { index: usize, len: usize },
    #[error("{0} micros does not fit in 64 bits")]
    Overflow(i128),
    #[error("internal panic: {0}")]
    Panic(String),
}

impl FfiError {
    fn status(&self) -> McsaStatus {
        match self {
            FfiError::Null(_) => McsaStatus::NullArgument,
            FfiError::Utf8 => McsaStatus::InvalidUtf8,
            FfiError::Parse(_) => McsaStatus::Parse,
            FfiError::Invalid(_) => McsaStatus::InvalidArgument,
            FfiError::Generate(_) => McsaStatus::Generate,
            FfiError::Settle(_) => McsaStatus::Settle,
            FfiError::OutOfRange { .. } => McsaStatus::OutOfRange,
            FfiError::Overflow(_) => McsaStatus::Overflow,
            FfiError::Panic(_) => McsaStatus::Panic,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

/// Runs `body`, turning errors and panics into a status plus a stored message.
fn guard(body: impl FnOnce() -> Result<(), FfiError>) -> McsaStatus {
    let result = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_default();
        Err(FfiError::Panic(msg))
    });
    match result {
        Ok(()) => McsaStatus::Ok,
        Err(e) => {
            let status = e.status();
            set_last_error(e.to_string());
            status
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, FfiError> {
    p.as_ref().ok_or(FfiError::Null(name))
}

unsafe fn write<T>(out: *mut T, name: &'static str, value: T) -> Result<(), FfiError> {
    if out.is_null() {
        return Err(FfiError::Null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn read_str<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, FfiError> {
    if p.is_null() {
        return Err(FfiError::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| FfiError::Utf8)
}

fn to_i64(micros: i128) -> Result<i64, FfiError> {
    i64::try_from(micros).map_err(|_| FfiError::Overflow(micros))
}

fn into_c_string(text: String) -> *mut c_char {
    CString::new(text).map_or(ptr::null_mut(), CString::into_raw)
}

/// Copy of the message behind the last failed call on this thread, or NULL.
/// Free with [`mcsa_string_free`].
#[no_mangle]
pub extern "C" fn mcsa_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |s| s.clone().into_raw()))
}

/// # Safety
/// `s` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn mcsa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Static, NUL-terminated crate version.
#[no_mangle]
pub extern "C" fn mcsa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// 10 sellers, 100 uniform buyers, distance 10 in a 100x100 area, pattern (3,5,0).
#[no_mangle]
pub extern "C" fn mcsa_market_params_default() -> McsaMarketParams {
    let d = ExperimentConfig::default();
    McsaMarketParams {
        sellers: d.sellers,
        buyers: d.buyers,
        distance_micros: d.distance.micros() as u64,
        area_micros: d.area.micros() as u64,
        c_max: d.pattern.c_max,
        d_max: d.pattern.d_max,
        base_bid_micros: d.pattern.base_bid.micros() as u64,
        clustered: false,
    }
}

/// Parses scenario file text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcsa_scenario_parse(text: *const c_char, out: *mut *mut McsaScenario) -> McsaStatus {
    guard(|| {
        let scenario = parse_scenario(read_str(text, "text")?)?;
        write(out, "out", Box::into_raw(Box::new(McsaScenario { inner: scenario })))
    })
}

/// Draws a market from `params` and `seed`.
///
/// # Safety
/// `params` must point to a valid struct; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcsa_scenario_generate(
    params: *const McsaMarketParams,
    seed: u64,
    out: *mut *mut McsaScenario,
) -> McsaStatus {
    guard(|| {
        let p = borrow(params, "params")?;
        let length = |micros: u64, what: &str| {
            Length::from_micros(i128::from(micros))
                .filter(|l| l.micros() > 0)
                .ok_or_else(|| FfiError::Invalid(format!("{what} must be positive")))
        };
        let base_bid = Money::from_micros(i128::from(p.base_bid_micros))
            .ok_or_else(|| FfiError::Invalid("base bid is out of range".into()))?;
        let config = ExperimentConfig {
            sellers: p.sellers,
            buyers: p.buyers,
            distance: length(p.distance_micros, "distance")?,
            area: length(p.area_micros, "area")?,
            pattern: BiddingPattern::new(p.c_max, p.d_max, base_bid)?,
            distribution: if p.clustered { BuyerDistribution::default_clustered() } else { BuyerDistribution::Random },
            ..ExperimentConfig::default()
        };
        let scenario = config.generate(seed)?;
        write(out, "out", Box::into_raw(Box::new(McsaScenario { inner: scenario })))
    })
}

/// Canonical file text of a scenario. Free with [`mcsa_string_free`].
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcsa_scenario_serialize(scenario: *const McsaScenario, out: *mut *mut c_char) -> McsaStatus {
    guard(|| {
        let s = borrow(scenario, "scenario")?;
        write(out, "out", into_c_string(serialize_scenario(&s.inner)))
    })
}

/// Number of sellers, or 0 for NULL.
///
/// # Safety
/// `scenario` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mcsa_scenario_seller_count(scenario: *const McsaScenario) -> u32 {
    scenario.as_ref().map_or(0, |s| s.inner.asks().len() as u32)
}

/// Number of buyers, or 0 for NULL.
///
/// # Safety
/// `scenario` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mcsa_scenario_buyer_count(scenario: *const McsaScenario) -> u32 {
    scenario.as_ref().map_or(0, |s| s.inner.bids().len() as u32)
}

/// # Safety
/// `scenario` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn mcsa_scenario_free(scenario: *mut McsaScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Clears the market with deterministic ties and uniform pricing, and
/// evaluates it against Pure Allocation. The outcome keeps its own copy of
/// the scenario.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcsa_auction_run(
    scenario: *const McsaScenario,
    bidding: McsaBidding,
    out: *mut *mut McsaOutcome,
) -> McsaStatus {
    guard(|| {
        let s = &borrow(scenario, "scenario")?.inner;
        let bidding = match bidding {
            McsaBidding::Mmin => Bidding::Mmin,
            McsaBidding::Gmax => Bidding::Gmax,
        };
        let config = AuctionConfig { bidding, ..AuctionConfig::default() };
        let outcome = run_auction(s, config)?;
        let pa = pure_allocation_with_groups(
            s,
            &outcome.diagnostics.groups,
            outcome.settlement.channels_sold(),
            config.ties,
        );
        let metrics = compute_metrics(&outcome.settlement, s, pa);
        write(out, "out", Box::into_raw(Box::new(McsaOutcome { scenario: s.clone(), outcome, metrics })))
    })
}

/// # Safety
/// `outcome` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn mcsa_outcome_free(outcome: *mut McsaOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// Auctioneer profit.
///
/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcsa_outcome_profit(outcome: *const McsaOutcome, out: *mut i64) -> McsaStatus {
    guard(|| {
        let o = borrow(outcome, "outcome")?;
        write(out, "out", to_i64(o.outcome.settlement.profit.micros())?)
    })
}

/// Channels sold by winning sellers, or 0 for NULL.
///
/// # Safety
/// `outcome` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mcsa_outcome_channels_traded(outcome: *const McsaOutcome) -> u64 {
    outcome.as_ref().map_or(0, |o| o.outcome.settlement.channels_sold())
}

/// Index of the last profitable trade before reduction, or 0 for NULL.
///
/// # Safety
/// `outcome` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mcsa_outcome_k_prime(outcome: *const McsaOutcome) -> u64 {
    outcome.as_ref().map_or(0, |o| o.outcome.diagnostics.clearing.k_prime)
}

/// Number of winning sellers, or 0 for NULL.
///
/// # Safety
/// `outcome` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mcsa_outcome_seller_count(outcome: *const McsaOutcome) -> u32 {
    outcome.as_ref().map_or(0, |o| o.outcome.settlement.sellers.len() as u32)
}

/// Number of winning buyers, or 0 for NULL.
///
/// # Safety
/// `outcome` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mcsa_outcome_buyer_count(outcome: *const McsaOutcome) -> u32 {
    outcome.as_ref().map_or(0, |o| o.outcome.settlement.buyers.len() as u32)
}

/// Winning seller `index` in id order; `amount_micros` is its payment.
///
/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcsa_outcome_seller_at(
    outcome: *const McsaOutcome,
    index: u32,
    out: *mut McsaAward,
) -> McsaStatus {
    guard(|| {
        let sellers = &borrow(outcome, "outcome")?.outcome.settlement.sellers;
        let (id, a) = sellers
            .iter()
            .nth(index as usize)
            .ok_or(FfiError::OutOfRange { index: index as usize, len: sellers.len() })?;
        let award = McsaAward { id: id.0, channels: a.channels, amount_micros: to_i64(a.payment().micros())? };
        write(out, "out", award)
    })
}

/// Winning buyer `index` in id order; `amount_micros` is its charge.
///
/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcsa_outcome_buyer_at(
    outcome: *const McsaOutcome,
    index: u32,
    out: *mut McsaAward,
) -> McsaStatus {
    guard(|| {
        let buyers = &borrow(outcome, "outcome")?.outcome.settlement.buyers;
        let (id, a) = buyers
            .iter()
            .nth(index as usize)
            .ok_or(FfiError::OutOfRange { index: index as usize, len: buyers.len() })?;
        write(out, "out", McsaAward { id: id.0, channels: a.channels, amount_micros: to_i64(a.charge.micros())? })
    })
}

/// Efficiency metrics; the rational fields are rounded to the nearest double.
///
/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcsa_outcome_metrics(outcome: *const McsaOutcome, out: *mut McsaMetrics) -> McsaStatus {
    guard(|| {
        let m = &borrow(outcome, "outcome")?.metrics;
        let metrics = McsaMetrics {
            efficiency_micros: to_i64(m.efficiency.micros())?,
            channels_traded: m.channels_traded,
            per_channel_efficiency: m.per_channel_efficiency.to_f64().unwrap_or(f64::NAN),
            degradation: m.degradation.as_ref().and_then(|d| d.to_f64()).unwrap_or(0.0),
            has_degradation: m.degradation.is_some(),
            pa_efficiency_micros: to_i64(m.pa_efficiency.micros())?,
        };
        write(out, "out", metrics)
    })
}

/// Human-readable diagnostic dump. Free with [`mcsa_string_free`].
///
/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcsa_outcome_report(outcome: *const McsaOutcome, out: *mut *mut c_char) -> McsaStatus {
    guard(|| {
        let o = borrow(outcome, "outcome")?;
        write(out, "out", into_c_string(dump_diagnostics(&o.outcome, &o.scenario)))
    })
}
