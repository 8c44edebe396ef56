//! Economic property checks and unilateral-deviation probes.
//!
//! Budget balance and individual rationality are checked directly on a
//! settlement. Truthfulness is probed empirically: a bidder's bid is replaced
//! by each candidate misreport in turn, the whole auction is rerun, and the
//! bidder's utility under its true valuation is compared with the truthful
//! outcome. Candidates concentrate on values just above, at, and just below
//! the other bids, since utilities only change where the bid ordering does.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::clearing::{run_auction, AuctionConfig, SettleError, Settlement};
use crate::interference::{build_conflict_graph, form_buyer_groups};
use crate::model::{Bidder, BuyerId, Scenario, SellerId, TruthProfile, ValidationError};
use crate::money::{Money, SignedMoney};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbeError {
    #[error("{0} has no true valuation")]
    UnknownBidder(Bidder),
    #[error("{0} is not in the scenario")]
    NotInScenario(Bidder),
    #[error(transparent)]
    Settle(#[from] SettleError),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// Utility of `bidder` under its true valuation.
///
/// Sellers earn `channels * (price - valuation)`. Buyers value each won
/// channel up to their true demand at their valuation and any extra channel
/// at zero, and pay their full charge. Losers get zero.
pub fn utility_of(settlement: &Settlement, truths: &TruthProfile, bidder: Bidder) -> Result<SignedMoney, ProbeError> {
    match bidder {
        Bidder::Seller(id) => {
            let truth = truths.sellers.get(&id).ok_or(ProbeError::UnknownBidder(bidder))?;
            Ok(settlement.seller(id).map_or(SignedMoney::ZERO, |a| {
                (a.price_per_channel.signed() - truth.valuation.signed()).times(i64::from(a.channels))
            }))
        }
        Bidder::Buyer(id) => {
            let truth = truths.buyers.get(&id).ok_or(ProbeError::UnknownBidder(bidder))?;
            Ok(settlement.buyer(id).map_or(SignedMoney::ZERO, |a| {
                let useful = a.channels.min(truth.demand);
                truth.valuation.times(u64::from(useful)).signed() - a.charge.signed()
            }))
        }
    }
}

/// A property that a settlement failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyViolation {
    BudgetDeficit(SignedMoney),
    SellerUnderpaid(SellerId),
    BuyerOvercharged(BuyerId),
    PartialSupply(SellerId),
    DemandExceeded(BuyerId),
    ChannelMismatch {
        sold: u64,
        bought: u64,
    },
    UnknownWinner(Bidder),
    /// A truthful bidder ends up worse off than by staying out.
    NegativeUtility(Bidder, SignedMoney),
}

impl fmt::Display for PropertyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyViolation::BudgetDeficit(p) => write!(f, "auctioneer profit {p} is negative"),
            PropertyViolation::SellerUnderpaid(s) => write!(f, "{s} is paid below its ask"),
            PropertyViolation::BuyerOvercharged(b) => write!(f, "{b} is charged above its bid"),
            PropertyViolation::PartialSupply(s) => write!(f, "{s} sells part of its supply"),
            PropertyViolation::DemandExceeded(b) => write!(f, "{b} wins more channels than it bid for"),
            PropertyViolation::ChannelMismatch { sold, bought } => {
                write!(f, "{sold} channels sold but {bought} bought")
            }
            PropertyViolation::UnknownWinner(w) => write!(f, "winner {w} is not in the scenario"),
            PropertyViolation::NegativeUtility(b, u) => write!(f, "truthful {b} has utility {u}"),
        }
    }
}

/// Budget balance, individual rationality against submitted bids,
/// all-or-nothing seller awards, demand caps, and trade-count consistency.
pub fn check_properties(scenario: &Scenario, settlement: &Settlement) -> Vec<PropertyViolation> {
    let mut out = Vec::new();
    if settlement.profit.is_negative() {
        out.push(PropertyViolation::BudgetDeficit(settlement.profit));
    }
    let expected_profit = settlement.revenue().signed() - settlement.expense().signed();
    if expected_profit != settlement.profit {
        out.push(PropertyViolation::BudgetDeficit(settlement.profit));
    }
    for (&id, award) in &settlement.sellers {
        let Some(ask) = scenario.ask(id) else {
            out.push(PropertyViolation::UnknownWinner(Bidder::Seller(id)));
            continue;
        };
        if award.price_per_channel < ask.per_channel {
            out.push(PropertyViolation::SellerUnderpaid(id));
        }
        if award.channels != ask.supply {
            out.push(PropertyViolation::PartialSupply(id));
        }
    }
    for (&id, award) in &settlement.buyers {
        let Some(bid) = scenario.bid(id) else {
            out.push(PropertyViolation::UnknownWinner(Bidder::Buyer(id)));
            continue;
        };
        if award.charge > bid.per_channel.times(u64::from(award.channels)) {
            out.push(PropertyViolation::BuyerOvercharged(id));
        }
        if award.channels > bid.demand || award.channels == 0 {
            out.push(PropertyViolation::DemandExceeded(id));
        }
    }
    let (sold, bought) = (settlement.channels_sold(), settlement.channels_bought());
    if sold != bought {
        out.push(PropertyViolation::ChannelMismatch { sold, bought });
    }
    out
}

/// One misreport.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Deviation {
    Buyer { buyer: BuyerId, per_channel: Money, demand: u32 },
    Seller { seller: SellerId, per_channel: Money },
}

impl Deviation {
    pub fn bidder(&self) -> Bidder {
        match self {
            Deviation::Buyer { buyer, .. } => Bidder::Buyer(*buyer),
            Deviation::Seller { seller, .. } => Bidder::Seller(*seller),
        }
    }

    pub fn apply(&self, scenario: &Scenario) -> Result<Scenario, ValidationError> {
        match *self {
            Deviation::Buyer { buyer, per_channel, demand } => scenario.with_bid(buyer, per_channel, demand),
            Deviation::Seller { seller, per_channel } => scenario.with_ask(seller, per_channel),
        }
    }
}

impl fmt::Display for Deviation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Deviation::Buyer { buyer, per_channel, demand } => write!(f, "{buyer}:{per_channel}:{demand}"),
            Deviation::Seller { seller, per_channel } => write!(f, "{seller}:{per_channel}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid deviation `{0}` (expected B<id>:<bid>:<demand> or S<id>:<ask>)")]
pub struct DeviationSyntax(pub String);

impl FromStr for Deviation {
    type Err = DeviationSyntax;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DeviationSyntax(s.to_string());
        let parts: Vec<&str> = s.trim().split(':').collect();
        let id = |p: &str, prefix: char| p.strip_prefix(prefix).and_then(|n| n.parse::<u32>().ok());
        match parts.as_slice() {
            [who, price, demand] if who.starts_with('B') => Ok(Deviation::Buyer {
                buyer: BuyerId(id(who, 'B').ok_or_else(bad)?),
                per_channel: price.parse().map_err(|_| bad())?,
                demand: demand.parse().map_err(|_| bad())?,
            }),
            [who, price] if who.starts_with('S') => Ok(Deviation::Seller {
                seller: SellerId(id(who, 'S').ok_or_else(bad)?),
                per_channel: price.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

/// Outcome pairs by whether the bidder wins when lying and when truthful:
/// `[lose/lose, lose/win, win/lose, win/win]`.
pub type CaseCounts = [u64; 4];

pub fn classify(lie_wins: bool, truth_wins: bool) -> usize {
    match (lie_wins, truth_wins) {
        (false, false) => 0,
        (false, true) => 1,
        (true, false) => 2,
        (true, true) => 3,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub deviation: Deviation,
    pub gain: SignedMoney,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviationReport {
    pub bidder: Bidder,
    pub truthful_utility: SignedMoney,
    pub best_deviant_utility: SignedMoney,
    pub deviations_tried: u64,
    /// The most profitable deviation, if it beats the truthful utility.
    pub violation: Option<Violation>,
    pub cases: CaseCounts,
    /// Property failures seen in any rerun.
    pub property_violations: Vec<PropertyViolation>,
}

impl DeviationReport {
    /// Best deviant utility minus truthful utility; zero if nothing was tried.
    pub fn max_gain(&self) -> SignedMoney {
        if self.deviations_tried == 0 {
            SignedMoney::ZERO
        } else {
            self.best_deviant_utility - self.truthful_utility
        }
    }
}

/// How many candidates to keep from the full grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviationBudget {
    All,
    /// A seeded random subset of this size.
    Sample {
        count: usize,
        seed: u64,
    },
}

fn scaled(value: Money, num: u64, den: u64) -> Money {
    Money::from_micros((value.micros() * i128::from(num) / i128::from(den)).max(1)).unwrap()
}

fn neighbourhood(out: &mut BTreeSet<Money>, price: Money) {
    out.insert(price);
    out.insert(price + Money::from_micros(1).unwrap());
    if let Some(below) = price.checked_sub(Money::from_micros(1).unwrap()).filter(|m| !m.is_zero()) {
        out.insert(below);
    }
}

const MULTIPLES: [(u64, u64); 19] = [
    (1, 100),
    (1, 10),
    (1, 4),
    (1, 3),
    (1, 2),
    (2, 3),
    (3, 4),
    (9, 10),
    (19, 20),
    (99, 100),
    (101, 100),
    (21, 20),
    (11, 10),
    (5, 4),
    (3, 2),
    (2, 1),
    (3, 1),
    (4, 1),
    (10, 1),
];

/// Which parts of a buyer's bid a probe may misreport.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Misreport {
    #[default]
    PriceAndDemand,
    /// Demand stays truthful.
    PriceOnly,
}

fn multiples(out: &mut BTreeSet<Money>, value: Money, steps: &[(u64, u64)]) {
    for &(num, den) in steps {
        out.insert(scaled(value, num, den));
    }
}

pub fn sample_deviations(mut grid: Vec<Deviation>, budget: DeviationBudget) -> Vec<Deviation> {
    match budget {
        DeviationBudget::All => grid,
        DeviationBudget::Sample { count, seed } => {
            if grid.len() > count {
                grid.shuffle(&mut crate::rng::substream(seed, &[0x5eed]));
                grid.truncate(count);
                grid.sort();
            }
            grid
        }
    }
}

/// Misreports for a buyer: prices at fixed multiples of its valuation and at,
/// just above, and just below every other bid in its buyer group; demands
/// from 1 to one past the largest demand in the market, or only the true
/// demand under [`Misreport::PriceOnly`]. The truthful report is excluded.
pub fn buyer_deviations(
    scenario: &Scenario,
    truths: &TruthProfile,
    buyer: BuyerId,
    config: AuctionConfig,
    budget: DeviationBudget,
    scope: Misreport,
) -> Result<Vec<Deviation>, ProbeError> {
    let truth = truths.buyers.get(&buyer).ok_or(ProbeError::UnknownBidder(Bidder::Buyer(buyer)))?;
    let graph = build_conflict_graph(scenario.bids(), scenario.protection_distance());
    let groups = form_buyer_groups(&graph, config.ties);
    let peers =
        groups.iter().find(|g| g.members.contains(&buyer)).ok_or(ProbeError::NotInScenario(Bidder::Buyer(buyer)))?;

    let mut prices = BTreeSet::new();
    multiples(&mut prices, truth.valuation, &MULTIPLES);
    for &peer in peers.members.iter().filter(|&&p| p != buyer) {
        if let Some(bid) = scenario.bid(peer) {
            neighbourhood(&mut prices, bid.per_channel);
        }
    }
    neighbourhood(&mut prices, truth.valuation);
    let max_demand = scenario.bids().iter().map(|b| b.demand).max().unwrap_or(1).max(truth.demand) + 1;

    let mut grid = Vec::new();
    for &per_channel in &prices {
        for demand in 1..=max_demand {
            if scope == Misreport::PriceOnly && demand != truth.demand {
                continue;
            }
            if per_channel == truth.valuation && demand == truth.demand {
                continue;
            }
            grid.push(Deviation::Buyer { buyer, per_channel, demand });
        }
    }
    Ok(sample_deviations(grid, budget))
}

/// Misreports for a seller: asks at fixed multiples of its valuation and at,
/// just above, and just below every other ask and the truthful clearing ask.
/// Supply is never misreported.
pub fn seller_deviations(
    scenario: &Scenario,
    truths: &TruthProfile,
    seller: SellerId,
    config: AuctionConfig,
    budget: DeviationBudget,
) -> Result<Vec<Deviation>, ProbeError> {
    let truth = truths.sellers.get(&seller).ok_or(ProbeError::UnknownBidder(Bidder::Seller(seller)))?;
    let mut prices = BTreeSet::new();
    multiples(&mut prices, truth.valuation, &MULTIPLES);
    for a in scenario.asks().iter().filter(|a| a.seller != seller) {
        neighbourhood(&mut prices, a.per_channel);
    }
    let outcome = run_auction(scenario, config)?;
    if let Some(ask) = outcome.diagnostics.clearing.clearing_ask {
        neighbourhood(&mut prices, ask);
    }
    prices.remove(&truth.valuation);
    let grid = prices.into_iter().map(|per_channel| Deviation::Seller { seller, per_channel }).collect();
    Ok(sample_deviations(grid, budget))
}

fn wins(settlement: &Settlement, bidder: Bidder) -> bool {
    match bidder {
        Bidder::Seller(id) => settlement.seller(id).is_some(),
        Bidder::Buyer(id) => settlement.buyer(id).is_some(),
    }
}

/// Reruns the auction once per deviation and compares utilities.
///
/// `scenario` must carry the truthful bids of every bidder in `deviations`.
pub fn probe(
    scenario: &Scenario,
    truths: &TruthProfile,
    bidder: Bidder,
    deviations: &[Deviation],
    config: AuctionConfig,
) -> Result<DeviationReport, ProbeError> {
    let truthful = run_auction(scenario, config)?.settlement;
    let truthful_utility = utility_of(&truthful, truths, bidder)?;
    let truth_wins = wins(&truthful, bidder);

    let mut report = DeviationReport {
        bidder,
        truthful_utility,
        best_deviant_utility: truthful_utility,
        deviations_tried: 0,
        violation: None,
        cases: [0; 4],
        property_violations: check_properties(scenario, &truthful),
    };
    let mut best: Option<(SignedMoney, Deviation)> = None;
    for deviation in deviations {
        debug_assert_eq!(deviation.bidder(), bidder);
        let deviant_scenario = deviation.apply(scenario)?;
        let deviant = run_auction(&deviant_scenario, config)?.settlement;
        report.property_violations.extend(check_properties(&deviant_scenario, &deviant));
        let utility = utility_of(&deviant, truths, bidder)?;
        report.cases[classify(wins(&deviant, bidder), truth_wins)] += 1;
        report.deviations_tried += 1;
        if best.is_none_or(|(u, _)| utility > u) {
            best = Some((utility, *deviation));
        }
    }
    if let Some((utility, deviation)) = best {
        report.best_deviant_utility = utility;
        if utility > truthful_utility {
            report.violation = Some(Violation { deviation, gain: utility - truthful_utility });
        }
    }
    Ok(report)
}

pub fn probe_buyer(
    scenario: &Scenario,
    truths: &TruthProfile,
    buyer: BuyerId,
    budget: DeviationBudget,
    scope: Misreport,
    config: AuctionConfig,
) -> Result<DeviationReport, ProbeError> {
    let deviations = buyer_deviations(scenario, truths, buyer, config, budget, scope)?;
    probe(scenario, truths, Bidder::Buyer(buyer), &deviations, config)
}

pub fn probe_seller(
    scenario: &Scenario,
    truths: &TruthProfile,
    seller: SellerId,
    budget: DeviationBudget,
    config: AuctionConfig,
) -> Result<DeviationReport, ProbeError> {
    let deviations = seller_deviations(scenario, truths, seller, config, budget)?;
    probe(scenario, truths, Bidder::Seller(seller), &deviations, config)
}
