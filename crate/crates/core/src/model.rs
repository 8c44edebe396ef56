//! Sealed bids, true valuations, and the scenario that bundles a market.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::money::{format_micros, parse_micros, AmountError, Money};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SellerId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BuyerId(pub u32);

impl fmt::Display for SellerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

impl fmt::Display for BuyerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B{}", self.0)
    }
}

/// Either side of the market.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bidder {
    Seller(SellerId),
    Buyer(BuyerId),
}

impl fmt::Display for Bidder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bidder::Seller(id) => id.fmt(f),
            Bidder::Buyer(id) => id.fmt(f),
        }
    }
}

/// A non-negative planar length or coordinate, fixed-point like [`Money`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Length(i128);

impl Length {
    pub const ZERO: Length = Length(0);

    pub fn from_micros(micros: i128) -> Option<Length> {
        (micros >= 0).then_some(Length(micros))
    }

    pub fn from_units(units: u32) -> Length {
        Length(i128::from(units) * crate::money::SCALE)
    }

    pub fn micros(self) -> i128 {
        self.0
    }
}

impl fmt::Display for Length {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_micros(self.0))
    }
}

impl FromStr for Length {
    type Err = AmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let micros = parse_micros(s)?;
        Length::from_micros(micros).ok_or_else(|| AmountError::Negative(s.trim().to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Position {
    pub x: Length,
    pub y: Length,
}

impl Position {
    pub fn new(x: Length, y: Length) -> Position {
        Position { x, y }
    }

    /// Squared Euclidean distance in squared micro-units, exact.
    pub fn distance_sq(&self, other: &Position) -> i128 {
        let dx = self.x.0 - other.x.0;
        let dy = self.y.0 - other.y.0;
        dx * dx + dy * dy
    }
}

/// A seller's sealed bid: minimum per-channel payment and channel supply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ask {
    pub seller: SellerId,
    pub per_channel: Money,
    pub supply: u32,
}

/// A buyer's sealed bid: maximum per-channel price, channel demand, location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bid {
    pub buyer: BuyerId,
    pub per_channel: Money,
    pub demand: u32,
    pub position: Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SellerTruth {
    pub valuation: Money,
    pub supply: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuyerTruth {
    pub valuation: Money,
    pub demand: u32,
}

/// Private per-channel valuations and true channel counts of every bidder.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TruthProfile {
    pub sellers: BTreeMap<SellerId, SellerTruth>,
    pub buyers: BTreeMap<BuyerId, BuyerTruth>,
}

impl TruthProfile {
    /// The profile under which every bid in `scenario` is truthful.
    pub fn truthful(scenario: &Scenario) -> TruthProfile {
        TruthProfile {
            sellers: scenario
                .asks()
                .iter()
                .map(|a| (a.seller, SellerTruth { valuation: a.per_channel, supply: a.supply }))
                .collect(),
            buyers: scenario
                .bids()
                .iter()
                .map(|b| (b.buyer, BuyerTruth { valuation: b.per_channel, demand: b.demand }))
                .collect(),
        }
    }

    /// Checks that every scenario id has exactly one truth entry and nothing else.
    pub fn covers(&self, scenario: &Scenario) -> bool {
        self.sellers.len() == scenario.asks().len()
            && self.buyers.len() == scenario.bids().len()
            && scenario.asks().iter().all(|a| self.sellers.contains_key(&a.seller))
            && scenario.bids().iter().all(|b| self.buyers.contains_key(&b.buyer))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("duplicate seller id {0}")]
    DuplicateSeller(SellerId),
    #[error("duplicate buyer id {0}")]
    DuplicateBuyer(BuyerId),
    #[error("{0} asks a non-positive per-channel price")]
    NonPositiveAsk(SellerId),
    #[error("{0} offers zero channels")]
    ZeroSupply(SellerId),
    #[error("{0} bids a non-positive per-channel price")]
    NonPositiveBid(BuyerId),
    #[error("{0} demands zero channels")]
    ZeroDemand(BuyerId),
    #[error("{0} is positioned outside the {1}x{1} area")]
    OutsideArea(BuyerId, Length),
}

/// A complete market instance: every sealed bid plus the geometry that
/// drives buyer grouping.
///
/// Fields are private so that a `Scenario` always satisfies its invariants;
/// use [`Scenario::new`] or the `with_*` helpers to build modified copies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    asks: Vec<Ask>,
    bids: Vec<Bid>,
    protection_distance: Length,
    area_side: Length,
    rng_seed: u64,
}

impl Scenario {
    pub fn new(
        asks: Vec<Ask>,
        bids: Vec<Bid>,
        protection_distance: Length,
        area_side: Length,
        rng_seed: u64,
    ) -> Result<Scenario, ValidationError> {
        let mut sellers = BTreeSet::new();
        for ask in &asks {
            if !sellers.insert(ask.seller) {
                return Err(ValidationError::DuplicateSeller(ask.seller));
            }
            if ask.per_channel.is_zero() {
                return Err(ValidationError::NonPositiveAsk(ask.seller));
            }
            if ask.supply == 0 {
                return Err(ValidationError::ZeroSupply(ask.seller));
            }
        }
        let mut buyers = BTreeSet::new();
        for bid in &bids {
            if !buyers.insert(bid.buyer) {
                return Err(ValidationError::DuplicateBuyer(bid.buyer));
            }
            if bid.per_channel.is_zero() {
                return Err(ValidationError::NonPositiveBid(bid.buyer));
            }
            if bid.demand == 0 {
                return Err(ValidationError::ZeroDemand(bid.buyer));
            }
            if bid.position.x > area_side || bid.position.y > area_side {
                return Err(ValidationError::OutsideArea(bid.buyer, area_side));
            }
        }
        Ok(Scenario { asks, bids, protection_distance, area_side, rng_seed })
    }

    pub fn asks(&self) -> &[Ask] {
        &self.asks
    }

    pub fn bids(&self) -> &[Bid] {
        &self.bids
    }

    pub fn protection_distance(&self) -> Length {
        self.protection_distance
    }

    pub fn area_side(&self) -> Length {
        self.area_side
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn ask(&self, seller: SellerId) -> Option<&Ask> {
        self.asks.iter().find(|a| a.seller == seller)
    }

    pub fn bid(&self, buyer: BuyerId) -> Option<&Bid> {
        self.bids.iter().find(|b| b.buyer == buyer)
    }

    /// Copy of this scenario with one buyer's price and demand replaced.
    pub fn with_bid(&self, buyer: BuyerId, per_channel: Money, demand: u32) -> Result<Scenario, ValidationError> {
        let mut bids = self.bids.clone();
        if let Some(b) = bids.iter_mut().find(|b| b.buyer == buyer) {
            b.per_channel = per_channel;
            b.demand = demand;
        }
        Scenario::new(self.asks.clone(), bids, self.protection_distance, self.area_side, self.rng_seed)
    }

    /// Copy of this scenario with one seller's per-channel ask replaced.
    pub fn with_ask(&self, seller: SellerId, per_channel: Money) -> Result<Scenario, ValidationError> {
        let mut asks = self.asks.clone();
        if let Some(a) = asks.iter_mut().find(|a| a.seller == seller) {
            a.per_channel = per_channel;
        }
        Scenario::new(asks, self.bids.clone(), self.protection_distance, self.area_side, self.rng_seed)
    }
}
