//! Seeded synthetic markets.
//!
//! Every seller, buyer and hotspot draws from its own substream of the
//! scenario seed, so resizing one side of the market leaves the other
//! entities' draws untouched.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::model::{Ask, Bid, BuyerId, Length, Position, Scenario, SellerId, ValidationError};
use crate::money::Money;
#[cfg(test)]
use crate::money::SCALE;
use crate::rng::substream;

/// Upper end of buyer per-channel bids.
pub const BUYER_MAX_BID: Money = Money::from_units(1);
/// Upper end of seller per-channel asks.
pub const SELLER_MAX_BID: Money = Money::from_units(2);

const SELLER_STREAM: u64 = 1;
const BUYER_STREAM: u64 = 2;
const HOTSPOT_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("c_max and d_max must be at least 1")]
    ZeroChannelBound,
    #[error("base bid {0} must be below the buyer maximum {BUYER_MAX_BID}")]
    BaseBidTooHigh(Money),
    #[error("{hotspots} hotspots x {per_hotspot} buyers exceeds {buyers} buyers")]
    TooManyHotspotBuyers { hotspots: u32, per_hotspot: u32, buyers: u32 },
    #[error("hotspot side {hotspot} exceeds area side {area}")]
    HotspotTooLarge { hotspot: Length, area: Length },
    #[error("invalid pattern `{0}` (expected c_max,d_max,b0)")]
    PatternSyntax(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// `(c_max, d_max, b0)`: supplies on `1..=c_max`, demands on `1..=d_max`, and
/// per-channel prices uniform on `(b0, b_max]` with `b_max` 1 for buyers and
/// 2 for sellers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BiddingPattern {
    pub c_max: u32,
    pub d_max: u32,
    pub base_bid: Money,
}

impl Default for BiddingPattern {
    fn default() -> Self {
        BiddingPattern { c_max: 3, d_max: 5, base_bid: Money::ZERO }
    }
}

impl BiddingPattern {
    pub fn new(c_max: u32, d_max: u32, base_bid: Money) -> Result<BiddingPattern, GenError> {
        let p = BiddingPattern { c_max, d_max, base_bid };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.c_max == 0 || self.d_max == 0 {
            return Err(GenError::ZeroChannelBound);
        }
        if self.base_bid >= BUYER_MAX_BID {
            return Err(GenError::BaseBidTooHigh(self.base_bid));
        }
        Ok(())
    }
}

impl fmt::Display for BiddingPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.c_max, self.d_max, self.base_bid)
    }
}

impl FromStr for BiddingPattern {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GenError::PatternSyntax(s.to_string());
        let parts: Vec<&str> = s.trim().trim_start_matches('(').trim_end_matches(')').split(',').collect();
        let [c, d, b] = parts.as_slice() else { return Err(bad()) };
        let c_max = c.trim().parse().map_err(|_| bad())?;
        let d_max = d.trim().parse().map_err(|_| bad())?;
        let base_bid = b.trim().parse().map_err(|_| bad())?;
        BiddingPattern::new(c_max, d_max, base_bid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuyerDistribution {
    /// Uniform over the whole area.
    Random,
    /// The first `buyers - hotspots * per_hotspot` buyers uniform over the
    /// area, the rest uniform inside square hotspots of side `side`.
    Clustered { hotspots: u32, per_hotspot: u32, side: Length },
}

impl BuyerDistribution {
    /// Two 20x20 hotspots of 20 buyers each.
    pub fn default_clustered() -> BuyerDistribution {
        BuyerDistribution::Clustered { hotspots: 2, per_hotspot: 20, side: Length::from_units(20) }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BuyerDistribution::Random => "random",
            BuyerDistribution::Clustered { .. } => "cluster",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DistributionSpec {
    pub kind: BuyerDistribution,
    pub sellers: u32,
    pub buyers: u32,
}

impl DistributionSpec {
    pub fn base_buyers(&self) -> Result<u32, GenError> {
        match self.kind {
            BuyerDistribution::Random => Ok(self.buyers),
            BuyerDistribution::Clustered { hotspots, per_hotspot, .. } => hotspots
                .checked_mul(per_hotspot)
                .and_then(|h| self.buyers.checked_sub(h))
                .ok_or(GenError::TooManyHotspotBuyers { hotspots, per_hotspot, buyers: self.buyers }),
        }
    }
}

/// Uniform on the micro-unit grid of `(base, max]`.
fn draw_price<R: Rng>(rng: &mut R, base: Money, max: Money) -> Money {
    let span = max.micros() - base.micros();
    Money::from_micros(base.micros() + rng.gen_range(1..=span)).unwrap()
}

fn draw_coord<R: Rng>(rng: &mut R, lo: i128, hi: i128) -> Length {
    Length::from_micros(rng.gen_range(lo..=hi)).unwrap()
}

pub fn generate_scenario(
    pattern: &BiddingPattern,
    dist: &DistributionSpec,
    area_side: Length,
    protection_distance: Length,
    seed: u64,
) -> Result<Scenario, GenError> {
    pattern.validate()?;
    let base_buyers = dist.base_buyers()?;
    if let BuyerDistribution::Clustered { side, .. } = dist.kind {
        if side > area_side {
            return Err(GenError::HotspotTooLarge { hotspot: side, area: area_side });
        }
    }

    let asks = (0..dist.sellers)
        .map(|i| {
            let mut rng = substream(seed, &[SELLER_STREAM, u64::from(i)]);
            Ask {
                seller: SellerId(i + 1),
                per_channel: draw_price(&mut rng, pattern.base_bid, SELLER_MAX_BID),
                supply: rng.gen_range(1..=pattern.c_max),
            }
        })
        .collect();

    let side = area_side.micros();
    let bids = (0..dist.buyers)
        .map(|i| {
            let mut rng = substream(seed, &[BUYER_STREAM, u64::from(i)]);
            let per_channel = draw_price(&mut rng, pattern.base_bid, BUYER_MAX_BID);
            let demand = rng.gen_range(1..=pattern.d_max);
            let position = match dist.kind {
                BuyerDistribution::Clustered { per_hotspot, side: box_side, .. } if i >= base_buyers => {
                    let hotspot = (i - base_buyers) / per_hotspot.max(1);
                    let mut centre_rng = substream(seed, &[HOTSPOT_STREAM, u64::from(hotspot)]);
                    let half = box_side.micros() / 2;
                    let cx = centre_rng.gen_range(half..=side - (box_side.micros() - half));
                    let cy = centre_rng.gen_range(half..=side - (box_side.micros() - half));
                    Position::new(
                        draw_coord(&mut rng, cx - half, cx - half + box_side.micros()),
                        draw_coord(&mut rng, cy - half, cy - half + box_side.micros()),
                    )
                }
                _ => Position::new(draw_coord(&mut rng, 0, side), draw_coord(&mut rng, 0, side)),
            };
            Bid { buyer: BuyerId(i + 1), per_channel, demand, position }
        })
        .collect();

    Ok(Scenario::new(asks, bids, protection_distance, area_side, seed)?)
}
