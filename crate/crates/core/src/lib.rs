//! Clearing engine and simulation harness for truthful double auctions of
//! homogeneous spectrum channels.
//!
//! Sellers offer whole channels at a per-channel ask. Buyers that do not
//! interfere share a channel, so buyers are first grouped into independent
//! sets of a distance-based conflict graph, each group is split into a
//! ladder of virtual buyer groups with a single group bid each, and the
//! ladder is cleared against the sellers by a trade-reduction double auction
//! with uniform prices.
//!
//! All money is exact fixed-point (see [`money`]), so budget balance and
//! truthfulness checks never suffer from rounding.

pub mod clearing;
pub mod evaluation;
pub mod generate;
pub mod harness;
pub mod interference;
pub mod model;
pub mod money;
pub mod report;
pub mod rng;
pub mod robustness;
pub mod scenario_io;
pub mod vbg;

pub use clearing::{run_auction, AuctionConfig, AuctionOutcome, PricingRule, Settlement};
pub use evaluation::{compute_metrics, evaluate, pure_allocation, Metrics};
pub use generate::{generate_scenario, BiddingPattern, BuyerDistribution, DistributionSpec};
pub use model::{Ask, Bid, Bidder, BuyerId, Length, Position, Scenario, SellerId, TruthProfile};
pub use money::{Money, SignedMoney};
pub use rng::TieBreak;
pub use scenario_io::{parse_scenario, serialize_scenario};
pub use vbg::Bidding;
