//! Trade-reduced winner determination over the channel ladder, uniform
//! pricing, and the four-step auction pipeline.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::interference::{build_conflict_graph, dump_groups, form_buyer_groups, BuyerGroup};
use crate::model::{Ask, BuyerId, Scenario, SellerId};
use crate::money::{Money, SignedMoney};
use crate::report::align_ragged;
use crate::rng::TieBreak;
use crate::vbg::{bid_group, dump_vbg_table, Bidding, GroupOutcome, VirtualBuyerGroup};

/// Every offered channel, cheapest first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChannelLadder {
    /// Sellers in ladder order.
    pub sellers: Vec<Ask>,
    /// `prefix_supply[r]` is the number of channels offered by sellers ranked
    /// before `r`; the last entry is the total `L`.
    pub prefix_supply: Vec<u64>,
}

impl ChannelLadder {
    pub fn new(asks: &[Ask], ties: TieBreak) -> ChannelLadder {
        let mut sellers = asks.to_vec();
        sellers.sort_by_key(|a| (a.per_channel, ties.key(4, u64::from(a.seller.0))));
        let mut prefix_supply = Vec::with_capacity(sellers.len() + 1);
        let mut total = 0u64;
        prefix_supply.push(0);
        for a in &sellers {
            total += u64::from(a.supply);
            prefix_supply.push(total);
        }
        ChannelLadder { sellers, prefix_supply }
    }

    /// Total channels `L`.
    pub fn len(&self) -> u64 {
        *self.prefix_supply.last().unwrap_or(&0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// 0-based rank of the seller owning 1-based ladder channel `channel`.
    pub fn owner_rank(&self, channel: u64) -> usize {
        debug_assert!(channel >= 1 && channel <= self.len());
        self.prefix_supply.partition_point(|&p| p < channel) - 1
    }

    pub fn ask_at(&self, channel: u64) -> &Ask {
        &self.sellers[self.owner_rank(channel)]
    }

    /// One ask per channel, in ladder order.
    pub fn channel_asks(&self) -> impl Iterator<Item = &Ask> + '_ {
        self.sellers.iter().flat_map(|a| std::iter::repeat_n(a, a.supply as usize))
    }
}

/// Sorts VBGs by bid, highest first. Equal bids order by group (id, or a
/// seeded permutation of group ids) and then by level.
pub fn rank_vbgs(vbgs: &[VirtualBuyerGroup], ties: TieBreak) -> Vec<VirtualBuyerGroup> {
    let mut ranked = vbgs.to_vec();
    ranked.sort_by_key(|v| (std::cmp::Reverse(v.bid), ties.key(3, u64::from(v.group_id)), v.level));
    ranked
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClearingResult {
    pub ladder: ChannelLadder,
    pub ranked_vbgs: Vec<VirtualBuyerGroup>,
    /// Index of the last profitable trade, `k'`.
    pub k_prime: u64,
    /// Winning sellers in ladder order.
    pub winning_sellers: Vec<Ask>,
    /// The top `k` VBGs, where `k` is the winning sellers' total supply.
    pub winning_vbgs: Vec<VirtualBuyerGroup>,
    /// Per-channel ask of the first excluded seller, the one owning channel
    /// `k'`; absent when `k' == 0`.
    pub clearing_ask: Option<Money>,
}

impl ClearingResult {
    pub fn winning_vbg_count(&self) -> u64 {
        self.winning_vbgs.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.winning_vbgs.is_empty()
    }
}

/// Winner determination with trade reduction.
///
/// Walks trades `i = 1..=min(L, K)` and stops at the first `i` where the top
/// `i` VBG bids sum to less than `i` times the ask of the seller owning
/// channel `i`; `k'` is the last trade before that. The seller owning channel
/// `k'` is excluded and sets the price; all cheaper sellers win and sell their
/// full supply to the same number of top VBGs.
pub fn determine_winners(asks: &[Ask], vbgs: &[VirtualBuyerGroup], ties: TieBreak) -> ClearingResult {
    let ladder = ChannelLadder::new(asks, ties);
    let ranked = rank_vbgs(vbgs, ties);
    let limit = ladder.len().min(ranked.len() as u64);

    let mut k_prime = limit;
    let mut bid_sum = Money::ZERO;
    for i in 1..=limit {
        bid_sum += ranked[(i - 1) as usize].bid;
        if bid_sum < ladder.ask_at(i).per_channel.times(i) {
            k_prime = i - 1;
            break;
        }
    }

    let mut result = ClearingResult { ladder, ranked_vbgs: ranked, k_prime, ..Default::default() };
    if k_prime == 0 {
        return result;
    }
    let excluded = result.ladder.owner_rank(k_prime);
    result.clearing_ask = Some(result.ladder.sellers[excluded].per_channel);
    let k = result.ladder.prefix_supply[excluded] as usize;
    result.winning_sellers = result.ladder.sellers[..excluded].to_vec();
    result.winning_vbgs = result.ranked_vbgs[..k].to_vec();
    result
}

/// How winning sellers are paid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PricingRule {
    /// Every winning seller receives the clearing ask per channel.
    #[default]
    Uniform,
    /// Broken discriminatory variant used to check that the truthfulness
    /// probes catch a non-truthful mechanism.
    PayOwnAsk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SellerAward {
    pub channels: u32,
    pub price_per_channel: Money,
}

impl SellerAward {
    pub fn payment(&self) -> Money {
        self.price_per_channel.times(u64::from(self.channels))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuyerAward {
    pub channels: u32,
    pub charge: Money,
}

/// Final allocation and money flows; losers are absent from both maps.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Settlement {
    pub sellers: BTreeMap<SellerId, SellerAward>,
    pub buyers: BTreeMap<BuyerId, BuyerAward>,
    /// Channels handed to buyers, one per winning VBG. Members of a VBG share
    /// its channel, so this is not the sum of buyer channel counts.
    pub channels_assigned: u64,
    /// Auctioneer profit: buyer charges minus seller payments.
    pub profit: SignedMoney,
}

impl Settlement {
    pub fn seller(&self, id: SellerId) -> Option<&SellerAward> {
        self.sellers.get(&id)
    }

    pub fn buyer(&self, id: BuyerId) -> Option<&BuyerAward> {
        self.buyers.get(&id)
    }

    pub fn channels_sold(&self) -> u64 {
        self.sellers.values().map(|a| u64::from(a.channels)).sum()
    }

    pub fn channels_bought(&self) -> u64 {
        self.channels_assigned
    }

    pub fn revenue(&self) -> Money {
        self.buyers.values().map(|a| a.charge).sum()
    }

    pub fn expense(&self) -> Money {
        self.sellers.values().map(|a| a.payment()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sellers.is_empty() && self.buyers.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SettleError {
    #[error("VBG G{group}.{level} bid {bid} does not split evenly over {members} members")]
    UnevenShare { group: u32, level: u32, bid: Money, members: usize },
    #[error("VBG G{group}.{level} has no members")]
    EmptyVbg { group: u32, level: u32 },
}

/// Prices a clearing result: winning sellers receive the clearing ask for
/// every channel; each member of a winning VBG pays an equal share of its bid.
pub fn settle(result: &ClearingResult, pricing: PricingRule) -> Result<Settlement, SettleError> {
    let mut settlement = Settlement::default();
    let Some(clearing_ask) = result.clearing_ask.filter(|_| !result.winning_sellers.is_empty()) else {
        return Ok(settlement);
    };
    for ask in &result.winning_sellers {
        let price = match pricing {
            PricingRule::Uniform => clearing_ask,
            PricingRule::PayOwnAsk => ask.per_channel,
        };
        settlement.sellers.insert(ask.seller, SellerAward { channels: ask.supply, price_per_channel: price });
    }
    settlement.channels_assigned = result.winning_vbgs.len() as u64;
    for v in &result.winning_vbgs {
        if v.members.is_empty() {
            return Err(SettleError::EmptyVbg { group: v.group_id, level: v.level });
        }
        let share = v.bid.checked_div_exact(v.members.len() as u64).ok_or(SettleError::UnevenShare {
            group: v.group_id,
            level: v.level,
            bid: v.bid,
            members: v.members.len(),
        })?;
        for &m in &v.members {
            let award = settlement.buyers.entry(m).or_insert(BuyerAward { channels: 0, charge: Money::ZERO });
            award.channels += 1;
            award.charge += share;
        }
    }
    settlement.profit = settlement.revenue().signed() - settlement.expense().signed();
    Ok(settlement)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct AuctionConfig {
    pub bidding: Bidding,
    pub ties: TieBreak,
    pub pricing: PricingRule,
}

impl AuctionConfig {
    pub fn with_bidding(bidding: Bidding) -> AuctionConfig {
        AuctionConfig { bidding, ..Default::default() }
    }
}

/// Intermediate state of one auction run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostics {
    pub groups: Vec<BuyerGroup>,
    pub group_outcomes: Vec<GroupOutcome>,
    pub clearing: ClearingResult,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuctionOutcome {
    pub settlement: Settlement,
    pub diagnostics: Diagnostics,
}

/// Runs all four steps: conflict graph, grouping, VBG bidding, clearing and
/// pricing.
pub fn run_auction(scenario: &Scenario, config: AuctionConfig) -> Result<AuctionOutcome, SettleError> {
    let graph = build_conflict_graph(scenario.bids(), scenario.protection_distance());
    let groups = form_buyer_groups(&graph, config.ties);
    run_auction_with_groups(scenario, groups, config)
}

/// Bidding, winner determination and pricing over a caller-supplied grouping.
pub fn run_auction_with_groups(
    scenario: &Scenario,
    groups: Vec<BuyerGroup>,
    config: AuctionConfig,
) -> Result<AuctionOutcome, SettleError> {
    let group_outcomes: Vec<GroupOutcome> =
        groups.iter().map(|g| bid_group(g, scenario.bids(), config.bidding, config.ties)).collect();
    let vbgs: Vec<VirtualBuyerGroup> = group_outcomes.iter().flat_map(|o| o.vbgs().iter().cloned()).collect();
    let clearing = determine_winners(scenario.asks(), &vbgs, config.ties);
    let settlement = settle(&clearing, config.pricing)?;
    Ok(AuctionOutcome { settlement, diagnostics: Diagnostics { groups, group_outcomes, clearing } })
}

fn vbg_label(v: &VirtualBuyerGroup) -> String {
    format!("G{}.{}", v.group_id, v.level)
}

/// Channel-by-channel ladder against ranked VBGs with running totals, then
/// the winner rows.
pub fn dump_ladder(clearing: &ClearingResult, scenario: &Scenario, settlement: &Settlement) -> String {
    let channels: Vec<&Ask> = clearing.ladder.channel_asks().collect();
    let width = channels.len().max(clearing.ranked_vbgs.len());
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut row = |label: &str, cells: Vec<String>| {
        let mut r = vec![label.to_string()];
        r.extend(cells);
        r.resize(width + 1, "-".to_string());
        rows.push(r);
    };
    row("NO.", (1..=width).map(|i| i.to_string()).collect());
    row("Sellers", channels.iter().map(|a| a.seller.to_string()).collect());
    row("Asks", channels.iter().map(|a| a.per_channel.to_string()).collect());
    row("Ask-Acc.", channels.iter().enumerate().map(|(i, a)| a.per_channel.times(i as u64 + 1).to_string()).collect());
    row("VBGs", clearing.ranked_vbgs.iter().map(vbg_label).collect());
    row("Bids", clearing.ranked_vbgs.iter().map(|v| v.bid.to_string()).collect());
    let mut acc = Money::ZERO;
    row(
        "Bid-Acc.",
        clearing
            .ranked_vbgs
            .iter()
            .map(|v| {
                acc += v.bid;
                acc.to_string()
            })
            .collect(),
    );

    let mut out = align_ragged(&rows);
    let clearing_ask = clearing.clearing_ask.map_or("-".to_string(), |a| a.to_string());
    writeln!(out, "k' = {}  k = {}  clearing ask = {}", clearing.k_prime, clearing.winning_vbg_count(), clearing_ask)
        .unwrap();
    let ws: Vec<String> = clearing.winning_sellers.iter().map(|a| a.seller.to_string()).collect();
    let wv: Vec<String> = clearing.winning_vbgs.iter().map(vbg_label).collect();
    let wb: Vec<String> = settlement
        .buyers
        .iter()
        .map(|(id, award)| {
            let bid = scenario.bid(*id).expect("winner has a bid");
            format!("{id}({},{}/{})", bid.per_channel, award.channels, bid.demand)
        })
        .collect();
    writeln!(out, "WS    {}", ws.join(", ")).unwrap();
    writeln!(out, "WVBG  {}", wv.join(", ")).unwrap();
    writeln!(out, "WB    {}", wb.join(", ")).unwrap();
    out
}

/// Payments and charges, with utilities computed as if every bid were true.
pub fn dump_settlement(settlement: &Settlement, scenario: &Scenario) -> String {
    let truths = crate::model::TruthProfile::truthful(scenario);
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut sellers = vec!["Seller".to_string()];
    let mut pay = vec!["Pay.".to_string()];
    let mut util = vec!["Util.".to_string()];
    for (id, award) in &settlement.sellers {
        sellers.push(id.to_string());
        pay.push(award.payment().to_string());
        util.push(
            crate::robustness::utility_of(settlement, &truths, crate::model::Bidder::Seller(*id)).unwrap().to_string(),
        );
    }
    rows.extend([sellers, pay, util]);
    let mut buyers = vec!["Buyer".to_string()];
    let mut charge = vec!["Charg.".to_string()];
    let mut util = vec!["Util.".to_string()];
    for (id, award) in &settlement.buyers {
        buyers.push(id.to_string());
        charge.push(award.charge.to_string());
        util.push(
            crate::robustness::utility_of(settlement, &truths, crate::model::Bidder::Buyer(*id)).unwrap().to_string(),
        );
    }
    rows.extend([buyers, charge, util]);
    let mut out = align_ragged(&rows);
    writeln!(out, "Profit {}", settlement.profit).unwrap();
    out
}

/// Full diagnostic report: grouping, VBG table, ladder, settlement.
pub fn dump_diagnostics(outcome: &AuctionOutcome, scenario: &Scenario) -> String {
    let d = &outcome.diagnostics;
    let mut out = String::new();
    out.push_str("== Buyer groups\n");
    out.push_str(&dump_groups(&d.groups));
    out.push_str("\n== Virtual buyer groups\n");
    out.push_str(&dump_vbg_table(&d.group_outcomes, scenario.bids()));
    out.push_str("\n== Winner determination\n");
    out.push_str(&dump_ladder(&d.clearing, scenario, &outcome.settlement));
    out.push_str("\n== Settlement\n");
    out.push_str(&dump_settlement(&outcome.settlement, scenario));
    out
}
