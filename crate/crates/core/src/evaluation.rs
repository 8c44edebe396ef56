//! Efficiency metrics and the bid-oblivious Pure Allocation baseline.

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::clearing::{run_auction, AuctionConfig, ChannelLadder, SettleError, Settlement};
use crate::interference::{build_conflict_graph, form_buyer_groups, BuyerGroup};
use crate::model::Scenario;
use crate::money::{Money, SignedMoney};
use crate::rng::TieBreak;
use crate::vbg::split_levels;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metrics {
    /// Bid-weighted value of traded channels minus ask-weighted cost (alpha).
    pub efficiency: SignedMoney,
    /// Channels traded (N_t).
    pub channels_traded: u64,
    /// `efficiency / channels_traded`, or 0 when nothing trades (beta).
    pub per_channel_efficiency: BigRational,
    /// `1 - efficiency / pa_efficiency`; `None` unless the baseline is positive (eta).
    pub degradation: Option<BigRational>,
    pub pa_efficiency: SignedMoney,
}

pub fn compute_metrics(settlement: &Settlement, scenario: &Scenario, pa_efficiency: SignedMoney) -> Metrics {
    let mut efficiency = SignedMoney::ZERO;
    for (&id, award) in &settlement.buyers {
        let bid = scenario.bid(id).expect("settled buyer is in the scenario");
        efficiency += bid.per_channel.times(u64::from(award.channels)).signed();
    }
    for (&id, award) in &settlement.sellers {
        let ask = scenario.ask(id).expect("settled seller is in the scenario");
        efficiency = efficiency - ask.per_channel.times(u64::from(award.channels)).signed();
    }
    let channels_traded = settlement.channels_sold();
    let per_channel_efficiency = if channels_traded == 0 {
        BigRational::zero()
    } else {
        efficiency.to_rational() / BigRational::from_integer(channels_traded.into())
    };
    let degradation = pa_efficiency
        .is_positive()
        .then(|| BigRational::one() - efficiency.to_rational() / pa_efficiency.to_rational());
    Metrics { efficiency, channels_traded, per_channel_efficiency, degradation, pa_efficiency }
}

/// Pure Allocation over a fixed grouping.
///
/// Every level of every group is a candidate, with the full member set before
/// any critical-buyer elimination. Channels go one at a time to the largest
/// unassigned candidate (ties by group, then level) until `channel_budget`
/// channels are placed or candidates run out. Each placed channel earns the
/// summed per-channel bids of its members and costs one of the cheapest
/// channels on offer.
pub fn pure_allocation_with_groups(
    scenario: &Scenario,
    groups: &[BuyerGroup],
    channel_budget: u64,
    ties: TieBreak,
) -> SignedMoney {
    let mut candidates: Vec<(usize, u32, u32, Money)> = Vec::new();
    for g in groups {
        for (i, members) in split_levels(g, scenario.bids()).into_iter().enumerate() {
            let value = members.iter().map(|&m| scenario.bid(m).expect("member has a bid").per_channel).sum();
            candidates.push((members.len(), g.id, i as u32 + 1, value));
        }
    }
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let ladder = ChannelLadder::new(scenario.asks(), ties);
    let assigned = (channel_budget as usize).min(candidates.len()).min(ladder.len() as usize);
    let value: Money = candidates[..assigned].iter().map(|c| c.3).sum();
    let cost: Money = ladder.channel_asks().take(assigned).map(|a| a.per_channel).sum();
    value.signed() - cost.signed()
}

pub fn pure_allocation(scenario: &Scenario, channel_budget: u64, ties: TieBreak) -> SignedMoney {
    let graph = build_conflict_graph(scenario.bids(), scenario.protection_distance());
    let groups = form_buyer_groups(&graph, ties);
    pure_allocation_with_groups(scenario, &groups, channel_budget, ties)
}

/// One auction plus its Pure Allocation baseline at the same channel count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub settlement: Settlement,
    pub metrics: Metrics,
}

pub fn evaluate(scenario: &Scenario, config: AuctionConfig) -> Result<Evaluation, SettleError> {
    let outcome = run_auction(scenario, config)?;
    let settlement = outcome.settlement;
    let pa =
        pure_allocation_with_groups(scenario, &outcome.diagnostics.groups, settlement.channels_sold(), config.ties);
    let metrics = compute_metrics(&settlement, scenario, pa);
    Ok(Evaluation { settlement, metrics })
}
