//! Structural properties of the mechanism over generated markets.

use std::collections::BTreeMap;

use mcsa::harness::ExperimentConfig;
use mcsa::model::TruthProfile;
use mcsa::robustness::{check_properties, utility_of};
use mcsa::{run_auction, AuctionConfig, Bidder, Bidding, Money, Scenario};

fn markets(count: u64, bidding: Bidding) -> impl Iterator<Item = (Scenario, AuctionConfig)> {
    let config = ExperimentConfig { sellers: 5, buyers: 30, bidding, ..ExperimentConfig::default() };
    (0..count).map(move |seed| (config.generate(seed).unwrap(), config.auction()))
}

fn half(m: Money) -> Money {
    Money::from_micros((m.micros() / 2).max(1)).unwrap()
}

#[test]
fn winning_levels_form_a_prefix() {
    for bidding in [Bidding::Mmin, Bidding::Gmax] {
        for (s, config) in markets(200, bidding) {
            let out = run_auction(&s, config).unwrap();
            let mut levels: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
            let mut seats = 0u64;
            for v in &out.diagnostics.clearing.winning_vbgs {
                levels.entry(v.group_id).or_default().push(v.level);
                seats += v.members.len() as u64;
            }
            for (group, mut ls) in levels {
                ls.sort_unstable();
                assert_eq!(ls, (1..=ls.len() as u32).collect::<Vec<_>>(), "group {group}, seed {}", s.rng_seed());
            }
            let won: u64 = out.settlement.buyers.values().map(|a| u64::from(a.channels)).sum();
            assert_eq!(won, seats);
            assert_eq!(out.settlement.channels_sold(), out.settlement.channels_bought());
            assert!(check_properties(&s, &out.settlement).is_empty());
        }
    }
}

#[test]
fn partially_served_buyer_keeps_its_channels_when_bidding_more() {
    let mut checked = 0;
    for (s, config) in markets(200, Bidding::Mmin) {
        let out = run_auction(&s, config).unwrap();
        for (&id, award) in &out.settlement.buyers {
            let bid = s.bid(id).unwrap();
            if award.channels >= bid.demand {
                continue;
            }
            for (price, demand) in [
                (bid.per_channel + Money::from_micros(1).unwrap(), bid.demand),
                (bid.per_channel.times(2), bid.demand),
                (bid.per_channel, bid.demand + 1),
                (bid.per_channel.times(3), bid.demand + 2),
            ] {
                let raised = s.with_bid(id, price, demand).unwrap();
                let after = run_auction(&raised, config).unwrap();
                let channels = after.settlement.buyer(id).map_or(0, |a| a.channels);
                assert!(
                    channels >= award.channels,
                    "seed {} buyer {id}: {} -> {channels}",
                    s.rng_seed(),
                    award.channels
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn winning_seller_keeps_winning_when_asking_less() {
    let mut checked = 0;
    for (s, config) in markets(200, Bidding::Mmin) {
        let out = run_auction(&s, config).unwrap();
        let truths = TruthProfile::truthful(&s);
        for (&id, award) in &out.settlement.sellers {
            let ask = s.ask(id).unwrap().per_channel;
            for lower in [half(ask), Money::from_micros(ask.micros() - 1).unwrap().max(Money::from_micros(1).unwrap())]
            {
                let after = run_auction(&s.with_ask(id, lower).unwrap(), config).unwrap();
                let new = after.settlement.seller(id).expect("still wins");
                assert_eq!(new.channels, award.channels);
                // Same channels, same price: the ask itself never sets a winner's payment.
                assert_eq!(
                    utility_of(&after.settlement, &truths, Bidder::Seller(id)).unwrap(),
                    utility_of(&out.settlement, &truths, Bidder::Seller(id)).unwrap()
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn winning_buyer_price_does_not_depend_on_its_own_bid() {
    let mut checked = 0;
    for (s, config) in markets(200, Bidding::Mmin) {
        let out = run_auction(&s, config).unwrap();
        let truths = TruthProfile::truthful(&s);
        for (&id, award) in &out.settlement.buyers {
            let bid = s.bid(id).unwrap();
            for price in [bid.per_channel + Money::from_micros(1).unwrap(), bid.per_channel.times(5)] {
                let after = run_auction(&s.with_bid(id, price, bid.demand).unwrap(), config).unwrap();
                let Some(new) = after.settlement.buyer(id) else { continue };
                if new.channels != award.channels {
                    continue;
                }
                assert_eq!(
                    utility_of(&after.settlement, &truths, Bidder::Buyer(id)).unwrap(),
                    utility_of(&out.settlement, &truths, Bidder::Buyer(id)).unwrap(),
                    "seed {} buyer {id}",
                    s.rng_seed()
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}
