//! Virtual buyer groups: splitting a buyer group into a ladder of one-channel
//! super-buyers and pricing each rung.
//!
//! Level `l` of a group holds the members that request at least `l`
//! channels. One member, the critical buyer, is removed from every level and
//! its per-channel bid becomes the uniform share every survivor pays, so a
//! level's bid is `share * |members|`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::interference::BuyerGroup;
use crate::model::{Bid, BuyerId};
use crate::money::Money;
use crate::rng::TieBreak;

/// Rule for choosing a group's critical buyer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Bidding {
    /// Member-minimized: the lowest bidder is critical, everyone else survives.
    #[default]
    Mmin,
    /// Group-maximized: the critical buyer maximizes the first level's bid.
    Gmax,
}

impl fmt::Display for Bidding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bidding::Mmin => "mmin",
            Bidding::Gmax => "gmax",
        })
    }
}

impl FromStr for Bidding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mmin" => Ok(Bidding::Mmin),
            "gmax" => Ok(Bidding::Gmax),
            other => Err(format!("unknown bidding algorithm `{other}` (expected mmin or gmax)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VirtualBuyerGroup {
    pub group_id: u32,
    /// 1-based rung: members here are buying their `level`-th channel.
    pub level: u32,
    /// Surviving members, ascending id.
    pub members: Vec<BuyerId>,
    pub bid: Money,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupBidding {
    pub group_id: u32,
    pub critical_buyer: BuyerId,
    /// The critical buyer's per-channel bid.
    pub share: Money,
    /// Levels `1..=K`, each non-empty.
    pub vbgs: Vec<VirtualBuyerGroup>,
    /// The same `K` levels before any member is removed, for reporting.
    pub member_levels: Vec<Vec<BuyerId>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupOutcome {
    Bidding(GroupBidding),
    /// Fewer than two members: nothing survives the critical buyer.
    Eliminated {
        group_id: u32,
        members: Vec<BuyerId>,
    },
}

impl GroupOutcome {
    pub fn group_id(&self) -> u32 {
        match self {
            GroupOutcome::Bidding(b) => b.group_id,
            GroupOutcome::Eliminated { group_id, .. } => *group_id,
        }
    }

    pub fn bidding(&self) -> Option<&GroupBidding> {
        match self {
            GroupOutcome::Bidding(b) => Some(b),
            GroupOutcome::Eliminated { .. } => None,
        }
    }

    pub fn vbgs(&self) -> &[VirtualBuyerGroup] {
        self.bidding().map_or(&[], |b| b.vbgs.as_slice())
    }
}

fn index(bids: &[Bid]) -> HashMap<BuyerId, &Bid> {
    bids.iter().map(|b| (b.buyer, b)).collect()
}

fn lookup<'a>(book: &HashMap<BuyerId, &'a Bid>, id: BuyerId) -> &'a Bid {
    book.get(&id).unwrap_or_else(|| panic!("group member {id} has no bid"))
}

fn levels_of(members: &[BuyerId], book: &HashMap<BuyerId, &Bid>) -> Vec<Vec<BuyerId>> {
    let depth = members.iter().map(|&m| lookup(book, m).demand).max().unwrap_or(0);
    (1..=depth).map(|l| members.iter().copied().filter(|&m| lookup(book, m).demand >= l).collect()).collect()
}

/// The demand ladder of a group: entry `l - 1` holds members with demand at
/// least `l`, for `l` up to the group's largest demand.
///
/// Panics if a member has no bid in `bids`.
pub fn split_levels(group: &BuyerGroup, bids: &[Bid]) -> Vec<Vec<BuyerId>> {
    levels_of(&group.members, &index(bids))
}

fn finish(
    group: &BuyerGroup,
    book: &HashMap<BuyerId, &Bid>,
    critical: BuyerId,
    survivors: Vec<BuyerId>,
) -> GroupOutcome {
    if survivors.is_empty() {
        return GroupOutcome::Eliminated { group_id: group.id, members: group.members.clone() };
    }
    let share = lookup(book, critical).per_channel;
    let vbgs: Vec<VirtualBuyerGroup> = levels_of(&survivors, book)
        .into_iter()
        .enumerate()
        .map(|(i, members)| VirtualBuyerGroup {
            group_id: group.id,
            level: i as u32 + 1,
            bid: share.times(members.len() as u64),
            members,
        })
        .collect();
    let mut member_levels = levels_of(&group.members, book);
    member_levels.truncate(vbgs.len());
    GroupOutcome::Bidding(GroupBidding { group_id: group.id, critical_buyer: critical, share, vbgs, member_levels })
}

/// Member-minimized bidding: the lowest per-channel bidder (ties per `ties`)
/// is critical and every other member survives.
pub fn bid_mmin(group: &BuyerGroup, bids: &[Bid], ties: TieBreak) -> GroupOutcome {
    let book = index(bids);
    let Some(critical) =
        group.members.iter().copied().min_by_key(|&m| (lookup(&book, m).per_channel, ties.key(2, u64::from(m.0))))
    else {
        return GroupOutcome::Eliminated { group_id: group.id, members: Vec::new() };
    };
    let survivors = group.members.iter().copied().filter(|&m| m != critical).collect();
    finish(group, &book, critical, survivors)
}

/// Group-maximized bidding.
///
/// Members are ranked by per-channel bid, highest first. The critical buyer is
/// the rank `i >= 2` maximizing `bid_(i) * (i - 1)` (earliest rank on ties);
/// it and every member bidding strictly less are removed.
pub fn bid_gmax(group: &BuyerGroup, bids: &[Bid], ties: TieBreak) -> GroupOutcome {
    let book = index(bids);
    if group.members.len() < 2 {
        return GroupOutcome::Eliminated { group_id: group.id, members: group.members.clone() };
    }
    let mut ranked = group.members.clone();
    ranked.sort_by_key(|&m| (std::cmp::Reverse(lookup(&book, m).per_channel), ties.key(2, u64::from(m.0))));

    let mut best_rank = 1usize;
    let mut best = Money::ZERO;
    for (rank0, &m) in ranked.iter().enumerate().skip(1) {
        let value = lookup(&book, m).per_channel.times(rank0 as u64);
        if value > best {
            best = value;
            best_rank = rank0;
        }
    }
    let critical = ranked[best_rank];
    let floor = lookup(&book, critical).per_channel;
    let survivors =
        group.members.iter().copied().filter(|&m| m != critical && lookup(&book, m).per_channel >= floor).collect();
    finish(group, &book, critical, survivors)
}

pub fn bid_group(group: &BuyerGroup, bids: &[Bid], bidding: Bidding, ties: TieBreak) -> GroupOutcome {
    match bidding {
        Bidding::Mmin => bid_mmin(group, bids, ties),
        Bidding::Gmax => bid_gmax(group, bids, ties),
    }
}

fn set_text(members: &[BuyerId], book: &HashMap<BuyerId, &Bid>) -> String {
    let items: Vec<String> = members.iter().map(|&m| format!("{m}({})", lookup(book, m).per_channel)).collect();
    format!("{{{}}}", items.join(", "))
}

/// Table of every group's levels: full member set, surviving set, and bid.
pub fn dump_vbg_table(outcomes: &[GroupOutcome], bids: &[Bid]) -> String {
    let book = index(bids);
    let mut rows: Vec<[String; 5]> =
        vec![["Group".into(), "VBG".into(), "Member Set".into(), "Selected Set".into(), "Bid".into()]];
    for outcome in outcomes {
        match outcome {
            GroupOutcome::Bidding(b) => {
                for (i, v) in b.vbgs.iter().enumerate() {
                    let group = if i == 0 { format!("G{} ({})", b.group_id, b.critical_buyer) } else { String::new() };
                    rows.push([
                        group,
                        format!("G{}.{}", v.group_id, v.level),
                        set_text(&b.member_levels[i], &book),
                        set_text(&v.members, &book),
                        v.bid.to_string(),
                    ]);
                }
            }
            GroupOutcome::Eliminated { group_id, members } => rows.push([
                format!("G{group_id}"),
                "-".into(),
                set_text(members, &book),
                "eliminated".into(),
                "-".into(),
            ]),
        }
    }
    crate::report::align(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Position;
    use rand::{Rng, SeedableRng};

    fn bid(id: u32, price: u64, demand: u32) -> Bid {
        Bid { buyer: BuyerId(id), per_channel: Money::from_units(price), demand, position: Position::default() }
    }

    fn group(id: u32, members: &[u32]) -> BuyerGroup {
        BuyerGroup { id, members: members.iter().map(|&m| BuyerId(m)).collect() }
    }

    fn ids(v: &[u32]) -> Vec<BuyerId> {
        v.iter().map(|&m| BuyerId(m)).collect()
    }

    fn example_bids() -> Vec<Bid> {
        vec![bid(1, 10, 3), bid(2, 8, 5), bid(3, 5, 1), bid(4, 3, 2), bid(5, 11, 2), bid(6, 9, 4), bid(7, 5, 1)]
    }

    fn bids_of(outcome: &GroupOutcome) -> Vec<Money> {
        outcome.vbgs().iter().map(|v| v.bid).collect()
    }

    fn units(v: &[u64]) -> Vec<Money> {
        v.iter().map(|&u| Money::from_units(u)).collect()
    }

    #[test]
    fn member_ladder_of_first_example_group() {
        let levels = split_levels(&group(0, &[1, 2, 3, 4]), &example_bids());
        assert_eq!(levels, vec![ids(&[1, 2, 3, 4]), ids(&[1, 2, 4]), ids(&[1, 2]), ids(&[2]), ids(&[2])]);
    }

    #[test]
    fn single_member_single_level() {
        assert_eq!(split_levels(&group(0, &[3]), &example_bids()), vec![ids(&[3])]);
    }

    #[test]
    fn level_sizes_match_demand_suffix_sums() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let n = rng.gen_range(1..15u32);
            let bids: Vec<Bid> = (0..n).map(|i| bid(i, rng.gen_range(1..10), rng.gen_range(1..8))).collect();
            let g = group(0, &(0..n).collect::<Vec<_>>());
            let max_d = bids.iter().map(|b| b.demand).max().unwrap() as usize;
            let mut hist = vec![0usize; max_d + 2];
            for b in &bids {
                hist[b.demand as usize] += 1;
            }
            let expected: Vec<usize> = (1..=max_d).map(|l| hist[l..].iter().sum()).collect();
            let got: Vec<usize> = split_levels(&g, &bids).iter().map(Vec::len).collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn mmin_reproduces_example_groups() {
        let bids = example_bids();
        let g1 = bid_mmin(&group(0, &[1, 2, 3, 4]), &bids, TieBreak::ById);
        let b1 = g1.bidding().unwrap();
        assert_eq!(b1.critical_buyer, BuyerId(4));
        assert_eq!(b1.share, Money::from_units(3));
        assert_eq!(bids_of(&g1), units(&[9, 6, 6, 3, 3]));
        assert_eq!(b1.vbgs[0].members, ids(&[1, 2, 3]));
        assert_eq!(b1.member_levels[1], ids(&[1, 2, 4]));

        let g2 = bid_mmin(&group(1, &[5, 6, 7]), &bids, TieBreak::ById);
        assert_eq!(g2.bidding().unwrap().critical_buyer, BuyerId(7));
        assert_eq!(bids_of(&g2), units(&[10, 10, 5, 5]));
        assert_eq!(g2.vbgs()[2].members, ids(&[6]));
    }

    #[test]
    fn singletons_are_eliminated() {
        let bids = example_bids();
        for f in [bid_mmin, bid_gmax] {
            let out = f(&group(2, &[3]), &bids, TieBreak::ById);
            assert!(matches!(out, GroupOutcome::Eliminated { group_id: 2, .. }));
            assert!(out.vbgs().is_empty());
        }
    }

    #[test]
    fn mmin_ties_go_to_lowest_id() {
        let bids = vec![bid(1, 4, 1), bid(2, 4, 1), bid(3, 4, 2)];
        let out = bid_mmin(&group(0, &[3, 1, 2]), &bids, TieBreak::ById);
        assert_eq!(out.bidding().unwrap().critical_buyer, BuyerId(1));
    }

    #[test]
    fn gmax_example_group_two() {
        // Ranked 11, 9, 5: rank 2 gives 9 * 1 = 9, rank 3 gives 5 * 2 = 10.
        let out = bid_gmax(&group(1, &[5, 6, 7]), &example_bids(), TieBreak::ById);
        let b = out.bidding().unwrap();
        assert_eq!(b.critical_buyer, BuyerId(7));
        assert_eq!(b.vbgs[0].bid, Money::from_units(10));
        assert_eq!(b.vbgs[0].members, ids(&[5, 6]));
    }

    #[test]
    fn gmax_drops_members_below_the_critical_bid() {
        // Ranked 10, 9, 2: rank 2 gives 9, rank 3 gives 4, so B2 is critical and B3 is dropped.
        let bids = vec![bid(1, 10, 2), bid(2, 9, 1), bid(3, 2, 3)];
        let b = bid_gmax(&group(0, &[1, 2, 3]), &bids, TieBreak::ById).bidding().cloned().unwrap();
        assert_eq!(b.critical_buyer, BuyerId(2));
        assert_eq!(b.vbgs.len(), 2);
        assert!(b.vbgs.iter().all(|v| v.members == ids(&[1])));
        assert_eq!(b.vbgs[0].bid, Money::from_units(9));
    }

    fn brute_force_gmax_first_bid(prices: &[Money]) -> Money {
        let mut sorted = prices.to_vec();
        sorted.sort_by(|a, b| b.cmp(a));
        (2..=sorted.len()).map(|rank| sorted[rank - 1].times(rank as u64 - 1)).max().unwrap()
    }

    #[test]
    fn gmax_first_bid_dominates_mmin_and_matches_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let n = rng.gen_range(2..12u32);
            let bids: Vec<Bid> = (0..n)
                .map(|i| Bid {
                    buyer: BuyerId(i),
                    per_channel: Money::from_micros(rng.gen_range(1..=20) * 250_000).unwrap(),
                    demand: rng.gen_range(1..6),
                    position: Position::default(),
                })
                .collect();
            let g = group(0, &(0..n).collect::<Vec<_>>());
            let gmax = bid_gmax(&g, &bids, TieBreak::ById);
            let mmin = bid_mmin(&g, &bids, TieBreak::ById);
            let g1 = gmax.vbgs()[0].bid;
            assert!(g1 >= mmin.vbgs()[0].bid);
            let prices: Vec<Money> = bids.iter().map(|b| b.per_channel).collect();
            assert_eq!(g1, brute_force_gmax_first_bid(&prices));
            let gb = gmax.bidding().unwrap();
            let floor = gb.share;
            for v in &gb.vbgs {
                for m in &v.members {
                    assert!(bids[m.0 as usize].per_channel >= floor);
                }
            }
            let mb = mmin.bidding().unwrap();
            assert_eq!(mb.share, *prices.iter().min().unwrap());
        }
    }

    #[test]
    fn ladders_are_nested_and_bids_non_increasing() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let n = rng.gen_range(1..12u32);
            let bids: Vec<Bid> = (0..n).map(|i| bid(i, rng.gen_range(1..6), rng.gen_range(1..7))).collect();
            let g = group(0, &(0..n).collect::<Vec<_>>());
            for bidding in [Bidding::Mmin, Bidding::Gmax] {
                let out = bid_group(&g, &bids, bidding, TieBreak::ById);
                let Some(b) = out.bidding() else {
                    assert_eq!(n, 1);
                    continue;
                };
                assert!(g.members.contains(&b.critical_buyer));
                for (i, v) in b.vbgs.iter().enumerate() {
                    assert_eq!(v.level as usize, i + 1);
                    assert!(!v.members.is_empty());
                    assert!(!v.members.contains(&b.critical_buyer));
                    assert_eq!(v.bid, b.share.times(v.members.len() as u64));
                    if i > 0 {
                        let prev = &b.vbgs[i - 1];
                        assert!(v.members.iter().all(|m| prev.members.contains(m)));
                        assert!(v.bid <= prev.bid);
                    }
                }
            }
        }
    }

    #[test]
    fn raising_a_survivor_bid_keeps_the_ladder() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..300 {
            let n = rng.gen_range(2..10u32);
            let mut bids: Vec<Bid> = (0..n).map(|i| bid(i, rng.gen_range(1..8), rng.gen_range(1..5))).collect();
            let g = group(0, &(0..n).collect::<Vec<_>>());
            for bidding in [Bidding::Mmin, Bidding::Gmax] {
                let before = bid_group(&g, &bids, bidding, TieBreak::ById).bidding().cloned().unwrap();
                let Some(&target) = before.vbgs[0].members.first() else { continue };
                let saved = bids[target.0 as usize].per_channel;
                bids[target.0 as usize].per_channel = saved + Money::from_units(rng.gen_range(0..5));
                let after = bid_group(&g, &bids, bidding, TieBreak::ById).bidding().cloned().unwrap();
                if after.critical_buyer == before.critical_buyer {
                    assert_eq!(after.vbgs, before.vbgs);
                }
                bids[target.0 as usize].per_channel = saved;
            }
        }
    }

    #[test]
    fn table_dump_has_example_rows() {
        let bids = example_bids();
        let outs = vec![
            bid_mmin(&group(0, &[1, 2, 3, 4]), &bids, TieBreak::ById),
            bid_mmin(&group(1, &[5, 6, 7]), &bids, TieBreak::ById),
        ];
        let table = dump_vbg_table(&outs, &bids);
        let first = table.lines().nth(1).unwrap();
        assert!(first.contains("G0 (B4)"));
        assert!(first.contains("{B1(10), B2(8), B3(5), B4(3)}"));
        assert!(first.contains("{B1(10), B2(8), B3(5)}"));
        assert!(first.trim_end().ends_with('9'));
        assert_eq!(table.lines().count(), 1 + 5 + 4);
    }

    #[test]
    fn parses_bidding_names() {
        assert_eq!("MMIN".parse::<Bidding>().unwrap(), Bidding::Mmin);
        assert_eq!("gmax".parse::<Bidding>().unwrap(), Bidding::Gmax);
        assert!("vcg".parse::<Bidding>().is_err());
    }
}
