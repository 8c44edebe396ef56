//! Buyer conflict graph and bid-independent buyer grouping.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::model::{Bid, BuyerId, Length};
use crate::rng::TieBreak;

/// Symmetric, irreflexive interference relation over buyers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictGraph {
    buyers: Vec<BuyerId>,
    adjacency: Vec<Vec<usize>>,
}

impl ConflictGraph {
    /// Builds a graph from explicit edges. Self-loops and duplicates are
    /// dropped; edges naming unknown buyers are ignored.
    pub fn from_edges(buyers: &[BuyerId], edges: &[(BuyerId, BuyerId)]) -> ConflictGraph {
        let mut sorted = buyers.to_vec();
        sorted.sort();
        sorted.dedup();
        let index: HashMap<BuyerId, usize> = sorted.iter().enumerate().map(|(i, b)| (*b, i)).collect();
        let mut adjacency = vec![Vec::new(); sorted.len()];
        for (a, b) in edges {
            if let (Some(&i), Some(&j)) = (index.get(a), index.get(b)) {
                if i != j {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        ConflictGraph { buyers: sorted, adjacency }
    }

    /// Buyers in ascending id order.
    pub fn buyers(&self) -> &[BuyerId] {
        &self.buyers
    }

    pub fn len(&self) -> usize {
        self.buyers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buyers.is_empty()
    }

    pub fn degree(&self, index: usize) -> usize {
        self.adjacency[index].len()
    }

    pub fn neighbors(&self, index: usize) -> &[usize] {
        &self.adjacency[index]
    }

    pub fn conflicts(&self, a: BuyerId, b: BuyerId) -> bool {
        match (self.buyers.binary_search(&a), self.buyers.binary_search(&b)) {
            (Ok(i), Ok(j)) => self.adjacency[i].binary_search(&j).is_ok(),
            _ => false,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Every edge once, as `(lower id, higher id)`, sorted.
    pub fn edges(&self) -> Vec<(BuyerId, BuyerId)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (i, adj) in self.adjacency.iter().enumerate() {
            for &j in adj.iter().filter(|&&j| j > i) {
                out.push((self.buyers[i], self.buyers[j]));
            }
        }
        out
    }
}

/// Two buyers conflict when they are at most `protection_distance` apart.
///
/// Buyers are bucketed into square cells of side `protection_distance` so only
/// the 3x3 neighbourhood of each cell is compared.
pub fn build_conflict_graph(bids: &[Bid], protection_distance: Length) -> ConflictGraph {
    let mut order: Vec<&Bid> = bids.iter().collect();
    order.sort_by_key(|b| b.buyer);
    let buyers: Vec<BuyerId> = order.iter().map(|b| b.buyer).collect();

    let cell = protection_distance.micros().max(1);
    let limit = protection_distance.micros() * protection_distance.micros();
    let cell_of = |b: &Bid| (b.position.x.micros() / cell, b.position.y.micros() / cell);

    let mut cells: HashMap<(i128, i128), Vec<usize>> = HashMap::new();
    for (i, b) in order.iter().enumerate() {
        cells.entry(cell_of(b)).or_default().push(i);
    }

    let mut adjacency = vec![Vec::new(); order.len()];
    for (i, b) in order.iter().enumerate() {
        let (cx, cy) = cell_of(b);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(members) = cells.get(&(cx + dx, cy + dy)) else { continue };
                for &j in members {
                    if j != i && b.position.distance_sq(&order[j].position) <= limit {
                        adjacency[i].push(j);
                    }
                }
            }
        }
        adjacency[i].sort_unstable();
    }
    ConflictGraph { buyers, adjacency }
}

/// A set of mutually non-interfering buyers that can share every channel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BuyerGroup {
    pub id: u32,
    /// Ascending buyer ids.
    pub members: Vec<BuyerId>,
}

/// Partitions all buyers into independent sets.
///
/// Each round extracts a greedy maximal independent set from the buyers not
/// yet grouped: repeatedly take the candidate with the fewest remaining
/// candidate neighbours, then drop it and its neighbours from the candidate
/// pool. Rounds continue until every buyer is grouped. Group ids follow
/// extraction order.
pub fn form_buyer_groups(graph: &ConflictGraph, ties: TieBreak) -> Vec<BuyerGroup> {
    let n = graph.len();
    let keys: Vec<(u64, u64)> = graph.buyers.iter().map(|b| ties.key(1, u64::from(b.0))).collect();
    let mut grouped = vec![false; n];
    let mut remaining = n;
    let mut groups = Vec::new();

    while remaining > 0 {
        let mut candidate: Vec<bool> = grouped.iter().map(|g| !g).collect();
        let mut degree: Vec<usize> = (0..n)
            .map(|i| if candidate[i] { graph.adjacency[i].iter().filter(|&&j| candidate[j]).count() } else { 0 })
            .collect();
        let mut members = Vec::new();

        while let Some(pick) = (0..n).filter(|&i| candidate[i]).min_by_key(|&i| (degree[i], keys[i])) {
            members.push(pick);
            candidate[pick] = false;
            let removed: Vec<usize> = graph.adjacency[pick].iter().copied().filter(|&j| candidate[j]).collect();
            for &j in &removed {
                candidate[j] = false;
            }
            for &j in &removed {
                for &k in &graph.adjacency[j] {
                    if candidate[k] {
                        degree[k] -= 1;
                    }
                }
            }
        }

        for &i in &members {
            grouped[i] = true;
        }
        remaining -= members.len();
        let mut ids: Vec<BuyerId> = members.iter().map(|&i| graph.buyers[i]).collect();
        ids.sort();
        groups.push(BuyerGroup { id: groups.len() as u32, members: ids });
    }
    groups
}

/// One line per group: `G<id>: B<a> B<b> ...`.
pub fn dump_groups(groups: &[BuyerGroup]) -> String {
    let mut out = String::new();
    for g in groups {
        let members: Vec<String> = g.members.iter().map(ToString::to_string).collect();
        writeln!(out, "G{}: {}", g.id, members.join(" ")).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Position;
    use crate::money::Money;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn at(id: u32, x: u32, y: u32) -> Bid {
        Bid {
            buyer: BuyerId(id),
            per_channel: Money::from_units(1),
            demand: 1,
            position: Position::new(Length::from_units(x), Length::from_units(y)),
        }
    }

    fn ids(range: std::ops::Range<u32>) -> Vec<BuyerId> {
        range.map(BuyerId).collect()
    }

    /// All-pairs distance check.
    fn brute_force_edges(bids: &[Bid], distance: Length) -> Vec<(BuyerId, BuyerId)> {
        let limit = distance.micros() * distance.micros();
        let mut out = Vec::new();
        for a in bids {
            for b in bids {
                if a.buyer < b.buyer && a.position.distance_sq(&b.position) <= limit {
                    out.push((a.buyer, b.buyer));
                }
            }
        }
        out.sort();
        out
    }

    fn assert_partition_of_independent_sets(graph: &ConflictGraph, groups: &[BuyerGroup]) {
        let mut seen: Vec<BuyerId> = groups.iter().flat_map(|g| g.members.iter().copied()).collect();
        seen.sort();
        assert_eq!(seen, graph.buyers(), "groups must partition the buyers");
        for g in groups {
            assert!(!g.members.is_empty());
            for (i, a) in g.members.iter().enumerate() {
                for b in &g.members[i + 1..] {
                    assert!(!graph.conflicts(*a, *b), "{a} and {b} conflict inside G{}", g.id);
                }
            }
        }
    }

    #[test]
    fn boundary_distance_is_a_conflict() {
        let g = build_conflict_graph(&[at(1, 0, 0), at(2, 10, 0), at(3, 21, 0)], Length::from_units(10));
        assert_eq!(g.edges(), vec![(BuyerId(1), BuyerId(2))]);
    }

    #[test]
    fn single_buyer_has_no_edges() {
        let g = build_conflict_graph(&[at(5, 3, 3)], Length::from_units(10));
        assert_eq!(g.edge_count(), 0);
        assert_eq!(form_buyer_groups(&g, TieBreak::ById), vec![BuyerGroup { id: 0, members: vec![BuyerId(5)] }]);
    }

    #[test]
    fn zero_distance_links_only_coincident_buyers() {
        let g = build_conflict_graph(&[at(1, 4, 4), at(2, 4, 4), at(3, 5, 4)], Length::ZERO);
        assert_eq!(g.edges(), vec![(BuyerId(1), BuyerId(2))]);
    }

    #[test]
    fn grid_matches_all_pairs_on_uniform_buyers() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let bids: Vec<Bid> = (0..100)
                .map(|i| {
                    let mut b = at(i, 0, 0);
                    b.position = Position::new(
                        Length::from_micros(rng.gen_range(0..=100_000_000)).unwrap(),
                        Length::from_micros(rng.gen_range(0..=100_000_000)).unwrap(),
                    );
                    b
                })
                .collect();
            let d = Length::from_units(10);
            let g = build_conflict_graph(&bids, d);
            let oracle = brute_force_edges(&bids, d);
            assert_eq!(g.edge_count(), oracle.len());
            assert_eq!(g.edges(), oracle);
        }
    }

    #[test]
    fn edgeless_graph_is_one_group() {
        let g = ConflictGraph::from_edges(&ids(1..9), &[]);
        let groups = form_buyer_groups(&g, TieBreak::ById);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].members, ids(1..9));
    }

    #[test]
    fn complete_graph_is_all_singletons() {
        let buyers = ids(1..7);
        let mut edges = Vec::new();
        for a in &buyers {
            for b in &buyers {
                if a < b {
                    edges.push((*a, *b));
                }
            }
        }
        let g = ConflictGraph::from_edges(&buyers, &edges);
        let groups = form_buyer_groups(&g, TieBreak::ById);
        assert_eq!(groups.len(), 6);
        assert!(groups.iter().all(|g| g.members.len() == 1));
        assert_eq!(groups[0].members, vec![BuyerId(1)]);
    }

    #[test]
    fn path_picks_low_degree_ends_first() {
        // B1-B5-B2-B6-B3-B7-B4
        let edges = [(1, 5), (5, 2), (2, 6), (6, 3), (3, 7), (7, 4)].map(|(a, b)| (BuyerId(a), BuyerId(b)));
        let g = ConflictGraph::from_edges(&ids(1..8), &edges);
        let groups = form_buyer_groups(&g, TieBreak::ById);
        assert_eq!(groups[0].members, ids(1..5));
        assert_eq!(groups[1].members, ids(5..8));
    }

    #[test]
    fn random_graphs_partition_into_independent_sets() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for round in 0..500 {
            let n = rng.gen_range(1..40u32);
            let p: f64 = rng.gen_range(0.0..1.0);
            let buyers = ids(0..n);
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.gen_bool(p) {
                        edges.push((BuyerId(a), BuyerId(b)));
                    }
                }
            }
            let g = ConflictGraph::from_edges(&buyers, &edges);
            let ties = if round % 2 == 0 { TieBreak::ById } else { TieBreak::Seeded(round) };
            let groups = form_buyer_groups(&g, ties);
            assert_partition_of_independent_sets(&g, &groups);
            assert_eq!(groups, form_buyer_groups(&g, ties));
        }
    }

    #[test]
    fn grouping_ignores_bids() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut bids: Vec<Bid> = (0..60).map(|i| at(i, rng.gen_range(0..=100), rng.gen_range(0..=100))).collect();
        let d = Length::from_units(12);
        let before = form_buyer_groups(&build_conflict_graph(&bids, d), TieBreak::ById);
        for b in &mut bids {
            b.per_channel = Money::from_micros(rng.gen_range(1..5_000_000)).unwrap();
            b.demand = rng.gen_range(1..9);
        }
        let after = form_buyer_groups(&build_conflict_graph(&bids, d), TieBreak::ById);
        assert_eq!(before, after);
    }

    #[test]
    fn dump_lists_members_per_line() {
        let groups = vec![BuyerGroup { id: 0, members: ids(1..3) }, BuyerGroup { id: 1, members: vec![BuyerId(7)] }];
        assert_eq!(dump_groups(&groups), "G0: B1 B2\nG1: B7\n");
    }

    proptest! {
        #[test]
        fn geometric_grouping_is_a_partition(
            points in prop::collection::vec((0u32..=50, 0u32..=50), 1..40),
            distance in 0u32..20,
        ) {
            let bids: Vec<Bid> = points.iter().enumerate().map(|(i, &(x, y))| at(i as u32, x, y)).collect();
            let g = build_conflict_graph(&bids, Length::from_units(distance));
            prop_assert_eq!(g.edges(), brute_force_edges(&bids, Length::from_units(distance)));
            let groups = form_buyer_groups(&g, TieBreak::ById);
            assert_partition_of_independent_sets(&g, &groups);
        }
    }
}
