//! Exact rank-aware maximum-independent-set search.
//!
//! Among all maximum independent sets of the contradiction graph, selection
//! returns the one whose ascending index sequence is lexicographically
//! smallest, i.e. the one built from the highest-ranked documents. The
//! search is an exact branch-and-bound over vertex bitsets; [`mis_oracle`]
//! is a deliberately naive full enumeration kept independent of the fast
//! path so the two can be checked against each other.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hard cap for [`select_mis`]. Larger graphs must go through the sampling
/// pipeline, which bounds the graph by the number of rounds instead.
pub const SELECT_CAP: usize = 30;

/// Hard cap for [`mis_oracle`], which enumerates all `2^n` subsets.
pub const ORACLE_CAP: usize = 20;

/// Default cap on how many co-maximum sets a result materializes.
pub const CO_MAXIMUM_CAP: usize = 1024;

/// Undirected contradiction graph over document indices.
///
/// Vertices carry the original (1-based) document indices as labels, in
/// strictly increasing order; adjacency is a bitset per vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContradictionGraph {
    labels: Vec<u32>,
    adj: Vec<u64>,
}

impl ContradictionGraph {
    /// Builds a graph from labels and label-pair edges. Labels must be
    /// strictly increasing; edges must reference known labels and contain no
    /// self-loops. Adjacency is symmetric by construction.
    pub fn new(labels: Vec<u32>, edges: &[(u32, u32)]) -> Result<Self> {
        if labels.len() > 64 {
            return Err(Error::GraphTooLarge {
                n: labels.len(),
                cap: 64,
            });
        }
        if labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "graph labels must be strictly increasing".into(),
            ));
        }
        let mut adj = vec![0u64; labels.len()];
        for &(a, b) in edges {
            if a == b {
                return Err(Error::Config(format!("self-loop on document {a}")));
            }
            let (pa, pb) = match (labels.binary_search(&a), labels.binary_search(&b)) {
                (Ok(pa), Ok(pb)) => (pa, pb),
                _ => {
                    return Err(Error::Config(format!(
                        "edge ({a}, {b}) references unknown label"
                    )))
                }
            };
            adj[pa] |= 1 << pb;
            adj[pb] |= 1 << pa;
        }
        Ok(Self { labels, adj })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn edge_count(&self) -> usize {
        self.adj
            .iter()
            .map(|a| a.count_ones() as usize)
            .sum::<usize>()
            / 2
    }

    pub fn has_edge_between(&self, label_a: u32, label_b: u32) -> bool {
        match (
            self.labels.binary_search(&label_a),
            self.labels.binary_search(&label_b),
        ) {
            (Ok(pa), Ok(pb)) => self.adj[pa] & (1 << pb) != 0,
            _ => false,
        }
    }

    fn mask_to_labels(&self, mask: u64) -> Vec<u32> {
        (0..self.n())
            .filter(|&v| mask & (1 << v) != 0)
            .map(|v| self.labels[v])
            .collect()
    }

    fn positions_of(&self, labels: &[u32]) -> Vec<usize> {
        labels
            .iter()
            .filter_map(|l| self.labels.binary_search(l).ok())
            .collect()
    }

    fn full_mask(&self) -> u64 {
        if self.n() == 64 {
            u64::MAX
        } else {
            (1u64 << self.n()) - 1
        }
    }

    fn is_independent_mask(&self, mask: u64) -> bool {
        (0..self.n()).all(|v| mask & (1 << v) == 0 || self.adj[v] & mask == 0)
    }
}

/// The selected independent set and its co-maximum alternatives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Chosen document indices, ascending. This is the unique maximum
    /// independent set with the smallest lexicographic key.
    pub chosen: Vec<u32>,
    pub size: usize,
    /// All maximum independent sets in ascending lexicographic order,
    /// materialized up to a cap ([`CO_MAXIMUM_CAP`] by default).
    pub all_maximum: Vec<Vec<u32>>,
    /// True when the cap cut enumeration short.
    pub truncated: bool,
}

impl SelectionResult {
    /// The rank key used for tie-breaking: the ascending index sequence.
    pub fn lex_key(&self) -> &[u32] {
        &self.chosen
    }

    fn empty() -> Self {
        SelectionResult {
            chosen: Vec::new(),
            size: 0,
            all_maximum: Vec::new(),
            truncated: false,
        }
    }
}

/// Ascending sort of a set of document indices; the tie-break key.
///
/// Keys compare element-wise left to right, smaller index first. The
/// selection logic only ever compares keys of equal-size sets.
pub fn lex_key(set: &[u32]) -> Vec<u32> {
    let mut key = set.to_vec();
    key.sort_unstable();
    key
}

/// Exact rank-aware MIS selection via branch-and-bound.
///
/// Explores vertices in ascending label order, include-branch first, so the
/// first maximum-size set encountered is the lexicographically smallest; a
/// bound prunes branches that cannot strictly beat the incumbent, which can
/// only discard later (lex-larger) ties. The result equals exhaustive
/// enumeration, which `mis_oracle` verifies independently.
pub fn select_mis(graph: &ContradictionGraph) -> Result<SelectionResult> {
    select_mis_capped(graph, CO_MAXIMUM_CAP)
}

/// [`select_mis`] with an explicit cap on materialized co-maximum sets.
pub fn select_mis_capped(
    graph: &ContradictionGraph,
    co_maximum_cap: usize,
) -> Result<SelectionResult> {
    if graph.n() == 0 {
        // Possible after aggressive relevance filtering; the pipeline
        // reports abstention downstream.
        return Ok(SelectionResult::empty());
    }
    if graph.n() > SELECT_CAP {
        return Err(Error::GraphTooLarge {
            n: graph.n(),
            cap: SELECT_CAP,
        });
    }
    let mut best = (0u64, 0u32);
    branch(&graph.adj, graph.full_mask(), 0, 0, &mut best);
    let chosen = graph.mask_to_labels(best.0);
    debug_assert!(graph.is_independent_mask(best.0));

    let mut masks = Vec::new();
    let mut truncated = false;
    enumerate_maximum(
        &graph.adj,
        graph.full_mask(),
        0,
        0,
        best.1,
        co_maximum_cap,
        &mut masks,
        &mut truncated,
    );
    let all_maximum = masks.into_iter().map(|m| graph.mask_to_labels(m)).collect();
    Ok(SelectionResult {
        chosen,
        size: best.1 as usize,
        all_maximum,
        truncated,
    })
}

/// Include-first branch-and-bound keeping the first (lex-smallest) maximum.
fn branch(adj: &[u64], avail: u64, current: u64, count: u32, best: &mut (u64, u32)) {
    if count + avail.count_ones() <= best.1 {
        return; // cannot strictly improve; any tie here would be lex-larger
    }
    if avail == 0 {
        *best = (current, count);
        return;
    }
    let v = avail.trailing_zeros() as usize;
    let bit = 1u64 << v;
    branch(adj, avail & !bit & !adj[v], current | bit, count + 1, best);
    branch(adj, avail & !bit, current, count, best);
}

/// Size-only variant used for subgraph queries.
fn branch_size(adj: &[u64], avail: u64, count: u32, best: &mut u32) {
    if count + avail.count_ones() <= *best {
        return;
    }
    if avail == 0 {
        *best = count;
        return;
    }
    let v = avail.trailing_zeros() as usize;
    let bit = 1u64 << v;
    branch_size(adj, avail & !bit & !adj[v], count + 1, best);
    branch_size(adj, avail & !bit, count, best);
}

/// DFS in the same order as [`branch`], collecting every independent set of
/// exactly `target` vertices until the cap is hit.
#[allow(clippy::too_many_arguments)]
fn enumerate_maximum(
    adj: &[u64],
    avail: u64,
    current: u64,
    count: u32,
    target: u32,
    cap: usize,
    out: &mut Vec<u64>,
    truncated: &mut bool,
) {
    if *truncated {
        return;
    }
    if count == target {
        if out.len() == cap {
            *truncated = true;
        } else {
            out.push(current);
        }
        return;
    }
    if count + avail.count_ones() < target || avail == 0 {
        return;
    }
    let v = avail.trailing_zeros() as usize;
    let bit = 1u64 << v;
    enumerate_maximum(
        adj,
        avail & !bit & !adj[v],
        current | bit,
        count + 1,
        target,
        cap,
        out,
        truncated,
    );
    enumerate_maximum(
        adj,
        avail & !bit,
        current,
        count,
        target,
        cap,
        out,
        truncated,
    );
}

/// Size of the maximum independent set restricted to `within` (vertex mask).
fn mis_size_within(graph: &ContradictionGraph, within: u64) -> u32 {
    let mut best = 0;
    branch_size(&graph.adj, within, 0, &mut best);
    best
}

/// True iff some maximum independent set of the whole graph contains at
/// least one of the `marked` labels.
///
/// Decided exactly without enumerating the (possibly exponential) family of
/// maximum sets: for each marked vertex `v`, the largest independent set
/// through `v` is `1 + mis(non-neighbours of v)`, and `v` lies in some
/// maximum set iff that total reaches the global maximum.
pub fn any_maximum_contains(graph: &ContradictionGraph, marked: &[u32]) -> Result<bool> {
    if graph.n() > SELECT_CAP {
        return Err(Error::GraphTooLarge {
            n: graph.n(),
            cap: SELECT_CAP,
        });
    }
    if graph.n() == 0 {
        return Ok(false);
    }
    let full = graph.full_mask();
    let best = mis_size_within(graph, full);
    for v in graph.positions_of(marked) {
        let avail = full & !(1u64 << v) & !graph.adj[v];
        if 1 + mis_size_within(graph, avail) == best {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Independent verification oracle: plain enumeration of all `2^n` subsets
/// with no pruning, keeping the largest set and breaking ties by explicit
/// lexicographic comparison of the label sequences.
pub fn mis_oracle(graph: &ContradictionGraph) -> Result<SelectionResult> {
    mis_oracle_capped(graph, CO_MAXIMUM_CAP)
}

/// [`mis_oracle`] with an explicit co-maximum cap.
pub fn mis_oracle_capped(
    graph: &ContradictionGraph,
    co_maximum_cap: usize,
) -> Result<SelectionResult> {
    if graph.n() == 0 {
        return Ok(SelectionResult::empty());
    }
    if graph.n() > ORACLE_CAP {
        return Err(Error::GraphTooLarge {
            n: graph.n(),
            cap: ORACLE_CAP,
        });
    }
    let mut best: Option<Vec<u32>> = None;
    let mut best_masks: Vec<u64> = Vec::new();
    for mask in 0..(1u64 << graph.n()) {
        if !graph.is_independent_mask(mask) {
            continue;
        }
        let candidate = graph.mask_to_labels(mask);
        match &best {
            Some(current) if candidate.len() < current.len() => {}
            Some(current) if candidate.len() == current.len() => {
                best_masks.push(mask);
                if candidate < *current {
                    best = Some(candidate);
                }
            }
            _ => {
                best = Some(candidate);
                best_masks = vec![mask];
            }
        }
    }
    let chosen = best.unwrap_or_default();
    let mut all_maximum: Vec<Vec<u32>> = best_masks
        .into_iter()
        .map(|m| graph.mask_to_labels(m))
        .collect();
    all_maximum.sort();
    let truncated = all_maximum.len() > co_maximum_cap;
    all_maximum.truncate(co_maximum_cap);
    Ok(SelectionResult {
        size: chosen.len(),
        chosen,
        all_maximum,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;

    fn graph(n: u32, edges: &[(u32, u32)]) -> ContradictionGraph {
        ContradictionGraph::new((1..=n).collect(), edges).unwrap()
    }

    #[test]
    fn lex_key_orders_by_first_difference() {
        assert!(lex_key(&[1, 2, 3]) < lex_key(&[1, 2, 5]));
        assert_eq!(lex_key(&[3, 2]), lex_key(&[2, 3]));
        assert!(lex_key(&[4, 1]) < lex_key(&[2, 3]));
    }

    #[test]
    fn two_maximum_sets_pick_the_higher_ranked_one() {
        // Only maximum sets are {1,2,3} and {1,2,5}; rank preference picks
        // the former.
        let g = graph(5, &[(3, 5), (1, 4), (2, 4)]);
        let result = select_mis(&g).unwrap();
        assert_eq!(result.chosen, vec![1, 2, 3]);
        assert_eq!(result.size, 3);
        assert_eq!(result.all_maximum, vec![vec![1, 2, 3], vec![1, 2, 5]]);
        assert!(!result.truncated);
    }

    #[test]
    fn empty_edge_set_selects_everything() {
        let result = select_mis(&graph(4, &[])).unwrap();
        assert_eq!(result.chosen, vec![1, 2, 3, 4]);
    }

    #[test]
    fn complete_graph_selects_lowest_index() {
        let edges: Vec<(u32, u32)> = (1..=4)
            .flat_map(|a| (a + 1..=4).map(move |b| (a, b)))
            .collect();
        let result = select_mis(&graph(4, &edges)).unwrap();
        assert_eq!(result.chosen, vec![1]);
        assert_eq!(result.all_maximum.len(), 4);
    }

    #[test]
    fn oracle_trivial_cases() {
        let single = mis_oracle(&graph(1, &[])).unwrap();
        assert_eq!(single.chosen, vec![1]);
        let pair = mis_oracle(&graph(2, &[(1, 2)])).unwrap();
        assert_eq!(pair.chosen, vec![1]);
    }

    #[test]
    fn caps_are_enforced() {
        let big = ContradictionGraph::new((1..=31).collect(), &[]).unwrap();
        assert!(matches!(select_mis(&big), Err(Error::GraphTooLarge { .. })));
        let medium = ContradictionGraph::new((1..=21).collect(), &[]).unwrap();
        assert!(matches!(
            mis_oracle(&medium),
            Err(Error::GraphTooLarge { .. })
        ));
        assert!(select_mis(&medium).is_ok());
    }

    #[test]
    fn zero_vertex_graph_selects_nothing() {
        let g = ContradictionGraph::new(vec![], &[]).unwrap();
        let result = select_mis(&g).unwrap();
        assert!(result.chosen.is_empty());
        assert_eq!(result.size, 0);
    }

    #[test]
    fn co_maximum_enumeration_is_capped() {
        // Ten disjoint edges: 2^10 maximum sets of size 10.
        let edges: Vec<(u32, u32)> = (0..10).map(|i| (2 * i + 1, 2 * i + 2)).collect();
        let g = graph(20, &edges);
        let result = select_mis_capped(&g, 64).unwrap();
        assert_eq!(result.size, 10);
        assert_eq!(result.all_maximum.len(), 64);
        assert!(result.truncated);
        // Lowest endpoint of every edge wins the tie-break.
        assert_eq!(
            result.chosen,
            (0..10).map(|i| 2 * i + 1).collect::<Vec<u32>>()
        );
    }

    #[test]
    fn labels_survive_filtering_gaps() {
        // Labels {2, 5, 9} with one edge; selection reports original indices.
        let g = ContradictionGraph::new(vec![2, 5, 9], &[(2, 5)]).unwrap();
        let result = select_mis(&g).unwrap();
        assert_eq!(result.chosen, vec![2, 9]);
    }

    #[test]
    fn rejects_malformed_graphs() {
        assert!(ContradictionGraph::new(vec![1, 1, 2], &[]).is_err());
        assert!(ContradictionGraph::new(vec![3, 1], &[]).is_err());
        assert!(ContradictionGraph::new(vec![1, 2], &[(1, 1)]).is_err());
        assert!(ContradictionGraph::new(vec![1, 2], &[(1, 7)]).is_err());
    }

    fn random_graph(rng: &mut impl Rng, n: u32, edge_prob: f64) -> ContradictionGraph {
        let mut edges = Vec::new();
        for a in 1..=n {
            for b in a + 1..=n {
                if rng.gen::<f64>() < edge_prob {
                    edges.push((a, b));
                }
            }
        }
        graph(n, &edges)
    }

    #[test]
    fn matches_oracle_on_random_graphs() {
        // Quick spot check; the acceptance suite runs the full 10^4-graph
        // equivalence sweep.
        let mut rng = substream(31, &[0]);
        for _ in 0..500 {
            let n = rng.gen_range(1..=12);
            let p = rng.gen::<f64>();
            let g = random_graph(&mut rng, n, p);
            let fast = select_mis(&g).unwrap();
            let slow = mis_oracle(&g).unwrap();
            assert_eq!(fast, slow, "disagreement on n={n} p={p:.3}");
        }
    }

    #[test]
    fn chosen_set_is_independent_and_maximal() {
        let mut rng = substream(32, &[0]);
        for _ in 0..300 {
            let n = rng.gen_range(1..=16);
            let p = rng.gen::<f64>();
            let g = random_graph(&mut rng, n, p);
            let result = select_mis(&g).unwrap();
            for (a_pos, &a) in result.chosen.iter().enumerate() {
                for &b in &result.chosen[a_pos + 1..] {
                    assert!(!g.has_edge_between(a, b), "adjacent pair chosen");
                }
            }
            // Maximality: no outside vertex extends the set.
            for &label in g.labels() {
                if result.chosen.contains(&label) {
                    continue;
                }
                let extends = result.chosen.iter().all(|&c| !g.has_edge_between(c, label));
                assert!(!extends, "vertex {label} could extend the chosen set");
            }
            // Rank preference: chosen is lex-minimal among co-maximum sets.
            for other in &result.all_maximum {
                assert!(result.chosen <= *other);
            }
        }
    }

    #[test]
    fn any_maximum_membership_matches_enumeration() {
        let mut rng = substream(33, &[0]);
        for _ in 0..300 {
            let n = rng.gen_range(1..=12);
            let p = rng.gen::<f64>();
            let g = random_graph(&mut rng, n, p);
            let marked: Vec<u32> = (1..=n).filter(|_| rng.gen::<bool>()).collect();
            let fast = any_maximum_contains(&g, &marked).unwrap();
            let all = mis_oracle_capped(&g, usize::MAX).unwrap().all_maximum;
            let slow = all.iter().any(|set| set.iter().any(|v| marked.contains(v)));
            assert_eq!(fast, slow);
        }
    }
}
