//! Immutable adjacency structure with forward and reverse lists, plus exact
//! k-hop neighborhood queries.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{CcError, Result};

pub type NodeId = usize;

/// Largest neighborhood radius supported by the spatial machinery.
pub const MAX_HOPS: usize = 3;

/// Which edges a traversal may follow.
///
/// `Incoming` walks edges backwards (`w -> v -> u` reaches `w` from `u` in two
/// hops), `Outgoing` walks them forwards, and `Any` ignores orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Any,
    Incoming,
    Outgoing,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Any => "any",
            Direction::Incoming => "in",
            Direction::Outgoing => "out",
        }
    }
}

/// `Inclusive` returns every node within `k` hops; `Exact` only those at distance exactly `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HopMode {
    #[default]
    Inclusive,
    Exact,
}

/// What the builder threw away while normalizing raw edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub self_loops: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_count: usize,
    directed: bool,
    weighted: bool,
    edge_count: usize,
    out_adj: Vec<Vec<(NodeId, f64)>>,
    in_adj: Vec<Vec<(NodeId, f64)>>,
}

impl Graph {
    /// Build a graph from raw `(src, dst, weight)` triples.
    ///
    /// Self-loops are dropped and duplicate pairs keep the first weight seen.
    /// For undirected graphs `(u, v)` and `(v, u)` are the same pair. When
    /// `weighted` is false every weight is forced to 1.
    pub fn from_edges<I>(
        node_count: usize,
        directed: bool,
        weighted: bool,
        edges: I,
    ) -> Result<(Self, BuildStats)>
    where
        I: IntoIterator<Item = (NodeId, NodeId, f64)>,
    {
        let mut stats = BuildStats::default();
        let mut seen = HashSet::new();
        let mut out_adj = vec![Vec::new(); node_count];
        let mut in_adj = vec![Vec::new(); node_count];
        let mut edge_count = 0;

        for (u, v, w) in edges {
            if u >= node_count || v >= node_count {
                return Err(CcError::Argument(format!(
                    "edge ({u}, {v}) references a node outside [0, {node_count})"
                )));
            }
            let w = if weighted { w } else { 1.0 };
            if !(w.is_finite() && w > 0.0) {
                return Err(CcError::Data(format!(
                    "edge ({u}, {v}) has non-positive or non-finite weight {w}"
                )));
            }
            if u == v {
                stats.self_loops += 1;
                continue;
            }
            let key = if directed { (u, v) } else { (u.min(v), u.max(v)) };
            if !seen.insert(key) {
                stats.duplicates += 1;
                continue;
            }
            out_adj[u].push((v, w));
            in_adj[v].push((u, w));
            if !directed {
                out_adj[v].push((u, w));
                in_adj[u].push((v, w));
            }
            edge_count += 1;
        }
        for list in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            list.sort_by_key(|&(n, _)| n);
        }
        if stats.self_loops > 0 || stats.duplicates > 0 {
            log::info!(
                "graph build dropped {} self-loops and {} duplicate edges",
                stats.self_loops,
                stats.duplicates
            );
        }
        Ok((
            Graph {
                node_count,
                directed,
                weighted,
                edge_count,
                out_adj,
                in_adj,
            },
            stats,
        ))
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Arcs for directed graphs, unordered edges for undirected ones.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn check_node(&self, u: NodeId) -> Result<()> {
        if u < self.node_count {
            Ok(())
        } else {
            Err(CcError::Argument(format!(
                "node id {u} outside [0, {})",
                self.node_count
            )))
        }
    }

    pub fn out_neighbors(&self, u: NodeId) -> &[(NodeId, f64)] {
        &self.out_adj[u]
    }

    pub fn in_neighbors(&self, u: NodeId) -> &[(NodeId, f64)] {
        &self.in_adj[u]
    }

    /// Adjacent `(node, weight)` pairs one hop away under `direction`. For
    /// directed graphs with `Any`, a reciprocated pair shows up twice.
    pub fn adjacent(&self, u: NodeId, direction: Direction) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        let (first, second): (&[(NodeId, f64)], &[(NodeId, f64)]) = match direction {
            Direction::Outgoing => (&self.out_adj[u], &[]),
            Direction::Incoming => (&self.in_adj[u], &[]),
            Direction::Any if self.directed => (&self.out_adj[u], &self.in_adj[u]),
            Direction::Any => (&self.out_adj[u], &[]),
        };
        first.iter().chain(second.iter()).copied()
    }

    /// Distinct neighbors ignoring orientation, sorted.
    pub fn simple_neighbors(&self, u: NodeId) -> Vec<NodeId> {
        let mut ns: Vec<NodeId> = self.adjacent(u, Direction::Any).map(|(v, _)| v).collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    pub fn degree(&self, u: NodeId) -> usize {
        if self.directed {
            self.simple_neighbors(u).len()
        } else {
            self.out_adj[u].len()
        }
    }

    pub fn has_arc(&self, u: NodeId, v: NodeId) -> bool {
        self.out_adj[u].binary_search_by_key(&v, |&(n, _)| n).is_ok()
    }

    pub fn is_adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.has_arc(u, v) || self.has_arc(v, u)
    }

    /// Every stored edge: each arc once for directed graphs, `u < v` once for undirected.
    pub fn edges(&self) -> Vec<(NodeId, NodeId, f64)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (u, list) in self.out_adj.iter().enumerate() {
            for &(v, w) in list {
                if self.directed || u < v {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    /// Unique unordered adjacent pairs `(u, v)` with `u < v`, sorted.
    pub fn undirected_pairs(&self) -> Vec<(NodeId, NodeId)> {
        let mut pairs: Vec<(NodeId, NodeId)> = self
            .edges()
            .into_iter()
            .map(|(u, v, _)| (u.min(v), u.max(v)))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    /// Same nodes, keeping only the edges accepted by `keep`.
    pub fn filter_edges<F>(&self, mut keep: F) -> Graph
    where
        F: FnMut(NodeId, NodeId) -> bool,
    {
        let kept: Vec<_> = self.edges().into_iter().filter(|&(u, v, _)| keep(u, v)).collect();
        Graph::from_edges(self.node_count, self.directed, self.weighted, kept)
            .expect("edges of a valid graph stay valid")
            .0
    }
}

/// Reusable breadth-first scratch space; avoids an O(n) clear per query.
#[derive(Debug, Clone)]
pub struct NeighborhoodScratch {
    stamp: Vec<u32>,
    epoch: u32,
    frontier: Vec<NodeId>,
    next: Vec<NodeId>,
}

impl NeighborhoodScratch {
    pub fn new(node_count: usize) -> Self {
        NeighborhoodScratch {
            stamp: vec![0; node_count],
            epoch: 0,
            frontier: Vec::new(),
            next: Vec::new(),
        }
    }

    fn bump(&mut self) {
        if self.epoch == u32::MAX {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 0;
        }
        self.epoch += 1;
    }

    /// Append `(node, hop distance)` for every node within `k` hops of `u`
    /// (excluding `u`) to `out`, in breadth-first order.
    pub fn visit(
        &mut self,
        g: &Graph,
        u: NodeId,
        k: usize,
        direction: Direction,
        out: &mut Vec<(NodeId, usize)>,
    ) {
        if self.stamp.len() < g.node_count() {
            self.stamp.resize(g.node_count(), 0);
        }
        self.bump();
        let epoch = self.epoch;
        self.stamp[u] = epoch;
        self.frontier.clear();
        self.frontier.push(u);
        for depth in 1..=k {
            self.next.clear();
            for &x in &self.frontier {
                for (y, _) in g.adjacent(x, direction) {
                    if self.stamp[y] != epoch {
                        self.stamp[y] = epoch;
                        self.next.push(y);
                        out.push((y, depth));
                    }
                }
            }
            if self.next.is_empty() {
                break;
            }
            std::mem::swap(&mut self.frontier, &mut self.next);
        }
    }
}

pub(crate) fn check_hops(k: usize) -> Result<()> {
    if (1..=MAX_HOPS).contains(&k) {
        Ok(())
    } else {
        Err(CcError::Argument(format!(
            "hop count {k} outside supported range 1..={MAX_HOPS}"
        )))
    }
}

/// All nodes other than `u` within `k` hops under `direction`, sorted by id.
pub fn k_hop_neighborhood(g: &Graph, u: NodeId, k: usize, direction: Direction) -> Result<Vec<NodeId>> {
    neighborhood(g, u, k, direction, HopMode::Inclusive)
}

pub fn neighborhood(
    g: &Graph,
    u: NodeId,
    k: usize,
    direction: Direction,
    mode: HopMode,
) -> Result<Vec<NodeId>> {
    g.check_node(u)?;
    check_hops(k)?;
    let mut scratch = NeighborhoodScratch::new(g.node_count());
    let mut found = Vec::new();
    scratch.visit(g, u, k, direction, &mut found);
    let mut nodes: Vec<NodeId> = found
        .into_iter()
        .filter(|&(_, d)| mode == HopMode::Inclusive || d == k)
        .map(|(v, _)| v)
        .collect();
    nodes.sort_unstable();
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::{BTreeSet, VecDeque};

    fn unweighted(n: usize, directed: bool, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, directed, false, edges.iter().map(|&(u, v)| (u, v, 1.0)))
            .unwrap()
            .0
    }

    /// Textbook BFS over an explicit edge list; independent of the adjacency layout.
    fn bfs_oracle(
        n: usize,
        directed: bool,
        edges: &[(usize, usize)],
        u: usize,
        k: usize,
        direction: Direction,
    ) -> BTreeSet<usize> {
        let mut dist = vec![usize::MAX; n];
        dist[u] = 0;
        let mut q = VecDeque::from([u]);
        while let Some(x) = q.pop_front() {
            for &(a, b) in edges {
                if a == b {
                    continue;
                }
                let step = match (directed, direction) {
                    (false, _) | (true, Direction::Any) => {
                        if a == x {
                            Some(b)
                        } else if b == x {
                            Some(a)
                        } else {
                            None
                        }
                    }
                    (true, Direction::Outgoing) => (a == x).then_some(b),
                    (true, Direction::Incoming) => (b == x).then_some(a),
                };
                if let Some(y) = step {
                    if dist[y] == usize::MAX {
                        dist[y] = dist[x] + 1;
                        q.push_back(y);
                    }
                }
            }
        }
        (0..n).filter(|&v| v != u && dist[v] <= k).collect()
    }

    fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        edges
    }

    #[test]
    fn path_graph_two_hops() {
        let g = unweighted(3, false, &[(0, 1), (1, 2)]);
        assert_eq!(k_hop_neighborhood(&g, 0, 2, Direction::Any).unwrap(), vec![1, 2]);
        assert_eq!(k_hop_neighborhood(&g, 0, 1, Direction::Any).unwrap(), vec![1]);
        assert_eq!(
            neighborhood(&g, 0, 2, Direction::Any, HopMode::Exact).unwrap(),
            vec![2]
        );
    }

    #[test]
    fn isolated_node_has_empty_neighborhood() {
        let g = unweighted(4, true, &[(0, 1)]);
        for k in 1..=3 {
            for dir in [Direction::Any, Direction::Incoming, Direction::Outgoing] {
                assert!(k_hop_neighborhood(&g, 3, k, dir).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn invalid_arguments_are_rejected() {
        let g = unweighted(2, false, &[(0, 1)]);
        assert!(matches!(
            k_hop_neighborhood(&g, 2, 1, Direction::Any),
            Err(CcError::Argument(_))
        ));
        assert!(matches!(
            k_hop_neighborhood(&g, 0, 0, Direction::Any),
            Err(CcError::Argument(_))
        ));
        assert!(matches!(
            k_hop_neighborhood(&g, 0, 4, Direction::Any),
            Err(CcError::Argument(_))
        ));
    }

    #[test]
    fn builder_drops_loops_and_duplicates() {
        let (g, stats) = Graph::from_edges(
            3,
            false,
            true,
            vec![(0, 1, 2.0), (1, 0, 5.0), (2, 2, 1.0), (1, 2, 1.5)],
        )
        .unwrap();
        assert_eq!(stats, BuildStats { self_loops: 1, duplicates: 1 });
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.out_neighbors(1), &[(0, 2.0), (2, 1.5)]);
        assert_eq!(g.out_neighbors(0), &[(1, 2.0)]);
    }

    #[test]
    fn builder_rejects_bad_weights() {
        let r = Graph::from_edges(2, false, true, vec![(0, 1, 0.0)]);
        assert!(matches!(r, Err(CcError::Data(_))));
        let r = Graph::from_edges(2, false, true, vec![(0, 1, -1.0)]);
        assert!(matches!(r, Err(CcError::Data(_))));
    }

    #[test]
    fn directed_reverse_lists() {
        let g = unweighted(3, true, &[(0, 1), (2, 1)]);
        assert_eq!(k_hop_neighborhood(&g, 1, 1, Direction::Incoming).unwrap(), vec![0, 2]);
        assert!(k_hop_neighborhood(&g, 1, 1, Direction::Outgoing).unwrap().is_empty());
        assert_eq!(k_hop_neighborhood(&g, 0, 2, Direction::Any).unwrap(), vec![1, 2]);
        assert!(k_hop_neighborhood(&g, 0, 2, Direction::Outgoing).unwrap() == vec![1]);
    }

    #[test]
    fn erdos_renyi_matches_bfs_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for directed in [false, true] {
            let edges = random_edges(&mut rng, 12, 0.15);
            let g = unweighted(12, directed, &edges);
            for u in 0..12 {
                for k in 1..=2 {
                    for dir in [Direction::Any, Direction::Incoming, Direction::Outgoing] {
                        let got: BTreeSet<_> =
                            k_hop_neighborhood(&g, u, k, dir).unwrap().into_iter().collect();
                        assert_eq!(got, bfs_oracle(12, directed, &edges, u, k, dir));
                    }
                }
            }
        }
    }

    fn arb_graph() -> impl Strategy<Value = (usize, bool, Vec<(usize, usize)>)> {
        (1usize..=50, any::<bool>()).prop_flat_map(|(n, directed)| {
            let edges = prop::collection::vec((0..n, 0..n), 0..(3 * n));
            (Just(n), Just(directed), edges)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]

        #[test]
        fn neighborhoods_match_oracle((n, directed, edges) in arb_graph(), k in 1usize..=3) {
            let g = unweighted(n, directed, &edges);
            for u in 0..n {
                for dir in [Direction::Any, Direction::Incoming, Direction::Outgoing] {
                    let got: BTreeSet<_> = k_hop_neighborhood(&g, u, k, dir).unwrap().into_iter().collect();
                    prop_assert_eq!(got, bfs_oracle(n, directed, &edges, u, k, dir));
                }
            }
        }

        #[test]
        fn one_hop_is_adjacency_union((n, directed, edges) in arb_graph()) {
            let g = unweighted(n, directed, &edges);
            for u in 0..n {
                let mut expect: BTreeSet<usize> = g.out_neighbors(u).iter().map(|p| p.0).collect();
                expect.extend(g.in_neighbors(u).iter().map(|p| p.0));
                expect.remove(&u);
                let got: BTreeSet<_> = k_hop_neighborhood(&g, u, 1, Direction::Any).unwrap().into_iter().collect();
                prop_assert_eq!(got, expect);
            }
        }

        #[test]
        fn undirected_symmetry_and_nesting((n, _d, edges) in arb_graph(), k in 1usize..=3) {
            let g = unweighted(n, false, &edges);
            let hoods: Vec<BTreeSet<usize>> = (0..n)
                .map(|u| k_hop_neighborhood(&g, u, k, Direction::Any).unwrap().into_iter().collect())
                .collect();
            for u in 0..n {
                for &v in &hoods[u] {
                    prop_assert!(hoods[v].contains(&u));
                }
                let one: BTreeSet<_> = k_hop_neighborhood(&g, u, 1, Direction::Any).unwrap().into_iter().collect();
                prop_assert!(one.is_subset(&hoods[u]));
            }
        }
    }
}
