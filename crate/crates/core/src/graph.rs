//! Physical and virtual network topologies and the graph primitives the
//! routing strategies are built from.
//!
//! A [`PhysicalTopology`] is immutable once built and can be shared freely
//! between worker threads. A [`VirtualTopology`] is one cycle's sample of
//! surviving entanglement links; it borrows its parent and stores only an
//! alive-bit per physical edge.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("node id {0} out of range (topology has {1} nodes)")]
    InvalidNode(NodeId, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("node {id} at ({x}, {y}) lies outside [0, {region}]^2")]
    OutOfRegion { id: NodeId, x: f64, y: f64, region: f64 },
    #[error("region size must be finite and non-negative, got {0}")]
    InvalidRegion(f64),
    #[error("node pair must consist of two distinct nodes, got {0} twice")]
    DegeneratePair(NodeId),
    #[error("edge {0}-{1} is not alive")]
    EdgeNotAlive(NodeId, NodeId),
    #[error("nodes {0} and {1} are not adjacent")]
    NotAdjacent(NodeId, NodeId),
}

/// A position in the plane, in kilometres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Undirected edge stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
}

impl Edge {
    pub fn other(&self, n: NodeId) -> NodeId {
        if n == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Node-positioned undirected simple graph over the square `[0, R] x [0, R]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalTopology {
    region_size: f64,
    positions: Vec<Point>,
    edges: Vec<Edge>,
    // (neighbor, edge index), sorted by neighbor id
    adjacency: Vec<Vec<(NodeId, usize)>>,
}

impl PhysicalTopology {
    /// Builds a topology, rejecting self-loops, duplicate edges, unknown ids
    /// and positions outside the region. Edge order is preserved.
    pub fn new(
        region_size: f64,
        positions: Vec<Point>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, GraphError> {
        if !region_size.is_finite() || region_size < 0.0 {
            return Err(GraphError::InvalidRegion(region_size));
        }
        for (id, p) in positions.iter().enumerate() {
            let inside = |c: f64| (0.0..=region_size).contains(&c);
            if !inside(p.x) || !inside(p.y) {
                return Err(GraphError::OutOfRegion {
                    id,
                    x: p.x,
                    y: p.y,
                    region: region_size,
                });
            }
        }
        let n = positions.len();
        let mut adjacency: Vec<Vec<(NodeId, usize)>> = vec![Vec::new(); n];
        let mut stored = Vec::new();
        for (u, v) in edges {
            if u >= n {
                return Err(GraphError::InvalidNode(u, n));
            }
            if v >= n {
                return Err(GraphError::InvalidNode(v, n));
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            let edge = Edge {
                a: u.min(v),
                b: u.max(v),
            };
            if adjacency[edge.a].iter().any(|&(w, _)| w == edge.b) {
                return Err(GraphError::DuplicateEdge(edge.a, edge.b));
            }
            let idx = stored.len();
            adjacency[edge.a].push((edge.b, idx));
            adjacency[edge.b].push((edge.a, idx));
            stored.push(edge);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(PhysicalTopology {
            region_size,
            positions,
            edges: stored,
            adjacency,
        })
    }

    pub fn region_size(&self) -> f64 {
        self.region_size
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn position(&self, id: NodeId) -> Result<Point, GraphError> {
        self.positions
            .get(id)
            .copied()
            .ok_or(GraphError::InvalidNode(id, self.node_count()))
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `id` with the connecting edge index, ascending by neighbor.
    pub fn neighbors(&self, id: NodeId) -> &[(NodeId, usize)] {
        &self.adjacency[id]
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.adjacency[id].len()
    }

    pub fn edge_index(&self, u: NodeId, v: NodeId) -> Option<usize> {
        let list = self.adjacency.get(u)?;
        list.binary_search_by_key(&v, |&(w, _)| w)
            .ok()
            .map(|i| list[i].1)
    }

    pub fn edge_length(&self, edge: usize) -> f64 {
        let e = self.edges[edge];
        self.positions[e.a].distance(&self.positions[e.b])
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        (0..self.edges.len()).map(|i| self.edge_length(i)).collect()
    }

    /// Euclidean distance between two nodes in km.
    pub fn euclidean_distance(&self, u: NodeId, v: NodeId) -> Result<f64, GraphError> {
        Ok(self.position(u)?.distance(&self.position(v)?))
    }

    /// Virtual topology in which every physical edge is alive.
    pub fn fully_alive(&self) -> VirtualTopology<'_> {
        VirtualTopology {
            parent: self,
            alive: vec![true; self.edges.len()],
            alive_count: self.edges.len(),
        }
    }

    /// Virtual topology with no alive edges.
    pub fn empty_virtual(&self) -> VirtualTopology<'_> {
        VirtualTopology {
            parent: self,
            alive: vec![false; self.edges.len()],
            alive_count: 0,
        }
    }

    /// Component label for every node, computed with union-find.
    pub fn components(&self) -> Vec<usize> {
        let mut dsu = DisjointSet::new(self.node_count());
        for e in &self.edges {
            dsu.union(e.a, e.b);
        }
        (0..self.node_count()).map(|i| dsu.find(i)).collect()
    }
}

/// Two distinct end users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodePair {
    u: NodeId,
    v: NodeId,
}

impl NodePair {
    pub fn new(u: NodeId, v: NodeId, topo: &PhysicalTopology) -> Result<Self, GraphError> {
        let n = topo.node_count();
        if u >= n {
            return Err(GraphError::InvalidNode(u, n));
        }
        if v >= n {
            return Err(GraphError::InvalidNode(v, n));
        }
        if u == v {
            return Err(GraphError::DegeneratePair(u));
        }
        Ok(NodePair { u, v })
    }

    pub fn u(&self) -> NodeId {
        self.u
    }

    pub fn v(&self) -> NodeId {
        self.v
    }

    /// The pair with the smaller id first.
    pub fn ordered(&self) -> (NodeId, NodeId) {
        (self.u.min(self.v), self.u.max(self.v))
    }

    pub fn contains(&self, n: NodeId) -> bool {
        n == self.u || n == self.v
    }
}

impl fmt::Display for NodePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.u, self.v)
    }
}

/// Fixed-size node membership set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSet {
    members: Vec<bool>,
}

impl NodeSet {
    pub fn all(n: usize) -> Self {
        NodeSet {
            members: vec![true; n],
        }
    }

    pub fn none(n: usize) -> Self {
        NodeSet {
            members: vec![false; n],
        }
    }

    pub fn from_members(n: usize, members: impl IntoIterator<Item = NodeId>) -> Self {
        let mut set = Self::none(n);
        for m in members {
            set.insert(m);
        }
        set
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&b| b)
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.members.get(n).copied().unwrap_or(false)
    }

    pub fn insert(&mut self, n: NodeId) {
        self.members[n] = true;
    }

    pub fn remove(&mut self, n: NodeId) {
        self.members[n] = false;
    }

    pub fn fill(&mut self, value: bool) {
        self.members.iter_mut().for_each(|m| *m = value);
    }
}

/// One cycle's surviving entanglement links over a physical topology.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualTopology<'a> {
    parent: &'a PhysicalTopology,
    alive: Vec<bool>,
    alive_count: usize,
}

impl<'a> VirtualTopology<'a> {
    pub fn from_alive(parent: &'a PhysicalTopology, alive: Vec<bool>) -> Self {
        assert_eq!(alive.len(), parent.edge_count(), "alive mask length");
        let alive_count = alive.iter().filter(|&&a| a).count();
        VirtualTopology {
            parent,
            alive,
            alive_count,
        }
    }

    pub fn parent(&self) -> &'a PhysicalTopology {
        self.parent
    }

    pub fn is_alive(&self, edge: usize) -> bool {
        self.alive[edge]
    }

    pub fn alive_count(&self) -> usize {
        self.alive_count
    }

    pub fn alive_mask(&self) -> &[bool] {
        &self.alive
    }

    pub fn alive_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.alive
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
    }

    pub fn set_alive(&mut self, edge: usize, alive: bool) {
        if self.alive[edge] != alive {
            self.alive[edge] = alive;
            if alive {
                self.alive_count += 1;
            } else {
                self.alive_count -= 1;
            }
        }
    }

    /// Number of alive edges incident to `n`.
    pub fn virtual_degree(&self, n: NodeId) -> usize {
        self.parent
            .neighbors(n)
            .iter()
            .filter(|&&(_, e)| self.alive[e])
            .count()
    }

    /// Minimum-hop path from `pair.u()` to `pair.v()` over alive edges whose
    /// nodes all lie in `allowed`. Breadth-first, expanding neighbors in
    /// ascending id order, so ties resolve toward smaller ids.
    pub fn fewest_hops_path(&self, pair: NodePair, allowed: &NodeSet) -> Option<Vec<NodeId>> {
        let (src, dst) = (pair.u(), pair.v());
        if !allowed.contains(src) || !allowed.contains(dst) {
            return None;
        }
        let n = self.parent.node_count();
        let mut prev = vec![usize::MAX; n];
        prev[src] = src;
        let mut queue = VecDeque::from([src]);
        while let Some(x) = queue.pop_front() {
            for &(y, e) in self.parent.neighbors(x) {
                if !self.alive[e] || prev[y] != usize::MAX || !allowed.contains(y) {
                    continue;
                }
                prev[y] = x;
                if y == dst {
                    let mut path = vec![dst];
                    let mut cur = dst;
                    while cur != src {
                        cur = prev[cur];
                        path.push(cur);
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(y);
            }
        }
        None
    }

    /// Whether `pair` is joined by alive edges through nodes of `surviving`.
    pub fn connected(&self, pair: NodePair, surviving: &NodeSet) -> bool {
        if !surviving.contains(pair.u()) || !surviving.contains(pair.v()) {
            return false;
        }
        let mut dsu = DisjointSet::new(self.parent.node_count());
        for e in self.alive_edges() {
            let edge = self.parent.edges[e];
            if surviving.contains(edge.a) && surviving.contains(edge.b) {
                dsu.union(edge.a, edge.b);
            }
        }
        dsu.same(pair.u(), pair.v())
    }

    /// Copy of this topology with the edges along `path` removed.
    pub fn remove_path_edges(&self, path: &[NodeId]) -> Result<VirtualTopology<'a>, GraphError> {
        let mut out = self.clone();
        out.remove_path_edges_in_place(path)?;
        Ok(out)
    }

    /// In-place variant of [`remove_path_edges`](Self::remove_path_edges).
    /// Leaves `self` unchanged on error.
    pub fn remove_path_edges_in_place(&mut self, path: &[NodeId]) -> Result<(), GraphError> {
        let mut idx = Vec::with_capacity(path.len().saturating_sub(1));
        for w in path.windows(2) {
            let e = self
                .parent
                .edge_index(w[0], w[1])
                .ok_or(GraphError::NotAdjacent(w[0], w[1]))?;
            if !self.alive[e] || idx.contains(&e) {
                return Err(GraphError::EdgeNotAlive(w[0], w[1]));
            }
            idx.push(e);
        }
        for e in idx {
            self.set_alive(e, false);
        }
        Ok(())
    }
}

/// Union-find with path halving and union by size.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn topo(n: usize, edges: &[(usize, usize)]) -> PhysicalTopology {
        let pos = (0..n).map(|i| Point::new(i as f64, 0.0)).collect();
        PhysicalTopology::new(n as f64, pos, edges.iter().copied()).unwrap()
    }

    fn square2x2() -> PhysicalTopology {
        // 0 (0,0)  1 (1,0)  2 (0,1)  3 (1,1)
        let pos = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
        ];
        PhysicalTopology::new(1.0, pos, [(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn rejects_invalid_topologies() {
        let pos = vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0)];
        assert_eq!(
            PhysicalTopology::new(1.0, pos.clone(), [(0, 0)]),
            Err(GraphError::SelfLoop(0))
        );
        assert_eq!(
            PhysicalTopology::new(1.0, pos.clone(), [(0, 1), (1, 0)]),
            Err(GraphError::DuplicateEdge(0, 1))
        );
        assert_eq!(
            PhysicalTopology::new(1.0, pos.clone(), [(0, 2)]),
            Err(GraphError::InvalidNode(2, 2))
        );
        assert!(matches!(
            PhysicalTopology::new(0.5, pos, []),
            Err(GraphError::OutOfRegion { id: 1, .. })
        ));
    }

    #[test]
    fn distances() {
        let t = PhysicalTopology::new(
            10.0,
            vec![Point::new(0.0, 0.0), Point::new(0.0, 0.0), Point::new(3.0, 4.0)],
            [],
        )
        .unwrap();
        assert_eq!(t.euclidean_distance(0, 1).unwrap(), 0.0);
        assert_eq!(t.euclidean_distance(0, 2).unwrap(), 5.0);
        assert_eq!(t.euclidean_distance(2, 0).unwrap(), 5.0);
        assert_eq!(t.euclidean_distance(0, 3), Err(GraphError::InvalidNode(3, 3)));
    }

    #[test]
    fn pair_validation() {
        let t = topo(3, &[]);
        assert!(NodePair::new(0, 2, &t).is_ok());
        assert_eq!(NodePair::new(1, 1, &t), Err(GraphError::DegeneratePair(1)));
        assert_eq!(NodePair::new(0, 5, &t), Err(GraphError::InvalidNode(5, 3)));
    }

    #[test]
    fn direct_edge_is_one_hop() {
        let t = topo(3, &[(0, 1), (1, 2), (0, 2)]);
        let vt = t.fully_alive();
        let pair = NodePair::new(0, 2, &t).unwrap();
        assert_eq!(vt.fewest_hops_path(pair, &NodeSet::all(3)), Some(vec![0, 2]));
    }

    #[test]
    fn no_path_without_alive_edges() {
        let t = topo(2, &[(0, 1)]);
        let vt = t.empty_virtual();
        let pair = NodePair::new(0, 1, &t).unwrap();
        assert_eq!(vt.fewest_hops_path(pair, &NodeSet::all(2)), None);
    }

    #[test]
    fn grid_tie_breaks_toward_smaller_intermediate() {
        // Both 0-1-3 and 0-2-3 have two hops; enumeration gives exactly these
        // two candidates and the smaller intermediate id is 1.
        let t = square2x2();
        let vt = t.fully_alive();
        let pair = NodePair::new(0, 3, &t).unwrap();
        assert_eq!(vt.fewest_hops_path(pair, &NodeSet::all(4)), Some(vec![0, 1, 3]));
        let back = NodePair::new(3, 0, &t).unwrap();
        assert_eq!(vt.fewest_hops_path(back, &NodeSet::all(4)), Some(vec![3, 1, 0]));
    }

    #[test]
    fn connectivity_cases() {
        let t = topo(4, &[(0, 1), (2, 3)]);
        let vt = t.fully_alive();
        let all = NodeSet::all(4);
        assert!(vt.connected(NodePair::new(0, 1, &t).unwrap(), &all));
        assert!(!vt.connected(NodePair::new(0, 3, &t).unwrap(), &all));

        let chain = topo(3, &[(0, 1), (1, 2)]);
        let vt = chain.fully_alive();
        let pair = NodePair::new(0, 2, &chain).unwrap();
        assert!(vt.connected(pair, &NodeSet::all(3)));
        assert!(!vt.connected(pair, &NodeSet::from_members(3, [0, 2])));
    }

    #[test]
    fn removing_paths() {
        let t = topo(2, &[(0, 1)]);
        let vt = t.fully_alive();
        let out = vt.remove_path_edges(&[0, 1]).unwrap();
        assert_eq!(out.alive_count(), 0);
        assert_eq!(vt.alive_count(), 1);

        let tri = topo(3, &[(0, 1), (1, 2), (0, 2)]);
        let vt = tri.fully_alive();
        let out = vt.remove_path_edges(&[0, 1, 2]).unwrap();
        assert_eq!(out.alive_edges().collect::<Vec<_>>(), vec![2]);
        assert_eq!(
            out.remove_path_edges(&[1, 2]),
            Err(GraphError::EdgeNotAlive(1, 2))
        );
        assert_eq!(
            tri.fully_alive().remove_path_edges(&[0, 1, 0]),
            Err(GraphError::EdgeNotAlive(1, 0))
        );
    }

    #[test]
    fn greedy_removal_terminates() {
        let t = square2x2();
        let mut vt = t.fully_alive();
        let pair = NodePair::new(0, 3, &t).unwrap();
        let all = NodeSet::all(4);
        let mut iterations = 0;
        while let Some(p) = vt.fewest_hops_path(pair, &all) {
            vt.remove_path_edges_in_place(&p).unwrap();
            iterations += 1;
            assert!(iterations <= t.edge_count());
        }
        assert_eq!(iterations, 2);
    }

    // Brute-force shortest hop count via DFS over simple paths.
    fn brute_min_hops(vt: &VirtualTopology, s: usize, d: usize) -> Option<usize> {
        fn dfs(
            vt: &VirtualTopology,
            x: usize,
            d: usize,
            seen: &mut Vec<bool>,
            depth: usize,
            best: &mut Option<usize>,
        ) {
            if x == d {
                *best = Some(best.map_or(depth, |b| b.min(depth)));
                return;
            }
            for &(y, e) in vt.parent().neighbors(x) {
                if vt.is_alive(e) && !seen[y] {
                    seen[y] = true;
                    dfs(vt, y, d, seen, depth + 1, best);
                    seen[y] = false;
                }
            }
        }
        let mut seen = vec![false; vt.parent().node_count()];
        seen[s] = true;
        let mut best = None;
        dfs(vt, s, d, &mut seen, 0, &mut best);
        best
    }

    fn small_graph() -> impl Strategy<Value = (PhysicalTopology, Vec<bool>)> {
        (2usize..=8).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                .collect();
            let m = pairs.len();
            (
                proptest::collection::vec(any::<bool>(), m),
                proptest::collection::vec(any::<bool>(), m),
            )
                .prop_map(move |(present, alive)| {
                    let edges: Vec<_> = pairs
                        .iter()
                        .zip(&present)
                        .filter(|(_, &p)| p)
                        .map(|(&e, _)| e)
                        .collect();
                    let alive: Vec<bool> = alive.into_iter().take(edges.len()).collect();
                    (topo(n, &edges), alive)
                })
        })
    }

    proptest! {
        #[test]
        fn bfs_path_is_minimal((t, alive) in small_graph()) {
            let vt = VirtualTopology::from_alive(&t, alive);
            let n = t.node_count();
            let all = NodeSet::all(n);
            for s in 0..n {
                for d in 0..n {
                    if s == d { continue; }
                    let pair = NodePair::new(s, d, &t).unwrap();
                    let found = vt.fewest_hops_path(pair, &all);
                    let brute = brute_min_hops(&vt, s, d);
                    prop_assert_eq!(found.as_ref().map(|p| p.len() - 1), brute);
                    prop_assert_eq!(found.is_some(), vt.connected(pair, &all));
                    if let Some(p) = found {
                        let removed = vt.remove_path_edges(&p).unwrap();
                        prop_assert_eq!(removed.alive_count(), vt.alive_count() - (p.len() - 1));
                    }
                }
            }
        }

        #[test]
        fn connectivity_is_transitive((t, alive) in small_graph()) {
            let vt = VirtualTopology::from_alive(&t, alive);
            let n = t.node_count();
            let all = NodeSet::all(n);
            let c = |a: usize, b: usize| a == b || vt.connected(NodePair::new(a, b, &t).unwrap(), &all);
            for a in 0..n {
                for b in 0..n {
                    for w in 0..n {
                        if c(a, b) && c(b, w) {
                            prop_assert!(c(a, w));
                        }
                    }
                }
            }
        }
    }
}
