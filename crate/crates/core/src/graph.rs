//! Multigraph representation with tombstoned deletions, exact cut metrics,
//! degree reductiongadget and the edge-list text format.

use std::collections::HashMap;
use std::fmt;

use num_rational::Ratio;

/// Exact rational used for conductance/expansion values.
pub type Frac = Ratio<i64>;

pub type NodeId = usize;
pub type EdgeId = usize;

/// Total-ordered edge weight: `(rank, tier)` compared lexicographically,
/// with the originating edge id as the final tie break. The tier slot makes
/// half-integral reweights ("rank + 0.5") and lighter-than-everything gadget
/// edges exact without floating point.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct WKey {
    pub rank: i64,
    pub tier: u8,
    pub id: u64,
}

impl WKey {
    pub fn new(rank: i64, tier: u8, id: u64) -> Self {
        WKey { rank, tier, id }
    }

    /// Plain integer weight, tier 0.
    pub fn of_rank(rank: i64, id: u64) -> Self {
        WKey { rank, tier: 0, id }
    }
}

impl fmt::Display for WKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.tier == 0 {
            write!(f, "{}", self.rank)
        } else {
            write!(f, "{}+{}t", self.rank, self.tier)
        }
    }
}

#[derive(Clone, Debug)]
pub struct EdgeRec {
    pub u: NodeId,
    pub v: NodeId,
    pub key: WKey,
    pub alive: bool,
}

impl EdgeRec {
    pub fn other(&self, x: NodeId) -> NodeId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }

    pub fn endpoints(&self) -> (NodeId, NodeId) {
        (self.u, self.v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphError {
    SelfLoop(NodeId),
    UnknownNode(NodeId),
    UnknownEdge(EdgeId),
    DeadEdge(EdgeId),
    EmptyOrFullCut,
    ZeroDenominator,
    Parse(String),
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::SelfLoop(v) => write!(f, "self loop at node {v}"),
            GraphError::UnknownNode(v) => write!(f, "unknown node id {v}"),
            GraphError::UnknownEdge(e) => write!(f, "unknown edge id {e}"),
            GraphError::DeadEdge(e) => write!(f, "edge {e} already deleted"),
            GraphError::EmptyOrFullCut => write!(f, "cut must be a proper nonempty subset"),
            GraphError::ZeroDenominator => write!(f, "cut has zero volume on one side"),
            GraphError::Parse(s) => write!(f, "parse error: {s}"),
        }
    }
}

impl std::error::Error for GraphError {}

/// Mutable multigraph. Nodes are dense integer ids; parallel edges are
/// permitted and counted separately in degrees and volumes; self loops are
/// rejected. Deletion tombstones the edge so ids stay stable; adjacency
/// lists are compacted once more than half their entries are dead.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    adj: Vec<Vec<(NodeId, EdgeId)>>,
    edges: Vec<EdgeRec>,
    deg: Vec<u64>,
    dead_in_adj: Vec<u32>,
    alive_edges: usize,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); n],
            edges: Vec::new(),
            deg: vec![0; n],
            dead_in_adj: vec![0; n],
            alive_edges: 0,
        }
    }

    /// Builds a graph from `(u, v, rank)` triples; edge ids follow input order.
    pub fn from_weighted_edges(n: usize, list: &[(NodeId, NodeId, i64)]) -> Result<Self, GraphError> {
        let mut g = Graph::new(n);
        for &(u, v, w) in list {
            let id = g.edges.len() as u64;
            g.add_edge(u, v, WKey::of_rank(w, id))?;
        }
        Ok(g)
    }

    pub fn add_node(&mut self) -> NodeId {
        self.adj.push(Vec::new());
        self.deg.push(0);
        self.dead_in_adj.push(0);
        self.adj.len() - 1
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId, key: WKey) -> Result<EdgeId, GraphError> {
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        self.check_node(u)?;
        self.check_node(v)?;
        let id = self.edges.len();
        self.edges.push(EdgeRec { u, v, key, alive: true });
        self.adj[u].push((v, id));
        self.adj[v].push((u, id));
        self.deg[u] += 1;
        self.deg[v] += 1;
        self.alive_edges += 1;
        Ok(id)
    }

    pub fn delete_edge(&mut self, e: EdgeId) -> Result<(), GraphError> {
        if e >= self.edges.len() {
            return Err(GraphError::UnknownEdge(e));
        }
        if !self.edges[e].alive {
            return Err(GraphError::DeadEdge(e));
        }
        self.edges[e].alive = false;
        let (u, v) = (self.edges[e].u, self.edges[e].v);
        self.deg[u] -= 1;
        self.deg[v] -= 1;
        self.dead_in_adj[u] += 1;
        self.dead_in_adj[v] += 1;
        self.alive_edges -= 1;
        self.maybe_compact(u);
        self.maybe_compact(v);
        Ok(())
    }

    fn maybe_compact(&mut self, v: NodeId) {
        if self.dead_in_adj[v] as usize * 2 > self.adj[v].len() {
            let edges = &self.edges;
            self.adj[v].retain(|&(_, e)| edges[e].alive);
            self.dead_in_adj[v] = 0;
        }
    }

    fn check_node(&self, v: NodeId) -> Result<(), GraphError> {
        if v >= self.adj.len() {
            Err(GraphError::UnknownNode(v))
        } else {
            Ok(())
        }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    /// Number of alive edges.
    pub fn m(&self) -> usize {
        self.alive_edges
    }

    /// Total number of edge slots ever allocated (alive + tombstoned).
    pub fn edge_slots(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: EdgeId) -> &EdgeRec {
        &self.edges[e]
    }

    pub fn try_edge(&self, e: EdgeId) -> Result<&EdgeRec, GraphError> {
        self.edges.get(e).ok_or(GraphError::UnknownEdge(e))
    }

    pub fn is_alive(&self, e: EdgeId) -> bool {
        e < self.edges.len() && self.edges[e].alive
    }

    pub fn deg(&self, v: NodeId) -> u64 {
        self.deg[v]
    }

    /// Alive incident edges of `v` as `(neighbor, edge id)`.
    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = (NodeId, EdgeId)> + '_ {
        self.adj[v].iter().copied().filter(move |&(_, e)| self.edges[e].alive)
    }

    /// Raw adjacency length (including tombstoned entries); valid as a
    /// current-edge cursor range while the graph is not mutated.
    pub fn adj_len(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    /// Raw adjacency entry; None when the slot holds a dead edge.
    pub fn adj_entry(&self, v: NodeId, i: usize) -> Option<(NodeId, EdgeId)> {
        let (w, e) = self.adj[v][i];
        if self.edges[e].alive {
            Some((w, e))
        } else {
            None
        }
    }

    pub fn alive_edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len()).filter(move |&e| self.edges[e].alive)
    }

    pub fn total_volume(&self) -> u64 {
        2 * self.alive_edges as u64
    }

    /// Sum of alive degrees over `s`, counting parallel edges.
    pub fn volume(&self, s: &[NodeId]) -> Result<u64, GraphError> {
        let mut tot = 0;
        for &v in s {
            self.check_node(v)?;
            tot += self.deg[v];
        }
        Ok(tot)
    }

    /// Number of alive edges with exactly one endpoint in `s`.
    pub fn cut_size(&self, s: &[NodeId]) -> Result<u64, GraphError> {
        let mut mark = vec![false; self.n()];
        for &v in s {
            self.check_node(v)?;
            mark[v] = true;
        }
        let mut del = 0;
        for e in self.alive_edge_ids() {
            let er = &self.edges[e];
            if mark[er.u] != mark[er.v] {
                del += 1;
            }
        }
        Ok(del)
    }

    /// Exact conductance of a proper cut: boundary over the smaller side's volume.
    pub fn conductance(&self, s: &[NodeId]) -> Result<Frac, GraphError> {
        if s.is_empty() || s.len() >= self.n() {
            return Err(GraphError::EmptyOrFullCut);
        }
        let vol_s = self.volume(s)?;
        let vol_rest = self.total_volume() - vol_s;
        let denom = vol_s.min(vol_rest);
        if denom == 0 {
            return Err(GraphError::ZeroDenominator);
        }
        let delta = self.cut_size(s)?;
        Ok(Frac::new(delta as i64, denom as i64))
    }

    /// Like conductance but with node counts in the denominator.
    pub fn expansion(&self, s: &[NodeId]) -> Result<Frac, GraphError> {
        if s.is_empty() || s.len() >= self.n() {
            return Err(GraphError::EmptyOrFullCut);
        }
        for &v in s {
            self.check_node(v)?;
        }
        let small = s.len().min(self.n() - s.len());
        let delta = self.cut_size(s)?;
        Ok(Frac::new(delta as i64, small as i64))
    }

    pub fn max_degree(&self) -> u64 {
        self.deg.iter().copied().max().unwrap_or(0)
    }

    /// Nodes of the connected component containing `start` (alive edges only).
    pub fn component_of(&self, start: NodeId) -> Vec<NodeId> {
        let mut seen = vec![false; self.n()];
        let mut stack = vec![start];
        let mut out = Vec::new();
        seen[start] = true;
        while let Some(v) = stack.pop() {
            out.push(v);
            for (w, _) in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        out
    }

    /// Connected components over all nodes, each sorted; deterministic order.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let mut seen = vec![false; self.n()];
        let mut comps = Vec::new();
        for s in 0..self.n() {
            if seen[s] {
                continue;
            }
            let mut stack = vec![s];
            seen[s] = true;
            let mut comp = Vec::new();
            while let Some(v) = stack.pop() {
                comp.push(v);
                for (w, _) in self.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.n() <= 1 || self.component_of(0).len() == self.n()
    }

    /// Induced subgraph on `nodes` (alive edges with both endpoints inside).
    /// Returns the materialized graph with locally renumbered nodes, the
    /// local-to-original node map and the local-to-original edge map.
    pub fn induced(&self, nodes: &[NodeId]) -> (Graph, Vec<NodeId>, Vec<EdgeId>) {
        let mut local_of = HashMap::new();
        for (i, &v) in nodes.iter().enumerate() {
            local_of.insert(v, i);
        }
        let mut g = Graph::new(nodes.len());
        let mut edge_map = Vec::new();
        for e in self.alive_edge_ids() {
            let er = &self.edges[e];
            if let (Some(&lu), Some(&lv)) = (local_of.get(&er.u), local_of.get(&er.v)) {
                g.add_edge(lu, lv, er.key).expect("induced edge");
                edge_map.push(e);
            }
        }
        (g, nodes.to_vec(), edge_map)
    }
}

/// Node mapping produced by [`degree_reduce`]: translates nodes and edges of
/// the original graph to the reduced one and back.
#[derive(Clone, Debug)]
pub struct DegreeReduceMap {
    /// Original node -> its gadget path (one entry when not split).
    pub split_of: Vec<Vec<NodeId>>,
    /// Reduced node -> original node.
    pub orig_of: Vec<NodeId>,
    /// Original edge id -> reduced edge id.
    pub edge_of: Vec<EdgeId>,
    /// Reduced edge id -> original edge id (None for gadget edges).
    pub orig_edge_of: Vec<Option<EdgeId>>,
}

/// Vertex-splitting gadget: every node of degree d > 3 becomes a path of
/// max(1, d - 2) gadget nodes joined by gadget edges strictly lighter (in
/// the total order) than every real edge, so the MSF of the reduced graph
/// restricted to real edges equals the MSF of the input.
pub fn degree_reduce(g: &Graph) -> (Graph, DegreeReduceMap) {
    let mut out = Graph::new(0);
    let mut split_of = vec![Vec::new(); g.n()];
    let mut orig_of = Vec::new();
    let mut gadget_edges: Vec<(NodeId, NodeId)> = Vec::new();

    for v in 0..g.n() {
        let d = g.deg(v) as usize;
        let k = if d <= 3 { 1 } else { d - 2 };
        for i in 0..k {
            let nv = out.add_node();
            orig_of.push(v);
            split_of[v].push(nv);
            if i > 0 {
                gadget_edges.push((split_of[v][i - 1], nv));
            }
        }
    }

    // Slot assignment along the path: end nodes carry up to 2 real edges,
    // interior nodes 1, so resulting degree is at most 3.
    let mut next_slot = vec![0usize; g.n()];
    let attach = |split: &Vec<NodeId>, slot: usize, d: usize| -> NodeId {
        if split.len() == 1 {
            return split[0];
        }
        let k = split.len();
        debug_assert_eq!(k, d - 2);
        // capacity per gadget node: 2 at both ends, 1 inside
        if slot == 0 || slot == 1 {
            split[0]
        } else if slot >= d - 2 {
            split[k - 1]
        } else {
            split[slot - 1]
        }
    };

    let mut edge_of = Vec::new();
    let mut orig_edge_of = Vec::new();
    let mut real: Vec<EdgeId> = g.alive_edge_ids().collect();
    real.sort_unstable();
    let mut reduced_of_orig = vec![usize::MAX; g.edge_slots()];
    for e in real {
        let er = g.edge(e);
        let du = g.deg(er.u) as usize;
        let dv = g.deg(er.v) as usize;
        let nu = attach(&split_of[er.u], next_slot[er.u], du);
        let nv = attach(&split_of[er.v], next_slot[er.v], dv);
        next_slot[er.u] += 1;
        next_slot[er.v] += 1;
        let id = out
            .add_edge(nu, nv, er.key)
            .expect("real edge in reduced graph");
        reduced_of_orig[e] = id;
        orig_edge_of.push(Some(e));
    }
    // Gadget edges ranked below every real edge: negative ranks, distinct.
    for (i, (a, b)) in gadget_edges.iter().enumerate() {
        let key = WKey::of_rank(-1 - i as i64, (orig_edge_of.len() + i) as u64);
        out.add_edge(*a, *b, key).expect("gadget edge");
        orig_edge_of.push(None);
    }
    for e in 0..g.edge_slots() {
        edge_of.push(reduced_of_orig[e]);
    }

    (
        out,
        DegreeReduceMap {
            split_of,
            orig_of,
            edge_of,
            orig_edge_of,
        },
    )
}

/// Parses the edge-list text format: header line `n m`, then one line per
/// edge `u v w` with integer weights. Exact parse, no floats.
pub fn parse_edge_list(text: &str) -> Result<Graph, GraphError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| GraphError::Parse("missing header".into()))?;
    let mut it = header.split_whitespace();
    let n: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| GraphError::Parse("bad n".into()))?;
    let m: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| GraphError::Parse("bad m".into()))?;
    let mut g = Graph::new(n);
    let mut count = 0;
    for line in lines {
        let mut parts = line.split_whitespace();
        let u: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| GraphError::Parse(format!("bad edge line: {line}")))?;
        let v: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| GraphError::Parse(format!("bad edge line: {line}")))?;
        let w: i64 = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| GraphError::Parse(format!("bad edge line: {line}")))?;
        let id = g.edge_slots() as u64;
        g.add_edge(u, v, WKey::of_rank(w, id))?;
        count += 1;
    }
    if count != m {
        return Err(GraphError::Parse(format!("header says {m} edges, found {count}")));
    }
    Ok(g)
}

pub fn write_edge_list(g: &Graph) -> String {
    let mut out = format!("{} {}\n", g.n(), g.m());
    for e in g.alive_edge_ids() {
        let er = g.edge(e);
        out.push_str(&format!("{} {} {}\n", er.u, er.v, er.key.rank));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_weighted_edges(3, &[(0, 1, 1), (1, 2, 2)]).unwrap()
    }

    #[test]
    fn volume_counts_parallel_edges() {
        let g = path3();
        assert_eq!(g.volume(&[1]).unwrap(), 2);
        assert_eq!(g.volume(&[]).unwrap(), 0);
        // triangle with one doubled edge
        let t = Graph::from_weighted_edges(3, &[(0, 1, 1), (0, 1, 2), (0, 2, 3), (1, 2, 4)]).unwrap();
        assert_eq!(t.volume(&[0]).unwrap(), 3);
    }

    #[test]
    fn volume_unknown_node_errors() {
        let g = path3();
        assert!(matches!(g.volume(&[7]), Err(GraphError::UnknownNode(7))));
    }

    #[test]
    fn conductance_examples() {
        let g = path3();
        assert_eq!(g.conductance(&[0]).unwrap(), Frac::new(1, 1));
        let c4 = Graph::from_weighted_edges(4, &[(0, 1, 1), (1, 2, 2), (2, 3, 3), (3, 0, 4)]).unwrap();
        assert_eq!(c4.conductance(&[0, 1]).unwrap(), Frac::new(1, 2));
        let k4 = Graph::from_weighted_edges(
            4,
            &[(0, 1, 1), (0, 2, 2), (0, 3, 3), (1, 2, 4), (1, 3, 5), (2, 3, 6)],
        )
        .unwrap();
        assert_eq!(k4.conductance(&[0]).unwrap(), Frac::new(1, 1));
        assert!(g.conductance(&[]).is_err());
        assert!(g.conductance(&[0, 1, 2]).is_err());
    }

    #[test]
    fn expansion_examples() {
        let c4 = Graph::from_weighted_edges(4, &[(0, 1, 1), (1, 2, 2), (2, 3, 3), (3, 0, 4)]).unwrap();
        assert_eq!(c4.expansion(&[0, 1]).unwrap(), Frac::new(1, 1));
        let p4 = Graph::from_weighted_edges(4, &[(0, 1, 1), (1, 2, 2), (2, 3, 3)]).unwrap();
        assert_eq!(p4.expansion(&[0, 1]).unwrap(), Frac::new(1, 2));
        let k4 = Graph::from_weighted_edges(
            4,
            &[(0, 1, 1), (0, 2, 2), (0, 3, 3), (1, 2, 4), (1, 3, 5), (2, 3, 6)],
        )
        .unwrap();
        assert_eq!(k4.expansion(&[0]).unwrap(), Frac::new(3, 1));
    }

    #[test]
    fn delete_is_tombstone_with_stable_ids() {
        let mut g = path3();
        g.delete_edge(0).unwrap();
        assert!(!g.is_alive(0));
        assert!(g.is_alive(1));
        assert_eq!(g.deg(0), 0);
        assert_eq!(g.m(), 1);
        assert!(matches!(g.delete_edge(0), Err(GraphError::DeadEdge(0))));
        assert_eq!(g.edge(1).key.rank, 2);
    }

    #[test]
    fn edge_list_round_trip() {
        let g = path3();
        let text = write_edge_list(&g);
        let h = parse_edge_list(&text).unwrap();
        assert_eq!(h.n(), 3);
        assert_eq!(h.m(), 2);
        assert!(parse_edge_list("2 1\n0 0 1\n").is_err());
        assert!(parse_edge_list("2 2\n0 1 1\n").is_err());
    }

    #[test]
    fn degree_reduce_identity_on_low_degree() {
        let g = path3();
        let (r, map) = degree_reduce(&g);
        assert_eq!(r.n(), 3);
        assert_eq!(r.m(), 2);
        assert!(map.split_of.iter().all(|s| s.len() == 1));
    }

    #[test]
    fn degree_reduce_star() {
        // K_{1,5}: center degree 5 -> 3 gadget nodes
        let g = Graph::from_weighted_edges(
            6,
            &[(0, 1, 1), (0, 2, 2), (0, 3, 3), (0, 4, 4), (0, 5, 5)],
        )
        .unwrap();
        let (r, map) = degree_reduce(&g);
        assert_eq!(map.split_of[0].len(), 3);
        assert_eq!(r.n(), 5 + 3);
        assert!(r.max_degree() <= 3);
        // gadget edges all lighter than real ones
        for e in r.alive_edge_ids() {
            if map.orig_edge_of[e].is_none() {
                assert!(r.edge(e).key.rank < 0);
            }
        }
    }

    #[test]
    fn degree_reduce_empty() {
        let g = Graph::new(0);
        let (r, _) = degree_reduce(&g);
        assert_eq!(r.n(), 0);
        assert_eq!(r.m(), 0);
    }
}
