//! Kruskal oracle and the two specialized dynamic MSF structures: a
//! fully-dynamic multigraph MSF for small node counts and the S-covered
//! decremental MSF whose non-tree edges all touch a distinguished node set.

use std::collections::{BTreeSet, HashSet};

use crate::forest::DynamicForest;
use crate::graph::{EdgeId, Graph, GraphError, NodeId, WKey};
use crate::meter::WorkMeter;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MsfDelta {
    pub removed: Vec<EdgeId>,
    pub added: Vec<EdgeId>,
}

impl MsfDelta {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
        }
        self.parent[x]
    }

    pub fn union(&mut self, x: usize, y: usize) -> bool {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        if self.rank[rx] < self.rank[ry] {
            self.parent[rx] = ry;
        } else {
            self.parent[ry] = rx;
            if self.rank[rx] == self.rank[ry] {
                self.rank[rx] += 1;
            }
        }
        true
    }
}

/// The unique MSF under the distinct total order, as a set of edge ids.
pub fn kruskal(g: &Graph) -> Vec<EdgeId> {
    let mut order: Vec<(WKey, EdgeId)> = g.alive_edge_ids().map(|e| (g.edge(e).key, e)).collect();
    order.sort_unstable();
    let mut uf = UnionFind::new(g.n());
    let mut out = Vec::new();
    for (_, e) in order {
        let er = g.edge(e);
        if uf.union(er.u, er.v) {
            out.push(e);
        }
    }
    out
}

/// Fully dynamic MSF on a multigraph, maintained exactly: tree-edge
/// deletions scan the sorted non-tree pool for the lightest reconnecting
/// edge. In the engine this structure only ever runs on graphs with few
/// nodes, so the linear replacement scan is within budget.
#[derive(Clone)]
pub struct MultigraphMsf {
    g: Graph,
    forest: DynamicForest,
    tree: HashSet<EdgeId>,
    nontree: BTreeSet<(WKey, EdgeId)>,
    pub meter: WorkMeter,
}

impl MultigraphMsf {
    pub(crate) fn from_parts(
        g: Graph,
        forest: DynamicForest,
        tree: HashSet<EdgeId>,
        nontree: BTreeSet<(WKey, EdgeId)>,
    ) -> Self {
        MultigraphMsf {
            g,
            forest,
            tree,
            nontree,
            meter: WorkMeter::new(),
        }
    }

    pub fn new(g: Graph) -> Self {
        let forest_edges = kruskal(&g);
        let mut forest = DynamicForest::new(g.n());
        let mut tree = HashSet::new();
        for e in &forest_edges {
            let er = g.edge(*e);
            forest.link(er.u, er.v, *e, er.key).expect("kruskal forest is acyclic");
            tree.insert(*e);
        }
        let nontree = g
            .alive_edge_ids()
            .filter(|e| !tree.contains(e))
            .map(|e| (g.edge(e).key, e))
            .collect();
        MultigraphMsf {
            g,
            forest,
            tree,
            nontree,
            meter: WorkMeter::new(),
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.g
    }

    pub fn forest_edges(&self) -> &HashSet<EdgeId> {
        &self.tree
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.g.is_alive(e)
    }

    pub fn delete(&mut self, e: EdgeId) -> Result<MsfDelta, GraphError> {
        let key = self.g.try_edge(e)?.key;
        self.g.delete_edge(e)?;
        if !self.tree.contains(&e) {
            self.nontree.remove(&(key, e));
            return Ok(MsfDelta::default());
        }
        self.tree.remove(&e);
        self.forest.cut(e).expect("tree edge in forest");
        // lightest reconnecting non-tree edge, scanned in weight order
        let mut replacement = None;
        for &(k, f) in self.nontree.iter() {
            self.meter.tick();
            let fr = self.g.edge(f);
            if !self.forest.connected(fr.u, fr.v) {
                replacement = Some((k, f));
                break;
            }
        }
        match replacement {
            Some((k, f)) => {
                self.nontree.remove(&(k, f));
                let fr = self.g.edge(f);
                self.forest.link(fr.u, fr.v, f, k).expect("replacement reconnects");
                self.tree.insert(f);
                Ok(MsfDelta {
                    removed: vec![e],
                    added: vec![f],
                })
            }
            None => Ok(MsfDelta {
                removed: vec![e],
                added: vec![],
            }),
        }
    }

    pub fn insert(&mut self, u: NodeId, v: NodeId, key: WKey) -> Result<(EdgeId, MsfDelta), GraphError> {
        let e = self.g.add_edge(u, v, key)?;
        Ok((e, self.insert_existing(e)))
    }

    fn insert_existing(&mut self, e: EdgeId) -> MsfDelta {
        let er = self.g.edge(e);
        let (u, v, key) = (er.u, er.v, er.key);
        if !self.forest.connected(u, v) {
            self.forest.link(u, v, e, key).expect("joins components");
            self.tree.insert(e);
            return MsfDelta {
                removed: vec![],
                added: vec![e],
            };
        }
        let f = self.forest.path_max(u, v).expect("connected");
        let fk = self.g.edge(f).key;
        if key < fk {
            self.forest.cut(f).expect("path edge");
            self.tree.remove(&f);
            self.nontree.insert((fk, f));
            self.forest.link(u, v, e, key).expect("swap link");
            self.tree.insert(e);
            MsfDelta {
                removed: vec![f],
                added: vec![e],
            }
        } else {
            self.nontree.insert((key, e));
            MsfDelta::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SCoveredError {
    NonTreeNotCovered(EdgeId),
    DegreeTooHigh(NodeId, u64),
    WouldCycle(NodeId, NodeId),
    Graph(GraphError),
}

impl std::fmt::Display for SCoveredError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SCoveredError::NonTreeNotCovered(e) => {
                write!(f, "non-tree edge {e} does not have exactly one endpoint in S")
            }
            SCoveredError::DegreeTooHigh(v, d) => write!(f, "node {v} outside S has degree {d} > 3"),
            SCoveredError::WouldCycle(u, v) => write!(f, "tree insert {u}-{v} would close a cycle"),
            SCoveredError::Graph(g) => write!(f, "{g}"),
        }
    }
}

impl std::error::Error for SCoveredError {}

impl From<GraphError> for SCoveredError {
    fn from(e: GraphError) -> Self {
        SCoveredError::Graph(e)
    }
}

/// Decremental MSF for graphs where every non-tree edge has exactly one
/// endpoint in a distinguished set S and nodes outside S have degree at
/// most 3. Replacement search scans S-incident non-tree edges in weight
/// order; the meter counts scanned candidates.
#[derive(Clone)]
pub struct SCoveredMsf {
    g: Graph,
    in_s: Vec<bool>,
    forest: DynamicForest,
    tree: HashSet<EdgeId>,
    nontree: BTreeSet<(WKey, EdgeId)>,
    pub meter: WorkMeter,
}

impl SCoveredMsf {
    pub fn new(g: Graph, s: &[NodeId]) -> Result<Self, SCoveredError> {
        let mut in_s = vec![false; g.n()];
        for &v in s {
            if v >= g.n() {
                return Err(SCoveredError::Graph(GraphError::UnknownNode(v)));
            }
            in_s[v] = true;
        }
        for v in 0..g.n() {
            if !in_s[v] && g.deg(v) > 3 {
                return Err(SCoveredError::DegreeTooHigh(v, g.deg(v)));
            }
        }
        let forest_edges = kruskal(&g);
        let tree: HashSet<EdgeId> = forest_edges.iter().copied().collect();
        for e in g.alive_edge_ids() {
            if !tree.contains(&e) {
                let er = g.edge(e);
                if (in_s[er.u] as u8) + (in_s[er.v] as u8) != 1 {
                    return Err(SCoveredError::NonTreeNotCovered(e));
                }
            }
        }
        let mut forest = DynamicForest::new(g.n());
        for &e in &forest_edges {
            let er = g.edge(e);
            forest.link(er.u, er.v, e, er.key).expect("kruskal forest");
        }
        let nontree = g
            .alive_edge_ids()
            .filter(|e| !tree.contains(e))
            .map(|e| (g.edge(e).key, e))
            .collect();
        Ok(SCoveredMsf {
            g,
            in_s,
            forest,
            tree,
            nontree,
            meter: WorkMeter::new(),
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.g
    }

    pub fn in_s(&self, v: NodeId) -> bool {
        self.in_s[v]
    }

    pub fn forest_edges(&self) -> &HashSet<EdgeId> {
        &self.tree
    }

    pub fn delete(&mut self, e: EdgeId) -> Result<MsfDelta, SCoveredError> {
        let key = self.g.try_edge(e)?.key;
        self.g.delete_edge(e)?;
        if !self.tree.contains(&e) {
            self.nontree.remove(&(key, e));
            return Ok(MsfDelta::default());
        }
        self.tree.remove(&e);
        self.forest.cut(e).expect("tree edge");
        let mut replacement = None;
        for &(k, f) in self.nontree.iter() {
            self.meter.tick();
            let fr = self.g.edge(f);
            if !self.forest.connected(fr.u, fr.v) {
                replacement = Some((k, f));
                break;
            }
        }
        match replacement {
            Some((k, f)) => {
                self.nontree.remove(&(k, f));
                let fr = self.g.edge(f);
                self.forest.link(fr.u, fr.v, f, k).expect("reconnects");
                self.tree.insert(f);
                Ok(MsfDelta {
                    removed: vec![e],
                    added: vec![f],
                })
            }
            None => Ok(MsfDelta {
                removed: vec![e],
                added: vec![],
            }),
        }
    }

    /// Inserts an edge that is known to join two components (an MSF edge of
    /// the evolving graph); used for tree swaps driven by the caller.
    pub fn insert_tree_edge(&mut self, u: NodeId, v: NodeId, key: WKey) -> Result<EdgeId, SCoveredError> {
        if self.forest.connected(u, v) {
            return Err(SCoveredError::WouldCycle(u, v));
        }
        let e = self.g.add_edge(u, v, key)?;
        self.forest.link(u, v, e, key).expect("checked acyclic");
        self.tree.insert(e);
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::KruskalReplay;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kruskal_triangle() {
        let g = Graph::from_weighted_edges(3, &[(0, 1, 1), (1, 2, 2), (0, 2, 3)]).unwrap();
        assert_eq!(kruskal(&g), vec![0, 1]);
    }

    #[test]
    fn kruskal_forest_is_itself() {
        let g = Graph::from_weighted_edges(4, &[(0, 1, 5), (2, 3, 1)]).unwrap();
        let mut f = kruskal(&g);
        f.sort_unstable();
        assert_eq!(f, vec![0, 1]);
    }

    #[test]
    fn sparsify_fact_on_random_splits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(4..24);
            let mut list = Vec::new();
            let mut next = 0i64;
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.gen_bool(0.35) {
                        list.push((u, v, next));
                        next += 1;
                    }
                }
            }
            let g = Graph::from_weighted_edges(n, &list).unwrap();
            // split edges into E1, E2; check msf(E1 u E2) subset of msf(E1) u msf(E2)
            let mut g1 = g.clone();
            let mut g2 = g.clone();
            for e in g.alive_edge_ids() {
                if rng.gen_bool(0.5) {
                    g2.delete_edge(e).unwrap();
                } else {
                    g1.delete_edge(e).unwrap();
                }
            }
            let whole: HashSet<EdgeId> = kruskal(&g).into_iter().collect();
            let mut union: HashSet<EdgeId> = kruskal(&g1).into_iter().collect();
            union.extend(kruskal(&g2));
            assert!(whole.is_subset(&union));
        }
    }

    #[test]
    fn contract_fact_on_random_graphs() {
        // msf of a 2-node contraction is a subset of msf(G)
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.gen_range(4..16);
            let mut list = Vec::new();
            let mut next = 0i64;
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.gen_bool(0.4) {
                        list.push((u, v, next));
                        next += 1;
                    }
                }
            }
            if list.is_empty() {
                continue;
            }
            let g = Graph::from_weighted_edges(n, &list).unwrap();
            let a = rng.gen_range(0..n);
            let b = (a + 1 + rng.gen_range(0..n - 1)) % n;
            if a == b {
                continue;
            }
            // contraction: relabel b as a, drop self loops, keep edge ids via same order
            let mut ng = Graph::new(n);
            let mut kept = Vec::new();
            for e in g.alive_edge_ids() {
                let er = g.edge(e);
                let (mut u, mut v) = (er.u, er.v);
                if u == b {
                    u = a;
                }
                if v == b {
                    v = a;
                }
                if u != v {
                    ng.add_edge(u, v, er.key).unwrap();
                    kept.push(e);
                }
            }
            let contracted_msf: HashSet<EdgeId> =
                kruskal(&ng).into_iter().map(|i| kept[i]).collect();
            let full: HashSet<EdgeId> = kruskal(&g).into_iter().collect();
            assert!(contracted_msf.is_subset(&full));
        }
    }

    #[test]
    fn multigraph_doubled_edge_replacement() {
        let g = Graph::from_weighted_edges(2, &[(0, 1, 1), (0, 1, 2)]).unwrap();
        let mut m = MultigraphMsf::new(g);
        let delta = m.delete(0).unwrap();
        assert_eq!(delta.removed, vec![0]);
        assert_eq!(delta.added, vec![1]);
    }

    #[test]
    fn multigraph_bridge_has_no_replacement() {
        let g = Graph::from_weighted_edges(3, &[(0, 1, 1), (1, 2, 2)]).unwrap();
        let mut m = MultigraphMsf::new(g);
        let delta = m.delete(1).unwrap();
        assert_eq!(delta.removed, vec![1]);
        assert!(delta.added.is_empty());
    }

    #[test]
    fn multigraph_random_updates_match_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10;
        let mut list = Vec::new();
        for i in 0..14 {
            let u = rng.gen_range(0..n);
            let mut v = rng.gen_range(0..n);
            while v == u {
                v = rng.gen_range(0..n);
            }
            list.push((u, v, i as i64));
        }
        let g = Graph::from_weighted_edges(n, &list).unwrap();
        let mut m = MultigraphMsf::new(g.clone());
        let mut oracle = KruskalReplay::new(g);
        let mut next_rank = 100i64;
        for step in 0..100 {
            let alive: Vec<EdgeId> = oracle.graph.alive_edge_ids().collect();
            if !alive.is_empty() && rng.gen_bool(0.5) {
                let e = alive[rng.gen_range(0..alive.len())];
                m.delete(e).unwrap();
                oracle.delete(e);
            } else {
                let u = rng.gen_range(0..n);
                let mut v = rng.gen_range(0..n);
                while v == u {
                    v = rng.gen_range(0..n);
                }
                next_rank += 1;
                let key = WKey::of_rank(next_rank, oracle.graph.edge_slots() as u64);
                let (e1, _) = m.insert(u, v, key).unwrap();
                let e2 = oracle.insert(u, v, key);
                assert_eq!(e1, e2);
            }
            let got: HashSet<EdgeId> = m.forest_edges().clone();
            assert_eq!(got, oracle.forest(), "diverged at step {step}");
        }
    }

    #[test]
    fn scovered_invariant_checked() {
        // path 0-1-2 with chord (0,2): non-tree edge (0,2) has no endpoint in S = {1}
        let g = Graph::from_weighted_edges(3, &[(0, 1, 1), (1, 2, 2), (0, 2, 3)]).unwrap();
        assert!(SCoveredMsf::new(g.clone(), &[1]).is_err());
        assert!(SCoveredMsf::new(g, &[0]).is_ok());
    }

    #[test]
    fn scovered_replacement_matches_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // star of paths: hub set S, spokes with parallel-ish attachments
        let n = 20;
        let mut list = Vec::new();
        let mut rank = 0i64;
        // spanning path
        for v in 1..n {
            list.push((v - 1, v, rank));
            rank += 1;
        }
        // extra edges incident to node 0 (S = {0})
        for v in 2..n {
            if rng.gen_bool(0.5) {
                list.push((0, v, rank + 100));
                rank += 1;
            }
        }
        let g = Graph::from_weighted_edges(n, &list).unwrap();
        let mut s = SCoveredMsf::new(g.clone(), &[0]).unwrap();
        let mut oracle = KruskalReplay::new(g);
        for _ in 0..50 {
            let alive: Vec<EdgeId> = oracle.graph.alive_edge_ids().collect();
            if alive.is_empty() {
                break;
            }
            let e = alive[rng.gen_range(0..alive.len())];
            s.delete(e).unwrap();
            oracle.delete(e);
            assert_eq!(*s.forest_edges(), oracle.forest());
        }
    }

    use std::collections::HashSet;
}


/// Budgeted construction of a [`MultigraphMsf`]: collect, order and scan
/// the edges in resumable chunks so background rebuilds can spread their
/// initialization across update steps.
pub struct MsfInitJob {
    g: Option<Graph>,
    phase: InitPhase,
    sorted: BTreeSet<(WKey, EdgeId)>,
    scan_cursor: usize,
    scan_order: Vec<EdgeId>,
    uf: UnionFind,
    forest: DynamicForest,
    tree: HashSet<EdgeId>,
    done: bool,
    cost: u64,
}

enum InitPhase {
    Collect(usize),
    Scan,
    Finished,
}

impl MsfInitJob {
    pub fn new(g: Graph) -> Self {
        let n = g.n();
        let cost = (g.m() as u64 + 1) * (crate::flow::log2_ceil(g.m() as u64 + 2) + 2);
        MsfInitJob {
            uf: UnionFind::new(n),
            forest: DynamicForest::new(n),
            g: Some(g),
            phase: InitPhase::Collect(0),
            sorted: BTreeSet::new(),
            scan_cursor: 0,
            scan_order: Vec::new(),
            tree: HashSet::new(),
            done: false,
            cost,
        }
    }

    pub fn cost_estimate(&self) -> u64 {
        self.cost
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Advances roughly `budget` edge-touches; true when construction done.
    pub fn step(&mut self, budget: u64) -> bool {
        if self.done {
            return true;
        }
        let mut left = budget.max(1);
        let g = self.g.as_ref().expect("graph present until take");
        loop {
            match &mut self.phase {
                InitPhase::Collect(next) => {
                    while *next < g.edge_slots() && left > 0 {
                        let e = *next;
                        *next += 1;
                        if g.is_alive(e) {
                            self.sorted.insert((g.edge(e).key, e));
                        }
                        left = left.saturating_sub(1);
                    }
                    if *next >= g.edge_slots() {
                        self.scan_order = self.sorted.iter().map(|&(_, e)| e).collect();
                        self.phase = InitPhase::Scan;
                    } else {
                        return false;
                    }
                }
                InitPhase::Scan => {
                    while self.scan_cursor < self.scan_order.len() && left > 0 {
                        let e = self.scan_order[self.scan_cursor];
                        self.scan_cursor += 1;
                        let er = g.edge(e);
                        if self.uf.union(er.u, er.v) {
                            self.forest.link(er.u, er.v, e, er.key).expect("kruskal order");
                            self.tree.insert(e);
                        }
                        left = left.saturating_sub(1);
                    }
                    if self.scan_cursor >= self.scan_order.len() {
                        self.phase = InitPhase::Finished;
                        self.done = true;
                        return true;
                    }
                    return false;
                }
                InitPhase::Finished => {
                    self.done = true;
                    return true;
                }
            }
        }
    }

    /// Finalizes into the structure; must be done.
    pub fn take(&mut self) -> MultigraphMsf {
        assert!(self.done, "init not complete");
        let g = self.g.take().expect("take once");
        let mut nontree = std::mem::take(&mut self.sorted);
        for e in &self.tree {
            nontree.remove(&(g.edge(*e).key, *e));
        }
        MultigraphMsf::from_parts(
            g,
            std::mem::replace(&mut self.forest, DynamicForest::new(0)),
            std::mem::take(&mut self.tree),
            nontree,
        )
    }
}
