//! Exponential brute-force oracles used by tests across the crate: exact
//! minimum conductance/expansion by cut enumeration, the largest sparse
//! overlapping cut, a max-flow feasibility certificate and an MSF replay
//! oracle. All refuse inputs beyond their enumeration caps.

use std::collections::HashSet;

use crate::graph::{EdgeId, Frac, Graph, NodeId};
use crate::msf::kruskal;

pub const CONDUCTANCE_CAP: usize = 20;
pub const OVERLAP_CAP: usize = 14;
pub const MAXFLOW_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    TooLarge { n: usize, cap: usize },
    Degenerate(String),
}

impl std::fmt::Display for OracleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleError::TooLarge { n, cap } => write!(f, "oracle refuses n={n} > cap {cap}"),
            OracleError::Degenerate(s) => write!(f, "degenerate oracle input: {s}"),
        }
    }
}

impl std::error::Error for OracleError {}

fn subset_nodes(mask: u64, n: usize) -> Vec<NodeId> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Exact minimizing cut over all 2^(n-1)-1 proper bipartitions, tie broken
/// by the lexicographically smallest sorted node set.
pub fn min_conductance_bruteforce(g: &Graph) -> Result<(Vec<NodeId>, Frac), OracleError> {
    min_cut_metric(g, false)
}

/// Same enumeration for expansion.
pub fn min_expansion_bruteforce(g: &Graph) -> Result<(Vec<NodeId>, Frac), OracleError> {
    min_cut_metric(g, true)
}

fn min_cut_metric(g: &Graph, expansion: bool) -> Result<(Vec<NodeId>, Frac), OracleError> {
    let n = g.n();
    if n < 2 {
        return Err(OracleError::Degenerate("need at least 2 nodes".into()));
    }
    if n > CONDUCTANCE_CAP {
        return Err(OracleError::TooLarge { n, cap: CONDUCTANCE_CAP });
    }
    let mut best: Option<(Vec<NodeId>, Frac)> = None;
    // fix node 0 on the complement side so each bipartition appears once
    for mask in 1u64..(1 << (n - 1)) {
        let s = subset_nodes(mask << 1, n);
        debug_assert!(!s.contains(&0) && !s.is_empty());
        let phi = if expansion {
            g.expansion(&s)
        } else {
            g.conductance(&s)
        };
        let phi = match phi {
            Ok(p) => p,
            Err(_) => continue, // zero-volume side: skip degenerate cuts
        };
        // canonical side for the reported set: the one not containing node 0,
        // compared lexicographically on ties
        let better = match &best {
            None => true,
            Some((bs, bphi)) => phi < *bphi || (phi == *bphi && s < *bs),
        };
        if better {
            best = Some((s, phi));
        }
    }
    best.ok_or_else(|| OracleError::Degenerate("no cut with positive volume".into()))
}

/// Largest-volume alpha-sparse (A, sigma)-overlapping cut with
/// vol(S) <= vol(V-S); 0 if none exists.
pub fn opt_overlapping_bruteforce(
    g: &Graph,
    alpha: Frac,
    a: &[NodeId],
    sigma: Frac,
) -> Result<u64, OracleError> {
    let n = g.n();
    if n > OVERLAP_CAP {
        return Err(OracleError::TooLarge { n, cap: OVERLAP_CAP });
    }
    if n < 2 {
        return Ok(0);
    }
    let aset: HashSet<NodeId> = a.iter().copied().collect();
    let total = g.total_volume();
    let mut best = 0u64;
    for mask in 1u64..(1 << n) - 1 {
        let s = subset_nodes(mask, n);
        let vol_s = g.volume(&s).expect("valid nodes");
        if vol_s == 0 || 2 * vol_s > total {
            continue;
        }
        let phi = match g.conductance(&s) {
            Ok(p) => p,
            Err(_) => continue,
        };
        if phi >= alpha {
            continue;
        }
        let vol_sa: u64 = s.iter().filter(|v| aset.contains(v)).map(|&v| g.deg(v)).sum();
        // overlap: vol(S cap A) / vol(S) >= sigma
        if Frac::new(vol_sa as i64, vol_s as i64) < sigma {
            continue;
        }
        best = best.max(vol_s);
    }
    Ok(best)
}

/// Decides by Edmonds-Karp whether a feasible flow with per-edge congestion
/// `cap` exists for the instance (supply `delta`, sink capacity `sink`):
/// super-source -> v with capacity delta(v), v -> super-sink with capacity
/// sink(v) and every graph edge with capacity `cap` in both directions.
/// Returns true iff all supply can be absorbed.
pub fn feasible_flow_exists(
    g: &Graph,
    delta: &[(NodeId, u64)],
    sink: impl Fn(NodeId) -> u64,
    cap: u64,
) -> Result<bool, OracleError> {
    let n = g.n();
    if n > MAXFLOW_CAP {
        return Err(OracleError::TooLarge { n, cap: MAXFLOW_CAP });
    }
    // dense capacity matrix over n + 2 nodes (source = n, sink = n + 1)
    let nn = n + 2;
    let (src, snk) = (n, n + 1);
    let mut capm = vec![vec![0u64; nn]; nn];
    let mut total_supply = 0u64;
    for &(v, d) in delta {
        capm[src][v] += d;
        total_supply += d;
    }
    for v in 0..n {
        capm[v][snk] = sink(v);
    }
    for e in g.alive_edge_ids() {
        let er = g.edge(e);
        capm[er.u][er.v] += cap;
        capm[er.v][er.u] += cap;
    }
    let mut flow = 0u64;
    loop {
        // BFS augment
        let mut prev = vec![usize::MAX; nn];
        prev[src] = src;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for v in 0..nn {
                if prev[v] == usize::MAX && capm[u][v] > 0 {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[snk] == usize::MAX {
            break;
        }
        let mut bottleneck = u64::MAX;
        let mut v = snk;
        while v != src {
            let u = prev[v];
            bottleneck = bottleneck.min(capm[u][v]);
            v = u;
        }
        let mut v = snk;
        while v != src {
            let u = prev[v];
            capm[u][v] -= bottleneck;
            capm[v][u] += bottleneck;
            v = u;
        }
        flow += bottleneck;
    }
    Ok(flow == total_supply)
}

/// Naive path-max reference: the heaviest edge on the unique u-v path of a
/// forest given as an edge set over `g`, or None when not connected.
pub fn naive_path_max(g: &Graph, forest: &HashSet<EdgeId>, u: NodeId, v: NodeId) -> Option<EdgeId> {
    if u == v {
        return None;
    }
    let mut stack = vec![(u, usize::MAX, None::<EdgeId>)];
    let mut seen = vec![false; g.n()];
    seen[u] = true;
    let mut best_on_path = vec![None; g.n()];
    while let Some((x, _, best)) = stack.pop() {
        best_on_path[x] = best;
        if x == v {
            return best;
        }
        for (y, e) in g.neighbors(x) {
            if forest.contains(&e) && !seen[y] {
                seen[y] = true;
                let nb = match best {
                    None => Some(e),
                    Some(b) => {
                        if g.edge(e).key > g.edge(b).key {
                            Some(e)
                        } else {
                            Some(b)
                        }
                    }
                };
                stack.push((y, x, nb));
            }
        }
    }
    None
}

/// Step-by-step MSF replay oracle: applies the same update stream by brute
/// force, recomputing Kruskal on the live graph after every step.
#[derive(Clone)]
pub struct KruskalReplay {
    pub graph: Graph,
}

impl KruskalReplay {
    pub fn new(graph: Graph) -> Self {
        KruskalReplay { graph }
    }

    pub fn forest(&self) -> HashSet<EdgeId> {
        kruskal(&self.graph).into_iter().collect()
    }

    pub fn delete(&mut self, e: EdgeId) {
        self.graph.delete_edge(e).expect("oracle delete");
    }

    pub fn insert(&mut self, u: NodeId, v: NodeId, key: crate::graph::WKey) -> EdgeId {
        self.graph.add_edge(u, v, key).expect("oracle insert")
    }
}
