//! Contraction machinery: connecting paths, the Contract_S operation, the
//! two-phase contractor, decremental contracted MSF instances, the
//! level-scheduled reduction from fully-dynamic MSF on few-non-tree-edge
//! graphs to restricted decremental MSF, and the phase-rebuild wrapper
//! that lifts deletion-bounded algorithms to unbounded streams.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::rc::Rc;

use crate::forest::DynamicForest;
use crate::graph::{EdgeId, Graph, NodeId, WKey};
use crate::msf::{MsfDelta, MsfInitJob, MultigraphMsf};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContractionError {
    MissingTerminal(EdgeId),
    DeadOrUnknownEdge(EdgeId),
    PhaseError(&'static str),
    BatchTooLarge { got: usize, cap: usize },
    TooManyNonTree { got: usize, cap: usize },
    NoReadyContractor { level: usize },
    NoFreeSlot { level: usize },
    Inner(String),
}

impl std::fmt::Display for ContractionError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ContractionError::MissingTerminal(e) => {
                write!(f, "terminal set misses an endpoint of non-tree edge {e}")
            }
            ContractionError::DeadOrUnknownEdge(e) => write!(f, "edge {e} dead or unknown"),
            ContractionError::PhaseError(s) => write!(f, "phase error: {s}"),
            ContractionError::BatchTooLarge { got, cap } => {
                write!(f, "batch of {got} exceeds B = {cap}")
            }
            ContractionError::TooManyNonTree { got, cap } => {
                write!(f, "{got} non-tree edges exceed k = {cap}")
            }
            ContractionError::NoReadyContractor { level } => {
                write!(f, "no ready contractor at level {level}")
            }
            ContractionError::NoFreeSlot { level } => write!(f, "no free slot at level {level}"),
            ContractionError::Inner(s) => write!(f, "inner algorithm: {s}"),
        }
    }
}

impl std::error::Error for ContractionError {}

/// One connecting path: ordered edges of the forest between two endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathRec {
    pub endpoints: (NodeId, NodeId),
    pub edges: Vec<EdgeId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConnectingPaths {
    pub paths: Vec<PathRec>,
}

/// The unique minimal edge-disjoint path system of the forest `forest`
/// (edge ids into `g`) linking the terminals of `s`: endpoints are
/// terminals or meet at least three paths, and the union is the Steiner
/// subtree of the terminals in each tree.
pub fn connecting_paths(g: &Graph, forest: &HashSet<EdgeId>, s: &[NodeId]) -> ConnectingPaths {
    let n = g.n();
    let in_s = {
        let mut v = vec![false; n];
        for &x in s {
            v[x] = true;
        }
        v
    };
    // forest adjacency
    let mut adj: Vec<Vec<(NodeId, EdgeId)>> = vec![Vec::new(); n];
    for &e in forest {
        let er = g.edge(e);
        adj[er.u].push((er.v, e));
        adj[er.v].push((er.u, e));
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
    }
    // iteratively strip non-terminal leaves to get the Steiner subtrees
    let mut deg: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut removed_edge: HashSet<EdgeId> = HashSet::new();
    let mut queue: VecDeque<NodeId> = (0..n).filter(|&v| deg[v] == 1 && !in_s[v]).collect();
    let mut gone = vec![false; n];
    while let Some(v) = queue.pop_front() {
        if gone[v] || deg[v] != 1 || in_s[v] {
            continue;
        }
        gone[v] = true;
        for &(w, e) in &adj[v] {
            if removed_edge.contains(&e) || gone[w] {
                continue;
            }
            removed_edge.insert(e);
            deg[v] -= 1;
            deg[w] -= 1;
            if deg[w] == 1 && !in_s[w] {
                queue.push_back(w);
            }
        }
    }
    // breakpoints: terminals and branch nodes of the Steiner subtree
    let live_deg = |v: NodeId, adj: &Vec<Vec<(NodeId, EdgeId)>>, removed: &HashSet<EdgeId>| {
        adj[v].iter().filter(|(_, e)| !removed.contains(e)).count()
    };
    let mut paths = Vec::new();
    let mut visited_edge: HashSet<EdgeId> = HashSet::new();
    let mut breakpoints: Vec<NodeId> = (0..n)
        .filter(|&v| {
            let d = live_deg(v, &adj, &removed_edge);
            d > 0 && (in_s[v] || d >= 3)
        })
        .collect();
    breakpoints.sort_unstable();
    let is_break: HashSet<NodeId> = breakpoints.iter().copied().collect();
    for &b in &breakpoints {
        for &(first, e0) in &adj[b] {
            if removed_edge.contains(&e0) || visited_edge.contains(&e0) {
                continue;
            }
            // walk from b until the next breakpoint
            let mut edges = vec![e0];
            visited_edge.insert(e0);
            let mut prev = b;
            let mut cur = first;
            while !is_break.contains(&cur) {
                let mut next = None;
                for &(w, e) in &adj[cur] {
                    if removed_edge.contains(&e) || visited_edge.contains(&e) || w == prev {
                        continue;
                    }
                    next = Some((w, e));
                    break;
                }
                let (w, e) = next.expect("interior path node continues");
                visited_edge.insert(e);
                edges.push(e);
                prev = cur;
                cur = w;
            }
            paths.push(PathRec {
                endpoints: (b, cur),
                edges,
            });
        }
    }
    // deterministic order
    paths.sort_by(|a, b| a.endpoints.cmp(&b.endpoints).then(a.edges.cmp(&b.edges)));
    ConnectingPaths { paths }
}

#[derive(Clone, Debug)]
pub enum CEdgeKind {
    /// a non-tree edge carried over; payload is the original edge id
    NonTree(EdgeId),
    /// a super edge covering a connecting path of original tree edges
    Super(Vec<EdgeId>),
}

/// The contracted multigraph and forest with back-pointers. Nodes are the
/// path/non-tree endpoints, renumbered locally.
#[derive(Clone, Debug)]
pub struct ContractedPair {
    pub graph: Graph,
    pub node_of: Vec<NodeId>,
    pub local_node: HashMap<NodeId, usize>,
    pub kind: Vec<CEdgeKind>,
    /// local edge ids of the contracted forest F'
    pub forest_local: HashSet<EdgeId>,
    /// original tree edge -> local super edge covering it
    pub cover: HashMap<EdgeId, EdgeId>,
    /// original non-tree edge -> local edge id
    pub local_of_nontree: HashMap<EdgeId, EdgeId>,
}

/// Contract_S(G, F): replaces each connecting path by a super edge whose
/// weight is the path maximum, drops tree edges off the path system and
/// keeps all non-tree edges. S must contain every non-tree endpoint.
pub fn contract(
    g: &Graph,
    forest: &HashSet<EdgeId>,
    nontree: &[EdgeId],
    s: &[NodeId],
) -> Result<ContractedPair, ContractionError> {
    let sset: HashSet<NodeId> = s.iter().copied().collect();
    for &e in nontree {
        let er = g.try_edge(e).map_err(|_| ContractionError::DeadOrUnknownEdge(e))?;
        if !sset.contains(&er.u) || !sset.contains(&er.v) {
            return Err(ContractionError::MissingTerminal(e));
        }
    }
    let cp = connecting_paths(g, forest, s);
    contract_with_paths(g, &cp, nontree, s)
}

fn contract_with_paths(
    g: &Graph,
    cp: &ConnectingPaths,
    nontree: &[EdgeId],
    s: &[NodeId],
) -> Result<ContractedPair, ContractionError> {
    // node set: path endpoints plus terminals (isolated terminals allowed)
    let mut nodes: BTreeSet<NodeId> = s.iter().copied().collect();
    for p in &cp.paths {
        nodes.insert(p.endpoints.0);
        nodes.insert(p.endpoints.1);
    }
    let node_of: Vec<NodeId> = nodes.iter().copied().collect();
    let local_node: HashMap<NodeId, usize> =
        node_of.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut graph = Graph::new(node_of.len());
    let mut kind = Vec::new();
    let mut forest_local = HashSet::new();
    let mut cover = HashMap::new();
    let mut local_of_nontree = HashMap::new();
    // non-tree edges first
    let mut nt_sorted = nontree.to_vec();
    nt_sorted.sort_unstable();
    for &e in &nt_sorted {
        let er = g.edge(e);
        let le = graph
            .add_edge(local_node[&er.u], local_node[&er.v], er.key)
            .expect("non-tree endpoints are terminals");
        kind.push(CEdgeKind::NonTree(e));
        local_of_nontree.insert(e, le);
    }
    // super edges: weight and tie-break key of the path-max edge
    for p in &cp.paths {
        let max_e = *p
            .edges
            .iter()
            .max_by_key(|&&e| g.edge(e).key)
            .expect("paths are nonempty");
        let le = graph
            .add_edge(
                local_node[&p.endpoints.0],
                local_node[&p.endpoints.1],
                g.edge(max_e).key,
            )
            .expect("super edge endpoints present");
        kind.push(CEdgeKind::Super(p.edges.clone()));
        forest_local.insert(le);
        for &e in &p.edges {
            cover.insert(e, le);
        }
    }
    Ok(ContractedPair {
        graph,
        node_of,
        local_node,
        kind,
        forest_local,
        cover,
        local_of_nontree,
    })
}

/// Forest mutation broadcast to contractors.
#[derive(Clone, Debug)]
pub enum ForestOp {
    Link { e: EdgeId, u: NodeId, v: NodeId, key: WKey },
    Cut { e: EdgeId },
}

/// Two-phase contraction structure: phase 1 mirrors the forest under edge
/// updates; phase 2 freezes the mirror, contracts with respect to a given
/// non-tree set and answers covering-super-edge queries.
#[derive(Clone, Debug, Default)]
pub struct TwoPhaseContractor {
    mirror: BTreeMap<EdgeId, (NodeId, NodeId, WKey)>,
    phase2: Option<ContractedPair>,
}

impl TwoPhaseContractor {
    pub fn new() -> Self {
        TwoPhaseContractor::default()
    }

    pub fn in_phase2(&self) -> bool {
        self.phase2.is_some()
    }

    pub fn apply(&mut self, op: &ForestOp) -> Result<(), ContractionError> {
        if self.phase2.is_some() {
            return Err(ContractionError::PhaseError("phase 1 update after freeze"));
        }
        match op {
            ForestOp::Link { e, u, v, key } => {
                self.mirror.insert(*e, (*u, *v, *key));
            }
            ForestOp::Cut { e } => {
                self.mirror.remove(e);
            }
        }
        Ok(())
    }

    pub fn forest_len(&self) -> usize {
        self.mirror.len()
    }

    /// Phase switch: contracts (V, F u N) with respect to S = end(N).
    pub fn freeze(&mut self, g: &Graph, nontree: &[EdgeId]) -> Result<&ContractedPair, ContractionError> {
        if self.phase2.is_some() {
            return Err(ContractionError::PhaseError("freeze called twice"));
        }
        let forest: HashSet<EdgeId> = self.mirror.keys().copied().collect();
        let mut s: BTreeSet<NodeId> = BTreeSet::new();
        for &e in nontree {
            let er = g.try_edge(e).map_err(|_| ContractionError::DeadOrUnknownEdge(e))?;
            s.insert(er.u);
            s.insert(er.v);
        }
        let sv: Vec<NodeId> = s.into_iter().collect();
        let pair = contract(g, &forest, nontree, &sv)?;
        self.phase2 = Some(pair);
        Ok(self.phase2.as_ref().unwrap())
    }

    /// The super edge covering a tree edge, None when the edge is off the
    /// path system. Phase-2 only.
    pub fn cover_query(&self, e: EdgeId) -> Result<Option<EdgeId>, ContractionError> {
        let p2 = self
            .phase2
            .as_ref()
            .ok_or(ContractionError::PhaseError("cover query in phase 1"))?;
        Ok(p2.cover.get(&e).copied())
    }

    pub fn pair(&self) -> Option<&ContractedPair> {
        self.phase2.as_ref()
    }
}

/// Decremental MSF instances built by a factory; instances answer edge
/// deletions with the forest delta (the added edge is the replacement).
pub trait DecMsf {
    fn delete(&mut self, e: EdgeId) -> Result<MsfDelta, ContractionError>;
    fn forest_contains(&self, e: EdgeId) -> bool;
    fn forest_edges(&self) -> Vec<EdgeId>;
    fn work(&self) -> u64;
}

/// Budgeted initialization of an instance.
pub trait DecMsfInit {
    fn step(&mut self, budget: u64) -> bool;
    fn cost_estimate(&self) -> u64;
    fn take(&mut self) -> Box<dyn DecMsf>;
}

pub trait DecMsfFactory {
    /// deletion capacity of instances on m-edge graphs; None = unbounded
    fn capacity(&self, m: usize) -> Option<u64>;
    fn begin(&self, g: Graph) -> Box<dyn DecMsfInit>;
}

impl DecMsf for MultigraphMsf {
    fn delete(&mut self, e: EdgeId) -> Result<MsfDelta, ContractionError> {
        MultigraphMsf::delete(self, e).map_err(|g| ContractionError::Inner(g.to_string()))
    }

    fn forest_contains(&self, e: EdgeId) -> bool {
        self.forest_edges().contains(&e)
    }

    fn forest_edges(&self) -> Vec<EdgeId> {
        let mut v: Vec<EdgeId> = MultigraphMsf::forest_edges(self).iter().copied().collect();
        v.sort_unstable();
        v
    }

    fn work(&self) -> u64 {
        self.meter.total()
    }
}

struct ExactInit {
    job: MsfInitJob,
}

impl DecMsfInit for ExactInit {
    fn step(&mut self, budget: u64) -> bool {
        self.job.step(budget)
    }

    fn cost_estimate(&self) -> u64 {
        self.job.cost_estimate()
    }

    fn take(&mut self) -> Box<dyn DecMsf> {
        Box::new(self.job.take())
    }
}

/// Exact unbounded decremental MSF (forest + sorted replacement scan).
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactFactory;

impl DecMsfFactory for ExactFactory {
    fn capacity(&self, _m: usize) -> Option<u64> {
        None
    }

    fn begin(&self, g: Graph) -> Box<dyn DecMsfInit> {
        Box::new(ExactInit {
            job: MsfInitJob::new(g),
        })
    }
}

/// Which of the contracted-change cases a deletion exercised.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContractedChange {
    NonTreeRemoved,
    Untouched,
    SuperSwap { replaced: bool },
}

/// A frozen contraction together with a live inner decremental MSF on the
/// contracted graph; evolves by the three-case analysis under deletions.
pub struct DecContractedMsf {
    pair: ContractedPair,
    inner: Box<dyn DecMsf>,
    /// original ids of the instance's current non-tree edges
    n_set: BTreeSet<EdgeId>,
    pub last_change: Option<ContractedChange>,
    /// (level, slot) of the contractor this instance occupies
    contractor_tag: Option<(usize, usize)>,
}

impl DecContractedMsf {
    pub fn n_len(&self) -> usize {
        self.n_set.len()
    }

    pub fn n_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.n_set.iter().copied()
    }

    pub fn contains_nontree(&self, e: EdgeId) -> bool {
        self.n_set.contains(&e)
    }

    /// Handles the deletion of an original edge; returns the original id of
    /// the local replacement candidate when the instance produced one.
    pub fn delete_original(&mut self, e: EdgeId) -> Result<Option<EdgeId>, ContractionError> {
        if self.n_set.contains(&e) {
            let le = self.pair.local_of_nontree[&e];
            self.inner.delete(le)?;
            self.n_set.remove(&e);
            self.pair.local_of_nontree.remove(&e);
            self.last_change = Some(ContractedChange::NonTreeRemoved);
            return Ok(None);
        }
        let covering = self.pair.cover.get(&e).copied();
        let Some(se) = covering else {
            self.last_change = Some(ContractedChange::Untouched);
            return Ok(None);
        };
        // the super edge covering e leaves (G', F'); the inner instance may
        // swap in a former non-tree edge
        let delta = self.inner.delete(se)?;
        self.pair.forest_local.remove(&se);
        // drop all cover entries through this super edge
        self.pair.cover.retain(|_, &mut le| le != se);
        let mut candidate = None;
        for &f_local in &delta.added {
            // the promoted edge is a non-tree edge of G'; translate back
            if let CEdgeKind::NonTree(orig) = &self.pair.kind[f_local] {
                let orig = *orig;
                self.n_set.remove(&orig);
                self.pair.local_of_nontree.remove(&orig);
                self.pair.forest_local.insert(f_local);
                // the promoted edge covers itself from now on
                self.pair.cover.insert(orig, f_local);
                candidate = Some(orig);
            }
        }
        self.last_change = Some(ContractedChange::SuperSwap {
            replaced: candidate.is_some(),
        });
        Ok(candidate)
    }

    pub fn work(&self) -> u64 {
        self.inner.work()
    }
}

/// Contractor slot states for the readiness schedule.
enum SlotState {
    Ready,
    Occupied,
    CatchUp { deadline: u64 },
}

struct ContractorSlot {
    contractor_forest: BTreeMap<EdgeId, (NodeId, NodeId, WKey)>,
    state: SlotState,
    buffer: VecDeque<ForestOp>,
}

impl ContractorSlot {
    fn new() -> Self {
        ContractorSlot {
            contractor_forest: BTreeMap::new(),
            state: SlotState::Ready,
            buffer: VecDeque::new(),
        }
    }

    fn apply_now(&mut self, op: &ForestOp) {
        match op {
            ForestOp::Link { e, u, v, key } => {
                self.contractor_forest.insert(*e, (*u, *v, *key));
            }
            ForestOp::Cut { e } => {
                self.contractor_forest.remove(e);
            }
        }
    }

    fn feed(&mut self, op: &ForestOp) {
        match self.state {
            SlotState::Ready => self.apply_now(&op.clone()),
            _ => self.buffer.push_back(op.clone()),
        }
    }

    /// Per-step catch-up replay toward the deadline.
    fn tick(&mut self, now: u64) {
        if let SlotState::CatchUp { deadline } = self.state {
            let steps_left = deadline.saturating_sub(now).max(1);
            let rate = (self.buffer.len() as u64).div_ceil(steps_left).max(2);
            for _ in 0..rate {
                match self.buffer.pop_front() {
                    Some(op) => self.apply_now(&op),
                    None => break,
                }
            }
            if self.buffer.is_empty() {
                self.state = SlotState::Ready;
            }
        }
    }
}

/// A background rebuild for one level: contraction at period start, inner
/// init spread over the first half, double-speed deletion replay over the
/// second half. Stage is implied: `inst` is None while the inner init runs.
struct CleanupJob {
    level: usize,
    started_at: u64,
    slot_idx: usize,
    pending: VecDeque<EdgeId>,
    init: Option<Box<dyn DecMsfInit>>,
    pair: Option<ContractedPair>,
    n_set: BTreeSet<EdgeId>,
    budget_per_step: u64,
    inst: Option<DecContractedMsf>,
}

impl CleanupJob {
    fn holds_nontree(&self, e: EdgeId) -> bool {
        match &self.inst {
            Some(i) => i.contains_nontree(e),
            None => self.n_set.contains(&e),
        }
    }
}

/// Per-update change report of the few-non-tree structure.
#[derive(Clone, Debug, Default)]
pub struct FewStats {
    pub time: u64,
    pub inner_work: u64,
    pub candidates_last: usize,
}

/// Fully dynamic MSF for graphs with at most k non-tree edges, handling a
/// batch of up to B insertions or a single deletion per step. Non-tree
/// edges live in level instances D_{i,j} over contracted graphs; levels
/// merge upward on a doubling schedule with six contractors per level
/// cycling ready/occupied/catch-up.
pub struct FewNonTreeMsf {
    g: Graph,
    k: usize,
    b: usize,
    l: usize,
    forest: DynamicForest,
    tree: HashSet<EdgeId>,
    nontree: BTreeSet<EdgeId>,
    /// slots[i][j] for i in 0..=L, j in 0..4 (j = paper's 1..4)
    slots: Vec<[Option<DecContractedMsf>; 4]>,
    slot_l0: Option<DecContractedMsf>,
    contractors: Vec<Vec<ContractorSlot>>,
    jobs: Vec<Option<CleanupJob>>,
    time: u64,
    factory: Rc<dyn DecMsfFactory>,
    pub stats: FewStats,
    /// published failure split parameter p' = p / (8 L)
    pub p_inner: f64,
}

impl FewNonTreeMsf {
    pub fn new(
        g: Graph,
        k: usize,
        b: usize,
        p: f64,
        factory: Rc<dyn DecMsfFactory>,
    ) -> Result<FewNonTreeMsf, ContractionError> {
        let l = (k.max(2) as u64).ilog2() as usize + usize::from(!(k.max(2)).is_power_of_two());
        let l = l.max(1);
        if b == 0 {
            return Err(ContractionError::BatchTooLarge { got: 0, cap: 1 });
        }
        // the proofs ask for B >= 5 ceil(log k); the per-level size bound
        // min(2^{i+1} B, k) stays valid for smaller B because the k cap
        // dominates at level 0, so smaller batches are accepted
        let forest_edges = crate::msf::kruskal(&g);
        let tree: HashSet<EdgeId> = forest_edges.iter().copied().collect();
        let nontree: BTreeSet<EdgeId> = g.alive_edge_ids().filter(|e| !tree.contains(e)).collect();
        if nontree.len() > k {
            return Err(ContractionError::TooManyNonTree {
                got: nontree.len(),
                cap: k,
            });
        }
        let mut forest = DynamicForest::new(g.n());
        for &e in &forest_edges {
            let er = g.edge(e);
            forest.link(er.u, er.v, e, er.key).expect("kruskal forest");
        }
        // contractors: levels 0..=L+1, six each, all ready on F
        let mut contractors: Vec<Vec<ContractorSlot>> = (0..=l + 1)
            .map(|_| (0..6).map(|_| ContractorSlot::new()).collect())
            .collect();
        for level in contractors.iter_mut() {
            for slot in level.iter_mut() {
                for &e in &forest_edges {
                    let er = g.edge(e);
                    slot.contractor_forest.insert(e, (er.u, er.v, er.key));
                }
            }
        }
        let mut few = FewNonTreeMsf {
            g,
            k,
            b,
            l,
            forest,
            tree,
            nontree: nontree.clone(),
            slots: (0..=l).map(|_| [None, None, None, None]).collect(),
            slot_l0: None,
            contractors,
            jobs: (0..=l + 2).map(|_| None).collect(),
            time: 0,
            factory,
            stats: FewStats::default(),
            p_inner: p / (8.0 * l.max(1) as f64),
        };
        // D_{L,1} holds all of N initially
        let n0: Vec<EdgeId> = nontree.iter().copied().collect();
        let inst = few.build_instance(l, &n0)?;
        few.slots[l][0] = Some(inst);
        Ok(few)
    }

    pub fn graph(&self) -> &Graph {
        &self.g
    }

    pub fn forest_edge_set(&self) -> &HashSet<EdgeId> {
        &self.tree
    }

    pub fn nontree_count(&self) -> usize {
        self.nontree.len()
    }

    /// Level-size bound |N_{i,j}| <= min(2^{i+1} B, k), asserted per step.
    pub fn check_level_bounds(&self) -> Result<(), ContractionError> {
        for (i, row) in self.slots.iter().enumerate() {
            let cap = ((1usize << (i + 1)).saturating_mul(self.b)).min(self.k);
            for inst in row.iter().flatten() {
                if inst.n_len() > cap {
                    return Err(ContractionError::TooManyNonTree {
                        got: inst.n_len(),
                        cap,
                    });
                }
            }
        }
        if let Some(inst) = &self.slot_l0 {
            if inst.n_len() > self.k {
                return Err(ContractionError::TooManyNonTree {
                    got: inst.n_len(),
                    cap: self.k,
                });
            }
        }
        // every live non-tree edge is covered by some instance
        for &e in &self.nontree {
            let mut found = self
                .slot_l0
                .as_ref()
                .map(|i| i.contains_nontree(e))
                .unwrap_or(false);
            if !found {
                'outer: for row in &self.slots {
                    for inst in row.iter().flatten() {
                        if inst.contains_nontree(e) {
                            found = true;
                            break 'outer;
                        }
                    }
                }
            }
            if !found {
                // the edge may live inside a background job still initializing
                let in_job = self.jobs.iter().flatten().any(|j| j.holds_nontree(e));
                if !in_job {
                    return Err(ContractionError::Inner(format!(
                        "non-tree edge {e} not covered by any instance"
                    )));
                }
            }
        }
        Ok(())
    }

    fn ready_contractor(&mut self, level: usize) -> Result<usize, ContractionError> {
        for (j, slot) in self.contractors[level].iter().enumerate() {
            if matches!(slot.state, SlotState::Ready) {
                return Ok(j);
            }
        }
        Err(ContractionError::NoReadyContractor { level })
    }

    /// Builds a complete instance synchronously (used at preprocessing and
    /// for the per-step level-0 instances).
    fn build_instance(&mut self, level: usize, n_edges: &[EdgeId]) -> Result<DecContractedMsf, ContractionError> {
        let j = self.ready_contractor(level)?;
        self.contractors[level][j].state = SlotState::Occupied;
        let forest: HashSet<EdgeId> = self.contractors[level][j]
            .contractor_forest
            .keys()
            .copied()
            .collect();
        let mut s: BTreeSet<NodeId> = BTreeSet::new();
        for &e in n_edges {
            let er = self.g.edge(e);
            s.insert(er.u);
            s.insert(er.v);
        }
        let sv: Vec<NodeId> = s.into_iter().collect();
        let pair = contract(&self.g, &forest, n_edges, &sv)?;
        let mut init = self.factory.begin(pair.graph.clone());
        while !init.step(u64::MAX) {}
        let inner = init.take();
        Ok(DecContractedMsf {
            pair,
            inner,
            n_set: n_edges.iter().copied().collect(),
            last_change: None,
            contractor_tag: Some((level, j)),
        })
    }

    /// Destroys an instance, releasing its contractor into catch-up.
    fn destroy_instance(&mut self, inst: Option<DecContractedMsf>) {
        if let Some(inst) = inst {
            if let Some((level, j)) = inst.contractor_tag {
                self.contractors[level][j].state = SlotState::CatchUp {
                    deadline: self.time + (1u64 << level.min(20)),
                };
            }
        }
    }

    fn free_slot_12(&mut self, i: usize) -> Result<usize, ContractionError> {
        if self.slots[i][0].is_none() {
            Ok(0)
        } else if self.slots[i][1].is_none() {
            Ok(1)
        } else {
            Err(ContractionError::NoFreeSlot { level: i })
        }
    }

    fn broadcast(&mut self, op: ForestOp) {
        for level in self.contractors.iter_mut() {
            for slot in level.iter_mut() {
                slot.feed(&op);
            }
        }
    }

    /// Starts the level-i rebuild job at period start tau (2^i | tau).
    fn start_job(&mut self, i: usize, tau: u64) -> Result<(), ContractionError> {
        // N'_i: the just-moved slots 3/4 of level i-1 (plus D_{L,0} at L+1)
        let mut n_new: BTreeSet<EdgeId> = BTreeSet::new();
        if i <= self.l {
            for j in [2, 3] {
                if let Some(inst) = &self.slots[i - 1][j] {
                    n_new.extend(inst.n_edges());
                }
            }
        } else {
            for j in [2, 3] {
                if let Some(inst) = &self.slots[self.l][j] {
                    n_new.extend(inst.n_edges());
                }
            }
            if let Some(inst) = &self.slot_l0 {
                n_new.extend(inst.n_edges());
            }
        }
        // drop anything no longer alive or promoted into the tree
        n_new.retain(|&e| self.g.is_alive(e) && !self.tree.contains(&e));
        let n_vec: Vec<EdgeId> = n_new.iter().copied().collect();
        let j = self.ready_contractor(i)?;
        self.contractors[i][j].state = SlotState::Occupied;
        let forest: HashSet<EdgeId> = self.contractors[i][j]
            .contractor_forest
            .keys()
            .copied()
            .collect();
        let mut s: BTreeSet<NodeId> = BTreeSet::new();
        for &e in &n_vec {
            let er = self.g.edge(e);
            s.insert(er.u);
            s.insert(er.v);
        }
        let sv: Vec<NodeId> = s.into_iter().collect();
        let pair = contract(&self.g, &forest, &n_vec, &sv)?;
        let init = self.factory.begin(pair.graph.clone());
        let half = (1u64 << (i - 1).min(20)).max(1);
        let budget_per_step = init.cost_estimate().div_ceil(half) + 16;
        self.jobs[i] = Some(CleanupJob {
            level: i,
            started_at: tau,
            slot_idx: j,
            pending: VecDeque::new(),
            init: Some(init),
            pair: Some(pair),
            n_set: n_new,
            budget_per_step,
            inst: None,
        });
        Ok(())
    }

    /// Advances all background jobs one tick; returns replacement edges
    /// surfaced by double-speed replays (the set R').
    fn advance_jobs(&mut self) -> Result<Vec<EdgeId>, ContractionError> {
        let mut r_prime = Vec::new();
        let tau = self.time;
        for i in 1..=(self.l + 1) {
            let Some(job) = self.jobs[i].as_mut() else { continue };
            let half = 1u64 << (job.level - 1).min(20);
            if let Some(mut init) = job.init.take() {
                let done = init.step(job.budget_per_step);
                let past_half = tau >= job.started_at + half;
                if done || past_half {
                    // the init must be complete by the half boundary
                    while !init.step(u64::MAX) {}
                    let inner = init.take();
                    job.inst = Some(DecContractedMsf {
                        pair: job.pair.take().expect("pair set at start"),
                        inner,
                        n_set: std::mem::take(&mut job.n_set),
                        last_change: None,
                        contractor_tag: Some((job.level, job.slot_idx)),
                    });
                } else {
                    job.init = Some(init);
                }
            }
            if let Some(inst) = job.inst.as_mut() {
                // double-speed catch-up replay
                for _ in 0..2 {
                    if let Some(e) = job.pending.pop_front() {
                        if let Some(f) = inst.delete_original(e)? {
                            r_prime.push(f);
                        }
                    }
                }
            }
        }
        Ok(r_prime)
    }

    /// Cleanup after an update: install finished periods, rotate slots,
    /// start new jobs, then place R u R' into a fresh level-0 instance.
    fn cleanup(&mut self, r: Vec<EdgeId>) -> Result<(), ContractionError> {
        let tau = self.time;
        let mut r: Vec<EdgeId> = r;
        for i in 1..=(self.l + 1) {
            let period = 1u64 << i.min(20);
            if tau % period != 0 {
                continue;
            }
            // install the finished job, if one is running
            if let Some(mut job) = self.jobs[i].take() {
                // finish any residual init and drain the pending replay
                let mut inst = match job.inst.take() {
                    Some(inst) => inst,
                    None => {
                        let mut init = job.init.take().expect("job has init or inst");
                        while !init.step(u64::MAX) {}
                        DecContractedMsf {
                            pair: job.pair.take().expect("pair set"),
                            inner: init.take(),
                            n_set: std::mem::take(&mut job.n_set),
                            last_change: None,
                            contractor_tag: Some((job.level, job.slot_idx)),
                        }
                    }
                };
                while let Some(e) = job.pending.pop_front() {
                    if let Some(f) = inst.delete_original(e)? {
                        // late replacements are still non-tree edges of G
                        // and must re-enter the level sets through R
                        r.push(f);
                    }
                }
                inst.n_set.retain(|&e| self.g.is_alive(e) && !self.tree.contains(&e));
                if i <= self.l {
                    let slot = self.free_slot_12(i)?;
                    self.slots[i][slot] = Some(inst);
                } else {
                    let old = self.slot_l0.take();
                    self.destroy_instance(old);
                    self.slot_l0 = Some(inst);
                }
            }
            // rotate level i-1: (3,4) <- (1,2); evicted instances free
            // their contractors
            let prev = i - 1;
            let old3 = self.slots[prev][2].take();
            self.destroy_instance(old3);
            let old4 = self.slots[prev][3].take();
            self.destroy_instance(old4);
            self.slots[prev][2] = self.slots[prev][0].take();
            self.slots[prev][3] = self.slots[prev][1].take();
            // start the next job for this level
            self.start_job(i, tau)?;
        }
        // level 0: fresh instance on R u R' every step
        let mut r0: BTreeSet<EdgeId> = r.into_iter().collect();
        r0.retain(|&e| self.g.is_alive(e) && !self.tree.contains(&e));
        let r0: Vec<EdgeId> = r0.into_iter().collect();
        let inst = self.build_instance(0, &r0)?;
        let slot = self.free_slot_12(0)?;
        self.slots[0][slot] = Some(inst);
        // contractor catch-up ticks
        for level in self.contractors.iter_mut() {
            for slot in level.iter_mut() {
                slot.tick(tau);
            }
        }
        Ok(())
    }

    /// Deletes one edge; the forest delta is returned.
    pub fn delete(&mut self, e: EdgeId) -> Result<MsfDelta, ContractionError> {
        if !self.g.is_alive(e) {
            return Err(ContractionError::DeadOrUnknownEdge(e));
        }
        self.time += 1;
        self.g.delete_edge(e).expect("checked alive");
        let was_tree = self.tree.contains(&e);
        let mut delta = MsfDelta::default();
        let mut candidates: Vec<EdgeId> = Vec::new();
        // feed the deletion to every instance and gather candidates
        let feed = |inst: &mut DecContractedMsf, out: &mut Vec<EdgeId>| -> Result<(), ContractionError> {
            if let Some(f) = inst.delete_original(e)? {
                out.push(f);
            }
            Ok(())
        };
        for row in self.slots.iter_mut() {
            for inst in row.iter_mut().flatten() {
                feed(inst, &mut candidates)?;
            }
        }
        if let Some(inst) = self.slot_l0.as_mut() {
            feed(inst, &mut candidates)?;
        }
        // background jobs buffer the deletion
        for job in self.jobs.iter_mut().flatten() {
            job.pending.push_back(e);
        }
        self.stats.candidates_last = candidates.len();

        #[allow(unused_assignments)]
        let mut r: Vec<EdgeId> = Vec::new();
        if was_tree {
            self.tree.remove(&e);
            self.forest.cut(e).expect("tree edge");
            self.broadcast(ForestOp::Cut { e });
            // the lightest candidate that actually reconnects F
            candidates.sort_by_key(|&f| self.g.edge(f).key);
            candidates.dedup();
            let mut replacement = None;
            for &f in &candidates {
                if !self.g.is_alive(f) || self.tree.contains(&f) {
                    continue;
                }
                let fr = self.g.edge(f);
                if !self.forest.connected(fr.u, fr.v) {
                    replacement = Some(f);
                    break;
                }
            }
            delta.removed.push(e);
            if let Some(f) = replacement {
                let fr = self.g.edge(f);
                self.forest.link(fr.u, fr.v, f, fr.key).expect("reconnects");
                self.tree.insert(f);
                self.nontree.remove(&f);
                self.broadcast(ForestOp::Link {
                    e: f,
                    u: fr.u,
                    v: fr.v,
                    key: fr.key,
                });
                delta.added.push(f);
                r = candidates.into_iter().filter(|&x| x != f).collect();
            } else {
                r = candidates;
            }
        } else {
            self.nontree.remove(&e);
            // instances that had promoted e locally may surface candidates;
            // they left those instances' non-tree sets and re-enter via R
            r = candidates;
        }
        let r_prime = self.advance_jobs()?;
        r.extend(r_prime);
        self.cleanup(r)?;
        Ok(delta)
    }

    /// Inserts a batch of at most B edges; returns (new edge ids, delta).
    pub fn insert_batch(
        &mut self,
        edges: &[(NodeId, NodeId, WKey)],
    ) -> Result<(Vec<EdgeId>, MsfDelta), ContractionError> {
        if edges.len() > self.b {
            return Err(ContractionError::BatchTooLarge {
                got: edges.len(),
                cap: self.b,
            });
        }
        self.time += 1;
        let mut ids = Vec::new();
        let mut delta = MsfDelta::default();
        #[allow(unused_assignments)]
        let mut r: Vec<EdgeId> = Vec::new();
        for &(u, v, key) in edges {
            let e = self
                .g
                .add_edge(u, v, key)
                .map_err(|g| ContractionError::Inner(g.to_string()))?;
            ids.push(e);
            if !self.forest.connected(u, v) {
                self.forest.link(u, v, e, key).expect("joins components");
                self.tree.insert(e);
                self.broadcast(ForestOp::Link { e, u, v, key });
                delta.added.push(e);
            } else {
                let f = self.forest.path_max(u, v).expect("connected");
                let fk = self.g.edge(f).key;
                if key < fk {
                    self.forest.cut(f).expect("path edge");
                    self.tree.remove(&f);
                    self.nontree.insert(f);
                    self.forest.link(u, v, e, key).expect("swap");
                    self.tree.insert(e);
                    self.broadcast(ForestOp::Cut { e: f });
                    self.broadcast(ForestOp::Link { e, u, v, key });
                    delta.removed.push(f);
                    delta.added.push(e);
                    r.push(f);
                } else {
                    self.nontree.insert(e);
                    r.push(e);
                }
            }
        }
        if self.nontree.len() > self.k {
            return Err(ContractionError::TooManyNonTree {
                got: self.nontree.len(),
                cap: self.k,
            });
        }
        let r_prime = self.advance_jobs()?;
        r.extend(r_prime);
        self.cleanup(r)?;
        Ok((ids, delta))
    }
}

/// Lifts a deletion-capacity-bounded decremental algorithm to unbounded
/// streams by phase rebuilding: at half capacity a fresh instance starts
/// initializing in the background (work spread across the remaining
/// steps), catches up at double speed and swaps in when the budget runs
/// out.
pub struct PhasedDecMsf {
    factory: Rc<dyn DecMsfFactory>,
    g: Graph,
    cur: Box<dyn DecMsf>,
    cap: Option<u64>,
    served: u64,
    bg: Option<BgInit>,
    extra_work: u64,
}

struct BgInit {
    init: Box<dyn DecMsfInit>,
    init_done: Option<Box<dyn DecMsf>>,
    pending: VecDeque<EdgeId>,
    budget_per_step: u64,
}

impl PhasedDecMsf {
    pub fn new(g: Graph, factory: Rc<dyn DecMsfFactory>) -> Self {
        let cap = factory.capacity(g.m());
        let mut init = factory.begin(g.clone());
        while !init.step(u64::MAX) {}
        let cur = init.take();
        PhasedDecMsf {
            factory,
            g,
            cur,
            cap,
            served: 0,
            bg: None,
            extra_work: 0,
        }
    }
}

impl DecMsf for PhasedDecMsf {
    fn delete(&mut self, e: EdgeId) -> Result<MsfDelta, ContractionError> {
        self.g
            .delete_edge(e)
            .map_err(|g| ContractionError::Inner(g.to_string()))?;
        self.served += 1;
        let delta = self.cur.delete(e)?;
        let Some(cap) = self.cap else {
            return Ok(delta);
        };
        // phase length 2T/3: an instance replays up to P/2 catch-up
        // deletions before serving P of its own, staying within T total
        let phase = (2 * cap.max(1) / 3).max(1);
        // schedule: background rebuild starts at half phase
        if self.served >= phase.div_ceil(2) && self.bg.is_none() {
            let init = self.factory.begin(self.g.clone());
            let steps_left = (phase.saturating_sub(self.served)).max(1);
            let budget = init.cost_estimate().div_ceil(steps_left) + 16;
            self.bg = Some(BgInit {
                init,
                init_done: None,
                pending: VecDeque::new(),
                budget_per_step: budget,
            });
        } else if let Some(bg) = self.bg.as_mut() {
            bg.pending.push_back(e);
        }
        if let Some(bg) = self.bg.as_mut() {
            if bg.init_done.is_none() {
                if bg.init.step(bg.budget_per_step) {
                    bg.init_done = Some(bg.init.take());
                }
            }
            if let Some(inst) = bg.init_done.as_mut() {
                for _ in 0..2 {
                    if let Some(d) = bg.pending.pop_front() {
                        inst.delete(d)?;
                        self.extra_work += 1;
                    }
                }
            }
        }
        if self.served >= phase {
            // swap in the background instance, draining any residue
            let mut bg = self
                .bg
                .take()
                .ok_or(ContractionError::PhaseError("no background instance at swap"))?;
            let mut inst = match bg.init_done {
                Some(i) => i,
                None => {
                    while !bg.init.step(u64::MAX) {}
                    bg.init.take()
                }
            };
            while let Some(d) = bg.pending.pop_front() {
                inst.delete(d)?;
                self.extra_work += 1;
            }
            self.cur = inst;
            self.served = 0;
        }
        Ok(delta)
    }

    fn forest_contains(&self, e: EdgeId) -> bool {
        self.cur.forest_contains(e)
    }

    fn forest_edges(&self) -> Vec<EdgeId> {
        self.cur.forest_edges()
    }

    fn work(&self) -> u64 {
        self.cur.work() + self.extra_work
    }
}

/// Factory adapter for the phase-rebuild wrapper.
pub struct PhasedFactory {
    pub inner: Rc<dyn DecMsfFactory>,
}

struct PhasedInit {
    g: Option<Graph>,
    inner: Rc<dyn DecMsfFactory>,
    cost: u64,
    warm: Option<Box<dyn DecMsfInit>>,
}

impl DecMsfInit for PhasedInit {
    fn step(&mut self, budget: u64) -> bool {
        if self.warm.is_none() {
            let g = self.g.as_ref().expect("graph retained");
            self.warm = Some(self.inner.begin(g.clone()));
        }
        self.warm.as_mut().unwrap().step(budget)
    }

    fn cost_estimate(&self) -> u64 {
        self.cost
    }

    fn take(&mut self) -> Box<dyn DecMsf> {
        let mut warm = self.warm.take().expect("init stepped to completion");
        let cur = warm.take();
        let g = self.g.take().expect("take once");
        let cap = self.inner.capacity(g.m());
        Box::new(PhasedDecMsf {
            factory: Rc::clone(&self.inner),
            g,
            cur,
            cap,
            served: 0,
            bg: None,
            extra_work: 0,
        })
    }
}

impl DecMsfFactory for PhasedFactory {
    fn capacity(&self, _m: usize) -> Option<u64> {
        None
    }

    fn begin(&self, g: Graph) -> Box<dyn DecMsfInit> {
        let cost = (g.m() as u64 + 1) * (crate::flow::log2_ceil(g.m() as u64 + 2) + 2);
        Box::new(PhasedInit {
            g: Some(g),
            inner: Rc::clone(&self.inner),
            cost,
            warm: None,
        })
    }
}

/// Wraps a deletion-bounded factory into an unbounded one.
pub fn restricted_from_decremental(inner: Rc<dyn DecMsfFactory>) -> Rc<dyn DecMsfFactory> {
    Rc::new(PhasedFactory { inner })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msf::kruskal;
    use crate::oracle::KruskalReplay;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn path4() -> Graph {
        Graph::from_weighted_edges(4, &[(0, 1, 1), (1, 2, 2), (2, 3, 3)]).unwrap()
    }

    #[test]
    fn connecting_paths_simple_path() {
        let g = path4();
        let f: HashSet<EdgeId> = [0, 1, 2].into_iter().collect();
        let cp = connecting_paths(&g, &f, &[0, 3]);
        assert_eq!(cp.paths.len(), 1);
        assert_eq!(cp.paths[0].endpoints, (0, 3));
        assert_eq!(cp.paths[0].edges.len(), 3);
    }

    #[test]
    fn connecting_paths_star_merges_through_center() {
        // star center 0 with leaves 1,2,3; terminals 1 and 2
        let g = Graph::from_weighted_edges(4, &[(0, 1, 1), (0, 2, 2), (0, 3, 3)]).unwrap();
        let f: HashSet<EdgeId> = [0, 1, 2].into_iter().collect();
        let cp = connecting_paths(&g, &f, &[1, 2]);
        // center has degree 2 in the Steiner tree, so one merged path
        assert_eq!(cp.paths.len(), 1);
        let (a, b) = cp.paths[0].endpoints;
        assert_eq!([a.min(b), a.max(b)], [1, 2]);
        assert_eq!(cp.paths[0].edges.len(), 2);
    }

    #[test]
    fn connecting_paths_spider_three_terminals() {
        let g = Graph::from_weighted_edges(4, &[(0, 1, 1), (0, 2, 2), (0, 3, 3)]).unwrap();
        let f: HashSet<EdgeId> = [0, 1, 2].into_iter().collect();
        let cp = connecting_paths(&g, &f, &[1, 2, 3]);
        // three paths meeting at the center, which is a legal non-terminal
        assert_eq!(cp.paths.len(), 3);
        for p in &cp.paths {
            assert_eq!(p.edges.len(), 1);
        }
    }

    #[test]
    fn connecting_paths_conditions_on_random_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.gen_range(4..40);
            let mut list = Vec::new();
            for v in 1..n {
                let u = rng.gen_range(0..v);
                list.push((u, v, list.len() as i64));
            }
            let g = Graph::from_weighted_edges(n, &list).unwrap();
            let f: HashSet<EdgeId> = g.alive_edge_ids().collect();
            let mut s: Vec<NodeId> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
            if s.len() < 2 {
                s = vec![0, n - 1];
            }
            let cp = connecting_paths(&g, &f, &s);
            // condition 1: edge-disjoint
            let mut used = HashSet::new();
            for p in &cp.paths {
                for &e in &p.edges {
                    assert!(used.insert(e), "paths share an edge");
                }
            }
            // condition 3: every terminal in a tree with >= 2 terminals is an endpoint
            let mut endpoint_count: HashMap<NodeId, usize> = HashMap::new();
            for p in &cp.paths {
                *endpoint_count.entry(p.endpoints.0).or_insert(0) += 1;
                *endpoint_count.entry(p.endpoints.1).or_insert(0) += 1;
            }
            for &t in &s {
                if s.len() >= 2 {
                    assert!(endpoint_count.contains_key(&t), "terminal {t} not an endpoint");
                }
            }
            // condition 4: non-terminal endpoints meet >= 3 paths
            let sset: HashSet<NodeId> = s.iter().copied().collect();
            for (&v, &c) in &endpoint_count {
                if !sset.contains(&v) {
                    assert!(c >= 3, "non-terminal endpoint {v} meets {c} < 3 paths");
                }
            }
            // uniqueness: recomputation gives the identical system
            let cp2 = connecting_paths(&g, &f, &s);
            assert_eq!(cp, cp2);
        }
    }

    #[test]
    fn contract_path_with_chord() {
        // path 0-1-2-3 weights 1,2,3 plus chord (0,3) weight 10
        let mut g = path4();
        let chord = g.add_edge(0, 3, WKey::of_rank(10, 3)).unwrap();
        let forest: HashSet<EdgeId> = [0, 1, 2].into_iter().collect();
        let pair = contract(&g, &forest, &[chord], &[0, 3]).unwrap();
        assert_eq!(pair.graph.m(), 2, "one non-tree edge + one super edge");
        // super edge weight is the path max (rank 3)
        let mut supers = 0;
        for e in pair.graph.alive_edge_ids() {
            if let CEdgeKind::Super(path) = &pair.kind[e] {
                supers += 1;
                assert_eq!(pair.graph.edge(e).key.rank, 3);
                assert_eq!(path.len(), 3);
            }
        }
        assert_eq!(supers, 1);
        // cover query: middle tree edge is covered by the super edge
        assert!(pair.cover.contains_key(&1));
    }

    #[test]
    fn contract_empty_sets() {
        let g = path4();
        let forest: HashSet<EdgeId> = [0, 1, 2].into_iter().collect();
        let pair = contract(&g, &forest, &[], &[]).unwrap();
        assert_eq!(pair.graph.m(), 0);
    }

    #[test]
    fn contract_missing_terminal_errors() {
        let mut g = path4();
        let chord = g.add_edge(0, 3, WKey::of_rank(10, 3)).unwrap();
        let forest: HashSet<EdgeId> = [0, 1, 2].into_iter().collect();
        assert!(matches!(
            contract(&g, &forest, &[chord], &[0]),
            Err(ContractionError::MissingTerminal(_))
        ));
    }

    #[test]
    fn contract_preserves_msf_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..60 {
            let n = rng.gen_range(6..50);
            let mut list = Vec::new();
            for v in 1..n {
                let u = rng.gen_range(0..v);
                list.push((u, v, list.len() as i64 * 3 + 1));
            }
            for _ in 0..rng.gen_range(0..10) {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                if u != v {
                    list.push((u, v, list.len() as i64 * 3 + 1));
                }
            }
            let g = Graph::from_weighted_edges(n, &list).unwrap();
            let forest: HashSet<EdgeId> = kruskal(&g).into_iter().collect();
            let nontree: Vec<EdgeId> = g.alive_edge_ids().filter(|e| !forest.contains(e)).collect();
            let mut s: BTreeSet<NodeId> = BTreeSet::new();
            for &e in &nontree {
                s.insert(g.edge(e).u);
                s.insert(g.edge(e).v);
            }
            // a few extra terminals
            for _ in 0..3 {
                s.insert(rng.gen_range(0..n));
            }
            let sv: Vec<NodeId> = s.iter().copied().collect();
            let pair = contract(&g, &forest, &nontree, &sv).unwrap();
            // size bound |E(G')| <= |N| + 2|S|
            assert!(pair.graph.m() <= nontree.len() + 2 * sv.len());
            // msf(G') = F' when F = msf(G)
            let msf_local: HashSet<EdgeId> = kruskal(&pair.graph).into_iter().collect();
            assert_eq!(msf_local, pair.forest_local, "contracted forest is the contracted MSF");
        }
    }

    #[test]
    fn two_phase_contractor_cover_queries() {
        let mut g = path4();
        let chord = g.add_edge(0, 3, WKey::of_rank(10, 3)).unwrap();
        let mut c = TwoPhaseContractor::new();
        assert!(c.cover_query(0).is_err(), "phase-1 query is a state error");
        for e in [0, 1, 2] {
            let er = g.edge(e);
            c.apply(&ForestOp::Link {
                e,
                u: er.u,
                v: er.v,
                key: er.key,
            })
            .unwrap();
        }
        c.freeze(&g, &[chord]).unwrap();
        assert!(c.cover_query(1).unwrap().is_some());
        assert!(c.apply(&ForestOp::Cut { e: 0 }).is_err(), "phase-2 refuses updates");
    }

    #[test]
    fn dangling_branch_not_covered() {
        // path 0-1-2-3 with chord (0,2): edge (2,3) dangles off the paths
        let mut g = path4();
        let chord = g.add_edge(0, 2, WKey::of_rank(10, 3)).unwrap();
        let mut c = TwoPhaseContractor::new();
        for e in [0, 1, 2] {
            let er = g.edge(e);
            c.apply(&ForestOp::Link {
                e,
                u: er.u,
                v: er.v,
                key: er.key,
            })
            .unwrap();
        }
        c.freeze(&g, &[chord]).unwrap();
        assert!(c.cover_query(2).unwrap().is_none());
        assert!(c.cover_query(0).unwrap().is_some());
    }

    fn random_graph_with_k_nontree(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Graph {
        let mut list = Vec::new();
        for v in 1..n {
            let u = rng.gen_range(0..v);
            list.push((u, v, 0));
        }
        for _ in 0..k {
            loop {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                if u != v {
                    list.push((u, v, 0));
                    break;
                }
            }
        }
        let mut ranks: Vec<i64> = (1..=list.len() as i64).collect();
        ranks.shuffle(rng);
        let list: Vec<(usize, usize, i64)> = list
            .iter()
            .zip(ranks)
            .map(|(&(u, v, _), r)| (u, v, r))
            .collect();
        Graph::from_weighted_edges(n, &list).unwrap()
    }

    #[test]
    fn few_nontree_init_without_nontree_edges() {
        let g = path4();
        let few = FewNonTreeMsf::new(g, 4, 16, 0.01, Rc::new(ExactFactory)).unwrap();
        assert_eq!(few.nontree_count(), 0);
        assert_eq!(few.forest_edge_set().len(), 3);
    }

    #[test]
    fn few_nontree_batch_of_heavier_parallels() {
        let g = path4();
        let mut few = FewNonTreeMsf::new(g, 8, 16, 0.01, Rc::new(ExactFactory)).unwrap();
        let batch: Vec<(usize, usize, WKey)> = (0..3)
            .map(|i| (i, i + 1, WKey::of_rank(100 + i as i64, 10 + i as u64)))
            .collect();
        let (_, delta) = few.insert_batch(&batch).unwrap();
        assert!(delta.is_empty(), "heavier parallels never enter the forest");
        assert_eq!(few.nontree_count(), 3);
        few.check_level_bounds().unwrap();
    }

    #[test]
    fn few_nontree_mixed_stream_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 48;
        let k = 16;
        let b = 8 * 2;
        let g = random_graph_with_k_nontree(n, 8, &mut rng);
        let mut few = FewNonTreeMsf::new(g.clone(), k, b, 0.01, Rc::new(ExactFactory)).unwrap();
        let mut oracle = KruskalReplay::new(g);
        let mut next_rank = 10_000i64;
        for step in 0..200 {
            let do_insert = rng.gen_bool(0.35) && few.nontree_count() + 4 < k;
            if do_insert {
                let cnt = rng.gen_range(1..4.min(b));
                let mut batch = Vec::new();
                for _ in 0..cnt {
                    let u = rng.gen_range(0..n);
                    let mut v = rng.gen_range(0..n);
                    while v == u {
                        v = rng.gen_range(0..n);
                    }
                    next_rank += 1;
                    batch.push((u, v, WKey::of_rank(next_rank, oracle.graph.edge_slots() as u64 + batch.len() as u64)));
                }
                let (ids, _) = few.insert_batch(&batch).unwrap();
                for (i, &(u, v, key)) in batch.iter().enumerate() {
                    let oid = oracle.insert(u, v, key);
                    assert_eq!(ids[i], oid);
                }
            } else {
                let alive: Vec<EdgeId> = oracle.graph.alive_edge_ids().collect();
                if alive.is_empty() {
                    break;
                }
                let e = alive[rng.gen_range(0..alive.len())];
                few.delete(e).unwrap();
                oracle.delete(e);
            }
            let got: HashSet<EdgeId> = few.forest_edge_set().clone();
            assert_eq!(got, oracle.forest(), "diverged at step {step}");
            few.check_level_bounds().unwrap();
        }
    }

    /// Deletion-capacity-bounded stub that fails hard past its budget.
    struct BoundedStub {
        inner: MultigraphMsf,
        left: u64,
    }

    impl DecMsf for BoundedStub {
        fn delete(&mut self, e: EdgeId) -> Result<MsfDelta, ContractionError> {
            if self.left == 0 {
                return Err(ContractionError::Inner("stub capacity exhausted".into()));
            }
            self.left -= 1;
            DecMsf::delete(&mut self.inner, e)
        }

        fn forest_contains(&self, e: EdgeId) -> bool {
            self.inner.forest_edges().contains(&e)
        }

        fn forest_edges(&self) -> Vec<EdgeId> {
            DecMsf::forest_edges(&self.inner)
        }

        fn work(&self) -> u64 {
            self.inner.meter.total()
        }
    }

    struct BoundedInit {
        job: MsfInitJob,
        cap: u64,
    }

    impl DecMsfInit for BoundedInit {
        fn step(&mut self, budget: u64) -> bool {
            self.job.step(budget)
        }

        fn cost_estimate(&self) -> u64 {
            self.job.cost_estimate()
        }

        fn take(&mut self) -> Box<dyn DecMsf> {
            Box::new(BoundedStub {
                inner: self.job.take(),
                left: self.cap,
            })
        }
    }

    struct BoundedFactory {
        cap: u64,
    }

    impl DecMsfFactory for BoundedFactory {
        fn capacity(&self, _m: usize) -> Option<u64> {
            Some(self.cap)
        }

        fn begin(&self, g: Graph) -> Box<dyn DecMsfInit> {
            Box::new(BoundedInit {
                job: MsfInitJob::new(g),
                cap: self.cap,
            })
        }
    }

    #[test]
    fn phased_wrapper_survives_past_capacity() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let n = 40;
        let g = random_graph_with_k_nontree(n, 30, &mut rng);
        let t_cap = 10u64;
        let wrapped = restricted_from_decremental(Rc::new(BoundedFactory { cap: t_cap }));
        let mut init = wrapped.begin(g.clone());
        while !init.step(u64::MAX) {}
        let mut alg = init.take();
        let mut oracle = KruskalReplay::new(g);
        // 5T deletions with oracle equality throughout
        for _ in 0..(5 * t_cap) {
            let alive: Vec<EdgeId> = oracle.graph.alive_edge_ids().collect();
            if alive.is_empty() {
                break;
            }
            let e = alive[rng.gen_range(0..alive.len())];
            alg.delete(e).unwrap();
            oracle.delete(e);
            let got: HashSet<EdgeId> = alg.forest_edges().into_iter().collect();
            assert_eq!(got, oracle.forest());
        }
    }

    #[test]
    fn phased_wrapper_passthrough_without_deletions() {
        let g = path4();
        let wrapped = restricted_from_decremental(Rc::new(BoundedFactory { cap: 100 }));
        let mut init = wrapped.begin(g);
        while !init.step(u64::MAX) {}
        let alg = init.take();
        assert_eq!(alg.forest_edges(), vec![0, 1, 2]);
    }
}
