//! Local push-relabel flow routines: Unit Flow, Extended Unit Flow,
//! Excess Scaling Flow and Almost Flow. Either all supply is absorbed, or
//! a low-conductance level cut is returned together with the preflow.
//!
//! All arithmetic is exact integer; every routine publishes the congestion
//! and cut bounds it actually enforces so callers and tests check against
//! declared values.

use std::collections::{BTreeMap, VecDeque};

use num_rational::Ratio;

use crate::graph::{EdgeId, Frac, Graph, NodeId};

pub type BigFrac = Ratio<i128>;

pub fn to_big(f: Frac) -> BigFrac {
    BigFrac::new(*f.numer() as i128, *f.denom() as i128)
}

pub fn log2_ceil(x: u64) -> u64 {
    if x <= 1 {
        return 0;
    }
    64 - (x - 1).leading_zeros() as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowError {
    SupplyTooDense { node: NodeId, supply: u64, cap: u64 },
    IsolatedSupply(NodeId),
    SupplyExceedsSinks { supply: u64, sinks: u64 },
    SinkAboveDegree(NodeId),
    BadParameter(String),
    WorkLimit,
    /// level sweep found no qualifying cut; indicates a broken invariant
    NoLevelCut,
}

impl std::fmt::Display for FlowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FlowError::SupplyTooDense { node, supply, cap } => {
                write!(f, "supply {supply} at node {node} exceeds F*deg = {cap}")
            }
            FlowError::IsolatedSupply(v) => write!(f, "isolated node {v} has positive supply"),
            FlowError::SupplyExceedsSinks { supply, sinks } => {
                write!(f, "total supply {supply} exceeds total sink capacity {sinks}")
            }
            FlowError::SinkAboveDegree(v) => write!(f, "sink capacity above degree at node {v}"),
            FlowError::BadParameter(s) => write!(f, "bad parameter: {s}"),
            FlowError::WorkLimit => write!(f, "work limit exceeded"),
            FlowError::NoLevelCut => write!(f, "no qualifying level cut found"),
        }
    }
}

impl std::error::Error for FlowError {}

/// Sink function in compact form: only nodes with T(v) < deg(v) are listed,
/// every other node absorbs up to its degree.
#[derive(Clone, Debug, Default)]
pub struct SinkFn {
    below_deg: BTreeMap<NodeId, u64>,
}

impl SinkFn {
    pub fn all_degree() -> Self {
        SinkFn::default()
    }

    pub fn from_map(m: BTreeMap<NodeId, u64>) -> Self {
        SinkFn { below_deg: m }
    }

    pub fn value(&self, g: &Graph, v: NodeId) -> u64 {
        self.below_deg.get(&v).copied().unwrap_or_else(|| g.deg(v))
    }

    pub fn artificial(&self, g: &Graph, v: NodeId) -> u64 {
        g.deg(v) - self.value(g, v)
    }

    pub fn total(&self, g: &Graph) -> u64 {
        let mut t = g.total_volume();
        for (&v, &tv) in &self.below_deg {
            t -= g.deg(v) - tv;
        }
        t
    }

    pub fn is_all_degree(&self, g: &Graph) -> bool {
        self.below_deg.iter().all(|(&v, &tv)| tv == g.deg(v))
    }

    pub fn validate(&self, g: &Graph) -> Result<(), FlowError> {
        for (&v, &tv) in &self.below_deg {
            if v >= g.n() || tv > g.deg(v) {
                return Err(FlowError::SinkAboveDegree(v));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = (NodeId, u64)> + '_ {
        self.below_deg.iter().map(|(&v, &t)| (v, t))
    }
}

/// Flow instance: sparse integer supply, compact sink function and the
/// height / supply-density parameters.
#[derive(Clone, Debug)]
pub struct FlowInstance<'g> {
    pub graph: &'g Graph,
    pub supply: BTreeMap<NodeId, u64>,
    pub sink: SinkFn,
    pub height: u64,
    pub density: u64,
}

impl<'g> FlowInstance<'g> {
    pub fn total_supply(&self) -> u64 {
        self.supply.values().sum()
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if self.height < 1 || self.density < 1 {
            return Err(FlowError::BadParameter("h and F must be >= 1".into()));
        }
        self.sink.validate(self.graph)?;
        for (&v, &d) in &self.supply {
            if d == 0 {
                continue;
            }
            if v >= self.graph.n() {
                return Err(FlowError::BadParameter(format!("unknown supply node {v}")));
            }
            let deg = self.graph.deg(v);
            if deg == 0 {
                return Err(FlowError::IsolatedSupply(v));
            }
            if d > self.density * deg {
                return Err(FlowError::SupplyTooDense {
                    node: v,
                    supply: d,
                    cap: self.density * deg,
                });
            }
        }
        let supply = self.total_supply();
        let sinks = self.sink.total(self.graph);
        if supply > sinks {
            return Err(FlowError::SupplyExceedsSinks { supply, sinks });
        }
        Ok(())
    }
}

/// Integer preflow stored per edge, oriented from `edge.u` to `edge.v`.
/// The antisymmetric node-pair map of the contracts is derived by summing
/// parallel edges.
#[derive(Clone, Debug, Default)]
pub struct Preflow {
    pub edge_flow: BTreeMap<EdgeId, i64>,
}

impl Preflow {
    /// max over edges of |f_e| (per-edge congestion).
    pub fn congestion(&self) -> u64 {
        self.edge_flow.values().map(|f| f.unsigned_abs()).max().unwrap_or(0)
    }

    /// Antisymmetric map keyed by ordered pair (u, v) with u < v.
    pub fn pair_flow(&self, g: &Graph) -> BTreeMap<(NodeId, NodeId), i64> {
        let mut out = BTreeMap::new();
        for (&e, &f) in &self.edge_flow {
            let er = g.edge(e);
            let (a, b, s) = if er.u < er.v { (er.u, er.v, f) } else { (er.v, er.u, -f) };
            *out.entry((a, b)).or_insert(0) += s;
        }
        out.retain(|_, f| *f != 0);
        out
    }

    /// Net outflow of v.
    pub fn outflow(&self, g: &Graph, v: NodeId) -> i64 {
        let mut s = 0i64;
        for (&e, &f) in &self.edge_flow {
            let er = g.edge(e);
            if er.u == v {
                s += f;
            } else if er.v == v {
                s -= f;
            }
        }
        s
    }

    /// Supply ending at each node: f(v) = delta(v) + inflow(v); dense vector.
    pub fn ending_supply(&self, g: &Graph, delta: &BTreeMap<NodeId, u64>) -> Vec<i64> {
        let mut fv = vec![0i64; g.n()];
        for (&v, &d) in delta {
            fv[v] += d as i64;
        }
        for (&e, &f) in &self.edge_flow {
            let er = g.edge(e);
            fv[er.u] -= f;
            fv[er.v] += f;
        }
        fv
    }
}

/// Case-2 certificate: the cut together with the published bounds it is
/// guaranteed to satisfy.
#[derive(Clone, Debug)]
pub struct CutCert {
    pub nodes: Vec<NodeId>,
    /// published upper bound on the cut conductance
    pub conductance_bound: BigFrac,
    /// published lower bound on vol(S)
    pub volume_lb: u64,
}

#[derive(Clone, Debug)]
pub struct FlowOutcome {
    pub preflow: Preflow,
    pub total_excess: u64,
    pub cut: Option<CutCert>,
    /// published per-edge congestion bound enforced by the routine
    pub congestion_bound: u64,
    /// push-relabel work units spent
    pub work: u64,
    /// scaling rounds (excess scaling / almost flow only, else 1)
    pub rounds: u64,
    /// per-round absorbed supply, for instrumented almost-flow runs
    pub round_absorbs: Vec<BTreeMap<NodeId, u64>>,
    /// published bound on the number of rounds
    pub round_bound: u64,
}

/// Raw push-relabel core: sinks implicitly equal degrees (callers wrap
/// general sinks with artificial supply). Lowest-label active vertex with
/// FIFO within a label bucket; per-node current-edge iterators; labels are
/// capped at `levels`. Receiving nodes are capped at `density * deg`.
/// The state holds no graph borrow so callers can suspend and resume it
/// against an owned graph in budgeted steps.
pub(crate) struct PushRelabelState {
    fv: Vec<i64>,
    label: Vec<u64>,
    current: Vec<usize>,
    edge_flow: BTreeMap<EdgeId, i64>,
    buckets: Vec<VecDeque<NodeId>>,
    lowest: usize,
    edge_cap: i64,
    density: u64,
    levels: u64,
    pub(crate) work: u64,
}

struct RawOutcome {
    preflow: Preflow,
    fv: Vec<i64>,
    label: Vec<u64>,
    work: u64,
}

impl PushRelabelState {
    pub(crate) fn new(
        g: &Graph,
        delta: &BTreeMap<NodeId, u64>,
        density: u64,
        edge_cap: u64,
        levels: u64,
    ) -> Self {
        let mut fv = vec![0i64; g.n()];
        for (&v, &d) in delta {
            fv[v] = d as i64;
        }
        let mut pr = PushRelabelState {
            fv,
            label: vec![0; g.n()],
            current: vec![0; g.n()],
            edge_flow: BTreeMap::new(),
            buckets: vec![VecDeque::new()],
            lowest: 0,
            edge_cap: edge_cap as i64,
            density,
            levels,
            work: 0,
        };
        for (&v, _) in delta {
            if pr.fv[v] > g.deg(v) as i64 {
                pr.buckets[0].push_back(v);
            }
        }
        pr
    }

    #[inline]
    fn excess(&self, g: &Graph, v: NodeId) -> i64 {
        (self.fv[v] - g.deg(v) as i64).max(0)
    }

    #[inline]
    fn active(&self, g: &Graph, v: NodeId) -> bool {
        self.excess(g, v) > 0 && self.label[v] < self.levels
    }

    fn enqueue(&mut self, v: NodeId) {
        let l = self.label[v] as usize;
        while self.buckets.len() <= l {
            self.buckets.push(VecDeque::new());
        }
        self.buckets[l].push_back(v);
        if l < self.lowest {
            self.lowest = l;
        }
    }

    fn flow_from(&self, g: &Graph, v: NodeId, e: EdgeId) -> i64 {
        let f = self.edge_flow.get(&e).copied().unwrap_or(0);
        if g.edge(e).u == v {
            f
        } else {
            -f
        }
    }

    fn add_flow(&mut self, g: &Graph, v: NodeId, e: EdgeId, amount: i64) {
        let signed = if g.edge(e).u == v { amount } else { -amount };
        let entry = self.edge_flow.entry(e).or_insert(0);
        *entry += signed;
        if *entry == 0 {
            self.edge_flow.remove(&e);
        }
    }

    /// Runs up to `budget` push/relabel steps; true when the queue drained.
    pub(crate) fn advance(&mut self, g: &Graph, budget: u64) -> bool {
        let mut spent = 0u64;
        loop {
            // next lowest active vertex
            while self.lowest < self.buckets.len() && self.buckets[self.lowest].is_empty() {
                self.lowest += 1;
            }
            if self.lowest >= self.buckets.len() {
                return true;
            }
            if spent >= budget {
                return false;
            }
            let v = self.buckets[self.lowest].pop_front().unwrap();
            if !self.active(g, v) || self.label[v] as usize != self.lowest {
                continue;
            }
            spent += 1;
            self.work += 1;
            // Push/Relabel(v): inspect current(v)
            let adj_len = g.adj_len(v);
            if self.current[v] >= adj_len {
                self.current[v] = 0;
            }
            let mut pushed = false;
            if adj_len > 0 {
                if let Some((u, e)) = g.adj_entry(v, self.current[v]) {
                    let residual = self.edge_cap - self.flow_from(g, v, e);
                    let room = self.density as i64 * g.deg(u) as i64 - self.fv[u];
                    if self.label[v] == self.label[u] + 1 && residual > 0 && room > 0 {
                        let psi = self.excess(g, v).min(residual).min(room);
                        debug_assert!(psi > 0);
                        self.add_flow(g, v, e, psi);
                        self.fv[v] -= psi;
                        self.fv[u] += psi;
                        pushed = true;
                        if self.active(g, u) {
                            self.enqueue(u);
                        }
                        if self.active(g, v) {
                            self.enqueue(v);
                        }
                    }
                }
            }
            if !pushed {
                if self.current[v] + 1 < adj_len {
                    self.current[v] += 1;
                    self.enqueue(v);
                } else {
                    // relabel
                    self.current[v] = 0;
                    self.label[v] += 1;
                    if self.label[v] < self.levels {
                        self.enqueue(v);
                    }
                }
            }
        }
    }

    fn run(mut self, g: &Graph, work_limit: u64) -> Result<RawOutcome, FlowError> {
        loop {
            let chunk = 4096.min(work_limit.saturating_sub(self.work).max(1));
            if self.advance(g, chunk) {
                break;
            }
            if self.work >= work_limit {
                return Err(FlowError::WorkLimit);
            }
        }
        Ok(RawOutcome {
            preflow: Preflow {
                edge_flow: self.edge_flow.clone(),
            },
            fv: self.fv,
            label: self.label,
            work: self.work,
        })
    }

    pub(crate) fn total_excess(&self, g: &Graph) -> u64 {
        (0..g.n()).map(|v| self.excess(g, v) as u64).sum()
    }

    pub(crate) fn into_parts(self) -> (Preflow, Vec<i64>, Vec<u64>, u64) {
        (
            Preflow {
                edge_flow: self.edge_flow,
            },
            self.fv,
            self.label,
            self.work,
        )
    }
}

/// Level sweep: the lowest label L >= 1 whose level set {v : label >= L}
/// is a proper cut with conductance at most `target`.
pub(crate) fn sweep_level_cut(g: &Graph, label: &[u64], target: BigFrac) -> Option<Vec<NodeId>> {
    let mut occupied: Vec<u64> = label.iter().copied().filter(|&l| l > 0).collect();
    occupied.sort_unstable();
    occupied.dedup();
    if occupied.is_empty() {
        return None;
    }
    // incremental volume / crossing while descending through label groups
    let mut by_label: BTreeMap<u64, Vec<NodeId>> = BTreeMap::new();
    for (v, &l) in label.iter().enumerate() {
        if l > 0 {
            by_label.entry(l).or_default().push(v);
        }
    }
    let total = g.total_volume() as i64;
    let mut in_set = vec![false; g.n()];
    let mut vol = 0i64;
    let mut crossing = 0i64;
    let mut stats: Vec<(u64, i64, i64)> = Vec::new(); // (level, vol, crossing) for S_{>=level}
    for (&l, nodes) in by_label.iter().rev() {
        for &v in nodes {
            vol += g.deg(v) as i64;
            for (w, _) in g.neighbors(v) {
                if in_set[w] {
                    crossing -= 1;
                } else {
                    crossing += 1;
                }
            }
            in_set[v] = true;
        }
        stats.push((l, vol, crossing));
    }
    // lowest qualifying level first
    for &(l, vol, crossing) in stats.iter().rev() {
        let small = vol.min(total - vol);
        if small <= 0 || vol == total {
            continue;
        }
        let phi = BigFrac::new(crossing as i128, small as i128);
        if phi <= target {
            let cut: Vec<NodeId> = (0..g.n()).filter(|&v| label[v] >= l).collect();
            if cut.len() < g.n() {
                return Some(cut);
            }
        }
    }
    None
}

const UNIT_FLOW_LOG_FACTOR: u64 = 41;

struct WrappedParams {
    density: u64,
    edge_cap: u64,
    levels: u64,
    target: BigFrac,
}

/// Parameter mapping for the simplified unit flow: label cap
/// 41 * h * ceil(log2(2m)) and edge capacity 2hF', so the level-cut bound
/// 20 log(2m)/h' + F'/U stays strictly below 1/h.
fn unit_flow_params(g: &Graph, h: u64, density: u64) -> WrappedParams {
    let m = g.m().max(1) as u64;
    let l2 = log2_ceil(2 * m).max(1);
    // heights beyond 2m+1 cannot change which cuts qualify: any nonzero
    // conductance is at least 1/(2m), so clamp for tractable label ranges
    let h_eff = h.min(2 * m + 1);
    let levels = UNIT_FLOW_LOG_FACTOR * h_eff * l2;
    let edge_cap = 2 * h_eff * density;
    let target = BigFrac::new((20 * l2) as i128, levels as i128)
        + BigFrac::new(density as i128, edge_cap as i128);
    WrappedParams {
        density,
        edge_cap,
        levels,
        target,
    }
}

fn effective_density(g: &Graph, f: u64) -> u64 {
    f.min(2 * g.m() as u64 + 2)
}

fn run_wrapped(
    g: &Graph,
    delta_wrapped: &BTreeMap<NodeId, u64>,
    params: &WrappedParams,
    work_limit: u64,
) -> Result<(RawOutcome, Option<Vec<NodeId>>), FlowError> {
    let pr = PushRelabelState::new(g, delta_wrapped, params.density, params.edge_cap, params.levels);
    let raw = pr.run(g, work_limit)?;
    let excess: i64 = (0..g.n()).map(|v| (raw.fv[v] - g.deg(v) as i64).max(0)).sum();
    let cut = if excess > 0 {
        match sweep_level_cut(g, &raw.label, params.target) {
            Some(c) => Some(c),
            None => return Err(FlowError::NoLevelCut),
        }
    } else {
        None
    };
    Ok((raw, cut))
}

fn outcome_from_raw(
    g: &Graph,
    raw: RawOutcome,
    cut_nodes: Option<Vec<NodeId>>,
    density_eff: u64,
    params: &WrappedParams,
) -> FlowOutcome {
    // excess w.r.t. the original (delta, T) equals the wrapped excess
    let mut total_excess = 0u64;
    for v in 0..g.n() {
        total_excess += (raw.fv[v] - g.deg(v) as i64).max(0) as u64;
    }
    let cut = cut_nodes.map(|nodes| {
        let volume_lb = total_excess.div_ceil(density_eff.max(1));
        CutCert {
            nodes,
            conductance_bound: params.target,
            volume_lb,
        }
    });
    FlowOutcome {
        preflow: raw.preflow,
        total_excess,
        cut,
        congestion_bound: params.edge_cap,
        work: raw.work,
        rounds: 1,
        round_absorbs: Vec::new(),
        round_bound: 1,
    }
}

/// Unit Flow: requires T(v) = deg(v) for all v. Returns a source-feasible
/// preflow with congestion at most 2hF; either a flow, or a cut S with
/// conductance below 1/h, excess at most (F-1)deg(v) on S and zero off S.
pub fn unit_flow(inst: &FlowInstance) -> Result<FlowOutcome, FlowError> {
    if !inst.sink.is_all_degree(inst.graph) {
        return Err(FlowError::BadParameter(
            "unit flow requires T(v) = deg(v) everywhere".into(),
        ));
    }
    inst.validate()?;
    let density = effective_density(inst.graph, inst.density);
    let params = unit_flow_params(inst.graph, inst.height, density);
    let (raw, cut) = run_wrapped(inst.graph, &inst.supply, &params, u64::MAX)?;
    Ok(outcome_from_raw(inst.graph, raw, cut, density, &params))
}

/// Extended Unit Flow: general sink functions. Wraps the instance with
/// artificial supply deg(v) - T(v) per node and one extra unit of density,
/// per the construction behind the main flow theorem.
pub fn extended_unit_flow(inst: &FlowInstance) -> Result<FlowOutcome, FlowError> {
    extended_unit_flow_limited(inst, u64::MAX)
}

pub fn extended_unit_flow_limited(inst: &FlowInstance, work_limit: u64) -> Result<FlowOutcome, FlowError> {
    let mut driver = ExtendedDriver::new(inst)?;
    loop {
        if driver.advance(inst.graph, 4096) {
            break;
        }
        if driver.work() >= work_limit {
            return Err(FlowError::WorkLimit);
        }
    }
    driver.finish(inst.graph)
}

/// Resumable extended unit flow: the push-relabel state can be advanced in
/// budgeted steps against the caller-owned graph and concluded on demand.
pub(crate) struct ExtendedDriver {
    state: PushRelabelState,
    params: WrappedParams,
    density_vol: u64,
}

impl ExtendedDriver {
    pub(crate) fn new(inst: &FlowInstance) -> Result<Self, FlowError> {
        inst.validate()?;
        let g = inst.graph;
        let mut wrapped = inst.supply.clone();
        let mut any_artificial = false;
        for (v, t) in inst.sink.entries() {
            let bar = g.deg(v) - t;
            if bar > 0 {
                *wrapped.entry(v).or_insert(0) += bar;
                any_artificial = true;
            }
        }
        let density = effective_density(g, inst.density) + if any_artificial { 1 } else { 0 };
        let params = unit_flow_params(g, inst.height, density);
        let state = PushRelabelState::new(g, &wrapped, params.density, params.edge_cap, params.levels);
        Ok(ExtendedDriver {
            state,
            params,
            density_vol: effective_density(g, inst.density).max(1),
        })
    }

    pub(crate) fn advance(&mut self, g: &Graph, budget: u64) -> bool {
        self.state.advance(g, budget)
    }

    pub(crate) fn work(&self) -> u64 {
        self.state.work
    }

    pub(crate) fn finish(self, g: &Graph) -> Result<FlowOutcome, FlowError> {
        let excess = self.state.total_excess(g);
        let (preflow, fv, label, work) = self.state.into_parts();
        let cut = if excess > 0 {
            match sweep_level_cut(g, &label, self.params.target) {
                Some(c) => Some(c),
                None => return Err(FlowError::NoLevelCut),
            }
        } else {
            None
        };
        let raw = RawOutcome {
            preflow,
            fv,
            label,
            work,
        };
        let mut out = outcome_from_raw(g, raw, cut, self.density_vol, &self.params);
        // the volume bound divides by the instance density F, not the wrapped F+1
        if let Some(c) = &mut out.cut {
            c.volume_lb = out.total_excess.div_ceil(self.density_vol);
        }
        Ok(out)
    }
}

/// Outcome checker: recomputes everything from the graph and the returned
/// preflow, independent of the implementation path.
pub fn check_outcome(inst: &FlowInstance, out: &FlowOutcome) -> Result<(), String> {
    let g = inst.graph;
    // support on alive edges and per-edge congestion
    for (&e, &f) in &out.preflow.edge_flow {
        if !g.is_alive(e) {
            return Err(format!("flow on dead/unknown edge {e}"));
        }
        if f.unsigned_abs() > out.congestion_bound {
            return Err(format!(
                "edge {e} carries {f}, above published congestion bound {}",
                out.congestion_bound
            ));
        }
    }
    // source feasibility: net outflow at most delta(v)
    let mut outflow = vec![0i64; g.n()];
    for (&e, &f) in &out.preflow.edge_flow {
        let er = g.edge(e);
        outflow[er.u] += f;
        outflow[er.v] -= f;
    }
    for v in 0..g.n() {
        let d = inst.supply.get(&v).copied().unwrap_or(0) as i64;
        if outflow[v] > d {
            return Err(format!("node {v} ships {} > supply {d}", outflow[v]));
        }
    }
    // total supply identity: sum of excess + absorbed equals |delta|
    let fv = out.preflow.ending_supply(g, &inst.supply);
    let mut tot_ex = 0i64;
    let mut tot_ab = 0i64;
    for v in 0..g.n() {
        let t = inst.sink.value(g, v) as i64;
        tot_ex += (fv[v] - t).max(0);
        tot_ab += fv[v].min(t);
    }
    let total = inst.total_supply() as i64;
    if tot_ex + tot_ab != total {
        return Err(format!(
            "supply identity broken: ex {tot_ex} + ab {tot_ab} != |delta| {total}"
        ));
    }
    if tot_ex as u64 != out.total_excess {
        return Err(format!(
            "reported excess {} differs from recomputed {tot_ex}",
            out.total_excess
        ));
    }
    if let Some(cut) = &out.cut {
        if cut.nodes.is_empty() || cut.nodes.len() >= g.n() {
            return Err("cut is empty or full".into());
        }
        let phi = g.conductance(&cut.nodes).map_err(|e| e.to_string())?;
        if to_big(phi) > cut.conductance_bound {
            return Err(format!(
                "cut conductance {phi} above published bound {}",
                cut.conductance_bound
            ));
        }
        let vol = g.volume(&cut.nodes).map_err(|e| e.to_string())?;
        if vol < cut.volume_lb {
            return Err(format!("cut volume {vol} below published bound {}", cut.volume_lb));
        }
    }
    Ok(())
}

fn mu0_for(f: u64) -> u64 {
    // largest power of two mu with 2*mu < F; then F/4 <= mu < F/2
    let mut mu = 1u64;
    while 2 * (mu << 1) < f {
        mu <<= 1;
    }
    debug_assert!(4 * mu >= f && 2 * mu < f);
    mu
}

/// Excess Scaling Flow: scaling rounds of the wrapped unit flow with
/// density 4 on floored supplies. Returns either a preflow with excess at
/// most tau * |delta| (congestion bound U * F), or a cut with the published
/// conductance bound 20 log(2m)/h + w_eff/U and volume at least
/// tau * |delta| / (4 mu_j log m).
pub fn excess_scaling_flow(
    g: &Graph,
    f_density: u64,
    delta: &BTreeMap<NodeId, u64>,
    sink: &SinkFn,
    tau: Frac,
    edge_cap: u64,
    height: u64,
) -> Result<FlowOutcome, FlowError> {
    if tau <= Frac::new(0, 1) || tau >= Frac::new(1, 1) {
        return Err(FlowError::BadParameter(format!("tau = {tau} outside (0,1)")));
    }
    let m = g.m().max(1) as u64;
    if height < log2_ceil(m) {
        return Err(FlowError::BadParameter(format!(
            "h = {height} below log2(m) = {}",
            log2_ceil(m)
        )));
    }
    if edge_cap == 0 {
        return Err(FlowError::BadParameter("U must be positive".into()));
    }
    // F < 4 leaves mu0 undefined; normalize and record via the density used
    let f_norm = f_density.max(4);
    let inst0 = FlowInstance {
        graph: g,
        supply: delta.clone(),
        sink: sink.clone(),
        height: 1,
        density: f_norm,
    };
    inst0.validate()?;

    let l2m = log2_ceil(m).max(1);
    let l2_2m = log2_ceil(2 * m).max(1);
    let total_delta = inst0.total_supply();

    let mu0 = mu0_for(f_norm);
    let mut mu = mu0;
    let mut cur_delta = delta.clone();
    let mut acc = Preflow::default();
    let mut rounds = 0u64;
    let mut work = 0u64;

    // wrapped density: 4 for the floored supply, +1 when artificial supply exists
    let any_artificial = !sink.is_all_degree(g);
    let w_eff = 4 + if any_artificial { 1 } else { 0 };
    let target = BigFrac::new((20 * l2_2m) as i128, height as i128)
        + BigFrac::new(w_eff as i128, edge_cap as i128);

    loop {
        rounds += 1;
        // source for the round: floor(delta_j / mu_j) plus artificial supply
        let mut floored: BTreeMap<NodeId, u64> = BTreeMap::new();
        for (&v, &d) in &cur_delta {
            let q = d / mu;
            if q > 0 {
                floored.insert(v, q);
            }
        }
        let mut wrapped = floored.clone();
        for (v, t) in sink.entries() {
            let bar = g.deg(v) - t;
            if bar > 0 {
                *wrapped.entry(v).or_insert(0) += bar;
            }
        }
        let params = WrappedParams {
            density: w_eff,
            edge_cap,
            levels: height,
            target,
        };
        let (raw, cut_nodes) = run_wrapped(g, &wrapped, &params, u64::MAX)?;
        work += raw.work;

        // absorbed (w.r.t. floored source and the real sink) per node
        let fv = raw.preflow.ending_supply(g, &floored);
        let mut ab: BTreeMap<NodeId, u64> = BTreeMap::new();
        for v in 0..g.n() {
            let t = sink.value(g, v) as i64;
            let a = fv[v].min(t);
            if a > 0 {
                ab.insert(v, a as u64);
            }
        }

        // accumulate mu-scaled flow
        for (&e, &fe) in &raw.preflow.edge_flow {
            let entry = acc.edge_flow.entry(e).or_insert(0);
            *entry += fe * mu as i64;
            if *entry == 0 {
                acc.edge_flow.remove(&e);
            }
        }

        // next source function
        let mut next: BTreeMap<NodeId, u64> = BTreeMap::new();
        for (&v, &d) in &cur_delta {
            let rem = d % mu;
            if rem > 0 {
                next.insert(v, rem);
            }
        }
        for (&v, &a) in &ab {
            *next.entry(v).or_insert(0) += a * mu;
        }

        // Step 4: large enough cut ends the run
        if let Some(nodes) = cut_nodes {
            let vol = g.volume(&nodes).expect("cut nodes valid");
            // vol >= tau * |delta| / (4 mu log m), compared exactly
            let lhs = BigFrac::new(vol as i128, 1);
            let rhs = to_big(tau) * BigFrac::new(total_delta as i128, (4 * mu * l2m) as i128);
            if lhs >= rhs {
                let fvw = acc.ending_supply(g, delta);
                let mut total_excess = 0u64;
                for v in 0..g.n() {
                    total_excess += (fvw[v] - sink.value(g, v) as i64).max(0) as u64;
                }
                let volume_lb = {
                    let r = rhs.ceil();
                    r.to_integer() as u64
                };
                return Ok(FlowOutcome {
                    preflow: acc,
                    total_excess,
                    cut: Some(CutCert {
                        nodes,
                        conductance_bound: target,
                        volume_lb,
                    }),
                    congestion_bound: edge_cap * f_norm,
                    work,
                    rounds,
                    round_absorbs: Vec::new(),
                    round_bound: log2_ceil(f_norm) + 1,
                });
            }
        }

        // Step 5: all residual supply fits in the sinks pointwise
        let fits = next.iter().all(|(&v, &d)| d <= sink.value(g, v));
        if fits {
            let fvw = acc.ending_supply(g, delta);
            let mut total_excess = 0u64;
            for v in 0..g.n() {
                total_excess += (fvw[v] - sink.value(g, v) as i64).max(0) as u64;
            }
            return Ok(FlowOutcome {
                preflow: acc,
                total_excess,
                cut: None,
                congestion_bound: edge_cap * f_norm,
                work,
                rounds,
                round_absorbs: Vec::new(),
                round_bound: log2_ceil(f_norm) + 1,
            });
        }
        if mu == 1 {
            // step 5 must have fired at mu = 1: delta_{j+1}(v) = ab_j(v) <= T(v)
            return Err(FlowError::BadParameter(
                "scaling reached mu=1 without terminating".into(),
            ));
        }
        mu /= 2;
        cur_delta = next;
    }
}

/// Almost Flow: repeated excess-scaling rounds with tau = 1/2 until all
/// supply is absorbed or a cut surfaces. On the flow side the congestion
/// bound is U * F * (scaling rounds); the instrumented per-round absorbs
/// satisfy ab_f(v) = sum_j ab_j(v).
pub fn almost_flow(
    g: &Graph,
    f_density: u64,
    delta: &BTreeMap<NodeId, u64>,
    sink: &SinkFn,
    edge_cap: u64,
    height: u64,
) -> Result<FlowOutcome, FlowError> {
    let f_norm = f_density.max(4);
    let inst0 = FlowInstance {
        graph: g,
        supply: delta.clone(),
        sink: sink.clone(),
        height: 1,
        density: f_norm,
    };
    inst0.validate()?;
    let total_delta = inst0.total_supply();
    let round_bound = if total_delta <= 1 {
        1
    } else {
        total_delta.ilog2() as u64 + 1
    };

    let mut cur_delta = delta.clone();
    let mut cur_sink = sink.clone();
    let mut acc = Preflow::default();
    let mut rounds = 0u64;
    let mut work = 0u64;
    let mut round_absorbs: Vec<BTreeMap<NodeId, u64>> = Vec::new();
    let mut cong_published = 0u64;

    while cur_delta.values().sum::<u64>() > 0 {
        rounds += 1;
        // later rounds carry redistributed excess whose per-node density can
        // exceed the input F; the density used each round is recomputed and
        // folded into the published congestion bound
        let round_density = cur_delta
            .iter()
            .map(|(&v, &d)| d.div_ceil(g.deg(v).max(1)))
            .max()
            .unwrap_or(1)
            .max(f_norm);
        let out = excess_scaling_flow(g, round_density, &cur_delta, &cur_sink, Frac::new(1, 2), edge_cap, height)?;
        work += out.work;
        cong_published += out.congestion_bound;
        let fv = out.preflow.ending_supply(g, &cur_delta);
        let mut ab: BTreeMap<NodeId, u64> = BTreeMap::new();
        let mut ex: BTreeMap<NodeId, u64> = BTreeMap::new();
        for v in 0..g.n() {
            let t = cur_sink.value(g, v) as i64;
            let a = fv[v].min(t).max(0);
            if a > 0 {
                ab.insert(v, a as u64);
            }
            let e = (fv[v] - t).max(0);
            if e > 0 {
                ex.insert(v, e as u64);
            }
        }
        for (&e, &fe) in &out.preflow.edge_flow {
            let entry = acc.edge_flow.entry(e).or_insert(0);
            *entry += fe;
            if *entry == 0 {
                acc.edge_flow.remove(&e);
            }
        }
        round_absorbs.push(ab.clone());

        if let Some(cut) = out.cut {
            let fvw = acc.ending_supply(g, delta);
            let mut total_excess = 0u64;
            for v in 0..g.n() {
                total_excess += (fvw[v] - sink.value(g, v) as i64).max(0) as u64;
            }
            return Ok(FlowOutcome {
                preflow: acc,
                total_excess,
                cut: Some(cut),
                congestion_bound: cong_published,
                work,
                rounds,
                round_absorbs,
                round_bound,
            });
        }

        // T_{j+1}(v) = T_j(v) - ab_j(v); delta_{j+1} = ex_j
        let mut below: BTreeMap<NodeId, u64> = BTreeMap::new();
        for v in 0..g.n() {
            let t = cur_sink.value(g, v) - ab.get(&v).copied().unwrap_or(0);
            if t < g.deg(v) {
                below.insert(v, t);
            }
        }
        cur_sink = SinkFn::from_map(below);
        cur_delta = ex;
        if rounds > round_bound {
            return Err(FlowError::BadParameter(format!(
                "almost flow exceeded its round bound {round_bound}"
            )));
        }
    }

    let fvw = acc.ending_supply(g, delta);
    let mut total_excess = 0u64;
    for v in 0..g.n() {
        total_excess += (fvw[v] - sink.value(g, v) as i64).max(0) as u64;
    }
    Ok(FlowOutcome {
        preflow: acc,
        total_excess,
        cut: None,
        congestion_bound: cong_published.max(edge_cap * f_norm),
        work,
        rounds,
        round_absorbs,
        round_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::feasible_flow_exists;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn k4() -> Graph {
        Graph::from_weighted_edges(
            4,
            &[(0, 1, 1), (0, 2, 2), (0, 3, 3), (1, 2, 4), (1, 3, 5), (2, 3, 6)],
        )
        .unwrap()
    }

    fn two_triangles_bridge() -> Graph {
        Graph::from_weighted_edges(
            6,
            &[(0, 1, 1), (1, 2, 2), (0, 2, 3), (3, 4, 4), (4, 5, 5), (3, 5, 6), (2, 3, 7)],
        )
        .unwrap()
    }

    #[test]
    fn single_edge_absorbs_own_supply() {
        let g = Graph::from_weighted_edges(2, &[(0, 1, 1)]).unwrap();
        let inst = FlowInstance {
            graph: &g,
            supply: [(0, 1)].into_iter().collect(),
            sink: SinkFn::all_degree(),
            height: 1,
            density: 1,
        };
        let out = unit_flow(&inst).unwrap();
        assert_eq!(out.total_excess, 0);
        assert!(out.preflow.edge_flow.is_empty());
        check_outcome(&inst, &out).unwrap();
    }

    #[test]
    fn k4_supply_routes() {
        let g = k4();
        let inst = FlowInstance {
            graph: &g,
            supply: [(0, 3)].into_iter().collect(),
            sink: SinkFn::all_degree(),
            height: 2,
            density: 1,
        };
        let out = unit_flow(&inst).unwrap();
        check_outcome(&inst, &out).unwrap();
        assert_eq!(out.total_excess, 0, "K4 absorbs three units");
        assert!(out.preflow.congestion() <= 2 * 2 * 1);
        // cross-check: a feasible flow with congestion 2hF exists
        assert!(feasible_flow_exists(&g, &[(0, 3)], |v| g.deg(v), 4).unwrap());
    }

    #[test]
    fn overloaded_triangle_returns_cut() {
        let g = two_triangles_bridge();
        // supply F*deg on the left triangle; F=2, h=1: F*vol(left) = 14 exceeds
        // 2hF*delta + vol(left) = 11, so absorption is impossible while
        // |Delta| = |T| = 14 keeps the instance valid
        let supply: BTreeMap<usize, u64> = [(0, 4), (1, 4), (2, 6)].into_iter().collect();
        let inst = FlowInstance {
            graph: &g,
            supply: supply.clone(),
            sink: SinkFn::all_degree(),
            height: 1,
            density: 2,
        };
        // infeasibility certified by the brute-force max-flow oracle
        let sup: Vec<(usize, u64)> = supply.iter().map(|(&v, &d)| (v, d)).collect();
        assert!(!feasible_flow_exists(&g, &sup, |v| g.deg(v), 2 * 2).unwrap());
        // the minimum conductance cut of this graph is the triangle at 1/7
        let (_, phi_min) = crate::oracle::min_conductance_bruteforce(&g).unwrap();
        assert_eq!(phi_min, Frac::new(1, 7));
        let out = unit_flow(&inst).unwrap();
        check_outcome(&inst, &out).unwrap();
        assert!(out.total_excess > 0);
        let cut = out.cut.expect("cut present when excess positive");
        let phi = g.conductance(&cut.nodes).unwrap();
        assert!(phi < Frac::new(1, 1), "contract: phi < 1/h");
    }

    #[test]
    fn extended_zero_supply_zero_flow() {
        let g = k4();
        let inst = FlowInstance {
            graph: &g,
            supply: BTreeMap::new(),
            sink: SinkFn::from_map([(0, 0)].into_iter().collect()),
            height: 2,
            density: 1,
        };
        let out = extended_unit_flow(&inst).unwrap();
        assert_eq!(out.total_excess, 0);
        check_outcome(&inst, &out).unwrap();
    }

    #[test]
    fn extended_k4_with_blocked_sink() {
        let g = k4();
        let inst = FlowInstance {
            graph: &g,
            supply: [(0, 3)].into_iter().collect(),
            sink: SinkFn::from_map([(0, 0)].into_iter().collect()),
            height: 2,
            density: 1,
        };
        let out = extended_unit_flow(&inst).unwrap();
        check_outcome(&inst, &out).unwrap();
        assert_eq!(out.total_excess, 0);
    }

    #[test]
    fn input_validation() {
        let g = k4();
        // over-dense supply
        let inst = FlowInstance {
            graph: &g,
            supply: [(0, 10)].into_iter().collect(),
            sink: SinkFn::all_degree(),
            height: 1,
            density: 1,
        };
        assert!(matches!(unit_flow(&inst), Err(FlowError::SupplyTooDense { .. })));
        // isolated node with supply
        let mut g2 = Graph::new(3);
        g2.add_edge(0, 1, crate::graph::WKey::of_rank(1, 0)).unwrap();
        let inst2 = FlowInstance {
            graph: &g2,
            supply: [(2, 1)].into_iter().collect(),
            sink: SinkFn::all_degree(),
            height: 1,
            density: 1,
        };
        assert!(matches!(unit_flow(&inst2), Err(FlowError::IsolatedSupply(2))));
        // supply above sinks
        let inst3 = FlowInstance {
            graph: &g,
            supply: [(0, 3), (1, 3)].into_iter().collect(),
            sink: SinkFn::from_map([(0, 0), (1, 0), (2, 0), (3, 1)].into_iter().collect()),
            height: 1,
            density: 2,
        };
        assert!(matches!(
            extended_unit_flow(&inst3),
            Err(FlowError::SupplyExceedsSinks { .. })
        ));
    }

    #[test]
    fn mu0_anchor() {
        assert_eq!(mu0_for(4), 1);
        assert_eq!(mu0_for(5), 2);
        assert_eq!(mu0_for(8), 2);
        assert_eq!(mu0_for(16), 4);
    }

    #[test]
    fn excess_scaling_zero_supply() {
        let g = k4();
        let out = excess_scaling_flow(&g, 4, &BTreeMap::new(), &SinkFn::all_degree(), Frac::new(1, 2), 8, 4)
            .unwrap();
        assert_eq!(out.total_excess, 0);
        assert!(out.cut.is_none());
        assert!(out.preflow.edge_flow.is_empty());
    }

    #[test]
    fn excess_scaling_random_source_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..60 {
            let n = rng.gen_range(4..32);
            let mut list = Vec::new();
            let mut r = 0i64;
            for v in 1..n {
                let u = rng.gen_range(0..v);
                list.push((u, v, r));
                r += 1;
            }
            for _ in 0..n {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                if u != v {
                    list.push((u, v, r));
                    r += 1;
                }
            }
            let g = Graph::from_weighted_edges(n, &list).unwrap();
            let f = rng.gen_range(4..10u64);
            let mut supply = BTreeMap::new();
            let mut total = 0u64;
            for v in 0..n {
                if rng.gen_bool(0.3) && g.deg(v) > 0 {
                    let d = rng.gen_range(0..=f * g.deg(v));
                    if d > 0 {
                        supply.insert(v, d);
                        total += d;
                    }
                }
            }
            if total > g.total_volume() {
                continue;
            }
            let tau = Frac::new(1, 2);
            let h = log2_ceil(g.m() as u64).max(1) + 2;
            let out = match excess_scaling_flow(&g, f, &supply, &SinkFn::all_degree(), tau, 16, h) {
                Ok(o) => o,
                Err(FlowError::SupplyExceedsSinks { .. }) => continue,
                Err(e) => panic!("trial {trial}: {e}"),
            };
            // source feasibility and the excess bound on flow outcomes
            let inst = FlowInstance {
                graph: &g,
                supply: supply.clone(),
                sink: SinkFn::all_degree(),
                height: 1,
                density: f,
            };
            check_outcome(&inst, &out).unwrap();
            if out.cut.is_none() {
                assert!(
                    Frac::new(out.total_excess as i64, 1) <= tau * Frac::new(total as i64, 1),
                    "trial {trial}: excess {} above tau * {total}",
                    out.total_excess
                );
            }
            assert!(out.rounds <= out.round_bound);
        }
    }

    #[test]
    fn almost_flow_zero_supply() {
        let g = k4();
        let out = almost_flow(&g, 4, &BTreeMap::new(), &SinkFn::all_degree(), 8, 4).unwrap();
        assert_eq!(out.rounds, 0);
        assert_eq!(out.total_excess, 0);
    }

    #[test]
    fn almost_flow_rounds_and_absorbs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..40 {
            let n = rng.gen_range(4..24);
            let mut list = Vec::new();
            let mut r = 0i64;
            for v in 1..n {
                let u = rng.gen_range(0..v);
                list.push((u, v, r));
                r += 1;
            }
            for _ in 0..2 * n {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                if u != v {
                    list.push((u, v, r));
                    r += 1;
                }
            }
            let g = Graph::from_weighted_edges(n, &list).unwrap();
            let mut supply = BTreeMap::new();
            let mut total = 0u64;
            for v in 0..n {
                if rng.gen_bool(0.4) {
                    let d = rng.gen_range(1..=2 * g.deg(v));
                    supply.insert(v, d);
                    total += d;
                }
            }
            if total == 0 || total > g.total_volume() {
                continue;
            }
            let h = log2_ceil(g.m() as u64).max(1) + 3;
            let out = almost_flow(&g, 4, &supply, &SinkFn::all_degree(), 32, h).unwrap();
            if out.cut.is_none() {
                assert_eq!(out.total_excess, 0, "terminating without cut means a flow");
                // per-round absorb identity: ab_f(v) = sum_j ab_j(v)
                let fv = out.preflow.ending_supply(&g, &supply);
                for v in 0..n {
                    let abf = fv[v].min(g.deg(v) as i64).max(0) as u64;
                    let srounds: u64 = out.round_absorbs.iter().map(|m| m.get(&v).copied().unwrap_or(0)).sum();
                    assert_eq!(abf, srounds, "absorb identity at node {v}");
                }
            }
            assert!(out.rounds <= out.round_bound, "{} > {}", out.rounds, out.round_bound);
        }
    }
}
