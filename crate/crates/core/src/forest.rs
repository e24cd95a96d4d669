//! Balanced dynamic forest with link, cut, connectivity and path-max
//! queries, realized as a splay-based link-cut structure. Edges are
//! represented by their own internal nodes carrying the weight key, so the
//! heaviest edge on a path is a subtree aggregate.

use std::collections::HashMap;

use crate::graph::{EdgeId, NodeId, WKey};

const NIL: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForestError {
    AlreadyConnected(NodeId, NodeId),
    NotAnEdge(EdgeId),
    SameNode(NodeId),
    NotConnected(NodeId, NodeId),
}

impl std::fmt::Display for ForestError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ForestError::AlreadyConnected(u, v) => write!(f, "{u} and {v} already connected"),
            ForestError::NotAnEdge(e) => write!(f, "edge {e} not in forest"),
            ForestError::SameNode(v) => write!(f, "path query with u = v = {v}"),
            ForestError::NotConnected(u, v) => write!(f, "{u} and {v} not connected"),
        }
    }
}

impl std::error::Error for ForestError {}

#[derive(Clone)]
pub struct DynamicForest {
    par: Vec<usize>,
    ch: Vec<[usize; 2]>,
    flip: Vec<bool>,
    /// weight key for edge nodes, None for graph nodes
    key: Vec<Option<WKey>>,
    /// splay-subtree node holding the maximum key, NIL when none
    best: Vec<usize>,
    edge_of: Vec<EdgeId>,
    node_of_edge: HashMap<EdgeId, usize>,
    ends_of_edge: HashMap<EdgeId, (NodeId, NodeId)>,
    free: Vec<usize>,
    n_graph: usize,
}

impl DynamicForest {
    pub fn new(n: usize) -> Self {
        DynamicForest {
            par: vec![NIL; n],
            ch: vec![[NIL, NIL]; n],
            flip: vec![false; n],
            key: vec![None; n],
            best: vec![NIL; n],
            edge_of: vec![usize::MAX; n],
            node_of_edge: HashMap::new(),
            ends_of_edge: HashMap::new(),
            free: Vec::new(),
            n_graph: n,
        }
    }

    pub fn n(&self) -> usize {
        self.n_graph
    }

    pub fn has_edge(&self, e: EdgeId) -> bool {
        self.node_of_edge.contains_key(&e)
    }

    pub fn edge_endpoints(&self, e: EdgeId) -> Option<(NodeId, NodeId)> {
        self.ends_of_edge.get(&e).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.node_of_edge.keys().copied()
    }

    pub fn len_edges(&self) -> usize {
        self.node_of_edge.len()
    }

    fn alloc(&mut self, key: WKey, e: EdgeId) -> usize {
        let x = if let Some(x) = self.free.pop() {
            self.par[x] = NIL;
            self.ch[x] = [NIL, NIL];
            self.flip[x] = false;
            x
        } else {
            self.par.push(NIL);
            self.ch.push([NIL, NIL]);
            self.flip.push(false);
            self.key.push(None);
            self.best.push(NIL);
            self.edge_of.push(usize::MAX);
            self.par.len() - 1
        };
        self.key[x] = Some(key);
        self.best[x] = x;
        self.edge_of[x] = e;
        x
    }

    #[inline]
    fn is_splay_root(&self, x: usize) -> bool {
        let p = self.par[x];
        p == NIL || (self.ch[p][0] != x && self.ch[p][1] != x)
    }

    #[inline]
    fn push(&mut self, x: usize) {
        if self.flip[x] {
            self.ch[x].swap(0, 1);
            for c in self.ch[x] {
                if c != NIL {
                    self.flip[c] ^= true;
                }
            }
            self.flip[x] = false;
        }
    }

    #[inline]
    fn pull(&mut self, x: usize) {
        let mut b = if self.key[x].is_some() { x } else { NIL };
        for c in self.ch[x] {
            if c != NIL && self.best[c] != NIL {
                let cb = self.best[c];
                if b == NIL || self.key[cb] > self.key[b] {
                    b = cb;
                }
            }
        }
        self.best[x] = b;
    }

    fn rotate(&mut self, x: usize) {
        let p = self.par[x];
        let g = self.par[p];
        let dir = (self.ch[p][1] == x) as usize;
        let b = self.ch[x][1 - dir];
        if !self.is_splay_root(p) {
            let pd = (self.ch[g][1] == p) as usize;
            self.ch[g][pd] = x;
        }
        self.par[x] = g;
        self.ch[x][1 - dir] = p;
        self.par[p] = x;
        self.ch[p][dir] = b;
        if b != NIL {
            self.par[b] = p;
        }
        self.pull(p);
        self.pull(x);
    }

    fn splay(&mut self, x: usize) {
        // push lazies top-down along the splay-tree path to x
        let mut path = vec![x];
        let mut y = x;
        while !self.is_splay_root(y) {
            y = self.par[y];
            path.push(y);
        }
        for &z in path.iter().rev() {
            self.push(z);
        }
        while !self.is_splay_root(x) {
            let p = self.par[x];
            if !self.is_splay_root(p) {
                let g = self.par[p];
                if (self.ch[g][1] == p) == (self.ch[p][1] == x) {
                    self.rotate(p);
                } else {
                    self.rotate(x);
                }
            }
            self.rotate(x);
        }
    }

    fn access(&mut self, x: usize) {
        let mut last = NIL;
        let mut y = x;
        while y != NIL {
            self.splay(y);
            self.ch[y][1] = last;
            self.pull(y);
            last = y;
            y = self.par[y];
        }
        self.splay(x);
    }

    fn make_root(&mut self, x: usize) {
        self.access(x);
        self.flip[x] ^= true;
        self.push(x);
    }

    fn find_root(&mut self, x: usize) -> usize {
        self.access(x);
        let mut y = x;
        loop {
            self.push(y);
            if self.ch[y][0] == NIL {
                break;
            }
            y = self.ch[y][0];
        }
        self.splay(y);
        y
    }

    pub fn connected(&mut self, u: NodeId, v: NodeId) -> bool {
        u == v || self.find_root(u) == self.find_root(v)
    }

    /// Links `u` and `v` with edge `e` of weight `key`.
    pub fn link(&mut self, u: NodeId, v: NodeId, e: EdgeId, key: WKey) -> Result<(), ForestError> {
        if u == v {
            return Err(ForestError::SameNode(u));
        }
        if self.connected(u, v) {
            return Err(ForestError::AlreadyConnected(u, v));
        }
        let z = self.alloc(key, e);
        self.make_root(u);
        self.par[u] = z;
        self.make_root(v);
        self.par[v] = z;
        self.node_of_edge.insert(e, z);
        self.ends_of_edge.insert(e, (u, v));
        Ok(())
    }

    pub fn cut(&mut self, e: EdgeId) -> Result<(), ForestError> {
        let z = *self.node_of_edge.get(&e).ok_or(ForestError::NotAnEdge(e))?;
        let (u, v) = self.ends_of_edge[&e];
        self.make_root(u);
        self.access(v);
        // splay tree now holds the path u..v; isolate the edge node
        self.splay(z);
        for d in 0..2 {
            let c = self.ch[z][d];
            if c != NIL {
                self.par[c] = NIL;
                self.ch[z][d] = NIL;
            }
        }
        self.pull(z);
        self.key[z] = None;
        self.best[z] = NIL;
        self.edge_of[z] = usize::MAX;
        self.free.push(z);
        self.node_of_edge.remove(&e);
        self.ends_of_edge.remove(&e);
        Ok(())
    }

    /// Heaviest edge on the u-v path. `u == v` is an input error; returns
    /// NotConnected when no path exists.
    pub fn path_max(&mut self, u: NodeId, v: NodeId) -> Result<EdgeId, ForestError> {
        if u == v {
            return Err(ForestError::SameNode(u));
        }
        if !self.connected(u, v) {
            return Err(ForestError::NotConnected(u, v));
        }
        self.make_root(u);
        self.access(v);
        let b = self.best[v];
        debug_assert!(b != NIL, "path between distinct nodes has an edge");
        Ok(self.edge_of[b])
    }
}
