//! Random-cluster configurations on the even corner graph, with a separate
//! weight `q_b` for clusters touching the boundary.

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;

use crate::error::{LatticeError, ParamError};
use crate::lattice::{CornerGraph, Domain, Graph, Parity, VertexCoord};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), rank: vec![0; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns `true` when the two sets were distinct.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// One bit per edge; `open[z]` is the state of `e_z`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RcConfig {
    pub open: Vec<bool>,
}

impl RcConfig {
    pub fn all_closed(m: usize) -> Self {
        RcConfig { open: vec![false; m] }
    }

    pub fn all_open(m: usize) -> Self {
        RcConfig { open: vec![true; m] }
    }

    /// Bit `k` of `mask` gives edge `k`.
    pub fn from_mask(m: usize, mask: u64) -> Self {
        RcConfig { open: (0..m).map(|k| mask >> k & 1 == 1).collect() }
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    pub fn num_open(&self) -> usize {
        self.open.iter().filter(|b| **b).count()
    }

    pub fn num_closed(&self) -> usize {
        self.len() - self.num_open()
    }

    /// `η*(e*) = 1 − η(e)`, indexed the same way.
    pub fn dual(&self) -> RcConfig {
        RcConfig { open: self.open.iter().map(|b| !b).collect() }
    }

    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        for (z, b) in self.open.iter().enumerate() {
            writeln!(out, "E {} {}", z, u8::from(*b)).unwrap();
        }
        out
    }

    pub fn from_snapshot(text: &str, m: usize) -> Result<RcConfig, LatticeError> {
        let mut open = vec![None; m];
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| LatticeError::Parse { line: k + 1, msg: msg.to_string() };
            let parts: Vec<&str> = line.split_whitespace().collect();
            let ["E", z, s] = parts.as_slice() else { return Err(bad("expected `E z 0|1`")) };
            let z: usize = z.parse().map_err(|_| bad("bad edge index"))?;
            if z >= m {
                return Err(bad("edge index out of range"));
            }
            open[z] = Some(match *s {
                "0" => false,
                "1" => true,
                _ => return Err(bad("edge state must be 0 or 1")),
            });
        }
        let open: Option<Vec<bool>> = open.into_iter().collect();
        open.map(|open| RcConfig { open })
            .ok_or(LatticeError::Parse { line: 0, msg: "some edges missing".into() })
    }
}

/// Cluster weight `q`, boundary-cluster weight `q_b`, edge probability `p`.
/// With `anisotropic = Some((p_even, p_odd))` the edge probability depends on
/// the class of the edge instead.
#[derive(Clone, Debug, PartialEq)]
pub struct RcParams<S> {
    pub q: S,
    pub q_b: S,
    pub p: S,
    pub anisotropic: Option<(S, S)>,
}

impl<S: Scalar> RcParams<S> {
    pub fn new(q: S, q_b: S, p: S) -> Self {
        RcParams { q, q_b, p, anisotropic: None }
    }

    pub fn edge_p(&self, class: Parity) -> S {
        match (&self.anisotropic, class) {
            (None, _) => self.p.clone(),
            (Some((pe, _)), Parity::Even) => pe.clone(),
            (Some((_, po)), Parity::Odd) => po.clone(),
        }
    }

    /// FKG-dependent routines need `q ≥ 1` and `q_b ∈ [1, q]`.
    pub fn check_fkg_range(&self) -> Result<(), ParamError> {
        let (q, qb) = (self.q.to_f64(), self.q_b.to_f64());
        if q < 1.0 {
            return Err(ParamError::OutOfRange { name: "q", value: q, why: "must be at least 1" });
        }
        if self.q_b.total_cmp(&S::one()).is_lt() || self.q_b.total_cmp(&self.q).is_gt() {
            return Err(ParamError::OutOfRange { name: "q_b", value: qb, why: "must lie in [1, q]" });
        }
        Ok(())
    }
}

/// Connected components of the open subgraph.
#[derive(Clone, Debug)]
pub struct Components {
    pub label: Vec<usize>,
    pub count: usize,
    pub touches_boundary: Vec<bool>,
}

impl Components {
    pub fn k_b(&self) -> usize {
        self.touches_boundary.iter().filter(|b| **b).count()
    }

    pub fn k_i(&self) -> usize {
        self.count - self.k_b()
    }
}

pub fn components(graph: &Graph, open: &[bool]) -> Components {
    let mut uf = UnionFind::new(graph.num_vertices);
    for (e, &(u, v)) in graph.edges.iter().enumerate() {
        if open[e] {
            uf.union(u, v);
        }
    }
    let mut label = vec![usize::MAX; graph.num_vertices];
    let mut root_label = vec![usize::MAX; graph.num_vertices];
    let mut count = 0;
    let mut touches_boundary = Vec::new();
    for v in 0..graph.num_vertices {
        let r = uf.find(v);
        if root_label[r] == usize::MAX {
            root_label[r] = count;
            touches_boundary.push(false);
            count += 1;
        }
        label[v] = root_label[r];
        if graph.boundary[v] {
            touches_boundary[label[v]] = true;
        }
    }
    Components { label, count, touches_boundary }
}

/// `(k_i, k_b)`.
pub fn cluster_counts(graph: &Graph, open: &[bool]) -> (usize, usize) {
    let c = components(graph, open);
    (c.k_i(), c.k_b())
}

/// `q^{k_i} q_b^{k_b} ∏ p_e^{η_e} (1 − p_e)^{1 − η_e}`.
pub fn rc_weight<S: Scalar>(graph: &Graph, eta: &RcConfig, params: &RcParams<S>) -> S {
    let (ki, kb) = cluster_counts(graph, &eta.open);
    let mut w = params.q.powi(ki as i64) * params.q_b.powi(kb as i64);
    for (e, open) in eta.open.iter().enumerate() {
        let p = params.edge_p(graph.edge_class[e]);
        w = w * if *open { p } else { S::one() - p };
    }
    w
}

/// Weight with every boundary vertex merged into one: `q^{k(wired)} ∏ p_e^{η_e}(1−p_e)^{1−η_e}`.
pub fn rc_weight_wired<S: Scalar>(graph: &Graph, eta: &RcConfig, params: &RcParams<S>) -> S {
    let (wired, _) = graph.wired();
    let c = components(&wired, &eta.open);
    let mut w = params.q.powi(c.count as i64);
    for (e, open) in eta.open.iter().enumerate() {
        let p = params.edge_p(graph.edge_class[e]);
        w = w * if *open { p } else { S::one() - p };
    }
    w
}

pub fn p_critical(q: f64) -> Result<f64, ParamError> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(ParamError::OutOfRange { name: "q", value: q, why: "must be a finite number at least 1" });
    }
    Ok(p_critical_from_sqrt(q.sqrt()))
}

/// `√q / (√q + 1)` for any scalar field holding `√q`.
pub fn p_critical_from_sqrt<S: Scalar>(sqrt_q: S) -> S {
    sqrt_q.clone() / (sqrt_q + S::one())
}

/// `(p_h, p_v) = (b√q/(b√q+a), a√q/(a√q+b))`.
pub fn anisotropic_critical_from_sqrt<S: Scalar>(a: S, b: S, sqrt_q: S) -> (S, S) {
    let bs = b.clone() * sqrt_q.clone();
    let as_ = a.clone() * sqrt_q;
    (bs.clone() / (bs + a), as_.clone() / (as_ + b))
}

pub fn anisotropic_critical(a: f64, b: f64, q: f64) -> Result<(f64, f64), ParamError> {
    if !(a > 0.0) {
        return Err(ParamError::OutOfRange { name: "a", value: a, why: "must be positive" });
    }
    if !(b > 0.0) {
        return Err(ParamError::OutOfRange { name: "b", value: b, why: "must be positive" });
    }
    p_critical(q)?;
    Ok(anisotropic_critical_from_sqrt(a, b, q.sqrt()))
}

/// How opening an edge changes the cluster structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Merge {
    /// Endpoints already connected without the edge.
    Connected,
    /// Two clusters merge and at most one of them touches the boundary.
    Interior,
    /// Two boundary clusters merge.
    Boundary,
}

/// Reusable connectivity queries that avoid one edge.
#[derive(Clone, Debug)]
pub struct Connectivity {
    inc: Vec<Vec<(usize, usize)>>,
    edges: Vec<(usize, usize)>,
    boundary: Vec<bool>,
    mark: Vec<u32>,
    epoch: u32,
    qa: VecDeque<usize>,
    qb: VecDeque<usize>,
}

impl Connectivity {
    pub fn new(graph: &Graph) -> Self {
        Connectivity {
            inc: graph.incidence(),
            edges: graph.edges.clone(),
            boundary: graph.boundary.clone(),
            mark: vec![0; graph.num_vertices],
            epoch: 0,
            qa: VecDeque::new(),
            qb: VecDeque::new(),
        }
    }

    /// Interleaved BFS from both endpoints of `e`, not using `e` itself.
    pub fn probe(&mut self, open: &[bool], e: usize) -> Merge {
        let (u, v) = self.edges[e];
        if u == v {
            return Merge::Connected;
        }
        // marks: epoch*2 for side a, epoch*2+1 for side b
        self.epoch += 1;
        if self.epoch >= u32::MAX / 2 - 1 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        let (ma, mb) = (2 * self.epoch, 2 * self.epoch + 1);
        self.qa.clear();
        self.qb.clear();
        self.mark[u] = ma;
        self.mark[v] = mb;
        self.qa.push_back(u);
        self.qb.push_back(v);
        let mut bound_a = self.boundary[u];
        let mut bound_b = self.boundary[v];
        let mut done_a = false;
        let mut done_b = false;
        loop {
            if !done_a {
                match self.qa.pop_front() {
                    None => done_a = true,
                    Some(x) => {
                        for &(f, y) in &self.inc[x] {
                            if f == e || !open[f] {
                                continue;
                            }
                            if self.mark[y] == mb {
                                return Merge::Connected;
                            }
                            if self.mark[y] != ma {
                                self.mark[y] = ma;
                                bound_a |= self.boundary[y];
                                self.qa.push_back(y);
                            }
                        }
                    }
                }
            }
            if !done_b {
                match self.qb.pop_front() {
                    None => done_b = true,
                    Some(x) => {
                        for &(f, y) in &self.inc[x] {
                            if f == e || !open[f] {
                                continue;
                            }
                            if self.mark[y] == ma {
                                return Merge::Connected;
                            }
                            if self.mark[y] != mb {
                                self.mark[y] = mb;
                                bound_b |= self.boundary[y];
                                self.qb.push_back(y);
                            }
                        }
                    }
                }
            }
            if done_a || done_b {
                break;
            }
        }
        // one side is exhausted and disjoint from the other; finish the
        // boundary status of the other side only if the first is a boundary cluster
        let (exhausted_bound, other_bound, other_is_a) =
            if done_a { (bound_a, bound_b, false) } else { (bound_b, bound_a, true) };
        if !exhausted_bound {
            return Merge::Interior;
        }
        if other_bound {
            return Merge::Boundary;
        }
        let (mine, theirs) = if other_is_a { (ma, mb) } else { (mb, ma) };
        let mut queue = if other_is_a { std::mem::take(&mut self.qa) } else { std::mem::take(&mut self.qb) };
        let mut found = false;
        while let Some(x) = queue.pop_front() {
            for &(f, y) in &self.inc[x] {
                if f == e || !open[f] {
                    continue;
                }
                debug_assert_ne!(self.mark[y], theirs);
                if self.mark[y] != mine {
                    self.mark[y] = mine;
                    if self.boundary[y] {
                        found = true;
                        break;
                    }
                    queue.push_back(y);
                }
            }
            if found {
                break;
            }
        }
        queue.clear();
        if other_is_a {
            self.qa = queue;
        } else {
            self.qb = queue;
        }
        if found {
            Merge::Boundary
        } else {
            Merge::Interior
        }
    }
}

/// Probability that edge `e` is open given all other edges.
pub fn heat_bath_edge_ratio<S: Scalar>(graph: &Graph, eta: &RcConfig, e: usize, params: &RcParams<S>) -> S {
    let mut conn = Connectivity::new(graph);
    open_probability(conn.probe(&eta.open, e), params.edge_p(graph.edge_class[e]), params)
}

pub fn open_probability<S: Scalar>(merge: Merge, p: S, params: &RcParams<S>) -> S {
    let factor = match merge {
        Merge::Connected => return p,
        Merge::Interior => params.q.clone(),
        Merge::Boundary => params.q_b.clone(),
    };
    p.clone() / (p.clone() + (S::one() - p) * factor)
}

/// The even corner graph together with its planar dual: the odd corner graph
/// with every boundary corner wired into a single outer vertex.
#[derive(Clone, Debug)]
pub struct PlanarPair {
    pub primal: CornerGraph,
    pub odd: CornerGraph,
    pub dual: Graph,
    /// Odd corner-graph node → dual vertex.
    pub dual_of_odd: Vec<usize>,
    pub outer: Option<usize>,
    vertices: Vec<VertexCoord>,
}

impl PlanarPair {
    pub fn new(domain: &Domain) -> Self {
        let primal = CornerGraph::build(domain, Parity::Even);
        let odd = CornerGraph::build(domain, Parity::Odd);
        let (dual, dual_of_odd) = odd.graph().wired();
        let outer = dual.boundary.iter().position(|b| *b);
        PlanarPair { primal, odd, dual, dual_of_odd, outer, vertices: domain.vertices().to_vec() }
    }

    /// Vertex of the domain that owns edge `e_z` and its dual.
    pub fn primal_domain_vertex(&self, z: usize) -> VertexCoord {
        self.vertices[z]
    }

    pub fn num_edges(&self) -> usize {
        self.primal.num_edges()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClusterId {
    Primal(usize),
    Dual(usize),
}

/// Clusters of `η` on the even graph and of `η*` on the wired dual, with the
/// adjacency tree between them rooted at the outer dual cluster.
#[derive(Clone, Debug)]
pub struct ClusterDecomposition {
    pub primal: Components,
    pub dual: Components,
    pub k_i: usize,
    pub k_b: usize,
    /// Cluster count once all boundary vertices are wired together.
    pub k_wired: usize,
    /// `(primal cluster, dual cluster, primal nested inside dual)`.
    pub adjacency: Vec<(usize, usize, bool)>,
    pub root: ClusterId,
    pub parent: Vec<Option<ClusterId>>,
    /// Distance from the root in the adjacency tree, per tree node.
    pub depth: Vec<usize>,
    tree_ok: bool,
}

impl ClusterDecomposition {
    pub fn k(&self) -> usize {
        self.k_i + self.k_b
    }

    pub fn is_tree(&self) -> bool {
        self.tree_ok
    }

    pub fn node_index(&self, id: ClusterId) -> usize {
        match id {
            ClusterId::Primal(c) => c,
            ClusterId::Dual(c) => self.primal.count + c,
        }
    }

    pub fn node_id(&self, idx: usize) -> ClusterId {
        if idx < self.primal.count {
            ClusterId::Primal(idx)
        } else {
            ClusterId::Dual(idx - self.primal.count)
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.primal.count + self.dual.count
    }
}

pub fn decompose(pair: &PlanarPair, eta: &RcConfig) -> ClusterDecomposition {
    let primal = components(pair.primal.graph(), &eta.open);
    let dual_open = eta.dual();
    let dual = components(&pair.dual, &dual_open.open);
    let k_i = primal.k_i();
    let k_b = primal.k_b();
    let k_wired = k_i + usize::from(k_b > 0);

    let mut adj: HashSet<(usize, usize)> = HashSet::new();
    for z in 0..pair.num_edges() {
        let (p1, p2) = pair.primal.edge(z);
        let (o1, o2) = pair.odd.edge(z);
        for p in [p1, p2] {
            for o in [o1, o2] {
                adj.insert((primal.label[p], dual.label[pair.dual_of_odd[o]]));
            }
        }
    }
    let mut adjacency: Vec<(usize, usize)> = adj.into_iter().collect();
    adjacency.sort_unstable();

    let n = primal.count + dual.count;
    let mut nbrs = vec![Vec::new(); n];
    for &(c, d) in &adjacency {
        nbrs[c].push(primal.count + d);
        nbrs[primal.count + d].push(c);
    }
    let root_idx = match pair.outer {
        Some(o) => primal.count + dual.label[o],
        None => primal.count,
    };
    let mut parent = vec![None; n];
    let mut depth = vec![usize::MAX; n];
    depth[root_idx] = 0;
    let mut queue = VecDeque::from([root_idx]);
    let mut reached = 1;
    let np = primal.count;
    let id = move |idx: usize| if idx < np { ClusterId::Primal(idx) } else { ClusterId::Dual(idx - np) };
    while let Some(x) = queue.pop_front() {
        for &y in &nbrs[x] {
            if depth[y] == usize::MAX {
                depth[y] = depth[x] + 1;
                parent[y] = Some(id(x));
                reached += 1;
                queue.push_back(y);
            }
        }
    }
    let tree_ok = reached == n && adjacency.len() + 1 == n;
    let adjacency = adjacency
        .into_iter()
        .map(|(c, d)| (c, d, parent[c] == Some(ClusterId::Dual(d))))
        .collect();
    ClusterDecomposition { primal, dual, k_i, k_b, k_wired, adjacency, root: id(root_idx), parent, depth, tree_ok }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_diamond, FaceCoord};

    #[test]
    fn single_edge_ratio() {
        let g = Graph::new(2, vec![(0, 1)], vec![false, false]);
        let p = RcParams::new(2.0, 2.0, 0.5);
        let open = rc_weight(&g, &RcConfig::all_open(1), &p);
        let closed = rc_weight(&g, &RcConfig::all_closed(1), &p);
        assert!((open / closed - 0.5).abs() < 1e-15);
    }

    #[test]
    fn extreme_configs_on_lambda2() {
        let d = build_diamond(2, FaceCoord::new(0, 0));
        let pair = PlanarPair::new(&d);
        let m = pair.num_edges();
        let closed = decompose(&pair, &RcConfig::all_closed(m));
        let nb = pair.primal.graph().boundary.iter().filter(|b| **b).count();
        assert_eq!(closed.k_b, nb);
        assert_eq!(closed.k_i, pair.primal.num_vertices() - nb);
        let open = decompose(&pair, &RcConfig::all_open(m));
        assert_eq!((open.k_i, open.k_b), (0, 1));
        assert!(closed.is_tree() && open.is_tree());
    }

    #[test]
    fn probe_classifies_merges() {
        // path 0-1-2-3, boundary at 0 and 3
        let g = Graph::new(4, vec![(0, 1), (1, 2), (2, 3)], vec![true, false, false, true]);
        let mut c = Connectivity::new(&g);
        assert_eq!(c.probe(&[true, false, true], 1), Merge::Boundary);
        assert_eq!(c.probe(&[false, false, true], 1), Merge::Interior);
        assert_eq!(c.probe(&[false, false, false], 0), Merge::Interior);
        let tri = Graph::new(3, vec![(0, 1), (1, 2), (2, 0)], vec![false; 3]);
        let mut c = Connectivity::new(&tri);
        assert_eq!(c.probe(&[true, true, true], 0), Merge::Connected);
    }

    #[test]
    fn critical_points() {
        assert!((p_critical(4.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let (ph, pv) = anisotropic_critical(1.0, 2.5, 9.0).unwrap();
        assert!((ph / (1.0 - ph) * pv / (1.0 - pv) - 9.0).abs() < 1e-12);
        assert!(p_critical(0.5).is_err());
    }
}
