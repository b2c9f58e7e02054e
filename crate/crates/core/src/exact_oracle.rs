//! Exhaustive enumeration on small instances with exact arithmetic, and the
//! checks built on it: FKG lattice condition, stochastic domination by
//! max-flow, pushforward equality and transition matrices.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::hash::Hash;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::OracleError;
use crate::lattice::{CellKind, Domain, FaceCoord, Graph};
use crate::random_cluster::{rc_weight, RcConfig, RcParams};
use crate::representations::{boundary_cb_parts, height_weight, spin_of_height, Boundary, Cb, HeightFunction, ModelParams, WeightMode};
use crate::scalar::{relative_gap, Scalar};

pub const MAX_FREE_FACES: usize = 16;
pub const MAX_RC_EDGES: usize = 20;
pub const MAX_DOMINATION_ATOMS: usize = 4000;

/// Explicit `(configuration, weight)` list.
#[derive(Clone, Debug)]
pub struct ExactMeasure<C, S> {
    pub atoms: Vec<(C, S)>,
    pub partition_function: S,
}

impl<C: Clone + Eq + Hash, S: Scalar> ExactMeasure<C, S> {
    pub fn new(atoms: Vec<(C, S)>) -> Self {
        let mut z = S::zero();
        for (_, w) in &atoms {
            debug_assert!(!w.is_negative());
            z = z + w.clone();
        }
        ExactMeasure { atoms, partition_function: z }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn prob(&self, k: usize) -> S {
        self.atoms[k].1.clone() / self.partition_function.clone()
    }

    pub fn probabilities(&self) -> Vec<S> {
        (0..self.len()).map(|k| self.prob(k)).collect()
    }

    pub fn expectation<F: Fn(&C) -> S>(&self, f: F) -> S {
        let mut acc = S::zero();
        for (c, w) in &self.atoms {
            acc = acc + f(c) * w.clone();
        }
        acc / self.partition_function.clone()
    }

    pub fn probability_of<F: Fn(&C) -> bool>(&self, event: F) -> S {
        self.expectation(|c| if event(c) { S::one() } else { S::zero() })
    }

    pub fn index(&self) -> HashMap<C, usize> {
        self.atoms.iter().enumerate().map(|(k, (c, _))| (c.clone(), k)).collect()
    }

    /// Image law under `map`, atoms merged by equality.
    pub fn pushforward<D: Clone + Eq + Hash, F: Fn(&C) -> D>(&self, map: F) -> ExactMeasure<D, S> {
        let mut idx: HashMap<D, usize> = HashMap::new();
        let mut atoms: Vec<(D, S)> = Vec::new();
        for (c, w) in &self.atoms {
            let d = map(c);
            match idx.get(&d) {
                Some(&k) => atoms[k].1 = atoms[k].1.clone() + w.clone(),
                None => {
                    idx.insert(d.clone(), atoms.len());
                    atoms.push((d, w.clone()));
                }
            }
        }
        ExactMeasure::new(atoms)
    }
}

/// Outcome of one oracle identity or inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub identity: String,
    pub domain: String,
    pub params: String,
    pub passed: bool,
    pub max_deviation: f64,
    pub atoms: usize,
    pub witness: Option<String>,
}

impl IdentityReport {
    pub fn new(identity: &str, domain: &str, params: &str) -> Self {
        IdentityReport {
            identity: identity.to_string(),
            domain: domain.to_string(),
            params: params.to_string(),
            passed: true,
            max_deviation: 0.0,
            atoms: 0,
            witness: None,
        }
    }

    pub fn fail(&mut self, witness: String) {
        if self.passed {
            self.witness = Some(witness);
        }
        self.passed = false;
    }
}

impl fmt::Display for IdentityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "identity={} domain={} params={} verdict={} max_deviation={:.3e} atoms={}",
            self.identity,
            self.domain,
            self.params,
            if self.passed { "pass" } else { "FAIL" },
            self.max_deviation,
            self.atoms
        )?;
        if let Some(w) = &self.witness {
            write!(f, " witness={w}")?;
        }
        Ok(())
    }
}

/// Checks `x_k = r · y_k` for one constant `r` over all pairs; returns the
/// largest relative deviation and the index of the first violation.
pub fn proportionality<S: Scalar>(pairs: &[(S, S)]) -> (f64, Option<usize>) {
    let Some(base) = pairs.iter().find(|(_, y)| !y.is_zero()) else {
        let bad = pairs.iter().position(|(x, _)| !x.is_zero());
        return (if bad.is_some() { 1.0 } else { 0.0 }, bad);
    };
    let r = base.0.clone() / base.1.clone();
    let mut worst = 0.0f64;
    let mut first = None;
    for (k, (x, y)) in pairs.iter().enumerate() {
        let gap = relative_gap(x, &(r.clone() * y.clone()));
        if gap > S::TOLERANCE && first.is_none() {
            first = Some(k);
        }
        worst = worst.max(gap);
    }
    (worst, first)
}

/// Every valid height function with the given values on the halo.
pub fn enumerate_height_functions(domain: &Arc<Domain>, boundary: &Boundary) -> Result<Vec<HeightFunction>, OracleError> {
    let n = domain.num_faces();
    if n > MAX_FREE_FACES {
        return Err(OracleError::TooLarge { what: "free faces", size: n, cap: MAX_FREE_FACES });
    }
    let grid = domain.grid();
    let mut values = vec![i32::MIN; grid.len()];
    for u in domain.halo() {
        values[grid.index(*u).unwrap()] =
            boundary.value(*u).ok_or(crate::error::RepresentationError::BoundaryMismatch)?;
    }
    let faces: Vec<usize> = domain.faces().iter().map(|u| grid.index(*u).unwrap()).collect();
    let nbrs: Vec<[Option<usize>; 4]> = domain
        .faces()
        .iter()
        .map(|u| {
            u.neighbors().map(|v| grid.index(v).filter(|i| grid.kind(*i) != CellKind::Outside))
        })
        .collect();
    let mut out = Vec::new();
    dfs_heights(0, &faces, &nbrs, &mut values, domain, &mut out);
    Ok(out)
}

fn dfs_heights(
    k: usize,
    faces: &[usize],
    nbrs: &[[Option<usize>; 4]],
    values: &mut Vec<i32>,
    domain: &Arc<Domain>,
    out: &mut Vec<HeightFunction>,
) {
    if k == faces.len() {
        let h = HeightFunction::from_raw(domain.clone(), values.clone());
        if h.validate().is_ok() {
            out.push(h);
        }
        return;
    }
    let assigned: Vec<i32> = nbrs[k].iter().flatten().map(|&i| values[i]).filter(|v| *v != i32::MIN).collect();
    let Some(&w) = assigned.first() else {
        unreachable!("raster order always has an assigned neighbour above");
    };
    for cand in [w - 1, w + 1] {
        if assigned.iter().all(|v| (v - cand).abs() == 1) {
            values[faces[k]] = cand;
            dfs_heights(k + 1, faces, nbrs, values, domain, out);
        }
    }
    values[faces[k]] = i32::MIN;
}

/// Height measure with the given weights. With an infinite `c_b`, only
/// configurations maximising the number of boundary c-type vertices of that
/// class keep positive weight.
pub fn enumerate_heights<S: Scalar>(
    domain: &Arc<Domain>,
    boundary: &Boundary,
    params: &ModelParams<S>,
    mode: WeightMode,
) -> Result<ExactMeasure<HeightFunction, S>, OracleError> {
    let hs = enumerate_height_functions(domain, boundary)?;
    let infinite = [matches!(params.cb[0], Cb::Infinite), matches!(params.cb[1], Cb::Infinite)];
    if mode == WeightMode::Plain || !(infinite[0] || infinite[1]) {
        let atoms = hs
            .into_par_iter()
            .map(|h| {
                let w = height_weight(&h, params, mode)?;
                Ok((h, w))
            })
            .collect::<Result<Vec<_>, OracleError>>()?;
        return Ok(ExactMeasure::new(atoms));
    }
    let mut parts = Vec::with_capacity(hs.len());
    for h in hs {
        let (bulk, nb) = boundary_cb_parts(&h, params)?;
        parts.push((h, bulk, nb));
    }
    let key = |nb: &[usize; 2]| (0..2).filter(|c| infinite[*c]).map(|c| nb[c]).sum::<usize>();
    let best = parts.iter().map(|(_, _, nb)| key(nb)).max().unwrap_or(0);
    let atoms = parts
        .into_iter()
        .map(|(h, bulk, nb)| {
            let mut w = if key(&nb) == best { bulk } else { S::zero() };
            for class in 0..2 {
                if let Cb::Finite(cb) = &params.cb[class] {
                    w = w * cb.powi(nb[class] as i64);
                }
            }
            (h, w)
        })
        .collect();
    Ok(ExactMeasure::new(atoms))
}

/// All `2^|E|` edge configurations of a graph with their random-cluster weights.
pub fn enumerate_rc<S: Scalar>(graph: &Graph, params: &RcParams<S>) -> Result<ExactMeasure<RcConfig, S>, OracleError> {
    let m = graph.num_edges();
    if m > MAX_RC_EDGES {
        return Err(OracleError::TooLarge { what: "edges", size: m, cap: MAX_RC_EDGES });
    }
    let atoms = (0..1u64 << m)
        .into_par_iter()
        .map(|mask| {
            let eta = RcConfig::from_mask(m, mask);
            let w = rc_weight(graph, &eta, params);
            (eta, w)
        })
        .collect();
    Ok(ExactMeasure::new(atoms))
}

/// Pointwise partial order with join and meet.
pub trait Lattice: Clone + Eq + Hash {
    fn join(&self, other: &Self) -> Self;
    fn meet(&self, other: &Self) -> Self;
    fn le(&self, other: &Self) -> bool;
}

impl Lattice for HeightFunction {
    fn join(&self, other: &Self) -> Self {
        self.max(other)
    }
    fn meet(&self, other: &Self) -> Self {
        self.min(other)
    }
    fn le(&self, other: &Self) -> bool {
        HeightFunction::le(self, other)
    }
}

impl Lattice for RcConfig {
    fn join(&self, other: &Self) -> Self {
        RcConfig { open: self.open.iter().zip(&other.open).map(|(a, b)| *a || *b).collect() }
    }
    fn meet(&self, other: &Self) -> Self {
        RcConfig { open: self.open.iter().zip(&other.open).map(|(a, b)| *a && *b).collect() }
    }
    fn le(&self, other: &Self) -> bool {
        self.open.iter().zip(&other.open).all(|(a, b)| !a || *b)
    }
}

/// Spin vectors ordered pointwise with `−1 < +1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinVector(pub Vec<i8>);

impl Lattice for SpinVector {
    fn join(&self, other: &Self) -> Self {
        SpinVector(self.0.iter().zip(&other.0).map(|(a, b)| *a.max(b)).collect())
    }
    fn meet(&self, other: &Self) -> Self {
        SpinVector(self.0.iter().zip(&other.0).map(|(a, b)| *a.min(b)).collect())
    }
    fn le(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

/// Covering pairs of the pointwise order restricted to the atoms.
#[derive(Clone, Debug)]
pub struct PosetStructure {
    pub elements: usize,
    pub covers: Vec<(usize, usize)>,
}

pub fn poset_of<C: Lattice, S: Scalar>(mu: &ExactMeasure<C, S>) -> PosetStructure {
    let n = mu.len();
    let le: Vec<Vec<bool>> =
        (0..n).map(|i| (0..n).map(|j| i != j && mu.atoms[i].0.le(&mu.atoms[j].0)).collect()).collect();
    let mut covers = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if le[i][j] && !(0..n).any(|k| le[i][k] && le[k][j]) {
                covers.push((i, j));
            }
        }
    }
    PosetStructure { elements: n, covers }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FkgVerdict {
    Pass,
    /// Atom indices `(f, g)` with `μ(f∨g)μ(f∧g) < μ(f)μ(g)`.
    Counterexample(usize, usize),
}

/// Checks `μ(f∨g)μ(f∧g) ≥ μ(f)μ(g)` over all pairs of atoms.
pub fn fkg_lattice_check<C: Lattice + Sync, S: Scalar>(mu: &ExactMeasure<C, S>) -> Result<FkgVerdict, OracleError> {
    let idx = mu.index();
    let n = mu.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (f, g) = (&mu.atoms[i].0, &mu.atoms[j].0);
            if f.le(g) || g.le(f) {
                continue;
            }
            let (Some(&a), Some(&b)) = (idx.get(&f.join(g)), idx.get(&f.meet(g))) else {
                // join or meet has zero mass while both atoms are charged
                return Ok(FkgVerdict::Counterexample(i, j));
            };
            pairs.push((i, j, a, b));
        }
    }
    let bad = pairs.par_iter().find_first(|&&(i, j, a, b)| {
        let lhs = mu.atoms[a].1.clone() * mu.atoms[b].1.clone();
        let rhs = mu.atoms[i].1.clone() * mu.atoms[j].1.clone();
        lhs.total_cmp(&rhs).is_lt()
    });
    Ok(match bad {
        Some(&(i, j, _, _)) => FkgVerdict::Counterexample(i, j),
        None => FkgVerdict::Pass,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum DominationVerdict {
    Pass,
    /// Atom indices of an increasing event `A` with `μ(A) > ν(A)`.
    Counterexample(Vec<usize>),
}

/// Decides `μ ⪯ ν` (every increasing event is at least as likely under `ν`) by
/// checking that the comparability network carries a full unit flow.
pub fn stochastic_domination_check<C: Lattice, S: Scalar>(
    mu: &ExactMeasure<C, S>,
    nu: &ExactMeasure<C, S>,
) -> Result<DominationVerdict, OracleError> {
    let n = mu.len();
    if n > MAX_DOMINATION_ATOMS {
        return Err(OracleError::TooLarge { what: "atoms", size: n, cap: MAX_DOMINATION_ATOMS });
    }
    let nu_idx = nu.index();
    if nu.len() != n || mu.atoms.iter().any(|(c, _)| !nu_idx.contains_key(c)) {
        return Err(OracleError::Mismatch);
    }
    // align ν to μ's atom order
    let nu_w: Vec<S> = mu.atoms.iter().map(|(c, _)| nu.prob(nu_idx[c])).collect();
    let mu_w: Vec<S> = (0..n).map(|k| mu.prob(k)).collect();
    // nodes: 0 source, 1 sink, 2..2+n left, 2+n..2+2n right
    let mut net = FlowNetwork::new(2 + 2 * n);
    for i in 0..n {
        net.add_edge(0, 2 + i, Some(mu_w[i].clone()));
        net.add_edge(2 + n + i, 1, Some(nu_w[i].clone()));
        for j in 0..n {
            if mu.atoms[i].0.le(&mu.atoms[j].0) {
                net.add_edge(2 + i, 2 + n + j, None);
            }
        }
    }
    let flow = net.max_flow(0, 1);
    if flow.total_cmp(&S::one()).is_ge() {
        return Ok(DominationVerdict::Pass);
    }
    // source side of a minimum cut: its μ-atoms generate the violating up-set
    let reach = net.residual_reachable(0);
    let seeds: Vec<usize> = (0..n).filter(|i| reach[2 + i]).collect();
    let upset: Vec<usize> = (0..n).filter(|j| seeds.iter().any(|i| mu.atoms[*i].0.le(&mu.atoms[*j].0))).collect();
    Ok(DominationVerdict::Counterexample(upset))
}

/// `μ(A)` and `ν(A)` for an event given by atom indices of `μ`.
pub fn event_masses<C: Clone + Eq + Hash, S: Scalar>(
    mu: &ExactMeasure<C, S>,
    nu: &ExactMeasure<C, S>,
    event: &[usize],
) -> (S, S) {
    let nu_idx = nu.index();
    let mut a = S::zero();
    let mut b = S::zero();
    for &k in event {
        a = a + mu.prob(k);
        b = b + nu.prob(nu_idx[&mu.atoms[k].0]);
    }
    (a, b)
}

struct FlowEdge<S> {
    to: usize,
    /// `None` is unbounded capacity.
    cap: Option<S>,
    flow: S,
}

struct FlowNetwork<S> {
    edges: Vec<FlowEdge<S>>,
    adj: Vec<Vec<usize>>,
}

impl<S: Scalar> FlowNetwork<S> {
    fn new(n: usize) -> Self {
        FlowNetwork { edges: Vec::new(), adj: vec![Vec::new(); n] }
    }

    fn add_edge(&mut self, u: usize, v: usize, cap: Option<S>) {
        self.adj[u].push(self.edges.len());
        self.edges.push(FlowEdge { to: v, cap, flow: S::zero() });
        self.adj[v].push(self.edges.len());
        self.edges.push(FlowEdge { to: u, cap: Some(S::zero()), flow: S::zero() });
    }

    /// Residual capacity, `None` when unbounded.
    fn residual(&self, e: usize) -> Option<S> {
        self.edges[e].cap.as_ref().map(|c| c.clone() - self.edges[e].flow.clone())
    }

    fn has_residual(&self, e: usize) -> bool {
        match self.residual(e) {
            None => true,
            Some(r) => !r.is_negative() && !r.is_zero(),
        }
    }

    fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.edges[e].to;
                if !seen[v] && self.has_residual(e) {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Edmonds–Karp; terminates for arbitrary real capacities.
    fn max_flow(&mut self, s: usize, t: usize) -> S {
        let mut total = S::zero();
        loop {
            let mut prev = vec![usize::MAX; self.adj.len()];
            let mut seen = vec![false; self.adj.len()];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for &e in &self.adj[u] {
                    let v = self.edges[e].to;
                    if !seen[v] && self.has_residual(e) {
                        seen[v] = true;
                        prev[v] = e;
                        queue.push_back(v);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            let mut bottleneck: Option<S> = None;
            let mut v = t;
            while v != s {
                let e = prev[v];
                if let Some(r) = self.residual(e) {
                    bottleneck = Some(match bottleneck {
                        None => r,
                        Some(b) => {
                            if r.total_cmp(&b).is_lt() {
                                r
                            } else {
                                b
                            }
                        }
                    });
                }
                v = self.edges[e ^ 1].to;
            }
            let b = bottleneck.expect("source and sink edges are bounded");
            let mut v = t;
            while v != s {
                let e = prev[v];
                self.edges[e].flow = self.edges[e].flow.clone() + b.clone();
                self.edges[e ^ 1].flow = self.edges[e ^ 1].flow.clone() - b.clone();
                v = self.edges[e ^ 1].to;
            }
            total = total + b;
        }
    }
}

/// Compares `map_*(μ)` with `ν` atom by atom.
pub fn pushforward_equality_check<C, D, S, F>(
    mu: &ExactMeasure<C, S>,
    map: F,
    nu: &ExactMeasure<D, S>,
) -> Result<(bool, f64), OracleError>
where
    C: Clone + Eq + Hash,
    D: Clone + Eq + Hash,
    S: Scalar,
    F: Fn(&C) -> Option<D>,
{
    let mut image = Vec::with_capacity(mu.len());
    for (c, w) in &mu.atoms {
        image.push((map(c).ok_or(OracleError::PartialMap)?, w.clone()));
    }
    let pushed = ExactMeasure::new(image).pushforward(|d| d.clone());
    let nu_idx = nu.index();
    let pushed_idx = pushed.index();
    let mut worst = 0.0f64;
    for (d, k) in &nu_idx {
        let pn = nu.prob(*k);
        let pp = pushed_idx.get(d).map_or(S::zero(), |j| pushed.prob(*j));
        worst = worst.max(relative_gap(&pn, &pp));
    }
    for (d, j) in &pushed_idx {
        if !nu_idx.contains_key(d) && !pushed.prob(*j).is_zero() {
            worst = worst.max(1.0);
        }
    }
    Ok((worst <= S::TOLERANCE, worst))
}

/// Sparse row-stochastic matrix over atom indices.
#[derive(Clone, Debug)]
pub struct Kernel<S> {
    pub rows: Vec<Vec<(usize, S)>>,
}

impl<S: Scalar> Kernel<S> {
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn row_sums_are_one(&self) -> bool {
        self.rows.iter().all(|r| {
            let mut s = S::zero();
            for (_, p) in r {
                s = s + p.clone();
            }
            relative_gap(&s, &S::one()) <= S::TOLERANCE
        })
    }

    /// `π(x)K(x,y) = π(y)K(y,x)` for every entry.
    pub fn detailed_balance(&self, pi: &[S]) -> bool {
        let lookup = |x: usize, y: usize| self.rows[x].iter().find(|(j, _)| *j == y).map(|(_, p)| p.clone());
        for (x, row) in self.rows.iter().enumerate() {
            for (y, p) in row {
                let back = lookup(*y, x).unwrap_or_else(S::zero);
                let lhs = pi[x].clone() * p.clone();
                let rhs = pi[*y].clone() * back;
                if relative_gap(&lhs, &rhs) > S::TOLERANCE {
                    return false;
                }
            }
        }
        true
    }

    /// `v ↦ vK`.
    pub fn apply_left(&self, v: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); v.len()];
        for (x, row) in self.rows.iter().enumerate() {
            if v[x].is_zero() {
                continue;
            }
            for (y, p) in row {
                out[*y] = out[*y].clone() + v[x].clone() * p.clone();
            }
        }
        out
    }

    /// Strong connectivity of the support graph.
    pub fn is_irreducible(&self) -> bool {
        let n = self.size();
        if n == 0 {
            return true;
        }
        let reach = |fwd: bool| {
            let mut adj = vec![Vec::new(); n];
            for (x, row) in self.rows.iter().enumerate() {
                for (y, p) in row {
                    if !p.is_zero() {
                        if fwd {
                            adj[x].push(*y);
                        } else {
                            adj[*y].push(x);
                        }
                    }
                }
            }
            let mut seen = vec![false; n];
            seen[0] = true;
            let mut stack = vec![0];
            while let Some(x) = stack.pop() {
                for &y in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            seen.into_iter().all(|b| b)
        };
        reach(true) && reach(false)
    }
}

/// `π K_1 K_2 ⋯ K_n = π` for a sequence of kernels.
pub fn composition_is_stationary<S: Scalar>(kernels: &[Kernel<S>], pi: &[S]) -> bool {
    let mut v = pi.to_vec();
    for k in kernels {
        v = k.apply_left(&v);
    }
    v.iter().zip(pi).all(|(a, b)| relative_gap(a, b) <= S::TOLERANCE)
}

/// Union of the supports of several kernels, as a kernel with unit entries.
pub fn union_support<S: Scalar>(kernels: &[Kernel<S>]) -> Kernel<S> {
    let n = kernels.first().map_or(0, |k| k.size());
    let mut rows = vec![Vec::new(); n];
    for k in kernels {
        for (x, row) in k.rows.iter().enumerate() {
            for (y, p) in row {
                if !p.is_zero() && !rows[x].iter().any(|(j, _): &(usize, S)| j == y) {
                    rows[x].push((*y, S::one()));
                }
            }
        }
    }
    Kernel { rows }
}

/// Translate-and-negate map `g(i, j) = 1 − f(i − 1, j)` from heights on a
/// domain to heights on its translate by `(1, 0)`.
pub fn shift_one_minus(h: &HeightFunction, target: &Arc<Domain>) -> Option<HeightFunction> {
    let image = |u: FaceCoord| h.get(u.offset(-1, 0)).map_or(i32::MIN, |v| 1 - v);
    HeightFunction::new(target.clone(), &Boundary::from_fn(target, image), image).ok()
}

/// Both measures extended by zero-weight atoms to the union of their supports.
pub fn on_common_support<C: Clone + Eq + Hash, S: Scalar>(
    mu: &ExactMeasure<C, S>,
    nu: &ExactMeasure<C, S>,
) -> (ExactMeasure<C, S>, ExactMeasure<C, S>) {
    let extend = |a: &ExactMeasure<C, S>, b: &ExactMeasure<C, S>| {
        let idx = a.index();
        let mut atoms = a.atoms.clone();
        atoms.extend(b.atoms.iter().filter(|(c, _)| !idx.contains_key(c)).map(|(c, _)| (c.clone(), S::zero())));
        ExactMeasure::new(atoms)
    };
    (extend(mu, nu), extend(nu, mu))
}

/// `μ ⪯ ν` for measures whose supports may differ.
pub fn dominated_by<C: Lattice, S: Scalar>(
    mu: &ExactMeasure<C, S>,
    nu: &ExactMeasure<C, S>,
) -> Result<DominationVerdict, OracleError> {
    let (a, b) = on_common_support(mu, nu);
    stochastic_domination_check(&a, &b)
}

/// The faces of `domain` none of whose corners lies on exactly one face:
/// the domain left after deleting the vertices of `∂_V D` and their edges.
pub fn strip_boundary_vertices(domain: &Domain) -> Result<Domain, OracleError> {
    let boundary: std::collections::HashSet<_> = domain.boundary_vertex_set().into_iter().collect();
    let faces = domain.faces().iter().copied().filter(|f| f.vertices().iter().all(|z| !boundary.contains(z)));
    Ok(Domain::from_faces(faces)?)
}

/// The height measure on `inner` with flat boundary `(even, odd)`, written as
/// height functions on `outer` equal to the flat values off `inner`.
pub fn lifted_flat_measure<S: Scalar>(
    outer: &Arc<Domain>,
    outer_boundary: &Boundary,
    inner: &Arc<Domain>,
    even: i32,
    odd: i32,
    params: &ModelParams<S>,
) -> Result<ExactMeasure<HeightFunction, S>, OracleError> {
    let flat = Boundary::Flat { even, odd };
    let mu = enumerate_heights(inner, &flat, params, WeightMode::Plain)?;
    let mut atoms = Vec::with_capacity(mu.len());
    for (h, w) in &mu.atoms {
        let lifted = HeightFunction::new(outer.clone(), outer_boundary, |u| if inner.contains(u) { h.at(u) } else { flat.value(u).unwrap() })?;
        atoms.push((lifted, w.clone()));
    }
    Ok(ExactMeasure::new(atoms))
}

fn domination_report<C: Lattice, S: Scalar>(
    identity: &str,
    domain: &str,
    params: String,
    lo: &ExactMeasure<C, S>,
    hi: &ExactMeasure<C, S>,
) -> Result<IdentityReport, OracleError> {
    let mut rep = IdentityReport::new(identity, domain, &params);
    let (a, b) = on_common_support(lo, hi);
    rep.atoms = a.len();
    if let DominationVerdict::Counterexample(up) = stochastic_domination_check(&a, &b)? {
        let (ma, mb) = event_masses(&a, &b, &up);
        rep.max_deviation = (ma.clone() - mb.clone()).to_f64();
        rep.fail(format!("increasing event of {} atoms with mass {} > {}", up.len(), ma.to_f64(), mb.to_f64()));
    }
    Ok(rep)
}

fn describe_cb<S: Scalar>(cb: &Cb<S>) -> String {
    match cb {
        Cb::Finite(x) => format!("{:.6}", x.to_f64()),
        Cb::Infinite => "inf".to_string(),
    }
}

/// The chain `HF^{−1,0}_{D'} ⪯ HF^{0,1;c_b[0]}_D ⪯ … ⪯ HF^{0,1;c_b[k]}_D ⪯ HF^{0,1}_{D'}`
/// on an even domain, where `D'` is `D` with its boundary vertices removed and the
/// two outer measures are lifted to `D` with flat values on `D ∖ D'`. The
/// boundary weights must be increasing.
pub fn cb_monotonicity_suite<S: Scalar>(
    domain: &Arc<Domain>,
    params: &ModelParams<S>,
    cbs: &[Cb<S>],
) -> Result<Vec<IdentityReport>, OracleError> {
    let inner = Arc::new(strip_boundary_vertices(domain)?);
    let b = Boundary::zero_one();
    let lower = lifted_flat_measure(domain, &b, &inner, 0, -1, params)?;
    let upper = lifted_flat_measure(domain, &b, &inner, 0, 1, params)?;
    let mut chain = vec![("lower".to_string(), lower)];
    for cb in cbs {
        let p = params.clone().with_cb(cb.clone());
        chain.push((format!("cb={}", describe_cb(cb)), enumerate_heights(domain, &b, &p, WeightMode::BoundaryCb)?));
    }
    chain.push(("upper".to_string(), upper));
    let label = format!("{}faces", domain.num_faces());
    let base = format!("a={:.4} b={:.4} c={:.4}", params.a.to_f64(), params.b.to_f64(), params.c.to_f64());
    let mut reports = Vec::new();
    for w in chain.windows(2) {
        reports.push(domination_report("cb_height_monotonicity", &label, format!("{base} {} <= {}", w[0].0, w[1].0), &w[0].1, &w[1].1)?);
    }
    let last = chain.len() - 1;
    for k in 1..last {
        reports.push(domination_report("cb_height_sandwich", &label, format!("{base} lower <= {}", chain[k].0), &chain[0].1, &chain[k].1)?);
        reports.push(domination_report("cb_height_sandwich", &label, format!("{base} {} <= upper", chain[k].0), &chain[k].1, &chain[last].1)?);
    }
    Ok(reports)
}

/// Heights with `0,1` boundary and boundary weight `c_b`, consecutive pairs of
/// `cbs` compared in the given direction. Used to probe odd domains, where the
/// order is not fixed in advance.
pub fn cb_height_order<S: Scalar>(
    domain: &Arc<Domain>,
    params: &ModelParams<S>,
    cbs: &[Cb<S>],
    increasing: bool,
) -> Result<Vec<IdentityReport>, OracleError> {
    let b = Boundary::zero_one();
    let label = format!("{}faces", domain.num_faces());
    let mut measures = Vec::new();
    for cb in cbs {
        measures.push(enumerate_heights(domain, &b, &params.clone().with_cb(cb.clone()), WeightMode::BoundaryCb)?);
    }
    let mut reports = Vec::new();
    for k in 0..cbs.len().saturating_sub(1) {
        let (lo, hi) = if increasing { (k, k + 1) } else { (k + 1, k) };
        let text = format!("c={:.4} cb {} <= cb {}", params.c.to_f64(), describe_cb(&cbs[lo]), describe_cb(&cbs[hi]));
        reports.push(domination_report("cb_height_order", &label, text, &measures[lo], &measures[hi])?);
    }
    Ok(reports)
}

/// Spins with plus boundary and boundary weight `c_b`, restricted to the even
/// faces, checked to increase along `cbs`.
pub fn cb_spin_monotonicity_suite<S: Scalar>(
    domain: &Arc<Domain>,
    params: &ModelParams<S>,
    cbs: &[Cb<S>],
) -> Result<Vec<IdentityReport>, OracleError> {
    let b = Boundary::zero_one();
    let even: Vec<FaceCoord> = domain.faces().iter().copied().filter(|f| f.parity() == crate::lattice::Parity::Even).collect();
    let label = format!("{}faces", domain.num_faces());
    let mut measures = Vec::new();
    for cb in cbs {
        let mu = enumerate_heights(domain, &b, &params.clone().with_cb(cb.clone()), WeightMode::BoundaryCb)?;
        measures.push(mu.pushforward(|h| SpinVector(even.iter().map(|f| spin_of_height(h.at(*f))).collect())));
    }
    let mut reports = Vec::new();
    for k in 0..cbs.len().saturating_sub(1) {
        let text = format!("c={:.4} cb {} <= cb {}", params.c.to_f64(), describe_cb(&cbs[k]), describe_cb(&cbs[k + 1]));
        reports.push(domination_report("cb_spin_monotonicity", &label, text, &measures[k], &measures[k + 1])?);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_diamond;
    use crate::scalar::Surd;

    #[test]
    fn lambda1_has_two_atoms() {
        let d = Arc::new(build_diamond(1, FaceCoord::new(0, 0)));
        let p = ModelParams::symmetric(Surd::from_ratio(5, 2)).unwrap();
        let mu = enumerate_heights(&d, &Boundary::zero_one(), &p, WeightMode::Plain).unwrap();
        let mut ws: Vec<f64> = mu.atoms.iter().map(|(_, w)| w.to_f64()).collect();
        ws.sort_by(f64::total_cmp);
        assert_eq!(ws, vec![1.0, 39.0625]);
    }

    #[test]
    fn lambda2_atom_count() {
        let d = Arc::new(build_diamond(2, FaceCoord::new(0, 0)));
        let hs = enumerate_height_functions(&d, &Boundary::zero_one()).unwrap();
        assert_eq!(hs.len(), 18);
    }

    #[test]
    fn identical_measures_dominate_each_other() {
        let g = Graph::new(3, vec![(0, 1), (1, 2)], vec![true, false, false]);
        let p = RcParams::new(Surd::from_i64(2), Surd::ratio(3, 2), Surd::ratio(1, 2));
        let mu = enumerate_rc(&g, &p).unwrap();
        assert_eq!(stochastic_domination_check(&mu, &mu).unwrap(), DominationVerdict::Pass);
    }

    #[test]
    fn domination_detects_reversed_order() {
        let g = Graph::new(2, vec![(0, 1)], vec![false, false]);
        let lo = enumerate_rc(&g, &RcParams::new(Surd::one(), Surd::one(), Surd::ratio(1, 4))).unwrap();
        let hi = enumerate_rc(&g, &RcParams::new(Surd::one(), Surd::one(), Surd::ratio(3, 4))).unwrap();
        assert_eq!(stochastic_domination_check(&lo, &hi).unwrap(), DominationVerdict::Pass);
        match stochastic_domination_check(&hi, &lo).unwrap() {
            DominationVerdict::Counterexample(up) => {
                let (a, b) = event_masses(&hi, &lo, &up);
                assert!(a.total_cmp(&b).is_gt());
            }
            DominationVerdict::Pass => panic!("expected a violation"),
        }
    }
}
