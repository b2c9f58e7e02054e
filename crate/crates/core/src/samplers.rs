//! Seeded Markov chains: single-face heat-bath for height functions,
//! single-edge heat-bath for the random-cluster model, exact transition
//! matrices of both, and batch-means diagnostics.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, OracleError, RepresentationError};
use crate::exact_oracle::{enumerate_heights, enumerate_rc, ExactMeasure, IdentityReport, Kernel};
use crate::lattice::{Domain, FaceCoord, Graph, Parity, ParityClass};
use crate::random_cluster::{open_probability, Connectivity, RcConfig, RcParams};
use crate::representations::{spin_of_height, Boundary, Cb, HeightFunction, ModelParams, VertexKind, WeightMode};
use crate::scalar::Scalar;

/// Default number of batches for batch-means error bars.
pub const DEFAULT_BATCHES: usize = 32;

/// Generator for chain `stream` of a run seeded with `seed`.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug)]
struct VertexSlot {
    /// Grid index of the face diagonally opposite the updated face.
    diag: usize,
    /// Kind of the vertex when the updated face disagrees with `diag`.
    kind: VertexKind,
    boundary: bool,
    class: Parity,
}

#[derive(Clone, Debug)]
struct Site {
    idx: usize,
    nbrs: [usize; 4],
    verts: [VertexSlot; 4],
}

/// Per-face lookup tables for the single-site conditional of a height measure.
#[derive(Clone, Debug)]
pub struct HeightKernel {
    domain: Arc<Domain>,
    sites: Vec<Site>,
}

/// Vertex weights as seen by one face update; `cb` applies only in boundary mode.
#[derive(Clone, Debug)]
pub struct SiteWeights<S> {
    a: S,
    b: S,
    c: S,
    cb: Option<[S; 2]>,
}

impl<S: Scalar> SiteWeights<S> {
    pub fn new(params: &ModelParams<S>, mode: WeightMode) -> Result<Self, RepresentationError> {
        let cb = match mode {
            WeightMode::Plain => None,
            WeightMode::BoundaryCb => {
                let get = |cb: &Cb<S>| match cb {
                    Cb::Finite(x) => Ok(x.clone()),
                    Cb::Infinite => Err(RepresentationError::InfiniteWeight),
                };
                Some([get(&params.cb[0])?, get(&params.cb[1])?])
            }
        };
        Ok(SiteWeights { a: params.a.clone(), b: params.b.clone(), c: params.c.clone(), cb })
    }

    fn factor(&self, slot: &VertexSlot, c_type: bool) -> S {
        match (&self.cb, slot.boundary, c_type) {
            (Some(cb), true, true) => cb[slot.class.index()].clone(),
            (Some(_), true, false) => S::one(),
            (_, _, true) => self.c.clone(),
            (_, _, false) => match slot.kind {
                VertexKind::A => self.a.clone(),
                _ => self.b.clone(),
            },
        }
    }
}

impl HeightKernel {
    pub fn new(domain: Arc<Domain>) -> Self {
        let grid = domain.grid();
        let mut sites = Vec::with_capacity(domain.num_faces());
        for u in domain.faces() {
            let idx = grid.index(*u).unwrap();
            let nbrs = u.neighbors().map(|v| grid.index(v).unwrap());
            // vertices of u in the order NW, NE, SE, SW; u sits opposite to each
            let verts = u.vertices();
            let mut slots = Vec::with_capacity(4);
            for (k, z) in verts.iter().enumerate() {
                let faces = z.faces();
                let diag = faces[k];
                let kind = if k % 2 == 0 { VertexKind::A } else { VertexKind::B };
                let zi = domain.vertex_index(*z).unwrap();
                slots.push(VertexSlot {
                    diag: grid.index(diag).unwrap(),
                    kind,
                    boundary: domain.is_boundary_vertex(zi),
                    class: z.top_left_parity(),
                });
            }
            sites.push(Site { idx, nbrs, verts: [slots[0], slots[1], slots[2], slots[3]] });
        }
        HeightKernel { domain, sites }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    /// For site `k`: `None` if its value is forced by the neighbours, else
    /// `(w, P(h = w + 1))` where `w` is the common neighbour value.
    pub fn conditional<S: Scalar>(&self, values: &[i32], k: usize, weights: &SiteWeights<S>) -> Option<(i32, S)> {
        let site = &self.sites[k];
        let w = values[site.nbrs[0]];
        if site.nbrs[1..].iter().any(|n| values[*n] != w) {
            return None;
        }
        let mut up = S::one();
        let mut down = S::one();
        for slot in &site.verts {
            let d = values[slot.diag];
            up = up * weights.factor(slot, d == w + 1);
            down = down * weights.factor(slot, d == w - 1);
        }
        Some((w, up.clone() / (up + down)))
    }

    /// One raster-order heat-bath sweep over all faces.
    pub fn sweep<R: Rng + ?Sized>(&self, h: &mut HeightFunction, weights: &SiteWeights<f64>, rng: &mut R) {
        let values = h.raw_mut();
        for k in 0..self.sites.len() {
            self.update_raw(values, k, weights, rng);
        }
    }

    /// Heat-bath update of face `k` alone.
    pub fn update_site<R: Rng + ?Sized>(&self, h: &mut HeightFunction, k: usize, weights: &SiteWeights<f64>, rng: &mut R) {
        self.update_raw(h.raw_mut(), k, weights, rng);
    }

    #[inline]
    fn update_raw<R: Rng + ?Sized>(&self, values: &mut [i32], k: usize, weights: &SiteWeights<f64>, rng: &mut R) {
        if let Some((w, p)) = self.conditional(values, k, weights) {
            values[self.sites[k].idx] = if rng.gen::<f64>() < p { w + 1 } else { w - 1 };
        }
    }

    fn site_index(&self, k: usize) -> usize {
        self.sites[k].idx
    }
}

fn check_mode(domain: &Domain, mode: WeightMode) -> Result<(), RepresentationError> {
    if mode == WeightMode::BoundaryCb && domain.parity_class() == ParityClass::Mixed {
        return Err(RepresentationError::MixedDomain);
    }
    Ok(())
}

/// One heat-bath sweep of `h`. Builds the lookup tables on each call; chains
/// should hold a [`HeightKernel`] instead.
pub fn height_heat_bath_sweep<R: Rng + ?Sized>(
    h: &HeightFunction,
    params: &ModelParams<f64>,
    mode: WeightMode,
    rng: &mut R,
) -> Result<HeightFunction, RepresentationError> {
    check_mode(h.domain(), mode)?;
    let kernel = HeightKernel::new(h.domain().clone());
    let weights = SiteWeights::new(params, mode)?;
    let mut out = h.clone();
    kernel.sweep(&mut out, &weights, rng);
    Ok(out)
}

/// Single-edge heat-bath over a fixed graph.
#[derive(Clone, Debug)]
pub struct RcKernel {
    graph: Graph,
    conn: Connectivity,
}

impl RcKernel {
    pub fn new(graph: &Graph) -> Self {
        RcKernel { graph: graph.clone(), conn: Connectivity::new(graph) }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Probability that edge `e` is open given the rest of `open`.
    pub fn conditional<S: Scalar>(&mut self, open: &[bool], e: usize, params: &RcParams<S>) -> S {
        let merge = self.conn.probe(open, e);
        open_probability(merge, params.edge_p(self.graph.edge_class[e]), params)
    }

    pub fn sweep<R: Rng + ?Sized>(&mut self, eta: &mut RcConfig, params: &RcParams<f64>, rng: &mut R) {
        for e in 0..self.graph.num_edges() {
            self.update_edge(eta, e, params, rng);
        }
    }

    pub fn update_edge<R: Rng + ?Sized>(&mut self, eta: &mut RcConfig, e: usize, params: &RcParams<f64>, rng: &mut R) {
        let p = self.conditional(&eta.open, e, params);
        eta.open[e] = rng.gen::<f64>() < p;
    }
}

pub fn rc_heat_bath_sweep<R: Rng + ?Sized>(graph: &Graph, eta: &RcConfig, params: &RcParams<f64>, rng: &mut R) -> RcConfig {
    let mut kernel = RcKernel::new(graph);
    let mut out = eta.clone();
    kernel.sweep(&mut out, params, rng);
    out
}

/// Exact per-face kernels of the height heat-bath, in sweep order, over the
/// atoms of the target measure.
pub fn height_site_kernels<S: Scalar>(
    domain: &Arc<Domain>,
    boundary: &Boundary,
    params: &ModelParams<S>,
    mode: WeightMode,
) -> Result<(ExactMeasure<HeightFunction, S>, Vec<Kernel<S>>), OracleError> {
    check_mode(domain, mode)?;
    let mu = enumerate_heights(domain, boundary, params, mode)?;
    let index = mu.index();
    let kernel = HeightKernel::new(domain.clone());
    let weights = SiteWeights::new(params, mode)?;
    let mut kernels = Vec::with_capacity(kernel.num_sites());
    for k in 0..kernel.num_sites() {
        let mut rows = Vec::with_capacity(mu.len());
        for (x, (h, _)) in mu.atoms.iter().enumerate() {
            match kernel.conditional(h.raw(), k, &weights) {
                None => rows.push(vec![(x, S::one())]),
                Some((w, p)) => {
                    let mut row = Vec::with_capacity(2);
                    for (v, pv) in [(w + 1, p.clone()), (w - 1, S::one() - p)] {
                        let mut values = h.raw().to_vec();
                        values[kernel.site_index(k)] = v;
                        let y = HeightFunction::from_raw(domain.clone(), values);
                        let j = *index.get(&y).ok_or(OracleError::PartialMap)?;
                        row.push((j, pv));
                    }
                    rows.push(row);
                }
            }
        }
        kernels.push(Kernel { rows });
    }
    Ok((mu, kernels))
}

/// Exact per-edge kernels of the random-cluster heat-bath.
pub fn rc_edge_kernels<S: Scalar>(
    graph: &Graph,
    params: &RcParams<S>,
) -> Result<(ExactMeasure<RcConfig, S>, Vec<Kernel<S>>), OracleError> {
    let mu = enumerate_rc(graph, params)?;
    let index = mu.index();
    let mut kernel = RcKernel::new(graph);
    let mut kernels = Vec::with_capacity(graph.num_edges());
    for e in 0..graph.num_edges() {
        let mut rows = Vec::with_capacity(mu.len());
        for (eta, _) in &mu.atoms {
            let p = kernel.conditional(&eta.open, e, params);
            let mut row = Vec::with_capacity(2);
            for (state, pv) in [(true, p.clone()), (false, S::one() - p.clone())] {
                let mut next = eta.clone();
                next.open[e] = state;
                row.push((index[&next], pv));
            }
            rows.push(row);
        }
        kernels.push(Kernel { rows });
    }
    Ok((mu, kernels))
}

/// Starting configuration of a chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Boundary values continued inside (heights), or all edges closed.
    Flat,
    /// All edges open (random-cluster only).
    AllOpen,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub seed: u64,
    pub sweeps: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thinning: usize,
    #[serde(default = "flat")]
    pub initial_state: InitialState,
    /// Record the state after every single-site update instead of once per sweep.
    #[serde(default)]
    pub record_updates: bool,
}

fn one() -> usize {
    1
}

fn flat() -> InitialState {
    InitialState::Flat
}

impl ChainSpec {
    pub fn new(seed: u64, sweeps: usize, burn_in: usize) -> Self {
        ChainSpec { seed, sweeps, burn_in, thinning: 1, initial_state: InitialState::Flat, record_updates: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub mean: f64,
    pub stderr: f64,
    pub n_batches: usize,
    pub tau_int: f64,
}

impl EstimateWithError {
    pub fn exact(value: f64) -> Self {
        EstimateWithError { mean: value, stderr: 0.0, n_batches: 0, tau_int: 0.0 }
    }

    /// Half-width of the 95% normal interval.
    pub fn ci95(&self) -> f64 {
        1.96 * self.stderr
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.mean - self.ci95(), self.mean + self.ci95())
    }

    pub fn overlaps(&self, other: &EstimateWithError) -> bool {
        let (a0, a1) = self.interval();
        let (b0, b1) = other.interval();
        a0 <= b1 && b0 <= a1
    }
}

/// Batch-means mean and standard error; trailing samples that do not fill a
/// batch are dropped from the error estimate but kept in the mean.
pub fn batch_means(series: &[f64], n_batches: usize) -> EstimateWithError {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n.max(1) as f64;
    let tau = integrated_autocorrelation(series, (n / 100).max(1));
    let size = n / n_batches.max(1);
    if size == 0 || n_batches < 2 {
        return EstimateWithError { mean, stderr: f64::NAN, n_batches: 0, tau_int: tau };
    }
    let batches: Vec<f64> =
        (0..n_batches).map(|b| series[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let bm = batches.iter().sum::<f64>() / n_batches as f64;
    let var = batches.iter().map(|x| (x - bm).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
    EstimateWithError { mean, stderr: (var / n_batches as f64).sqrt(), n_batches, tau_int: tau }
}

/// `1/2 + Σ_{t=1}^{max_lag} ρ(t)`, truncated at the first negative autocorrelation.
pub fn integrated_autocorrelation(series: &[f64], max_lag: usize) -> f64 {
    let n = series.len();
    if n < 2 {
        return 0.5;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0 = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for t in 1..=max_lag.min(n - 1) {
        let ct = (0..n - t).map(|i| (series[i] - mean) * (series[i + t] - mean)).sum::<f64>() / n as f64;
        let rho = ct / c0;
        if rho < 0.0 {
            break;
        }
        tau += rho;
    }
    tau
}

/// What a chain samples.
#[derive(Clone, Debug)]
pub enum ChainModel {
    Heights { domain: Arc<Domain>, boundary: Boundary, params: ModelParams<f64>, mode: WeightMode },
    Rc { graph: Graph, params: RcParams<f64> },
}

/// Scalar functions of a chain state.
#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    Height(FaceCoord),
    HeightSquared(FaceCoord),
    HeightSum(FaceCoord, FaceCoord),
    /// Spin of the face under the mod-4 map.
    Spin(FaceCoord),
    SpinProduct(FaceCoord, FaceCoord),
    EdgeDensity,
    EdgeOpen(usize),
    /// Fraction of open edges among the listed ones.
    EdgeSetDensity(Vec<usize>),
    /// Whether the vertex lies in a cluster touching the boundary.
    ConnectedToBoundary(usize),
}

impl Observable {
    /// Parses `h(i,j)`, `h2(i,j)`, `hsum(i,j;k,l)`, `s(i,j)`, `ss(i,j;k,l)`,
    /// `edge_density`, `edge(e)`, `conn(v)`.
    pub fn parse(s: &str) -> Result<Self, ExperimentError> {
        let bad = || ExperimentError::UnknownObservable(s.to_string());
        let s = s.trim();
        if s == "edge_density" {
            return Ok(Observable::EdgeDensity);
        }
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        let nums = |t: &str| -> Result<Vec<i32>, ExperimentError> {
            t.split(',').map(|x| x.trim().parse::<i32>().map_err(|_| bad())).collect()
        };
        let face = |t: &str| -> Result<FaceCoord, ExperimentError> {
            match nums(t)?.as_slice() {
                [i, j] => Ok(FaceCoord::new(*i, *j)),
                _ => Err(bad()),
            }
        };
        match name {
            "h" => Ok(Observable::Height(face(args)?)),
            "h2" => Ok(Observable::HeightSquared(face(args)?)),
            "s" => Ok(Observable::Spin(face(args)?)),
            "hsum" | "ss" => {
                let (x, y) = args.split_once(';').ok_or_else(bad)?;
                let (u, v) = (face(x)?, face(y)?);
                Ok(if name == "hsum" { Observable::HeightSum(u, v) } else { Observable::SpinProduct(u, v) })
            }
            "edge" => Ok(Observable::EdgeOpen(args.trim().parse().map_err(|_| bad())?)),
            "conn" => Ok(Observable::ConnectedToBoundary(args.trim().parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }

    fn check(&self, model: &ChainModel) -> Result<(), ExperimentError> {
        let ok = match (self, model) {
            (Observable::Height(u) | Observable::HeightSquared(u) | Observable::Spin(u), ChainModel::Heights { domain, .. }) => {
                domain.contains(*u)
            }
            (Observable::HeightSum(u, v) | Observable::SpinProduct(u, v), ChainModel::Heights { domain, .. }) => {
                domain.contains(*u) && domain.contains(*v)
            }
            (Observable::EdgeDensity, ChainModel::Rc { .. }) => true,
            (Observable::EdgeOpen(e), ChainModel::Rc { graph, .. }) => *e < graph.num_edges(),
            (Observable::EdgeSetDensity(es), ChainModel::Rc { graph, .. }) => !es.is_empty() && es.iter().all(|e| *e < graph.num_edges()),
            (Observable::ConnectedToBoundary(v), ChainModel::Rc { graph, .. }) => *v < graph.num_vertices,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(ExperimentError::UnknownObservable(format!("{self:?}")))
        }
    }

    /// Whether the observable reads a height configuration.
    pub fn is_height_observable(&self) -> bool {
        matches!(
            self,
            Observable::Height(_)
                | Observable::HeightSquared(_)
                | Observable::HeightSum(..)
                | Observable::Spin(_)
                | Observable::SpinProduct(..)
        )
    }

    /// Value on a height configuration; panics for edge observables.
    pub fn on_heights(&self, h: &HeightFunction) -> f64 {
        match self {
            Observable::Height(u) => h.at(*u) as f64,
            Observable::HeightSquared(u) => (h.at(*u) as f64).powi(2),
            Observable::HeightSum(u, v) => (h.at(*u) + h.at(*v)) as f64,
            Observable::Spin(u) => spin_of_height(h.at(*u)) as f64,
            Observable::SpinProduct(u, v) => (spin_of_height(h.at(*u)) * spin_of_height(h.at(*v))) as f64,
            _ => unreachable!("checked against the model"),
        }
    }

    /// Value on an edge configuration of `graph`; panics for height observables.
    pub fn on_rc(&self, graph: &Graph, eta: &RcConfig) -> f64 {
        match self {
            Observable::EdgeDensity => eta.num_open() as f64 / eta.len().max(1) as f64,
            Observable::EdgeOpen(e) => f64::from(u8::from(eta.open[*e])),
            Observable::EdgeSetDensity(es) => es.iter().filter(|e| eta.open[**e]).count() as f64 / es.len() as f64,
            Observable::ConnectedToBoundary(v) => f64::from(u8::from(reaches_boundary(graph, &eta.open, *v))),
            _ => unreachable!("checked against the model"),
        }
    }
}

/// Breadth-first search from `v` along open edges until a boundary vertex is met.
pub fn reaches_boundary(graph: &Graph, open: &[bool], v: usize) -> bool {
    let inc = graph.incidence();
    let mut seen = vec![false; graph.num_vertices];
    seen[v] = true;
    let mut queue = std::collections::VecDeque::from([v]);
    while let Some(x) = queue.pop_front() {
        if graph.boundary[x] {
            return true;
        }
        for &(e, y) in &inc[x] {
            if open[e] && !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    false
}

/// Drives a chain and calls `visit` on each recorded state.
fn drive<F: FnMut(ChainState<'_>)>(spec: &ChainSpec, model: &ChainModel, mut visit: F) -> Result<(), ExperimentError> {
    let mut rng = chain_rng(spec.seed, 0);
    let thin = spec.thinning.max(1);
    match model {
        ChainModel::Heights { domain, boundary, params, mode } => {
            check_mode(domain, *mode)?;
            let kernel = HeightKernel::new(domain.clone());
            let weights = SiteWeights::new(params, *mode)?;
            let mut h = initial_heights(domain, boundary)?;
            for t in 0..spec.burn_in + spec.sweeps {
                let record = t >= spec.burn_in && (t - spec.burn_in) % thin == 0;
                if record && spec.record_updates {
                    for k in 0..kernel.num_sites() {
                        kernel.update_site(&mut h, k, &weights, &mut rng);
                        visit(ChainState::Heights(&h));
                    }
                } else {
                    kernel.sweep(&mut h, &weights, &mut rng);
                    if record {
                        visit(ChainState::Heights(&h));
                    }
                }
            }
        }
        ChainModel::Rc { graph, params } => {
            let mut kernel = RcKernel::new(graph);
            let mut eta = match spec.initial_state {
                InitialState::Flat => RcConfig::all_closed(graph.num_edges()),
                InitialState::AllOpen => RcConfig::all_open(graph.num_edges()),
            };
            for t in 0..spec.burn_in + spec.sweeps {
                let record = t >= spec.burn_in && (t - spec.burn_in) % thin == 0;
                if record && spec.record_updates {
                    for e in 0..graph.num_edges() {
                        kernel.update_edge(&mut eta, e, params, &mut rng);
                        visit(ChainState::Rc(&eta));
                    }
                } else {
                    kernel.sweep(&mut eta, params, &mut rng);
                    if record {
                        visit(ChainState::Rc(&eta));
                    }
                }
            }
        }
    }
    Ok(())
}

enum ChainState<'a> {
    Heights(&'a HeightFunction),
    Rc(&'a RcConfig),
}

/// The boundary values continued into the domain: the flat function with the
/// boundary's values when they are flat, otherwise the pointwise lowest valid
/// extension.
pub fn initial_heights(domain: &Arc<Domain>, boundary: &Boundary) -> Result<HeightFunction, RepresentationError> {
    if let Boundary::Flat { even, odd } = boundary {
        return HeightFunction::flat(domain.clone(), *even, *odd);
    }
    // lowest extension: distance-based lower envelope of the boundary values
    let halo: Vec<(FaceCoord, i32)> =
        domain.halo().iter().map(|u| Ok((*u, boundary.value(*u).ok_or(RepresentationError::BoundaryMismatch)?))).collect::<Result<_, RepresentationError>>()?;
    let envelope = |u: FaceCoord| {
        halo.iter()
            .map(|(v, t)| t - ((u.i - v.i).abs() + (u.j - v.j).abs()))
            .max()
            .unwrap()
    };
    HeightFunction::new(domain.clone(), boundary, envelope)
}

/// Batch-means estimates of each observable along one chain.
pub fn run_chain(spec: &ChainSpec, model: &ChainModel, observables: &[Observable]) -> Result<Vec<EstimateWithError>, ExperimentError> {
    for o in observables {
        o.check(model)?;
    }
    let mut series = vec![Vec::with_capacity(spec.sweeps / spec.thinning.max(1) + 1); observables.len()];
    let rc_graph = match model {
        ChainModel::Rc { graph, .. } => Some(graph),
        ChainModel::Heights { .. } => None,
    };
    drive(spec, model, |state| {
        for (o, s) in observables.iter().zip(series.iter_mut()) {
            s.push(match state {
                ChainState::Heights(h) => o.on_heights(h),
                ChainState::Rc(eta) => o.on_rc(rc_graph.expect("random-cluster model"), eta),
            });
        }
    })?;
    Ok(series.iter().map(|s| batch_means(s, DEFAULT_BATCHES)).collect())
}

/// Total-variation distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Runs a chain on an enumerable model and compares its empirical law with
/// the exact one. Fails when the total-variation distance exceeds `threshold`.
pub fn exactness_gate(spec: &ChainSpec, model: &ChainModel, threshold: f64) -> Result<IdentityReport, ExperimentError> {
    let (label, exact, keys): (String, Vec<f64>, Box<dyn Fn(&ChainState<'_>) -> Option<usize>>) = match model {
        ChainModel::Heights { domain, boundary, params, mode } => {
            let mu = enumerate_heights(domain, boundary, params, *mode)?;
            let p = mu.probabilities();
            let index: HashMap<Vec<i32>, usize> = mu.atoms.iter().enumerate().map(|(k, (h, _))| (h.raw().to_vec(), k)).collect();
            (
                format!("{}faces", domain.num_faces()),
                p,
                Box::new(move |s: &ChainState<'_>| match s {
                    ChainState::Heights(h) => index.get(h.raw()).copied(),
                    ChainState::Rc(_) => None,
                }),
            )
        }
        ChainModel::Rc { graph, params } => {
            let mu = enumerate_rc(graph, params)?;
            let p = mu.probabilities();
            let index = mu.index();
            (
                format!("{}edges", graph.num_edges()),
                p,
                Box::new(move |s: &ChainState<'_>| match s {
                    ChainState::Rc(eta) => index.get(*eta).copied(),
                    ChainState::Heights(_) => None,
                }),
            )
        }
    };
    let mut counts = vec![0u64; exact.len()];
    let mut total = 0u64;
    let mut stray = 0u64;
    drive(spec, model, |state| {
        total += 1;
        match keys(&state) {
            Some(k) => counts[k] += 1,
            None => stray += 1,
        }
    })?;
    let empirical: Vec<f64> = counts.iter().map(|c| *c as f64 / total.max(1) as f64).collect();
    let tv = total_variation(&empirical, &exact) + stray as f64 / total.max(1) as f64 / 2.0;
    let mut rep = IdentityReport::new("exactness_gate", &label, &format!("sweeps={}", spec.sweeps));
    rep.max_deviation = tv;
    rep.atoms = exact.len();
    if tv > threshold || stray > 0 {
        rep.fail(format!("tv={tv:.5} threshold={threshold} stray={stray}"));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_diamond;

    #[test]
    fn lambda1_conditional_ratio() {
        let d = Arc::new(build_diamond(1, FaceCoord::new(0, 0)));
        let kernel = HeightKernel::new(d.clone());
        let h = HeightFunction::flat(d, 0, 1).unwrap();
        let w = SiteWeights::new(&ModelParams::symmetric(3.0).unwrap(), WeightMode::Plain).unwrap();
        let (base, p) = kernel.conditional(h.raw(), 0, &w).unwrap();
        assert_eq!(base, 1);
        // h = 2 has every vertex non-c, h = 0 every vertex c-type
        assert!((p / (1.0 - p) - 1.0 / 81.0).abs() < 1e-12);
    }

    #[test]
    fn batch_means_of_constant_series() {
        let e = batch_means(&[2.0; 640], 32);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.n_batches, 32);
    }

    #[test]
    fn observables_parse() {
        assert_eq!(Observable::parse("h(0,0)").unwrap(), Observable::Height(FaceCoord::new(0, 0)));
        assert_eq!(
            Observable::parse("hsum(0,0;1,0)").unwrap(),
            Observable::HeightSum(FaceCoord::new(0, 0), FaceCoord::new(1, 0))
        );
        assert_eq!(Observable::parse("ss(0,0;2,0)").unwrap(), Observable::SpinProduct(FaceCoord::new(0, 0), FaceCoord::new(2, 0)));
        assert_eq!(Observable::parse("conn(7)").unwrap(), Observable::ConnectedToBoundary(7));
        assert!(Observable::parse("spin(0,0)").is_err());
    }
}
