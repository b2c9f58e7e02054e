//! FK–Ising representation `ξ` of the spin representation, living on the odd
//! corner graph D∘, and its coupling with the Ashkin–Teller model on the even
//! corner graph D• along the self-dual curve `sinh 2J = e^{−2U}`, `c = coth 2J`.
//!
//! Edge `z` of D∘ and edge `z` of D• are dual to each other and both belong to
//! vertex `z` of the domain; `ξ*(z) = 1 − ξ(z)`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CouplingError, LatticeError, OracleError, ParamError, RepresentationError};
use crate::exact_oracle::{enumerate_heights, proportionality, ExactMeasure, IdentityReport, SpinVector};
use crate::lattice::{Domain, FaceCoord, Graph, Parity};
use crate::random_cluster::{components, PlanarPair, RcConfig};
use crate::representations::{height_to_spin, spin_of_height, Boundary, ModelParams, SpinConfig, WeightMode};
use crate::scalar::{relative_gap, Scalar};

/// Largest number of edges for the five-variable joint enumeration.
pub const MAX_AT_EDGES: usize = 14;

/// Tolerance of the self-dual test `sinh 2J = e^{−2U}`.
pub const SELF_DUAL_TOLERANCE: f64 = 1e-12;

/// The corner graphs of a domain together with the orderings of even and odd
/// faces used to key spin vectors.
#[derive(Clone, Debug)]
pub struct FkLayout {
    domain: Arc<Domain>,
    pair: PlanarPair,
    even_faces: Vec<FaceCoord>,
    odd_faces: Vec<FaceCoord>,
}

impl FkLayout {
    pub fn new(domain: Arc<Domain>) -> Self {
        let pair = PlanarPair::new(&domain);
        let even_faces = domain.faces().iter().copied().filter(|f| f.parity() == Parity::Even).collect();
        let odd_faces = domain.faces().iter().copied().filter(|f| f.parity() == Parity::Odd).collect();
        FkLayout { domain, pair, even_faces, odd_faces }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn pair(&self) -> &PlanarPair {
        &self.pair
    }

    /// D•: carries `ξ*` and the Ashkin–Teller spins; corners are boundary vertices.
    pub fn even_graph(&self) -> &Graph {
        self.pair.primal.graph()
    }

    /// D∘ with corners left unwired.
    pub fn odd_graph(&self) -> &Graph {
        self.pair.odd.graph()
    }

    pub fn num_edges(&self) -> usize {
        self.pair.num_edges()
    }

    pub fn even_faces(&self) -> &[FaceCoord] {
        &self.even_faces
    }

    pub fn odd_faces(&self) -> &[FaceCoord] {
        &self.odd_faces
    }

    /// `σ` read at every vertex of D•; corners take the value of their exterior face.
    pub fn even_node_spins(&self, sigma: &SpinConfig) -> Vec<i8> {
        (0..self.even_graph().num_vertices).map(|v| sigma.at(self.pair.primal.representative(v))).collect()
    }

    pub fn odd_node_spins(&self, sigma: &SpinConfig) -> Vec<i8> {
        (0..self.odd_graph().num_vertices).map(|v| sigma.at(self.pair.odd.representative(v))).collect()
    }

    pub fn sigma_bullet(&self, sigma: &SpinConfig) -> SpinVector {
        SpinVector(self.even_faces.iter().map(|f| sigma.at(*f)).collect())
    }

    pub fn sigma_circ(&self, sigma: &SpinConfig) -> SpinVector {
        SpinVector(self.odd_faces.iter().map(|f| sigma.at(*f)).collect())
    }

    /// For each vertex of D•, the position of its face in [`Self::even_faces`].
    fn even_face_slots(&self) -> Vec<Option<usize>> {
        node_slots(&self.pair.primal, &self.even_faces)
    }

    fn odd_face_slots(&self) -> Vec<Option<usize>> {
        node_slots(&self.pair.odd, &self.odd_faces)
    }
}

fn node_slots(graph: &crate::lattice::CornerGraph, faces: &[FaceCoord]) -> Vec<Option<usize>> {
    let pos: HashMap<FaceCoord, usize> = faces.iter().enumerate().map(|(k, f)| (*f, k)).collect();
    (0..graph.num_vertices())
        .map(|v| if graph.is_boundary(v) { None } else { pos.get(&graph.representative(v)).copied() })
        .collect()
}

/// An edge configuration on D∘.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FkIsingConfig {
    pub xi: RcConfig,
}

impl FkIsingConfig {
    pub fn new(xi: RcConfig) -> Self {
        FkIsingConfig { xi }
    }

    /// `ξ*` on D•.
    pub fn dual(&self) -> RcConfig {
        self.xi.dual()
    }

    pub fn num_open(&self) -> usize {
        self.xi.num_open()
    }

    pub fn to_snapshot(&self) -> String {
        self.xi.to_snapshot()
    }

    pub fn from_snapshot(text: &str, m: usize) -> Result<Self, LatticeError> {
        Ok(FkIsingConfig { xi: RcConfig::from_snapshot(text, m)? })
    }
}

fn diagonal_disagreement(sigma: &SpinConfig, parity: Parity) -> Vec<bool> {
    sigma
        .domain()
        .vertices()
        .iter()
        .map(|z| {
            let f = z.faces();
            let (x, y) = if f[0].parity() == parity { (f[0], f[2]) } else { (f[1], f[3]) };
            sigma.at(x) != sigma.at(y)
        })
        .collect()
}

/// `ω(σ•)`: vertices whose two even faces carry opposite spins.
pub fn omega(sigma: &SpinConfig) -> Vec<bool> {
    diagonal_disagreement(sigma, Parity::Even)
}

/// `θ(σ∘)`: vertices whose two odd faces carry opposite spins.
pub fn theta(sigma: &SpinConfig) -> Vec<bool> {
    diagonal_disagreement(sigma, Parity::Odd)
}

/// `ω(σ•) ⊆ ξ` and `ξ ∩ θ(σ∘) = ∅`.
pub fn is_compatible(sigma: &SpinConfig, xi: &FkIsingConfig) -> bool {
    omega(sigma).iter().zip(theta(sigma)).zip(&xi.xi.open).all(|((w, t), x)| (!w || *x) && !(t && *x))
}

fn check_xi_params<S: Scalar>(p: &ModelParams<S>) -> Result<(), ParamError> {
    let m = S::max_of(p.a.clone(), p.b.clone());
    if p.c.total_cmp(&m).is_lt() {
        return Err(ParamError::OutOfRange { name: "c", value: p.c.to_f64(), why: "must be at least max(a, b)" });
    }
    Ok(())
}

/// Probability that an unforced edge of `ξ` is open at a vertex whose
/// top-left face has parity `class`: `(c−a)/c` for odd, `(c−b)/c` for even.
pub fn free_open_probability<S: Scalar>(params: &ModelParams<S>, class: Parity) -> S {
    let w = match class {
        Parity::Odd => params.a.clone(),
        Parity::Even => params.b.clone(),
    };
    (params.c.clone() - w) / params.c.clone()
}

/// Draws `ξ` given `σ`: open on `ω(σ•)`, closed on `θ(σ∘)`, otherwise open
/// with [`free_open_probability`].
pub fn sample_xi_given_spins<R: Rng + ?Sized>(
    sigma: &SpinConfig,
    params: &ModelParams<f64>,
    rng: &mut R,
) -> Result<FkIsingConfig, ParamError> {
    check_xi_params(params)?;
    let p = [free_open_probability(params, Parity::Even), free_open_probability(params, Parity::Odd)];
    let vertices = sigma.domain().vertices();
    let open = omega(sigma)
        .into_iter()
        .zip(theta(sigma))
        .zip(vertices)
        .map(|((w, t), z)| if w { true } else if t { false } else { rng.gen::<f64>() < p[z.top_left_parity().index()] })
        .collect();
    Ok(FkIsingConfig { xi: RcConfig { open } })
}

/// Conditional probability of `ξ` given `σ` under [`sample_xi_given_spins`].
pub fn xi_given_spins_probability<S: Scalar>(sigma: &SpinConfig, xi: &FkIsingConfig, params: &ModelParams<S>) -> Result<S, ParamError> {
    check_xi_params(params)?;
    if !is_compatible(sigma, xi) {
        return Ok(S::zero());
    }
    let (om, th) = (omega(sigma), theta(sigma));
    let mut w = S::one();
    for (k, z) in sigma.domain().vertices().iter().enumerate() {
        if om[k] || th[k] {
            continue;
        }
        let p = free_open_probability(params, z.top_left_parity());
        w = w * if xi.xi.open[k] { p } else { S::one() - p };
    }
    Ok(w)
}

/// `(c−1)^{|ξ| − |ω(σ•)|}` on compatible pairs, zero otherwise.
pub fn joint_weight_sigma_xi<S: Scalar>(sigma: &SpinConfig, xi: &FkIsingConfig, c: &S) -> S {
    if !is_compatible(sigma, xi) {
        return S::zero();
    }
    let n_omega = omega(sigma).iter().filter(|w| **w).count() as i64;
    (c.clone() - S::one()).powi(xi.num_open() as i64 - n_omega)
}

/// Sign assignments to the clusters of `comp` with boundary clusters `+`:
/// calls `f` with the per-vertex spins, for all `2^{k_i}` assignments.
fn for_each_cluster_assignment<F: FnMut(&[i8])>(comp: &crate::random_cluster::Components, pinned: bool, mut f: F) {
    let free: Vec<usize> = (0..comp.count).filter(|c| !pinned || !comp.touches_boundary[*c]).collect();
    let mut sign = vec![1i8; comp.count];
    let mut spins = vec![1i8; comp.label.len()];
    for mask in 0u64..(1u64 << free.len()) {
        for (bit, c) in free.iter().enumerate() {
            sign[*c] = if mask >> bit & 1 == 1 { -1 } else { 1 };
        }
        for (v, l) in comp.label.iter().enumerate() {
            spins[v] = sign[*l];
        }
        f(&spins);
    }
}

/// `(c−1)^{|ξ|} 2^{k(ξ¹)} Σ_{σ•: ω(σ•) ⊆ ξ} (c−1)^{−|ω(σ•)|}`, with `ξ¹` the
/// configuration on D∘ with its boundary wired and `σ•` plus at the corners.
pub fn fkis_weight<S: Scalar>(layout: &FkLayout, xi: &FkIsingConfig, c: &S) -> S {
    let cm1 = c.clone() - S::one();
    let k1 = components(&layout.pair.dual, &xi.xi.open).count;
    let star = xi.dual();
    let g = layout.even_graph();
    let comp = components(g, &star.open);
    let mut sum = S::zero();
    for_each_cluster_assignment(&comp, true, |spins| {
        let n_omega = g.edges.iter().filter(|(u, v)| spins[*u] != spins[*v]).count();
        sum = sum.clone() + cm1.powi(-(n_omega as i64));
    });
    cm1.powi(xi.num_open() as i64) * S::from_i64(1 << k1) * sum
}

fn require_plus_plus(domain: &Domain, boundary: &Boundary) -> Result<(), RepresentationError> {
    for u in domain.halo() {
        let v = boundary.value(*u).ok_or(RepresentationError::BoundaryMismatch)?;
        if spin_of_height(v) != 1 {
            return Err(RepresentationError::BoundaryMismatch);
        }
    }
    Ok(())
}

/// `σ∘` given `ξ` under plus boundary: boundary clusters of `ξ` get `+`, every
/// other cluster an independent fair sign. Returned in [`FkLayout::odd_faces`] order.
pub fn resample_spins_given_xi<R: Rng + ?Sized>(
    layout: &FkLayout,
    xi: &FkIsingConfig,
    boundary: &Boundary,
    rng: &mut R,
) -> Result<SpinVector, RepresentationError> {
    require_plus_plus(&layout.domain, boundary)?;
    let comp = components(layout.odd_graph(), &xi.xi.open);
    let sign: Vec<i8> =
        (0..comp.count).map(|c| if comp.touches_boundary[c] || rng.gen::<bool>() { 1 } else { -1 }).collect();
    let slots = layout.odd_face_slots();
    let mut out = vec![1i8; layout.odd_faces.len()];
    for (v, slot) in slots.iter().enumerate() {
        if let Some(k) = slot {
            out[*k] = sign[comp.label[v]];
        }
    }
    Ok(SpinVector(out))
}

/// Spin measure with plus boundary on both sublattices, as the image of the
/// height measure with 0,1 boundary.
pub fn spin_plus_plus_measure<S: Scalar>(domain: &Arc<Domain>, params: &ModelParams<S>) -> Result<ExactMeasure<SpinConfig, S>, OracleError> {
    Ok(enumerate_heights(domain, &Boundary::zero_one(), params, WeightMode::Plain)?.pushforward(height_to_spin))
}

/// Exact FK–Ising measure from the closed-form weight, over all `2^{|E|}` configurations.
pub fn fkis_measure<S: Scalar>(layout: &FkLayout, c: &S) -> Result<ExactMeasure<RcConfig, S>, OracleError> {
    let m = layout.num_edges();
    if m > crate::exact_oracle::MAX_RC_EDGES {
        return Err(OracleError::TooLarge { what: "edges", size: m, cap: crate::exact_oracle::MAX_RC_EDGES });
    }
    let atoms = (0..1u64 << m)
        .map(|mask| {
            let xi = FkIsingConfig::new(RcConfig::from_mask(m, mask));
            let w = fkis_weight(layout, &xi, c);
            (xi.xi, w)
        })
        .collect();
    Ok(ExactMeasure::new(atoms))
}

fn mask_of(spins: impl Iterator<Item = i8>) -> u64 {
    spins.enumerate().fold(0, |m, (k, s)| if s < 0 { m | 1 << k } else { m })
}

fn describe_c<S: Scalar>(c: &S) -> String {
    format!("c={:.6}", c.to_f64())
}

/// The three parts of the FK–Ising lemma on one domain with `a = b = 1`:
/// the joint law of `(σ, ξ)`, the closed form of the `ξ`-marginal, and the
/// cluster construction of the `σ∘`-marginal.
pub fn fk_ising_checks<S: Scalar>(domain: &Arc<Domain>, c: &S) -> Result<Vec<IdentityReport>, OracleError> {
    let layout = FkLayout::new(domain.clone());
    let m = layout.num_edges();
    if m > MAX_AT_EDGES {
        return Err(OracleError::TooLarge { what: "edges", size: m, cap: MAX_AT_EDGES });
    }
    let params = ModelParams::symmetric(c.clone())?;
    let spins = spin_plus_plus_measure(domain, &params)?;
    let label = format!("{}faces", domain.num_faces());
    let pstr = describe_c(c);

    // joint law generated by the conditional sampling rule
    let mut joint: Vec<(usize, u64, S)> = Vec::new();
    for (k, (sigma, w)) in spins.atoms.iter().enumerate() {
        let (om, th) = (omega(sigma), theta(sigma));
        let free: Vec<usize> = (0..m).filter(|z| !om[*z] && !th[*z]).collect();
        let forced = mask_of(om.iter().map(|b| if *b { -1 } else { 1 }));
        for sub in 0u64..(1 << free.len()) {
            let mut mask = forced;
            for (bit, z) in free.iter().enumerate() {
                if sub >> bit & 1 == 1 {
                    mask |= 1 << z;
                }
            }
            let xi = FkIsingConfig::new(RcConfig::from_mask(m, mask));
            let p = xi_given_spins_probability(sigma, &xi, &params)?;
            joint.push((k, mask, w.clone() * p));
        }
    }

    let mut rep_i = IdentityReport::new("fk_ising_joint", &label, &pstr);
    let pairs: Vec<(S, S)> = joint
        .iter()
        .map(|(k, mask, w)| (w.clone(), joint_weight_sigma_xi(&spins.atoms[*k].0, &FkIsingConfig::new(RcConfig::from_mask(m, *mask)), c)))
        .collect();
    let (dev, bad) = proportionality(&pairs);
    rep_i.max_deviation = dev;
    rep_i.atoms = pairs.len();
    if let Some(b) = bad {
        rep_i.fail(format!("pair {b}"));
    }
    // the support is exactly the compatible pairs
    let compatible: usize = spins
        .atoms
        .iter()
        .map(|(sigma, _)| (0u64..1 << m).filter(|mask| is_compatible(sigma, &FkIsingConfig::new(RcConfig::from_mask(m, *mask)))).count())
        .sum();
    if compatible != joint.len() {
        rep_i.fail(format!("support {} vs compatible pairs {compatible}", joint.len()));
    }

    let mut rep_ii = IdentityReport::new("fk_ising_marginal", &label, &pstr);
    let mut xi_marg: HashMap<u64, S> = HashMap::new();
    for (_, mask, w) in &joint {
        let e = xi_marg.entry(*mask).or_insert_with(S::zero);
        *e = e.clone() + w.clone();
    }
    let fk: Vec<S> = (0u64..1 << m).map(|mask| fkis_weight(&layout, &FkIsingConfig::new(RcConfig::from_mask(m, mask)), c)).collect();
    let pairs: Vec<(S, S)> =
        (0u64..1 << m).map(|mask| (xi_marg.get(&mask).cloned().unwrap_or_else(S::zero), fk[mask as usize].clone())).collect();
    let (dev, bad) = proportionality(&pairs);
    rep_ii.max_deviation = dev;
    rep_ii.atoms = pairs.len();
    if let Some(b) = bad {
        rep_ii.fail(format!("xi mask {b:#x}"));
    }

    let mut rep_iii = IdentityReport::new("fk_ising_odd_spins", &label, &pstr);
    let spin_circ = spins.pushforward(|s| layout.sigma_circ(s));
    let slots = layout.odd_face_slots();
    let mut built: HashMap<SpinVector, S> = HashMap::new();
    for (mask, w) in fk.iter().enumerate() {
        let xi = RcConfig::from_mask(m, mask as u64);
        let comp = components(layout.odd_graph(), &xi.open);
        let share = w.clone() / S::from_i64(1 << comp.k_i());
        for_each_cluster_assignment(&comp, true, |node_spins| {
            let mut v = vec![1i8; layout.odd_faces.len()];
            for (node, slot) in slots.iter().enumerate() {
                if let Some(k) = slot {
                    v[*k] = node_spins[node];
                }
            }
            let e = built.entry(SpinVector(v)).or_insert_with(S::zero);
            *e = e.clone() + share.clone();
        });
    }
    let mut pairs: Vec<(S, S)> = spin_circ.atoms.iter().map(|(s, w)| (built.remove(s).unwrap_or_else(S::zero), w.clone())).collect();
    // mass the construction puts outside the spin support
    for (_, w) in built {
        pairs.push((w, S::zero()));
    }
    let (dev, bad) = proportionality(&pairs);
    rep_iii.max_deviation = dev;
    rep_iii.atoms = pairs.len();
    if let Some(b) = bad {
        rep_iii.fail(format!("odd spin vector {b}"));
    }
    Ok(vec![rep_i, rep_ii, rep_iii])
}

/// Which side of the self-dual curve's Potts point the parameters lie on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtRegime {
    /// `J < U`, equivalently `c > 2`.
    JBelowU,
    /// The four-state Potts point `J = U = ¼ log 3`, `c = 2`.
    Potts,
    /// `J > U`, equivalently `c < 2`.
    JAboveU,
}

/// Ashkin–Teller couplings, with the six-vertex `c` when on the self-dual curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtParams {
    pub j: f64,
    pub u: f64,
    pub self_dual: bool,
    /// `coth 2J`, set only on the self-dual curve.
    pub c: Option<f64>,
    pub regime: AtRegime,
    /// `e^{−4J}`, the probability that an agreeing edge is closed in `ξ*`.
    pub exp_minus_4j: f64,
}

impl AtParams {
    pub fn new(j: f64, u: f64) -> Result<Self, ParamError> {
        if !(j > 0.0) || !j.is_finite() {
            return Err(ParamError::OutOfRange { name: "J", value: j, why: "must be positive and finite" });
        }
        if !u.is_finite() {
            return Err(ParamError::OutOfRange { name: "U", value: u, why: "must be finite" });
        }
        let lhs = (2.0 * j).sinh();
        let rhs = (-2.0 * u).exp();
        let self_dual = (lhs - rhs).abs() <= SELF_DUAL_TOLERANCE * lhs.max(rhs).max(1.0);
        let regime = if (j - u).abs() <= SELF_DUAL_TOLERANCE * j.max(1.0) {
            AtRegime::Potts
        } else if j < u {
            AtRegime::JBelowU
        } else {
            AtRegime::JAboveU
        };
        let c = self_dual.then(|| 1.0 / (2.0 * j).tanh());
        Ok(AtParams { j, u, self_dual, c, regime, exp_minus_4j: (-4.0 * j).exp() })
    }

    /// Relative residuals of `e^{2J+2U} = c+1` and `e^{−2J+2U} = c−1`.
    pub fn identity_residuals(&self) -> Option<(f64, f64)> {
        let c = self.c?;
        let plus = (2.0 * self.j + 2.0 * self.u).exp();
        let minus = (-2.0 * self.j + 2.0 * self.u).exp();
        Some(((plus - (c + 1.0)).abs() / (c + 1.0), (minus - (c - 1.0)).abs() / (c - 1.0)))
    }
}

/// The point of the self-dual curve with coupling `J`.
pub fn selfdual_params(j: f64) -> Result<AtParams, ParamError> {
    if !(j > 0.0) || !j.is_finite() {
        return Err(ParamError::OutOfRange { name: "J", value: j, why: "must be positive and finite" });
    }
    AtParams::new(j, -0.5 * (2.0 * j).sinh().ln())
}

/// The point of the self-dual curve with `coth 2J = c`.
pub fn selfdual_params_from_c(c: f64) -> Result<AtParams, ParamError> {
    if !(c > 1.0) || !c.is_finite() {
        return Err(ParamError::OutOfRange { name: "c", value: c, why: "must exceed 1" });
    }
    selfdual_params(0.25 * ((c + 1.0) / (c - 1.0)).ln())
}

/// Two spin fields on the vertices of D•.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AtConfig {
    pub tau: Vec<i8>,
    pub tau_prime: Vec<i8>,
}

impl AtConfig {
    /// Bit `k` set means spin `−1` at vertex `k`.
    pub fn from_masks(n: usize, tau: u64, tau_prime: u64) -> Self {
        let spins = |m: u64| (0..n).map(|k| if m >> k & 1 == 1 { -1 } else { 1 }).collect();
        AtConfig { tau: spins(tau), tau_prime: spins(tau_prime) }
    }

    pub fn product(&self) -> Vec<i8> {
        self.tau.iter().zip(&self.tau_prime).map(|(a, b)| a * b).collect()
    }

    /// `τ = τ'` on every boundary vertex of `graph`.
    pub fn satisfies_boundary(&self, graph: &Graph) -> bool {
        (0..graph.num_vertices).all(|v| !graph.boundary[v] || self.tau[v] == self.tau_prime[v])
    }
}

/// `exp Σ_{uv} [J(τ_uτ_v + τ'_uτ'_v) + U τ_uτ_vτ'_uτ'_v]`.
pub fn at_weight(graph: &Graph, cfg: &AtConfig, j: f64, u: f64) -> f64 {
    let s: f64 = graph
        .edges
        .iter()
        .map(|&(x, y)| {
            let a = (cfg.tau[x] * cfg.tau[y]) as f64;
            let b = (cfg.tau_prime[x] * cfg.tau_prime[y]) as f64;
            j * (a + b) + u * a * b
        })
        .sum();
    s.exp()
}

/// The same weight on the self-dual curve, times `e^{U|E|}`: each edge gives
/// `c+1` when both fields agree across it, `c−1` when both disagree, `1` otherwise.
pub fn at_weight_c_form<S: Scalar>(graph: &Graph, cfg: &AtConfig, c: &S) -> S {
    let mut w = S::one();
    for &(x, y) in &graph.edges {
        let a = cfg.tau[x] == cfg.tau[y];
        let b = cfg.tau_prime[x] == cfg.tau_prime[y];
        match (a, b) {
            (true, true) => w = w * (c.clone() + S::one()),
            (false, false) => w = w * (c.clone() - S::one()),
            _ => {}
        }
    }
    w
}

/// `ξ*` given `(τ, τ')`: closed across any disagreement, otherwise open with
/// probability `1 − e^{−4J}`.
pub fn sample_xi_star_given_tau<R: Rng + ?Sized>(
    graph: &Graph,
    cfg: &AtConfig,
    params: &AtParams,
    rng: &mut R,
) -> Result<RcConfig, ParamError> {
    if !params.self_dual {
        return Err(ParamError::OutOfRange { name: "U", value: params.u, why: "parameters must lie on the self-dual curve" });
    }
    let p = 1.0 - params.exp_minus_4j;
    let open = graph
        .edges
        .iter()
        .map(|&(x, y)| cfg.tau[x] == cfg.tau[y] && cfg.tau_prime[x] == cfg.tau_prime[y] && rng.gen::<f64>() < p)
        .collect();
    Ok(RcConfig { open })
}

/// `τ` uniform and independent on the clusters of `ξ*`, and `τ' = τ · product`.
pub fn sample_tau_given_xi_star<R: Rng + ?Sized>(
    graph: &Graph,
    xi_star: &RcConfig,
    product: &[i8],
    rng: &mut R,
) -> Result<AtConfig, CouplingError> {
    let comp = components(graph, &xi_star.open);
    let mut seen = vec![0i8; comp.count];
    for (v, l) in comp.label.iter().enumerate() {
        if seen[*l] == 0 {
            seen[*l] = product[v];
        } else if seen[*l] != product[v] {
            return Err(CouplingError::NotConstantOnCluster);
        }
    }
    let sign: Vec<i8> = (0..comp.count).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
    let tau: Vec<i8> = comp.label.iter().map(|l| sign[*l]).collect();
    let tau_prime = tau.iter().zip(product).map(|(a, b)| a * b).collect();
    Ok(AtConfig { tau, tau_prime })
}

/// Sums of `2^a (c−1)^b` kept as multiplicities per exponent pair, so the
/// enumeration is independent of `c` and exact.
#[derive(Clone, Debug, Default)]
struct Poly(BTreeMap<(i32, i32), u64>);

impl Poly {
    fn add(&mut self, e2: i32, e1: i32) {
        *self.0.entry((e2, e1)).or_insert(0) += 1;
    }

    fn eval<S: Scalar>(&self, cm1: &S, cache: &mut HashMap<(i32, i32), S>) -> S {
        let mut sum = S::zero();
        for (&(e2, e1), &n) in &self.0 {
            let term = cache
                .entry((e2, e1))
                .or_insert_with(|| S::from_i64(2).powi(e2 as i64) * cm1.powi(e1 as i64))
                .clone();
            sum = sum + S::from_i64(n as i64) * term;
        }
        sum
    }
}

/// Marginals of the five-variable joint law, as exponent polynomials.
#[derive(Clone, Debug, Default)]
struct JointTables {
    /// `(τ, τ')` as bit masks over the vertices of D•.
    at: HashMap<(u64, u64), Poly>,
    xi: HashMap<u64, Poly>,
    /// `(σ•, σ∘)` as bit masks over the even and odd faces.
    spin: HashMap<(u64, u64), Poly>,
    tau: HashMap<u64, Poly>,
}

fn joint_tables(layout: &FkLayout) -> Result<JointTables, OracleError> {
    let m = layout.num_edges();
    let g = layout.even_graph();
    let n = g.num_vertices;
    if m > MAX_AT_EDGES || n > 63 {
        return Err(OracleError::TooLarge { what: "edges", size: m, cap: MAX_AT_EDGES });
    }
    let even_slots = layout.even_face_slots();
    let odd_slots = layout.odd_face_slots();
    let mut t = JointTables::default();
    for mask in 0u64..1 << m {
        let xi = RcConfig::from_mask(m, mask);
        let n_xi = xi.num_open() as i32;
        let star = xi.dual();
        let comp_star = components(g, &star.open);
        let comp_xi = components(layout.odd_graph(), &xi.open);
        let k_star = comp_star.count as i32;
        let free_circ = comp_xi.k_i() as i32;
        // σ∘ choices are the same for every σ•
        let mut circ_masks = Vec::with_capacity(1 << free_circ);
        for_each_cluster_assignment(&comp_xi, true, |s| {
            circ_masks.push(mask_of(odd_slots.iter().enumerate().filter_map(|(v, slot)| slot.map(|_| s[v]))));
        });
        for_each_cluster_assignment(&comp_star, true, |bullet| {
            let n_omega = g.edges.iter().filter(|(u, v)| bullet[*u] != bullet[*v]).count() as i32;
            let e1 = n_xi - n_omega;
            let bullet_mask = mask_of(even_slots.iter().enumerate().filter_map(|(v, slot)| slot.map(|_| bullet[v])));
            t.xi.entry(mask).or_default().0.entry((free_circ, e1)).and_modify(|x| *x += 1).or_insert(1);
            for cm in &circ_masks {
                t.spin.entry((bullet_mask, *cm)).or_default().add(0, e1);
            }
            for_each_cluster_assignment(&comp_star, false, |tau| {
                let tm = mask_of(tau.iter().copied());
                let tpm = mask_of(tau.iter().zip(bullet).map(|(a, b)| a * b));
                t.at.entry((tm, tpm)).or_default().add(free_circ - k_star, e1);
                t.tau.entry(tm).or_default().add(free_circ - k_star, e1);
            });
        });
    }
    Ok(t)
}

fn eval_table<K: Clone + Eq + std::hash::Hash, S: Scalar>(table: &HashMap<K, Poly>, cm1: &S) -> HashMap<K, S> {
    let mut cache = HashMap::new();
    table.iter().map(|(k, p)| (k.clone(), p.eval(cm1, &mut cache))).collect()
}

fn proportionality_report<S: Scalar>(rep: &mut IdentityReport, pairs: &[(S, S)], what: &str) {
    let (dev, bad) = proportionality(pairs);
    rep.max_deviation = rep.max_deviation.max(dev);
    rep.atoms = pairs.len();
    if let Some(b) = bad {
        rep.fail(format!("{what} {b}"));
    }
}

fn at_joint_reports<S: Scalar>(
    layout: &FkLayout,
    c: &S,
    params_label: &str,
    reference: &dyn Fn(&AtConfig) -> S,
) -> Result<Vec<IdentityReport>, OracleError> {
    let tables = joint_tables(layout)?;
    let cm1 = c.clone() - S::one();
    let g = layout.even_graph();
    let n = g.num_vertices;
    let m = layout.num_edges();
    let label = format!("{}faces", layout.domain.num_faces());
    let boundary_mask = mask_of((0..n).map(|v| if g.boundary[v] { -1 } else { 1 }));
    let mut reports = Vec::new();

    // (τ, τ') marginal against the Ashkin–Teller weight with τ = τ' on the boundary
    let at = eval_table(&tables.at, &cm1);
    let mut rep = IdentityReport::new("at_marginal", &label, params_label);
    let mut pairs = Vec::new();
    let interior: Vec<usize> = (0..n).filter(|v| !g.boundary[*v]).collect();
    for tm in 0u64..1 << n {
        for sub in 0u64..1 << interior.len() {
            let mut tpm = tm & boundary_mask;
            for (bit, v) in interior.iter().enumerate() {
                if sub >> bit & 1 == 1 {
                    tpm |= 1 << v;
                }
            }
            let cfg = AtConfig::from_masks(n, tm, tpm);
            pairs.push((at.get(&(tm, tpm)).cloned().unwrap_or_else(S::zero), reference(&cfg)));
        }
    }
    proportionality_report(&mut rep, &pairs, "tau pair");
    if let Some(k) = tables.at.keys().find(|(a, b)| (a ^ b) & boundary_mask != 0) {
        rep.fail(format!("mass where tau != tau' on the boundary: {k:?}"));
    }
    reports.push(rep);

    // ξ marginal against the closed form
    let xi = eval_table(&tables.xi, &cm1);
    let fk: Vec<S> = (0u64..1 << m).map(|mask| fkis_weight(layout, &FkIsingConfig::new(RcConfig::from_mask(m, mask)), c)).collect();
    let mut rep = IdentityReport::new("fkis_marginal", &label, params_label);
    let pairs: Vec<(S, S)> = (0u64..1 << m).map(|k| (xi.get(&k).cloned().unwrap_or_else(S::zero), fk[k as usize].clone())).collect();
    proportionality_report(&mut rep, &pairs, "xi mask");
    reports.push(rep);

    // (σ•, σ∘) marginal against the spin measure
    let params = ModelParams::symmetric(c.clone())?;
    let spins = spin_plus_plus_measure(&layout.domain, &params)?;
    let spin = eval_table(&tables.spin, &cm1);
    let mut rep = IdentityReport::new("spin_marginal", &label, params_label);
    let mut keys: HashMap<(u64, u64), S> = HashMap::new();
    for (s, w) in &spins.atoms {
        let key = (mask_of(layout.sigma_bullet(s).0.into_iter()), mask_of(layout.sigma_circ(s).0.into_iter()));
        keys.insert(key, w.clone());
    }
    let mut pairs: Vec<(S, S)> = keys.iter().map(|(k, w)| (spin.get(k).cloned().unwrap_or_else(S::zero), w.clone())).collect();
    for (k, w) in &spin {
        if !keys.contains_key(k) {
            pairs.push((w.clone(), S::zero()));
        }
    }
    proportionality_report(&mut rep, &pairs, "spin key");
    reports.push(rep);

    // τ marginal against i.i.d. fair signs on the clusters of ξ*, ξ from the closed form
    let tau = eval_table(&tables.tau, &cm1);
    let mut built: HashMap<u64, S> = HashMap::new();
    let mut connect = vec![vec![S::zero(); n]; n];
    let mut z_fk = S::zero();
    for (mask, w) in fk.iter().enumerate() {
        let star = RcConfig::from_mask(m, mask as u64).dual();
        let comp = components(g, &star.open);
        let share = w.clone() / S::from_i64(1 << comp.count);
        for_each_cluster_assignment(&comp, false, |t| {
            let e = built.entry(mask_of(t.iter().copied())).or_insert_with(S::zero);
            *e = e.clone() + share.clone();
        });
        for u in 0..n {
            for v in u + 1..n {
                if comp.label[u] == comp.label[v] {
                    connect[u][v] = connect[u][v].clone() + w.clone();
                }
            }
        }
        z_fk = z_fk + w.clone();
    }
    let mut rep = IdentityReport::new("tau_cluster_construction", &label, params_label);
    let pairs: Vec<(S, S)> =
        (0u64..1 << n).map(|k| (tau.get(&k).cloned().unwrap_or_else(S::zero), built.get(&k).cloned().unwrap_or_else(S::zero))).collect();
    proportionality_report(&mut rep, &pairs, "tau mask");
    reports.push(rep);

    // E[τ_u τ_v] = P(u ↔ v in ξ*)
    let z_tau = tau.values().fold(S::zero(), |a, b| a + b.clone());
    let mut rep = IdentityReport::new("tau_correlation_connectivity", &label, params_label);
    let mut count = 0;
    for u in 0..n {
        for v in u + 1..n {
            let mut corr = S::zero();
            for (k, w) in &tau {
                let same = (k >> u & 1) == (k >> v & 1);
                corr = if same { corr + w.clone() } else { corr - w.clone() };
            }
            let lhs = corr / z_tau.clone();
            let rhs = connect[u][v].clone() / z_fk.clone();
            let gap = relative_gap(&lhs, &rhs);
            rep.max_deviation = rep.max_deviation.max(gap);
            if gap > S::TOLERANCE {
                rep.fail(format!("vertices {u},{v}: {} vs {}", lhs.to_f64(), rhs.to_f64()));
            }
            count += 1;
        }
    }
    rep.atoms = count;
    reports.push(rep);

    // ττ' marginal against the σ• marginal of the spin measure
    let even_slots = layout.even_face_slots();
    let mut product: HashMap<u64, S> = HashMap::new();
    for ((a, b), w) in &at {
        let p = a ^ b;
        let key = mask_of(even_slots.iter().enumerate().filter_map(|(v, s)| s.map(|_| if p >> v & 1 == 1 { -1 } else { 1 })));
        let e = product.entry(key).or_insert_with(S::zero);
        *e = e.clone() + w.clone();
    }
    let bullet = spins.pushforward(|s| mask_of(layout.sigma_bullet(s).0.into_iter()));
    let mut rep = IdentityReport::new("product_marginal", &label, params_label);
    let mut pairs: Vec<(S, S)> = bullet.atoms.iter().map(|(k, w)| (product.remove(k).unwrap_or_else(S::zero), w.clone())).collect();
    pairs.extend(product.into_values().map(|w| (w, S::zero())));
    proportionality_report(&mut rep, &pairs, "product key");
    reports.push(rep);
    Ok(reports)
}

/// Exact check of the five-variable coupling on `domain` at `c`, against the
/// Ashkin–Teller weight in its `c` form.
pub fn at_joint_check<S: Scalar>(domain: &Arc<Domain>, c: &S) -> Result<Vec<IdentityReport>, OracleError> {
    let layout = FkLayout::new(domain.clone());
    let g = layout.even_graph().clone();
    let cc = c.clone();
    at_joint_reports(&layout, c, &describe_c(c), &move |cfg| at_weight_c_form(&g, cfg, &cc))
}

/// The same check in floating point against the exponential form of the
/// Ashkin–Teller weight at coupling `params`.
pub fn at_joint_check_exp(domain: &Arc<Domain>, params: &AtParams) -> Result<Vec<IdentityReport>, OracleError> {
    let c = params.c.ok_or(ParamError::OutOfRange { name: "U", value: params.u, why: "parameters must lie on the self-dual curve" })?;
    let layout = FkLayout::new(domain.clone());
    let g = layout.even_graph().clone();
    let (j, u) = (params.j, params.u);
    at_joint_reports(&layout, &c, &format!("J={j} U={u:.6}"), &move |cfg| at_weight(&g, cfg, j, u))
}

/// Marginal of a height measure on the even-face spins, ordered as `faces`.
pub fn sigma_bullet_marginal<S: Scalar>(
    domain: &Arc<Domain>,
    boundary: &Boundary,
    params: &ModelParams<S>,
    mode: WeightMode,
) -> Result<ExactMeasure<SpinVector, S>, OracleError> {
    let faces: Vec<FaceCoord> = domain.faces().iter().copied().filter(|f| f.parity() == Parity::Even).collect();
    let mu = enumerate_heights(domain, boundary, params, mode)?;
    Ok(mu.pushforward(|h| SpinVector(faces.iter().map(|f| spin_of_height(h.at(*f))).collect())))
}

/// Two even faces whose spins are never both `−` although each alone can be.
#[derive(Clone, Debug, PartialEq)]
pub struct FkgCounterexample {
    pub u: FaceCoord,
    pub v: FaceCoord,
    pub p_u_minus: f64,
    pub p_v_minus: f64,
    pub p_both_minus: f64,
}

/// Searches the `σ•` marginal for a pair `u, v` with `P(σ(u) = σ(v) = −1) = 0`
/// and both single-site minus probabilities positive.
pub fn find_sigma_bullet_counterexample<S: Scalar>(
    domain: &Arc<Domain>,
    boundary: &Boundary,
    params: &ModelParams<S>,
) -> Result<Option<FkgCounterexample>, OracleError> {
    let faces: Vec<FaceCoord> = domain.faces().iter().copied().filter(|f| f.parity() == Parity::Even).collect();
    let mu = sigma_bullet_marginal(domain, boundary, params, WeightMode::Plain)?;
    for a in 0..faces.len() {
        for b in a + 1..faces.len() {
            let pa = mu.probability_of(|s| s.0[a] < 0);
            let pb = mu.probability_of(|s| s.0[b] < 0);
            let both = mu.probability_of(|s| s.0[a] < 0 && s.0[b] < 0);
            if both.is_zero() && !pa.is_zero() && !pb.is_zero() {
                return Ok(Some(FkgCounterexample {
                    u: faces[a],
                    v: faces[b],
                    p_u_minus: pa.to_f64(),
                    p_v_minus: pb.to_f64(),
                    p_both_minus: 0.0,
                }));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_diamond;
    use crate::Surd;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn potts_point() {
        let p = selfdual_params(0.25 * 3f64.ln()).unwrap();
        assert!(p.self_dual);
        assert_eq!(p.regime, AtRegime::Potts);
        assert!((p.c.unwrap() - 2.0).abs() < 1e-12);
        assert!((p.u - 0.25 * 3f64.ln()).abs() < 1e-12);
        assert!((p.exp_minus_4j - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_edge_weights() {
        let g = Graph::new(2, vec![(0, 1)], vec![false, false]);
        let (j, u) = (0.3, 0.7);
        let all_plus = AtConfig::from_masks(2, 0, 0);
        assert!((at_weight(&g, &all_plus, j, u) - (2.0 * j + u).exp()).abs() < 1e-12);
        let mixed = AtConfig::from_masks(2, 0, 0b10);
        assert!((at_weight(&g, &mixed, j, u) - (-u).exp()).abs() < 1e-12);
    }

    #[test]
    fn lambda1_fk_checks_exact() {
        let d = Arc::new(build_diamond(1, FaceCoord::new(0, 0)));
        for r in fk_ising_checks(&d, &Surd::from_i64(3)).unwrap() {
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn forced_edges() {
        let d = Arc::new(build_diamond(2, FaceCoord::new(1, 0)));
        // even faces around the odd centre: flip one even face to minus
        let sigma = SpinConfig::new(d.clone(), |f| if f == FaceCoord::new(0, 0) { -1 } else { 1 }).unwrap();
        let om = omega(&sigma);
        assert!(om.iter().any(|b| *b));
        let params = ModelParams::symmetric(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let xi = sample_xi_given_spins(&sigma, &params, &mut rng).unwrap();
            assert!(is_compatible(&sigma, &xi));
            for (z, w) in om.iter().enumerate() {
                if *w {
                    assert!(xi.xi.open[z]);
                }
            }
        }
    }
}
