//! Coupling between six-vertex height functions and the random-cluster model
//! on the even corner graph: parameter maps, the compatibility relation, the
//! two forms of the joint weight, exact marginal checks and a sampler for
//! heights given an edge configuration.

use std::sync::Arc;

use rand::Rng;

use crate::error::{CouplingError, OracleError, ParamError};
use crate::exact_oracle::{enumerate_heights, proportionality, ExactMeasure, IdentityReport};
use crate::lattice::{Domain, FaceCoord, Parity, ParityClass};
use crate::random_cluster::{
    anisotropic_critical_from_sqrt, decompose, rc_weight, ClusterDecomposition, ClusterId, PlanarPair, RcConfig,
    RcParams,
};
use crate::representations::{height_weight, Boundary, Cb, HeightFunction, ModelParams, WeightMode};
use crate::scalar::Scalar;

/// Joint edge-configuration enumeration cap.
pub const MAX_JOINT_EDGES: usize = 16;

/// Derived quantities of `(a, b, c)` with `a + b ≤ c`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingParams<S> {
    pub a: S,
    pub b: S,
    pub c: S,
    pub delta: S,
    /// `e^λ`, with `cosh λ = −Δ` and `λ ≥ 0`.
    pub exp_lambda: S,
    pub lambda: f64,
    pub sqrt_q: S,
    pub q: S,
    /// `e^{−λ} √q`.
    pub q_b: S,
    /// Per-vertex factor of the edge form for vertices whose top-left face is
    /// even; `Y = e^λ / X`.
    pub x_even: S,
    pub y_even: S,
    /// Boundary weight paired with the wired measure, per top-left class.
    pub c_b: [S; 2],
}

pub fn derive_params<S: Scalar>(a: S, b: S, c: S) -> Result<CouplingParams<S>, ParamError> {
    for (name, v) in [("a", &a), ("b", &b), ("c", &c)] {
        if !(v.to_f64() > 0.0) {
            return Err(ParamError::OutOfRange { name, value: v.to_f64(), why: "must be positive" });
        }
    }
    if (a.clone() + b.clone()).total_cmp(&c).is_gt() {
        return Err(ParamError::UnsupportedRegime { a: a.to_f64(), b: b.to_f64(), c: c.to_f64() });
    }
    let two = S::from_i64(2);
    let delta = (a.clone() * a.clone() + b.clone() * b.clone() - c.clone() * c.clone()) / (two.clone() * a.clone() * b.clone());
    let disc = delta.clone() * delta.clone() - S::one();
    let root = disc.try_sqrt().ok_or(ParamError::OutOfRange {
        name: "delta",
        value: delta.to_f64(),
        why: "cosh(lambda) = -delta has no root in this number system",
    })?;
    let exp_lambda = root - delta.clone();
    let sqrt_q = -(two * delta.clone());
    let q = sqrt_q.clone() * sqrt_q.clone();
    let q_b = sqrt_q.clone() / exp_lambda.clone();
    let x_even = c.clone() * exp_lambda.clone() / (b.clone() * exp_lambda.clone() + a.clone());
    let y_even = exp_lambda.clone() / x_even.clone();
    let lambda = exp_lambda.to_f64().ln();
    let c_b = [x_even.clone(), y_even.clone()];
    Ok(CouplingParams { a, b, c, delta, exp_lambda, lambda, sqrt_q, q, q_b, x_even, y_even, c_b })
}

impl<S: Scalar> CouplingParams<S> {
    /// Edge weight when `e_z` is open.
    pub fn alpha(&self, class: Parity) -> S {
        match class {
            Parity::Even => self.b.clone(),
            Parity::Odd => self.a.clone(),
        }
    }

    /// Edge weight when `e_z` is closed.
    pub fn beta(&self, class: Parity) -> S {
        match class {
            Parity::Even => self.a.clone(),
            Parity::Odd => self.b.clone(),
        }
    }

    pub fn x(&self, class: Parity) -> S {
        match class {
            Parity::Even => self.x_even.clone(),
            Parity::Odd => self.y_even.clone(),
        }
    }

    pub fn y(&self, class: Parity) -> S {
        match class {
            Parity::Even => self.y_even.clone(),
            Parity::Odd => self.x_even.clone(),
        }
    }

    /// Critical random-cluster parameters with the given boundary weight.
    pub fn rc_params(&self, q_b: S) -> RcParams<S> {
        let (pe, po) = anisotropic_critical_from_sqrt(self.a.clone(), self.b.clone(), self.sqrt_q.clone());
        RcParams { q: self.q.clone(), q_b, p: pe.clone(), anisotropic: Some((pe, po)) }
    }

    pub fn model_params(&self) -> ModelParams<S> {
        ModelParams {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            cb: [Cb::Finite(self.c_b[0].clone()), Cb::Finite(self.c_b[1].clone())],
        }
    }

    pub fn describe(&self) -> String {
        format!("a={:.6},b={:.6},c={:.6}", self.a.to_f64(), self.b.to_f64(), self.c.to_f64())
    }
}

/// Heights of the two even and two odd faces at vertex `z` of the domain.
fn diagonals(h: &HeightFunction, pair: &PlanarPair, z: usize) -> Option<([i32; 2], [i32; 2], Parity)> {
    let v = pair.primal_domain_vertex(z);
    let f = v.faces();
    let hs = [h.get(f[0])?, h.get(f[1])?, h.get(f[2])?, h.get(f[3])?];
    let class = v.top_left_parity();
    // NW and SE share the top-left parity
    let (same, other) = ([hs[0], hs[2]], [hs[1], hs[3]]);
    Some(match class {
        Parity::Even => (same, other, class),
        Parity::Odd => (other, same, class),
    })
}

/// `h` is constant on every cluster of `η` and of `η*`, with the flat 0,1 values outside.
pub fn is_compatible(pair: &PlanarPair, h: &HeightFunction, eta: &RcConfig) -> bool {
    let d = h.domain();
    let flat = Boundary::zero_one();
    if d.halo().iter().any(|u| h.get(*u) != flat.value(*u)) {
        return false;
    }
    (0..pair.num_edges()).all(|z| match diagonals(h, pair, z) {
        None => false,
        Some((even, odd, _)) => {
            if eta.open[z] {
                even[0] == even[1]
            } else {
                odd[0] == odd[1]
            }
        }
    })
}

/// `∏_z` of `α X^{s/2}` (open) or `β Y^{−s/2}` (closed), where
/// `s = h(u*) + h(v*) − h(u) − h(v)` at vertex `z`.
pub fn joint_weight_edge<S: Scalar>(
    pair: &PlanarPair,
    h: &HeightFunction,
    eta: &RcConfig,
    params: &CouplingParams<S>,
) -> Result<S, CouplingError> {
    if !is_compatible(pair, h, eta) {
        return Err(CouplingError::Incompatible);
    }
    let mut w = S::one();
    for z in 0..pair.num_edges() {
        let (even, odd, class) = diagonals(h, pair, z).unwrap();
        let half_s = ((odd[0] + odd[1] - even[0] - even[1]) / 2) as i64;
        w = w * if eta.open[z] {
            params.alpha(class) * params.x(class).powi(half_s)
        } else {
            params.beta(class) * params.y(class).powi(-half_s)
        };
    }
    Ok(w)
}

/// Representative faces of primal and dual clusters, for reading heights.
fn cluster_faces(pair: &PlanarPair, dec: &ClusterDecomposition) -> (Vec<FaceCoord>, Vec<FaceCoord>) {
    let mut primal = vec![FaceCoord::new(0, 0); dec.primal.count];
    for v in 0..pair.primal.num_vertices() {
        primal[dec.primal.label[v]] = pair.primal.representative(v);
    }
    let mut dual = vec![FaceCoord::new(0, 0); dec.dual.count];
    for o in 0..pair.odd.num_vertices() {
        dual[dec.dual.label[pair.dual_of_odd[o]]] = pair.odd.representative(o);
    }
    (primal, dual)
}

/// `∏_z (α or β) · e^{λ Σ (h(inner) − h(outer))}` over adjacent cluster pairs.
pub fn joint_weight_cluster<S: Scalar>(
    pair: &PlanarPair,
    dec: &ClusterDecomposition,
    h: &HeightFunction,
    eta: &RcConfig,
    params: &CouplingParams<S>,
) -> Result<S, CouplingError> {
    if !is_compatible(pair, h, eta) {
        return Err(CouplingError::Incompatible);
    }
    if !dec.is_tree() {
        return Err(CouplingError::NotATree { nodes: dec.num_nodes(), edges: dec.adjacency.len() });
    }
    let (pf, df) = cluster_faces(pair, dec);
    let mut exponent = 0i64;
    for &(c, d, primal_inside) in &dec.adjacency {
        let (hc, hd) = (h.at(pf[c]) as i64, h.at(df[d]) as i64);
        exponent += if primal_inside { hc - hd } else { hd - hc };
    }
    let mut w = params.exp_lambda.powi(exponent);
    for z in 0..pair.num_edges() {
        let class = pair.primal_domain_vertex(z).top_left_parity();
        w = w * if eta.open[z] { params.alpha(class) } else { params.beta(class) };
    }
    Ok(w)
}

/// Draws heights from the conditional law given a fixed edge configuration.
#[derive(Clone, Debug)]
pub struct HeightSampler {
    domain: Arc<Domain>,
    /// Tree nodes in breadth-first order with their parents.
    order: Vec<(usize, Option<usize>)>,
    fixed: Vec<Option<i32>>,
    /// `(grid index, tree node)` for every face of the domain.
    cells: Vec<(usize, usize)>,
    template: Vec<i32>,
    p_up: f64,
}

impl HeightSampler {
    pub fn new<S: Scalar>(
        pair: &PlanarPair,
        domain: Arc<Domain>,
        eta: &RcConfig,
        params: &CouplingParams<S>,
    ) -> Result<Self, CouplingError> {
        let dec = decompose(pair, eta);
        if !dec.is_tree() {
            return Err(CouplingError::NotATree { nodes: dec.num_nodes(), edges: dec.adjacency.len() });
        }
        let n = dec.num_nodes();
        let root = dec.node_index(dec.root);
        let mut fixed = vec![None; n];
        fixed[root] = Some(1);
        for c in 0..dec.primal.count {
            if dec.primal.touches_boundary[c] {
                if dec.parent[c] != Some(dec.root) {
                    return Err(CouplingError::NotATree { nodes: n, edges: dec.adjacency.len() });
                }
                fixed[c] = Some(0);
            }
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by_key(|&k| dec.depth[k]);
        let order = idx.into_iter().map(|k| (k, dec.parent[k].map(|p| dec.node_index(p)))).collect();
        let grid = domain.grid();
        let mut cells = Vec::with_capacity(domain.num_faces());
        for u in domain.faces() {
            let z = u.vertices()[0];
            let node = match u.parity() {
                Parity::Even => dec.primal.label[pair.primal.node_at(*u, z).unwrap()],
                Parity::Odd => dec.primal.count + dec.dual.label[pair.dual_of_odd[pair.odd.node_at(*u, z).unwrap()]],
            };
            cells.push((grid.index(*u).unwrap(), node));
        }
        let template = HeightFunction::flat(domain.clone(), 0, 1).map_err(|_| CouplingError::Incompatible)?.raw().to_vec();
        let l = params.exp_lambda.to_f64();
        let p_up = l * l / (l * l + 1.0);
        Ok(HeightSampler { domain, order, fixed, cells, template, p_up })
    }

    /// Probability that a cluster sits one above the cluster surrounding it.
    pub fn p_up(&self) -> f64 {
        self.p_up
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> HeightFunction {
        let mut hc = vec![0i32; self.fixed.len()];
        for &(k, parent) in &self.order {
            hc[k] = match (self.fixed[k], parent) {
                (Some(v), _) => v,
                (None, Some(p)) => hc[p] + if rng.gen::<f64>() < self.p_up { 1 } else { -1 },
                (None, None) => unreachable!("only the root lacks a parent"),
            };
        }
        let mut values = self.template.clone();
        for &(cell, node) in &self.cells {
            values[cell] = hc[node];
        }
        HeightFunction::from_raw(self.domain.clone(), values)
    }
}

/// One draw of heights given `η`, with 0 on primal boundary clusters and 1 on
/// the outer dual cluster.
pub fn sample_heights_given_rc<S: Scalar, R: Rng + ?Sized>(
    pair: &PlanarPair,
    domain: Arc<Domain>,
    eta: &RcConfig,
    params: &CouplingParams<S>,
    rng: &mut R,
) -> Result<HeightFunction, CouplingError> {
    Ok(HeightSampler::new(pair, domain, eta, params)?.draw(rng))
}

/// Exact law of heights given `η`, read off the cluster form of the joint weight.
pub fn exact_conditional<S: Scalar>(
    pair: &PlanarPair,
    domain: &Arc<Domain>,
    eta: &RcConfig,
    params: &CouplingParams<S>,
) -> Result<ExactMeasure<HeightFunction, S>, OracleError> {
    let dec = decompose(pair, eta);
    let mut atoms = Vec::new();
    for h in crate::exact_oracle::enumerate_height_functions(domain, &Boundary::zero_one())? {
        if is_compatible(pair, &h, eta) {
            let w = joint_weight_cluster(pair, &dec, &h, eta, params)?;
            atoms.push((h, w));
        }
    }
    Ok(ExactMeasure::new(atoms))
}

/// Number of compatible `(h, η)` pairs, by enumeration of both sides.
pub fn count_compatible_pairs(domain: &Arc<Domain>) -> Result<usize, OracleError> {
    let pair = PlanarPair::new(domain);
    let hs = crate::exact_oracle::enumerate_height_functions(domain, &Boundary::zero_one())?;
    let etas = configs_with_open(pair.num_edges(), &[], MAX_JOINT_EDGES)?;
    Ok(etas.iter().map(|eta| hs.iter().filter(|h| is_compatible(&pair, h, eta)).count()).sum())
}

/// Edges `e_z` owned by vertices on the vertex boundary of the domain.
pub fn boundary_edges(domain: &Domain) -> Vec<usize> {
    (0..domain.vertices().len()).filter(|z| domain.is_boundary_vertex(*z)).collect()
}

/// All edge configurations with the listed edges forced open.
fn configs_with_open(m: usize, forced: &[usize], cap: usize) -> Result<Vec<RcConfig>, OracleError> {
    let free: Vec<usize> = (0..m).filter(|e| !forced.contains(e)).collect();
    if free.len() > cap {
        return Err(OracleError::TooLarge { what: "free edges", size: free.len(), cap });
    }
    Ok((0..1u64 << free.len())
        .map(|mask| {
            let mut open = vec![false; m];
            for e in forced {
                open[*e] = true;
            }
            for (k, e) in free.iter().enumerate() {
                open[*e] = mask >> k & 1 == 1;
            }
            RcConfig { open }
        })
        .collect())
}

struct JointTable<S> {
    heights: Vec<HeightFunction>,
    etas: Vec<RcConfig>,
    /// `(height index, eta index, edge weight, cluster weight)` for compatible pairs.
    pairs: Vec<(usize, usize, S, S)>,
}

fn joint_table<S: Scalar>(
    domain: &Arc<Domain>,
    params: &CouplingParams<S>,
    forced_open: &[usize],
) -> Result<JointTable<S>, OracleError> {
    let pair = PlanarPair::new(domain);
    let hs = crate::exact_oracle::enumerate_height_functions(domain, &Boundary::zero_one())?;
    let etas = configs_with_open(pair.num_edges(), forced_open, MAX_JOINT_EDGES)?;
    let results: Vec<Result<Vec<(usize, usize, S, S)>, OracleError>> = {
        use rayon::prelude::*;
        etas.par_iter()
            .enumerate()
            .map(|(k, eta)| {
                let dec = decompose(&pair, eta);
                let mut out = Vec::new();
                for (i, h) in hs.iter().enumerate() {
                    if is_compatible(&pair, h, eta) {
                        let we = joint_weight_edge(&pair, h, eta, params)?;
                        let wc = joint_weight_cluster(&pair, &dec, h, eta, params)?;
                        out.push((i, k, we, wc));
                    }
                }
                Ok(out)
            })
            .collect()
    };
    let mut pairs = Vec::new();
    for r in results {
        pairs.extend(r?);
    }
    Ok(JointTable { heights: hs, etas, pairs })
}

fn domain_label(domain: &Domain) -> String {
    format!("{}faces", domain.num_faces())
}

fn proportional_report<S: Scalar>(name: &str, domain: &Domain, params: &CouplingParams<S>, rows: &[(S, S)]) -> IdentityReport {
    let mut rep = IdentityReport::new(name, &domain_label(domain), &params.describe());
    let (dev, bad) = proportionality(rows);
    rep.max_deviation = dev;
    rep.atoms = rows.len();
    if let Some(k) = bad {
        rep.fail(format!("row {k}"));
    }
    rep
}

/// Exact verification of the coupling marginals. On every domain: the height
/// marginal of the edge form is the plain height measure, the edge-configuration
/// marginal of the cluster form is the random-cluster measure with `q_b = e^{−λ}√q`,
/// and the two forms differ by one constant. On even domains additionally, with
/// boundary edges open: the height marginal is the `c_b`-modified height measure
/// and the edge marginal is the wired random-cluster measure.
pub fn marginal_checks<S: Scalar>(domain: &Arc<Domain>, params: &CouplingParams<S>) -> Result<Vec<IdentityReport>, OracleError> {
    let mut reports = Vec::new();
    let mp = ModelParams::new(params.a.clone(), params.b.clone(), params.c.clone())?;
    let pair = PlanarPair::new(domain);

    let table = joint_table(domain, params, &[])?;
    reports.extend(part_reports(domain, params, &pair, &table, &mp, WeightMode::Plain, params.q_b.clone(), "free")?);

    if domain.parity_class() == ParityClass::Even {
        let forced = boundary_edges(domain);
        let table = joint_table(domain, params, &forced)?;
        let mp_cb = params.model_params();
        reports.extend(part_reports(domain, params, &pair, &table, &mp_cb, WeightMode::BoundaryCb, S::one(), "wired")?);
    }
    Ok(reports)
}

#[allow(clippy::too_many_arguments)]
fn part_reports<S: Scalar>(
    domain: &Arc<Domain>,
    params: &CouplingParams<S>,
    pair: &PlanarPair,
    table: &JointTable<S>,
    mp: &ModelParams<S>,
    mode: WeightMode,
    q_b: S,
    tag: &str,
) -> Result<Vec<IdentityReport>, OracleError> {
    let mut hf_sum = vec![S::zero(); table.heights.len()];
    let mut rc_sum = vec![S::zero(); table.etas.len()];
    let mut ratio_rows = Vec::with_capacity(table.pairs.len());
    for (i, k, we, wc) in &table.pairs {
        hf_sum[*i] = hf_sum[*i].clone() + we.clone();
        rc_sum[*k] = rc_sum[*k].clone() + wc.clone();
        ratio_rows.push((wc.clone(), we.clone()));
    }
    let hf_rows: Vec<(S, S)> = table
        .heights
        .iter()
        .zip(hf_sum)
        .map(|(h, s)| Ok((s, height_weight(h, mp, mode)?)))
        .collect::<Result<_, OracleError>>()?;
    let rcp = params.rc_params(q_b);
    let rc_rows: Vec<(S, S)> = table
        .etas
        .iter()
        .zip(rc_sum)
        .map(|(eta, s)| {
            let w = if tag == "wired" {
                crate::random_cluster::rc_weight_wired(pair.primal.graph(), eta, &rcp)
            } else {
                rc_weight(pair.primal.graph(), eta, &rcp)
            };
            (s, w)
        })
        .collect();
    Ok(vec![
        proportional_report(&format!("height_marginal_{tag}"), domain, params, &hf_rows),
        proportional_report(&format!("rc_marginal_{tag}"), domain, params, &rc_rows),
        proportional_report(&format!("cluster_edge_ratio_{tag}"), domain, params, &ratio_rows),
    ])
}

/// Checks `E[h(u)²] = E[N_u]·4/q + E[N_u²]·(q−4)/q` on an even domain, where the
/// left side is under the `c_b`-modified height measure and `N_u` is the depth
/// of the cluster of `u` below the boundary cluster under the wired measure.
pub fn variance_decomposition_check<S: Scalar>(
    domain: &Arc<Domain>,
    params: &CouplingParams<S>,
    u: FaceCoord,
) -> Result<IdentityReport, OracleError> {
    let mut rep = IdentityReport::new("variance_decomposition", &domain_label(domain), &params.describe());
    if domain.parity_class() != ParityClass::Even || u.parity() != Parity::Even || !domain.contains(u) {
        rep.fail("needs an even domain and an even interior face".into());
        return Ok(rep);
    }
    let hf: ExactMeasure<HeightFunction, S> =
        enumerate_heights(domain, &Boundary::zero_one(), &params.model_params(), WeightMode::BoundaryCb)?;
    let lhs = hf.expectation(|h| S::from_i64((h.at(u) as i64).pow(2)));

    let pair = PlanarPair::new(domain);
    let rcp = params.rc_params(S::one());
    let etas = configs_with_open(pair.num_edges(), &boundary_edges(domain), crate::exact_oracle::MAX_RC_EDGES)?;
    let node_u = pair.primal.node_at(u, u.vertices()[0]).unwrap();
    let (z, en, en2) = {
        use rayon::prelude::*;
        etas.par_iter()
            .map(|eta| {
                let dec = decompose(&pair, eta);
                let c = dec.primal.label[node_u];
                // the boundary cluster sits one level below the outer dual cluster
                let n = dec.depth[dec.node_index(ClusterId::Primal(c))] as i64 - 1;
                let w = crate::random_cluster::rc_weight_wired(pair.primal.graph(), eta, &rcp);
                (w.clone(), S::from_i64(n) * w.clone(), S::from_i64(n * n) * w)
            })
            .reduce(
                || (S::zero(), S::zero(), S::zero()),
                |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2),
            )
    };
    let q = params.q.clone();
    let rhs = (en * S::from_i64(4) / q.clone() + en2 * (q.clone() - S::from_i64(4)) / q) / z;
    rep.atoms = hf.len() + etas.len();
    rep.max_deviation = crate::scalar::relative_gap(&lhs, &rhs);
    if rep.max_deviation > S::TOLERANCE {
        rep.fail(format!("lhs={:.12} rhs={:.12}", lhs.to_f64(), rhs.to_f64()));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_diamond;
    use crate::scalar::Surd;

    #[test]
    fn derive_examples() {
        let p = derive_params(1.0, 1.0, 2.0).unwrap();
        assert!(p.lambda.abs() < 1e-12 && (p.q - 4.0).abs() < 1e-12 && (p.q_b - 2.0).abs() < 1e-12);
        assert!((p.c_b[0] - 1.0).abs() < 1e-12);
        let p = derive_params(1.0, 1.0, 3.0).unwrap();
        assert!((p.q - 49.0).abs() < 1e-9);
        assert!(matches!(derive_params(1.0, 1.0, 1.0), Err(ParamError::UnsupportedRegime { .. })));
        let p = derive_params(Surd::from_i64(1), Surd::ratio(5, 2), Surd::ratio(9, 2)).unwrap();
        assert_eq!(p.exp_lambda, Surd::from_i64(5));
        assert_eq!(p.x_even, Surd::ratio(5, 3));
    }

    #[test]
    fn flat_height_is_compatible_with_everything() {
        let d = Arc::new(build_diamond(2, FaceCoord::new(0, 0)));
        let pair = PlanarPair::new(&d);
        let h = HeightFunction::flat(d.clone(), 0, 1).unwrap();
        for mask in [0u64, 1, 0xabc, 0xfff] {
            assert!(is_compatible(&pair, &h, &RcConfig::from_mask(pair.num_edges(), mask)));
        }
    }

    #[test]
    fn lambda1_identities_hold() {
        let d = Arc::new(build_diamond(1, FaceCoord::new(0, 0)));
        let p = derive_params(Surd::one(), Surd::one(), Surd::ratio(5, 2)).unwrap();
        for r in marginal_checks(&d, &p).unwrap() {
            assert!(r.passed, "{r}");
        }
    }
}
