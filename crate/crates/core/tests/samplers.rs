use std::sync::Arc;

use icelab_core::bkw_coupling::derive_params;
use icelab_core::exact_oracle::{composition_is_stationary, enumerate_heights, union_support};
use icelab_core::lattice::{build_diamond, Domain, FaceCoord, Graph};
use icelab_core::random_cluster::{p_critical, p_critical_from_sqrt, PlanarPair, RcConfig, RcParams};
use icelab_core::representations::{Boundary, HeightFunction, ModelParams, WeightMode};
use icelab_core::samplers::*;
use icelab_core::{Scalar, Surd};
use num_rational::BigRational;

fn diamond(n: u32) -> Arc<Domain> {
    Arc::new(build_diamond(n, FaceCoord::new(0, 0)))
}

fn exact_height_params(c: (i64, i64)) -> ModelParams<Surd> {
    let cp = derive_params(Surd::one(), Surd::one(), Surd::ratio(c.0, c.1)).unwrap();
    cp.model_params()
}

fn assert_height_kernels_exact(d: &Arc<Domain>, params: &ModelParams<Surd>, mode: WeightMode) {
    let (mu, kernels) = height_site_kernels(d, &Boundary::zero_one(), params, mode).unwrap();
    let pi = mu.probabilities();
    for (k, kernel) in kernels.iter().enumerate() {
        assert!(kernel.row_sums_are_one(), "site {k}: rows do not sum to one");
        assert!(kernel.detailed_balance(&pi), "site {k}: detailed balance fails");
    }
    assert!(composition_is_stationary(&kernels, &pi));
    assert!(union_support(&kernels).is_irreducible());
}

#[test]
fn height_kernels_reversible_in_exact_arithmetic() {
    for c in [(2, 1), (3, 1), (11, 5)] {
        let params = exact_height_params(c);
        for n in [1, 2] {
            let d = diamond(n);
            assert_height_kernels_exact(&d, &params, WeightMode::Plain);
            assert_height_kernels_exact(&d, &params, WeightMode::BoundaryCb);
        }
    }
}

#[test]
fn height_kernels_reversible_anisotropic() {
    let cp = derive_params(Surd::one(), Surd::ratio(5, 2), Surd::ratio(9, 2)).unwrap();
    let params = cp.model_params();
    let d = diamond(2);
    assert_height_kernels_exact(&d, &params, WeightMode::Plain);
    assert_height_kernels_exact(&d, &params, WeightMode::BoundaryCb);
}

#[test]
fn height_chain_irreducible_on_lambda3() {
    let params = ModelParams::symmetric(Surd::from_i64(2)).unwrap();
    let (_, kernels) = height_site_kernels(&diamond(3), &Boundary::zero_one(), &params, WeightMode::Plain).unwrap();
    assert!(union_support(&kernels).is_irreducible());
}

fn four_cycle() -> Graph {
    Graph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0)], vec![true, false, false, false])
}

fn square_with_diagonal() -> Graph {
    Graph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], vec![true, false, true, false])
}

#[test]
fn rc_kernels_reversible_in_exact_arithmetic() {
    let half = BigRational::new(9.into(), 2.into());
    let cases: Vec<(Surd, Surd)> = vec![
        (Surd::from_i64(2), Surd::from_i64(2).try_sqrt().unwrap()),
        (Surd::rational(half.clone()), Surd::sqrt_rational(&half)),
        (Surd::from_i64(9), Surd::from_i64(3)),
    ];
    for graph in [four_cycle(), square_with_diagonal()] {
        for (q, sq) in &cases {
            let p = p_critical_from_sqrt(sq.clone());
            for qb in [Surd::one(), sq.clone(), q.clone()] {
                let params = RcParams::new(q.clone(), qb, p.clone());
                let (mu, kernels) = rc_edge_kernels(&graph, &params).unwrap();
                let pi = mu.probabilities();
                for k in &kernels {
                    assert!(k.row_sums_are_one());
                    assert!(k.detailed_balance(&pi));
                }
                assert!(composition_is_stationary(&kernels, &pi));
                assert!(union_support(&kernels).is_irreducible());
            }
        }
    }
}

#[test]
fn rc_kernels_reversible_on_lambda2_primal() {
    let pair = PlanarPair::new(&build_diamond(2, FaceCoord::new(0, 0)));
    let half = BigRational::new(9.into(), 2.into());
    let sq = Surd::sqrt_rational(&half);
    let params = RcParams::new(Surd::rational(half), Surd::one(), p_critical_from_sqrt(sq));
    let (mu, kernels) = rc_edge_kernels(pair.primal.graph(), &params).unwrap();
    let pi = mu.probabilities();
    assert_eq!(pi.len(), 4096);
    assert!(kernels.iter().all(|k| k.row_sums_are_one() && k.detailed_balance(&pi)));
}

#[test]
fn lambda1_height_gate() {
    let model = ChainModel::Heights {
        domain: diamond(1),
        boundary: Boundary::zero_one(),
        params: ModelParams::symmetric(2.0).unwrap(),
        mode: WeightMode::Plain,
    };
    let rep = exactness_gate(&ChainSpec::new(11, 1_000_000, 100), &model, 0.005).unwrap();
    assert!(rep.passed, "{rep}");
}

#[test]
fn lambda2_height_gate() {
    let model = ChainModel::Heights {
        domain: diamond(2),
        boundary: Boundary::zero_one(),
        params: ModelParams::symmetric(3.0).unwrap(),
        mode: WeightMode::Plain,
    };
    let rep = exactness_gate(&ChainSpec::new(12, 1_000_000, 100), &model, 0.01).unwrap();
    assert!(rep.passed, "{rep}");
}

#[test]
fn rc_gate_on_small_graph() {
    let model = ChainModel::Rc { graph: square_with_diagonal(), params: RcParams::new(4.5, 1.0, p_critical(4.5).unwrap()) };
    let rep = exactness_gate(&ChainSpec::new(13, 200_000, 100), &model, 0.01).unwrap();
    assert!(rep.passed, "{rep}");
}

#[test]
fn bernoulli_when_q_is_one() {
    let pair = PlanarPair::new(&build_diamond(2, FaceCoord::new(0, 0)));
    let graph = pair.primal.graph().clone();
    let params = RcParams::new(1.0, 1.0, 0.3);
    let mut kernel = RcKernel::new(&graph);
    let mut rng = chain_rng(5, 0);
    let mut eta = RcConfig::all_closed(graph.num_edges());
    for _ in 0..50 {
        kernel.sweep(&mut eta, &params, &mut rng);
        for e in 0..graph.num_edges() {
            assert!((kernel.conditional(&eta.open, e, &params) - 0.3).abs() < 1e-15);
        }
    }
    let est = run_chain(
        &ChainSpec::new(5, 40_000, 10),
        &ChainModel::Rc { graph, params },
        &[Observable::EdgeDensity],
    )
    .unwrap();
    assert!((est[0].mean - 0.3).abs() < 4.0 * est[0].stderr + 1e-9, "{:?}", est[0]);
}

#[test]
fn p_one_is_absorbing() {
    let graph = square_with_diagonal();
    let params = RcParams::new(4.0, 2.0, 1.0);
    let mut rng = chain_rng(1, 0);
    let eta = rc_heat_bath_sweep(&graph, &RcConfig::all_closed(graph.num_edges()), &params, &mut rng);
    assert_eq!(eta, RcConfig::all_open(graph.num_edges()));
    let again = rc_heat_bath_sweep(&graph, &eta, &params, &mut rng);
    assert_eq!(again, eta);
}

#[test]
fn large_c_concentrates_on_flat() {
    let d = diamond(2);
    let params = ModelParams::symmetric(1000.0).unwrap();
    let flat = HeightFunction::flat(d.clone(), 0, 1).unwrap();
    let mut rng = chain_rng(3, 0);
    let mut h = flat.clone();
    let mut hits = 0;
    for _ in 0..5000 {
        h = height_heat_bath_sweep(&h, &params, WeightMode::Plain, &mut rng).unwrap();
        hits += usize::from(h == flat);
    }
    assert!(hits > 4900, "flat visited {hits} times");
}

#[test]
fn chain_mean_matches_exact_expectation() {
    let d = diamond(2);
    let exact = enumerate_heights(&d, &Boundary::zero_one(), &ModelParams::symmetric(Surd::from_i64(2)).unwrap(), WeightMode::Plain).unwrap();
    let u = FaceCoord::new(0, 0);
    let target = exact.expectation(|h| Surd::from_i64(h.at(u) as i64)).to_f64();
    let target2 = exact.expectation(|h| Surd::from_i64((h.at(u) * h.at(u)) as i64)).to_f64();
    let model = ChainModel::Heights { domain: d, boundary: Boundary::zero_one(), params: ModelParams::symmetric(2.0).unwrap(), mode: WeightMode::Plain };
    let est = run_chain(&ChainSpec::new(21, 200_000, 100), &model, &[Observable::Height(u), Observable::HeightSquared(u)]).unwrap();
    assert!((est[0].mean - target).abs() < 3.0 * est[0].stderr, "{:?} vs {target}", est[0]);
    assert!((est[1].mean - target2).abs() < 3.0 * est[1].stderr, "{:?} vs {target2}", est[1]);
    assert!(est[0].tau_int >= 0.5);
}

#[test]
fn chains_are_reproducible() {
    let model = ChainModel::Heights {
        domain: diamond(3),
        boundary: Boundary::zero_one(),
        params: ModelParams::symmetric(2.5).unwrap(),
        mode: WeightMode::Plain,
    };
    let obs = [Observable::Height(FaceCoord::new(0, 0)), Observable::HeightSum(FaceCoord::new(0, 0), FaceCoord::new(1, 0))];
    let a = run_chain(&ChainSpec::new(99, 5000, 10), &model, &obs).unwrap();
    let b = run_chain(&ChainSpec::new(99, 5000, 10), &model, &obs).unwrap();
    let c = run_chain(&ChainSpec::new(100, 5000, 10), &model, &obs).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn boundary_cb_infinite_rejected_by_sampler() {
    let params = ModelParams::symmetric(2.0).unwrap().with_cb(icelab_core::representations::Cb::Infinite);
    let h = HeightFunction::flat(diamond(2), 0, 1).unwrap();
    let mut rng = chain_rng(0, 0);
    assert!(height_heat_bath_sweep(&h, &params, WeightMode::BoundaryCb, &mut rng).is_err());
}

#[test]
fn chain_spec_rejects_unknown_fields() {
    let ok: ChainSpec = serde_json::from_str(r#"{"seed": 1, "sweeps": 10}"#).unwrap();
    assert_eq!(ok.thinning, 1);
    assert!(serde_json::from_str::<ChainSpec>(r#"{"seed": 1, "sweeps": 10, "sweep": 3}"#).is_err());
}
