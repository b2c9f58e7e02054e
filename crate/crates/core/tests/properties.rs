use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use icelab_core::exact_oracle::enumerate_height_functions;
use icelab_core::lattice::{build_corner_graphs, build_diamond, exteriormost_t_circuit, t_neighbors, Domain, FaceCoord, Parity, ParityClass};
use icelab_core::random_cluster::{components, PlanarPair, RcConfig};
use icelab_core::representations::{
    arrows_to_height, height_to_arrows, height_to_spin, height_weight, spin_to_height, Boundary, HeightFunction, ModelParams,
    WeightMode,
};
use icelab_core::samplers::{batch_means, chain_rng, HeightKernel, SiteWeights};
use proptest::prelude::*;
use rand::Rng;

fn random_heights(n: u32, center: (i32, i32), c: f64, sweeps: usize, seed: u64) -> HeightFunction {
    let d = Arc::new(build_diamond(n, FaceCoord::new(center.0, center.1)));
    let mut h = icelab_core::samplers::initial_heights(&d, &Boundary::zero_one()).unwrap();
    let kernel = HeightKernel::new(d);
    let w = SiteWeights::new(&ModelParams::symmetric(c).unwrap(), WeightMode::Plain).unwrap();
    let mut rng = chain_rng(seed, 0);
    for _ in 0..sweeps {
        kernel.sweep(&mut h, &w, &mut rng);
    }
    h
}

fn random_open(m: usize, density: f64, seed: u64) -> Vec<bool> {
    let mut rng = chain_rng(seed, 1);
    (0..m).map(|_| rng.gen::<f64>() < density).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diamond_parity_follows_center(n in 1u32..7, i in -5i32..5, j in -5i32..5) {
        let d = build_diamond(n, FaceCoord::new(i, j));
        let expect = if (i + j + n as i32).rem_euclid(2) == 0 { ParityClass::Even } else { ParityClass::Odd };
        prop_assert_eq!(d.parity_class(), expect);
        let shifted = d.translate(1, 0);
        prop_assert_ne!(shifted.parity_class(), d.parity_class());
        prop_assert_eq!(shifted.num_faces(), d.num_faces());
    }

    #[test]
    fn corner_graphs_have_one_edge_per_vertex(n in 1u32..7, i in -3i32..3, j in -3i32..3) {
        let d = build_diamond(n, FaceCoord::new(i, j));
        let (even, odd) = build_corner_graphs(&d);
        prop_assert_eq!(even.num_edges(), d.vertices().len());
        prop_assert_eq!(odd.num_edges(), d.vertices().len());
    }

    #[test]
    fn domain_snapshot_round_trip(n in 1u32..7, i in -3i32..3, j in -3i32..3) {
        let d = build_diamond(n, FaceCoord::new(i, j));
        let back = Domain::from_snapshot(&d.to_snapshot()).unwrap();
        prop_assert!(back == d);
    }

    #[test]
    fn duality_is_an_involution(n in 1u32..6, density in 0.0f64..1.0, seed in any::<u64>()) {
        let pair = PlanarPair::new(&build_diamond(n, FaceCoord::new(0, 0)));
        let eta = RcConfig { open: random_open(pair.num_edges(), density, seed) };
        let star = eta.dual();
        prop_assert_eq!(star.num_open(), eta.num_closed());
        prop_assert_eq!(star.dual(), eta.clone());
        prop_assert_eq!(RcConfig::from_snapshot(&eta.to_snapshot(), pair.num_edges()).unwrap(), eta);
    }

    #[test]
    fn euler_relation_on_lambda4(density in 0.0f64..1.0, seed in any::<u64>()) {
        let pair = PlanarPair::new(&build_diamond(4, FaceCoord::new(0, 0)));
        let g = pair.primal.graph();
        let open = random_open(g.num_edges(), density, seed);
        let closed: Vec<bool> = open.iter().map(|b| !b).collect();
        let k = components(g, &open).count as i64;
        let k_star = components(&pair.dual, &closed).count as i64;
        let o = open.iter().filter(|b| **b).count() as i64;
        prop_assert_eq!(k_star - k - 1, o - g.num_vertices as i64);
    }

    #[test]
    fn height_representations_round_trip(
        n in 1u32..6, odd in any::<bool>(), c in 1.2f64..4.0, sweeps in 0usize..20, seed in any::<u64>()
    ) {
        let h = random_heights(n, (i32::from(odd), 0), c, sweeps, seed);
        prop_assert!(h.validate().is_ok());
        let anchor = h.domain().halo()[0];
        let v = h.at(anchor);
        prop_assert_eq!(spin_to_height(&height_to_spin(&h), anchor, v).unwrap(), h.clone());
        prop_assert_eq!(arrows_to_height(&height_to_arrows(&h), anchor, v).unwrap(), h.clone());
        prop_assert_eq!(HeightFunction::from_snapshot(h.domain().clone(), &h.to_snapshot()).unwrap(), h.clone());
        prop_assert!(height_to_arrows(&h).check_ice_rule().is_ok());
        prop_assert!(height_to_spin(&h).check_ice_rule().is_ok());
    }

    #[test]
    fn weight_is_invariant_under_shift_by_two(
        n in 1u32..5, c in 1.2f64..4.0, a in 0.5f64..2.0, b in 0.5f64..2.0, sweeps in 0usize..10, seed in any::<u64>()
    ) {
        let h = random_heights(n, (0, 0), c, sweeps, seed);
        let p = ModelParams::new(a, b, c).unwrap();
        let w0 = height_weight(&h, &p, WeightMode::Plain).unwrap();
        let w2 = height_weight(&h.shifted(2), &p, WeightMode::Plain).unwrap();
        prop_assert!((w0 - w2).abs() <= 1e-12 * w0.abs());
    }

    #[test]
    fn max_and_min_of_height_functions_are_height_functions(
        n in 1u32..6, c in 1.2f64..4.0, sweeps in 1usize..15, s1 in any::<u64>(), s2 in any::<u64>()
    ) {
        let f = random_heights(n, (0, 0), c, sweeps, s1);
        let g = random_heights(n, (0, 0), c, sweeps, s2);
        let (hi, lo) = (f.max(&g), f.min(&g));
        prop_assert!(hi.validate().is_ok());
        prop_assert!(lo.validate().is_ok());
        prop_assert!(lo.le(&f) && f.le(&hi) && lo.le(&g) && g.le(&hi));
    }

    #[test]
    fn batch_means_of_constant_series_has_no_error(x in -10.0f64..10.0, len in 32usize..500) {
        let e = batch_means(&vec![x; len], 32);
        prop_assert!((e.mean - x).abs() < 1e-9);
        prop_assert!(e.stderr.abs() < 1e-9);
    }
}

/// Faces of parity `parity` in the box reachable from its rim by T-steps avoiding `blocked`.
fn reachable_from_rim(lo: i32, hi: i32, parity: Parity, blocked: &HashSet<FaceCoord>) -> HashSet<FaceCoord> {
    let in_box = |f: FaceCoord| f.i >= lo && f.i <= hi && f.j >= lo && f.j <= hi;
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    for i in lo..=hi {
        for j in lo..=hi {
            let f = FaceCoord::new(i, j);
            if f.parity() == parity && (i <= lo + 1 || i >= hi - 1 || j <= lo + 1 || j >= hi - 1) && !blocked.contains(&f) && seen.insert(f) {
                queue.push_back(f);
            }
        }
    }
    while let Some(f) = queue.pop_front() {
        for n in t_neighbors(f) {
            if in_box(n) && !blocked.contains(&n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    // On instances up to 9×9 faces the winding-number test agrees with flood fill from the rim.
    #[test]
    fn t_circuit_surround_agrees_with_flood_fill(density in 0.3f64..0.95, seed in any::<u64>(), n in 2u32..5) {
        let d = build_diamond(n, FaceCoord::new(0, 0));
        let mut rng = chain_rng(seed, 2);
        let good: HashSet<FaceCoord> = d.faces().iter().copied().filter(|f| f.parity() == Parity::Even && rng.gen::<f64>() < density).collect();
        let target = FaceCoord::new(0, 0);
        let (lo, hi) = (-(n as i32) - 3, n as i32 + 3);
        match exteriormost_t_circuit(|f| good.contains(&f), &d, target, Parity::Even) {
            Some(c) => {
                prop_assert!(c.is_valid());
                prop_assert!(c.faces.iter().all(|f| good.contains(f)));
                let blocked: HashSet<FaceCoord> = c.faces.iter().copied().collect();
                let outside = reachable_from_rim(lo, hi, Parity::Even, &blocked);
                for i in lo..=hi {
                    for j in lo..=hi {
                        let f = FaceCoord::new(i, j);
                        if f.parity() == Parity::Even && !blocked.contains(&f) {
                            prop_assert_eq!(c.surrounds(f), !outside.contains(&f), "face {:?}", f);
                        }
                    }
                }
            }
            None => {
                // a target outside every good circuit is joined to the rim by non-good faces
                if !good.contains(&target) {
                    let outside = reachable_from_rim(lo, hi, Parity::Even, &good);
                    prop_assert!(outside.contains(&target));
                }
            }
        }
    }
}

#[test]
fn representation_round_trips_exhaustive_on_lambda3() {
    let d = Arc::new(build_diamond(3, FaceCoord::new(0, 0)));
    let hs = enumerate_height_functions(&d, &Boundary::zero_one()).unwrap();
    assert!(hs.len() > 100, "{} height functions", hs.len());
    let anchor = d.halo()[0];
    for h in &hs {
        let v = h.at(anchor);
        assert_eq!(&spin_to_height(&height_to_spin(h), anchor, v).unwrap(), h);
        assert_eq!(&arrows_to_height(&height_to_arrows(h), anchor, v).unwrap(), h);
    }
}
