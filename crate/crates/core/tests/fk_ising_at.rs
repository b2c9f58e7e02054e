use std::sync::Arc;

use icelab_core::exact_oracle::{fkg_lattice_check, FkgVerdict, SpinVector};
use icelab_core::fk_ising_at::*;
use icelab_core::lattice::{build_diamond, build_rectangle, Domain, FaceCoord};
use icelab_core::random_cluster::RcConfig;
use icelab_core::representations::{height_to_spin, Boundary, ModelParams, SpinConfig};
use icelab_core::{Scalar, Surd};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn diamond(n: u32, i: i32) -> Arc<Domain> {
    Arc::new(build_diamond(n, FaceCoord::new(i, 0)))
}

fn assert_all(reports: Vec<icelab_core::exact_oracle::IdentityReport>) {
    assert!(!reports.is_empty());
    for r in reports {
        assert!(r.passed, "{r}");
    }
}

#[test]
fn fk_ising_lemma_on_three_domains() {
    for d in [diamond(1, 0), diamond(2, 0), diamond(2, 1)] {
        for c in [Surd::from_i64(2), Surd::ratio(5, 2), Surd::from_i64(3)] {
            assert_all(fk_ising_checks(&d, &c).unwrap());
        }
    }
}

#[test]
fn fk_ising_lemma_below_two() {
    assert_all(fk_ising_checks(&diamond(2, 1), &Surd::ratio(3, 2)).unwrap());
}

#[test]
fn at_coupling_exact_at_potts_point() {
    assert_all(at_joint_check(&diamond(2, 1), &Surd::from_i64(2)).unwrap());
}

#[test]
fn at_coupling_exact_at_rational_c() {
    // coth(0.4) is close to 50/19; the exact run uses the rational point
    assert_all(at_joint_check(&diamond(2, 1), &Surd::ratio(50, 19)).unwrap());
    assert_all(at_joint_check(&diamond(2, 0), &Surd::ratio(3, 2)).unwrap());
}

#[test]
fn at_coupling_exp_form_at_j_one_fifth() {
    let p = selfdual_params(0.2).unwrap();
    assert_eq!(p.regime, AtRegime::JBelowU);
    assert_all(at_joint_check_exp(&diamond(2, 1), &p).unwrap());
}

#[test]
fn selfdual_identities() {
    for j in [0.05, 0.2, 0.25 * 3f64.ln(), 0.5, 1.3] {
        let p = selfdual_params(j).unwrap();
        assert!(p.self_dual);
        let (r1, r2) = p.identity_residuals().unwrap();
        assert!(r1 < 1e-12 && r2 < 1e-12, "J={j}: {r1} {r2}");
        let c = p.c.unwrap();
        assert_eq!(p.regime == AtRegime::JBelowU, c > 2.0 + 1e-12);
        let back = selfdual_params_from_c(c).unwrap();
        assert!((back.j - j).abs() < 1e-12);
    }
    assert!(!AtParams::new(0.2, 0.2).unwrap().self_dual);
    assert!(selfdual_params(0.0).is_err());
    assert!(selfdual_params_from_c(1.0).is_err());
}

#[test]
fn xi_sampler_rejects_small_c() {
    let d = diamond(1, 0);
    let sigma = SpinConfig::new(d, |_| 1).unwrap();
    let params = ModelParams::new(1.0, 3.0, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(sample_xi_given_spins(&sigma, &params, &mut rng).is_err());
}

#[test]
fn xi_sampler_frequencies_match_rule() {
    let d = diamond(2, 0);
    let sigma = SpinConfig::new(d.clone(), |_| 1).unwrap();
    let params = ModelParams::new(1.0, 2.0, 4.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 40_000;
    let mut open = vec![0usize; d.vertices().len()];
    for _ in 0..n {
        let xi = sample_xi_given_spins(&sigma, &params, &mut rng).unwrap();
        for (z, o) in xi.xi.open.iter().enumerate() {
            open[z] += usize::from(*o);
        }
    }
    for (z, v) in d.vertices().iter().enumerate() {
        let p = free_open_probability(&params, v.top_left_parity());
        let f = open[z] as f64 / n as f64;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() < 5.0 * sd, "vertex {z}: {f} vs {p}");
    }
}

#[test]
fn sampled_odd_spins_match_exact_marginal() {
    let d = diamond(2, 0);
    let layout = FkLayout::new(d.clone());
    let c = 2.5;
    let fk = fkis_measure(&layout, &c).unwrap();
    let exact = spin_plus_plus_measure(&d, &ModelParams::symmetric(c).unwrap()).unwrap().pushforward(|s| layout.sigma_circ(s));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let probs = fk.probabilities();
    let n = 200_000;
    let mut counts = std::collections::HashMap::<SpinVector, usize>::new();
    for _ in 0..n {
        let r: f64 = rand::Rng::gen(&mut rng);
        let mut acc = 0.0;
        let mut k = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if r < acc {
                k = i;
                break;
            }
        }
        let xi = FkIsingConfig::new(fk.atoms[k].0.clone());
        let s = resample_spins_given_xi(&layout, &xi, &Boundary::zero_one(), &mut rng).unwrap();
        *counts.entry(s).or_default() += 1;
    }
    let tv: f64 = exact.atoms.iter().enumerate().map(|(k, (s, _))| (exact.prob(k) - counts.get(s).copied().unwrap_or(0) as f64 / n as f64).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.01, "tv {tv}");
}

#[test]
fn resampling_requires_plus_boundary() {
    let d = diamond(1, 0);
    let layout = FkLayout::new(d);
    let xi = FkIsingConfig::new(RcConfig::all_open(layout.num_edges()));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(resample_spins_given_xi(&layout, &xi, &Boundary::Flat { even: 2, odd: 1 }, &mut rng).is_err());
    let s = resample_spins_given_xi(&layout, &xi, &Boundary::zero_one(), &mut rng).unwrap();
    assert!(s.0.iter().all(|v| *v == 1));
}

#[test]
fn tau_sampler_respects_product() {
    let d = diamond(2, 1);
    let layout = FkLayout::new(d);
    let g = layout.even_graph();
    let m = layout.num_edges();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let closed = RcConfig::all_closed(m);
    let product: Vec<i8> = (0..g.num_vertices).map(|v| if v % 2 == 0 { 1 } else { -1 }).collect();
    let cfg = sample_tau_given_xi_star(g, &closed, &product, &mut rng).unwrap();
    assert_eq!(cfg.product(), product);
    assert_eq!(sample_tau_given_xi_star(g, &RcConfig::all_open(m), &product, &mut rng).unwrap_err(), icelab_core::CouplingError::NotConstantOnCluster);
    let p = selfdual_params(0.2).unwrap();
    let all_plus = AtConfig::from_masks(g.num_vertices, 0, 0);
    let n = 20_000;
    let mut open = 0usize;
    for _ in 0..n {
        open += sample_xi_star_given_tau(g, &all_plus, &p, &mut rng).unwrap().num_open();
    }
    let f = open as f64 / (n * m) as f64;
    assert!((f - (1.0 - p.exp_minus_4j)).abs() < 0.01, "{f}");
    assert!(sample_xi_star_given_tau(g, &all_plus, &AtParams::new(0.2, 0.2).unwrap(), &mut rng).is_err());
}

#[test]
fn fkis_is_positively_associated_above_two() {
    for d in [diamond(1, 0), Arc::new(build_rectangle(0, 1, 0, 0))] {
        let layout = FkLayout::new(d);
        assert!(layout.num_edges() <= 8);
        for c in [Surd::from_i64(2), Surd::ratio(5, 2), Surd::from_i64(4)] {
            let mu = fkis_measure(&layout, &c).unwrap();
            assert_eq!(fkg_lattice_check(&mu).unwrap(), FkgVerdict::Pass, "c={}", c.to_f64());
        }
    }
}

#[test]
fn fkis_association_below_two_is_reported() {
    let layout = FkLayout::new(diamond(1, 0));
    let mu = fkis_measure(&layout, &Surd::ratio(3, 2)).unwrap();
    // only reported; no claim is made for c < 2
    let verdict = fkg_lattice_check(&mu).unwrap();
    println!("FKIs on a single face at c=3/2: {verdict:?}");
}

#[test]
fn sigma_bullet_fkg_with_plus_and_minus_boundaries() {
    for d in [diamond(2, 1), Arc::new(build_rectangle(0, 2, 0, 1))] {
        for boundary in [Boundary::Flat { even: 0, odd: 1 }, Boundary::Flat { even: 2, odd: 1 }] {
            for c in [Surd::from_i64(2), Surd::from_i64(3)] {
                let params = ModelParams::symmetric(c).unwrap();
                let mu = sigma_bullet_marginal(&d, &boundary, &params, icelab_core::representations::WeightMode::Plain).unwrap();
                assert_eq!(fkg_lattice_check(&mu).unwrap(), FkgVerdict::Pass, "{boundary:?}");
            }
        }
    }
}

/// Even exterior faces at 0, odd exterior faces at 1 left of the origin and −1 right of it.
fn split_boundary(d: &Domain) -> Boundary {
    Boundary::from_fn(d, |u: FaceCoord| if u.i.rem_euclid(2) == u.j.rem_euclid(2) { 0 } else if u.i <= 0 { 1 } else { -1 })
}

#[test]
fn sigma_bullet_fkg_fails_with_split_boundary() {
    let d = Arc::new(build_rectangle(0, 2, 0, 1));
    let params = ModelParams::symmetric(Surd::from_i64(2)).unwrap();
    let found = find_sigma_bullet_counterexample(&d, &split_boundary(&d), &params).unwrap();
    let ce = found.expect("a pair of even faces that cannot both be minus");
    assert!(ce.p_u_minus > 0.0 && ce.p_v_minus > 0.0);
    // the two faces are diagonal neighbours with a common odd neighbour
    assert_eq!(((ce.u.i - ce.v.i).abs(), (ce.u.j - ce.v.j).abs()), (1, 1), "{ce:?}");
    let mu = sigma_bullet_marginal(&d, &split_boundary(&d), &params, icelab_core::representations::WeightMode::Plain).unwrap();
    assert!(matches!(fkg_lattice_check(&mu).unwrap(), FkgVerdict::Counterexample(..)));
}

#[test]
fn coupled_at_chain_agrees_with_exact_correlation() {
    // spins from the height chain, then ξ, ξ*, and τ from the coupling rules
    let d = diamond(2, 1);
    let layout = FkLayout::new(d.clone());
    let g = layout.even_graph().clone();
    let c = 2.0;
    let exact = at_joint_check(&d, &Surd::from_i64(2)).unwrap();
    assert!(exact.iter().all(|r| r.passed));
    let fk = fkis_measure(&layout, &c).unwrap();
    let (u, v) = (0usize, g.num_vertices - 1);
    let target: f64 = fk
        .atoms
        .iter()
        .enumerate()
        .filter(|(_, (xi, _))| {
            let comp = icelab_core::random_cluster::components(&g, &xi.dual().open);
            comp.label[u] == comp.label[v]
        })
        .map(|(k, _)| fk.prob(k))
        .sum();
    let params = ModelParams::symmetric(c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut h = icelab_core::representations::HeightFunction::flat(d.clone(), 0, 1).unwrap();
    let n = 50_000;
    let (mut corr, mut conn) = (0.0, 0.0);
    for _ in 0..n {
        h = icelab_core::samplers::height_heat_bath_sweep(&h, &params, icelab_core::representations::WeightMode::Plain, &mut rng).unwrap();
        let sigma = height_to_spin(&h);
        let xi = sample_xi_given_spins(&sigma, &params, &mut rng).unwrap();
        let star = xi.dual();
        let cfg = sample_tau_given_xi_star(&g, &star, &layout.even_node_spins(&sigma), &mut rng).unwrap();
        corr += (cfg.tau[u] * cfg.tau[v]) as f64;
        let comp = icelab_core::random_cluster::components(&g, &star.open);
        conn += f64::from(u8::from(comp.label[u] == comp.label[v]));
    }
    let (corr, conn) = (corr / n as f64, conn / n as f64);
    assert!((corr - target).abs() < 0.03, "{corr} vs {target}");
    assert!((conn - target).abs() < 0.03, "{conn} vs {target}");
}
