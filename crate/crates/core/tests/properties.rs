//! Property-based checks of structural invariants.

use proptest::prelude::*;

use entroflow::codec::{read_ensemble, write_ensemble};
use entroflow::dynamics::{build_generator, glauber, pca_pushforward, Evolver};
use entroflow::entropy::continuous_loss_direct;
use entroflow::lattice::{enumerate_configs, translate};
use entroflow::*;

fn geometry() -> impl Strategy<Value = TorusGeometry> {
    prop_oneof![
        (1usize..=8, 2usize..=3).prop_filter("small", |(l, q)| q.pow(*l as u32) <= 2048),
        (2usize..=3, 2usize..=3).prop_map(|(a, b)| (a * 10 + b, 2)),
    ]
    .prop_map(|(l, q)| {
        if l >= 10 {
            TorusGeometry::new(vec![l / 10, l % 10], q).unwrap()
        } else {
            TorusGeometry::chain(l, q).unwrap()
        }
    })
}

fn measure_on(g: TorusGeometry, zeros: bool) -> impl Strategy<Value = ExactMeasure> {
    let n = g.state_count().unwrap();
    proptest::collection::vec(if zeros { 0.0f64..1.0 } else { 0.05f64..1.0 }, n).prop_map(move |mut w| {
        if zeros {
            w.iter_mut().for_each(|x| {
                if *x < 0.25 {
                    *x = 0.0
                }
            });
            if w.iter().all(|x| *x == 0.0) {
                w[0] = 1.0;
            }
        }
        ExactMeasure::from_weights(g.clone(), w).unwrap()
    })
}

fn pair_on_geometry() -> impl Strategy<Value = (ExactMeasure, ExactMeasure)> {
    geometry().prop_flat_map(|g| (measure_on(g.clone(), true), measure_on(g, false)))
}

fn ising_params() -> impl Strategy<Value = (f64, f64)> {
    (-1.5f64..1.5, -1.0f64..1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encoding_is_a_bijection(g in geometry()) {
        for (i, cfg) in enumerate_configs(&g).unwrap().enumerate() {
            prop_assert_eq!(ConfigIndex::encode(&g, &cfg).unwrap().0, i);
            prop_assert_eq!(ConfigIndex(i).decode(&g), cfg);
        }
    }

    #[test]
    fn orbit_size_divides_volume(g in geometry(), seed in 0usize..1_000_000) {
        let n = g.state_count().unwrap();
        let cfg = ConfigIndex(seed % n).decode(&g);
        let mut orbit = std::collections::BTreeSet::new();
        for site in 0..g.volume() {
            let v: Vec<i64> = g.coords(site).into_iter().map(|x| x as i64).collect();
            orbit.insert(translate(&g, &cfg, &v).0);
        }
        prop_assert_eq!(g.volume() % orbit.len(), 0);
    }

    #[test]
    fn marginals_are_consistent((nu, _) in pair_on_geometry(), pick in 0usize..64) {
        let g = nu.geom().clone();
        let all = g.all_sites();
        let a: Vec<usize> = all.iter().copied().filter(|s| (pick >> (s % 6)) & 1 == 1).collect();
        prop_assume!(!a.is_empty());
        let b = vec![a[0]];
        let ma = nu.marginal(&a).unwrap();
        let mb = nu.marginal(&b).unwrap();
        let q = g.q();
        let mut folded = vec![0.0; q];
        for (local, p) in ma.probs.iter().enumerate() {
            folded[local % q] += p;
        }
        for (x, y) in folded.iter().zip(&mb.probs) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let total: f64 = ma.probs.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relative_entropy_is_nonnegative_and_grows_with_volume((nu, mu) in pair_on_geometry()) {
        let g = nu.geom().clone();
        let mut prev = 0.0;
        for k in 1..=g.volume() {
            let region: Vec<usize> = (0..k).collect();
            let h = local_relative_entropy(&nu, &mu, &region).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert!(h >= prev - 1e-12);
            prev = h;
        }
        prop_assert_eq!(local_relative_entropy(&mu, &mu, &g.all_sites()).unwrap(), 0.0);
    }

    #[test]
    fn norm_triangle_inequality(a in ising_params(), b in ising_params()) {
        let p = Potential::ising(1, a.0, a.1);
        let r = Potential::ising(1, b.0, b.1);
        let s = p.sum(&r).unwrap();
        prop_assert!(norm_phi(&s) <= norm_phi(&p) + norm_phi(&r) + 1e-12);
        prop_assert!(norm_phi_zero(&s) <= norm_phi_zero(&p) + norm_phi_zero(&r) + 1e-12);
        prop_assert!(norm_phi_zero(&p) <= norm_phi(&p) + 1e-12);
    }

    #[test]
    fn data_processing_under_pca((nu, mu) in pair_on_geometry(), noise in 0.0f64..1.0) {
        let g = nu.geom().clone();
        let q = g.q();
        let k = PcaKernel::from_fn(q, Shape::origin(g.d()), |v| {
            (0..q).map(|a| if a == v[0] { 1.0 - noise + noise / q as f64 } else { noise / q as f64 }).collect()
        }).unwrap();
        let all = g.all_sites();
        let before = local_relative_entropy(&nu, &mu, &all).unwrap();
        let after = local_relative_entropy(&pca_pushforward(&k, &nu).unwrap(), &pca_pushforward(&k, &mu).unwrap(), &all).unwrap();
        prop_assert!(after <= before + 1e-10);
    }

    #[test]
    fn potential_distance_is_a_pseudometric(l in 2usize..=6, b in proptest::collection::vec(-1.0f64..1.0, 3)) {
        let g = TorusGeometry::chain(l, 2).unwrap();
        let ms: Vec<ExactMeasure> = b.iter().map(|&x| gibbs_measure(&Potential::ising(1, x, 0.3 * x), &g).unwrap()).collect();
        let all = g.all_sites();
        let d = |i: usize, j: usize| potential_distance(&ms[i], &ms[j], &all).unwrap();
        prop_assert_eq!(d(0, 0), 0.0);
        prop_assert!((d(0, 1) - d(1, 0)).abs() < 1e-12);
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
    }

    #[test]
    fn gibbs_measures_are_translation_invariant_and_dlr(l in 3usize..=7, p in ising_params()) {
        let g = TorusGeometry::chain(l, 2).unwrap();
        let phi = Potential::ising(1, p.0, p.1);
        let mu = gibbs_measure(&phi, &g).unwrap();
        prop_assert!(mu.is_translation_invariant(1e-12).unwrap());
        prop_assert!(dlr_residual(&mu, &phi).unwrap().max_residual <= 1e-12);
        prop_assert!(mu.chain_rule_bound_check(&[0, 1]).unwrap());
    }

    #[test]
    fn generator_rows_sum_to_zero_and_loss_is_nonpositive(l in 3usize..=6, p in ising_params(), nu_seed in proptest::collection::vec(0.05f64..1.0, 64)) {
        let g = TorusGeometry::chain(l, 2).unwrap();
        let phi = Potential::ising(1, p.0, p.1);
        let rates = glauber(&phi).unwrap();
        let gen = build_generator(&rates, &g).unwrap();
        for i in 0..gen.size() {
            let s: f64 = gen.row(i).map(|(_, c)| c).sum::<f64>() + gen.diag()[i];
            prop_assert!(s.abs() < 1e-12);
        }
        let n = g.state_count().unwrap();
        let nu = ExactMeasure::from_weights(g.clone(), nu_seed[..n].to_vec()).unwrap();
        let mu = gibbs_measure(&phi, &g).unwrap();
        prop_assert!(continuous_loss_direct(&rates, &nu, &mu, &g.all_sites()).unwrap() <= 1e-12);
        let later = Evolver::new(gen).evolve(&nu, 0.7).unwrap();
        prop_assert!((later.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(later.probs().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn ensemble_codec_round_trips(g in geometry(), raw in proptest::collection::vec(0usize..1_000_000, 1..20), weighted in any::<bool>()) {
        let n = g.state_count().unwrap();
        let samples: Vec<SpinConfig> = raw.iter().map(|&i| ConfigIndex(i % n).decode(&g)).collect();
        let weights = weighted.then(|| vec![1.0 / samples.len() as f64; samples.len()]);
        let ens = SampleEnsemble::new(g, samples, weights).unwrap();
        let mut buf = Vec::new();
        write_ensemble(&ens, &mut buf).unwrap();
        prop_assert_eq!(read_ensemble(&buf[..]).unwrap(), ens);
    }
}
