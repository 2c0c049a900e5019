use mfbo::acquisition::{expected_improvement, probability_of_improvement, ucb, AcqKind, AcqState};
use mfbo::config::{parse_domain, to_config, to_config_string};
use mfbo::gp::{GpModel, Observation};
use mfbo::kernel::{decomposition_from_ordering, gram_matrix, KernelHyperparams, KernelSpec};
use mfbo::{Domain, VariableSpec};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn hyper(dim: usize) -> impl Strategy<Value = KernelHyperparams> {
    (
        0.1f64..10.0,
        prop::collection::vec(0.05f64..3.0, dim),
        prop::collection::vec(0.1f64..1.0, dim),
        prop::collection::vec(0.1f64..3.0, dim),
    )
        .prop_map(|(scale, lengthscales, hamming, decay)| KernelHyperparams {
            scale,
            lengthscales,
            hamming,
            decay,
            noise: 1e-6,
        })
}

fn spec_for(kind: u8, d: usize) -> KernelSpec {
    let all: Vec<usize> = (0..d).collect();
    match kind {
        0 => KernelSpec::Se { coords: all },
        1 => KernelSpec::Matern52 { coords: all },
        2 => KernelSpec::Hamming { coords: all },
        3 => KernelSpec::Additive {
            groups: all.chunks(2).map(|c| KernelSpec::Se { coords: c.to_vec() }).collect(),
        },
        _ => KernelSpec::Product {
            fidelity: Box::new(KernelSpec::ExpDecay {
                coords: vec![0],
                top: vec![1.0],
            }),
            domain: Box::new(KernelSpec::Matern52 {
                coords: (1..d).collect(),
            }),
        },
    }
}

fn points(d: usize, n: usize, discrete: bool) -> impl Strategy<Value = Vec<Vec<f64>>> {
    let coord = if discrete {
        (0u8..3).prop_map(f64::from).boxed()
    } else {
        (0.0f64..1.0).boxed()
    };
    prop::collection::vec(prop::collection::vec(coord, d), 1..=n)
}

fn euclidean_domain(d: usize) -> Domain {
    Domain::new(
        (0..d)
            .map(|i| VariableSpec::euclidean(format!("x{i}"), -1.0 + i as f64, 2.0 + 2.0 * i as f64).unwrap())
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_symmetric_and_psd(
        (kind, d, pts) in (0u8..5, 2usize..5).prop_flat_map(|(kind, d)| (Just(kind), Just(d), points(d, 20, kind == 2))),
        hp in hyper(5),
    ) {
        let spec = spec_for(kind, d);
        for p in &pts {
            for q in &pts {
                prop_assert_eq!(spec.eval(&hp, p, q), spec.eval(&hp, q, p));
            }
        }
        let k = gram_matrix(&spec, &hp, &pts).unwrap() + DMatrix::identity(pts.len(), pts.len()) * hp.noise;
        let min_eig = SymmetricEigen::new(k).eigenvalues.min();
        prop_assert!(min_eig >= -1e-8, "min eigenvalue {}", min_eig);
    }

    #[test]
    fn product_kernel_diagonal_is_scale(hp in hyper(4), x in prop::collection::vec(0.0f64..1.0, 3)) {
        let spec = spec_for(4, 4);
        let mut q = vec![1.0];
        q.extend(x);
        prop_assert!((spec.eval(&hp, &q, &q) - hp.scale).abs() <= 1e-12 * hp.scale);
    }

    #[test]
    fn additive_gram_is_mean_of_groups(hp in hyper(4), pts in points(4, 8, false)) {
        let spec = spec_for(3, 4);
        let KernelSpec::Additive { groups } = &spec else { unreachable!() };
        let joint = gram_matrix(&spec, &hp, &pts).unwrap();
        let mut sum = DMatrix::zeros(pts.len(), pts.len());
        for g in groups {
            sum += gram_matrix(g, &hp, &pts).unwrap();
        }
        sum /= groups.len() as f64;
        prop_assert!((joint - sum).amax() <= 1e-12 * hp.scale);
    }

    #[test]
    fn decompositions_partition(perm in Just((0..9).collect::<Vec<usize>>()).prop_shuffle(), p in 1usize..12) {
        let dec = decomposition_from_ordering(&perm, p).unwrap();
        prop_assert!(dec.is_valid_for(9));
    }

    #[test]
    fn latin_hypercube_bins(d in 1usize..5, n in 1usize..40, seed in any::<u64>()) {
        let domain = euclidean_domain(d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = domain.sample_init(n, &mut rng).unwrap();
        prop_assert_eq!(pts.len(), n);
        for p in &pts {
            prop_assert!(domain.validate_point(p).unwrap());
        }
        for (i, v) in domain.variables().iter().enumerate() {
            let (lo, hi) = v.encoded_bounds();
            let mut bins: Vec<usize> = pts
                .iter()
                .map(|p| (((domain.encode(p)[i] - lo) / (hi - lo)) * n as f64).floor() as usize)
                .collect();
            bins.sort_unstable();
            prop_assert_eq!(bins, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn config_round_trip(d in 1usize..5, constrained in any::<bool>()) {
        let mut vars: Vec<VariableSpec> = (0..d)
            .map(|i| VariableSpec::euclidean(format!("x{i}"), 0.0, 1.0 + i as f64).unwrap())
            .collect();
        vars.push(VariableSpec::integer("n", 1.0, 9.0).unwrap());
        vars.push(VariableSpec::discrete("c", ["a", "b", "c"]).unwrap());
        vars.push(VariableSpec::discrete_numeric("s", vec![0.5, 1.5, 4.0]).unwrap());
        let mut domain = Domain::new(vars).unwrap();
        if constrained {
            domain = domain.with_constraint_expr("x0 + n <= 5 and c != \"b\"").unwrap();
        }
        let text = to_config_string(&domain, None).unwrap();
        let (back, fid) = parse_domain(&text).unwrap();
        prop_assert!(fid.is_none());
        prop_assert_eq!(to_config(&back, None).unwrap(), to_config(&domain, None).unwrap());
    }

    #[test]
    fn acquisition_bounds(mu in -5.0f64..5.0, sigma in 0.0f64..3.0, best in -5.0f64..5.0, beta in 0.0f64..20.0, bump in 0.0f64..2.0) {
        prop_assert!(ucb(mu, sigma, beta) >= mu);
        let ei = expected_improvement(mu, sigma, best);
        let pi = probability_of_improvement(mu, sigma, best);
        prop_assert!(ei >= 0.0);
        prop_assert!((0.0..=1.0).contains(&pi));
        prop_assert!(ucb(mu + bump, sigma, beta) >= ucb(mu, sigma, beta));
        prop_assert!(expected_improvement(mu + bump, sigma, best) >= ei);
        prop_assert!(probability_of_improvement(mu + bump, sigma, best) >= pi);
        if mu <= best {
            prop_assert_eq!(expected_improvement(mu, 0.0, best), 0.0);
            prop_assert!(probability_of_improvement(mu, 0.0, best) <= 0.5);
        }
    }

    #[test]
    fn weight_mass_tracks_improvements(events in prop::collection::vec((0usize..4, any::<bool>()), 0..60), gamma0 in 0.1f64..5.0) {
        let labels = vec![AcqKind::Ucb, AcqKind::Ei, AcqKind::Ts, AcqKind::Ttei];
        let mut state = AcqState::new(labels.clone(), gamma0, 2).unwrap();
        let mut improvements = 0.0;
        for (l, improved) in events {
            state.update_weights(labels[l], improved).unwrap();
            improvements += f64::from(u8::from(improved));
            let mass: f64 = state.weights().iter().sum();
            prop_assert!((mass - (4.0 * gamma0 + improvements)).abs() <= 1e-9);
            prop_assert!(state.weights().iter().all(|&w| w >= gamma0));
        }
    }

    #[test]
    fn conditioning_never_raises_variance(
        hp in hyper(2),
        xs in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..15),
        ys in prop::collection::vec(-2.0f64..2.0, 15),
        extra in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..5),
        probes in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 10),
    ) {
        let mut hp = hp;
        hp.noise = 1e-2 * hp.scale;
        let data: Vec<Observation> = xs.into_iter().zip(ys).collect();
        let gp = GpModel::fit_with_mean(spec_for(1, 2), hp, &data, 0.3).unwrap();
        let h = gp.hallucinate(&extra).unwrap();
        for x in &probes {
            let (m0, s0) = gp.posterior(x).unwrap();
            let (m1, s1) = h.posterior(x).unwrap();
            prop_assert!((m1 - m0).abs() <= 1e-6);
            prop_assert!(s1 <= s0);
        }
    }
}
