//! Randomized properties of the numerical building blocks.

use nalgebra::DMatrix;
use proptest::prelude::*;

use rpinv::bench::{Experiment, ExperimentConfig};
use rpinv::jacobi::{uniform_grid, JacobiBasis, JacobiParams};
use rpinv::npreg::{fit_points, NpregModel};
use rpinv::randsample::{inverse_beta_cdf, regularized_beta, sample_beta, EmpiricalCdf};
use rpinv::specdiag::spectral_report;
use rpinv::Domain;

fn params() -> impl Strategy<Value = JacobiParams> {
    (-0.5f64..2.0, -0.5f64..2.0).prop_map(|(a, b)| JacobiParams::new(a, b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quadrature_gram_is_identity(p in params(), degree in 0usize..25) {
        let basis = JacobiBasis::symmetric(p, degree);
        let rule = basis.default_quadrature().unwrap();
        let rows: Vec<Vec<f64>> = rule.nodes().iter().map(|&x| basis.eval_row(x).unwrap()).collect();
        for j in 0..=degree {
            for k in 0..=degree {
                let g: f64 = rows.iter().zip(rule.weights()).map(|(r, w)| w * r[j] * r[k]).sum();
                let target = if j == k { 1.0 } else { 0.0 };
                prop_assert!((g - target).abs() < 1e-10, "G[{j}][{k}] = {g}");
            }
        }
    }

    #[test]
    fn inverse_cdf_is_right_inverse(p in params(), t in 0.0f64..=1.0) {
        let x = inverse_beta_cdf(&p, t).unwrap();
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert!((regularized_beta(p.alpha() + 1.0, p.beta() + 1.0, x) - t).abs() < 1e-10);
    }

    #[test]
    fn samples_stay_in_domain(p in params(), seed in any::<u64>(), unit in any::<bool>()) {
        let domain = if unit { Domain::Unit } else { Domain::Symmetric };
        let s = sample_beta(&p, 64, domain, seed).unwrap();
        prop_assert!(s.points.iter().all(|&x| domain.contains(x)));
        prop_assert_eq!(s.points, sample_beta(&p, 64, domain, seed).unwrap().points);
    }

    #[test]
    fn eigenvalues_lie_in_gershgorin_discs(entries in proptest::collection::vec(-5.0f64..5.0, 36)) {
        let m = DMatrix::from_vec(6, 6, entries);
        let sym = (&m + m.transpose()) * 0.5;
        let report = spectral_report(&sym).unwrap();
        prop_assert!(report.gershgorin_contains(1e-9));
        prop_assert!(report.lambda_min <= report.lambda_max);
    }

    #[test]
    fn fitted_models_round_trip_through_json(p in params(), degree in 0usize..8, seed in any::<u64>()) {
        let basis = JacobiBasis::symmetric(p, degree);
        let xs = sample_beta(&p, 4 * (degree + 1), Domain::Symmetric, seed).unwrap().points;
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin()).collect();
        if let Ok(model) = fit_points(&basis, &xs, &ys) {
            let back = NpregModel::from_json(&model.to_json().unwrap()).unwrap();
            let bits = |m: &NpregModel| m.coeffs().iter().map(|c| c.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&model));
        }
    }

    #[test]
    fn empirical_cdf_is_monotone(values in proptest::collection::vec(-100.0f64..100.0, 1..60)) {
        let ecdf = EmpiricalCdf::new(&values).unwrap();
        let grid = uniform_grid(-110.0, 110.0, 201);
        let evals: Vec<f64> = grid.iter().map(|&x| ecdf.eval(x)).collect();
        prop_assert!(evals.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(evals.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(*evals.last().unwrap(), 1.0);
    }

    #[test]
    fn configs_round_trip(seed in any::<u64>(), trials in proptest::option::of(1usize..100), sigma in proptest::option::of(0.0f64..1.0)) {
        let mut c = ExperimentConfig::new(Experiment::Table4);
        c.seed = seed;
        c.trials = trials;
        c.sigma = sigma;
        let back = ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), c.to_json().unwrap());
    }
}
