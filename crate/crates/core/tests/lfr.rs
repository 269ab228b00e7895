//! Dyadic LFR estimator against the probabilistic bounds it is meant to satisfy.

use rpinv::jacobi::uniform_grid;
use rpinv::lfr::{
    cumulative_kappa, cumulative_kappa_envelope, dyadic_partition, lfr_fit, lfr_risk_mc, simulate_problem, theorem6_bound, truncate_beta, LfrRiskConfig,
    LfrVariant, SLOPE_GRID_POINTS,
};

#[test]
fn partitions_cover_every_index_once() {
    for degree in 1..=200 {
        let p = dyadic_partition(degree).unwrap();
        let covered: Vec<usize> = p.blocks.iter().flat_map(|b| b.indices()).collect();
        assert_eq!(covered, (1..=degree).collect::<Vec<_>>(), "N = {degree}");
        assert!(p.len() <= (degree as f64).log2().floor() as usize + 1);
    }
}

#[test]
fn cumulative_kappa_within_envelope() {
    for s in [0.75, 1.5] {
        for degree in [20, 35, 50] {
            for n in [100, 200] {
                let envelope = 1.5 * cumulative_kappa_envelope(s, degree);
                for seed in 0..5 {
                    let p = simulate_problem(n, degree, s, 0.0, LfrVariant::Table2, seed).unwrap();
                    let (kappa, reports) = cumulative_kappa(&p).unwrap();
                    assert_eq!(kappa, reports.iter().map(|r| r.kappa2).sum::<f64>());
                    assert!(kappa <= envelope, "s={s} N={degree} n={n} seed={seed}: {kappa} > {envelope}");
                }
            }
        }
    }
}

#[test]
fn block_condition_numbers_respect_theorem6_where_applicable() {
    let p = simulate_problem(20_000, 8, 1.0, 0.0, LfrVariant::Table2, 3).unwrap();
    let (_, reports) = cumulative_kappa(&p).unwrap();
    let mut applicable = 0;
    for (k, report) in reports.iter().enumerate() {
        let bound = theorem6_bound(&p, k + 1, 3f64.sqrt(), 1e-3).unwrap();
        if let Some(b) = bound.kappa_bound {
            applicable += 1;
            assert!(report.kappa2 <= b, "block {}: {} > {b}", k + 1, report.kappa2);
        }
    }
    assert!(applicable >= 1);
}

#[test]
fn truncation_never_increases_pointwise_error() {
    let p = simulate_problem(120, 20, 2.0, 0.5, LfrVariant::Example3, 9).unwrap();
    let model = lfr_fit(&p).unwrap();
    let grid = uniform_grid(0.0, 1.0, SLOPE_GRID_POINTS);
    let level = 10.0;
    let truth: Vec<f64> = grid
        .iter()
        .map(|&x| p.true_coeffs.iter().enumerate().map(|(j, c)| c * rpinv::lfr::cosine_basis(j + 1, x)).sum())
        .collect();
    assert!(truth.iter().all(|t| t.abs() <= level));
    let truncated = truncate_beta(&model, level, &grid).unwrap();
    for ((&x, t), b) in grid.iter().zip(&truth).zip(&truncated) {
        assert!((t - b).abs() <= (t - model.eval(x)).abs() + 1e-12, "x = {x}");
    }
}

#[test]
fn empirical_risk_against_theorem7() {
    for (n, s, sigma) in [(200, 2.0, 0.5), (300, 4.0, 0.5), (400, 2.0, 0.1)] {
        let config = LfrRiskConfig {
            n,
            degree: 50,
            s,
            sigma,
            variant: LfrVariant::Example3,
            level: 10.0,
            trials: 20,
            r: 1.0,
            eta: None,
            seed: 17,
        };
        let risk = lfr_risk_mc(&config).unwrap();
        assert!(risk.empirical_risk.is_finite() && risk.theorem7_bound.is_finite());
        assert!(
            risk.empirical_risk <= risk.theorem7_bound,
            "n={n} s={s} sigma={sigma}: risk {:e} > bound {:e}",
            risk.empirical_risk,
            risk.theorem7_bound
        );
    }
}
