//! Randomized property tests for the library's structural invariants.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_distr::Distribution;

use rmd::cli::parse_seed_list;
use rmd::core::{
    latent_update, model_matrix, residual, support_from, FactorPair, ModelShape,
};
use rmd::data::{edm, gen_points, observe_below, PointMode};
use rmd::solvers::{init_factors, orthonormal_range_basis, solve, Method, SolverConfig};

fn randn(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(m, n, |_, _| rand_distr::StandardNormal.sample(&mut rng))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn latent_update_is_the_nearest_feasible_point(
        seed in 0u64..100_000,
        m in 2usize..9,
        n in 2usize..9,
    ) {
        let theta = randn(m, n, seed);
        let x = support_from(theta.map(|v: f64| v.max(0.0))).unwrap();
        let mmat = randn(m, n, seed ^ 0x9e3779b9);
        let z = latent_update(&x, &mmat).unwrap();

        // feasibility holds exactly: max(0, Z) = X
        for i in 0..m {
            for j in 0..n {
                prop_assert_eq!(z[(i, j)].max(0.0), x.values()[(i, j)]);
            }
        }

        // any other feasible point is at least as far from M
        let bump = randn(m, n, seed ^ 0x51f0);
        let mut alt = z.clone();
        for i in 0..m {
            for j in 0..n {
                if !x.is_observed(i, j) {
                    alt[(i, j)] -= bump[(i, j)].abs();
                }
            }
        }
        prop_assert!((&z - &mmat).norm() <= (&alt - &mmat).norm() + 1e-12);
    }

    #[test]
    fn residual_is_the_latent_update_gap(
        seed in 0u64..100_000,
        m in 2usize..8,
        n in 2usize..8,
    ) {
        let theta = randn(m, n, seed);
        let x = support_from(theta.map(|v: f64| v.max(0.0))).unwrap();
        let mmat = randn(m, n, seed ^ 0xabcd);
        let s = residual(&x, &mmat).unwrap();
        let z = latent_update(&x, &mmat).unwrap();
        prop_assert_eq!((s.matrix() - (&z - &mmat)).norm(), 0.0);
    }

    #[test]
    fn model_matrix_matches_its_closed_form(
        seed in 0u64..100_000,
        m in 2usize..8,
        n in 2usize..8,
        r in 1usize..4,
        d in 0.1f64..50.0,
    ) {
        let f = FactorPair::new(randn(m, r, seed), randn(r, n, seed ^ 0x77)).unwrap();
        let wh = f.w() * f.h();
        prop_assert_eq!(model_matrix(&f, ModelShape::plain()), wh.clone());

        let below = model_matrix(&f, ModelShape::below_threshold(d).unwrap());
        let expected = DMatrix::from_element(m, n, d) - &wh;
        prop_assert!((below - expected).norm() == 0.0);
    }

    #[test]
    fn range_basis_is_orthonormal_and_spans(
        seed in 0u64..100_000,
        m in 3usize..10,
        r in 1usize..4,
    ) {
        prop_assume!(r < m);
        let a = randn(m, r, seed);
        let q = orthonormal_range_basis(&a, None).unwrap();
        prop_assert_eq!(q.ncols(), r);
        let gram = q.transpose() * &q;
        prop_assert!((gram - DMatrix::identity(r, r)).norm() <= 1e-12);
        let reproj = &q * (q.transpose() * &a);
        prop_assert!((reproj - &a).norm() <= 1e-10 * a.norm());
    }

    #[test]
    fn observe_below_hits_the_requested_fraction(
        seed in 0u64..100_000,
        k in 4usize..12,
        frac in 0.3f64..0.95,
    ) {
        let cloud = gen_points(PointMode::Uniform, &[k], seed).unwrap();
        let theta = edm(&cloud);
        let (x, d) = observe_below(&theta, frac).unwrap();
        prop_assert!(d > 0.0);
        let mn = (k * k) as f64;
        let achieved = x.nnz() as f64 / mn;
        // entries tied with the threshold stay unobserved, and distances come
        // in symmetric pairs, so the cut can miss frac by the tie count
        let ties = theta.iter().filter(|&&v| v == d).count() as f64;
        prop_assert!((achieved - frac).abs() <= (1.0 + ties) / mn + 1e-12);
    }

    #[test]
    fn seed_ranges_enumerate_inclusively(a in 0u64..1000, len in 0u64..20) {
        let parsed = parse_seed_list(&format!("{a}..{}", a + len)).unwrap();
        let expected: Vec<u64> = (a..=a + len).collect();
        prop_assert_eq!(parsed, expected);
    }

    #[test]
    fn accepted_gammas_never_increase(
        seed in 0u64..100_000,
        m in 6usize..14,
        n in 6usize..14,
        r in 1usize..4,
        noisy in proptest::bool::ANY,
        method_ix in 0usize..2,
    ) {
        let sigma = if noisy { 0.1 } else { 0.0 };
        let (x, _) = rmd::data::gen_relu_sampling(m, n, r, sigma, seed).unwrap();
        prop_assume!(x.nnz() > 0);
        let mut cfg = SolverConfig::new(r);
        cfg.maxit = 25;
        cfg.seed = seed ^ 0x5eed;
        let method = [Method::Bcd, Method::Ebcd][method_ix];
        let report = solve(&x, ModelShape::plain(), &cfg, method).unwrap();
        let accepted: Vec<f64> =
            report.trace.iter().filter(|r| r.accepted).map(|r| r.gamma).collect();
        for w in accepted.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "gamma rose from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn factor_init_is_seed_deterministic(
        seed in 0u64..100_000,
        m in 2usize..10,
        n in 2usize..10,
        r in 1usize..4,
    ) {
        let theta = randn(m, n, seed);
        let x = support_from(theta.map(|v: f64| v.max(0.0))).unwrap();
        prop_assume!(x.nnz() > 0);
        let a = init_factors(&x, r, seed).unwrap();
        let b = init_factors(&x, r, seed).unwrap();
        prop_assert_eq!(a.w(), b.w());
        prop_assert_eq!(a.h(), b.h());
    }
}
