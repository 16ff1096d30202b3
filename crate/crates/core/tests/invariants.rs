//! Property tests over random parameters, seeds and spacing patterns.

use proptest::prelude::*;

use cogarch::cogarch::{simulate_exact, stationary_sigma0};
use cogarch::embedding::{embed, explicit_sigma_check, lift, skorokhod_bound, sup_distance};
use cogarch::grid::spacing_classes;
use cogarch::io::{frequency_table, parse_series, write_returns, IngestMode, OutputHeader};
use cogarch::levy::{extract_innovations, simulate_levy_path, JumpDist};
use cogarch::pml::{conditional_variance, pseudo_log_likelihood, RhoMode, WeightScheme};
use cogarch::study::aggregate;
use cogarch::{CogarchParams, Grid, LevySpec, ReturnsSeries};

fn params() -> impl Strategy<Value = CogarchParams> {
    (0.01f64..5.0, 0.01f64..0.5, 0.05f64..0.95)
        .prop_map(|(beta, eta, share)| CogarchParams::new(beta, eta, eta * share).unwrap())
}

fn driver() -> impl Strategy<Value = LevySpec> {
    prop_oneof![
        (0.2f64..4.0)
            .prop_map(|r| LevySpec::compound_poisson(r, JumpDist::StandardNormal).unwrap()),
        (0.2f64..4.0)
            .prop_map(|r| LevySpec::compound_poisson(r, JumpDist::TwoPoint { a: 1.0 }).unwrap()),
        (0.1f64..0.9, 0.2f64..3.0).prop_map(|(s, r)| {
            LevySpec::jump_diffusion(s, r, JumpDist::StandardNormal).unwrap()
        }),
    ]
}

fn spacings() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![Just(1.0), Just(2.0), Just(3.0), Just(0.5)],
        5..60,
    )
}

fn series() -> impl Strategy<Value = ReturnsSeries> {
    spacings().prop_flat_map(|s| {
        let n = s.len();
        (Just(s), prop::collection::vec(-3.0f64..3.0, n))
            .prop_map(|(s, y)| ReturnsSeries::from_spacings(&s, y).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn variances_stay_positive(p in params(), spec in driver(), seed in any::<u64>()) {
        let grid = Grid::uniform(30.0, 60).unwrap();
        let sigma0 = stationary_sigma0(&p).unwrap();
        let path = simulate_levy_path(&spec, 30.0, seed).unwrap();
        let exact = simulate_exact(&path, &p, &grid, sigma0).unwrap();
        prop_assert!(exact.sigma2.iter().chain(&exact.sigma2_left).all(|&s| s > 0.0));
        let innov = extract_innovations(&path, &grid, 0.0, &spec).unwrap();
        let series = embed(&innov, &p, sigma0).unwrap();
        prop_assert!(series.sigma2.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn embedding_matches_its_explicit_form(p in params(), seed in any::<u64>()) {
        let spec = LevySpec::compound_poisson(1.0, JumpDist::StandardNormal).unwrap();
        let grid = Grid::uniform(40.0, 40).unwrap();
        let path = simulate_levy_path(&spec, 40.0, seed).unwrap();
        let innov = extract_innovations(&path, &grid, 0.0, &spec).unwrap();
        let series = embed(&innov, &p, stationary_sigma0(&p).unwrap()).unwrap();
        prop_assert!(explicit_sigma_check(&series).max_rel < 1e-10);
    }

    #[test]
    fn distance_is_symmetric_and_zero_on_itself(p in params(), seed in any::<u64>()) {
        let spec = LevySpec::compound_poisson(1.0, JumpDist::StandardNormal).unwrap();
        let grid = Grid::uniform(20.0, 20).unwrap();
        let sigma0 = stationary_sigma0(&p).unwrap();
        let path = simulate_levy_path(&spec, 20.0, seed).unwrap();
        let exact = simulate_exact(&path, &p, &grid, sigma0).unwrap();
        let innov = extract_innovations(&path, &grid, 0.0, &spec).unwrap();
        let series = embed(&innov, &p, sigma0).unwrap();
        let lifted = lift(&series);
        prop_assert_eq!(sup_distance(&exact, &exact), (0.0, 0.0));
        prop_assert_eq!(sup_distance(&lifted, &exact), sup_distance(&exact, &lifted));
        let b = skorokhod_bound(&series, &exact).unwrap();
        prop_assert!(b.bound >= b.sup_g + b.sup_sigma2);
        prop_assert!(b.time_change_sup <= b.mesh * (1.0 + 1e-12));
    }

    #[test]
    fn simulation_is_deterministic(spec in driver(), seed in any::<u64>()) {
        let a = simulate_levy_path(&spec, 25.0, seed).unwrap();
        let b = simulate_levy_path(&spec, 25.0, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mse_decomposes(est in prop::collection::vec(-10.0f64..10.0, 2..50), truth in -5.0f64..5.0) {
        let s = aggregate(&est, truth).unwrap();
        let r = est.len() as f64;
        let var = (s.std_error * s.std_error) * r;
        let rhs = s.bias * s.bias + var * (r - 1.0) / r;
        prop_assert!((s.rmse * s.rmse - rhs).abs() <= 1e-9 * (1.0 + rhs));
        prop_assert!(s.mae <= s.rmse * (1.0 + 1e-12));
    }

    #[test]
    fn weights_sum_to_horizon(
        s in spacings(),
        gamma in -0.5f64..0.5,
        u in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let (dts, classes) = spacing_classes(&s);
        let mut counts = vec![0usize; dts.len()];
        for c in classes {
            counts[c] += 1;
        }
        let horizon: f64 = s.iter().sum();
        let schemes = [
            WeightScheme::Identity,
            WeightScheme::Constant,
            WeightScheme::LogParametric { gamma },
            WeightScheme::PerDeltaT { log_factors: u[..dts.len()].to_vec() },
        ];
        for scheme in schemes {
            let Ok(w) = scheme.class_weights(&dts, &counts, horizon) else {
                // Only the log family can lose positivity.
                let is_log = matches!(scheme, WeightScheme::LogParametric { .. });
                prop_assert!(is_log);
                continue;
            };
            let total: f64 = w.iter().zip(&counts).map(|(w, &c)| w * c as f64).sum();
            prop_assert!((total - horizon).abs() < 1e-9 * horizon, "{scheme:?}");
            prop_assert!(w.iter().all(|&x| x > 0.0));
        }
    }

    /// Scaling returns by `c` maps `(β, η, φ)` to `(c²β, η, φ)` and shifts
    /// the likelihood by `-N log c`, so the argmax moves accordingly.
    #[test]
    fn likelihood_is_scale_equivariant(s in series(), p in params(), c in 0.1f64..10.0) {
        let scaled = ReturnsSeries::from_spacings(
            &s.spacings(),
            s.returns().iter().map(|y| c * y).collect(),
        ).unwrap();
        let q = CogarchParams::new(c * c * p.beta, p.eta, p.phi).unwrap();
        let n = s.len() as f64;
        for mode in [RhoMode::FirstOrder, RhoMode::Exact] {
            let a = pseudo_log_likelihood(&s, &p, mode, &WeightScheme::Identity);
            let b = pseudo_log_likelihood(&scaled, &q, mode, &WeightScheme::Identity);
            if a.is_finite() {
                prop_assert!((b - (a - n * c.ln())).abs() < 1e-8 * (1.0 + a.abs()));
            } else {
                prop_assert!(!b.is_finite());
            }
        }
    }

    /// The exact conditional variance and its first-order form agree to first
    /// order in `Δt`.
    #[test]
    fn rho_modes_agree_to_first_order(p in params(), s2 in 0.1f64..10.0) {
        let dt = 1e-4;
        let exact = conditional_variance(s2, dt, &p, RhoMode::Exact).unwrap();
        let first = conditional_variance(s2, dt, &p, RhoMode::FirstOrder).unwrap();
        let level = p.beta / (p.eta - p.phi);
        let scale = (s2 - level).abs() * (p.eta - p.phi) * dt * dt;
        prop_assert!((exact - first).abs() <= scale * 1.01 + 1e-15);
    }

    #[test]
    fn returns_files_round_trip(s in series(), origin in -1e4f64..1e4) {
        let times: Vec<f64> = s.times().iter().map(|t| t + origin).collect();
        let s = ReturnsSeries::new(times, s.returns().to_vec()).unwrap();
        let header = OutputHeader { config_hash: "0".into(), seed: 0 };
        let mut buf = Vec::new();
        write_returns(&mut buf, &s, &header).unwrap();
        let back = parse_series(buf.as_slice(), IngestMode::Returns).unwrap();
        prop_assert_eq!(back.returns(), s.returns());
        prop_assert_eq!(back.origin(), s.origin());
        let counts: usize = frequency_table(&back).iter().map(|r| r.1).sum();
        prop_assert_eq!(counts, s.len());
    }
}
