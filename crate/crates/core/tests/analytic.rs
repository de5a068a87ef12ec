use proptest::prelude::*;

use tiltcov::analytic::quadrature::integrate;
use tiltcov::analytic::{
    coverage_approx, coverage_exact, integrate_semi_infinite, Analysis, Method, QuadratureSpec,
    TailBound,
};
use tiltcov::model::{BsType, EnvironmentParams, SystemConfig, UserKind};

const ENVS: [EnvironmentParams; 4] = [
    EnvironmentParams::SUBURBAN,
    EnvironmentParams::URBAN,
    EnvironmentParams::DENSE_URBAN,
    EnvironmentParams::HIGHRISE_URBAN,
];

fn urban(user: UserKind) -> Analysis {
    Analysis::with_defaults(&SystemConfig::defaults_in(EnvironmentParams::URBAN), user).unwrap()
}

#[test]
fn exponential_tail() {
    let spec = QuadratureSpec {
        truncation_radius: 50.0,
        abs_tol: 1e-10,
        ..QuadratureSpec::default()
    };
    // e^(−z) ≤ e^(−50)·(50/z)^0 on the tail; bound it by a steep power law.
    let tail = TailBound::PowerLaw {
        coefficient: (-50.0f64).exp() * 50f64.powi(4),
        exponent: 4.0,
    };
    let r = integrate_semi_infinite(|z| (-z).exp(), 0.0, &[], &spec, tail).unwrap();
    assert!((r.value - 1.0).abs() < 1e-8, "{}", r.value);
}

#[test]
fn gaussian_moment() {
    let spec = QuadratureSpec {
        truncation_radius: 10.0,
        ..QuadratureSpec::default()
    };
    let f = |z: f64| z * (-std::f64::consts::PI * z * z).exp();
    let r = integrate_semi_infinite(f, 0.0, &[], &spec, TailBound::Zero).unwrap();
    assert!((r.value - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-8);
}

#[test]
fn step_at_one_hundred() {
    let spec = QuadratureSpec {
        truncation_radius: 300.0,
        abs_tol: 1e-9,
        ..QuadratureSpec::default()
    };
    let f = |z: f64| if z < 100.0 { 2.0 } else { 0.5 * (-(z - 100.0) / 10.0).exp() };
    let exact = 200.0 + 5.0 * (1.0 - (-20.0f64).exp());
    let r = integrate_semi_infinite(f, 0.0, &[100.0], &spec, TailBound::Zero).unwrap();
    assert!((r.value - exact).abs() <= spec.abs_tol + 1e-12 * exact, "{}", r.value);
}

#[test]
fn defective_mass_identity() {
    for env in ENVS {
        let cfg = SystemConfig::defaults_in(env);
        for user in UserKind::ALL {
            let a = Analysis::with_defaults(&cfg, user).unwrap();
            let sc = a.scenario();
            for b in BsType::ALL {
                let breaks = sc.breakpoints();
                let mass = integrate(
                    |r| a.nearest_distance_pdf(b, r),
                    0.0,
                    sc.radius,
                    &breaks,
                    1e-12,
                    1e-10,
                    20_000,
                )
                .unwrap()
                .value;
                let expected = -(-sc.intensity_measure(b, sc.radius)).exp_m1();
                assert!(
                    (mass - expected).abs() < 1e-6,
                    "{user} {b}: {mass} vs {expected}"
                );
            }
        }
    }
}

#[test]
fn cdf_difference_matches_pdf() {
    let a = urban(UserKind::Aerial);
    for b in [BsType::UML, BsType::USL, BsType::USN, BsType::DSL] {
        let ring = a.scenario().ring(b.tilt);
        for r in [150.0, 300.0, 700.0, 1200.0, 2500.0, 6000.0] {
            if (r - ring.inner).abs() < 5.0 || (r - ring.outer).abs() < 5.0 {
                continue;
            }
            let h = 1e-3;
            let step = a.scenario().config.environment.step_length();
            // Stay clear of LoS steps, where the density jumps.
            if ((r / step).fract() * step) < 2.0 * h || ((r / step).fract() * step) > step - 2.0 * h {
                continue;
            }
            let pdf = a.nearest_distance_pdf(b, r);
            let fd = (a.nearest_distance_cdf(b, r + h) - a.nearest_distance_cdf(b, r - h)) / (2.0 * h);
            assert!((fd - pdf).abs() <= 1e-4 * pdf + 1e-12, "{b} r={r}: {fd} vs {pdf}");
        }
    }
}

#[test]
fn total_association_is_one() {
    for env in ENVS {
        for delta in [0.0, 0.3, 0.7, 1.0] {
            let cfg = SystemConfig::defaults_in(env).with_delta(delta);
            for user in UserKind::ALL {
                let a = Analysis::with_defaults(&cfg, user).unwrap();
                let total: f64 = BsType::admissible(user)
                    .into_iter()
                    .map(|b| a.association_share(b).unwrap())
                    .sum();
                assert!((total - 1.0).abs() < 1e-3, "{user} δ={delta}: {total}");
            }
        }
    }
}

#[test]
fn derivative_matches_central_difference() {
    let a = urban(UserKind::Aerial);
    for (b, r0) in [(BsType::UML, 300.0), (BsType::USN, 2000.0), (BsType::DSL, 120.0)] {
        let ctx = a.context(b, r0).unwrap();
        let s = a.laplace_argument(&ctx, 10f64.powf(-0.5));
        let h = s * 1e-4;
        let d1 = a.laplace_derivative(&ctx, s, 1).unwrap();
        let fd = (a.interference_laplace(&ctx, s + h).unwrap()
            - a.interference_laplace(&ctx, s - h).unwrap())
            / (2.0 * h);
        assert!((fd / d1 - 1.0).abs() < 1e-4, "{b} {r0}: {fd} vs {d1}");
        let d2 = a.laplace_derivative(&ctx, s, 2).unwrap();
        let fd2 = (a.laplace_derivative(&ctx, s + h, 1).unwrap()
            - a.laplace_derivative(&ctx, s - h, 1).unwrap())
            / (2.0 * h);
        assert!((fd2 / d2 - 1.0).abs() < 1e-3, "{b} {r0}: {fd2} vs {d2}");
        assert_eq!(
            a.laplace_derivative(&ctx, s, 0).unwrap(),
            a.interference_laplace(&ctx, s).unwrap()
        );
    }
}

#[test]
fn exact_equals_approx_for_unit_shapes() {
    for env in [EnvironmentParams::URBAN, EnvironmentParams::HIGHRISE_URBAN] {
        let mut cfg = SystemConfig::defaults_in(env);
        cfg.channel.m_los = 1;
        cfg.channel.m_nlos = 1;
        for user in UserKind::ALL {
            let e = coverage_exact(user, &cfg, cfg.tau_linear()).unwrap().value;
            let p = coverage_approx(user, &cfg, cfg.tau_linear()).unwrap().value;
            assert!((e - p).abs() < 0.005, "{user}: {e} vs {p}");
        }
    }
}

#[test]
fn tiny_threshold_gives_full_coverage() {
    let cfg = SystemConfig::defaults_in(EnvironmentParams::URBAN);
    let a = Analysis::with_defaults(&cfg, UserKind::Ground).unwrap();
    let c = a.coverage(Method::Approximate, 1e-9).unwrap().value;
    assert!(c > 0.999, "{c}");
}

#[test]
fn coverage_is_a_probability_across_delta() {
    for env in ENVS {
        for k in 0..=10 {
            let cfg = SystemConfig::defaults_in(env).with_delta(k as f64 / 10.0);
            for user in UserKind::ALL {
                let c = coverage_approx(user, &cfg, cfg.tau_linear()).unwrap();
                assert!((0.0..=1.0).contains(&c.value));
                let assoc: f64 = c.per_type.iter().map(|s| s.association).sum();
                assert!(c.value <= assoc + 1e-9);
            }
        }
    }
}

#[test]
fn density_scale_invariance_without_blockage() {
    // One type, all LoS, no height offset: SIR does not depend on density.
    let mut cfg = SystemConfig::defaults_in(EnvironmentParams::unobstructed());
    cfg.deployment.h_bs = 0.0;
    cfg.deployment.h_ground = 0.0;
    cfg.channel.alpha_los = 4.0;
    for delta in [0.0, 1.0] {
        let mut c1 = cfg.with_delta(delta);
        let base = coverage_approx(UserKind::Ground, &c1, c1.tau_linear()).unwrap().value;
        c1.deployment.lambda_total *= 2.0;
        let doubled = coverage_approx(UserKind::Ground, &c1, c1.tau_linear()).unwrap().value;
        assert!((base - doubled).abs() < 1e-3, "δ={delta}: {base} vs {doubled}");
    }
}

#[test]
fn truncation_radius_is_sufficient() {
    let cfg = SystemConfig::defaults_in(EnvironmentParams::DENSE_URBAN);
    for user in UserKind::ALL {
        let at = |km: f64| {
            let spec = QuadratureSpec {
                truncation_radius: km * 1e3,
                ..QuadratureSpec::default()
            };
            Analysis::new(&cfg, user, spec)
                .unwrap()
                .coverage(Method::Approximate, cfg.tau_linear())
                .unwrap()
                .value
        };
        // 95% CI half-width at n = 1e5 is at least 0.0018 for p ∈ [0.1, 0.9].
        assert!((at(30.0) - at(40.0)).abs() < 0.0018, "{user}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplace_is_completely_monotone(r0 in 130.0f64..1400.0, scale in 0.0f64..20.0) {
        let a = urban(UserKind::Aerial);
        let ctx = a.context(BsType::UML, r0).unwrap();
        let s = scale * a.laplace_argument(&ctx, 1.0);
        let d = [0, 1, 2].map(|k| a.laplace_derivative(&ctx, s, k).unwrap());
        prop_assert!(d[0] > 0.0 && d[0] <= 1.0);
        prop_assert!(d[1] <= 0.0);
        prop_assert!(d[2] >= 0.0);
        let later = a.interference_laplace(&ctx, s * 1.5 + 1.0).unwrap();
        prop_assert!(later < d[0]);
    }

    #[test]
    fn laplace_at_zero_is_one(r0 in 1500.0f64..20000.0) {
        let a = urban(UserKind::Ground);
        let ctx = a.context(BsType::DSN, r0).unwrap();
        prop_assert_eq!(a.interference_laplace(&ctx, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn conditional_coverage_is_probability(r0 in 140.0f64..1400.0, tau_db in -20.0f64..20.0) {
        let a = urban(UserKind::Ground);
        let ctx = a.context(BsType::DMN, r0).unwrap();
        let tau = 10f64.powf(tau_db / 10.0);
        let e = a.conditional_coverage_exact(&ctx, tau).unwrap();
        let p = a.conditional_coverage_approx(&ctx, tau).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert!((0.0..=1.0).contains(&p));
    }
}
