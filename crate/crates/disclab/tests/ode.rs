use std::f64::consts::PI;

use disclab::logderiv::FSpec;
use disclab::numerics::LogGap;
use disclab::ode::{
    audit_inequalities, estimate_orders, g_grid, growth_majorant, h_alpha_orders,
    majorant_curve, majorant_instance, pmppvk_check, predict_orders, solution_samples,
    solve_for_radius, taylor_solve, taylor_solve_scaled, tmon_check, xi_beta, xi_eps_bound,
    AuditOptions, CoeffSpec, EstimateOptions, InstanceParams, MajorantModel, OdeError,
    SolveOptions,
};
use disclab::profile::PiecewiseProfile;
use disclab::scaffold::{build_scaffold, ScaffoldParams};
use disclab::wiman::{build_prop43b, k_indicator, log_max_term};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `A_j = -(j+1)`, the coefficients of `-(1-z)^{-2}`.
fn pole_dense(n: usize) -> CoeffSpec {
    let a: Vec<f64> = (0..=n).map(|j| -((j + 1) as f64)).collect();
    CoeffSpec::dense_f64(&a)
}

/// Coefficients of `exp(z/(1-z))`: `f_n = Σ_{k=1}^n C(n-1,k-1)/k!`.
fn exp_pole_oracle(n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut binom = 1.0; // C(n-1, k-1)
    let mut fact = 1.0; // k!
    let mut sum = 0.0;
    for k in 1..=n {
        fact *= k as f64;
        sum += binom / fact;
        binom *= (n - k) as f64 / k as f64;
    }
    sum
}

#[test]
fn zero_coefficient_keeps_initial_polynomial() {
    let s = taylor_solve(&CoeffSpec::dense_f64(&[]), 3, &[1.0, 2.0, 6.0], 10).unwrap();
    assert_eq!(s.coeff(0).to_f64(), 1.0);
    assert_eq!(s.coeff(1).to_f64(), 2.0);
    assert!((s.coeff(2).to_f64() - 3.0).abs() < 1e-15);
    for m in 3..=10 {
        assert!(s.coeff(m).is_zero());
    }
}

#[test]
fn small_examples() {
    let s = taylor_solve(&pole_dense(4), 1, &[1.0], 4).unwrap();
    assert!((s.coeff(1).to_f64() - 1.0).abs() < 1e-15);
    assert!((s.coeff(2).to_f64() - 1.5).abs() < 1e-15);
    // cosine
    let s = taylor_solve(&CoeffSpec::dense_f64(&[1.0]), 2, &[1.0, 0.0], 8).unwrap();
    assert!((s.coeff(2).to_f64() + 0.5).abs() < 1e-15);
    assert!(s.coeff(3).is_zero());
    assert!((s.coeff(4).to_f64() - 1.0 / 24.0).abs() < 1e-15);
}

#[test]
fn exp_pole_matches_expansion_through_200() {
    let s = taylor_solve(&pole_dense(200), 1, &[1.0], 200).unwrap();
    let r = taylor_solve(&CoeffSpec::exp_pole(1), 1, &[1.0], 200).unwrap();
    for n in 0..=200 {
        let want = exp_pole_oracle(n);
        let got = s.coeff(n).to_f64();
        assert!((got - want).abs() <= 1e-10 * want, "n={n}: {got} vs {want}");
        let got = r.coeff(n).to_f64();
        assert!((got - want).abs() <= 1e-10 * want, "rational n={n}: {got} vs {want}");
    }
}

#[test]
fn scaling_does_not_change_coefficients() {
    let a = taylor_solve(&pole_dense(60), 1, &[1.0], 60).unwrap();
    let b = taylor_solve_scaled(&pole_dense(60), 1, &[1.0], 60, (0.9f64).ln()).unwrap();
    for m in 0..=60 {
        let (x, y) = (a.coeff(m).logmag, b.coeff(m).logmag);
        assert!((x - y).abs() < 1e-12 * x.abs().max(1.0), "m={m}");
    }
}

#[test]
fn mixed_sign_solution_uses_angular_samples() {
    // cos z has mixed-sign coefficients and M(r) = cosh r, attained at θ = π/2
    let s = taylor_solve(&CoeffSpec::dense_f64(&[1.0]), 2, &[1.0, 0.0], 60).unwrap();
    let g = LogGap::from_r(0.8).unwrap();
    let lm = s.log_max_modulus(g, 256).unwrap();
    assert!((lm - (0.8f64).cosh().ln()).abs() < 1e-12);
    assert!(matches!(s.log_max_modulus(g, 0), Err(OdeError::Invalid(_))));
}

#[test]
fn truncated_series_is_refused() {
    let s = taylor_solve(&pole_dense(20), 1, &[1.0], 20).unwrap();
    let g = LogGap::from_r(0.99).unwrap();
    assert!(matches!(s.log_max_modulus(g, 0), Err(OdeError::Truncated { .. })));
}

#[test]
fn refusals() {
    assert!(taylor_solve(&pole_dense(3), 2, &[1.0], 5).is_err());
    assert!(taylor_solve(&pole_dense(3), 1, &[1.0], 0).is_err());
    let maj = CoeffSpec::Majorant {
        model: MajorantModel::exp_pole(1),
        p1: 2.0,
        p2: 2.0,
    };
    assert!(taylor_solve(&maj, 1, &[1.0], 5).is_err());
    let bad = CoeffSpec::Rational {
        num: vec![1.0],
        den: vec![0.0, 1.0],
    };
    assert!(taylor_solve(&bad, 1, &[1.0], 5).is_err());
    let opts = SolveOptions {
        max_degree: 100,
        ..Default::default()
    };
    let r = solve_for_radius(&CoeffSpec::exp_pole(1), 1, &[1.0], LogGap::new(5.0).unwrap(), &opts);
    assert!(matches!(r, Err(OdeError::DegreeCap { cap: 100 })));
}

#[test]
fn majorant_antiderivative() {
    let spec = CoeffSpec::Majorant {
        model: MajorantModel::Power { log_c: 0.0, s: 2.0 },
        p1: 2.0,
        p2: 2.0,
    };
    for g in [0.1, 1.0, 5.0, 40.0, 800.0] {
        let r = LogGap::new(g).unwrap();
        let v = growth_majorant(&spec, 1, r).unwrap();
        // r/(1-r) = e^g - 1
        let want = g + (-(-g).exp()).ln_1p();
        assert!((v.logmag - want).abs() < 1e-12 * want.abs().max(1.0), "g={g}");
    }
    // bounded M = B: k B^{1/k} r
    let b = CoeffSpec::Majorant {
        model: MajorantModel::Power { log_c: (9.0f64).ln(), s: 0.0 },
        p1: 0.0,
        p2: 0.0,
    };
    for g in [0.5, 3.0, 30.0] {
        let r = LogGap::new(g).unwrap();
        let v = growth_majorant(&b, 2, r).unwrap().to_f64();
        assert!((v - 2.0 * 3.0 * r.r()).abs() < 1e-12);
    }
    // s = k: logarithmic
    let v = growth_majorant(
        &CoeffSpec::Majorant {
            model: MajorantModel::Power { log_c: 0.0, s: 2.0 },
            p1: 2.0,
            p2: 2.0,
        },
        2,
        LogGap::new(3.0).unwrap(),
    )
    .unwrap();
    assert!((v.to_f64() - 6.0).abs() < 1e-12);
    assert!(growth_majorant(&pole_dense(3), 1, LogGap::new(1.0).unwrap()).is_err());
}

#[test]
fn profile_majorant_matches_power_below_first_generation() {
    let sp = ScaffoldParams::with_defaults(1, 2.0, 3.0, 3.0);
    let sc = build_scaffold(&sp, 2).unwrap();
    let pe = 3.0 + sc.generations[0].eps_n;
    let model = MajorantModel::Profile {
        profile: PiecewiseProfile::new(sc),
    };
    let power = MajorantModel::Power { log_c: 0.0, s: pe };
    let gs = g_grid(0.0, sp.log_c + 0.9 * sp.g1, 50);
    let a = majorant_curve(&model, 1, &gs).unwrap();
    let b = majorant_curve(&power, 1, &gs).unwrap();
    for (x, y) in a.iter().zip(&b).skip(1) {
        assert!((x.logmag - y.logmag).abs() < 1e-10 * y.logmag.abs().max(1.0));
    }
    assert!(majorant_curve(&model, 1, &[model.u_max() + 1.0]).is_err());
}

#[test]
fn solution_stays_below_hkr_majorant() {
    let g_top = LogGap::new(6.0).unwrap();
    let s = solve_for_radius(&CoeffSpec::exp_pole(1), 1, &[1.0], g_top, &SolveOptions::default())
        .unwrap();
    let model = MajorantModel::Power { log_c: 0.0, s: 2.0 };
    let gs = g_grid(0.05, 6.0, 120);
    let maj = majorant_curve(&model, 1, &gs).unwrap();
    for (&g, m) in gs.iter().zip(&maj) {
        let lm = s.log_max_modulus(LogGap::new(g).unwrap(), 0).unwrap();
        // log M(r,f) = r/(1-r) exactly here; the short recursion cancels
        // terms of size m·c_m, so rounding grows with the degree
        let exact = g.exp() - 1.0;
        assert!((lm - exact).abs() < 1e-8 * exact, "g={g}: {lm} vs {exact}");
        assert!(lm <= m.to_f64() * (1.0 + 1e-8), "g={g}");
    }
}

#[test]
fn sigma_recovered_from_taylor_solutions() {
    for (p, g_top) in [(2u32, 4.25), (3, 3.5)] {
        let s = solve_for_radius(
            &CoeffSpec::exp_pole(p),
            1,
            &[1.0],
            LogGap::new(g_top).unwrap(),
            &SolveOptions::default(),
        )
        .unwrap();
        let gs = g_grid(0.5, g_top, 48);
        let rows = solution_samples(&s, &gs, 0).unwrap();
        for r in &rows[8..] {
            let exact = ((p as f64 * r.g).exp() - 1.0).ln();
            assert!((r.log_log_m - exact).abs() < 1e-4, "p={p} g={}", r.g);
        }
        let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.g, r.log_log_m)).collect();
        let opts = EstimateOptions {
            min_range: 2.5,
            ..Default::default()
        };
        let ind = estimate_orders(&pairs, None, &opts).unwrap();
        let pf = p as f64;
        assert!((ind.sigma_hat - pf).abs() < 0.05 * pf, "p={p}: {ind:?}");
        assert!((ind.lambda_hat - pf).abs() < 0.05 * pf, "p={p}: {ind:?}");
        // A = -p(1-z)^{-(p+1)} has degree p1 = p2 = p+1
        let audit = audit_inequalities(pf + 1.0, pf + 1.0, 1, &ind, &AuditOptions::default());
        assert!(audit.thm13a.pass && audit.thm13a.margin >= 0.0, "{audit:?}");
        assert!(audit.cor14.unwrap().pass);
    }
}

#[test]
fn predict_orders_examples() {
    let p = predict_orders(2.0, 4.0, 1, 4.0).unwrap();
    assert_eq!((p.sigma_f, p.alpha, p.lambda_f), (3.0, 0.5, 1.5));
    let p = predict_orders(3.0, 5.0, 2, 5.0).unwrap();
    assert!((p.alpha - 0.6).abs() < 1e-15);
    assert!((p.lambda_f - (1.5 - 0.6)).abs() < 1e-15);
    let p = predict_orders(5.0, 5.0, 2, 5.0).unwrap();
    assert!((p.lambda_f - p.sigma_f).abs() < 1e-15);
    assert_eq!(p.sigma_f, 1.5);
    let p = predict_orders(2.0, 4.0, 1, 8.0).unwrap();
    assert_eq!((p.sigma_f, p.alpha_raw, p.alpha, p.lambda_f), (3.0, 1.25, 1.0, 1.0));
    assert!(predict_orders(2.0, 2.0, 1, 3.0).is_err());
    assert!(predict_orders(3.0, 2.5, 1, 4.0).is_err());
    assert!(predict_orders(2.0, 4.0, 1, 3.0).is_err());
}

#[test]
fn xi_beta_examples() {
    for p in [2.5, 4.0, 7.3] {
        let x = xi_beta(1, p, p, 0.0).unwrap();
        assert_eq!(x.xi, p);
    }
    let x = xi_beta(2, 5.0, 6.0, 0.0).unwrap();
    assert!((x.xi - (2.0 + 84f64.sqrt()) / 2.0).abs() < 1e-14);
    assert!((x.xi - 5.58258).abs() < 1e-5);
    assert!(x.root_residual < 1e-12);
    assert!(xi_beta(2, 5.0, 6.0, xi_eps_bound(2, 5.0, 6.0)).is_err());
    assert!(xi_beta(1, 3.0, 3.0, 0.1).is_err());
    assert!(xi_beta(2, 3.0, 4.0, 0.0).is_err());
}

#[test]
fn beq_identity_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for _ in 0..100 {
        let k: u32 = rng.gen_range(1..=4);
        let p2 = 2.0 * k as f64 + rng.gen_range(0.01..6.0);
        let p1 = rng.gen_range(k as f64..p2);
        let eps = rng.gen_range(0.0..1.0) * xi_eps_bound(k, p1, p2);
        let x = xi_beta(k, p1, p2, eps).unwrap();
        assert!(x.identity_residual <= 1e-12, "{k} {p1} {p2} {eps}: {x:?}");
        assert!(p1 < x.xi && x.xi < p2);
    }
}

#[test]
fn h_alpha_examples() {
    assert_eq!(h_alpha_orders(2.0, 0.2, 0.5).unwrap(), (1.8, 1.5));
    assert_eq!(h_alpha_orders(0.1, 0.2, 0.5).unwrap(), (0.0, 0.0));
    let (s, l) = h_alpha_orders(0.8, 0.2, 0.5).unwrap();
    assert!((s - 0.6).abs() < 1e-15);
    assert!((l - 0.24 / 0.7).abs() < 1e-15);
    assert!(h_alpha_orders(1.0, 0.2, 0.5).is_err());
    assert!(h_alpha_orders(0.5, 0.6, 0.5).is_err());
}

#[test]
fn pmppvk_examples() {
    let pts = pmppvk_check(1.0, 2.0, &[(100f64).ln()]).unwrap();
    // log(ρ/r)/(1-r) = (log1p(-1e-4) - log1p(-1e-2))/1e-2
    let want = (((-1e-4f64).ln_1p() - (-1e-2f64).ln_1p()) / 1e-2).exp();
    assert!((pts[0].value - want).abs() < 1e-13);
    assert!((pts[0].value - 2.70481).abs() < 1e-5);
    assert!((pts[0].deviation - 0.0135).abs() < 1e-3);
    let grid = g_grid(2.0, 12.0, 41);
    let pts = pmppvk_check(1.0, 2.0, &grid).unwrap();
    for w in pts.windows(2) {
        assert!(w[1].deviation < w[0].deviation);
    }
    assert!(pts.last().unwrap().deviation < 1e-3);
    assert!(pmppvk_check(1.0, 1.0, &grid).is_err());
    assert!(pmppvk_check(5.0, 2.0, &[0.1]).is_err());
}

#[test]
fn estimate_orders_synthetic() {
    let gs = g_grid(1.0, 20.0, 400);
    let exact: Vec<(f64, f64)> = gs.iter().map(|&g| (g, 2.0 * g)).collect();
    let ind = estimate_orders(&exact, None, &EstimateOptions::default()).unwrap();
    assert!((ind.sigma_hat - 2.0).abs() < 0.02 && (ind.lambda_hat - 2.0).abs() < 0.02);
    assert!((ind.sigma_secant.unwrap() - 2.0).abs() < 1e-9);
    // exponent 1 on [2^{2j}, 2^{2j+1}), 2 on [2^{2j+1}, 2^{2j+2})
    let gs = g_grid(1.0, 64.0, 2000);
    let osc: Vec<(f64, f64)> = gs
        .iter()
        .map(|&g| {
            let e = if (g.log2().floor() as i64) % 2 == 0 { 1.0 } else { 2.0 };
            (g, e * g)
        })
        .collect();
    let opts = EstimateOptions {
        tail: 0.75,
        ..Default::default()
    };
    let ind = estimate_orders(&osc, None, &opts).unwrap();
    assert!((ind.sigma_hat - 2.0).abs() < 0.1 && (ind.lambda_hat - 1.0).abs() < 0.1, "{ind:?}");
    // refusals
    assert!(estimate_orders(&exact[..20], None, &EstimateOptions::default()).is_err());
    let narrow: Vec<(f64, f64)> = g_grid(1.0, 4.0, 64).iter().map(|&g| (g, g)).collect();
    assert!(estimate_orders(&narrow, None, &EstimateOptions::default()).is_err());
}

#[test]
fn prop43b_k_samples_give_lambda_star() {
    let (s, p) = build_prop43b(1.0, 2.0, None, 14).unwrap();
    let ties = s.tie_g.clone().unwrap();
    let gs = g_grid(ties[4].g(), ties[14].g(), 400);
    let at = |g: f64| LogGap::new(g).unwrap();
    let ks: Vec<(f64, f64)> = gs.iter().map(|&g| (g, k_indicator(&s, at(g)).logmag)).collect();
    let mu: Vec<(f64, f64)> = gs.iter().map(|&g| (g, log_max_term(&s, at(g)).logmag)).collect();
    let ind = estimate_orders(&mu, Some(&ks), &EstimateOptions::default()).unwrap();
    let want = p.lambda + p.lambda / p.sigma;
    let got = ind.lambda_star.unwrap();
    assert!((got - want).abs() < 0.1, "{got} vs {want}");
    assert!((ind.lambda_hat - p.lambda).abs() < 0.1, "{ind:?}");
    assert!((ind.sigma_hat - p.sigma).abs() < 0.1, "{ind:?}");
}

#[test]
fn profile_instances_pass_the_audit() {
    for (p1, p2) in [(3.5, 4.0), (3.0, 4.0), (2.0, 3.0)] {
        let sp = ScaffoldParams::with_defaults(1, p1, p2, p2);
        let model = MajorantModel::Profile {
            profile: PiecewiseProfile::new(build_scaffold(&sp, 4).unwrap()),
        };
        let gs = g_grid(1.0, model.u_max(), 1500);
        let params = InstanceParams {
            k: 1,
            p1,
            p2,
            p: Some(p2),
        };
        let (rep, rows) =
            majorant_instance(&model, params, &gs, &Default::default(), &Default::default())
                .unwrap();
        assert_eq!(rows.len(), gs.len());
        assert!((rep.sigma_hat - (p2 - 1.0)).abs() < 0.1, "{rep:?}");
        assert!(rep.inequalities.thm13a.pass && rep.inequalities.thm13a.margin >= 0.0);
        let cor = rep.inequalities.cor14.unwrap();
        assert!(cor.pass, "{rep:?}");
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"thm13a\""));
    }
}

#[test]
fn tmon_trivial_cases() {
    let konst = FSpec::ExpPoly { coeffs: vec![c(0.7)] };
    let rep = tmon_check(&konst, 2, 0, 0.0, 0.5, 1.0).unwrap();
    assert_eq!(rep.lhs, 0.0);
    assert!((rep.characteristic - 0.7).abs() < 1e-12);
    let ez = FSpec::ExpPoly {
        coeffs: vec![c(0.0), c(1.0)],
    };
    let rep = tmon_check(&ez, 1, 0, 0.5, 1.5, 2.0).unwrap();
    assert!((rep.lhs - PI * (1.5f64.powi(2) - 0.25)).abs() < 1e-9);
    // T(2, e^z) = (1/2π)∫ max(2cos θ, 0) dθ = 2/π
    assert!((rep.characteristic - 2.0 / PI).abs() < 1e-9);
    assert!(tmon_check(&ez, 1, 1, 0.0, 0.5, 1.0).is_err());
    assert!(tmon_check(&ez, 1, 0, 0.5, 0.5, 1.0).is_err());
}

#[test]
fn tmon_ratio_bounded_for_exp_pole() {
    let f = FSpec::ExpPower { p: 1.0 };
    let big_r = 0.999;
    for r in [0.5, 0.9, 0.99, 0.995, 0.998] {
        let rep = tmon_check(&f, 1, 0, 0.0, r, big_r).unwrap();
        // |f'/f| = |1-z|^{-2}; the circle mean of that is 1/(1-ρ²)
        let want = -PI * (1.0 - r * r).ln();
        assert!((rep.lhs - want).abs() < 1e-6 * want, "r={r}");
        // log|f| = Re 1/(1-z) > 0 with mean 1
        assert!((rep.characteristic - 1.0).abs() < 1e-8);
        assert!(rep.ratio > 0.0 && rep.ratio < 1.0, "r={r}: {rep:?}");
    }
}

#[test]
fn expoly_log_abs_and_ratios() {
    let f = FSpec::ExpPoly {
        coeffs: vec![c(0.5), c(0.0), c(2.0)],
    };
    let z = Complex64::new(0.3, -0.4);
    let h = c(0.5) + c(2.0) * z * z;
    assert!((f.log_abs(z) - h.re).abs() < 1e-14);
    let d = f.derivative_ratios(z, 2);
    let h1 = c(4.0) * z;
    assert!((d[1] - h1).norm() < 1e-14);
    assert!((d[2] - (h1 * h1 + c(4.0))).norm() < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn xi_in_open_interval(k in 1u32..5, a in 0.01f64..5.0, b in 0.0f64..1.0, t in 0.0f64..0.999) {
        let p2 = 2.0 * k as f64 + a;
        let p1 = k as f64 + b * (p2 - k as f64);
        prop_assume!(p1 < p2);
        let eps = t * xi_eps_bound(k, p1, p2);
        let x = xi_beta(k, p1, p2, eps).unwrap();
        prop_assert!(p1 < x.xi && x.xi < p2);
        prop_assert!(x.identity_residual <= 1e-12);
        prop_assert!(x.beta > 0.0);
    }

    #[test]
    fn majorant_monotone_in_g(s in 0.0f64..6.0, log_c in -3.0f64..3.0, k in 1usize..4) {
        let model = MajorantModel::Power { log_c, s };
        let gs = g_grid(0.01, 30.0, 60);
        let v = majorant_curve(&model, k, &gs).unwrap();
        for w in v.windows(2) {
            prop_assert!(w[1].cmp_value(&w[0]).is_ge());
        }
        prop_assert!(v.iter().all(|x| x.is_positive() && x.logmag.is_finite()));
    }
}
