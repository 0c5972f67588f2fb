use std::cmp::Ordering;

use disclab::numerics::{LogGap, LogValue};
use disclab::wiman::{
    build_flm1, build_prop43, build_prop43b, central_index, convex_indicators, default_delta,
    k_indicator, log_max_term, log_mu_samples, strelitz_check, twostars_residual, ConvexSamples,
    ExtCount, GrowthSeries, Prop43Variant, Prop43a, SparseSeries, SparseTerm, WimanError,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gap(g: f64) -> LogGap {
    LogGap::new(g).unwrap()
}

fn random_flm1(rng: &mut ChaCha8Rng, len: usize) -> SparseSeries {
    let mut n = vec![ExtCount::exact(rng.gen_range(0..3))];
    let mut c = Vec::new();
    let mut g = rng.gen_range(0.05..1.0);
    for _ in 1..len {
        let last = n.last().unwrap().as_exact().unwrap();
        n.push(ExtCount::exact(last + rng.gen_range(1..60)));
        c.push(gap(g));
        g += rng.gen_range(0.01..0.6);
    }
    build_flm1(&n, &c, rng.gen_range(-2.0..2.0)).unwrap()
}

#[test]
fn flm1_single_factor_and_constant_ratio() {
    let c = gap(0.7);
    let s = build_flm1(&[ExtCount::exact(2), ExtCount::exact(7)], &[c], 0.3).unwrap();
    let want = 0.3 + (2.0 - 7.0) * c.log_r();
    assert!((s.terms[1].log_a.to_f64() - want).abs() < 1e-14);
}

#[test]
fn prop43a_coefficients_match_direct_product() {
    let a = Prop43a::new(1.0).unwrap();
    let s = a.to_sparse(5);
    // a_{k+1} = prod_{j<=k} 1/c_j with c_j = 1 - (1/(j+2))^{1/2}
    let mut prod = 1.0;
    for k in 0..5 {
        let cj = 1.0 - (1.0 / (k as f64 + 2.0)).sqrt();
        prod /= cj;
        let got = s.terms[k + 1].log_a.to_f64().exp();
        assert!((got - prod).abs() / prod < 1e-12, "k={k}: {got} vs {prod}");
    }
}

#[test]
fn central_index_examples() {
    let a = Prop43a::new(1.0).unwrap();
    assert!((a.tie(1).r() - 0.42265).abs() < 1e-5);
    assert!((a.tie(2).r() - 0.5).abs() < 1e-15);
    let g = LogGap::from_r(0.45).unwrap();
    assert_eq!(a.central_index(g), ExtCount::exact(2));
    let s = a.to_sparse(10);
    assert_eq!(central_index(&s, g), ExtCount::exact(2));
    // below c_0 and exactly at a tie
    assert_eq!(central_index(&s, gap(0.01)), ExtCount::exact(0));
    assert_eq!(central_index(&s, a.tie(3)), ExtCount::exact(4));
}

#[test]
fn central_index_matches_closed_form_and_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let s = random_flm1(&mut rng, 40);
        let top = s.tie_g.as_ref().unwrap().last().unwrap().g() + 1.0;
        for _ in 0..1000 {
            let g = gap(rng.gen_range(0.0..top));
            let nu = central_index(&s, g);
            assert_eq!(Some(nu), s.flm1_closed_form(g));
            // independent: direct argmax of log a + n log r
            let vals: Vec<f64> = s
                .terms
                .iter()
                .map(|t| t.log_a.to_f64() + t.n.as_exact().unwrap() as f64 * g.log_r())
                .collect();
            let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let winners: Vec<usize> = (0..vals.len())
                .filter(|&i| vals[i] > best - 1e-9 * best.abs().max(1.0))
                .collect();
            if winners.len() == 1 {
                assert_eq!(nu, s.terms[winners[0]].n);
            }
        }
    }
}

#[test]
fn k_indicator_closed_forms() {
    let one = |n: u64| SparseTerm {
        n: ExtCount::exact(n),
        log_a: LogValue::ZERO,
    };
    let s = SparseSeries::new(vec![one(0), one(2)]).unwrap();
    let k = k_indicator(&s, LogGap::from_r(0.5).unwrap()).to_f64();
    assert!((k - 0.4).abs() < 1e-14);
    let single = SparseSeries::new(vec![one(9)]).unwrap();
    for g in [0.1, 1.0, 5.0] {
        assert!((k_indicator(&single, gap(g)).to_f64() - 9.0).abs() < 1e-13);
    }
}

#[test]
fn twostars_and_onestar() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let s = random_flm1(&mut rng, 30);
        let top = s.tie_g.as_ref().unwrap().last().unwrap().g() + 1.0;
        for _ in 0..50 {
            let a = rng.gen_range(0.001..top);
            let b = rng.gen_range(0.001..top);
            if a == b {
                continue;
            }
            let (g0, g1) = (gap(a.min(b)), gap(a.max(b)));
            let res = twostars_residual(&s, g0, g1).unwrap();
            assert!(res <= 1e-10, "residual {res}");
            let l0 = log_max_term(&s, g0);
            let l1 = log_max_term(&s, g1);
            assert_ne!(l1.cmp_value(&l0), Ordering::Less);
        }
        // finite-difference slope in log r equals ν inside a branch
        let ties = s.tie_g.clone().unwrap();
        for w in ties.windows(2) {
            let (lo, hi) = (w[0].g(), w[1].g());
            let g0 = gap(lo + 0.3 * (hi - lo));
            let g1 = gap(lo + 0.6 * (hi - lo));
            let slope = (log_max_term(&s, g1) - log_max_term(&s, g0)).to_f64()
                / (g1.log_r() - g0.log_r());
            let nu = central_index(&s, g0).as_exact().unwrap() as f64;
            assert!((slope - nu).abs() <= 1e-7 * nu.max(1.0), "{slope} vs {nu}");
        }
    }
}

#[test]
fn prop43a_central_index_asymptotic() {
    let a = Prop43a::new(1.5).unwrap();
    for g in [2.0, 4.0, 6.0, 8.0] {
        let g = gap(g);
        let nu = a.central_index(g).as_exact().unwrap();
        assert_eq!(nu, a.nu_closed_form(g));
    }
    let g = gap(8.0);
    let nu = a.central_index(g).as_exact().unwrap() as f64;
    let ratio = nu * (-(2.5) * 8.0f64).exp() / 1.5;
    assert!((0.95..=1.05).contains(&ratio), "ratio {ratio}");
}

#[test]
fn prop43a_strelitz_at_g8() {
    let a = Prop43a::new(1.5).unwrap();
    let g = gap(8.0);
    assert_eq!(strelitz_check(&a, 0, g), 1.0);
    let r1 = strelitz_check(&a, 1, g);
    assert!((0.9..=1.1).contains(&r1), "n=1 ratio {r1}");
    let r2 = strelitz_check(&a, 2, g);
    assert!((r2 - 1.0).abs() < 1e-2, "n=2 ratio {r2}");
    // K tracks ν closely at this depth
    let k = a.k_indicator(g).to_f64();
    let nu = a.central_index(g).as_exact().unwrap() as f64;
    assert!((k - nu).abs() / nu < 1e-2);
}

#[test]
fn strelitz_single_term_oracle() {
    let s = SparseSeries::new(vec![SparseTerm {
        n: ExtCount::exact(50),
        log_a: LogValue::from_log(1.3),
    }])
    .unwrap();
    for n in 0..5u32 {
        // n! binom(50, n) / 50^n = 50·49···(50-n+1) / 50^n
        let want: f64 = (0..n).map(|i| (50 - i) as f64 / 50.0).product();
        let got = strelitz_check(&s, n, gap(2.0));
        assert!((got - want).abs() < 1e-13, "n={n}: {got} vs {want}");
    }
}

#[test]
fn prop43b_default_delta_and_feq5() {
    let d = default_delta(1.0, 2.0).unwrap();
    // 0.9 · min(golden^{-1/3}, e^{-1})
    assert!((d - 0.9 * (-1.0f64).exp()).abs() < 1e-12);
    let (s, p) = build_prop43b(1.0, 2.0, None, 14).unwrap();
    assert!((p.delta - 0.3311).abs() < 1e-4);
    let ties = s.tie_g.as_ref().unwrap();
    for w in ties.windows(2) {
        let lhs = (p.lambda + p.q) * w[1].g();
        let rhs = (p.sigma + 1.0) * w[0].g();
        assert!((lhs - rhs).abs() <= 1e-14 * rhs);
    }
    // n_1 = floor(delta^{-3}) + 1
    assert_eq!(s.terms[1].n, ExtCount::exact((p.delta.powi(-3)).floor() as u64 + 1));
}

#[test]
fn prop43b_refuses_bad_delta() {
    assert!(matches!(
        build_prop43b(1.0, 2.0, Some(0.9), 5),
        Err(WimanError::Feq4 { .. })
    ));
    assert!(matches!(
        build_prop43b(1.0, 2.0, Some(0.5), 5),
        Err(WimanError::DeltaSmall { .. })
    ));
    assert!(matches!(
        build_prop43b(2.0, 1.0, None, 5),
        Err(WimanError::Invalid(_))
    ));
}

#[test]
fn prop43b_k_at_shifted_radii() {
    let (s, _) = build_prop43b(1.0, 2.0, None, 14).unwrap();
    let ties = s.tie_g.clone().unwrap();
    for k in 1..=14 {
        // r_k = 2c_k - 1, so 1 - r_k = 2(1 - c_k)
        let g = gap(ties[k].g() - std::f64::consts::LN_2);
        let n_k = s.terms[k].n;
        if k >= 5 {
            let excess = s.k_minus(g, n_k);
            assert_eq!(excess.cmp_value(&LogValue::ONE), Ordering::Less, "k={k}");
        }
        if k >= 8 {
            let ratio = k_indicator(&s, g).logmag / g.g();
            assert!((1.35..=1.65).contains(&ratio), "k={k}: {ratio}");
        }
    }
}

#[test]
fn prop43b_twostars_at_depth() {
    let (s, _) = build_prop43b(1.0, 2.0, None, 14).unwrap();
    let ties = s.tie_g.clone().unwrap();
    for k in [3usize, 8, 13] {
        let g0 = gap(ties[k - 1].g() * 0.9);
        let g1 = gap(ties[k].g() * 1.1);
        assert!(twostars_residual(&s, g0, g1).unwrap() <= 1e-10);
    }
}

#[test]
fn convex_power_law() {
    // h(x) = |x|^{-2} with |x| = -log r
    let gs: Vec<f64> = (0..400).map(|i| 5.0 + 0.25 * i as f64).collect();
    let h = gs
        .iter()
        .map(|&g| LogValue::from_log(-2.0 * gap(g).log_neg_log_r()))
        .collect();
    let ind = convex_indicators(&ConvexSamples { g: gs, h, dh: None }, 0.25).unwrap();
    assert!((ind.alpha - 2.0).abs() < 1e-9 && (ind.beta - 2.0).abs() < 1e-9);
    assert!((ind.alpha_prime - 3.0).abs() < 0.05, "{}", ind.alpha_prime);
    assert!((ind.beta_prime - 3.0).abs() < 0.05, "{}", ind.beta_prime);
}

#[test]
fn convex_rejects_bad_samples() {
    let gs: Vec<f64> = (0..40).map(|i| 1.0 + 0.5 * i as f64).collect();
    // concave in x: h = |x|^{1/2}
    let h = gs
        .iter()
        .map(|&g| LogValue::from_log(0.5 * gap(g).log_neg_log_r()))
        .collect();
    assert!(convex_indicators(&ConvexSamples { g: gs.clone(), h, dh: None }, 1.0).is_err());
    let few = ConvexSamples {
        g: gs[..10].to_vec(),
        h: vec![LogValue::ONE; 10],
        dh: None,
    };
    assert!(matches!(convex_indicators(&few, 1.0), Err(WimanError::Invalid(_))));
}

#[test]
fn prop43b_convex_indicators() {
    let (s, _) = build_prop43b(1.0, 2.0, None, 15).unwrap();
    let ties = s.tie_g.clone().unwrap();
    let (lo, hi) = (ties[8].g(), ties[14].g());
    let n = 2400;
    let gs: Vec<f64> = (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    let samples = log_mu_samples(&s, &gs).unwrap();
    let ind = convex_indicators(&samples, 1.0).unwrap();
    assert!((ind.beta_prime - ind.beta - 1.0).abs() < 0.05, "{ind:?}");
    assert!((ind.alpha_prime - 1.5).abs() < 0.1, "{ind:?}");
}

#[test]
fn build_prop43_variants() {
    let a = build_prop43(Prop43Variant::A, 0.0, 1.0, None, 4).unwrap();
    assert_eq!(a.terms.len(), 6);
    let b = build_prop43(Prop43Variant::B, 1.0, 2.0, None, 40).unwrap();
    assert_eq!(b.terms.len(), 42);
    assert!(!b.terms[41].n.is_exact());
    let json = serde_json::to_string(&b).unwrap();
    let back: SparseSeries = serde_json::from_str(&json).unwrap();
    assert_eq!(back.terms.len(), 42);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn k_monotone_and_near_nu(seed in 0u64..1_000_000, frac in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_flm1(&mut rng, 12);
        let ties = s.tie_g.clone().unwrap();
        let mut prev = LogValue::ZERO;
        for i in 0..200 {
            let g = gap(0.01 + i as f64 * 0.05);
            let k = k_indicator(&s, g);
            prop_assert!(k.logmag >= prev.logmag - 1e-12);
            prev = k;
        }
        let _ = ties;
        // band |K - ν| ≤ ν inside branches of the (a) construction
        let a = Prop43a::new(0.5 + (seed % 1000) as f64 / 400.0).unwrap();
        let sp = a.to_sparse(300);
        for k in 20..250u64 {
            let (lo, hi) = (a.tie(k).g(), a.tie(k + 1).g());
            let g = gap(lo + frac * (hi - lo));
            let nu = central_index(&sp, g).as_exact().unwrap() as f64;
            let kv = k_indicator(&sp, g).to_f64();
            prop_assert!((kv - nu).abs() <= nu, "k={} K={} nu={}", k, kv, nu);
        }
    }
}
