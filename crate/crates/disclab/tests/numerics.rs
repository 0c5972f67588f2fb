use disclab::numerics::{integrate, lse_sum, LogGap, LogValue, Singularity};
use disclab::find_root;
use proptest::prelude::*;

#[test]
fn lse_examples() {
    let two = lse_sum(&[LogValue::ONE, LogValue::ONE]).value;
    assert!((two.logmag - 2f64.ln()).abs() < 1e-15);
    let five = lse_sum(&[LogValue::ZERO, LogValue::from_log(5f64.ln())]).value;
    assert!((five.logmag - 5f64.ln()).abs() < 1e-15);
    // direct small-magnitude oracle
    let terms: Vec<_> = [3.0f64, 4.0, 5.0].iter().map(|x| LogValue::from_log(x.ln())).collect();
    let got = lse_sum(&terms).value.logmag;
    assert!((got - 12f64.ln()).abs() / 12f64.ln() < 1e-13);
}

#[test]
fn lse_flags_cancellation() {
    let s = lse_sum(&[LogValue::from_f64(1.0), LogValue::from_f64(-1.0 + 1e-14)]);
    assert!(s.cancelled);
}

#[test]
fn lse_never_materializes_huge_terms() {
    let s = lse_sum(&[LogValue::from_log(1e5), LogValue::from_log(1e5)]).value;
    assert!((s.logmag - (1e5 + 2f64.ln())).abs() < 1e-9);
}

#[test]
fn quadrature_examples() {
    let v = integrate(|t| t, 0.0, 1.0, Singularity::None).unwrap();
    assert!((v - 0.5).abs() < 1e-14);
    // antiderivative oracle: R - (1-R) ln(1/(1-R))
    let r = 0.9;
    let v = integrate(|t| (r - t) / (1.0 - t), 0.0, r, Singularity::None).unwrap();
    let exact = r - (1.0 - r) * (1.0 / (1.0 - r) as f64).ln();
    assert!((v - exact).abs() / exact < 1e-9);
    assert!((exact - 0.669741).abs() < 1e-6);
    let v = integrate(|t| (1.0 - t).powf(-0.5), 0.0, 0.99, Singularity::None).unwrap();
    assert!((v - 1.8).abs() / 1.8 < 1e-9);
}

#[test]
fn quadrature_upper_singularity() {
    // ∫_0^1 (1-t)^{-0.9} dt = 10
    let v = integrate(|t| (1.0 - t).powf(-0.9), 0.0, 1.0, Singularity::Upper).unwrap();
    assert!((v - 10.0).abs() / 10.0 < 1e-9, "{v}");
}

#[test]
fn root_examples() {
    let x = find_root(|x| x * x - 2.0, 1.0, 2.0, 1e-15).unwrap();
    assert!((x - 2f64.sqrt()).abs() < 1e-15);
    let x = find_root(|x| 2.0 * x - 1.0, 0.0, 1.0, 1e-15).unwrap();
    assert!((x - 0.5).abs() < 1e-15);
}

#[test]
fn log_r_large_g() {
    // log r ≈ -e^{-g} for large g
    let g = LogGap::new(40.0).unwrap();
    let d = (-40f64).exp();
    assert!((g.log_r() + d + d * d / 2.0).abs() < 1e-30);
    assert!((g.log_neg_log_r() + 40.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn loggap_roundtrip_from_r(g in 0.0f64..30.0) {
        // r carries 1e-16 absolute precision, so the check runs r -> g -> r
        let r = LogGap::new(g).unwrap().r();
        let back = LogGap::from_r(r).unwrap().r();
        prop_assert!((back - r).abs() <= 1e-14 * r.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn loggap_roundtrip_from_gap(g in 0.0f64..30.0) {
        let d = LogGap::new(g).unwrap().delta();
        let back = LogGap::from_one_minus_r(d).unwrap().g();
        prop_assert!((back - g).abs() <= 1e-14 * g.max(1.0));
    }

    #[test]
    fn lse_permutation_invariant(mut xs in prop::collection::vec(-50.0f64..50.0, 1..40), seed in any::<u64>()) {
        let a: Vec<_> = xs.iter().map(|&l| LogValue::from_log(l)).collect();
        let s1 = lse_sum(&a).value.logmag;
        // deterministic shuffle
        let mut st = seed | 1;
        for i in (1..xs.len()).rev() {
            st ^= st << 13; st ^= st >> 7; st ^= st << 17;
            xs.swap(i, (st % (i as u64 + 1)) as usize);
        }
        let b: Vec<_> = xs.iter().map(|&l| LogValue::from_log(l)).collect();
        let s2 = lse_sum(&b).value.logmag;
        prop_assert!((s1 - s2).abs() <= 1e-13 * s1.abs().max(1.0));
    }

    #[test]
    fn root_inside_bracket_and_stable(c in 0.1f64..0.9, lo_p in -0.01f64..0.01, hi_p in -0.01f64..0.01) {
        let f = |x: f64| x.powi(3) + x - c * (1.0 + c * c);
        let x0 = find_root(f, 0.0, 1.0, 1e-14).unwrap();
        prop_assert!((0.0..=1.0).contains(&x0));
        let x1 = find_root(f, 0.0 + lo_p, 1.0 + hi_p, 1e-14).unwrap();
        prop_assert!((x0 - x1).abs() <= 1e-12);
        prop_assert!((x0 - c).abs() <= 1e-12);
    }
}
