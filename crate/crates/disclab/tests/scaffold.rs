use disclab::numerics::LogGap;
use disclab::scaffold::{build_scaffold, derive_intermediates, ScaffoldParams};

fn reference(n: usize) -> disclab::scaffold::IrregularScaffold {
    build_scaffold(&ScaffoldParams::reference(), n).unwrap()
}

/// Independent root: scan 10^6 grid points in `s`, then bisect the
/// sign-changing cell to machine precision.
fn grid_scan_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const N: usize = 1_000_000;
    let h = (hi - lo) / N as f64;
    let mut prev = f(lo);
    for i in 1..=N {
        let x = lo + i as f64 * h;
        let v = f(x);
        if prev > 0.0 && v <= 0.0 {
            let (mut a, mut b) = (x - h, x);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if f(m) > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            return 0.5 * (a + b);
        }
        prev = v;
    }
    panic!("no sign change on grid");
}

#[test]
fn generation1_root_matches_grid_scan() {
    let p = ScaffoldParams::reference();
    let s = reference(1);
    let gen = &s.generations[0];
    let st = gen.closure_state(&s.params);
    let gh = gen.g_hat.g();
    let (sa, sb) = st.bracket(p.a, p.b);
    let f = |x: f64| {
        let (l, r) = st.residuals(gh + x);
        l - r
    };
    let oracle = gh + grid_scan_root(f, sa, sb);
    assert!(
        (oracle - gen.g_dprime.g()).abs() <= 1e-10 * oracle,
        "oracle {oracle} vs {}",
        gen.g_dprime.g()
    );
    assert!((oracle - gen.g_dprime.g()).abs() <= 1e-12 * oracle.max(1.0) * 10.0);
}

#[test]
fn seed_only() {
    let s = reference(1);
    assert_eq!(s.g_dprime0, LogGap::ZERO);
    assert_eq!(s.eps1, 0.0);
    assert_eq!(s.generations.len(), 1);
    assert_eq!(s.generations[0].eps_n, 0.0);
}

#[test]
fn reference_invariants() {
    let s = reference(5);
    assert_eq!(s.retries, 0);
    let p = &s.params;
    let half = (p.p2 - p.p1) / 2.0;
    let mut prev = 0.0;
    for gen in &s.generations {
        assert!(gen.eps_n.abs() < half && gen.eps_next.abs() < half);
        assert!(gen.diagnostics.closure_residual <= 1e-9);
        let gs = [
            prev,
            gen.g_n.g(),
            gen.g_prime.g(),
            gen.g_hat.g(),
            gen.g_star.g(),
            gen.g_dprime.g(),
        ];
        assert!(gs[0] < gs[1] && gs[1] < gs[2] && gs[2] <= gs[3] && gs[3] < gs[4] && gs[4] < gs[5]);
        // doubly exponential thinning: g_{n+1} > g' ≥ ((p2+ε)/p1) g_n - const
        assert!(gs[2] >= (p.p2 + gen.eps_n) / p.p1 * gen.g_n.g() - p.log_c);
        prev = gen.g_dprime.g();
    }
    assert!(s.g_next.g() > prev);
    // p = p2: r̂ = r'
    assert!(s.generations.iter().all(|g| g.g_hat == g.g_prime));
}

#[test]
fn eps_decays_and_ratio_settles() {
    let s = reference(5);
    let e = |n: usize| s.generations[n - 1].eps_n;
    assert!(e(4).abs() < e(2).abs());
    let r4 = s.generations[3].diagnostics.ratio_log;
    assert!((0.8..=1.25).contains(&r4), "ratio {r4}");
}

#[test]
fn bracket_signs_and_monotone_gr() {
    let s = reference(3);
    let p = &s.params;
    for gen in &s.generations {
        let st = gen.closure_state(p);
        let gh = gen.g_hat.g();
        let (sa, sb) = st.bracket(p.a, p.b);
        let (la, ra) = st.residuals(gh + sa);
        let (lb, rb) = st.residuals(gh + sb);
        assert!(la > ra);
        assert!(lb < rb);
        let mut last = f64::NEG_INFINITY;
        for i in 0..=400 {
            let x = sa + (sb - sa) * i as f64 / 400.0;
            let (_, r) = st.residuals(gh + x);
            assert!(r > last);
            last = r;
        }
    }
}

#[test]
fn p_above_p2_has_distinct_hat() {
    let p = ScaffoldParams::with_defaults(1, 2.0, 3.0, 3.5);
    let m = derive_intermediates(LogGap::new(p.g1).unwrap(), 0.0, &p).unwrap();
    assert!((m.g_hat.g() - 3.5 / 3.0 * m.g_prime.g()).abs() < 1e-12);
    let s = build_scaffold(&p, 3).unwrap();
    for gen in &s.generations {
        assert!(gen.diagnostics.closure_residual <= 1e-9);
        assert!(gen.g_prime < gen.g_hat);
    }
}

#[test]
fn serializes_to_json() {
    let s = reference(2);
    let txt = serde_json::to_string(&s).unwrap();
    let back: disclab::scaffold::IrregularScaffold = serde_json::from_str(&txt).unwrap();
    assert_eq!(back.generations.len(), 2);
}
