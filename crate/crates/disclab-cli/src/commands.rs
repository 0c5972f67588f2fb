//! Subcommand bodies. Each resolves its parameters, runs the library call
//! and writes JSON lines (plus CSV where asked).

use std::path::Path;

use disclab::logderiv::{
    i_alpha, logderiv_certificate, loworder_windows, upper_density, CertificateOptions, FSpec,
    LogMModel, RadialWindowSet,
};
use disclab::numerics::LogGap;
use disclab::ode::{
    g_grid, h_alpha_orders, majorant_curve, majorant_instance, pmppvk_check, predict_orders,
    solution_samples, solve_for_radius, xi_beta, AuditOptions, CoeffSpec, EstimateOptions,
    InstanceParams, InstanceReport, MajorantModel, RadialSample, SolveOptions,
};
use disclab::profile::PiecewiseProfile;
use disclab::riesz::{
    atomize, cell_quadrature_mass, excluded_arc_measure, fit_c4, partition_region, ArcRow,
    ZeroMode, DEFAULT_CELL_CEILING,
};
use disclab::scaffold::{build_scaffold, EtaRule, IrregularScaffold, ScaffoldParams};
use disclab::wiman::{
    build_prop43, central_index, k_indicator, log_max_term, twostars_residual, GrowthSeries,
    Prop43Variant, SparseSeries,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::args::{
    LogDerivArgs, LogDerivOp, ModelArgs, OdeArgs, OdeOp, ProfileArgs, RieszArgs, ScaffoldArgs,
    SeriesArgs, VariantArg,
};
use crate::emit::{csv_f64, write_csv, Sink};
use crate::error::{validation, CliError};

fn gap(g: f64) -> Result<LogGap, CliError> {
    Ok(LogGap::new(g)?)
}

fn need<T>(v: Option<T>, name: &str) -> Result<T, CliError> {
    v.ok_or_else(|| validation(format!("missing --{name}")))
}

/// Scaffold parameters from the model block; `p` defaults to `p2`.
pub fn scaffold_params(m: &ModelArgs) -> Result<(ScaffoldParams, usize), CliError> {
    let k = m.k.unwrap_or(1);
    let p1 = m.p1.unwrap_or(2.0);
    let p2 = m.p2.unwrap_or(3.0);
    let p = m.p.unwrap_or(p2);
    let mut sp = match m.log_c {
        Some(lc) => ScaffoldParams::from_log_c(k, p1, p2, p, lc),
        None => ScaffoldParams::with_defaults(k, p1, p2, p),
    };
    if let Some(g1) = m.g1 {
        sp.g1 = g1;
    }
    if let Some(eta) = &m.eta {
        if eta.is_empty() {
            return Err(validation("--eta needs at least one value"));
        }
        sp.eta = EtaRule::Table(eta.clone());
    }
    let n = m.generations.unwrap_or(4);
    Ok((sp, n))
}

fn build(m: &ModelArgs) -> Result<IrregularScaffold, CliError> {
    let (sp, n) = scaffold_params(m)?;
    Ok(build_scaffold(&sp, n)?)
}

#[derive(Serialize)]
struct ScaffoldSummary<'a> {
    params: &'a ScaffoldParams,
    generations: usize,
    retries: u32,
    g_next: f64,
    max_abs_eps: f64,
    max_residual: f64,
    ordered: bool,
}

fn ordered(s: &IrregularScaffold) -> bool {
    let mut prev = s.g_dprime0.g();
    for gen in &s.generations {
        let seq = [gen.g_n, gen.g_prime, gen.g_hat, gen.g_star, gen.g_dprime];
        if !(gen.g_n.g() > prev) || seq.windows(2).any(|w| w[1] < w[0]) {
            return false;
        }
        prev = gen.g_dprime.g();
    }
    s.g_next.g() > prev
}

pub fn scaffold(a: &ScaffoldArgs) -> Result<(), CliError> {
    let s = build(&a.model)?;
    let mut out = Sink::open(a.out.as_deref())?;
    for gen in &s.generations {
        out.record("scaffold.generation", gen)?;
    }
    out.record(
        "scaffold.summary",
        &ScaffoldSummary {
            params: &s.params,
            generations: s.generations.len(),
            retries: s.retries,
            g_next: s.g_next.g(),
            max_abs_eps: s.generations.iter().map(|g| g.eps_n.abs()).fold(0.0, f64::max),
            max_residual: s
                .generations
                .iter()
                .map(|g| g.diagnostics.closure_residual.abs())
                .fold(0.0, f64::max),
            ordered: ordered(&s),
        },
    )?;
    out.finish()?;
    if let Some(path) = &a.csv {
        let rows: Vec<Vec<String>> = s
            .generations
            .iter()
            .map(|g| {
                let mut r = vec![g.n.to_string()];
                r.extend(
                    [g.g_n, g.g_prime, g.g_hat, g.g_star, g.g_dprime]
                        .iter()
                        .map(|x| csv_f64(x.g())),
                );
                r.push(csv_f64(g.eps_n));
                r.push(csv_f64(g.diagnostics.closure_residual));
                r
            })
            .collect();
        write_csv(
            path,
            &["n", "g_rn", "g_rprime", "g_rhat", "g_rstar", "g_rdprime", "eps", "residual"],
            &rows,
        )?;
    }
    Ok(())
}

pub fn profile(a: &ProfileArgs) -> Result<(), CliError> {
    let prof = PiecewiseProfile::new(build(&a.model)?);
    let n = a.samples.unwrap_or(200);
    if n < 2 {
        return Err(validation("--samples must be at least 2"));
    }
    let top = prof.g_max().g();
    let mut out = Sink::open(a.out.as_deref())?;
    for g in g_grid(0.5 * prof.scaffold.generations[0].g_n.g(), top * (1.0 - 1e-12), n) {
        let e = prof.eval(gap(g)?)?;
        out.record("profile.sample", &json!({ "g": g, "eval": e }))?;
    }
    let jumps = prof.junction_report();
    let ratios: Vec<_> = prof
        .scaffold
        .generations
        .iter()
        .map(|gen| {
            let r = prof.ratio_profile(&[gen.g_n, gen.g_prime])?;
            Ok(json!({ "n": gen.n, "at_rn": r[0].1, "at_rprime": r[1].1 }))
        })
        .collect::<Result<_, CliError>>()?;
    out.record(
        "profile.junctions",
        &json!({
            "count": jumps.len(),
            "max_phi_jump": jumps.iter().map(|j| j.phi_jump).fold(0.0, f64::max),
            "max_phi_prime_jump": jumps.iter().map(|j| j.phi_prime_jump).fold(0.0, f64::max),
            "p1": prof.scaffold.params.p1,
            "p2": prof.scaffold.params.p2,
            "ratios": ratios,
        }),
    )?;
    out.finish()
}

pub fn riesz(a: &RieszArgs) -> Result<(), CliError> {
    let prof = PiecewiseProfile::new(build(&a.model)?);
    let generation = a.generation.unwrap_or(1);
    let g_max = a.g_max.unwrap_or(12.5);
    let part = partition_region(&prof, generation, gap(g_max)?, DEFAULT_CELL_CEILING)?;
    let mut out = Sink::open(a.out.as_deref())?;
    out.record(
        "riesz.partition",
        &json!({
            "generation": generation,
            "g_max": g_max,
            "rings": part.rings.len(),
            "cells": part.cell_count(),
            "max_aspect": part.max_aspect(),
            "truncated": part.truncated,
        }),
    )?;

    let n_cells = a.cells.unwrap_or(50);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(7));
    let mut rows = Vec::with_capacity(n_cells);
    let mut worst = 0.0f64;
    if !part.rings.is_empty() {
        for _ in 0..n_cells {
            let ring = &part.rings[rng.gen_range(0..part.rings.len())];
            let cell = ring.cell(rng.gen_range(0..ring.cells));
            let quad = cell_quadrature_mass(&prof, &cell)?;
            worst = worst.max((quad - 2.0).abs());
            rows.push(json!({
                "ring": cell.ring,
                "index": cell.index,
                "kind": cell.kind,
                "g_lo": cell.g_lo,
                "g_hi": cell.g_hi,
                "mass": cell.mass,
                "quadrature": quad,
            }));
        }
    }
    out.record(
        "riesz.masses",
        &json!({ "seed": a.seed.unwrap_or(7), "max_abs_error": worst, "cells": rows }),
    )?;

    let mut eps = a.eps.clone().unwrap_or_else(|| vec![0.01, 0.05, 0.1]);
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(validation("--eps needs positive values"));
    }
    eps.sort_by(f64::total_cmp);
    let n_circles = a.circles.unwrap_or(120);
    let cloud = atomize(part.cells(), ZeroMode::Double);
    let hi = part.truncated.map_or(g_max, |t| t.g_reached.g()) - 1.5;
    let circles = g_grid(1.0, hi.max(1.0), n_circles);
    let mut arcs = Vec::new();
    for &e in &eps {
        for &g in &circles {
            arcs.push(ArcRow {
                g,
                eps: e,
                measure: excluded_arc_measure(&cloud, gap(g)?, e),
            });
        }
    }
    let fit_rows: Vec<ArcRow> = arcs.iter().copied().filter(|r| r.eps == eps[0]).collect();
    let c4 = fit_c4(&fit_rows);
    let worst_ratio = arcs
        .iter()
        .map(|r| r.measure / (c4 * r.eps))
        .fold(0.0, f64::max);
    out.record(
        "riesz.arcs",
        &json!({
            "c4": c4,
            "fit_eps": eps[0],
            "max_ratio": worst_ratio,
            "pass": worst_ratio <= 1.05,
            "rows": arcs,
        }),
    )?;
    out.finish()
}

fn trace_grid(s: &SparseSeries, n: usize) -> Result<Vec<f64>, CliError> {
    let (lo, hi) = match &s.tie_g {
        Some(t) if t.len() >= 2 => (t[0].g(), t[t.len() - 1].g()),
        _ => (0.1, 10.0),
    };
    // geometric spacing follows the ties of the (b) construction
    let lo = lo.max(1e-3);
    Ok((0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n.max(2) - 1) as f64))
        .collect())
}

pub fn series(a: &SeriesArgs) -> Result<(), CliError> {
    let variant = match a.variant.unwrap_or(VariantArg::B) {
        VariantArg::A => Prop43Variant::A,
        VariantArg::B => Prop43Variant::B,
    };
    let lambda = a.lambda.unwrap_or(1.0);
    let sigma = a.sigma.unwrap_or(2.0);
    let k_max = a.k_max.unwrap_or(14);
    let s = build_prop43(variant, lambda, sigma, a.delta, k_max)?;
    let mut out = Sink::open(a.out.as_deref())?;
    out.record(
        "series.prop43",
        &json!({
            "variant": variant,
            "lambda": lambda,
            "sigma": sigma,
            "k_max": k_max,
            "series": s,
        }),
    )?;

    let gs = trace_grid(&s, a.samples.unwrap_or(400))?;
    let mut rows = Vec::with_capacity(gs.len());
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for &g in &gs {
        let x = gap(g)?;
        let nu = central_index(&s, x);
        if let Some(cf) = s.flm1_closed_form(x) {
            checked += 1;
            if cf != nu {
                mismatches += 1;
            }
        }
        let nu_cell = match nu.as_exact() {
            Some(n) => n.to_string(),
            None => csv_f64(nu.ln().exp()),
        };
        rows.push(vec![
            csv_f64(g),
            csv_f64(log_max_term(&s, x).to_f64()),
            nu_cell,
            csv_f64(k_indicator(&s, x).logmag),
        ]);
    }
    let mut twostars = 0.0f64;
    for w in gs.windows(2) {
        twostars = twostars.max(twostars_residual(&s, gap(w[0])?, gap(w[1])?)?);
    }
    // K at r_k = 2c_k - 1, i.e. g(c_k) - log 2
    let mut k_rows = Vec::new();
    if variant == Prop43Variant::B {
        if let Some(ties) = &s.tie_g {
            for k in 1..ties.len() {
                let g = ties[k].g() - std::f64::consts::LN_2;
                if g <= 0.0 {
                    continue;
                }
                let x = gap(g)?;
                let below = s.k_minus(x, s.terms[k].n).to_f64() < 1.0;
                k_rows.push(json!({
                    "k": k,
                    "log_k_over_g": k_indicator(&s, x).logmag / g,
                    "below_next_n": below,
                }));
            }
        }
    }
    out.record(
        "series.summary",
        &json!({
            "samples": gs.len(),
            "exactness_checked": checked,
            "exactness_mismatches": mismatches,
            "twostars_max": twostars,
            "k_at_ties": k_rows,
        }),
    )?;
    out.finish()?;
    if let Some(path) = &a.trace {
        write_csv(path, &["g", "log_mu", "nu", "K_log"], &rows)?;
    }
    Ok(())
}

fn parse_windows(ws: &[String]) -> Result<Vec<(f64, f64)>, CliError> {
    ws.iter()
        .map(|w| {
            let (lo, hi) = w
                .split_once(':')
                .ok_or_else(|| validation(format!("window `{w}` is not lo:hi")))?;
            let p = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| validation(format!("window `{w}`: bad number `{x}`")))
            };
            Ok((p(lo)?, p(hi)?))
        })
        .collect()
}

pub fn logderiv(a: &LogDerivArgs) -> Result<(), CliError> {
    let mut out = Sink::open(a.out.as_deref())?;
    match need(a.op, "op")? {
        LogDerivOp::Density => {
            let lambda = a.lambda.unwrap_or(1.0);
            let eta = a.eta.unwrap_or(0.5);
            let set = match &a.windows {
                Some(w) => RadialWindowSet::new(parse_windows(w)?, true)?,
                None => {
                    let base = a.base.unwrap_or(2.0);
                    let gs: Vec<LogGap> = (1..=a.n.unwrap_or(12))
                        .map(|n| gap(base.powi(n as i32)))
                        .collect::<Result<_, _>>()?;
                    loworder_windows(lambda, eta, &gs)?
                }
            };
            let rep = upper_density(&set);
            out.record(
                "logderiv.density",
                &json!({ "lambda": lambda, "eta": eta, "windows": set.intervals.len(), "report": rep }),
            )?;
        }
        LogDerivOp::IAlpha => {
            let s = a.s.unwrap_or(1.0);
            let alpha = a.alpha.unwrap_or(0.75);
            let g = a.g.unwrap_or(6.0);
            let v = i_alpha(&LogMModel::power(s), alpha, gap(g)?, LogGap::ZERO)?;
            out.record("logderiv.i_alpha", &json!({ "s": s, "alpha": alpha, "g": g, "value": v }))?;
        }
        LogDerivOp::Certificate => {
            let p = a.p.unwrap_or(2.0);
            let k = a.k.unwrap_or(1);
            let j = a.j.unwrap_or(0);
            let eps = a.eps.unwrap_or(0.05);
            let ws = match &a.windows {
                Some(w) => parse_windows(w)?,
                None => vec![(0.5, 4.0), (6.0, 9.0), (12.0, 16.0)],
            };
            let set = RadialWindowSet::new(ws, true)?;
            let rep = logderiv_certificate(
                &FSpec::ExpPower { p },
                k,
                j,
                eps,
                a.lambda.unwrap_or(p),
                a.sigma.unwrap_or(p),
                &set,
                &CertificateOptions::default(),
            )?;
            out.record(
                "logderiv.certificate",
                &json!({ "p": p, "k": k, "j": j, "bounded": rep.fitted_c <= p, "report": rep }),
            )?;
        }
    }
    out.finish()
}

fn radial_csv(path: Option<&Path>, rows: &[RadialSample]) -> Result<(), CliError> {
    let Some(path) = path else {
        return Ok(());
    };
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![csv_f64(r.g), csv_f64(r.log_log_m), csv_f64(r.ratio)])
        .collect();
    write_csv(path, &["g", "log_logM", "ratio"], &rows)
}

fn instance_json(rep: &InstanceReport, extra: serde_json::Value) -> Result<serde_json::Value, CliError> {
    let mut v = serde_json::to_value(rep).map_err(|e| CliError::Io(e.to_string()))?;
    if let (Some(m), serde_json::Value::Object(x)) = (v.as_object_mut(), extra) {
        m.extend(x);
    }
    Ok(v)
}

pub fn ode(a: &OdeArgs) -> Result<(), CliError> {
    let m = &a.model;
    let k = m.k.unwrap_or(1);
    let p1 = m.p1.unwrap_or(2.0);
    let p2 = m.p2.unwrap_or(3.0);
    let p = m.p.unwrap_or(p2);
    let mut out = Sink::open(a.out.as_deref())?;
    match need(a.op, "op")? {
        OdeOp::Predict => {
            let pr = predict_orders(p1, p2, k, p)?;
            out.record(
                "ode.predict",
                &json!({
                    "k": k, "p1": p1, "p2": p2, "p": p,
                    "sigma": pr.sigma_f, "lambda": pr.lambda_f,
                    "alpha": pr.alpha, "alpha_raw": pr.alpha_raw,
                }),
            )?;
        }
        OdeOp::Xi => {
            let eps = a.eps.unwrap_or(0.0);
            let xb = xi_beta(k, p1, p2, eps)?;
            out.record("ode.xi", &json!({ "k": k, "p1": p1, "p2": p2, "eps": eps, "result": xb }))?;
        }
        OdeOp::Halpha => {
            let alpha = need(a.alpha, "alpha")?;
            let k1 = need(a.kappa1, "kappa1")?;
            let k2 = need(a.kappa2, "kappa2")?;
            let (sigma, lambda) = h_alpha_orders(alpha, k1, k2)?;
            out.record(
                "ode.halpha",
                &json!({ "alpha": alpha, "kappa1": k1, "kappa2": k2, "sigma": sigma, "lambda": lambda }),
            )?;
        }
        OdeOp::Pmppvk => {
            let c = a.c.unwrap_or(1.0);
            let q = a.q.unwrap_or(2.0);
            let gs = g_grid(a.g_lo.unwrap_or(1.0), a.g_hi.unwrap_or(10.0), a.samples.unwrap_or(50));
            let pts = pmppvk_check(c, q, &gs)?;
            let worst = pts.iter().map(|p| p.deviation).fold(0.0, f64::max);
            out.record("ode.pmppvk", &json!({ "c": c, "q": q, "max_deviation": worst, "points": pts }))?;
        }
        OdeOp::Solve => {
            let pole = a.pole.unwrap_or(1);
            if k != 1 {
                return Err(validation("solve supports k = 1 only"));
            }
            let default_top = match pole {
                1 => 6.0,
                2 => 4.25,
                3 => 3.5,
                _ => 3.0,
            };
            let top = a.g_hi.unwrap_or(default_top);
            let spec = CoeffSpec::exp_pole(pole);
            let s = solve_for_radius(&spec, 1, &[1.0], gap(top)?, &SolveOptions::default())?;
            let gs = g_grid(a.g_lo.unwrap_or(0.5), top, a.samples.unwrap_or(48));
            let rows = solution_samples(&s, &gs, 0)?;
            // HKR: log M(r,f) stays below the majorant of the coefficient
            let maj = majorant_curve(&MajorantModel::exp_pole(pole), 1, &gs)?;
            let mut excess = f64::NEG_INFINITY;
            for (&g, m) in gs.iter().zip(&maj) {
                let lm = s.log_max_modulus(gap(g)?, 0)?;
                let m = m.to_f64();
                excess = excess.max((lm - m) / m.abs().max(1.0));
            }
            let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.g, r.log_log_m)).collect();
            let est = EstimateOptions {
                min_range: a.min_range.unwrap_or(2.5),
                ..Default::default()
            };
            let ind = disclab::ode::estimate_orders(&pairs, None, &est)?;
            let deg = pole as f64 + 1.0;
            let params = InstanceParams {
                k: 1,
                p1: deg,
                p2: deg,
                // the closed-form prediction needs p2 > 2k
                p: (deg > 2.0).then_some(deg),
            };
            let rep = InstanceReport::new(params, ind, &AuditOptions::default())?;
            let v = instance_json(
                &rep,
                json!({ "source": "taylor", "pole": pole, "degree": s.degree(), "hkr_max_excess": excess }),
            )?;
            out.record("ode.instance", &v)?;
            radial_csv(a.csv.as_deref(), &rows)?;
        }
        OdeOp::Majorant => {
            let model = MajorantModel::Profile {
                profile: PiecewiseProfile::new(build(m)?),
            };
            let gs = g_grid(a.g_lo.unwrap_or(1.0), model.u_max(), a.samples.unwrap_or(1500));
            let params = InstanceParams {
                k,
                p1,
                p2,
                p: Some(p),
            };
            let est = EstimateOptions {
                min_range: a.min_range.unwrap_or(EstimateOptions::default().min_range),
                ..Default::default()
            };
            let (rep, rows) = majorant_instance(&model, params, &gs, &est, &AuditOptions::default())?;
            out.record("ode.instance", &instance_json(&rep, json!({ "source": "profile" }))?)?;
            radial_csv(a.csv.as_deref(), &rows)?;
        }
    }
    out.finish()
}
