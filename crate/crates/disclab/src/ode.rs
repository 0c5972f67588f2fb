//! The linear equation `f^{(k)} + A f = 0` in the disc: Taylor solutions in
//! scaled log-domain arithmetic, the HKR growth majorant
//! `log M(r,f) ≲ k∫₀^r M(t,A)^{1/k} dt`, closed-form order predictors, and
//! finite-data order estimators with an inequality audit.
//!
//! Solution coefficients are stored as `c_m = f_m ρ^m` for a working radius
//! `ρ`, each a signed [`LogValue`], so `log M(r,f)` far beyond `e^{700}` stays
//! representable.

use std::cell::Cell;
use std::f64::consts::{E, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logderiv::FSpec;
use crate::numerics::{
    gauss_legendre, integrate_with, LogGap, LogValue, NumericsError, QuadOptions, Singularity,
};
use crate::profile::{Branch, PiecewiseProfile, ProfileError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("coefficient {index} overflowed; choose a smaller working radius")]
    Overflow { index: usize },
    #[error("series truncated too early for r at g = {g}: last term is e^{tail} of the largest")]
    Truncated { g: f64, tail: f64 },
    #[error("degree cap {cap} reached before the tail fell below the threshold")]
    DegreeCap { cap: usize },
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, OdeError> {
    Err(OdeError::Invalid(msg.into()))
}

/// Radial majorant `M(t,A)` of the coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MajorantModel {
    /// `M(t) = e^{log_c} (1-t)^{-s}`.
    Power { log_c: f64, s: f64 },
    /// `log M(t) = φ(u - log_c)` where `u = log 1/(1-t)`: the profile read in
    /// its own coordinate `u = g + log_c`, extended below `g = 0` by its
    /// outer power branch.
    Profile { profile: PiecewiseProfile },
}

impl MajorantModel {
    /// Majorant of `-p(1-z)^{-(p+1)}`.
    pub fn exp_pole(p: u32) -> Self {
        MajorantModel::Power {
            log_c: (p as f64).ln(),
            s: p as f64 + 1.0,
        }
    }

    /// Largest log-gap where the model is defined.
    pub fn u_max(&self) -> f64 {
        match self {
            MajorantModel::Power { .. } => f64::INFINITY,
            MajorantModel::Profile { profile } => {
                profile.g_max().g() + profile.scaffold.params.log_c
            }
        }
    }

    /// `log M(t,A)` at log-gap `u`.
    pub fn log_m(&self, u: f64) -> Result<f64, OdeError> {
        match self {
            MajorantModel::Power { log_c, s } => Ok(log_c + s * u),
            MajorantModel::Profile { profile } => {
                let g = u - profile.scaffold.params.log_c;
                if g < 0.0 {
                    Ok(profile.eval_branch(1, Branch::Outer, g).phi)
                } else {
                    Ok(profile.eval(LogGap::new(g)?)?.phi)
                }
            }
        }
    }
}

/// The coefficient `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoeffSpec {
    /// Taylor coefficients `A_j`; zero past the end.
    Dense { coeffs: Vec<LogValue> },
    /// `A = P/Q` with polynomial `P`, `Q` and `Q(0) ≠ 0`. The recursion then
    /// has `deg P + deg Q` terms instead of `m`.
    Rational { num: Vec<f64>, den: Vec<f64> },
    /// No coefficients, only `M(t,A)` and the declared degree and lower
    /// degree `p2 = σ_{M,deg}`, `p1 = λ_{M,deg}`.
    Majorant { model: MajorantModel, p1: f64, p2: f64 },
}

impl CoeffSpec {
    pub fn dense_f64(coeffs: &[f64]) -> Self {
        CoeffSpec::Dense {
            coeffs: coeffs.iter().map(|&a| LogValue::from_f64(a)).collect(),
        }
    }

    /// `A = -p(1-z)^{-(p+1)}`, for which `f = exp((1-z)^{-p} - 1)` solves
    /// `f' + Af = 0`.
    pub fn exp_pole(p: u32) -> Self {
        let n = p as usize + 1;
        let mut den = vec![1.0; n + 1];
        for i in 1..=n {
            den[i] = -den[i - 1] * (n + 1 - i) as f64 / i as f64;
        }
        CoeffSpec::Rational {
            num: vec![-(p as f64)],
            den,
        }
    }

    pub fn validate(&self) -> Result<(), OdeError> {
        match self {
            CoeffSpec::Dense { coeffs } => {
                if coeffs.iter().any(|c| c.logmag.is_nan() || c.logmag == f64::INFINITY) {
                    return invalid("dense coefficients must be finite");
                }
            }
            CoeffSpec::Rational { num, den } => {
                if num.iter().chain(den).any(|x| !x.is_finite()) {
                    return invalid("rational coefficients must be finite");
                }
                if den.first().map_or(true, |&q| q == 0.0) {
                    return invalid("denominator must not vanish at 0");
                }
            }
            CoeffSpec::Majorant { model, p1, p2 } => {
                if !(p1.is_finite() && p2.is_finite() && 0.0 <= *p1 && p1 <= p2) {
                    return invalid(format!("need 0 <= p1 <= p2, got p1={p1}, p2={p2}"));
                }
                if let MajorantModel::Power { log_c, s } = model {
                    if !(log_c.is_finite() && s.is_finite() && *s >= 0.0) {
                        return invalid("power majorant needs finite log_c and s >= 0");
                    }
                }
            }
        }
        Ok(())
    }
}

/// Taylor coefficients of a solution, scaled by `ρ^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSeries {
    pub k: usize,
    /// `log ρ`; `0` means unscaled.
    pub log_rho: f64,
    /// `c_m = f_m ρ^m`.
    pub coeffs: Vec<LogValue>,
}

impl SolutionSeries {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Unscaled `f_m`.
    pub fn coeff(&self, m: usize) -> LogValue {
        self.coeffs[m].scale_log(-(m as f64) * self.log_rho)
    }

    /// `log M(r,f)`. Coefficients of one sign give `|f(r)|` directly;
    /// otherwise `angles` equally spaced points on the circle are sampled.
    pub fn log_max_modulus(&self, g: LogGap, angles: usize) -> Result<f64, OdeError> {
        let lr = g.log_r() - self.log_rho;
        if !(lr < 0.0) && self.log_rho != 0.0 {
            return invalid("evaluation radius must stay inside the working radius");
        }
        let logs: Vec<f64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| c.logmag + m as f64 * lr)
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        let tail = logs[logs.len() - 1] - top;
        if logs.len() > 1 && tail > -30.0 {
            return Err(OdeError::Truncated { g: g.g(), tail });
        }
        let one_sign = self.coeffs.iter().all(|c| c.sign >= 0)
            || self.coeffs.iter().all(|c| c.sign <= 0);
        if one_sign {
            let s: f64 = logs.iter().map(|l| (l - top).exp()).sum();
            return Ok(top + s.ln());
        }
        if angles == 0 {
            return invalid("mixed-sign coefficients need angles > 0");
        }
        let mut best = 0.0f64;
        for a in 0..angles {
            let th = 2.0 * PI * a as f64 / angles as f64;
            let mut z = Complex64::new(0.0, 0.0);
            for (m, (c, l)) in self.coeffs.iter().zip(&logs).enumerate() {
                if c.sign != 0 {
                    z += Complex64::from_polar(c.sign as f64 * (l - top).exp(), m as f64 * th);
                }
            }
            best = best.max(z.norm());
        }
        Ok(top + best.ln())
    }
}

/// Signed sum of a few log-domain terms.
fn signed_sum(terms: &[LogValue]) -> LogValue {
    let top = terms
        .iter()
        .filter(|t| t.sign != 0)
        .map(|t| t.logmag)
        .fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return LogValue::ZERO;
    }
    let d: f64 = terms
        .iter()
        .filter(|t| t.sign != 0)
        .map(|t| t.sign as f64 * (t.logmag - top).exp())
        .sum();
    if d == 0.0 {
        LogValue::ZERO
    } else {
        LogValue::signed(d.signum() as i8, top + d.abs().ln())
    }
}

/// One step of the coefficient recursion at a fixed working radius.
struct Recursion {
    k: usize,
    log_rho: f64,
    /// Dense `A_j ρ^j`, or rational `P_i ρ^i`.
    a: Vec<LogValue>,
    /// Rational `Q_i ρ^i`; empty for dense.
    q: Vec<LogValue>,
    buf: Vec<LogValue>,
}

impl Recursion {
    fn new(spec: &CoeffSpec, k: usize, log_rho: f64) -> Result<Self, OdeError> {
        spec.validate()?;
        let scale = |v: Vec<LogValue>| -> Vec<LogValue> {
            v.into_iter()
                .enumerate()
                .map(|(j, c)| c.scale_log(j as f64 * log_rho))
                .collect()
        };
        let lift = |xs: &[f64]| xs.iter().map(|&x| LogValue::from_f64(x)).collect::<Vec<_>>();
        let (a, q) = match spec {
            CoeffSpec::Dense { coeffs } => (scale(coeffs.clone()), Vec::new()),
            CoeffSpec::Rational { num, den } => (scale(lift(num)), scale(lift(den))),
            CoeffSpec::Majorant { .. } => {
                return invalid("a majorant-only coefficient cannot be solved");
            }
        };
        Ok(Recursion {
            k,
            log_rho,
            a,
            q,
            buf: Vec::new(),
        })
    }

    /// `log((n+k)!/n!)`.
    fn log_rising(&self, n: usize) -> f64 {
        (1..=self.k).map(|i| ((n + i) as f64).ln()).sum()
    }

    /// `c_{m+k}` from `c[0..m+k]`.
    fn next(&mut self, c: &[LogValue]) -> Result<LogValue, OdeError> {
        let k = self.k;
        let m = c.len() - k;
        let rho_k = k as f64 * self.log_rho;
        self.buf.clear();
        for (i, a) in self.a.iter().enumerate().take(m + 1) {
            self.buf.push((*a * c[m - i]).scale_log(rho_k));
        }
        let out = if self.q.is_empty() {
            let s = signed_sum(&self.buf);
            -s.scale_log(-self.log_rising(m))
        } else {
            for i in 1..self.q.len().min(m + 1) {
                let lr = self.log_rising(m - i);
                self.buf.push((self.q[i] * c[m - i + k]).scale_log(lr));
            }
            let s = signed_sum(&self.buf);
            -(s / self.q[0]).scale_log(-self.log_rising(m))
        };
        if out.logmag.is_nan() || out.logmag == f64::INFINITY {
            return Err(OdeError::Overflow { index: c.len() });
        }
        Ok(out)
    }
}

fn initial_coeffs(k: usize, init: &[f64], log_rho: f64) -> Result<Vec<LogValue>, OdeError> {
    if k == 0 {
        return invalid("order k must be at least 1");
    }
    if init.len() != k || init.iter().any(|x| !x.is_finite()) {
        return invalid(format!("need {k} finite initial values f(0), ..., f^(k-1)(0)"));
    }
    let mut log_fact = 0.0;
    Ok(init
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            if j > 0 {
                log_fact += (j as f64).ln();
            }
            LogValue::from_f64(v).scale_log(j as f64 * log_rho - log_fact)
        })
        .collect())
}

/// Solve to a fixed degree without scaling (`ρ = 1`).
pub fn taylor_solve(
    a: &CoeffSpec,
    k: usize,
    init: &[f64],
    degree: usize,
) -> Result<SolutionSeries, OdeError> {
    taylor_solve_scaled(a, k, init, degree, 0.0)
}

/// Solve to a fixed degree with coefficients scaled by `ρ^m`, `log ρ ≤ 0`.
pub fn taylor_solve_scaled(
    a: &CoeffSpec,
    k: usize,
    init: &[f64],
    degree: usize,
    log_rho: f64,
) -> Result<SolutionSeries, OdeError> {
    if degree < k {
        return invalid(format!("degree {degree} below the order {k}"));
    }
    if !(log_rho <= 0.0) {
        return invalid("log rho must be <= 0");
    }
    let mut coeffs = initial_coeffs(k, init, log_rho)?;
    let mut rec = Recursion::new(a, k, log_rho)?;
    while coeffs.len() <= degree {
        let c = rec.next(&coeffs)?;
        coeffs.push(c);
    }
    Ok(SolutionSeries { k, log_rho, coeffs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// `1 - ρ = (1 - r)/stretch`.
    pub stretch: f64,
    /// Stop once terms at `r` fall below `e^{tail_log}` of the largest.
    pub tail_log: f64,
    pub min_degree: usize,
    pub max_degree: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            stretch: 1.05,
            tail_log: -40.0,
            min_degree: 64,
            max_degree: 8_000_000,
        }
    }
}

/// Solve with the degree chosen so that the series is complete at `g_eval`
/// and every smaller log-gap.
pub fn solve_for_radius(
    a: &CoeffSpec,
    k: usize,
    init: &[f64],
    g_eval: LogGap,
    opts: &SolveOptions,
) -> Result<SolutionSeries, OdeError> {
    if !(opts.stretch > 1.0 && opts.tail_log < 0.0) {
        return invalid("need stretch > 1 and tail_log < 0");
    }
    let log_rho = g_eval.shifted(opts.stretch.ln()).log_r();
    let lr = g_eval.log_r() - log_rho;
    let mut coeffs = initial_coeffs(k, init, log_rho)?;
    let mut rec = Recursion::new(a, k, log_rho)?;
    let mut top = f64::NEG_INFINITY;
    let mut prev = f64::INFINITY;
    let mut falling = 0usize;
    for (m, c) in coeffs.iter().enumerate() {
        top = top.max(c.logmag + m as f64 * lr);
    }
    loop {
        let m = coeffs.len();
        if m > opts.max_degree {
            return Err(OdeError::DegreeCap {
                cap: opts.max_degree,
            });
        }
        let c = rec.next(&coeffs)?;
        coeffs.push(c);
        let t = c.logmag + m as f64 * lr;
        top = top.max(t);
        falling = if t <= prev { falling + 1 } else { 0 };
        prev = t;
        if m >= opts.min_degree && falling >= 8 && t < top + opts.tail_log {
            break;
        }
    }
    Ok(SolutionSeries { k, log_rho, coeffs })
}

/// One row of a radial sample table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialSample {
    pub g: f64,
    /// `log⁺ log⁺ M(r,f)`.
    pub log_log_m: f64,
    /// `log_log_m / g`.
    pub ratio: f64,
}

impl RadialSample {
    /// From `log M` (natural log of the maximum modulus).
    pub fn from_log_m(g: f64, log_m: LogValue) -> Self {
        let ll = if log_m.is_positive() {
            log_m.logmag.max(0.0)
        } else {
            0.0
        };
        RadialSample {
            g,
            log_log_m: ll,
            ratio: if g > 0.0 { ll / g } else { 0.0 },
        }
    }
}

/// `log M(r,f)` samples of a solution at each log-gap.
pub fn solution_samples(
    s: &SolutionSeries,
    gs: &[f64],
    angles: usize,
) -> Result<Vec<RadialSample>, OdeError> {
    gs.iter()
        .map(|&g| {
            let lm = s.log_max_modulus(LogGap::new(g)?, angles)?;
            let lv = if lm.is_finite() {
                LogValue::from_f64(lm)
            } else {
                LogValue::ZERO
            };
            Ok(RadialSample::from_log_m(g, lv))
        })
        .collect()
}

/// `k ∫₀^r M(t,A)^{1/k} dt`, the HKR bound for `log M(r,f)` up to an
/// additive constant.
pub fn growth_majorant(a: &CoeffSpec, k: usize, g: LogGap) -> Result<LogValue, OdeError> {
    match a {
        CoeffSpec::Majorant { model, .. } => Ok(majorant_curve(model, k, &[g.g()])?[0]),
        _ => invalid("growth_majorant needs a majorant coefficient"),
    }
}

/// [`growth_majorant`] on sorted log-gaps, sharing the running integral.
pub fn majorant_curve(model: &MajorantModel, k: usize, gs: &[f64]) -> Result<Vec<LogValue>, OdeError> {
    if k == 0 {
        return invalid("order k must be at least 1");
    }
    if gs.windows(2).any(|w| !(w[0] <= w[1])) || gs.iter().any(|&g| !(g >= 0.0)) {
        return invalid("log-gaps must be nonnegative and sorted");
    }
    let kf = k as f64;
    match model {
        MajorantModel::Power { log_c, s } => Ok(gs
            .iter()
            .map(|&g| power_integral(s / kf - 1.0, g).scale_log(kf.ln() + log_c / kf))
            .collect()),
        MajorantModel::Profile { .. } => {
            if let Some(&last) = gs.last() {
                if last > model.u_max() {
                    return invalid(format!(
                        "g = {last} beyond the profile range {}",
                        model.u_max()
                    ));
                }
            }
            // Gauss–Legendre panels of width <= 1/4 on log M/k - u.
            let (x, w) = gauss_legendre(16);
            let mut acc = LogValue::ZERO;
            let mut at = 0.0f64;
            let mut out = Vec::with_capacity(gs.len());
            for &g in gs {
                while at < g {
                    let b = (at + 0.25).min(g);
                    let half = 0.5 * (b - at);
                    let mut logs = Vec::with_capacity(16);
                    for (xi, wi) in x.iter().zip(&w) {
                        let u = at + half * (xi + 1.0);
                        logs.push(model.log_m(u)? / kf - u + (wi * half).ln());
                    }
                    acc = acc + LogValue::from_log(crate::numerics::log_sum_exp(&logs));
                    at = b;
                }
                out.push(acc.scale_log(kf.ln()));
            }
            Ok(out)
        }
    }
}

/// `∫₀^g e^{x v} dv` as a LogValue.
fn power_integral(x: f64, g: f64) -> LogValue {
    if g == 0.0 {
        return LogValue::ZERO;
    }
    let t = x * g;
    if t == 0.0 {
        return LogValue::from_log(g.ln());
    }
    let l = if t > 30.0 {
        t + (-(-t).exp()).ln_1p() - x.ln()
    } else {
        (t.exp_m1() / x).ln()
    };
    LogValue::from_log(l)
}

/// Closed-form order predictions for a declared instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sigma_f: f64,
    pub lambda_f: f64,
    pub alpha: f64,
    /// `α(p)` before clipping to `[p1/p2, 1]`.
    pub alpha_raw: f64,
}

pub fn predict_orders(p1: f64, p2: f64, k: u32, p: f64) -> Result<Prediction, OdeError> {
    let kf = k as f64;
    if !(k >= 1 && kf <= p1 && p1 <= p2 && p2 <= p && p.is_finite()) {
        return invalid(format!(
            "need 1 <= k <= p1 <= p2 <= p < inf, got k={k}, p1={p1}, p2={p2}, p={p}"
        ));
    }
    if !(p2 > 2.0 * kf) {
        return invalid(format!("need p2 > 2k, got p2={p2}, k={k}"));
    }
    let sigma_f = p2 / kf - 1.0;
    let alpha_raw = p1 / kf - (p1 / p) * sigma_f;
    let alpha = alpha_raw.clamp(p1 / p2, 1.0);
    Ok(Prediction {
        sigma_f,
        lambda_f: p1 / kf - alpha,
        alpha,
        alpha_raw,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiBeta {
    pub xi: f64,
    pub beta: f64,
    /// `|LHS - RHS|` of `(1/β)((ξ+ε)/k - 1) = (1/(ξ+ε))((p2+ε)/k - 1)`.
    pub identity_residual: f64,
    /// `|ξ² - kξ - p1(p2+ε-k)|`.
    pub root_residual: f64,
}

/// Largest admissible `ε`, exclusive: `(p2-p1)(p2-k)/p1`.
pub fn xi_eps_bound(k: u32, p1: f64, p2: f64) -> f64 {
    (p2 - p1) * (p2 - k as f64) / p1
}

pub fn xi_beta(k: u32, p1: f64, p2: f64, eps: f64) -> Result<XiBeta, OdeError> {
    let kf = k as f64;
    if !(k >= 1 && p2 > 2.0 * kf && 0.0 < p1 && p1 <= p2 && p2.is_finite()) {
        return invalid(format!("need 0 < p1 <= p2, p2 > 2k >= 2; got k={k}, p1={p1}, p2={p2}"));
    }
    let bound = xi_eps_bound(k, p1, p2);
    if !(eps == 0.0 || (eps > 0.0 && eps < bound)) {
        return invalid(format!("eps = {eps} outside [0, {bound})"));
    }
    let c = p1 * (p2 + eps - kf);
    let xi = (kf + (kf * kf + 4.0 * c).sqrt()) / 2.0;
    let xe = xi + eps;
    let beta = xe * (xe - kf) / (p2 + eps - kf);
    let lhs = (xe / kf - 1.0) / beta;
    let rhs = ((p2 + eps) / kf - 1.0) / xe;
    Ok(XiBeta {
        xi,
        beta,
        identity_residual: (lhs - rhs).abs(),
        root_residual: (xi * xi - kf * xi - c).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmonReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// `T(R,f)` as the circle average of `log⁺|f|`.
    pub characteristic: f64,
}

/// Both sides of the integrated logarithmic-derivative estimate
/// `∫∫_{r' < |z| < r} |f^{(k)}/f^{(j)}|^{1/(k-j)} dm₂` against
/// `R log(e(R-r')/(R-r)) (1 + log⁺ 1/(R-r) + T(R,f))`.
pub fn tmon_check(
    f: &FSpec,
    k: usize,
    j: usize,
    r_inner: f64,
    r: f64,
    big_r: f64,
) -> Result<TmonReport, OdeError> {
    if !(j < k) {
        return invalid(format!("need j < k, got j={j}, k={k}"));
    }
    if !(0.0 <= r_inner && r_inner < r && r < big_r) {
        return invalid("need 0 <= r_inner < r < R");
    }
    let opts = QuadOptions {
        rel_tol: 1e-9,
        abs_tol: 1e-13,
        max_intervals: 4000,
    };
    let power = 1.0 / (k - j) as f64;
    let fail: Cell<Option<NumericsError>> = Cell::new(None);
    let circle = |rho: f64, h: &dyn Fn(Complex64) -> f64| -> f64 {
        let mut total = 0.0;
        for (a, b) in [(-PI, 0.0), (0.0, PI)] {
            match integrate_with(|t| h(Complex64::from_polar(rho, t)), a, b, Singularity::None, opts) {
                Ok(v) => total += v,
                Err(e) => fail.set(Some(e)),
            }
        }
        total
    };
    let stat = |z: Complex64| -> f64 {
        let d = f.derivative_ratios(z, k);
        let q = (d[k] / d[j]).norm();
        if q == 0.0 {
            0.0
        } else {
            q.powf(power)
        }
    };
    let lhs = integrate_with(
        |rho| rho * circle(rho, &stat),
        r_inner,
        r,
        Singularity::None,
        opts,
    )?;
    let characteristic = circle(big_r, &|z| f.log_abs(z).max(0.0)) / (2.0 * PI);
    if let Some(e) = fail.take() {
        return Err(e.into());
    }
    let rhs = big_r
        * (E * (big_r - r_inner) / (big_r - r)).ln()
        * (1.0 + (1.0 / (big_r - r)).ln().max(0.0) + characteristic);
    Ok(TmonReport {
        lhs,
        rhs,
        ratio: lhs / rhs,
        characteristic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmppvkPoint {
    pub g: f64,
    /// `(ρ/r)^{1/(1-r)}` with `1 - ρ = C(1-r)^q`.
    pub value: f64,
    pub deviation: f64,
}

pub fn pmppvk_check(c: f64, q: f64, g_grid: &[f64]) -> Result<Vec<PmppvkPoint>, OdeError> {
    if !(c > 0.0 && q > 1.0 && c.is_finite() && q.is_finite()) {
        return invalid(format!("need C > 0 and q > 1, got C={c}, q={q}"));
    }
    g_grid
        .iter()
        .map(|&g| {
            let d = LogGap::new(g)?.delta();
            let x = c * d.powf(q);
            if !(x < 1.0) {
                return invalid(format!("C(1-r)^q = {x} >= 1 at g = {g}"));
            }
            let value = (((-x).ln_1p() - (-d).ln_1p()) / d).exp();
            Ok(PmppvkPoint {
                g,
                value,
                deviation: (value - E).abs(),
            })
        })
        .collect()
}

/// `(σ_M, λ_{M,log})` of `h_α`, with `σ = max(α - κ₁, 0)`.
pub fn h_alpha_orders(alpha: f64, kappa1: f64, kappa2: f64) -> Result<(f64, f64), OdeError> {
    if !(0.0 < kappa1 && kappa1 < kappa2 && kappa2 < 1.0) {
        return invalid(format!("need 0 < kappa1 < kappa2 < 1, got {kappa1}, {kappa2}"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return invalid(format!("alpha = {alpha} must be positive"));
    }
    if alpha == 1.0 {
        return invalid("alpha = 1 is not covered by either branch");
    }
    let sigma = (alpha - kappa1).max(0.0);
    let lambda = if alpha < kappa1 {
        0.0
    } else if alpha < 1.0 {
        alpha * (alpha - kappa1) * (1.0 - kappa2) / (alpha * (1.0 - kappa2) + kappa2 - kappa1)
    } else {
        alpha - kappa2
    };
    Ok((sigma, lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    /// Fraction of the g-range, counted from the top, used for tail extrema.
    pub tail: f64,
    pub min_samples: usize,
    pub min_range: f64,
    /// Minimum g-distance between the two ends of a secant.
    pub secant_width: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            tail: 0.5,
            min_samples: 32,
            min_range: 6.0,
            secant_width: 1.0,
        }
    }
}

/// Finite-data brackets for the order indicators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthIndicators {
    /// Tail sup and inf of `log⁺log⁺M / g`.
    pub sigma_hat: f64,
    pub lambda_hat: f64,
    /// Largest and smallest secant slope of `log⁺log⁺M` in the tail.
    pub sigma_secant: Option<f64>,
    pub lambda_secant: Option<f64>,
    /// Tail sup and inf of `log K / g`, when K samples are given.
    pub sigma_star: Option<f64>,
    pub lambda_star: Option<f64>,
    /// `g`-range of the tail window.
    pub window: (f64, f64),
}

fn check_samples(s: &[(f64, f64)], opts: &EstimateOptions) -> Result<(), OdeError> {
    if s.len() < opts.min_samples {
        return invalid(format!("{} samples, need at least {}", s.len(), opts.min_samples));
    }
    if s.iter().any(|&(g, y)| !(g > 0.0 && g.is_finite() && y.is_finite())) {
        return invalid("samples need finite values at g > 0");
    }
    if s.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return invalid("sample log-gaps must be strictly increasing");
    }
    let range = s[s.len() - 1].0 - s[0].0;
    if !(range >= opts.min_range) {
        return invalid(format!("g-range {range} below the required {}", opts.min_range));
    }
    Ok(())
}

fn tail_start(s: &[(f64, f64)], tail: f64) -> usize {
    let (lo, hi) = (s[0].0, s[s.len() - 1].0);
    let cut = hi - tail * (hi - lo);
    s.iter().position(|&(g, _)| g >= cut).unwrap_or(s.len() - 1)
}

fn ratio_extrema(s: &[(f64, f64)]) -> (f64, f64) {
    s.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &(g, y)| {
        (hi.max(y / g), lo.min(y / g))
    })
}

/// Tail extrema and secant slopes of `(g, log⁺log⁺M)` samples, and of
/// `(g, log K)` samples if given.
pub fn estimate_orders(
    samples: &[(f64, f64)],
    k_samples: Option<&[(f64, f64)]>,
    opts: &EstimateOptions,
) -> Result<GrowthIndicators, OdeError> {
    if !(opts.tail > 0.0 && opts.tail <= 1.0 && opts.secant_width > 0.0) {
        return invalid("need 0 < tail <= 1 and secant_width > 0");
    }
    check_samples(samples, opts)?;
    let start = tail_start(samples, opts.tail);
    let tail = &samples[start..];
    let (sigma_hat, lambda_hat) = ratio_extrema(tail);
    let mut sec: Option<(f64, f64)> = None;
    let mut j = 0;
    for i in start..samples.len() {
        let (gi, yi) = samples[i];
        while j + 1 < i && gi - samples[j + 1].0 >= opts.secant_width {
            j += 1;
        }
        let (gj, yj) = samples[j];
        if gi - gj >= opts.secant_width {
            let s = (yi - yj) / (gi - gj);
            sec = Some(sec.map_or((s, s), |(hi, lo)| (hi.max(s), lo.min(s))));
        }
    }
    let (sigma_star, lambda_star) = match k_samples {
        Some(ks) => {
            check_samples(ks, opts)?;
            let (hi, lo) = ratio_extrema(&ks[tail_start(ks, opts.tail)..]);
            (Some(hi), Some(lo))
        }
        None => (None, None),
    };
    Ok(GrowthIndicators {
        sigma_hat,
        lambda_hat,
        sigma_secant: sec.map(|s| s.0),
        lambda_secant: sec.map(|s| s.1),
        sigma_star,
        lambda_star,
        window: (tail[0].0, samples[samples.len() - 1].0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    pub thm13a_tol: f64,
    pub cor14_tol: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            thm13a_tol: 0.02,
            cor14_tol: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub pass: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inequalities {
    /// `p1/k - 1 <= 1 + (λ - λ/σ)⁺`.
    pub thm13a: Check,
    /// `(p1-2k)/(p2-2k)(p2/k-1) <= λ <= p1/p2 (p2/k-1)`; needs `p2 > 2k`.
    pub cor14: Option<Check>,
}

/// Audit the declared `(p1, p2)` against estimated indicators.
///
/// The lower-order inequality uses the larger of the ratio and secant
/// estimates of `λ` and `σ`: finite data only brackets a liminf, and the
/// inequality is a lower bound. The band check uses the ratio estimate.
pub fn audit_inequalities(
    p1: f64,
    p2: f64,
    k: u32,
    ind: &GrowthIndicators,
    opts: &AuditOptions,
) -> Inequalities {
    let kf = k as f64;
    let up = |a: f64, b: Option<f64>| b.map_or(a, |b| a.max(b));
    let lam = up(ind.lambda_hat, ind.lambda_secant);
    let sig = up(ind.sigma_hat, ind.sigma_secant);
    let rhs = 1.0 + (lam - lam / sig).max(0.0);
    let m13 = rhs - (p1 / kf - 1.0);
    let cor14 = (p2 > 2.0 * kf).then(|| {
        let sf = p2 / kf - 1.0;
        let lo = (p1 - 2.0 * kf) / (p2 - 2.0 * kf) * sf;
        let hi = p1 / p2 * sf;
        let margin = (ind.lambda_hat - lo).min(hi - ind.lambda_hat);
        Check {
            pass: margin >= -opts.cor14_tol,
            margin,
        }
    });
    Inequalities {
        thm13a: Check {
            pass: m13 >= -opts.thm13a_tol,
            margin: m13,
        },
        cor14,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub k: u32,
    pub p1: f64,
    pub p2: f64,
    pub p: Option<f64>,
}

/// The per-instance record written by the command-line front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub params: InstanceParams,
    pub sigma_hat: f64,
    pub lambda_hat: f64,
    pub indicators: GrowthIndicators,
    pub predicted: Option<Prediction>,
    pub inequalities: Inequalities,
}

impl InstanceReport {
    pub fn new(
        params: InstanceParams,
        indicators: GrowthIndicators,
        opts: &AuditOptions,
    ) -> Result<Self, OdeError> {
        let predicted = match params.p {
            Some(p) => Some(predict_orders(params.p1, params.p2, params.k, p)?),
            None => None,
        };
        Ok(InstanceReport {
            params,
            sigma_hat: indicators.sigma_hat,
            lambda_hat: indicators.lambda_hat,
            indicators,
            predicted,
            inequalities: audit_inequalities(params.p1, params.p2, params.k, &indicators, opts),
        })
    }
}

/// Majorant-only instance: estimate orders from the HKR bound on `gs`.
pub fn majorant_instance(
    model: &MajorantModel,
    params: InstanceParams,
    gs: &[f64],
    est: &EstimateOptions,
    audit: &AuditOptions,
) -> Result<(InstanceReport, Vec<RadialSample>), OdeError> {
    let curve = majorant_curve(model, params.k as usize, gs)?;
    let rows: Vec<RadialSample> = gs
        .iter()
        .zip(curve)
        .map(|(&g, l)| RadialSample::from_log_m(g, l))
        .collect();
    let pairs: Vec<(f64, f64)> = rows.iter().map(|s| (s.g, s.log_log_m)).collect();
    let ind = estimate_orders(&pairs, None, est)?;
    Ok((InstanceReport::new(params, ind, audit)?, rows))
}

/// Evenly spaced log-gaps `lo, ..., hi`.
pub fn g_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}
