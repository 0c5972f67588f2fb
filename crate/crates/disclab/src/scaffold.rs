//! The irregular-growth scaffold: doubly exponentially thinning radii
//! `r_n < r_n' ≤ r̂_n < r_n* < r_n'' < r_{n+1}` and oscillation exponents `ε_n`.
//!
//! Everything is carried in log-gap coordinates. Large constants such as
//! `R_n ~ e^{g_n}` and `M_n ~ e^{2ĝ_n}` only ever appear through ratios
//! against `e^{ĝ_n}`, so generations far past the double-precision range of
//! `1 - r` remain computable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{find_root, int_log_ratio_scaled, log1p_ratio, LogGap, LogValue, NumericsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaffoldError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("generation {generation}: ordering violated ({detail})")]
    Ordering { generation: usize, detail: String },
    #[error("generation {generation}: closure bracket failed at the {side} end, constant `{constant}` too {how} (gL-gR = {value})")]
    Bracket {
        generation: usize,
        side: &'static str,
        constant: char,
        how: &'static str,
        value: f64,
    },
    #[error("generation {generation}: eps_next = {eps} outside (-{half}, {half}); constant `C` too small")]
    EpsRange { generation: usize, eps: f64, half: f64 },
    #[error("construction failed after {retries} retries: {last}")]
    RetriesExhausted { retries: u32, last: Box<ScaffoldError> },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Rule for the spacing factors `η_n` in `1 - r_{n+1} = (1 - r_n'')/η_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EtaRule {
    /// `η_n = n + 1`.
    NPlusOne,
    /// Explicit values `η_1, η_2, ...`; the last one repeats.
    Table(Vec<f64>),
}

impl EtaRule {
    pub fn eta(&self, n: usize) -> f64 {
        match self {
            EtaRule::NPlusOne => n as f64 + 1.0,
            EtaRule::Table(v) => v[(n - 1).min(v.len() - 1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaffoldParams {
    pub k: u32,
    pub p1: f64,
    pub p2: f64,
    pub p: f64,
    pub log_c: f64,
    /// Log-gap of the seed radius `r_1`.
    pub g1: f64,
    /// Bracket constants: `1-α = a(1-r̂)/u^{1/2}`, `1-β = b(1-r̂)/u^2`.
    pub a: f64,
    pub b: f64,
    pub eta: EtaRule,
}

impl ScaffoldParams {
    /// Default constants for `(k, p1, p2, p)`.
    pub fn with_defaults(k: u32, p1: f64, p2: f64, p: f64) -> Self {
        let log_c = f64::max(10.0, 4.0 * p2 / (p2 - p1));
        Self::from_log_c(k, p1, p2, p, log_c)
    }

    /// The reference instance `k=1, p1=2, p2=3, p=3`.
    pub fn reference() -> Self {
        Self::with_defaults(1, 2.0, 3.0, 3.0)
    }

    /// Constants derived from a given `log C`.
    pub fn from_log_c(k: u32, p1: f64, p2: f64, p: f64, log_c: f64) -> Self {
        ScaffoldParams {
            k,
            p1,
            p2,
            p,
            log_c,
            g1: 3.0 * log_c,
            a: log_c.powf(0.45),
            b: f64::min(1.0, (p2 - p1) / 10.0),
            eta: EtaRule::NPlusOne,
        }
    }

    /// Same exponents with `C` scaled by `10^times`; `a`, `b`, `g1` recomputed.
    pub fn bumped(&self, times: u32) -> Self {
        let mut out = Self::from_log_c(
            self.k,
            self.p1,
            self.p2,
            self.p,
            self.log_c + times as f64 * std::f64::consts::LN_10,
        );
        out.eta = self.eta.clone();
        out
    }

    pub fn validate(&self) -> Result<(), ScaffoldError> {
        let bad = |m: String| Err(ScaffoldError::Params(m));
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if !(self.p1 > 0.0 && self.p1 < self.p2 && self.p2 <= self.p && self.p.is_finite()) {
            return bad(format!(
                "need 0 < p1 < p2 <= p < inf, got p1={}, p2={}, p={}",
                self.p1, self.p2, self.p
            ));
        }
        if !(self.log_c > 1.0 && self.log_c > self.p2 / (self.p2 - self.p1)) {
            return bad(format!(
                "need C > e^(p2/(p2-p1)) = e^{}, got log C = {}",
                self.p2 / (self.p2 - self.p1),
                self.log_c
            ));
        }
        if !(self.a > 0.0 && self.a < self.log_c.sqrt()) {
            return bad(format!("need 0 < a < (log C)^(1/2), got a = {}", self.a));
        }
        if !(self.b > 0.0 && self.b < self.a) {
            return bad(format!("need 0 < b < a, got b = {}", self.b));
        }
        if !(self.g1 > 0.0 && self.g1.is_finite()) {
            return bad(format!("need g1 > 0, got {}", self.g1));
        }
        if let EtaRule::Table(v) = &self.eta {
            if v.is_empty() || v.iter().any(|&e| !(e > 1.0)) {
                return bad("eta table must be nonempty with entries > 1".into());
            }
        }
        Ok(())
    }
}

/// Radii and constants of one generation fixed by `(r_n, ε_n)` before the
/// closure equation is solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intermediates {
    pub g_prime: LogGap,
    pub g_hat: LogGap,
    pub g_star: LogGap,
    pub r_cap: LogValue,
    pub m_cap: LogValue,
    /// `u(r̂_n) = ĝ_n + log C`.
    pub u_hat: f64,
}

pub fn derive_intermediates(
    g_n: LogGap,
    eps_n: f64,
    params: &ScaffoldParams,
) -> Result<Intermediates, ScaffoldError> {
    let ScaffoldParams { p1, p2, p, log_c, .. } = *params;
    if eps_n.abs() >= (p2 - p1) / 2.0 {
        return Err(ScaffoldError::Params(format!(
            "|eps_n| = {} must be below (p2-p1)/2",
            eps_n.abs()
        )));
    }
    let u = g_n.u(log_c);
    let u_prime = (p2 + eps_n) / p1 * u;
    let g_prime = u_prime - log_c;
    let g_hat = if p == p2 { g_prime } else { p / p2 * g_prime };
    let u_hat = g_hat + log_c;
    if u_hat <= 1.0 {
        return Err(ScaffoldError::Ordering {
            generation: 0,
            detail: format!("u(r̂) = {u_hat} must exceed 1"),
        });
    }
    let g_star = g_hat - (-1.0 / u_hat).ln_1p();
    if !(g_n.g() < g_prime && g_prime <= g_hat && g_hat < g_star) {
        return Err(ScaffoldError::Ordering {
            generation: 0,
            detail: format!(
                "g_n={}, g'={g_prime}, ĝ={g_hat}, g*={g_star}",
                g_n.g()
            ),
        });
    }
    let r_cap = LogValue::from_log((p2 + eps_n).ln() + g_n.log_r() + g_n.g());
    let m_cap = LogValue::from_log((p2 - p1).ln() + 2.0 * g_hat + 2.0 * u_hat.ln());
    Ok(Intermediates {
        g_prime: LogGap::new(g_prime)?,
        g_hat: LogGap::new(g_hat)?,
        g_star: LogGap::new(g_star)?,
        r_cap,
        m_cap,
        u_hat,
    })
}

/// Everything needed to evaluate both sides of the closure equation for
/// one generation.
#[derive(Debug, Clone, Copy)]
pub struct ClosureState {
    pub p1: f64,
    pub p2: f64,
    pub log_c: f64,
    pub g_n: LogGap,
    pub eps_n: f64,
    pub mid: Intermediates,
}

impl ClosureState {
    pub fn new(g_n: LogGap, eps_n: f64, params: &ScaffoldParams) -> Result<Self, ScaffoldError> {
        Ok(ClosureState {
            p1: params.p1,
            p2: params.p2,
            log_c: params.log_c,
            g_n,
            eps_n,
            mid: derive_intermediates(g_n, eps_n, params)?,
        })
    }

    /// `R_n log(r/r_n)`, stable for any separation of `g` and `g_n`.
    pub fn r_log_term(&self, g: f64) -> f64 {
        let gn = self.g_n.g();
        let one_minus = -(gn - g).exp_m1(); // 1 - δ/δ_n
        let dn = (-gn).exp();
        let rn = -(-gn).exp_m1();
        let x = dn * one_minus / rn;
        (self.p2 + self.eps_n) * log1p_ratio(x) * one_minus
    }

    /// `M_n ∫_{r̂}^{b} log(r/t) dt` with `b` and `r` given as log-gaps.
    pub fn m_int_term(&self, g_upper: f64, g: f64) -> f64 {
        let uh = self.mid.u_hat;
        (self.p2 - self.p1) * uh * uh * int_log_ratio_scaled(self.mid.g_hat.g(), g_upper, g)
    }

    /// Both sides `(g_L, g_R)` of the combined closure equation at `g`.
    pub fn residuals(&self, g: f64) -> (f64, f64) {
        let gh = self.mid.g_hat.g();
        let gp = self.mid.g_prime.g();
        let gn = self.g_n.g();
        let uh = self.mid.u_hat;
        let r = -(-g).exp_m1();
        let rn = -(-gn).exp_m1();
        // A e^{-ĝ}
        let a_scaled = (self.p2 + self.eps_n) * rn * (gn - gh).exp() + (self.p2 - self.p1) * uh
            - self.p1 * r * (gp - gh).exp();
        let gl = a_scaled * (gh - g).exp() * (g + self.log_c) / r;
        let gr = self.r_log_term(g) + self.m_int_term(self.mid.g_star.g(), g)
            + self.p1 * (gp - g).exp_m1();
        (gl, gr)
    }

    /// Bracket ends in `s = log((1-r̂)/(1-r))`.
    pub fn bracket(&self, a: f64, b: f64) -> (f64, f64) {
        let uh = self.mid.u_hat;
        ((uh.sqrt() / a).ln(), (uh * uh / b).ln())
    }
}

pub fn closure_residuals(g: LogGap, state: &ClosureState) -> (f64, f64) {
    state.residuals(g.g())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureSolution {
    pub g_dprime: LogGap,
    pub eps_next: f64,
    /// `ε_{n+1}` recomputed from the left side `g_L` of the closure equation.
    pub eps_left: f64,
    /// `|ε_{n+1} - ε_left| / |ε_{n+1} - (p1 - p2)|`: disagreement of the two
    /// sides, which solve the same equation.
    pub residual: f64,
    pub s_root: f64,
    pub f_alpha: f64,
    pub f_beta: f64,
}

pub fn solve_closure(
    state: &ClosureState,
    params: &ScaffoldParams,
    generation: usize,
) -> Result<ClosureSolution, ScaffoldError> {
    let gh = state.mid.g_hat.g();
    let (sa, sb) = state.bracket(params.a, params.b);
    let f = |s: f64| {
        let (l, r) = state.residuals(gh + s);
        l - r
    };
    let fa = f(sa);
    let fb = f(sb);
    if !(fa > 0.0) {
        return Err(ScaffoldError::Bracket {
            generation,
            side: "alpha",
            constant: 'a',
            how: "small",
            value: fa,
        });
    }
    if !(fb < 0.0) {
        return Err(ScaffoldError::Bracket {
            generation,
            side: "beta",
            constant: 'b',
            how: "large",
            value: fb,
        });
    }
    let s = find_root(f, sa, sb, 1e-15)?;
    let g2 = gh + s;
    let (gl, gr) = state.residuals(g2);
    let u2 = g2 + state.log_c;
    let dp = state.p2 - state.p1;
    let eps_next = gr / u2 - dp;
    let eps_left = gl / u2 - dp;
    let residual = (eps_next - eps_left).abs() / (eps_next + dp).abs();
    let half = dp / 2.0;
    if eps_next.abs() >= half {
        return Err(ScaffoldError::EpsRange {
            generation,
            eps: eps_next,
            half,
        });
    }
    Ok(ClosureSolution {
        g_dprime: LogGap::new(g2)?,
        eps_next,
        eps_left,
        residual,
        s_root: s,
        f_alpha: fa,
        f_beta: fb,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationDiagnostics {
    pub closure_residual: f64,
    /// `(1 - r'')·log(1/(1-r̂))/(1 - r̂)`.
    pub ratio_log: f64,
    /// `(1 - r'')·u(r̂)/(1 - r̂)`.
    pub ratio_u: f64,
    pub s_root: f64,
    pub f_alpha: f64,
    pub f_beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub n: usize,
    pub g_n: LogGap,
    pub g_prime: LogGap,
    pub g_hat: LogGap,
    pub g_star: LogGap,
    pub g_dprime: LogGap,
    pub r_cap: LogValue,
    pub m_cap: LogValue,
    pub eps_n: f64,
    pub eps_next: f64,
    pub u_hat: f64,
    pub diagnostics: GenerationDiagnostics,
}

impl Generation {
    pub fn closure_state(&self, params: &ScaffoldParams) -> ClosureState {
        ClosureState {
            p1: params.p1,
            p2: params.p2,
            log_c: params.log_c,
            g_n: self.g_n,
            eps_n: self.eps_n,
            mid: Intermediates {
                g_prime: self.g_prime,
                g_hat: self.g_hat,
                g_star: self.g_star,
                r_cap: self.r_cap,
                m_cap: self.m_cap,
                u_hat: self.u_hat,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrregularScaffold {
    pub params: ScaffoldParams,
    /// `r_0'' = 0`.
    pub g_dprime0: LogGap,
    /// `ε_1 = 0`.
    pub eps1: f64,
    pub generations: Vec<Generation>,
    /// Seed of the next (unbuilt) generation.
    pub g_next: LogGap,
    pub eps_next: f64,
    /// How many times `C` was multiplied by 10.
    pub retries: u32,
}

impl IrregularScaffold {
    /// `n(g, {r_n})`: number of `r_n` with `g(r_n) ≤ g`.
    pub fn radius_count(&self, g: LogGap) -> usize {
        self.generations.iter().filter(|gen| gen.g_n <= g).count()
            + usize::from(self.g_next <= g)
    }

    /// Upper end of the range on which the profile is defined.
    pub fn g_max(&self) -> LogGap {
        self.g_next
    }
}

/// Maximum number of times `C` is multiplied by 10 on failure.
pub const MAX_RETRIES: u32 = 8;

pub fn build_scaffold(params: &ScaffoldParams, n: usize) -> Result<IrregularScaffold, ScaffoldError> {
    if n == 0 {
        return Err(ScaffoldError::Params("need at least one generation".into()));
    }
    params.validate()?;
    let mut last = None;
    for attempt in 0..=MAX_RETRIES {
        let p = if attempt == 0 {
            params.clone()
        } else {
            params.bumped(attempt)
        };
        match build_once(&p, n) {
            Ok(mut s) => {
                s.retries = attempt;
                return Ok(s);
            }
            Err(e @ (ScaffoldError::Params(_) | ScaffoldError::Numerics(_))) if attempt == 0 => {
                return Err(e)
            }
            Err(e) => last = Some(e),
        }
    }
    Err(ScaffoldError::RetriesExhausted {
        retries: MAX_RETRIES,
        last: Box::new(last.expect("at least one attempt")),
    })
}

fn build_once(params: &ScaffoldParams, n: usize) -> Result<IrregularScaffold, ScaffoldError> {
    params.validate()?;
    let mut gens = Vec::with_capacity(n);
    let mut g = LogGap::new(params.g1)?;
    let mut eps = 0.0;
    let mut prev_dprime = 0.0;
    for idx in 1..=n {
        let state = ClosureState::new(g, eps, params).map_err(|e| with_generation(e, idx))?;
        let sol = solve_closure(&state, params, idx)?;
        let m = state.mid;
        let gd = sol.g_dprime.g();
        let ordered = prev_dprime < g.g()
            && g.g() < m.g_prime.g()
            && m.g_prime <= m.g_hat
            && m.g_hat < m.g_star
            && m.g_star.g() < gd;
        if !ordered {
            return Err(ScaffoldError::Ordering {
                generation: idx,
                detail: format!(
                    "r''_(n-1)={prev_dprime}, r_n={}, r'={}, r̂={}, r*={}, r''={gd}",
                    g.g(),
                    m.g_prime.g(),
                    m.g_hat.g(),
                    m.g_star.g()
                ),
            });
        }
        let gh = m.g_hat.g();
        let diagnostics = GenerationDiagnostics {
            closure_residual: sol.residual,
            ratio_log: (gh - gd).exp() * gh,
            ratio_u: (gh - gd).exp() * m.u_hat,
            s_root: sol.s_root,
            f_alpha: sol.f_alpha,
            f_beta: sol.f_beta,
        };
        gens.push(Generation {
            n: idx,
            g_n: g,
            g_prime: m.g_prime,
            g_hat: m.g_hat,
            g_star: m.g_star,
            g_dprime: sol.g_dprime,
            r_cap: m.r_cap,
            m_cap: m.m_cap,
            eps_n: eps,
            eps_next: sol.eps_next,
            u_hat: m.u_hat,
            diagnostics,
        });
        prev_dprime = gd;
        g = LogGap::new(gd + params.eta.eta(idx).ln())?;
        eps = sol.eps_next;
    }
    Ok(IrregularScaffold {
        params: params.clone(),
        g_dprime0: LogGap::ZERO,
        eps1: 0.0,
        generations: gens,
        g_next: g,
        eps_next: eps,
        retries: 0,
    })
}

fn with_generation(e: ScaffoldError, idx: usize) -> ScaffoldError {
    match e {
        ScaffoldError::Ordering { detail, .. } => ScaffoldError::Ordering {
            generation: idx,
            detail,
        },
        other => other,
    }
}
