//! Wiman–Valiron quantities for sparse power series with nonnegative
//! coefficients: maximum term, central index, `K(r,f)`, and the series
//! built from prescribed tie radii.
//!
//! Exponents such as `n_k ~ e^{e^k}` and `log a_n ~ -e^{σ g}` do not fit in
//! doubles, so counts are [`ExtCount`]s and `log a_n`, `log μ` are themselves
//! [`LogValue`]s. Term ratios are never formed by subtracting two huge
//! logarithms: `log(t_m/t_k)` is the sum of `Δn_j (log r - log c_j)` over the
//! tie radii `c_j` in between, each factor evaluated in log-gap form.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{find_root, LogGap, LogValue, NumericsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WimanError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("delta = {delta} violates feq4: need delta <= {critical}")]
    Feq4 { delta: f64, critical: f64 },
    #[error("delta = {delta} violates the smallness bound delta < exp(-1/(sigma(1-q))) = {bound}")]
    DeltaSmall { delta: f64, bound: f64 },
    #[error("tie radii are not increasing; operation needs a series built from tie radii")]
    NotMonotone,
    #[error("samples not convex: slope drops from {prev} to {next} at index {index}")]
    NotConvex { index: usize, prev: f64, next: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Integers stored exactly while small, as `log n` beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExtCount {
    Exact { n: u64 },
    Log { log_n: f64 },
}

/// Counts below this stay exact.
pub const EXACT_LIMIT: u64 = 1 << 62;

impl ExtCount {
    pub fn exact(n: u64) -> Self {
        ExtCount::Exact { n }
    }

    /// `floor(e^x) + 1`. Exact only while `e^x < 2^53`, where the floor of a
    /// double is still the floor of the real number up to rounding of `x`.
    pub fn floor_exp_plus_one(x: f64) -> Self {
        if x < 53.0 * std::f64::consts::LN_2 {
            ExtCount::exact(x.exp().floor() as u64 + 1)
        } else {
            ExtCount::Log {
                log_n: x + (-x).exp().ln_1p(),
            }
        }
    }

    pub fn ln(self) -> f64 {
        match self {
            ExtCount::Exact { n } => (n as f64).ln(),
            ExtCount::Log { log_n } => log_n,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, ExtCount::Exact { .. })
    }

    pub fn as_exact(self) -> Option<u64> {
        match self {
            ExtCount::Exact { n } => Some(n),
            ExtCount::Log { .. } => None,
        }
    }

    pub fn to_log_value(self) -> LogValue {
        match self {
            ExtCount::Exact { n: 0 } => LogValue::ZERO,
            _ => LogValue::from_log(self.ln()),
        }
    }

    /// Signed `self - other`.
    pub fn minus(self, other: ExtCount) -> LogValue {
        match (self, other) {
            (ExtCount::Exact { n: a }, ExtCount::Exact { n: b }) => {
                LogValue::from_f64(a as f64 - b as f64)
            }
            _ => self.to_log_value() - other.to_log_value(),
        }
    }

    /// `log(n(n-1)···(n-k+1))`, or `None` when `k > n`.
    pub fn log_falling(self, k: u32) -> Option<f64> {
        match self {
            ExtCount::Exact { n } => {
                if (k as u64) > n {
                    return None;
                }
                Some((0..k as u64).map(|i| ((n - i) as f64).ln()).sum())
            }
            ExtCount::Log { log_n } => Some(
                (0..k)
                    .map(|i| log_n + (-(i as f64) * (-log_n).exp()).ln_1p())
                    .sum(),
            ),
        }
    }

    pub fn cmp_count(&self, other: &ExtCount) -> Ordering {
        match (self, other) {
            (ExtCount::Exact { n: a }, ExtCount::Exact { n: b }) => a.cmp(b),
            _ => self.ln().total_cmp(&other.ln()),
        }
    }
}

impl From<u64> for ExtCount {
    fn from(n: u64) -> Self {
        ExtCount::exact(n)
    }
}

/// `log r` at log-gap `g` as a negative [`LogValue`].
fn log_r_value(g: LogGap) -> LogValue {
    LogValue::signed(-1, g.log_neg_log_r())
}

fn gap_min(a: LogGap, b: LogGap) -> LogGap {
    if b < a {
        b
    } else {
        a
    }
}

/// Log-gap of the radius `c` with `log c = -e^{L}`.
fn gap_from_neg_log(l: f64) -> Option<LogGap> {
    let x = l.exp();
    let g = if l > -30.0 { -(-(-x).exp_m1()).ln() } else { -l + 0.5 * x };
    LogGap::new(g).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseTerm {
    pub n: ExtCount,
    /// `log a_n`.
    pub log_a: LogValue,
}

/// Nonnegative-coefficient series `Σ a_{n_k} z^{n_k}`.
///
/// `log_c[j]` is the radius at which terms `j` and `j+1` tie,
/// `log c_j = (log a_j - log a_{j+1})/(n_{j+1} - n_j)`. When the series is
/// built from prescribed radii these are stored exactly (`tie_g`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSeries {
    pub terms: Vec<SparseTerm>,
    pub log_c: Vec<LogValue>,
    pub tie_g: Option<Vec<LogGap>>,
}

impl SparseSeries {
    /// Series from explicit terms; tie radii derived from the coefficients.
    pub fn new(terms: Vec<SparseTerm>) -> Result<Self, WimanError> {
        if terms.is_empty() {
            return Err(WimanError::Invalid("series needs at least one term".into()));
        }
        for w in terms.windows(2) {
            if w[1].n.cmp_count(&w[0].n) != Ordering::Greater {
                return Err(WimanError::Invalid("indices must increase strictly".into()));
            }
        }
        let log_c = terms
            .windows(2)
            .map(|w| {
                let da = w[0].log_a - w[1].log_a;
                da / w[1].n.minus(w[0].n)
            })
            .collect();
        Ok(SparseSeries {
            terms,
            log_c,
            tie_g: None,
        })
    }

    /// `Δn_j (log r - log c_j)`: `log(t_{j+1}/t_j)` at radius `g`.
    fn step(&self, j: usize, lr: LogValue) -> LogValue {
        let dn = self.terms[j + 1].n.minus(self.terms[j].n);
        dn * (lr - self.log_c[j])
    }

    fn ties_increasing(&self) -> bool {
        self.log_c
            .windows(2)
            .all(|w| w[1].cmp_value(&w[0]) == Ordering::Greater)
    }

    /// Index of the maximal term (largest index on ties).
    pub fn central_term(&self, g: LogGap) -> usize {
        let lr = log_r_value(g);
        let mut best = 0;
        // log(t_j / t_best), accumulated from the current best only
        let mut since = LogValue::ZERO;
        for j in 0..self.terms.len() - 1 {
            since = since + self.step(j, lr);
            if since.sign >= 0 {
                best = j + 1;
                since = LogValue::ZERO;
            }
        }
        best
    }

    /// `log(t_m / t_ν)` for every term.
    fn relative_logs(&self, g: LogGap, nu: usize) -> Vec<LogValue> {
        let lr = log_r_value(g);
        let mut out = vec![LogValue::ZERO; self.terms.len()];
        let mut acc = LogValue::ZERO;
        for j in nu..self.terms.len() - 1 {
            acc = acc + self.step(j, lr);
            out[j + 1] = acc;
        }
        acc = LogValue::ZERO;
        for j in (0..nu).rev() {
            acc = acc - self.step(j, lr);
            out[j] = acc;
        }
        out
    }

    fn window(&self, g: LogGap) -> Window {
        let nu = self.central_term(g);
        let rel = self.relative_logs(g, nu);
        Window {
            terms: self
                .terms
                .iter()
                .zip(rel)
                .map(|(t, r)| (t.n, r.to_f64()))
                .collect(),
        }
    }

    /// Flm1 closed form: `n_0` below `c_0`, `n_{k+1}` on `[c_k, c_{k+1})`.
    pub fn flm1_closed_form(&self, g: LogGap) -> Option<ExtCount> {
        let ties = self.tie_g.as_ref()?;
        let k = ties.partition_point(|c| *c <= g);
        Some(self.terms[k].n)
    }
}

/// Terms around the central index with `log(t_m/t_ν)` (≤ 0).
struct Window {
    terms: Vec<(ExtCount, f64)>,
}

impl Window {
    fn log_denominator(&self) -> f64 {
        let s: f64 = self.terms.iter().map(|t| t.1.exp()).sum();
        s.ln()
    }

    fn log_k(&self) -> LogValue {
        let num = crate::numerics::lse_sum(
            &self
                .terms
                .iter()
                .map(|(n, r)| n.to_log_value().scale_log(*r))
                .collect::<Vec<_>>(),
        )
        .value;
        num.scale_log(-self.log_denominator())
    }

    fn k_minus(&self, n_ref: ExtCount) -> LogValue {
        let num = crate::numerics::lse_sum(
            &self
                .terms
                .iter()
                .map(|(n, r)| n.minus(n_ref).scale_log(*r))
                .collect::<Vec<_>>(),
        )
        .value;
        num.scale_log(-self.log_denominator())
    }

    fn strelitz(&self, k: u32) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let logs: Vec<f64> = self
            .terms
            .iter()
            .filter_map(|(n, r)| n.log_falling(k).map(|l| l + r))
            .collect();
        let num = crate::numerics::log_sum_exp(&logs);
        (num - self.log_denominator() - k as f64 * self.log_k().logmag).exp()
    }
}

/// Anything with a maximum term, central index and `K(r,f)` along `[0,1)`.
pub trait GrowthSeries {
    fn central_index(&self, g: LogGap) -> ExtCount;
    fn log_max_term(&self, g: LogGap) -> LogValue;
    fn k_indicator(&self, g: LogGap) -> LogValue;
    /// `K(r,f) - n` as a signed value.
    fn k_minus(&self, g: LogGap, n: ExtCount) -> LogValue;
    /// `f^{(n)}(r) rⁿ / (K(r)ⁿ f(r))`.
    fn strelitz_ratio(&self, n: u32, g: LogGap) -> f64;
}

impl GrowthSeries for SparseSeries {
    fn central_index(&self, g: LogGap) -> ExtCount {
        self.terms[self.central_term(g)].n
    }

    fn log_max_term(&self, g: LogGap) -> LogValue {
        let lr = log_r_value(g);
        let nu = self.central_term(g);
        let mut acc = self.terms[0].log_a + self.terms[0].n.to_log_value() * lr;
        for j in 0..nu {
            acc = acc + self.step(j, lr);
        }
        acc
    }

    fn k_indicator(&self, g: LogGap) -> LogValue {
        self.window(g).log_k()
    }

    fn k_minus(&self, g: LogGap, n: ExtCount) -> LogValue {
        self.window(g).k_minus(n)
    }

    fn strelitz_ratio(&self, n: u32, g: LogGap) -> f64 {
        self.window(g).strelitz(n)
    }
}

pub fn central_index<S: GrowthSeries>(s: &S, g: LogGap) -> ExtCount {
    s.central_index(g)
}

pub fn log_max_term<S: GrowthSeries>(s: &S, g: LogGap) -> LogValue {
    s.log_max_term(g)
}

pub fn k_indicator<S: GrowthSeries>(s: &S, g: LogGap) -> LogValue {
    s.k_indicator(g)
}

pub fn strelitz_check<S: GrowthSeries>(s: &S, n: u32, g: LogGap) -> f64 {
    s.strelitz_ratio(n, g)
}

/// `log b - log a` for radii at log-gaps `g_a ≤ g_b`, as a nonnegative value.
fn log_ratio(ga: LogGap, gb: LogGap) -> LogValue {
    log_r_value(gb) - log_r_value(ga)
}

/// `∫ ν(t)/t dt` from `r(g0)` to `r(g)`, summed exactly over the flm1
/// branches. Equals `log μ(g) - log μ(g0)` without subtracting the two.
pub fn log_mu_increment(s: &SparseSeries, g0: LogGap, g: LogGap) -> Result<LogValue, WimanError> {
    if !(g0 < g) {
        return Err(WimanError::Invalid(format!("need g0 < g, got {} and {}", g0.g(), g.g())));
    }
    if !s.ties_increasing() {
        return Err(WimanError::NotMonotone);
    }
    // breakpoints in log-gap form; ties at or beyond r = 1 never bind
    let ties: Vec<Option<LogGap>> = match &s.tie_g {
        Some(t) => t.iter().map(|&g| Some(g)).collect(),
        None => s
            .log_c
            .iter()
            .map(|c| if c.sign < 0 { gap_from_neg_log(c.logmag) } else { None })
            .collect(),
    };
    let mut pieces = Vec::new();
    let mut lo = g0;
    for (k, term) in s.terms.iter().enumerate() {
        let hi = match ties.get(k).copied().flatten() {
            Some(c) => gap_min(c, g),
            None => g,
        };
        if let Some(Some(c)) = k.checked_sub(1).map(|j| ties[j]) {
            if c > lo {
                lo = gap_min(c, g);
            }
        }
        if hi > lo {
            pieces.push(term.n.to_log_value() * log_ratio(lo, hi));
        }
        if hi >= g {
            break;
        }
    }
    Ok(crate::numerics::lse_sum(&pieces).value)
}

/// `|log μ(g) - log μ(g0) - ∫ ν(t)/t dt| / max(1, |log μ(g)|)`.
pub fn twostars_residual(s: &SparseSeries, g0: LogGap, g: LogGap) -> Result<f64, WimanError> {
    let integral = log_mu_increment(s, g0, g)?;
    let lhs = s.log_max_term(g) - s.log_max_term(g0);
    let diff = lhs - integral;
    let scale = s.log_max_term(g).abs().logmag.max(0.0);
    Ok(diff.abs().scale_log(-scale).to_f64())
}

/// Series with prescribed tie radii, from indices `n_0 < n_1 < ...` and tie radii
/// `c_0 < c_1 < ...` (given as log-gaps): `log a_{n_{k+1}} = log a_{n_0} +
/// Σ_{j≤k} (n_j - n_{j+1}) log c_j`.
pub fn build_flm1(n_seq: &[ExtCount], c_seq: &[LogGap], log_a0: f64) -> Result<SparseSeries, WimanError> {
    if n_seq.is_empty() {
        return Err(WimanError::Invalid("need at least n_0".into()));
    }
    if c_seq.len() + 1 < n_seq.len() {
        return Err(WimanError::Invalid(format!(
            "{} indices need {} tie radii, got {}",
            n_seq.len(),
            n_seq.len() - 1,
            c_seq.len()
        )));
    }
    for (i, w) in n_seq.windows(2).enumerate() {
        if w[1].cmp_count(&w[0]) != Ordering::Greater {
            return Err(WimanError::Invalid(format!("n_seq not increasing at {}", i + 1)));
        }
    }
    let c_seq = &c_seq[..n_seq.len() - 1];
    for (i, w) in c_seq.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(WimanError::Invalid(format!("c_seq not increasing at {}", i + 1)));
        }
    }
    if c_seq.first().map_or(false, |c| c.g() <= 0.0) {
        return Err(WimanError::Invalid("c_0 must be positive".into()));
    }
    let log_c: Vec<LogValue> = c_seq.iter().map(|&c| log_r_value(c)).collect();
    let mut terms = Vec::with_capacity(n_seq.len());
    let mut log_a = LogValue::from_f64(log_a0);
    terms.push(SparseTerm {
        n: n_seq[0],
        log_a,
    });
    for k in 0..n_seq.len() - 1 {
        // (n_j - n_{j+1}) log c_j is a product of two negatives
        let inc = n_seq[k + 1].minus(n_seq[k]) * (-log_c[k]);
        log_a = log_a + inc;
        terms.push(SparseTerm {
            n: n_seq[k + 1],
            log_a,
        });
    }
    Ok(SparseSeries {
        terms,
        log_c,
        tie_g: Some(c_seq.to_vec()),
    })
}

/// First sparse construction (variant a): `n_k = k`,
/// `c_k = 1 - (σ/(k+σ+1))^{1/(σ+1)}`, `a_0 = 1`. Terms are generated on
/// demand; central indices reach `e^{20}` at `g = 8`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop43a {
    pub sigma: f64,
}

/// Terms whose ratio to the maximal one is below `e^{-WINDOW_LOG}` are
/// dropped from windowed sums.
const WINDOW_LOG: f64 = 40.0;

impl Prop43a {
    pub fn new(sigma: f64) -> Result<Self, WimanError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(WimanError::Invalid(format!("need 0 < sigma < inf, got {sigma}")));
        }
        Ok(Prop43a { sigma })
    }

    /// Log-gap of `c_k`.
    pub fn tie(&self, k: u64) -> LogGap {
        let s = self.sigma;
        LogGap::new(((k as f64 + s + 1.0).ln() - s.ln()) / (s + 1.0)).expect("positive gap")
    }

    /// `ν(r)` in closed form: `floor(σ(1-r)^{-(σ+1)} - σ - 1) + 1`, or 0
    /// below `c_0`.
    pub fn nu_closed_form(&self, g: LogGap) -> u64 {
        let s = self.sigma;
        let x = s * ((s + 1.0) * g.g()).exp() - s - 1.0;
        if x < 0.0 {
            0
        } else {
            x.floor() as u64 + 1
        }
    }

    /// Central index by bisection on the tie radii.
    fn nu_search(&self, g: LogGap) -> u64 {
        if self.tie(0) > g {
            return 0;
        }
        // largest k with c_k ≤ r, then ν = k + 1
        let mut lo = 0u64;
        let mut hi = 1u64;
        while self.tie(hi) <= g {
            lo = hi;
            hi *= 2;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.tie(mid) <= g {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo + 1
    }

    /// `log r - log c_j`.
    fn d(&self, lr: LogValue, j: u64) -> f64 {
        (lr - log_r_value(self.tie(j))).to_f64()
    }

    /// Stream `(n, log(t_n/t_ν))` over the window around `ν`.
    fn for_window(&self, g: LogGap, mut f: impl FnMut(u64, f64)) -> u64 {
        let nu = self.nu_search(g);
        let lr = log_r_value(g);
        f(nu, 0.0);
        let mut acc = 0.0;
        let mut m = nu;
        loop {
            acc += self.d(lr, m);
            m += 1;
            if acc < -WINDOW_LOG {
                break;
            }
            f(m, acc);
        }
        acc = 0.0;
        let mut m = nu;
        while m > 0 {
            acc -= self.d(lr, m - 1);
            m -= 1;
            if acc < -WINDOW_LOG {
                break;
            }
            f(m, acc);
        }
        nu
    }

    /// Coefficient logs `log a_0..log a_k` by direct accumulation.
    pub fn log_coefficients(&self, k: u64) -> Vec<f64> {
        let mut out = Vec::with_capacity(k as usize + 1);
        let mut acc = 0.0;
        out.push(acc);
        for j in 0..k {
            acc -= self.tie(j).log_r();
            out.push(acc);
        }
        out
    }

    /// The first `k+1` terms as an explicit series.
    pub fn to_sparse(&self, k: u64) -> SparseSeries {
        let n: Vec<ExtCount> = (0..=k).map(ExtCount::exact).collect();
        let c: Vec<LogGap> = (0..k).map(|j| self.tie(j)).collect();
        build_flm1(&n, &c, 0.0).expect("valid by construction")
    }
}

impl GrowthSeries for Prop43a {
    fn central_index(&self, g: LogGap) -> ExtCount {
        ExtCount::exact(self.nu_search(g))
    }

    fn log_max_term(&self, g: LogGap) -> LogValue {
        let nu = self.nu_search(g);
        let lr = log_r_value(g);
        let mut s = 0.0;
        let mut comp = 0.0;
        for j in 0..nu {
            // Neumaier summation of the positive increments
            let x = self.d(lr, j);
            let t = s + x;
            comp += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
            s = t;
        }
        LogValue::from_f64(s + comp)
    }

    fn k_indicator(&self, g: LogGap) -> LogValue {
        let (mut num, mut den) = (0.0, 0.0);
        self.for_window(g, |n, r| {
            let e = r.exp();
            num += n as f64 * e;
            den += e;
        });
        LogValue::from_f64(num / den)
    }

    fn k_minus(&self, g: LogGap, n_ref: ExtCount) -> LogValue {
        let nr = n_ref.as_exact().map(|n| n as f64).unwrap_or(f64::INFINITY);
        let (mut num, mut den) = (0.0, 0.0);
        self.for_window(g, |n, r| {
            let e = r.exp();
            num += (n as f64 - nr) * e;
            den += e;
        });
        LogValue::from_f64(num / den)
    }

    fn strelitz_ratio(&self, k: u32, g: LogGap) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let (mut num, mut den, mut first) = (0.0, 0.0, 0.0);
        let nu = self.nu_search(g) as f64;
        // scale n-powers by ν to keep sums in range
        self.for_window(g, |n, r| {
            let e = r.exp();
            den += e;
            first += n as f64 / nu * e;
            if let Some(lf) = ExtCount::exact(n).log_falling(k) {
                num += (lf - k as f64 * nu.ln() + r).exp();
            }
        });
        let kk = first / den;
        num / den / kk.powi(k as i32)
    }
}

/// Parameters of the second sparse construction (variant b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop43bParams {
    pub lambda: f64,
    pub sigma: f64,
    pub delta: f64,
    /// `q = λ/σ`.
    pub q: f64,
}

/// Largest `x*` with `1/x^{σ+1} + 1 ≤ 1/x^{(σ+1)/q}` on `(0, x*]`.
pub fn feq4_critical(sigma: f64, q: f64) -> Result<f64, WimanError> {
    // with y = x^{-(σ+1)}: y + 1 ≤ y^{1/q}, the root of y^{1/q} - y - 1
    let f = |ly: f64| (ly / q).exp() - ly.exp() - 1.0;
    let mut hi = 1.0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
    }
    let ly = find_root(f, 0.0, hi, 1e-15)?;
    Ok((-ly / (sigma + 1.0)).exp())
}

/// `exp(-1/(σ(1-q)))`.
pub fn delta_smallness_bound(sigma: f64, q: f64) -> f64 {
    (-1.0 / (sigma * (1.0 - q))).exp()
}

/// Default `δ`: `0.9 × min(feq4 critical value, smallness bound)`.
pub fn default_delta(lambda: f64, sigma: f64) -> Result<f64, WimanError> {
    let q = lambda / sigma;
    Ok(0.9 * feq4_critical(sigma, q)?.min(delta_smallness_bound(sigma, q)))
}

/// Second sparse construction (variant b): `c_k = 1 - δ^{q^{-k}}` stored as
/// `g_k = q^{-k} log(1/δ)`, `n_0 = 0`,
/// `n_{k+1} = floor(δ^{-(σ+1)/q^k}) + 1`, for `k = 0..=k_max`.
pub fn build_prop43b(
    lambda: f64,
    sigma: f64,
    delta: Option<f64>,
    k_max: usize,
) -> Result<(SparseSeries, Prop43bParams), WimanError> {
    if !(lambda > 0.0 && lambda < sigma && sigma.is_finite()) {
        return Err(WimanError::Invalid(format!(
            "need 0 < lambda < sigma < inf, got lambda={lambda}, sigma={sigma}"
        )));
    }
    let q = lambda / sigma;
    let delta = match delta {
        Some(d) => d,
        None => default_delta(lambda, sigma)?,
    };
    if !(delta > 0.0 && delta < 1.0) {
        return Err(WimanError::Invalid(format!("need 0 < delta < 1, got {delta}")));
    }
    let critical = feq4_critical(sigma, q)?;
    if delta > critical {
        return Err(WimanError::Feq4 { delta, critical });
    }
    let bound = delta_smallness_bound(sigma, q);
    if delta >= bound {
        return Err(WimanError::DeltaSmall { delta, bound });
    }
    let l = -delta.ln();
    let ties: Vec<LogGap> = (0..=k_max)
        .map(|k| LogGap::new(l * q.powi(-(k as i32))))
        .collect::<Result<_, _>>()?;
    let mut n = vec![ExtCount::exact(0)];
    n.extend(ties.iter().map(|g| ExtCount::floor_exp_plus_one((sigma + 1.0) * g.g())));
    let series = build_flm1(&n, &ties, 0.0)?;
    Ok((
        series,
        Prop43bParams {
            lambda,
            sigma,
            delta,
            q,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prop43Variant {
    A,
    B,
}

/// Either construction as an explicit series with `k_max + 1` ties.
/// `lambda` and `delta` are ignored for (a).
pub fn build_prop43(
    variant: Prop43Variant,
    lambda: f64,
    sigma: f64,
    delta: Option<f64>,
    k_max: usize,
) -> Result<SparseSeries, WimanError> {
    match variant {
        Prop43Variant::A => Ok(Prop43a::new(sigma)?.to_sparse(k_max as u64 + 1)),
        Prop43Variant::B => build_prop43b(lambda, sigma, delta, k_max).map(|(s, _)| s),
    }
}

/// `h(x) = log M(e^x)` or `log μ(e^x)` sampled on a log-gap grid
/// (`x = log r < 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexSamples {
    pub g: Vec<f64>,
    pub h: Vec<LogValue>,
    /// Optional exact increments `h_{i+1} - h_i`. Where `h` saturates at
    /// double precision these keep the forward differences meaningful.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dh: Option<Vec<LogValue>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexIndicators {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_prime: f64,
    pub beta_prime: f64,
    /// Log-gap range the tail extrema were taken over.
    pub window: (f64, f64),
}

/// Relative slack allowed in the convexity check.
const CONVEX_TOL: f64 = 1e-9;

/// Tail `inf`/`sup` of `log h/log(1/|x|)` and of the same for the forward
/// difference `h'₊`, over the last `tail` fraction of the samples.
pub fn convex_indicators(s: &ConvexSamples, tail: f64) -> Result<ConvexIndicators, WimanError> {
    let n = s.g.len();
    if n != s.h.len() {
        return Err(WimanError::Invalid("g and h lengths differ".into()));
    }
    if n < 32 {
        return Err(WimanError::Invalid(format!("need at least 32 samples, got {n}")));
    }
    if s.g.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(WimanError::Invalid("g must increase".into()));
    }
    if s.h.iter().any(|h| !h.is_positive()) {
        return Err(WimanError::Invalid("h must be positive".into()));
    }
    let gaps: Vec<LogGap> = s.g.iter().map(|&g| LogGap::new(g)).collect::<Result<_, _>>()?;
    // |x| = -log r = e^{L}
    let big_l: Vec<f64> = gaps.iter().map(|g| g.log_neg_log_r()).collect();
    if big_l[0] - big_l[n - 1] < 1000f64.ln() {
        return Err(WimanError::Invalid("samples must span 3 decades of |x|".into()));
    }
    if s.dh.as_ref().map_or(false, |d| d.len() + 1 != n) {
        return Err(WimanError::Invalid("dh must have one entry per gap".into()));
    }
    let slopes: Vec<LogValue> = (0..n - 1)
        .map(|i| {
            let dh = match &s.dh {
                Some(d) => d[i],
                None => s.h[i + 1] - s.h[i],
            };
            dh / log_ratio(gaps[i], gaps[i + 1])
        })
        .collect();
    for i in 0..slopes.len() - 1 {
        let (a, b) = (slopes[i], slopes[i + 1]);
        if b.cmp_value(&a.scale_log((1.0 - CONVEX_TOL).ln())) == Ordering::Less {
            return Err(WimanError::NotConvex {
                index: i + 1,
                prev: a.to_f64(),
                next: b.to_f64(),
            });
        }
    }
    let start = ((1.0 - tail.clamp(0.0, 1.0)) * n as f64).floor() as usize;
    let start = start.min(n - 2);
    let ratio = |v: LogValue, i: usize| v.logmag / -big_l[i];
    let mut out = ConvexIndicators {
        alpha: f64::INFINITY,
        beta: f64::NEG_INFINITY,
        alpha_prime: f64::INFINITY,
        beta_prime: f64::NEG_INFINITY,
        window: (s.g[start], s.g[n - 1]),
    };
    for i in start..n {
        let a = ratio(s.h[i], i);
        out.alpha = out.alpha.min(a);
        out.beta = out.beta.max(a);
        if i < n - 1 && slopes[i].is_positive() {
            let b = ratio(slopes[i], i);
            out.alpha_prime = out.alpha_prime.min(b);
            out.beta_prime = out.beta_prime.max(b);
        }
    }
    Ok(out)
}

/// `log μ` samples of a series on increasing log-gaps, with exact
/// increments.
pub fn log_mu_samples(s: &SparseSeries, gs: &[f64]) -> Result<ConvexSamples, WimanError> {
    let gaps: Vec<LogGap> = gs.iter().map(|&g| LogGap::new(g)).collect::<Result<_, _>>()?;
    let h = gaps.iter().map(|&g| s.log_max_term(g)).collect();
    let dh = gaps
        .windows(2)
        .map(|w| log_mu_increment(s, w[0], w[1]))
        .collect::<Result<_, _>>()?;
    Ok(ConvexSamples {
        g: gs.to_vec(),
        h,
        dh: Some(dh),
    })
}
