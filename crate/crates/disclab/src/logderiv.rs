//! Logarithmic-derivative machinery: the `I_α` integral, low-order radial
//! windows and their upper density, zero counting `n`/`N`, the `J`
//! integral, sector crowding `n₁`, and an empirical certificate for
//! `|f^{(k)}/f^{(j)}|^{1/(k-j)} ≤ C (1-r)^{-(2+(λ-λ/σ)⁺+ε)}` on a window set.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{integrate, LogGap, LogValue, NumericsError, Singularity};
use crate::riesz::{kernel_parts, PolarPoint, ZeroCloud};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LogDerivError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// `log⁺M(t)` as a function of the log-gap of `t`, with declared orders.
pub struct LogMModel {
    pub lambda: f64,
    pub sigma: f64,
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl LogMModel {
    pub fn new(lambda: f64, sigma: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        LogMModel {
            lambda,
            sigma,
            f: Box::new(f),
        }
    }

    /// `log⁺M(t) = (1-t)^{-s}`.
    pub fn power(s: f64) -> Self {
        LogMModel::new(s, s, move |g| (s * g).exp())
    }

    pub fn eval(&self, g: f64) -> f64 {
        (self.f)(g)
    }
}

/// `I(R) = (1-R)^{-1/α} (∫₀^R log⁺M(t)(R-t)^{1/α-1} dt + log⁺M(R₀))`.
///
/// With `t = 1 - e^{-u}` the integrand is
/// `M(u) e^{-u} (e^{-u}(1 - e^{u-g_R}))^{1/α-1}` on `[0, g_R]`.
pub fn i_alpha(model: &LogMModel, alpha: f64, r: LogGap, r0: LogGap) -> Result<LogValue, LogDerivError> {
    if !(0.5..1.0).contains(&alpha) {
        return Err(LogDerivError::Invalid(format!("need 1/2 <= alpha < 1, got {alpha}")));
    }
    if !(r0 < r) {
        return Err(LogDerivError::Invalid("need R0 < R".into()));
    }
    let (gr, beta) = (r.g(), 1.0 / alpha - 1.0);
    let integral = integrate(
        |u| {
            let gap = -(u - gr).exp_m1();
            if gap <= 0.0 {
                return 0.0;
            }
            model.eval(u) * (-u).exp() * ((-u).exp() * gap).powf(beta)
        },
        0.0,
        gr,
        Singularity::Upper,
    )?;
    let total = integral + model.eval(r0.g());
    Ok(LogValue::from_f64(total).scale_log(gr / alpha))
}

/// Sorted disjoint log-gap intervals `[g_lo, g_hi]`; `g_hi` may be `∞`
/// (the interval reaches `r = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialWindowSet {
    pub intervals: Vec<(f64, f64)>,
    /// Whether the listed intervals are a truncation of a set accumulating
    /// at `r = 1`. A closed set is taken as is and has density zero.
    pub open_tail: bool,
}

impl RadialWindowSet {
    /// Sorts and merges overlapping intervals.
    pub fn new(mut intervals: Vec<(f64, f64)>, open_tail: bool) -> Result<Self, LogDerivError> {
        for &(a, b) in &intervals {
            if !(a >= 0.0 && b >= a) || a.is_nan() {
                return Err(LogDerivError::Invalid(format!("bad interval [{a}, {b}]")));
            }
        }
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(RadialWindowSet {
            intervals: merged,
            open_tail,
        })
    }

    pub fn contains(&self, g: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= g && g <= b)
    }
}

/// Windows `[g*, g]` with `g*(λ+η) = g(λ+η/2)`, one per `g_n`.
pub fn loworder_windows(lambda: f64, eta: f64, g_n: &[LogGap]) -> Result<RadialWindowSet, LogDerivError> {
    if !(lambda >= 0.0 && eta > 0.0) {
        return Err(LogDerivError::Invalid(format!("need lambda >= 0, eta > 0, got {lambda}, {eta}")));
    }
    let ratio = (lambda + 0.5 * eta) / (lambda + eta);
    RadialWindowSet::new(g_n.iter().map(|g| (g.g() * ratio, g.g())).collect(), true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub density: f64,
    /// Left endpoint (log-gap) where the supremum is attained.
    pub attained_at: Option<f64>,
    /// Set does not accumulate at 1; the density is then zero.
    pub bounded_tail: bool,
}

/// Upper density `limsup_{r→1} m(E∩[r,1))/(1-r)`.
///
/// Inside an interval the ratio decreases and across a gap it increases, so
/// only left endpoints matter. For an open tail the supremum over the listed
/// left endpoints stands in for the limsup.
pub fn upper_density(set: &RadialWindowSet) -> DensityReport {
    if !set.open_tail || set.intervals.is_empty() {
        return DensityReport {
            density: 0.0,
            attained_at: None,
            bounded_tail: true,
        };
    }
    let iv = &set.intervals;
    // S_i = m(E∩[r_i,1))/(1-r_i) by a backward recursion in log-gaps
    let mut s = 0.0;
    let mut best = (f64::NEG_INFINITY, None);
    for i in (0..iv.len()).rev() {
        let (a, b) = iv[i];
        let own = -(-(b - a)).exp_m1();
        let carried = match iv.get(i + 1) {
            Some(next) => (a - next.0).exp() * s,
            None => 0.0,
        };
        s = own + carried;
        if s > best.0 {
            best = (s, Some(a));
        }
    }
    DensityReport {
        density: best.0,
        attained_at: best.1,
        bounded_tail: false,
    }
}

fn delta_of(g: LogGap) -> f64 {
    g.delta()
}

/// `|z - ζ|` from polar data, stable near the boundary.
pub fn polar_distance(z: PolarPoint, w: PolarPoint) -> f64 {
    kernel_parts(delta_of(z.g), delta_of(w.g), z.theta - w.theta).0.sqrt()
}

/// Zeros (indices) within Euclidean distance `h` of `zeta`.
fn zeros_within(cloud: &ZeroCloud, zeta: PolarPoint, h: f64) -> Vec<(usize, f64)> {
    let d = delta_of(zeta.g);
    let g_lo = if d + h >= 1.0 { 0.0 } else { -(d + h).ln() };
    let g_hi = if d > h { -(d - h).ln() } else { f64::INFINITY };
    let r = 1.0 - d;
    let near = cloud.near(g_lo, g_hi, zeta.theta, |s| {
        let rho = -(-s.g_zero).exp_m1();
        let x = h / (2.0 * (r * rho).sqrt());
        if x >= 1.0 || !x.is_finite() {
            PI
        } else {
            2.0 * x.asin() * (1.0 + 1e-12) + 1e-15
        }
    });
    near.into_iter()
        .filter_map(|i| {
            let z = &cloud.zeros[i];
            let dist = polar_distance(PolarPoint::new(z.g, z.theta), zeta);
            (dist <= h).then_some((i, dist))
        })
        .collect()
}

/// `n(ζ,h)` (multiplicity in the closed disc) and
/// `N(ζ,h) = ∫₀^h n(t)/t dt = Σ mult·log(h/|a-ζ|)`.
pub fn zero_counts(cloud: &ZeroCloud, zeta: PolarPoint, h: f64) -> Result<(u64, f64), LogDerivError> {
    if !(h > 0.0 && h < delta_of(zeta.g)) {
        return Err(LogDerivError::Invalid(format!("need 0 < h < 1-|zeta|, got h = {h}")));
    }
    let mut n = 0u64;
    let mut big_n = 0.0;
    for (i, dist) in zeros_within(cloud, zeta, h) {
        let m = cloud.zeros[i].mult;
        n += m as u64;
        big_n += m as f64 * (h / dist).ln();
    }
    Ok((n, big_n))
}

/// `J(z,R) = ∫₀^{2π} N(Re^{iθ}, (1-R)/16)/|Re^{iθ} - z|² dθ`, summed zero
/// by zero over the arc where each zero contributes.
pub fn j_integral(cloud: &ZeroCloud, z: PolarPoint, r: LogGap) -> Result<f64, LogDerivError> {
    let (dr, dz) = (delta_of(r), delta_of(z.g));
    if dr == dz {
        return Err(LogDerivError::Invalid("need |z| != R".into()));
    }
    let h = dr / 16.0;
    let rr = 1.0 - dr;
    let g_lo = -(dr + h).ln();
    let g_hi = -(dr - h).ln();
    let mut total = 0.0;
    for s in &cloud.spans {
        if s.g_zero < g_lo || s.g_zero > g_hi {
            continue;
        }
        for a in &cloud.zeros[s.start..s.end] {
            let da = delta_of(a.g);
            let rho = 1.0 - da;
            let radial = da - dr;
            let x = (h * h - radial * radial) / (4.0 * rr * rho);
            if x <= 0.0 {
                continue;
            }
            let half = 2.0 * x.sqrt().min(1.0).asin();
            let integrand = |t: f64| {
                let d2 = kernel_parts(dr, da, t).0;
                if d2 >= h * h {
                    return 0.0;
                }
                let den = kernel_parts(dr, dz, a.theta + t - z.theta).0;
                0.5 * (h * h / d2).ln() / den
            };
            // log singularity at t = 0 when the zero sits on the circle
            let left = integrate(|u| integrand(-u), 0.0, half, Singularity::Lower)?;
            let right = integrate(integrand, 0.0, half, Singularity::Lower)?;
            total += a.mult as f64 * (left + right);
        }
    }
    Ok(total)
}

/// `n₁(r)`: the most zeros (with multiplicity) in
/// `{r ≤ |a| ≤ (1+r)/2, |arg a - φ| ≤ (π/4)(1-r)}` over all `φ`.
pub fn sector_crowding(cloud: &ZeroCloud, g: LogGap) -> u64 {
    let half = 0.25 * PI * delta_of(g);
    let (g_lo, g_hi) = (g.g(), g.g() + std::f64::consts::LN_2);
    let mut pts: Vec<(f64, u64)> = cloud
        .near(g_lo, g_hi, 0.0, |_| PI)
        .into_iter()
        .map(|i| &cloud.zeros[i])
        .filter(|z| z.g.g() >= g_lo && z.g.g() <= g_hi)
        .map(|z| (z.theta.rem_euclid(TAU), z.mult as u64))
        .collect();
    if pts.is_empty() {
        return 0;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pts.len();
    // unwrap once around the circle for the sweep
    let ext: Vec<(f64, u64)> = pts
        .iter()
        .copied()
        .chain(pts.iter().map(|&(t, m)| (t + TAU, m)))
        .collect();
    let width = 2.0 * half;
    let (mut best, mut acc, mut j) = (0, 0, 0);
    for i in 0..n {
        while j < i + n && ext[j].0 - ext[i].0 <= width {
            acc += ext[j].1;
            j += 1;
        }
        best = best.max(acc);
        acc -= ext[i].1;
    }
    best
}

fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

/// The function whose logarithmic derivatives are certified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FSpec {
    /// `f = exp((1-z)^{-p})`, zero-free.
    ExpPower { p: f64 },
    /// `Π (z - a)^{mult}`, optionally times `exp((1-z)^{-p})`.
    Zeros {
        zeros: Vec<(Complex64, u32)>,
        exp_power: Option<f64>,
    },
    /// `f = exp(Σ c_j z^j)`; constants and `e^z` live here.
    ExpPoly { coeffs: Vec<Complex64> },
}

impl FSpec {
    /// Polynomial with the given simple roots.
    pub fn polynomial(roots: &[Complex64]) -> Self {
        FSpec::Zeros {
            zeros: roots.iter().map(|&a| (a, 1)).collect(),
            exp_power: None,
        }
    }

    /// Zero set of a surrogate cloud times an optional smooth factor.
    pub fn from_cloud(cloud: &ZeroCloud, exp_power: Option<f64>) -> Self {
        FSpec::Zeros {
            zeros: cloud
                .zeros
                .iter()
                .map(|z| (Complex64::from_polar(z.g.r(), z.theta), z.mult))
                .collect(),
            exp_power,
        }
    }

    fn zero_list(&self) -> &[(Complex64, u32)] {
        match self {
            FSpec::Zeros { zeros, .. } => zeros,
            _ => &[],
        }
    }

    fn exp_power(&self) -> Option<f64> {
        match self {
            FSpec::ExpPower { p } => Some(*p),
            FSpec::Zeros { exp_power, .. } => *exp_power,
            FSpec::ExpPoly { .. } => None,
        }
    }

    /// `log|f(z)|`; `-inf` at a zero.
    pub fn log_abs(&self, z: Complex64) -> f64 {
        let mut acc = 0.0;
        if let Some(p) = self.exp_power() {
            acc += (-p * (Complex64::new(1.0, 0.0) - z).ln()).exp().re;
        }
        if let FSpec::ExpPoly { coeffs } = self {
            acc += horner(coeffs, z).re;
        }
        for &(a, mult) in self.zero_list() {
            acc += mult as f64 * (z - a).norm().ln();
        }
        acc
    }

    /// `(log f)^{(m)}(z)` for `m = 1..=k`.
    fn log_derivatives(&self, z: Complex64, k: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); k];
        if let FSpec::ExpPoly { coeffs } = self {
            let mut d = coeffs.clone();
            for slot in out.iter_mut() {
                d = (1..d.len()).map(|j| d[j] * j as f64).collect();
                *slot += horner(&d, z);
            }
        }
        if let Some(p) = self.exp_power() {
            // (d/dz)^m (1-z)^{-p} = p(p+1)···(p+m-1) (1-z)^{-p-m}
            let lw = (Complex64::new(1.0, 0.0) - z).ln();
            let mut rising = 1.0;
            for (m, slot) in out.iter_mut().enumerate() {
                rising *= p + m as f64;
                *slot += rising * (-(p + m as f64 + 1.0) * lw).exp();
            }
        }
        for &(a, mult) in self.zero_list() {
            let inv = (z - a).inv();
            let mut pow = inv;
            let mut fact = 1.0;
            for (m, slot) in out.iter_mut().enumerate() {
                // (-1)^m m! / (z-a)^{m+1}
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                *slot += sign * fact * mult as f64 * pow;
                pow *= inv;
                fact *= (m + 1) as f64;
            }
        }
        out
    }

    /// `f^{(m)}/f` for `m = 0..=k` via complete Bell polynomials.
    pub fn derivative_ratios(&self, z: Complex64, k: usize) -> Vec<Complex64> {
        let x = self.log_derivatives(z, k);
        let mut b = vec![Complex64::new(1.0, 0.0)];
        for n in 0..k {
            let mut next = Complex64::new(0.0, 0.0);
            let mut binom = 1.0;
            for i in 0..=n {
                next += binom * b[n - i] * x[i];
                binom = binom * (n - i) as f64 / (i + 1) as f64;
            }
            b.push(next);
        }
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateOptions {
    /// Evenly spaced radii per window, in addition to dyadic radii inside it.
    pub radii: usize,
    pub angles: usize,
    /// Exclusion disc radius around a zero `a` is
    /// `tau·(1-|a|)/max(-log(1-|a|) - 1, 1)`.
    pub tau: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions {
            radii: 8,
            angles: 256,
            tau: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub window: (f64, f64),
    pub max_statistic: f64,
    /// Smallest `C` making the bound hold on this window's samples.
    pub fitted_c: f64,
    /// Largest excluded angular measure over the sampled circles.
    pub excluded_measure: f64,
    /// `max excluded / ((1-R)/(-log(1-R)-1))` over circles with `g > 1`.
    pub fitted_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub exponent: f64,
    pub windows: Vec<WindowReport>,
    pub fitted_c: f64,
}

/// Bound exponent `2 + (λ - λ/σ)⁺ + ε`, with `λ/σ = 0` when `σ = 0`.
pub fn certificate_exponent(lambda: f64, sigma: f64, eps: f64) -> f64 {
    let q = if sigma > 0.0 { lambda / sigma } else { 0.0 };
    2.0 + (lambda - q).max(0.0) + eps
}

fn exclusion_radius(g: f64, tau: f64) -> f64 {
    tau * (-g).exp() / (g - 1.0).max(1.0)
}

/// Angular measure of `{θ : |Re^{iθ} - a| < ρ_a for some zero a}`.
pub fn excluded_arc_measure(zeros: &[(Complex64, u32)], r: LogGap, tau: f64) -> f64 {
    let (dr, rr) = (r.delta(), r.r());
    let mut arcs: Vec<(f64, f64)> = Vec::new();
    for &(a, _) in zeros {
        let rho_a = a.norm();
        let da = 1.0 - rho_a;
        let ex = exclusion_radius(-da.ln(), tau);
        let radial = da - dr;
        let x = (ex * ex - radial * radial) / (4.0 * rr * rho_a);
        if x <= 0.0 {
            continue;
        }
        let half = 2.0 * x.sqrt().min(1.0).asin();
        if half >= PI {
            return TAU;
        }
        let c = a.arg().rem_euclid(TAU);
        let (lo, hi) = (c - half, c + half);
        if lo < 0.0 {
            arcs.push((lo + TAU, TAU));
            arcs.push((0.0, hi));
        } else if hi > TAU {
            arcs.push((lo, TAU));
            arcs.push((0.0, hi - TAU));
        } else {
            arcs.push((lo, hi));
        }
    }
    arcs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (a, b) in arcs {
        match cur {
            Some((ca, cb)) if a <= cb => cur = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca;
                cur = Some((a, b));
            }
            None => cur = Some((a, b)),
        }
    }
    if let Some((a, b)) = cur {
        total += b - a;
    }
    total
}

/// Sample the normalized statistic over each window, skipping points in
/// the exclusion discs of zeros.
pub fn logderiv_certificate(
    f: &FSpec,
    k: usize,
    j: usize,
    eps: f64,
    lambda: f64,
    sigma: f64,
    windows: &RadialWindowSet,
    opts: &CertificateOptions,
) -> Result<CertificateReport, LogDerivError> {
    if k <= j {
        return Err(LogDerivError::Invalid(format!("need k > j, got k={k}, j={j}")));
    }
    if opts.radii == 0 || opts.angles == 0 {
        return Err(LogDerivError::Invalid("need at least one radius and angle".into()));
    }
    let exponent = certificate_exponent(lambda, sigma, eps);
    let zeros = f.zero_list();
    let mut reports = Vec::new();
    let mut global = 0.0f64;
    for &(lo, hi) in &windows.intervals {
        let hi_f = if hi.is_finite() { hi } else { lo + 30.0 };
        let mut gs: Vec<f64> = (0..opts.radii)
            .map(|i| lo + (hi_f - lo) * (i as f64 + 0.5) / opts.radii as f64)
            .collect();
        // dyadic radii r_ν = 1 - 2^{-ν}
        let l2 = std::f64::consts::LN_2;
        let mut nu = (lo / l2).ceil();
        while nu * l2 <= hi_f {
            gs.push(nu * l2);
            nu += 1.0;
        }
        let mut row = WindowReport {
            window: (lo, hi),
            max_statistic: 0.0,
            fitted_c: 0.0,
            excluded_measure: 0.0,
            fitted_rad: 0.0,
        };
        for g in gs {
            if g <= 0.0 {
                continue;
            }
            let gap = LogGap::new(g).map_err(LogDerivError::from)?;
            let (dr, rr) = (gap.delta(), gap.r());
            let excl = excluded_arc_measure(zeros, gap, opts.tau);
            row.excluded_measure = row.excluded_measure.max(excl);
            if g > 1.0 {
                row.fitted_rad = row.fitted_rad.max(excl * rr / (dr / (g - 1.0)));
            }
            for i in 0..opts.angles {
                let theta = TAU * i as f64 / opts.angles as f64;
                let z = Complex64::from_polar(rr, theta);
                let blocked = zeros.iter().any(|&(a, _)| {
                    (z - a).norm() < exclusion_radius(-(1.0 - a.norm()).ln(), opts.tau)
                });
                if blocked {
                    continue;
                }
                let b = f.derivative_ratios(z, k);
                let ratio = (b[k] / b[j]).norm();
                let stat = (ratio.ln() / (k - j) as f64 + exponent * dr.ln()).exp();
                if stat.is_finite() {
                    row.max_statistic = row.max_statistic.max(stat);
                }
            }
        }
        row.fitted_c = row.max_statistic;
        global = global.max(row.max_statistic);
        reports.push(row);
    }
    Ok(CertificateReport {
        exponent,
        windows: reports,
        fitted_c: global,
    })
}
