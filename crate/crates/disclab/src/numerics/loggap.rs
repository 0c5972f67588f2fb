use serde::{Deserialize, Serialize};

use super::NumericsError;

/// A radius `r ∈ [0, 1)` stored as `g = log(1/(1-r))`.
///
/// For `g ≲ 30` the conversion to `r` is faithful; past that point only `g`
/// carries information and `1 - r` is obtained as `exp(-g)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogGap(f64);

/// Largest `g` for which raw radii are accepted.
pub const RAW_RADIUS_LIMIT: f64 = 30.0;

impl LogGap {
    pub const ZERO: LogGap = LogGap(0.0);

    pub fn new(g: f64) -> Result<Self, NumericsError> {
        if g.is_finite() && g >= 0.0 {
            Ok(LogGap(g))
        } else {
            Err(NumericsError::InvalidGap(g))
        }
    }

    /// Callers guarantee `g` is finite and nonnegative.
    #[allow(dead_code)]
    pub(crate) fn new_unchecked(g: f64) -> Self {
        debug_assert!(g.is_finite() && g >= 0.0, "bad log-gap {g}");
        LogGap(g)
    }

    pub fn from_r(r: f64) -> Result<Self, NumericsError> {
        if !(0.0..1.0).contains(&r) {
            return Err(NumericsError::InvalidRadius(r));
        }
        let g = -(-r).ln_1p();
        if g > RAW_RADIUS_LIMIT {
            return Err(NumericsError::InvalidRadius(r));
        }
        Ok(LogGap(g.max(0.0)))
    }

    /// From `1 - r` directly.
    pub fn from_one_minus_r(delta: f64) -> Result<Self, NumericsError> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(NumericsError::InvalidRadius(1.0 - delta));
        }
        Ok(LogGap(-delta.ln()))
    }

    #[inline]
    pub fn g(self) -> f64 {
        self.0
    }

    /// `r = 1 - e^{-g}`.
    #[inline]
    pub fn r(self) -> f64 {
        -(-self.0).exp_m1()
    }

    /// `1 - r = e^{-g}` (underflows to 0 past g ≈ 745).
    #[inline]
    pub fn delta(self) -> f64 {
        (-self.0).exp()
    }

    /// `log r`, accurate in the absolute sense for every `g`.
    pub fn log_r(self) -> f64 {
        let g = self.0;
        if g == 0.0 {
            return f64::NEG_INFINITY;
        }
        if g > 1.0 {
            -neg_log1m_series(g)
        } else {
            (-(-g).exp()).ln_1p()
        }
    }

    /// `log(-log r) = log log(1/r)`, finite for every `g > 0`.
    pub fn log_neg_log_r(self) -> f64 {
        let g = self.0;
        if g == 0.0 {
            return f64::INFINITY;
        }
        if g > 1.0 {
            // -log r = x (1 + x/2 + x^2/3 + ...), x = e^{-g}
            let x = (-g).exp();
            let mut s: f64 = 0.0;
            let mut p: f64 = 1.0;
            let mut k = 1.0;
            while p > 1e-18 {
                s += p / k;
                p *= x;
                k += 1.0;
            }
            -g + s.ln()
        } else {
            (-self.log_r()).ln()
        }
    }

    /// The `u`-coordinate `log(C/(1-r)) = g + log C`.
    #[inline]
    pub fn u(self, log_c: f64) -> f64 {
        self.0 + log_c
    }

    /// Shift by `dg` (which may be negative), clamped at 0.
    pub fn shifted(self, dg: f64) -> LogGap {
        LogGap((self.0 + dg).max(0.0))
    }
}

/// `-log(1 - e^{-g})` as a series in `x = e^{-g}`; intended for `g > 1`.
fn neg_log1m_series(g: f64) -> f64 {
    let x = (-g).exp();
    let mut s: f64 = 0.0;
    let mut p = x;
    let mut k = 1.0;
    while p > 1e-18 * s.max(f64::MIN_POSITIVE) {
        s += p / k;
        p *= x;
        k += 1.0;
        if k > 200.0 {
            break;
        }
    }
    s
}

impl std::fmt::Display for LogGap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "g={}", self.0)
    }
}
