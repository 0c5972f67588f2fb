use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A signed real stored as `sign · exp(logmag)`.
///
/// Zero is `sign = 0` with `logmag = -∞`. Arithmetic never forms
/// `exp(logmag)` for large magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    pub sign: i8,
    #[serde(with = "extended_f64")]
    pub logmag: f64,
}

/// JSON has no infinities; zero's `-∞` is written as the string `"-inf"`.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad number {other:?}"))),
            },
        }
    }
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        sign: 0,
        logmag: f64::NEG_INFINITY,
    };
    pub const ONE: LogValue = LogValue {
        sign: 1,
        logmag: 0.0,
    };

    /// Positive value with natural log `l`.
    pub fn from_log(l: f64) -> Self {
        if l == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogValue { sign: 1, logmag: l }
        }
    }

    pub fn signed(sign: i8, l: f64) -> Self {
        if sign == 0 || l == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogValue {
                sign: sign.signum(),
                logmag: l,
            }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogValue {
                sign: if x > 0.0 { 1 } else { -1 },
                logmag: x.abs().ln(),
            }
        }
    }

    /// Materialize; overflows to ±∞ past logmag ≈ 709.
    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => s as f64 * self.logmag.exp(),
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn is_positive(self) -> bool {
        self.sign > 0
    }

    pub fn abs(self) -> Self {
        if self.sign == 0 {
            self
        } else {
            LogValue {
                sign: 1,
                logmag: self.logmag,
            }
        }
    }

    pub fn recip(self) -> Self {
        assert!(self.sign != 0, "reciprocal of zero LogValue");
        LogValue {
            sign: self.sign,
            logmag: -self.logmag,
        }
    }

    /// `|x|^p` keeping the sign of `x` for odd use; callers pass positives.
    pub fn powf(self, p: f64) -> Self {
        if self.sign == 0 {
            return if p > 0.0 { Self::ZERO } else { Self::ONE };
        }
        LogValue {
            sign: self.sign,
            logmag: self.logmag * p,
        }
    }

    pub fn scale_log(self, dl: f64) -> Self {
        if self.sign == 0 {
            self
        } else {
            LogValue {
                sign: self.sign,
                logmag: self.logmag + dl,
            }
        }
    }

    /// Total order on the represented reals.
    pub fn cmp_value(&self, other: &Self) -> Ordering {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Ordering::Equal,
                1 => self.logmag.total_cmp(&other.logmag),
                _ => other.logmag.total_cmp(&self.logmag),
            },
            o => o,
        }
    }
}

impl Default for LogValue {
    fn default() -> Self {
        Self::ZERO
    }
}

impl Neg for LogValue {
    type Output = LogValue;
    fn neg(self) -> LogValue {
        LogValue {
            sign: -self.sign,
            logmag: self.logmag,
        }
    }
}

impl Mul for LogValue {
    type Output = LogValue;
    fn mul(self, o: LogValue) -> LogValue {
        if self.sign == 0 || o.sign == 0 {
            return LogValue::ZERO;
        }
        LogValue {
            sign: self.sign * o.sign,
            logmag: self.logmag + o.logmag,
        }
    }
}

impl Div for LogValue {
    type Output = LogValue;
    fn div(self, o: LogValue) -> LogValue {
        self * o.recip()
    }
}

impl Add for LogValue {
    type Output = LogValue;
    fn add(self, o: LogValue) -> LogValue {
        if self.sign == 0 {
            return o;
        }
        if o.sign == 0 {
            return self;
        }
        let (big, small) = if self.logmag >= o.logmag {
            (self, o)
        } else {
            (o, self)
        };
        let d = small.logmag - big.logmag;
        if big.sign == small.sign {
            LogValue {
                sign: big.sign,
                logmag: big.logmag + d.exp().ln_1p(),
            }
        } else if d == 0.0 {
            LogValue::ZERO
        } else {
            LogValue {
                sign: big.sign,
                logmag: big.logmag + (-d.exp()).ln_1p(),
            }
        }
    }
}

impl Sub for LogValue {
    type Output = LogValue;
    fn sub(self, o: LogValue) -> LogValue {
        self + (-o)
    }
}

/// Result of a signed log-domain sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LseSum {
    pub value: LogValue,
    /// Set when the result is below `1e-12 ×` the largest term.
    pub cancelled: bool,
}

/// Signed sum of log-domain terms by max extraction and pairwise reduction.
pub fn lse_sum(terms: &[LogValue]) -> LseSum {
    let m = terms
        .iter()
        .filter(|t| t.sign != 0)
        .map(|t| t.logmag)
        .fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return LseSum {
            value: LogValue::ZERO,
            cancelled: false,
        };
    }
    let pos: Vec<f64> = terms
        .iter()
        .filter(|t| t.sign > 0)
        .map(|t| (t.logmag - m).exp())
        .collect();
    let neg: Vec<f64> = terms
        .iter()
        .filter(|t| t.sign < 0)
        .map(|t| (t.logmag - m).exp())
        .collect();
    let p = pairwise(&pos);
    let n = pairwise(&neg);
    let d = p - n;
    let cancelled = !neg.is_empty() && !pos.is_empty() && d.abs() < 1e-12;
    let value = if d == 0.0 {
        LogValue::ZERO
    } else {
        LogValue::signed(if d > 0.0 { 1 } else { -1 }, m + d.abs().ln())
    };
    LseSum { value, cancelled }
}

/// `log Σ exp(l_i)` for plain log-magnitudes.
pub fn log_sum_exp(logs: &[f64]) -> f64 {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    let scaled: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    m + pairwise(&scaled).ln()
}

fn pairwise(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise(a) + pairwise(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_and_cancel() {
        let a = LogValue::from_f64(3.0);
        let b = LogValue::from_f64(-3.0);
        assert!((a + b).is_zero());
        let c = LogValue::from_f64(5.0) - LogValue::from_f64(2.0);
        assert!((c.to_f64() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn ordering() {
        let xs = [-4.0, -1.0, 0.0, 0.5, 7.0];
        for &x in &xs {
            for &y in &xs {
                assert_eq!(
                    LogValue::from_f64(x).cmp_value(&LogValue::from_f64(y)),
                    x.partial_cmp(&y).unwrap()
                );
            }
        }
    }

    #[test]
    fn huge_magnitudes_stay_finite() {
        let a = LogValue::from_log(1e6);
        let b = LogValue::from_log(1e6 - 1.0);
        let s = a + b;
        assert!((s.logmag - (1e6 + (-1.0f64).exp().ln_1p())).abs() < 1e-9);
    }

    #[test]
    fn flagged_cancellation() {
        let r = lse_sum(&[LogValue::from_f64(1.0), LogValue::from_f64(-1.0)]);
        assert!(r.cancelled);
        assert!(r.value.is_zero());
    }
}
