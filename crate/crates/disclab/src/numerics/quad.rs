use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::NumericsError;

/// Endpoint behaviour hint for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Singularity {
    #[default]
    None,
    /// `f(t) ~ (b - t)^{-s}` with `s < 1` near the upper limit.
    Upper,
    /// `f(t) ~ (t - a)^{-s}` with `s < 1` near the lower limit.
    Lower,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rel_tol: 1e-11,
            abs_tol: 0.0,
            max_intervals: 4000,
        }
    }
}

/// Adaptive 7/15-point Gauss–Kronrod quadrature of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    hint: Singularity,
) -> Result<f64, NumericsError> {
    integrate_with(f, a, b, hint, QuadOptions::default())
}

pub fn integrate_with<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    hint: Singularity,
    opts: QuadOptions,
) -> Result<f64, NumericsError> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate_with(f, b, a, hint, opts).map(|v| -v);
    }
    match hint {
        Singularity::None => adaptive(&mut f, a, b, opts),
        Singularity::Upper => {
            let w = b - a;
            exp_substituted(|y| f(b - w * (-y).exp()) * w * (-y).exp(), b, w, opts)
        }
        Singularity::Lower => {
            let w = b - a;
            exp_substituted(|y| f(a + w * (-y).exp()) * w * (-y).exp(), a, w, opts)
        }
    }
}

const STALL_TOL: f64 = 1e-10;

/// `∫_0^∞ h(y) dy` in doubling chunks, stopping once a chunk is negligible
/// or the substituted abscissa can no longer move in floating point.
fn exp_substituted<H: FnMut(f64) -> f64>(
    mut h: H,
    end: f64,
    width: f64,
    opts: QuadOptions,
) -> Result<f64, NumericsError> {
    let floor = 1e8 * f64::EPSILON * end.abs().max(f64::MIN_POSITIVE);
    // past y_max the abscissa t carries fewer than ~8 good digits of b - t
    let y_max = (width / floor).ln().clamp(1.0, 740.0);
    let mut total: f64 = 0.0;
    let mut lo: f64 = 0.0;
    let mut len = 1.0;
    let mut quiet = 0;
    loop {
        let hi = (lo + len).min(y_max);
        let chunk_opts = QuadOptions {
            abs_tol: opts.abs_tol.max(0.1 * opts.rel_tol * total.abs()),
            ..opts
        };
        let piece = match adaptive(&mut h, lo, hi, chunk_opts) {
            Ok(v) => v,
            // deep chunks see abscissa rounding noise; accept a stalled
            // refinement when it is already below the target accuracy
            Err(NumericsError::Quadrature { last, previous })
                if (last - previous).abs() <= STALL_TOL * (total + last).abs() =>
            {
                last
            }
            Err(e) => return Err(e),
        };
        total += piece;
        if piece.abs() <= opts.rel_tol * 0.1 * total.abs() + opts.abs_tol {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if quiet >= 2 {
            return Ok(total);
        }
        if hi >= y_max {
            // geometric tail from the local decay rate of h
            let span = 4.0f64.min(hi);
            let h1 = h(hi - span);
            let h2 = h(hi);
            if h1.is_finite() && h2.is_finite() && h2 != 0.0 && h1 / h2 > 1.0 {
                total += h2 * span / (h1 / h2).ln();
            }
            return Ok(total);
        }
        lo = hi;
        len *= 2.0;
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), NumericsError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(NumericsError::NonFinite(c));
    }
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        if !f1.is_finite() {
            return Err(NumericsError::NonFinite(c - x));
        }
        if !f2.is_finite() {
            return Err(NumericsError::NonFinite(c + x));
        }
        k += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    Ok((k * h, ((k - g) * h).abs()))
}

struct Piece {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

fn adaptive<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<f64, NumericsError> {
    let (v, e) = gk15(f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, val: v, err: e });
    let mut total = v;
    let mut err = e;
    let mut previous = f64::NAN;
    while err > opts.rel_tol * total.abs() + opts.abs_tol {
        if heap.len() >= opts.max_intervals {
            return Err(NumericsError::Quadrature {
                last: total,
                previous,
            });
        }
        let p = heap.pop().expect("heap never empty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            // interval no longer splittable; accept what we have
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(f, p.a, m)?;
        let (v2, e2) = gk15(f, m, p.b)?;
        previous = total;
        total += v1 + v2 - p.val;
        err += e1 + e2 - p.err;
        heap.push(Piece {
            a: p.a,
            b: m,
            val: v1,
            err: e1,
        });
        heap.push(Piece {
            a: m,
            b: p.b,
            val: v2,
            err: e2,
        });
        // periodic resummation keeps round-off from the running totals in check
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|p| p.val).sum();
            err = heap.iter().map(|p| p.err).sum();
        }
    }
    Ok(heap.iter().map(|p| p.val).sum())
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear() {
        let v = integrate(|t| t, 0.0, 1.0, Singularity::None).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn upper_singularity() {
        // ∫_0^1 (1-t)^{-1/2} dt = 2
        let v = integrate(|t| (1.0 - t).powf(-0.5), 0.0, 1.0, Singularity::Upper).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn lower_log_singularity() {
        // ∫_0^1 ln t dt = -1
        let v = integrate(|t| t.ln(), 0.0, 1.0, Singularity::Lower).unwrap();
        assert!((v + 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 3, 8, 24] {
            let (x, w) = gauss_legendre(n);
            let deg = 2 * n - 1;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((s - exact).abs() < 1e-13, "n={n}");
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        }
    }
}
