//! Shared numeric substrate: log-gap radii, signed log-domain values,
//! bracketed root finding and adaptive quadrature.

mod loggap;
mod logvalue;
mod quad;
mod root;

pub use loggap::LogGap;
pub use logvalue::{log_sum_exp, lse_sum, LogValue, LseSum};
pub use quad::{gauss_legendre, integrate, integrate_with, QuadOptions, Singularity};
pub use root::{find_root, find_root_with_iters};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("radius {0} outside [0, 1)")]
    InvalidRadius(f64),
    #[error("log-gap {0} is not a finite nonnegative number")]
    InvalidGap(f64),
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("root iteration did not converge within {iters} steps (last bracket [{lo}, {hi}])")]
    RootNoConvergence { iters: usize, lo: f64, hi: f64 },
    #[error("quadrature did not converge: last estimates {last} and {previous}")]
    Quadrature { last: f64, previous: f64 },
    #[error("non-finite integrand value at t = {0}")]
    NonFinite(f64),
}

/// `ln(1+x)/x`, equal to 1 at `x = 0`.
pub fn log1p_ratio(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x / 2.0 + x * x / 3.0
    } else {
        x.ln_1p() / x
    }
}

/// `∫_a^b log(r/t) dt` divided by `(1-a)^2`, for radii given as log-gaps.
///
/// Uses `-log t = Σ δ_t^k / k` with `δ = 1 - t`, so nothing is formed from
/// `r` directly and the scale `(1-a)^2` never underflows.
pub fn int_log_ratio_scaled(ga: f64, gb: f64, gr: f64) -> f64 {
    if gb == ga {
        return 0.0;
    }
    let da = (-ga).exp();
    let rho_r = (ga - gr).exp();
    if da > 0.5 {
        // Direct closed form; everything is O(1) here.
        let a = -(-ga).exp_m1();
        let b = -(-gb).exp_m1();
        let r = -(-gr).exp_m1();
        let lr = r.ln();
        let f = |t: f64| -> f64 {
            if t == 0.0 {
                0.0
            } else {
                t * (lr - t.ln() + 1.0)
            }
        };
        return (f(b) - f(a)) / (da * da);
    }
    let dr = (-gr).exp();
    // (δ_a - δ_b) log(1-δ_r) / δ_a^2
    let lead = -(ga - gb).exp_m1() * rho_r * -log1p_ratio(-dr);
    // Σ_{k≥2} δ_a^{k-2} (1 - ρ_b^k) / (k(k-1))
    let lrb = ga - gb;
    let mut sum = 0.0;
    let mut pow = 1.0;
    let mut k = 2.0_f64;
    loop {
        let term = pow * (-(k * lrb).exp_m1()) / (k * (k - 1.0));
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() || pow < 1e-300 {
            break;
        }
        pow *= da;
        k += 1.0;
        if k > 400.0 {
            break;
        }
    }
    lead + sum
}
