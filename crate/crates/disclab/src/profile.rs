//! The piecewise radial profile `φ` built on a scaffold, with its first
//! derivative and radial Laplacian.
//!
//! Values are returned both raw (as [`LogValue`]s, since `φ'` grows like
//! `e^g`) and in scaled form: `φ_g = dφ/dg = φ'·(1-r)` and
//! `Δφ·(1-r)^2`, which stay O(1)–O(u²) for every generation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{int_log_ratio_scaled, LogGap, LogValue};
use crate::scaffold::{ClosureState, Generation, IrregularScaffold};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("g = {g} outside the constructed range [0, {max}]")]
    Range { g: f64, max: f64 },
}

/// Which of the five formulas applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// `r''_{n-1} ≤ r < r_n`
    Outer,
    /// `r_n ≤ r < r_n'`, where the Laplacian vanishes
    Harmonic,
    /// `r_n' ≤ r < r̂_n`
    Lower,
    /// `r̂_n ≤ r < r_n*`
    Star,
    /// `r_n* ≤ r < r_n''`
    Closing,
}

impl Branch {
    pub fn id(self) -> u8 {
        match self {
            Branch::Outer => 0,
            Branch::Harmonic => 1,
            Branch::Lower => 2,
            Branch::Star => 3,
            Branch::Closing => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileEval {
    pub phi: f64,
    pub phi_prime: LogValue,
    pub laplacian: LogValue,
    /// `dφ/dg`.
    pub phi_g: f64,
    /// `Δφ·(1-r)^2`.
    pub lap_scaled: f64,
    pub generation: usize,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseProfile {
    pub scaffold: IrregularScaffold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub g: LogGap,
    pub generation: usize,
    pub left: Branch,
    pub right: Branch,
    pub phi_jump: f64,
    pub phi_prime_jump: f64,
}

impl PiecewiseProfile {
    pub fn new(scaffold: IrregularScaffold) -> Self {
        PiecewiseProfile { scaffold }
    }

    pub fn g_max(&self) -> LogGap {
        self.scaffold.g_next
    }

    fn gens(&self) -> &[Generation] {
        &self.scaffold.generations
    }

    /// Generation and branch containing `g` (right-continuous).
    pub fn locate(&self, g: f64) -> Result<(usize, Branch), ProfileError> {
        let max = self.g_max().g();
        if !(g >= 0.0 && g <= max) {
            return Err(ProfileError::Range { g, max });
        }
        for gen in self.gens() {
            if g < gen.g_n.g() {
                return Ok((gen.n, Branch::Outer));
            }
            if g < gen.g_prime.g() {
                return Ok((gen.n, Branch::Harmonic));
            }
            if g < gen.g_hat.g() {
                return Ok((gen.n, Branch::Lower));
            }
            if g < gen.g_star.g() {
                return Ok((gen.n, Branch::Star));
            }
            if g < gen.g_dprime.g() {
                return Ok((gen.n, Branch::Closing));
            }
        }
        // between the last r'' and r_{N+1}
        Ok((self.gens().len() + 1, Branch::Outer))
    }

    pub fn eval(&self, g: LogGap) -> Result<ProfileEval, ProfileError> {
        let (n, b) = self.locate(g.g())?;
        Ok(self.eval_branch(n, b, g.g()))
    }

    /// `ε_n` for generation `n` (1-based; `N+1` is the unbuilt seed).
    fn eps(&self, n: usize) -> f64 {
        match self.gens().get(n - 1) {
            Some(gen) => gen.eps_n,
            None => self.scaffold.eps_next,
        }
    }

    /// Evaluate a given branch formula at `g` without range checks.
    pub fn eval_branch(&self, n: usize, branch: Branch, g: f64) -> ProfileEval {
        let params = &self.scaffold.params;
        let (p1, p2, log_c) = (params.p1, params.p2, params.log_c);
        let u = g + log_c;
        let r = -(-g).exp_m1();
        let (phi, phi_g, lap_scaled) = if branch == Branch::Outer {
            let pe = p2 + self.eps(n);
            (pe * u, pe, pe / r)
        } else {
            let gen = &self.gens()[n - 1];
            let st: ClosureState = gen.closure_state(params);
            let pe = p2 + gen.eps_n;
            let gn = gen.g_n.g();
            let gp = gen.g_prime.g();
            let gh = gen.g_hat.g();
            let uh = gen.u_hat;
            let rn = -(-gn).exp_m1();
            let rlog = st.r_log_term(g);
            let d1 = pe * rn * (gn - g).exp() / r;
            match branch {
                Branch::Harmonic => (pe * gen.g_n.u(log_c) + rlog, d1, 0.0),
                _ => {
                    let base_phi = p1 * u + rlog + p1 * (gp - g).exp_m1();
                    let base_d = d1 - p1 * (gp - g).exp_m1();
                    let base_lap = p1 / r * (1.0 - (gp - 2.0 * g).exp());
                    let dp = p2 - p1;
                    match branch {
                        Branch::Lower => (base_phi, base_d, base_lap),
                        Branch::Star => (
                            base_phi + st.m_int_term(g, g),
                            base_d - dp * uh * uh * (gh - g).exp() * (gh - g).exp_m1() / r,
                            base_lap + dp * uh * uh * (2.0 * (gh - g)).exp() / r,
                        ),
                        _ => (
                            base_phi + st.m_int_term(gen.g_star.g(), g),
                            base_d + dp * uh * (gh - g).exp() / r,
                            base_lap,
                        ),
                    }
                }
            }
        };
        ProfileEval {
            phi,
            phi_prime: LogValue::from_f64(phi_g).scale_log(g),
            laplacian: LogValue::from_f64(lap_scaled).scale_log(2.0 * g),
            phi_g,
            lap_scaled,
            generation: n,
            branch,
        }
    }

    /// Branch boundaries in increasing order, skipping empty branches.
    pub fn junctions(&self) -> Vec<(LogGap, usize, Branch, Branch)> {
        let mut out = Vec::new();
        for gen in self.gens() {
            let pts = [
                (gen.g_n, Branch::Harmonic),
                (gen.g_prime, Branch::Lower),
                (gen.g_hat, Branch::Star),
                (gen.g_star, Branch::Closing),
            ];
            let mut left = Branch::Outer;
            for (i, &(g, right)) in pts.iter().enumerate() {
                let next = pts.get(i + 1).map(|p| p.0).unwrap_or(gen.g_dprime);
                if next == g {
                    // empty branch: its left neighbour continues past it
                    continue;
                }
                out.push((g, gen.n, left, right));
                left = right;
            }
            out.push((gen.g_dprime, gen.n, left, Branch::Outer));
        }
        out
    }

    /// Relative jumps of `φ` and `φ'` across every junction.
    pub fn junction_report(&self) -> Vec<Junction> {
        self.junctions()
            .into_iter()
            .map(|(g, n, left, right)| {
                let l = self.eval_branch(n, left, g.g());
                let rn = if right == Branch::Outer { n + 1 } else { n };
                let r = self.eval_branch(rn, right, g.g());
                Junction {
                    g,
                    generation: n,
                    left,
                    right,
                    phi_jump: rel(l.phi, r.phi),
                    phi_prime_jump: rel(l.phi_g, r.phi_g),
                }
            })
            .collect()
    }

    /// `(g, φ(g)/g)` pairs.
    pub fn ratio_profile(&self, gs: &[LogGap]) -> Result<Vec<(f64, f64)>, ProfileError> {
        gs.iter()
            .map(|&g| self.eval(g).map(|e| (g.g(), e.phi / g.g())))
            .collect()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// `∫_{ĝ}^{x} log(r/t) dt` in closed form, for tests and callers that want
/// the raw integral; valid while `1 - r̂` is representable.
pub fn closed_form_log_integral(g_lo: f64, g_hi: f64, g_r: f64) -> f64 {
    let d = (-g_lo).exp();
    int_log_ratio_scaled(g_lo, g_hi, g_r) * d * d
}
