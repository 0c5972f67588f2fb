//! Discretization of the Riesz measure `Δφ dm₂/(2π)` into polar cells of
//! mass 2, the zero surrogate obtained by atomizing them, and the
//! surrogate potential.
//!
//! Each annulus of a generation is cut into rings whose radii solve the
//! mass equation in closed form; a ring is cut into equal angular cells.
//! Rings are stored explicitly, cells are produced on demand since a ring
//! at log-gap `g` holds about `e^g` of them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{gauss_legendre, integrate, LogGap, NumericsError, Singularity};
use crate::profile::{PiecewiseProfile, ProfileError};

const TAU: f64 = 2.0 * PI;

/// Beyond this log-gap the angular counts no longer fit in a `u64`.
pub const MAX_ENUMERATION_G: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RieszError {
    #[error("generation {n} not in scaffold (1..={max})")]
    Generation { n: usize, max: usize },
    #[error("g_max = {0} beyond the enumerable range {MAX_ENUMERATION_G}")]
    GMax(f64),
    #[error("p_eff = {0} must be positive")]
    PEff(f64),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// The four mass-carrying annuli of a generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Annulus {
    /// `r''_{n-1} ≤ r < r_n`
    A,
    /// `r_n' ≤ r < r̂_n`
    AHat,
    /// `r_n* ≤ r < r_n''`
    ADprime,
    /// `r̂_n ≤ r < r_n*`, a single ring
    AStar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellKind {
    A,
    AHat,
    ADprime,
    AStar,
    Remainder,
}

impl From<Annulus> for CellKind {
    fn from(a: Annulus) -> Self {
        match a {
            Annulus::A => CellKind::A,
            Annulus::AHat => CellKind::AHat,
            Annulus::ADprime => CellKind::ADprime,
            Annulus::AStar => CellKind::AStar,
        }
    }
}

impl CellKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::A => "A",
            CellKind::AHat => "A-hat",
            CellKind::ADprime => "A-dprime",
            CellKind::AStar => "A-star",
            CellKind::Remainder => "remainder",
        }
    }
}

/// Radial mass density of one annulus, in closed form.
///
/// Per unit `g` and full angle the mass is
/// `w(g) = p(e^g - e^{g'-g}) + M_n e^{-g}`; the `g'` term is absent on
/// `A_n` and the `M_n` term is present only on `A*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Density {
    /// Coefficient of `1/δ²` in `rΔφ`.
    pub p: f64,
    /// `log` of the `1/δ'` coefficient divided by `p` (`g'`), or `-∞`.
    pub g_prime: f64,
    /// `log M_n` for the constant term, or `-∞`.
    pub log_m: f64,
}

impl Density {
    fn outer(p: f64) -> Self {
        Density {
            p,
            g_prime: f64::NEG_INFINITY,
            log_m: f64::NEG_INFINITY,
        }
    }

    /// Mass per unit `g` at `g`, scaled by `e^{-g_ref}`.
    pub fn per_g_scaled(&self, g: f64, g_ref: f64) -> f64 {
        let mut w = self.p * (g - g_ref).exp();
        if self.g_prime.is_finite() {
            w -= self.p * (self.g_prime - g - g_ref).exp();
        }
        if self.log_m.is_finite() {
            w += (self.log_m - g - g_ref).exp();
        }
        w
    }

    /// Full-angle mass between `g_a < g_b`.
    pub fn mass(&self, ga: f64, gb: f64) -> f64 {
        let d = gb - ga;
        let mut t = self.p * ga.exp() * d.exp_m1();
        let tail = -(-d).exp_m1();
        if self.g_prime.is_finite() {
            t -= self.p * (self.g_prime - ga).exp() * tail;
        }
        if self.log_m.is_finite() {
            t += (self.log_m - ga).exp() * tail;
        }
        t
    }

    /// `∫ δ dμ` over `[g_a, g_b]`, full angle.
    fn delta_moment(&self, ga: f64, gb: f64) -> f64 {
        let d = gb - ga;
        let half = -(-2.0 * d).exp_m1() / 2.0;
        let mut m = self.p * d;
        if self.g_prime.is_finite() {
            m -= self.p * (self.g_prime - 2.0 * ga).exp() * half;
        }
        if self.log_m.is_finite() {
            m += (self.log_m - 2.0 * ga).exp() * half;
        }
        m
    }

    /// Log-gap of the `Δφ`-weighted mean of `1 - r` over `[g_a, g_b]`.
    pub fn centroid(&self, ga: f64, gb: f64) -> f64 {
        -(self.delta_moment(ga, gb) / self.mass(ga, gb)).ln()
    }
}

/// `floor(1/(1-r))·(1-r)` at log-gap `g`, with `e^g` snapped to an integer
/// when it is one up to rounding. The rounding of `exp` grows with `g`, so
/// the snap window does too; a fixed relative window would round genuine
/// non-integers up once `e^g` is large.
fn m_delta(g: f64) -> (f64, f64) {
    let e = g.exp();
    if e >= 2f64.powi(53) {
        return (e, 1.0);
    }
    let near = e.round();
    let tol = 4.0 * f64::EPSILON * g.abs().max(1.0) * e;
    let m = if (e - near).abs() <= tol { near } else { e.floor() };
    (m, m / e)
}

/// Outer radius of the next ring of an `A_n` annulus: the cells of angle
/// `2π/m`, `m = floor(1/(1-r_k))`, get mass exactly 2.
pub fn next_ring_radius(g_k: LogGap, p_eff: f64) -> Result<LogGap, RieszError> {
    if !(p_eff > 0.0) {
        return Err(RieszError::PEff(p_eff));
    }
    let (_, md) = m_delta(g_k.g());
    Ok(LogGap::new(g_k.g() + (2.0 * md / p_eff).ln_1p())?)
}

/// Ring step for the annuli carrying `p1(1/δ² - 1/δ')`: the larger root of
/// `y² - (1 + q + 2mδ/p1) y + q = 0` with `q = δ²/δ'`, `y = δ_k/δ_{k+1}`.
fn next_ring_p1(g: f64, p1: f64, g_prime: f64) -> f64 {
    let (_, md) = m_delta(g);
    let q = (g_prime - 2.0 * g).exp();
    let b = 1.0 + q + 2.0 * md / p1;
    let y = 0.5 * (b + (b * b - 4.0 * q).sqrt());
    g + y.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarCell {
    pub g_lo: LogGap,
    pub g_hi: LogGap,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub mass: f64,
    pub kind: CellKind,
    pub generation: usize,
    pub ring: usize,
    pub index: u64,
    /// Radial `Δφ`-centroid, shared by every cell of the ring.
    pub g_centroid: LogGap,
    pub density: Density,
}

impl PolarCell {
    /// Radial side `r_hi - r_lo` and angular side at the centroid radius.
    pub fn sides(&self) -> (f64, f64) {
        let radial = self.g_lo.delta() * -(self.g_lo.g() - self.g_hi.g()).exp_m1();
        let angular = self.g_centroid.r() * (self.theta_hi - self.theta_lo);
        (radial, angular)
    }

    pub fn aspect(&self) -> f64 {
        let (a, b) = self.sides();
        a.max(b) / a.min(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub generation: usize,
    pub annulus: Annulus,
    pub index: usize,
    pub g_lo: LogGap,
    pub g_hi: LogGap,
    /// Full-angle mass.
    pub mass: f64,
    pub cells: u64,
    pub cell_angle: f64,
    /// Absorbs a partial ring; its last cell is the remainder cell.
    pub merged: bool,
    pub g_centroid: LogGap,
    pub density: Density,
}

impl Ring {
    fn build(
        generation: usize,
        annulus: Annulus,
        index: usize,
        ga: f64,
        gb: f64,
        merged: bool,
        density: Density,
    ) -> Result<Ring, RieszError> {
        let mass = density.mass(ga, gb);
        let (cells, cell_angle) = if merged {
            let c = ((mass / 2.0).floor() as u64).max(1);
            (c, 2.0 * TAU / mass)
        } else {
            let (m, _) = m_delta(ga);
            (m as u64, TAU / m)
        };
        Ok(Ring {
            generation,
            annulus,
            index,
            g_lo: LogGap::new(ga)?,
            g_hi: LogGap::new(gb)?,
            mass,
            cells,
            cell_angle,
            merged,
            g_centroid: LogGap::new(density.centroid(ga, gb))?,
            density,
        })
    }

    pub fn cell(&self, j: u64) -> PolarCell {
        assert!(j < self.cells, "cell {j} of {}", self.cells);
        let last = j + 1 == self.cells;
        let theta_lo = j as f64 * self.cell_angle;
        let (theta_hi, mass, kind) = if last && self.merged {
            (TAU, self.mass - 2.0 * (self.cells - 1) as f64, CellKind::Remainder)
        } else if last {
            (TAU, self.mass / self.cells as f64, self.annulus.into())
        } else {
            let m = if self.merged {
                2.0
            } else {
                self.mass / self.cells as f64
            };
            ((j + 1) as f64 * self.cell_angle, m, self.annulus.into())
        };
        PolarCell {
            g_lo: self.g_lo,
            g_hi: self.g_hi,
            theta_lo,
            theta_hi,
            mass,
            kind,
            generation: self.generation,
            ring: self.index,
            index: j,
            g_centroid: self.g_centroid,
            density: self.density,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = PolarCell> + '_ {
        (0..self.cells).map(move |j| self.cell(j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub ceiling: u64,
    pub cells_enumerated: u64,
    /// Outer edge of the last ring kept.
    pub g_reached: LogGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub generation: usize,
    pub g_max: LogGap,
    pub rings: Vec<Ring>,
    /// Set when the cell ceiling stopped the enumeration early.
    pub truncated: Option<Truncation>,
}

impl Partition {
    pub fn cell_count(&self) -> u64 {
        self.rings.iter().map(|r| r.cells).sum()
    }

    pub fn cells(&self) -> impl Iterator<Item = PolarCell> + '_ {
        self.rings.iter().flat_map(|r| r.cells())
    }

    /// Largest side-length ratio over all rings (regular and last cells).
    pub fn max_aspect(&self) -> f64 {
        self.rings
            .iter()
            .flat_map(|r| [r.cell(0).aspect(), r.cell(r.cells - 1).aspect()])
            .fold(0.0, f64::max)
    }
}

/// Side-length ratio every cell stays below. Regular rings of `A_n` settle
/// at `π(p+2)/2 ≈ 15.7` for `p = 3`, so the bound has to sit above that.
pub const DEFAULT_ASPECT_BOUND: f64 = 20.0;

/// Default cap on the number of cells a partition may describe.
pub const DEFAULT_CELL_CEILING: u64 = 5_000_000;

/// Rings of one generation below `g_max`.
///
/// Rings that would cross `g_max` are dropped; the last partial ring of an
/// annulus that ends below `g_max` is merged into the preceding ring.
pub fn partition_region(
    profile: &PiecewiseProfile,
    generation: usize,
    g_max: LogGap,
    ceiling: u64,
) -> Result<Partition, RieszError> {
    let gens = &profile.scaffold.generations;
    if generation == 0 || generation > gens.len() {
        return Err(RieszError::Generation {
            n: generation,
            max: gens.len(),
        });
    }
    if g_max.g() > MAX_ENUMERATION_G {
        return Err(RieszError::GMax(g_max.g()));
    }
    let params = &profile.scaffold.params;
    let gen = &gens[generation - 1];
    let start = if generation == 1 {
        0.0
    } else {
        gens[generation - 2].g_dprime.g()
    };
    let pe = params.p2 + gen.eps_n;
    let p1 = params.p1;
    let gp = gen.g_prime.g();
    let uh = gen.u_hat;
    let log_m = (params.p2 - params.p1).ln() + 2.0 * uh.ln() + 2.0 * gen.g_hat.g();
    let b_density = Density {
        p: p1,
        g_prime: gp,
        log_m: f64::NEG_INFINITY,
    };
    let star_density = Density { log_m, ..b_density };

    let mut out = Partition {
        generation,
        g_max,
        rings: Vec::new(),
        truncated: None,
    };
    let mut total = 0u64;
    let annuli: [(Annulus, f64, f64, Density); 4] = [
        (Annulus::A, start, gen.g_n.g(), Density::outer(pe)),
        (Annulus::AHat, gp, gen.g_hat.g(), b_density),
        (Annulus::AStar, gen.g_hat.g(), gen.g_star.g(), star_density),
        (Annulus::ADprime, gen.g_star.g(), gen.g_dprime.g(), b_density),
    ];
    for (annulus, lo, hi, density) in annuli {
        if hi <= lo {
            continue;
        }
        let step = |g: f64| match annulus {
            Annulus::A => g + (2.0 * m_delta(g).1 / pe).ln_1p(),
            Annulus::AStar => f64::INFINITY,
            _ => next_ring_p1(g, p1, gp),
        };
        let mut rings: Vec<(f64, f64)> = Vec::new();
        let mut g = lo;
        let mut finished = false;
        loop {
            let next = step(g);
            if next >= hi * (1.0 - 4.0 * f64::EPSILON) {
                // partial last ring: merge it into the previous ring
                match rings.last_mut() {
                    Some(last) => last.1 = hi,
                    None => rings.push((g, hi)),
                }
                finished = true;
                break;
            }
            if next > g_max.g() {
                break;
            }
            rings.push((g, next));
            g = next;
        }
        let n_rings = rings.len();
        for (i, (a, b)) in rings.into_iter().enumerate() {
            if b > g_max.g() {
                break;
            }
            let merged = finished && i + 1 == n_rings;
            let ring = Ring::build(generation, annulus, out.rings.len(), a, b, merged, density)?;
            if total + ring.cells > ceiling {
                out.truncated = Some(Truncation {
                    ceiling,
                    cells_enumerated: total,
                    g_reached: out.rings.last().map(|r| r.g_hi).unwrap_or(LogGap::ZERO),
                });
                return Ok(out);
            }
            total += ring.cells;
            out.rings.push(ring);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroMode {
    /// One double zero per cell.
    Double,
    /// Two simple zeros per cell, side by side in angle.
    SimplePair,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub g: LogGap,
    pub theta: f64,
    pub mult: u32,
    /// Index of the cell (or angular part of a cell) this zero replaces.
    pub cell: usize,
}

/// Zeros of one ring occupy `start..end`, sorted by angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingSpan {
    pub g_lo: f64,
    pub g_hi: f64,
    pub g_zero: f64,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ZeroCloud {
    pub zeros: Vec<Zero>,
    /// Source cells; remainder cells that carry two zeros appear split in
    /// angle, one part per zero.
    pub cells: Vec<PolarCell>,
    pub spans: Vec<RingSpan>,
}

impl ZeroCloud {
    /// Cloud of free points `(g, θ, mult)` with no source cells. Points
    /// sharing a log-gap form one span.
    pub fn from_points(points: &[(LogGap, f64, u32)]) -> Self {
        let mut pts: Vec<(LogGap, f64, u32)> = points
            .iter()
            .map(|&(g, t, m)| (g, t.rem_euclid(2.0 * PI), m))
            .collect();
        pts.sort_by(|a, b| a.0.g().total_cmp(&b.0.g()).then(a.1.total_cmp(&b.1)));
        let mut cloud = ZeroCloud::default();
        for (g, theta, mult) in pts {
            let new_span = cloud.spans.last().map_or(true, |s| s.g_zero != g.g());
            if new_span {
                let start = cloud.zeros.len();
                cloud.spans.push(RingSpan {
                    g_lo: g.g(),
                    g_hi: g.g(),
                    g_zero: g.g(),
                    start,
                    end: start,
                });
            }
            cloud.zeros.push(Zero {
                g,
                theta,
                mult,
                cell: usize::MAX,
            });
            cloud.spans.last_mut().expect("span pushed").end += 1;
        }
        cloud
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.zeros.iter().map(|z| z.mult as u64).sum()
    }

    /// Kind of the source cell; `None` for free points.
    pub fn kind(&self, z: &Zero) -> Option<CellKind> {
        self.cells.get(z.cell).map(|c| c.kind)
    }

    /// Indices of zeros in ring spans meeting `[g_lo, g_hi]` whose angle is
    /// within `half` of `theta`.
    pub(crate) fn near(&self, g_lo: f64, g_hi: f64, theta: f64, half: impl Fn(&RingSpan) -> f64) -> Vec<usize> {
        let mut out = Vec::new();
        for s in &self.spans {
            if s.g_zero < g_lo || s.g_zero > g_hi {
                continue;
            }
            let h = half(s);
            if h.is_nan() || h < 0.0 {
                continue;
            }
            let zs = &self.zeros[s.start..s.end];
            if h >= PI {
                out.extend(s.start..s.end);
                continue;
            }
            let lo = (theta - h).rem_euclid(TAU);
            let hi = (theta + h).rem_euclid(TAU);
            let idx = |t: f64| zs.partition_point(|z| z.theta < t);
            let (a, b) = (idx(lo), zs.partition_point(|z| z.theta <= hi));
            if lo <= hi {
                out.extend(s.start + a..s.start + b);
            } else {
                out.extend(s.start + a..s.end);
                out.extend(s.start..s.start + b);
            }
        }
        out
    }
}

/// Place one zero (or two) per cell at the radial `Δφ`-centroid and the
/// angular midpoint. Remainder cells of mass at least 3 carry twice the
/// multiplicity, split into two angular halves.
pub fn atomize<I: IntoIterator<Item = PolarCell>>(cells: I, mode: ZeroMode) -> ZeroCloud {
    let mut cloud = ZeroCloud::default();
    let mut key = None;
    for cell in cells {
        let k = (cell.generation, cell.ring, cell.g_lo.g().to_bits());
        if key != Some(k) {
            if let Some(s) = cloud.spans.last_mut() {
                s.end = cloud.zeros.len();
            }
            cloud.spans.push(RingSpan {
                g_lo: cell.g_lo.g(),
                g_hi: cell.g_hi.g(),
                g_zero: cell.g_centroid.g(),
                start: cloud.zeros.len(),
                end: cloud.zeros.len(),
            });
            key = Some(k);
        }
        let doubled = cell.kind == CellKind::Remainder && cell.mass >= 3.0;
        let parts = match (mode, doubled) {
            (ZeroMode::Double, false) => 1,
            (ZeroMode::Double, true) | (ZeroMode::SimplePair, false) => 2,
            (ZeroMode::SimplePair, true) => 4,
        };
        let mult = if mode == ZeroMode::Double { 2 } else { 1 };
        let width = (cell.theta_hi - cell.theta_lo) / parts as f64;
        for i in 0..parts {
            let mut part = cell;
            if parts > 1 {
                part.theta_lo = cell.theta_lo + i as f64 * width;
                part.theta_hi = part.theta_lo + width;
                part.mass = cell.mass / parts as f64;
            }
            cloud.cells.push(part);
            cloud.zeros.push(Zero {
                g: cell.g_centroid,
                theta: 0.5 * (part.theta_lo + part.theta_hi),
                mult,
                cell: cloud.cells.len() - 1,
            });
        }
    }
    if let Some(s) = cloud.spans.last_mut() {
        s.end = cloud.zeros.len();
    }
    cloud
}

/// A point of the disc in polar log-gap form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub g: LogGap,
    pub theta: f64,
}

impl PolarPoint {
    pub fn new(g: LogGap, theta: f64) -> Self {
        PolarPoint { g, theta }
    }
}

/// `|z-ζ|²` and `|1-z̄ζ|²` from log-gaps and the angle difference, without
/// forming `r` near 1.
pub(crate) fn kernel_parts(dz: f64, dw: f64, dtheta: f64) -> (f64, f64) {
    let (rz, rw) = (1.0 - dz, 1.0 - dw);
    let s = (0.5 * dtheta).sin();
    let ang = 4.0 * rz * rw * s * s;
    let num = (dz - dw) * (dz - dw) + ang;
    let one_minus = dz + dw - dz * dw;
    (num, one_minus * one_minus + ang)
}

/// `log|(z-ζ)/(1-z̄ζ)|`.
pub fn log_pseudo_hyperbolic(z: PolarPoint, w: PolarPoint) -> f64 {
    let (num, den) = kernel_parts(z.g.delta(), w.g.delta(), z.theta - w.theta);
    if num == 0.0 {
        return f64::NEG_INFINITY;
    }
    0.5 * (num.ln() - den.ln())
}

/// `1 - |b(z,ζ)|² = (1-|z|²)(1-|ζ|²)/|1-z̄ζ|²`.
fn proximity(dz: f64, dw: f64, den: f64) -> f64 {
    dz * (2.0 - dz) * dw * (2.0 - dw) / den
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateOptions {
    /// Atoms with `1 - |b(z,ζ)|² < window` are skipped; 0 sums every atom.
    pub window: f64,
    /// Gauss–Legendre order per direction for the cell average.
    pub far_order: usize,
    /// Order used when `1 - |b|² > 0.05`.
    pub near_order: usize,
}

impl Default for SurrogateOptions {
    fn default() -> Self {
        SurrogateOptions {
            window: 1e-3,
            far_order: 6,
            near_order: 16,
        }
    }
}

struct Rules {
    far: (Vec<f64>, Vec<f64>),
    near: (Vec<f64>, Vec<f64>),
}

impl Rules {
    fn new(o: &SurrogateOptions) -> Self {
        Rules {
            far: gauss_legendre(o.far_order.max(1)),
            near: gauss_legendre(o.near_order.max(1)),
        }
    }
}

/// `Δφ`-weighted average of `log|b(z,·)|` over a cell, tensor
/// Gauss–Legendre in `(g, θ)`. Boxes that contain `z` (or nearly do) are
/// split in four so the logarithmic singularity stays resolved.
fn cell_average(z: PolarPoint, cell: &PolarCell, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let mut sums = (0.0, 0.0);
    let dz = z.g.delta();
    let bx = [cell.g_lo.g(), cell.g_hi.g(), cell.theta_lo, cell.theta_hi];
    average_box(z, dz, cell, bx, rule, 0, &mut sums);
    sums.0 / sums.1
}

const MAX_SPLIT_DEPTH: u32 = 8;

fn average_box(
    z: PolarPoint,
    dz: f64,
    cell: &PolarCell,
    [ga, gb, ta, tb]: [f64; 4],
    rule: &(Vec<f64>, Vec<f64>),
    depth: u32,
    sums: &mut (f64, f64),
) {
    let (hg, cg) = (0.5 * (gb - ga), 0.5 * (gb + ga));
    let (ht, ct) = (0.5 * (tb - ta), 0.5 * (tb + ta));
    let dtheta = (z.theta - ct + PI).rem_euclid(TAU) - PI;
    let close = (z.g.g() - cg).abs() <= 2.0 * hg && dtheta.abs() <= 2.0 * ht;
    if close && depth < MAX_SPLIT_DEPTH {
        for (g0, g1) in [(ga, cg), (cg, gb)] {
            for (t0, t1) in [(ta, ct), (ct, tb)] {
                average_box(z, dz, cell, [g0, g1, t0, t1], rule, depth + 1, sums);
            }
        }
        return;
    }
    let (x, w) = rule;
    let g_ref = cell.g_lo.g();
    for (xi, wi) in x.iter().zip(w) {
        let g = cg + hg * xi;
        let dw = (-g).exp();
        let wr = wi * hg * cell.density.per_g_scaled(g, g_ref);
        for (xj, wj) in x.iter().zip(w) {
            let th = ct + ht * xj;
            let (num, den) = kernel_parts(dz, dw, z.theta - th);
            let wt = wr * wj * ht;
            sums.0 += wt * 0.5 * (num.ln() - den.ln());
            sums.1 += wt;
        }
    }
}

/// Radial window of `t = δ_ζ/δ_z` for which `4t/(1+t)² ≥ τ`.
fn ratio_window(tau: f64) -> (f64, f64) {
    if tau <= 0.0 {
        return (0.0, f64::INFINITY);
    }
    let s = (1.0 - tau).max(0.0).sqrt();
    let c = (1.0 + s) / (1.0 - s).max(f64::MIN_POSITIVE);
    // slack for the finite radial extent of a ring
    (1.0 / (2.0 * c), 2.0 * c)
}

/// Sum over atoms of `mult·[log|b(z,ζ)| - cell average]`, the correction
/// the surrogate adds to `φ`.
pub fn surrogate_correction(cloud: &ZeroCloud, z: PolarPoint, opts: &SurrogateOptions) -> f64 {
    let rules = Rules::new(opts);
    correction_with(cloud, z, opts, &rules)
}

fn correction_with(cloud: &ZeroCloud, z: PolarPoint, opts: &SurrogateOptions, rules: &Rules) -> f64 {
    let dz = z.g.delta();
    let (t_lo, t_hi) = ratio_window(opts.window);
    let g_lo = z.g.g() - t_hi.ln();
    let g_hi = z.g.g() - t_lo.ln();
    let rz = z.g.r();
    let idx = cloud.near(g_lo, g_hi, z.theta, |s| {
        if opts.window <= 0.0 {
            return PI;
        }
        // widest angle at which 1-|b|² can still reach the window
        let dw = (-s.g_lo).exp();
        let one_minus = dz + dw - dz * dw;
        let rw = 1.0 - dw;
        let lim = (dz * (2.0 - dz) * dw * (2.0 - dw) / opts.window - one_minus * one_minus)
            / (4.0 * rz * rw).max(f64::MIN_POSITIVE);
        if lim >= 1.0 {
            PI
        } else if lim <= 0.0 {
            0.0
        } else {
            2.0 * lim.sqrt().asin()
        }
    });
    let mut total = 0.0;
    for i in idx {
        let a = &cloud.zeros[i];
        let dw = a.g.delta();
        let (num, den) = kernel_parts(dz, dw, z.theta - a.theta);
        let prox = proximity(dz, dw, den);
        if prox < opts.window {
            continue;
        }
        if num == 0.0 {
            return f64::NEG_INFINITY;
        }
        let k = 0.5 * (num.ln() - den.ln());
        let rule = if prox > 0.05 { &rules.near } else { &rules.far };
        let avg = cell_average(z, &cloud.cells[a.cell], rule);
        total += a.mult as f64 * (k - avg);
    }
    total
}

/// Surrogate for `log|A(z)|`: `φ(|z|)` plus the atom corrections.
pub fn eval_log_surrogate(
    cloud: &ZeroCloud,
    profile: &PiecewiseProfile,
    z: PolarPoint,
    opts: &SurrogateOptions,
) -> Result<f64, RieszError> {
    let phi = profile.eval(z.g)?.phi;
    Ok(phi + surrogate_correction(cloud, z, opts))
}

/// Whether `z` lies within `ε(1-|z|)` of some zero.
pub fn in_excluded_set(cloud: &ZeroCloud, z: PolarPoint, eps: f64) -> bool {
    if eps <= 0.0 {
        return false;
    }
    let dz = z.g.delta();
    let g = z.g.g();
    let (lo, hi) = (g - (1.0 + eps).ln(), g - (1.0 - eps).max(f64::MIN_POSITIVE).ln());
    let r = z.g.r();
    let half = 2.0 * (eps * dz / (2.0 * r.max(0.5))).min(1.0).asin();
    cloud.near(lo, hi, z.theta, |_| half).into_iter().any(|i| {
        let a = &cloud.zeros[i];
        let (num, _) = kernel_parts(dz, a.g.delta(), z.theta - a.theta);
        num <= (eps * dz) * (eps * dz)
    })
}

/// Arc length of `{θ : dist(re^{iθ}, zeros) ≤ ε(1-r)}` on the circle at `g`.
pub fn excluded_arc_measure(cloud: &ZeroCloud, g: LogGap, eps: f64) -> f64 {
    if eps <= 0.0 {
        return 0.0;
    }
    let d = g.delta();
    let r = g.r();
    let lo = g.g() - (1.0 + eps).ln();
    let hi = g.g() - (1.0 - eps).max(f64::MIN_POSITIVE).ln();
    let mut arcs: Vec<(f64, f64)> = Vec::new();
    for s in &cloud.spans {
        if s.g_zero < lo || s.g_zero > hi {
            continue;
        }
        for a in &cloud.zeros[s.start..s.end] {
            let dw = a.g.delta();
            let rad = (eps * d) * (eps * d) - (dw - d) * (dw - d);
            if rad < 0.0 {
                continue;
            }
            let s2 = rad / (4.0 * r * (1.0 - dw));
            let h = if s2 >= 1.0 { PI } else { 2.0 * s2.sqrt().asin() };
            if h >= PI {
                return TAU * r;
            }
            let a0 = (a.theta - h).rem_euclid(TAU);
            let a1 = a0 + 2.0 * h;
            if a1 > TAU {
                arcs.push((a0, TAU));
                arcs.push((0.0, a1 - TAU));
            } else {
                arcs.push((a0, a1));
            }
        }
    }
    arcs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (a, b) in arcs {
        match cur {
            Some((c0, c1)) if a <= c1 => cur = Some((c0, c1.max(b))),
            Some((c0, c1)) => {
                total += c1 - c0;
                cur = Some((a, b));
            }
            None => cur = Some((a, b)),
        }
    }
    if let Some((c0, c1)) = cur {
        total += c1 - c0;
    }
    r * total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcRow {
    pub g: f64,
    pub eps: f64,
    pub measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationReport {
    pub samples_used: usize,
    pub samples_excluded: usize,
    pub max_abs_error: f64,
    /// `max |surrogate - φ| / (1 + log g)`.
    pub max_statistic: f64,
    /// Least-squares fit `|err| ≈ c1 + c2 log g`.
    pub fit_c1: f64,
    pub fit_c2: f64,
    pub arcs: Vec<ArcRow>,
    /// `max measure/ε` over the arc rows.
    pub fitted_c4: f64,
}

/// Error shape of the surrogate away from `E_ε` and the excluded arc
/// measure on the given circles. Samples need `g ≥ 1`.
pub fn approximation_report(
    cloud: &ZeroCloud,
    profile: &PiecewiseProfile,
    samples: &[PolarPoint],
    eps: f64,
    circles: &[LogGap],
    opts: &SurrogateOptions,
) -> Result<ApproximationReport, RieszError> {
    let rules = Rules::new(opts);
    let mut errs = Vec::new();
    let mut excluded = 0;
    for &z in samples {
        if in_excluded_set(cloud, z, eps) {
            excluded += 1;
            continue;
        }
        profile.eval(z.g)?;
        let e = correction_with(cloud, z, opts, &rules).abs();
        errs.push((z.g.g().ln(), e));
    }
    let max_abs_error = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let max_statistic = errs.iter().map(|e| e.1 / (1.0 + e.0)).fold(0.0, f64::max);
    let (fit_c1, fit_c2) = linear_fit(&errs);
    let arcs: Vec<ArcRow> = circles
        .iter()
        .map(|&g| ArcRow {
            g: g.g(),
            eps,
            measure: excluded_arc_measure(cloud, g, eps),
        })
        .collect();
    Ok(ApproximationReport {
        samples_used: errs.len(),
        samples_excluded: excluded,
        max_abs_error,
        max_statistic,
        fit_c1,
        fit_c2,
        fitted_c4: fit_c4(&arcs),
        arcs,
    })
}

/// Riesz mass of a cell by adaptive quadrature of the profile's Laplacian,
/// `∫∫ Δφ r dr dθ / 2π`, independent of the ring formulas.
pub fn cell_quadrature_mass(profile: &PiecewiseProfile, cell: &PolarCell) -> Result<f64, RieszError> {
    let (ga, gb) = (cell.g_lo.g(), cell.g_hi.g());
    let mut bad = None;
    let radial = integrate(
        |g| match LogGap::new(g).map_err(RieszError::from).and_then(|x| {
            profile.eval(x).map_err(RieszError::from).map(|e| (x, e))
        }) {
            Ok((x, e)) => e.lap_scaled * x.r() * (g - ga).exp(),
            Err(err) => {
                bad = Some(err);
                0.0
            }
        },
        ga,
        gb,
        Singularity::None,
    )?;
    if let Some(err) = bad {
        return Err(err);
    }
    Ok(radial * ga.exp() * (cell.theta_hi - cell.theta_lo) / (2.0 * PI))
}

/// `max measure/ε` over rows with `ε > 0`.
pub fn fit_c4(rows: &[ArcRow]) -> f64 {
    rows.iter()
        .filter(|a| a.eps > 0.0)
        .map(|a| a.measure / a.eps)
        .fold(0.0, f64::max)
}

fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (pts.first().map(|p| p.1).unwrap_or(0.0), 0.0);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return (my, 0.0);
    }
    let b = sxy / sxx;
    (my - b * mx, b)
}
