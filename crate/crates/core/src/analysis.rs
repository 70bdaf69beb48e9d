//! Error analysis for projection-based reductions: exact pointwise error
//! formulas, principal-angle H∞ bounds, H∞ and H2 error estimates and
//! frequency-response tables.
//!
//! A reduction is described by the full model and its projection pair
//! `(W, V)` with `Wᴴ V = I`; the reduced model is `(Wᴴ A V, Wᴴ B, C V, D)`.
//! For quadrature systems `W` and `V` are real, so `Wᴴ = Wᵀ`.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::StateSpace;

/// Number of log-spaced points in the default grid.
pub const DEFAULT_GRID_POINTS: usize = 2000;
/// Relative bracket width at which peak refinement stops.
const REFINE_REL_WIDTH: f64 = 1e-6;
/// Number of grid local maxima refined for each supremum.
const REFINE_CANDIDATES: usize = 3;

/// Frequencies on which suprema and curves are evaluated: `count`
/// log-spaced points over `[omega_min, omega_max]`, the origin, any extra
/// frequencies (pole resonances), and the mirror images of all of them when
/// `symmetric` is false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub count: usize,
    /// Whether `‖Ξ(-iω)‖ = ‖Ξ(iω)‖` may be assumed (real systems).
    pub symmetric: bool,
    #[serde(default)]
    pub extra: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omega_min: f64, omega_max: f64, count: usize) -> Result<Self> {
        if !(omega_min > 0.0 && omega_max > omega_min && omega_max.is_finite()) || count < 2 {
            return Err(Error::Invalid(format!(
                "frequency grid needs 0 < wmin < wmax and at least 2 points (got {omega_min}, {omega_max}, {count})"
            )));
        }
        Ok(Self {
            omega_min,
            omega_max,
            count,
            symmetric: true,
            extra: Vec::new(),
        })
    }

    /// Default grid for a set of systems: `[1e-2 λ_min, 1e2 λ_max]` from the
    /// smallest and largest nonzero pole magnitudes, plus each pole's
    /// imaginary part. Symmetric only when every system is real.
    pub fn standard(systems: &[&StateSpace]) -> Result<Self> {
        let mut mags = Vec::new();
        let mut extra = Vec::new();
        for ss in systems {
            for p in ss.poles()? {
                let m = p.norm();
                if m > 0.0 {
                    mags.push(m);
                }
                if p.im != 0.0 {
                    extra.push(p.im.abs());
                }
            }
        }
        let lmin = mags.iter().copied().fold(f64::INFINITY, f64::min);
        let lmax = mags.iter().copied().fold(0.0, f64::max);
        let (lmin, lmax) = if mags.is_empty() { (1.0, 1.0) } else { (lmin, lmax) };
        let mut g = Self::new(1e-2 * lmin, 1e2 * lmax, DEFAULT_GRID_POINTS)?;
        g.symmetric = systems.iter().all(|s| s.is_real());
        g.extra = extra;
        Ok(g)
    }

    /// Replaces range and count while keeping symmetry and extras.
    pub fn with_range(mut self, omega_min: f64, omega_max: f64, count: usize) -> Result<Self> {
        let g = Self::new(omega_min, omega_max, count)?;
        self.omega_min = g.omega_min;
        self.omega_max = g.omega_max;
        self.count = g.count;
        Ok(self)
    }

    /// Log-spaced points only, ascending.
    pub fn log_points(&self) -> Vec<f64> {
        let (a, b) = (self.omega_min.ln(), self.omega_max.ln());
        let k = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| (a + (b - a) * i as f64 / k).exp())
            .collect()
    }

    /// All evaluation frequencies, sorted ascending without duplicates.
    pub fn points(&self) -> Vec<f64> {
        let mut pts = self.log_points();
        pts.push(0.0);
        pts.extend(
            self.extra
                .iter()
                .copied()
                .filter(|w| w.is_finite() && *w >= self.omega_min && *w <= self.omega_max),
        );
        if !self.symmetric {
            let neg: Vec<f64> = pts.iter().filter(|w| **w > 0.0).map(|w| -w).collect();
            pts.extend(neg);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|b, a| (*b - *a).abs() <= 1e-9 * a.abs().max(b.abs()));
        pts
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            omega_min: self.omega_min,
            omega_max: self.omega_max,
            count: self.count,
            spacing: "log".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub omega_min: f64,
    pub omega_max: f64,
    pub count: usize,
    pub spacing: String,
}

/// Supremum estimate of a frequency function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupEstimate {
    #[serde(with = "float_or_inf")]
    pub value: f64,
    pub omega: f64,
}

fn better(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    // Larger value wins; ties go to the lower frequency.
    if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
        b
    } else {
        a
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, scale: f64) -> (f64, f64) {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - R * (hi - lo);
    let mut x2 = lo + R * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut it = 0;
    while hi - lo > REFINE_REL_WIDTH * scale && it < 200 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - R * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + R * (hi - lo);
            f2 = f(x2);
        }
        it += 1;
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Grid maximum of `f` over the ascending frequencies `omegas`, followed by
/// golden-section refinement around the largest local maxima. Evaluations
/// on the grid run in parallel; an infinite value is returned as soon as
/// it is seen. This is a lower estimate of the true supremum.
pub fn sup_on_grid<F>(omegas: &[f64], f: F) -> SupEstimate
where
    F: Fn(f64) -> f64 + Sync,
{
    if omegas.is_empty() {
        return SupEstimate { value: 0.0, omega: 0.0 };
    }
    let vals: Vec<f64> = omegas
        .par_iter()
        .map(|&w| {
            let v = f(w);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        })
        .collect();
    let mut best = (omegas[0], vals[0]);
    for (&w, &v) in omegas.iter().zip(&vals) {
        best = better(best, (w, v));
    }
    if best.1.is_infinite() {
        return SupEstimate {
            value: best.1,
            omega: best.0,
        };
    }
    let n = omegas.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&k| (k == 0 || vals[k] >= vals[k - 1]) && (k + 1 == n || vals[k] >= vals[k + 1]))
        .collect();
    peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    peaks.truncate(REFINE_CANDIDATES);
    let refined: Vec<(f64, f64)> = peaks
        .par_iter()
        .map(|&k| {
            let lo = omegas[k.saturating_sub(1)];
            let hi = omegas[(k + 1).min(n - 1)];
            if hi <= lo {
                return (omegas[k], vals[k]);
            }
            let scale = omegas[k].abs().max(lo.abs()).max(hi.abs());
            let g = |w: f64| {
                let v = f(w);
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v
                }
            };
            golden_max(&g, lo, hi, scale)
        })
        .collect();
    for r in refined {
        best = better(best, r);
    }
    SupEstimate {
        value: best.1,
        omega: best.0,
    }
}

fn require_hurwitz(ss: &StateSpace) -> Result<()> {
    if ss.order() == 0 {
        return Ok(());
    }
    let a = ss.spectral_abscissa()?;
    if a >= 0.0 {
        return Err(Error::NotHurwitz(a));
    }
    Ok(())
}

/// `‖·‖₂` of the transfer at `iω`, infinite at a pole.
fn gain(ss: &StateSpace, w: f64) -> f64 {
    match ss.transfer(Complex64::new(0.0, w)) {
        Ok(x) => linalg::norm2(&x),
        Err(_) => f64::INFINITY,
    }
}

/// H∞ norm estimate of a stable system and the frequency of the peak.
/// `grid = None` uses [`FrequencyGrid::standard`].
pub fn hinf_norm(sys: &StateSpace, grid: Option<&FrequencyGrid>) -> Result<SupEstimate> {
    require_hurwitz(sys)?;
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned = FrequencyGrid::standard(&[sys])?;
            &owned
        }
    };
    Ok(sup_on_grid(&grid.points(), |w| gain(sys, w)))
}

/// Reduced model `(Wᴴ A V, Wᴴ B, C V, D)`.
pub fn project(full: &StateSpace, w: &Matrix, v: &Matrix) -> Result<StateSpace> {
    let n = full.order();
    if w.shape() != v.shape() || w.nrows() != n {
        return Err(Error::Dimension(format!(
            "projection matrices W {:?}, V {:?} for a state of dimension {n}",
            w.shape(),
            v.shape()
        )));
    }
    let wh = w.adjoint();
    StateSpace::new(&wh * &full.a * v, &wh * &full.b, &full.c * v, full.d.clone())
}

/// H∞ norm of `Ξ - Ξ_r` for two stable systems, on the standard grid of
/// both unless a grid is given.
pub fn hinf_error(full: &StateSpace, red: &StateSpace, grid: Option<&FrequencyGrid>) -> Result<SupEstimate> {
    require_hurwitz(full)?;
    require_hurwitz(red)?;
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned = FrequencyGrid::standard(&[full, red])?;
            &owned
        }
    };
    Ok(sup_on_grid(&grid.points(), |w| pointwise_error(full, red, w)))
}

/// `‖Ξ(iω) - Ξ_r(iω)‖₂`, infinite at a pole of either system.
pub fn pointwise_error(full: &StateSpace, red: &StateSpace, w: f64) -> f64 {
    let s = Complex64::new(0.0, w);
    match (full.transfer(s), red.transfer(s)) {
        (Ok(x), Ok(y)) => linalg::norm2(&(x - y)),
        _ => f64::INFINITY,
    }
}

/// The three expressions for the error at one point and the idempotency
/// residuals of the two oblique projectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorIdentity {
    /// `‖Ξ(s) - Ξ_r(s)‖`.
    pub direct: f64,
    /// `‖C (sI - A)^{-1} (I - Q(s)) B‖`.
    pub via_q: f64,
    /// `‖C (I - R(s)) (sI - A)^{-1} B‖`.
    pub via_r: f64,
    pub q_norm: f64,
    pub r_norm: f64,
    /// `‖Q² - Q‖`.
    pub q_idempotency: f64,
    /// `‖R² - R‖`.
    pub r_idempotency: f64,
}

/// Evaluates the error at `s` directly and through the oblique projectors
/// `Q(s) = (sI - A) V (sI - A_r)^{-1} Wᴴ` and
/// `R(s) = V (sI - A_r)^{-1} Wᴴ (sI - A)`.
pub fn error_exact(full: &StateSpace, w: &Matrix, v: &Matrix, s: Complex64) -> Result<ErrorIdentity> {
    let red = project(full, w, v)?;
    let n = full.order();
    let direct = linalg::norm2(&(full.transfer(s)? - red.transfer(s)?));
    let m = linalg::shifted(&full.a, s);
    let ar_inv_wh = linalg::resolvent_solve(&red.a, s, &w.adjoint())?;
    let q = &m * v * &ar_inv_wh;
    let r = v * &ar_inv_wh * &m;
    let id = linalg::identity(n);
    let resolvent_b = linalg::resolvent_solve(&full.a, s, &full.b)?;
    let ct = full.c.transpose();
    // C (sI - A)^{-1} X via the transposed system avoids forming the inverse.
    let c_res = linalg::solve(&m.transpose(), &ct)?.transpose();
    let via_q = linalg::norm2(&(&c_res * (&id - &q) * &full.b));
    let via_r = linalg::norm2(&(&full.c * (&id - &r) * &resolvent_b));
    Ok(ErrorIdentity {
        direct,
        via_q,
        via_r,
        q_norm: linalg::norm2(&q),
        r_norm: linalg::norm2(&r),
        q_idempotency: linalg::norm2(&(&q * &q - &q)),
        r_idempotency: linalg::norm2(&(&r * &r - &r)),
    })
}

/// `(1 - ‖P_x - P_y‖²)^{-1/2}`: the secant of the largest principal angle
/// between two subspaces of equal dimension given by their orthogonal
/// projectors. Infinite when the angle reaches 90 degrees.
pub fn projector_secant(p_x: &Matrix, p_y: &Matrix) -> f64 {
    let d = linalg::norm2(&(p_x - p_y));
    let gap = 1.0 - d * d;
    if gap <= 0.0 || !gap.is_finite() {
        f64::INFINITY
    } else {
        1.0 / gap.sqrt()
    }
}

fn range_projector(m: &Matrix) -> Matrix {
    let basis = linalg::svd_rank_and_bases(m, None).range;
    let q = basis.columns();
    q * q.adjoint()
}

fn orthonormal_projector(v: &Matrix) -> Matrix {
    range_projector(v)
}

struct BoundContext<'a> {
    full: &'a StateSpace,
    w: &'a Matrix,
    v: &'a Matrix,
    p_w: Matrix,
    p_v: Matrix,
    id: Matrix,
}

impl<'a> BoundContext<'a> {
    fn new(full: &'a StateSpace, w: &'a Matrix, v: &'a Matrix) -> Self {
        Self {
            full,
            w,
            v,
            p_w: orthonormal_projector(w),
            p_v: orthonormal_projector(v),
            id: linalg::identity(full.order()),
        }
    }

    /// `sec(W⊥, U_V) ‖C (iωI - A)^{-1} P_{W⊥}‖ ‖P_{U_V} B‖` with
    /// `U_V = ker{Vᴴ (iωI - A)ᴴ} = ((iωI - A) V)⊥`.
    fn left(&self, omega: f64) -> f64 {
        let s = Complex64::new(0.0, omega);
        let m = linalg::shifted(&self.full.a, s);
        let p_mv = range_projector(&(&m * self.v));
        let sec = projector_secant(&self.p_w, &p_mv);
        if sec.is_infinite() {
            return sec;
        }
        let p_w_perp = &self.id - &self.p_w;
        let p_u = &self.id - &p_mv;
        let c_res = match linalg::solve(&m.transpose(), &self.full.c.transpose()) {
            Ok(x) => x.transpose(),
            Err(_) => return f64::INFINITY,
        };
        sec * linalg::norm2(&(c_res * p_w_perp)) * linalg::norm2(&(p_u * &self.full.b))
    }

    /// `sec(U_W, V⊥) ‖C P_{U_W}‖ ‖P_{V⊥} (iωI - A)^{-1} B‖` with
    /// `U_W = ker{Wᴴ (iωI - A)} = ((iωI - A)ᴴ W)⊥`.
    fn right(&self, omega: f64) -> f64 {
        let s = Complex64::new(0.0, omega);
        let m = linalg::shifted(&self.full.a, s);
        let p_mw = range_projector(&(m.adjoint() * self.w));
        let sec = projector_secant(&self.p_v, &p_mw);
        if sec.is_infinite() {
            return sec;
        }
        let p_uw = &self.id - &p_mw;
        let p_v_perp = &self.id - &self.p_v;
        let res_b = match linalg::solve(&m, &self.full.b) {
            Ok(x) => x,
            Err(_) => return f64::INFINITY,
        };
        sec * linalg::norm2(&(&self.full.c * p_uw)) * linalg::norm2(&(p_v_perp * res_b))
    }
}

#[derive(Clone, Copy)]
enum BoundSide {
    Left,
    Right,
}

fn bound_estimate(
    full: &StateSpace,
    w: &Matrix,
    v: &Matrix,
    grid: Option<&FrequencyGrid>,
    side: BoundSide,
) -> Result<SupEstimate> {
    let red = project(full, w, v)?;
    require_hurwitz(full)?;
    require_hurwitz(&red)?;
    let mut grid = match grid {
        Some(g) => g.clone(),
        None => FrequencyGrid::standard(&[full, &red])?,
    };
    // The pointwise bound dominates the pointwise error, so evaluating it
    // at the error peak keeps the two suprema ordered.
    let err_peak = sup_on_grid(&grid.points(), |om| pointwise_error(full, &red, om));
    let ctx = BoundContext::new(full, w, v);
    let f = |om: f64| match side {
        BoundSide::Left => ctx.left(om),
        BoundSide::Right => ctx.right(om),
    };
    grid.extra.push(err_peak.omega.abs());
    let mut est = sup_on_grid(&grid.points(), f);
    let at_peak = f(err_peak.omega);
    if at_peak > est.value {
        est = SupEstimate {
            value: at_peak,
            omega: err_peak.omega,
        };
    }
    Ok(est)
}

/// Left principal-angle bound on `‖Ξ - Ξ_r‖_∞`.
pub fn hinf_bound_left(full: &StateSpace, w: &Matrix, v: &Matrix, grid: Option<&FrequencyGrid>) -> Result<SupEstimate> {
    bound_estimate(full, w, v, grid, BoundSide::Left)
}

/// Right principal-angle bound on `‖Ξ - Ξ_r‖_∞`.
pub fn hinf_bound_right(full: &StateSpace, w: &Matrix, v: &Matrix, grid: Option<&FrequencyGrid>) -> Result<SupEstimate> {
    bound_estimate(full, w, v, grid, BoundSide::Right)
}

/// Both bounds for a one-sided Galerkin reduction with orthonormal `V_a`,
/// where the kernels become `ker{V_aᴴ (sI - F)ᴴ}` and `ker{V_aᴴ (sI - F)}`.
pub fn hinf_bounds_passive(
    full: &StateSpace,
    va: &Matrix,
    grid: Option<&FrequencyGrid>,
) -> Result<(SupEstimate, SupEstimate)> {
    Ok((
        bound_estimate(full, va, va, grid, BoundSide::Left)?,
        bound_estimate(full, va, va, grid, BoundSide::Right)?,
    ))
}

/// Gauss–Kronrod 15-point nodes (nonnegative half) and weights.
const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss 7-point weights for the odd-indexed Kronrod nodes.
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WEIGHTS[7] * fc;
    let mut g = G7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G7_WEIGHTS[i / 2] * s;
        }
    }
    Panel {
        a,
        b,
        value: k * h,
        err: ((k - g) * h).abs(),
    }
}

/// Globally adaptive Gauss–Kronrod integration over consecutive
/// breakpoints: the panel with the largest error estimate is bisected until
/// the total error falls below `rel_tol` of the total or the panel budget
/// runs out.
fn integrate<F: Fn(f64) -> f64 + Sync>(f: &F, breaks: &[f64], rel_tol: f64, max_panels: usize) -> (f64, f64) {
    let mut panels: Vec<Panel> = breaks
        .par_windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(f, w[0], w[1]))
        .collect();
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        if err <= rel_tol * total.abs() || panels.len() >= max_panels || !total.is_finite() {
            return (total, err);
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.err > acc.1 { (i, p.err) } else { acc });
        let p = panels.swap_remove(idx);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            return (total, err);
        }
        panels.push(gk15(f, p.a, mid));
        panels.push(gk15(f, mid, p.b));
    }
}

/// `J₂ = ∫ ‖Ξ(iω) - Ξ_r(iω)‖_F² dω` over the whole real line, by quadrature
/// and by the Gramian identity `2π tr(C_e P_e C_eᴴ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H2Report {
    pub quadrature: f64,
    pub quadrature_error: f64,
    pub gramian: f64,
    /// `|quadrature - gramian| / max(gramian, tiny)`.
    pub relative_gap: f64,
}

fn frob2(x: &Matrix) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Integrated squared error between two stable systems with equal
/// feedthrough. The log-panel range is that of `grid` (default standard);
/// panels also break at every pole resonance, the interval below the grid
/// is integrated linearly and the tail above it assumes `1/ω²` decay.
pub fn h2_error(full: &StateSpace, red: &StateSpace, grid: Option<&FrequencyGrid>) -> Result<H2Report> {
    require_hurwitz(full)?;
    require_hurwitz(red)?;
    let dd = linalg::fro(&(&full.d - &red.d));
    if dd > 1e-12 * (1.0 + linalg::fro(&full.d)) {
        return Err(Error::Invalid(format!(
            "squared error integral diverges: feedthrough difference has norm {dd:e}"
        )));
    }
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned = FrequencyGrid::standard(&[full, red])?;
            &owned
        }
    };
    let err_sq = |w: f64| -> f64 {
        let s = Complex64::new(0.0, w);
        match (full.transfer(s), red.transfer(s)) {
            (Ok(x), Ok(y)) => frob2(&(x - y)),
            _ => f64::INFINITY,
        }
    };
    let symmetric = grid.symmetric;
    let g = |w: f64| if symmetric { 2.0 * err_sq(w) } else { err_sq(w) + err_sq(-w) };

    let (lo, hi) = (grid.omega_min, grid.omega_max);
    let mut breaks = vec![lo.ln(), hi.ln()];
    let decades = ((hi / lo).log10().ceil() as usize).max(1);
    for k in 1..(8 * decades) {
        breaks.push(lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (8 * decades) as f64);
    }
    for p in full.poles()?.into_iter().chain(red.poles()?) {
        let (x, y) = (p.re.abs(), p.im.abs());
        for w in [y, y - x, y + x, y - 5.0 * x, y + 5.0 * x] {
            if w > lo && w < hi {
                breaks.push(w.ln());
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let logf = |u: f64| {
        let w = u.exp();
        g(w) * w
    };
    let (mid, mid_err) = integrate(&logf, &breaks, 1e-10, 4000);
    let (low, low_err) = integrate(&g, &[0.0, lo], 1e-10, 200);
    let tail = g(hi) * hi;
    let quadrature = low + mid + tail;

    let diff = full.difference(red)?;
    let p = linalg::lyapunov_solve(&diff.a, &(&diff.b * diff.b.adjoint()))?;
    let gramian = 2.0 * std::f64::consts::PI * (&diff.c * p * diff.c.adjoint()).trace().re;
    let relative_gap = (quadrature - gramian).abs() / gramian.abs().max(f64::MIN_POSITIVE);
    Ok(H2Report {
        quadrature,
        quadrature_error: mid_err + low_err + tail.abs() * 1e-2,
        gramian,
        relative_gap,
    })
}

/// Everything reported for one reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    #[serde(with = "opt_float_or_inf")]
    pub hinf_error_estimate: Option<f64>,
    pub peak_frequency: Option<f64>,
    #[serde(with = "opt_float_or_inf")]
    pub hinf_bound_left: Option<f64>,
    #[serde(with = "opt_float_or_inf")]
    pub hinf_bound_right: Option<f64>,
    /// Set when the estimate or the bounds could not be computed.
    pub unavailable_reason: Option<String>,
    #[serde(with = "float_pairs")]
    pub pointwise: Vec<(f64, f64)>,
    pub grid_spec: GridSpec,
}

/// Error curve on the log grid and, for stable systems, the H∞ error
/// estimate with both bounds. `w == v` selects the one-sided bounds.
pub fn error_report(full: &StateSpace, w: &Matrix, v: &Matrix, grid: Option<&FrequencyGrid>) -> Result<ErrorReport> {
    let red = project(full, w, v)?;
    let grid = match grid {
        Some(g) => g.clone(),
        None => {
            // The standard grid needs poles only; it exists for unstable
            // systems too.
            FrequencyGrid::standard(&[full, &red])?
        }
    };
    let pointwise: Vec<(f64, f64)> = grid
        .log_points()
        .par_iter()
        .map(|&om| (om, pointwise_error(full, &red, om)))
        .collect();
    let mut report = ErrorReport {
        hinf_error_estimate: None,
        peak_frequency: None,
        hinf_bound_left: None,
        hinf_bound_right: None,
        unavailable_reason: None,
        pointwise,
        grid_spec: grid.spec(),
    };
    let stability = require_hurwitz(full).and_then(|_| require_hurwitz(&red));
    if let Err(e) = stability {
        report.unavailable_reason = Some(format!("H∞ error and bounds need stable systems: {e}"));
        return Ok(report);
    }
    let est = hinf_error(full, &red, Some(&grid))?;
    report.hinf_error_estimate = Some(est.value);
    report.peak_frequency = Some(est.omega);
    report.hinf_bound_left = Some(hinf_bound_left(full, w, v, Some(&grid))?.value);
    report.hinf_bound_right = Some(hinf_bound_right(full, w, v, Some(&grid))?.value);
    Ok(report)
}

/// One frequency-response sample; `None` where `iω` is a pole.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseRow {
    pub omega: f64,
    pub value: Option<Matrix>,
}

pub fn frequency_response(sys: &StateSpace, omegas: &[f64]) -> Vec<ResponseRow> {
    omegas
        .par_iter()
        .map(|&om| ResponseRow {
            omega: om,
            value: sys.transfer(Complex64::new(0.0, om)).ok(),
        })
        .collect()
}

/// Writes a response table: `omega` followed, for every entry in row-major
/// order, by `entry_i_j_re`, `entry_i_j_im`, `entry_i_j_db` and
/// `entry_i_j_deg` (1-based indices). Poles give a row of `NaN` values.
pub fn write_response_csv<W: Write>(rows: &[ResponseRow], outputs: usize, inputs: usize, mut out: W) -> Result<()> {
    let mut header = vec!["omega".to_string()];
    for i in 1..=outputs {
        for j in 1..=inputs {
            for suffix in ["re", "im", "db", "deg"] {
                header.push(format!("entry_{i}_{j}_{suffix}"));
            }
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let mut fields = vec![fmt_f64(row.omega)];
        match &row.value {
            Some(x) => {
                for i in 0..outputs {
                    for j in 0..inputs {
                        let z = x[(i, j)];
                        fields.push(fmt_f64(z.re));
                        fields.push(fmt_f64(z.im));
                        fields.push(fmt_f64(20.0 * z.norm().log10()));
                        fields.push(fmt_f64(z.arg().to_degrees()));
                    }
                }
            }
            None => fields.extend(std::iter::repeat_n("NaN".to_string(), 4 * outputs * inputs)),
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Writes `omega,error` rows.
pub fn write_error_csv<W: Write>(pointwise: &[(f64, f64)], mut out: W) -> Result<()> {
    writeln!(out, "omega,error")?;
    for (w, e) in pointwise {
        writeln!(out, "{},{}", fmt_f64(*w), fmt_f64(*e))?;
    }
    Ok(())
}

/// `‖Ξ(s) - Ξ_r(s)‖` on a rectangular grid of the complex plane, as
/// `(Re s, Im s, error)` triples.
pub fn error_surface(full: &StateSpace, red: &StateSpace, re: &[f64], im: &[f64]) -> Vec<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = re.iter().flat_map(|&x| im.iter().map(move |&y| (x, y))).collect();
    pts.par_iter()
        .map(|&(x, y)| {
            let s = Complex64::new(x, y);
            let e = match (full.transfer(s), red.transfer(s)) {
                (Ok(a), Ok(b)) => linalg::norm2(&(a - b)),
                _ => f64::INFINITY,
            };
            (x, y, e)
        })
        .collect()
}

/// Seventeen significant digits, `.` as decimal separator.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// JSON has no infinity; infinite values are written as the string `"inf"`.
pub mod float_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*x)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected a number, got '{s}'"))),
        }
    }
}

mod opt_float_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => super::float_or_inf::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    #[derive(Deserialize)]
    struct Wrap(#[serde(with = "super::float_or_inf")] f64);

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

mod float_pairs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Pair(f64, #[serde(with = "super::float_or_inf")] f64);

    pub fn serialize<S: Serializer>(v: &[(f64, f64)], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<Pair> = v.iter().map(|&(a, b)| Pair(a, b)).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(f64, f64)>, D::Error> {
        Ok(Vec::<Pair>::deserialize(d)?.into_iter().map(|p| (p.0, p.1)).collect())
    }
}
