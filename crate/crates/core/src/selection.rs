//! Choice of tangent directions and interpolation frequencies.
//!
//! Directions follow an importance ordering of the output (or input)
//! quadratures; frequencies are placed on the imaginary axis in conjugate
//! pairs and tuned by a deterministic derivative-free search that minimizes
//! the H∞ or the integrated squared error of the resulting reduction.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, FrequencyGrid};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{jn, LinearSystem, StateSpace, System};
use crate::reduction::{self, InterpolationData, Method, ReductionResult, Side};

/// Relative gap below which two frequencies count as equal.
const COLLISION_TOL: f64 = 1e-12;
/// Relative width at which refinement stops.
const REFINE_TOL: f64 = 1e-4;
/// Infeasible points cost this multiple of the scan baseline.
const PENALTY_FACTOR: f64 = 1e6;
/// Number of lattice local minima that are refined.
const REFINE_STARTS: usize = 3;

/// `E_k = (e_1, e_1, e_2, e_2, ..., e_k, e_k)` as index list.
fn e_block(k: usize) -> Vec<usize> {
    (0..k).flat_map(|i| [i, i]).collect()
}

/// Tangent directions for `r` conjugate pairs of points in a space of `p`
/// quadrature pairs (`2p` entries), matching the more important entries at
/// least as often as the less important ones. `perm[i]` is the position of
/// the `i`-th most important entry, so the `i`-th indicator vector becomes
/// `e_{perm[i]}`. Returns `2r` real unit vectors.
pub fn tangent_directions_heuristic(perm: &[usize], r: usize, p: usize) -> Result<Vec<Vector>> {
    let len = 2 * p;
    let mut seen = vec![false; len];
    if perm.len() != len || perm.iter().any(|&i| i >= len || std::mem::replace(&mut seen[i], true)) {
        return Err(Error::Invalid(format!(
            "permutation must list each of 0..{len} exactly once"
        )));
    }
    let idx: Vec<usize> = if r <= p {
        e_block(r)
    } else {
        let mut v = Vec::with_capacity(2 * r);
        for _ in 0..r / p {
            v.extend(e_block(p));
        }
        v.extend(e_block(r % p));
        v
    };
    Ok(idx
        .into_iter()
        .map(|i| {
            let mut v = Vector::zeros(len);
            v[perm[i]] = Complex64::new(1.0, 0.0);
            v
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    /// `(iω₁, -iω₁, iω₂, -iω₂, ...)`.
    ConjugatePairs,
    /// `(iω₁, 0, -iω₁, iω₂, -iω₂, ...)`.
    SymmetricWithDc,
}

impl std::str::FromStr for Template {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conjugate_pairs" => Ok(Template::ConjugatePairs),
            "symmetric_with_dc" => Ok(Template::SymmetricWithDc),
            other => Err(Error::Invalid(format!("unknown template '{other}'"))),
        }
    }
}

impl Template {
    /// Number of points produced from `k` frequencies.
    pub fn point_count(self, k: usize) -> usize {
        match self {
            Template::ConjugatePairs => 2 * k,
            Template::SymmetricWithDc => 2 * k + 1,
        }
    }

    /// Number of frequencies behind `points` points, if the count fits.
    pub fn frequency_count(self, points: usize) -> Option<usize> {
        match self {
            Template::ConjugatePairs if points.is_multiple_of(2) && points > 0 => Some(points / 2),
            Template::SymmetricWithDc if points % 2 == 1 && points >= 3 => Some(points / 2),
            _ => None,
        }
    }
}

/// Interpolation points on the imaginary axis and whether any of them
/// repeat (within 1e-12 relative), in which case the directions alone must
/// supply the rank.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub points: Vec<Complex64>,
    pub degenerate: bool,
}

pub fn point_template(omegas: &[f64], template: Template) -> Result<PointSet> {
    if omegas.is_empty() {
        return Err(Error::Invalid("no frequencies".into()));
    }
    if let Some(w) = omegas.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::Invalid(format!("frequency {w} must be finite and nonnegative")));
    }
    let im = |w: f64| Complex64::new(0.0, w);
    let mut points = Vec::with_capacity(template.point_count(omegas.len()));
    for (k, &w) in omegas.iter().enumerate() {
        points.push(im(w));
        if k == 0 && template == Template::SymmetricWithDc {
            points.push(Complex64::new(0.0, 0.0));
        }
        points.push(im(-w));
    }
    let degenerate = points.iter().enumerate().any(|(i, p)| {
        points[i + 1..]
            .iter()
            .any(|q| (p - q).norm() <= COLLISION_TOL * p.norm().max(q.norm()))
    });
    Ok(PointSet { points, degenerate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cost {
    Hinf,
    H2,
}

impl std::str::FromStr for Cost {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinf" => Ok(Cost::Hinf),
            "h2" => Ok(Cost::H2),
            other => Err(Error::Invalid(format!("unknown cost '{other}'"))),
        }
    }
}

/// Everything that defines a frequency search.
#[derive(Debug, Clone)]
pub struct SelectionProblem {
    pub system: System,
    pub method: Method,
    /// One direction per interpolation point.
    pub directions: Vec<Vector>,
    pub template: Template,
    pub omega_bounds: (f64, f64),
    pub cost: Cost,
    /// Use one common frequency for all points.
    pub tie_omega: bool,
    /// Grid for the cost evaluation; `None` uses the standard grid of the
    /// full and reduced systems.
    pub grid: Option<FrequencyGrid>,
}

impl SelectionProblem {
    /// Problem with default bounds `[1e-2 λ_min, 1e2 λ_max]` from the pole
    /// magnitudes of the system.
    pub fn new(system: System, method: Method, directions: Vec<Vector>, template: Template, cost: Cost) -> Result<Self> {
        let g = FrequencyGrid::standard(&[&system.state_space()])?;
        let p = Self {
            system,
            method,
            directions,
            template,
            omega_bounds: (g.omega_min, g.omega_max),
            cost,
            tie_omega: false,
            grid: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_bounds(mut self, lo: f64, hi: f64) -> Result<Self> {
        self.omega_bounds = (lo, hi);
        self.validate()?;
        Ok(self)
    }

    pub fn tied(mut self, tie: bool) -> Self {
        self.tie_omega = tie;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.omega_bounds;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Invalid(format!(
                "frequency bounds must satisfy 0 < lower < upper < inf (got {lo}, {hi})"
            )));
        }
        if self.template.frequency_count(self.directions.len()).is_none() {
            return Err(Error::Invalid(format!(
                "{} directions do not fit the {:?} template",
                self.directions.len(),
                self.template
            )));
        }
        let expected = match (&self.system, self.method) {
            (System::Quadrature(q), Method::Left) => 2 * q.ell(),
            (System::Quadrature(q), Method::Right) => 2 * q.m(),
            (System::Annihilation(a), Method::Passive) => a.ell(),
            (s, m) => {
                return Err(Error::Invalid(format!(
                    "method '{m}' does not apply to a system in {} form",
                    s.form()
                )))
            }
        };
        if let Some(d) = self.directions.iter().find(|d| d.len() != expected) {
            return Err(Error::Invalid(format!(
                "directions must have length {expected}, got {}",
                d.len()
            )));
        }
        Ok(())
    }

    /// Number of distinct frequencies the template consumes.
    pub fn frequency_count(&self) -> usize {
        self.template
            .frequency_count(self.directions.len())
            .expect("validated")
    }

    /// Number of free search variables.
    pub fn dimension(&self) -> usize {
        if self.tie_omega {
            1
        } else {
            self.frequency_count()
        }
    }

    /// Full frequency vector from the search variables.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        if self.tie_omega {
            vec![x[0]; self.frequency_count()]
        } else {
            x.to_vec()
        }
    }

    /// Interpolation data for the given frequencies.
    pub fn data(&self, omegas: &[f64]) -> Result<InterpolationData> {
        let ps = point_template(omegas, self.template)?;
        let side = match self.method {
            Method::Right => Side::Right,
            Method::Left | Method::Passive => Side::Left,
        };
        InterpolationData::new(side, ps.points, self.directions.clone())
    }

    /// Real-basis structure-preserving reduction at the given frequencies.
    pub fn reduce(&self, omegas: &[f64]) -> Result<ReductionResult> {
        let data = self.data(omegas)?;
        match (&self.system, self.method) {
            (System::Quadrature(q), Method::Left) => reduction::reduce_left(q, &data),
            (System::Quadrature(q), Method::Right) => reduction::reduce_right(q, &data),
            (System::Annihilation(a), Method::Passive) => reduction::reduce_passive(a, &data),
            _ => unreachable!("validated"),
        }
    }
}

/// Projection pair built from a complex orthonormal basis of the
/// interpolation subspace. For the right side `W = J V (Vᴴ J V)^{-1}`, for
/// the left side `V = J W (Wᴴ J W)^{-1}`, and `W = V` for passive systems.
pub fn complex_projection(problem: &SelectionProblem, omegas: &[f64]) -> Result<(Matrix, Matrix)> {
    let data = problem.data(omegas)?;
    let ss = problem.system.state_space();
    let vecs = match problem.method {
        Method::Right => reduction::right_vectors(&ss, &data)?,
        Method::Left | Method::Passive => reduction::left_vectors(&ss, &data)?,
    };
    let m = Matrix::from_columns(&vecs);
    let dec = linalg::svd_rank_and_bases(&m, None);
    if dec.rank < m.ncols() {
        return Err(Error::Interpolation(format!(
            "interpolation subspace has dimension {} but {} is required",
            dec.rank,
            m.ncols()
        )));
    }
    let basis = dec.range.into_columns();
    if problem.method == Method::Passive {
        return Ok((basis.clone(), basis));
    }
    let j = linalg::to_complex(&jn(ss.order() / 2));
    let gram = basis.adjoint() * &j * &basis;
    let sv = gram.singular_values();
    let cond = sv.max() / sv.min();
    if !(cond <= crate::symplectic::SKEW_CONDITION_LIMIT) {
        return Err(Error::SkewGramSingular(cond));
    }
    let other = &j * &basis * linalg::inverse(&gram)?;
    Ok(match problem.method {
        Method::Right => (other, basis),
        _ => (basis, other),
    })
}

fn reduced_for_cost(problem: &SelectionProblem, omegas: &[f64]) -> Result<(StateSpace, StateSpace)> {
    let (w, v) = complex_projection(problem, omegas)?;
    let full = problem.system.state_space();
    let red = analysis::project(&full, &w, &v)?;
    Ok((full, red))
}

/// `sup_ω ‖Ξ(iω) - Ξ_r(iω)‖` for the reduction at `omegas`.
pub fn cost_hinf(problem: &SelectionProblem, omegas: &[f64]) -> Result<f64> {
    let (full, red) = reduced_for_cost(problem, omegas)?;
    Ok(analysis::hinf_error(&full, &red, problem.grid.as_ref())?.value)
}

/// `∫ ‖Ξ(iω) - Ξ_r(iω)‖_F² dω` for the reduction at `omegas`, with the
/// Gramian value alongside.
pub fn cost_h2_report(problem: &SelectionProblem, omegas: &[f64]) -> Result<analysis::H2Report> {
    let (full, red) = reduced_for_cost(problem, omegas)?;
    analysis::h2_error(&full, &red, problem.grid.as_ref())
}

pub fn cost_h2(problem: &SelectionProblem, omegas: &[f64]) -> Result<f64> {
    Ok(cost_h2_report(problem, omegas)?.quadrature)
}

pub fn cost(problem: &SelectionProblem, omegas: &[f64]) -> Result<f64> {
    match problem.cost {
        Cost::Hinf => cost_hinf(problem, omegas),
        Cost::H2 => cost_h2(problem, omegas),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Scan,
    Refine,
}

/// One cost evaluation made by the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub phase: Phase,
    pub omegas: Vec<f64>,
    /// Cost, or the penalty when infeasible.
    pub value: f64,
    pub feasible: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub omegas: Vec<f64>,
    pub cost: f64,
    /// Lattice points per search dimension.
    pub lattice: usize,
    pub trace: Vec<TraceEntry>,
}

/// Lattice points per dimension: 64 for a tied search, otherwise
/// `min(16, ⌊4096^{1/d}⌋)`.
pub fn lattice_size(dim: usize, tied: bool) -> usize {
    if tied || dim == 1 {
        return 64;
    }
    let mut n = 16usize;
    while n > 2 && n.pow(dim as u32) > 4096 {
        n -= 1;
    }
    n
}

fn log_lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

struct Evaluator<'a> {
    problem: &'a SelectionProblem,
    penalty: f64,
    trace: Vec<TraceEntry>,
}

impl Evaluator<'_> {
    /// Cost at log-coordinates `u`, clamped to the bounds.
    fn eval(&mut self, u: &[f64]) -> f64 {
        let (lo, hi) = self.problem.omega_bounds;
        let x: Vec<f64> = u.iter().map(|v| v.exp().clamp(lo, hi)).collect();
        let omegas = self.problem.expand(&x);
        let (value, feasible, reason) = match cost(self.problem, &omegas) {
            Ok(v) if v.is_finite() => (v, true, None),
            Ok(v) => (self.penalty, false, Some(format!("cost is {v}"))),
            Err(e) => (self.penalty, false, Some(e.to_string())),
        };
        self.trace.push(TraceEntry {
            phase: Phase::Refine,
            omegas,
            value,
            feasible,
            reason,
        });
        value
    }
}

fn golden_min(ev: &mut Evaluator<'_>, mut lo: f64, mut hi: f64) -> (f64, f64) {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - R * (hi - lo);
    let mut x2 = lo + R * (hi - lo);
    let mut f1 = ev.eval(&[x1]);
    let mut f2 = ev.eval(&[x2]);
    // Log-width equals relative width in ω.
    while hi - lo > REFINE_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - R * (hi - lo);
            f1 = ev.eval(&[x1]);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + R * (hi - lo);
            f2 = ev.eval(&[x2]);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn nelder_mead(ev: &mut Evaluator<'_>, start: &[f64], step: f64, bounds: (f64, f64)) -> (Vec<f64>, f64) {
    let d = start.len();
    let clamp = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| x.clamp(bounds.0, bounds.1)).collect() };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let f0 = ev.eval(start);
    simplex.push((start.to_vec(), f0));
    for i in 0..d {
        let mut p = start.to_vec();
        p[i] = if p[i] + step <= bounds.1 { p[i] + step } else { p[i] - step };
        let p = clamp(p);
        let f = ev.eval(&p);
        simplex.push((p, f));
    }
    for _ in 0..400 * d {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter <= REFINE_TOL {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|(p, _)| p[k]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].clone();
        let along = |t: f64| -> Vec<f64> {
            clamp(centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect())
        };
        let xr = along(1.0);
        let fr = ev.eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = ev.eval(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(0.5);
                let f = ev.eval(&x);
                (x, f)
            } else {
                let x = along(-0.5);
                let f = ev.eval(&x);
                (x, f)
            };
            if fc < worst.1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let p: Vec<f64> = best.iter().zip(&entry.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let f = ev.eval(&p);
                    *entry = (p, f);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Deterministic multi-start search: a log-spaced lattice scan (evaluated
/// in parallel, reduced in lattice order) followed by local refinement from
/// the best lattice local minima. Golden-section search is used in one
/// dimension and Nelder–Mead in log coordinates otherwise; both stop at a
/// relative width of 1e-4. Infeasible points cost `1e6` times the largest
/// feasible scan value.
pub fn optimize_points(problem: &SelectionProblem) -> Result<Selection> {
    problem.validate()?;
    let d = problem.dimension();
    let n = lattice_size(d, problem.tie_omega);
    let (lo, hi) = problem.omega_bounds;
    let axis = log_lattice(lo, hi, n);
    let total = n.pow(d as u32);
    let index = |mut k: usize| -> Vec<usize> {
        let mut idx = vec![0; d];
        for slot in idx.iter_mut() {
            *slot = k % n;
            k /= n;
        }
        idx
    };
    let scan: Vec<(Vec<f64>, Result<f64>)> = (0..total)
        .into_par_iter()
        .map(|k| {
            let x: Vec<f64> = index(k).iter().map(|&i| axis[i]).collect();
            let omegas = problem.expand(&x);
            let c = cost(problem, &omegas).and_then(|v| {
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Infeasible(format!("cost is {v}")))
                }
            });
            (omegas, c)
        })
        .collect();
    let baseline = scan
        .iter()
        .filter_map(|(_, c)| c.as_ref().ok().copied())
        .fold(f64::NAN, f64::max);
    if baseline.is_nan() {
        let mut reasons: Vec<String> = scan
            .iter()
            .take(10)
            .map(|(w, c)| format!("{w:?}: {}", c.as_ref().err().map(|e| e.to_string()).unwrap_or_default()))
            .collect();
        if scan.len() > 10 {
            reasons.push(format!("... and {} more", scan.len() - 10));
        }
        return Err(Error::Infeasible(format!(
            "every scanned frequency is infeasible:\n{}",
            reasons.join("\n")
        )));
    }
    let penalty = PENALTY_FACTOR * baseline.max(f64::MIN_POSITIVE);
    let mut trace: Vec<TraceEntry> = Vec::with_capacity(scan.len());
    let mut values = Vec::with_capacity(scan.len());
    for (omegas, c) in scan {
        let (value, feasible, reason) = match c {
            Ok(v) => (v, true, None),
            Err(e) => (penalty, false, Some(e.to_string())),
        };
        values.push(value);
        trace.push(TraceEntry {
            phase: Phase::Scan,
            omegas,
            value,
            feasible,
            reason,
        });
    }

    // Lattice local minima: no axis neighbour is strictly lower.
    let flat = |idx: &[usize]| idx.iter().rev().fold(0, |acc, &i| acc * n + i);
    let mut minima: Vec<usize> = (0..total)
        .filter(|&k| {
            let idx = index(k);
            (0..d).all(|ax| {
                let mut ok = true;
                for delta in [-1i64, 1] {
                    let j = idx[ax] as i64 + delta;
                    if j >= 0 && (j as usize) < n {
                        let mut nb = idx.clone();
                        nb[ax] = j as usize;
                        ok &= values[flat(&nb)] >= values[k];
                    }
                }
                ok
            })
        })
        .collect();
    minima.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    minima.truncate(REFINE_STARTS);

    let mut ev = Evaluator {
        problem,
        penalty,
        trace,
    };
    let step = (hi / lo).ln() / (n - 1) as f64;
    let log_bounds = (lo.ln(), hi.ln());
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut consider = |x: Vec<f64>, v: f64| {
        if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
            best = Some((x, v));
        }
    };
    for &k in &minima {
        let idx = index(k);
        let u: Vec<f64> = idx.iter().map(|&i| axis[i].ln()).collect();
        consider(u.clone(), values[k]);
        if values[k] >= penalty {
            continue;
        }
        if d == 1 {
            let a = (u[0] - step).max(log_bounds.0);
            let b = (u[0] + step).min(log_bounds.1);
            let (x, v) = golden_min(&mut ev, a, b);
            consider(vec![x], v);
        } else {
            let (x, v) = nelder_mead(&mut ev, &u, step, log_bounds);
            consider(x, v);
        }
    }
    let (u, value) = best.expect("at least one lattice point is feasible");
    let x: Vec<f64> = u.iter().map(|v| v.exp().clamp(lo, hi)).collect();
    Ok(Selection {
        omegas: problem.expand(&x),
        cost: value,
        lattice: n,
        trace: ev.trace,
    })
}
