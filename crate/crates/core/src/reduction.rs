//! Tangential interpolatory projections that keep the reduced model
//! physically realizable.
//!
//! Quadrature systems use a symplectic Petrov–Galerkin pair `(W, V)` with
//! `Wᵀ J W = J_r` (left) or `Vᵀ J V = J_r` (right). Completely passive
//! systems in annihilation form use a one-sided Galerkin projection on an
//! orthonormal basis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, RealMatrix, SubspaceBasis, Vector};
use crate::model::{
    check_pr_annihilation, check_pr_quadrature, jn, AnnihilationSystem, LinearSystem, PrReport,
    QuadratureSystem, StateSpace, System,
};
use crate::symplectic::skew_normal_form;

/// Relative realizability tolerance applied to reduced models.
pub const PR_REL_TOL: f64 = 1e-8;

/// Relative tolerance for pairing interpolation data with its conjugate.
const PAIR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Left,
    Right,
    Passive,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Left => "left",
            Method::Right => "right",
            Method::Passive => "passive",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Method::Left),
            "right" => Ok(Method::Right),
            "passive" => Ok(Method::Passive),
            other => Err(Error::Invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// Which normalization produced the right projection pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RightConvention {
    /// `T J Tᵀ = (V̂ᵀ Jᵀ V̂)^{-1}`, `V = V̂ Tᵀ`.
    InverseGram,
    /// `T (V̂ᵀ J V̂) Tᵀ = J`, `V = V̂ Tᵀ`, so that `Vᵀ J V = J`.
    SymplecticV,
}

/// Interpolation points with tangent directions on one side.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationData {
    side: Side,
    points: Vec<Complex64>,
    directions: Vec<Vector>,
}

impl InterpolationData {
    pub fn new(side: Side, points: Vec<Complex64>, directions: Vec<Vector>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Interpolation("no interpolation points".into()));
        }
        if points.len() != directions.len() {
            return Err(Error::Interpolation(format!(
                "{} points but {} directions",
                points.len(),
                directions.len()
            )));
        }
        let len = directions[0].len();
        for (i, (p, d)) in points.iter().zip(&directions).enumerate() {
            if !(p.re.is_finite() && p.im.is_finite()) || !d.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite);
            }
            if d.len() != len {
                return Err(Error::Interpolation(format!(
                    "direction {i} has length {} (expected {len})",
                    d.len()
                )));
            }
            if d.norm() == 0.0 {
                return Err(Error::Interpolation(format!("direction {i} is the zero vector")));
            }
        }
        Ok(Self {
            side,
            points,
            directions,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }
    pub fn directions(&self) -> &[Vector] {
        &self.directions
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn direction_len(&self) -> usize {
        self.directions[0].len()
    }

    /// Whether the multiset of `(point, direction)` pairs is closed under
    /// complex conjugation.
    pub fn is_conjugate_closed(&self) -> bool {
        conjugate_pairing(&self.points, &self.directions).is_ok()
    }
}

fn point_tol(p: Complex64) -> f64 {
    PAIR_TOL * p.norm().max(1.0)
}

fn is_real_vector(v: &Vector) -> bool {
    v.iter().all(|z| z.im.abs() <= PAIR_TOL * v.norm().max(1.0))
}

enum Pairing {
    Real(usize),
    Pair(usize),
}

/// Groups indices into self-conjugate data and conjugate pairs.
fn conjugate_pairing(points: &[Complex64], directions: &[Vector]) -> Result<Vec<Pairing>> {
    let mut used = vec![false; points.len()];
    let mut out = Vec::new();
    for i in 0..points.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let (p, d) = (points[i], &directions[i]);
        if p.im.abs() <= point_tol(p) && is_real_vector(d) {
            out.push(Pairing::Real(i));
            continue;
        }
        let dc = d.map(|z| z.conj());
        let partner = (i + 1..points.len()).find(|&j| {
            !used[j]
                && (points[j] - p.conj()).norm() <= point_tol(p)
                && (&directions[j] - &dc).norm() <= PAIR_TOL * d.norm().max(1.0)
        });
        match partner {
            Some(j) => {
                used[j] = true;
                out.push(Pairing::Pair(i));
            }
            None => {
                return Err(Error::Interpolation(format!(
                    "point {p} with its direction has no conjugate partner"
                )))
            }
        }
    }
    Ok(out)
}

/// Real matrix spanning (over ℂ) the same space as the complex vectors
/// attached to conjugation-closed data. A conjugate pair contributes
/// `(Re v, Im v)`, a real datum contributes `Re v`; the column count equals
/// the number of data.
pub fn real_basis_from_conjugate_data(
    vectors: &[Vector],
    points: &[Complex64],
    directions: &[Vector],
) -> Result<RealMatrix> {
    if vectors.len() != points.len() || points.len() != directions.len() {
        return Err(Error::Dimension("vectors, points and directions differ in count".into()));
    }
    if vectors.is_empty() {
        return Err(Error::Interpolation("no vectors".into()));
    }
    let rows = vectors[0].len();
    let mut cols: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(vectors.len());
    for group in conjugate_pairing(points, directions)? {
        match group {
            Pairing::Real(i) => {
                let v = &vectors[i];
                if !is_real_vector(v) {
                    return Err(Error::Interpolation(format!(
                        "vector for the real point {} is not real",
                        points[i]
                    )));
                }
                cols.push(v.map(|z| z.re));
            }
            Pairing::Pair(i) => {
                cols.push(vectors[i].map(|z| z.re));
                cols.push(vectors[i].map(|z| z.im));
            }
        }
    }
    Ok(RealMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]))
}

fn format_points(points: &[Complex64]) -> String {
    points
        .iter()
        .map(|p| format!("{p}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn check_side(data: &InterpolationData, side: Side, len: usize, what: &str) -> Result<()> {
    if data.side != side {
        return Err(Error::Interpolation(format!(
            "expected {side:?} interpolation data, got {:?}",
            data.side
        )));
    }
    if data.direction_len() != len {
        return Err(Error::Interpolation(format!(
            "tangent directions must have length {len} ({what}), got {}",
            data.direction_len()
        )));
    }
    Ok(())
}

fn require_full_rank(m: &Matrix, points: &[Complex64]) -> Result<()> {
    let dec = linalg::svd_rank_and_bases(m, None);
    if dec.rank < m.ncols() {
        return Err(Error::Interpolation(format!(
            "interpolation subspace has dimension {} but {} is required; points: [{}]",
            dec.rank,
            m.ncols(),
            format_points(points)
        )));
    }
    Ok(())
}

/// Solves `(σ̄ I - Aᴴ) x = rhs`, reporting `σ` on singularity.
fn left_solve(a: &Matrix, sigma: Complex64, rhs: &Matrix) -> Result<Matrix> {
    linalg::resolvent_solve(&a.adjoint(), sigma.conj(), rhs).map_err(|e| match e {
        Error::SingularResolvent(_) => Error::SingularResolvent(sigma),
        other => other,
    })
}

/// Complex vectors `(σ̄ I - Aᴴ)^{-1} Cᴴ μ` for every left datum.
pub fn left_vectors(ss: &StateSpace, data: &InterpolationData) -> Result<Vec<Vector>> {
    let ch = ss.c.adjoint();
    data.points
        .iter()
        .zip(&data.directions)
        .map(|(&s, mu)| {
            let rhs = &ch * mu;
            let x = left_solve(&ss.a, s, &Matrix::from_column_slice(rhs.len(), 1, rhs.as_slice()))?;
            Ok(x.column(0).into_owned())
        })
        .collect()
}

/// Complex vectors `(σ I - A)^{-1} B ν` for every right datum.
pub fn right_vectors(ss: &StateSpace, data: &InterpolationData) -> Result<Vec<Vector>> {
    data.points
        .iter()
        .zip(&data.directions)
        .map(|(&s, nu)| {
            let rhs = &ss.b * nu;
            let x = linalg::resolvent_solve(&ss.a, s, &Matrix::from_column_slice(rhs.len(), 1, rhs.as_slice()))?;
            Ok(x.column(0).into_owned())
        })
        .collect()
}

fn columns_to_matrix(vs: &[Vector]) -> Matrix {
    Matrix::from_columns(vs)
}

/// Real basis `Ŵ` of `span{(μᴴ C (σI - A)^{-1})ᴴ}`.
pub fn left_subspace_basis(sys: &QuadratureSystem, data: &InterpolationData) -> Result<RealMatrix> {
    check_side(data, Side::Left, 2 * sys.ell(), "2ℓ")?;
    let vs = left_vectors(&sys.state_space(), data)?;
    let basis = real_basis_from_conjugate_data(&vs, &data.points, &data.directions)?;
    require_full_rank(&linalg::to_complex(&basis), &data.points)?;
    Ok(basis)
}

/// Real basis `V̂` of `span{(σI - A)^{-1} B ν}`.
pub fn right_subspace_basis(sys: &QuadratureSystem, data: &InterpolationData) -> Result<RealMatrix> {
    check_side(data, Side::Right, 2 * sys.m(), "2m")?;
    let vs = right_vectors(&sys.state_space(), data)?;
    let basis = real_basis_from_conjugate_data(&vs, &data.points, &data.directions)?;
    require_full_rank(&linalg::to_complex(&basis), &data.points)?;
    Ok(basis)
}

/// Reduced system of either form.
pub type ReducedModel = System;

/// Tangential matching error at one interpolation datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationResidual {
    pub point: Complex64,
    /// `‖μᴴ(Ξ - Ξ_r)(σ)‖` or `‖(Ξ - Ξ_r)(σ) ν‖`.
    pub absolute: f64,
    /// `‖μᴴ Ξ(σ)‖` or `‖Ξ(σ) ν‖`.
    pub reference: f64,
}

impl InterpolationResidual {
    pub fn relative(&self) -> f64 {
        if self.reference > 0.0 {
            self.absolute / self.reference
        } else {
            self.absolute
        }
    }

    /// `rel_tol` relative, or `abs_tol` absolute when the reference value
    /// is below 1e-6.
    pub fn passes(&self, rel_tol: f64, abs_tol: f64) -> bool {
        if self.reference >= 1e-6 {
            self.absolute <= rel_tol * self.reference
        } else {
            self.absolute <= abs_tol
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub interpolation: Vec<InterpolationResidual>,
    pub pr: PrReport,
    /// `‖Wᴴ V - I‖_F`.
    pub biorthogonality: f64,
    /// `‖Wᵀ J W - J_r‖_F` (left) or `‖Vᵀ J V - J_r‖_F` (right).
    pub symplectic_residual: Option<f64>,
    /// Condition number of the skew Gram matrix of the subspace basis.
    pub skew_condition: Option<f64>,
    pub right_convention: Option<RightConvention>,
    pub poles: Vec<Complex64>,
    pub stable: bool,
}

/// Outcome of one reduction: projection matrices, reduced model and
/// diagnostics. For quadrature systems `w` and `v` are real.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionResult {
    pub method: Method,
    pub w: Matrix,
    pub v: Matrix,
    pub reduced: ReducedModel,
    pub data: Option<InterpolationData>,
    pub diagnostics: Diagnostics,
}

impl ReductionResult {
    pub fn reduced_state_space(&self) -> StateSpace {
        self.reduced.state_space()
    }

    pub fn order(&self) -> usize {
        self.v.ncols()
    }

    /// Largest relative interpolation residual.
    pub fn max_interpolation_residual(&self) -> f64 {
        self.diagnostics
            .interpolation
            .iter()
            .map(|r| r.relative())
            .fold(0.0, f64::max)
    }
}

/// Scale used to make realizability residuals relative.
pub fn pr_scale(ss: &StateSpace) -> f64 {
    1.0 + linalg::fro(&ss.a) + linalg::fro(&ss.b).powi(2) + linalg::fro(&ss.c) + linalg::fro(&ss.d).powi(2)
}

fn interpolation_residuals(
    full: &StateSpace,
    red: &StateSpace,
    data: &InterpolationData,
) -> Vec<InterpolationResidual> {
    data.points
        .iter()
        .zip(&data.directions)
        .map(|(&s, dir)| {
            let (x, y) = match (full.transfer(s), red.transfer(s)) {
                (Ok(x), Ok(y)) => (x, y),
                _ => {
                    return InterpolationResidual {
                        point: s,
                        absolute: f64::INFINITY,
                        reference: 0.0,
                    }
                }
            };
            let (diff, reference) = match data.side {
                Side::Left => {
                    let muh = dir.adjoint();
                    ((&muh * (&x - &y)).norm(), (&muh * &x).norm())
                }
                Side::Right => (((&x - &y) * dir).norm(), (&x * dir).norm()),
            };
            InterpolationResidual {
                point: s,
                absolute: diff,
                reference,
            }
        })
        .collect()
}

/// `(Wᵀ A V, Wᵀ B, C V, D)` for real projection matrices.
pub fn petrov_galerkin(sys: &QuadratureSystem, w: &RealMatrix, v: &RealMatrix) -> Result<QuadratureSystem> {
    let wt = w.transpose();
    QuadratureSystem::new(&wt * sys.a() * v, &wt * sys.b(), sys.c() * v, sys.d().clone())
}

fn quadrature_result(
    sys: &QuadratureSystem,
    method: Method,
    w: RealMatrix,
    v: RealMatrix,
    data: Option<InterpolationData>,
    skew_condition: Option<f64>,
    right_convention: Option<RightConvention>,
) -> Result<ReductionResult> {
    let red = petrov_galerkin(sys, &w, &v)?;
    let r = red.n();
    let full_ss = sys.state_space();
    let red_ss = red.state_space();
    let pr = check_pr_quadrature(&red, PR_REL_TOL * pr_scale(&red_ss));
    let biorthogonality = (w.transpose() * &v - RealMatrix::identity(2 * r, 2 * r)).norm();
    let jn_ = jn(sys.n());
    let symplectic_residual = match method {
        Method::Right => (v.transpose() * &jn_ * &v - jn(r)).norm(),
        _ => (w.transpose() * &jn_ * &w - jn(r)).norm(),
    };
    let interpolation = data
        .as_ref()
        .map(|d| interpolation_residuals(&full_ss, &red_ss, d))
        .unwrap_or_default();
    let poles = red_ss.poles()?;
    let stable = poles.iter().all(|p| p.re < 0.0);
    Ok(ReductionResult {
        method,
        w: linalg::to_complex(&w),
        v: linalg::to_complex(&v),
        reduced: ReducedModel::Quadrature(red),
        data,
        diagnostics: Diagnostics {
            interpolation,
            pr,
            biorthogonality,
            symplectic_residual: Some(symplectic_residual),
            skew_condition,
            right_convention,
            poles,
            stable,
        },
    })
}

const SKEW_TOL: f64 = 1e-10;

/// Left projection pair from any real basis `Ŵ` of the left subspace:
/// `W = Ŵ Tᵀ` with `T (Ŵᵀ J Ŵ) Tᵀ = J_r` and `V = J W (Wᵀ J W)^{-1}`.
pub fn symplectic_projection_left(
    sys: &QuadratureSystem,
    w_hat: &RealMatrix,
) -> Result<(RealMatrix, RealMatrix, f64)> {
    if w_hat.nrows() != 2 * sys.n() || !w_hat.ncols().is_multiple_of(2) || w_hat.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "left basis is {:?}; need 2n = {} rows and an even, nonzero column count",
            w_hat.shape(),
            2 * sys.n()
        )));
    }
    let j = jn(sys.n());
    let theta = w_hat.transpose() * &j * w_hat;
    let snf = skew_normal_form(&theta, SKEW_TOL)?;
    let w = w_hat * snf.t.transpose();
    let gram = w.transpose() * &j * &w;
    let gram_inv = gram
        .try_inverse()
        .ok_or(Error::SkewGramSingular(f64::INFINITY))?;
    let v = &j * &w * gram_inv;
    Ok((w, v, snf.condition))
}

/// Right projection pair from any real basis `V̂` of the right subspace,
/// using the given normalization of `T`; `W = J V (Vᵀ J V)^{-1}`.
pub fn symplectic_projection_right(
    sys: &QuadratureSystem,
    v_hat: &RealMatrix,
    convention: RightConvention,
) -> Result<(RealMatrix, RealMatrix, f64)> {
    if v_hat.nrows() != 2 * sys.n() || !v_hat.ncols().is_multiple_of(2) || v_hat.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "right basis is {:?}; need 2n = {} rows and an even, nonzero column count",
            v_hat.shape(),
            2 * sys.n()
        )));
    }
    let j = jn(sys.n());
    let theta = v_hat.transpose() * &j * v_hat;
    let (t, condition) = match convention {
        RightConvention::SymplecticV => {
            let snf = skew_normal_form(&theta, SKEW_TOL)?;
            (snf.t, snf.condition)
        }
        RightConvention::InverseGram => {
            let target = (v_hat.transpose() * j.transpose() * v_hat)
                .try_inverse()
                .ok_or(Error::SkewGramSingular(f64::INFINITY))?;
            let snf = skew_normal_form(&target, SKEW_TOL)?;
            let t = snf
                .t
                .try_inverse()
                .ok_or(Error::SkewGramSingular(f64::INFINITY))?;
            (t, snf.condition)
        }
    };
    let v = v_hat * t.transpose();
    let gram = v.transpose() * &j * &v;
    let gram_inv = gram
        .try_inverse()
        .ok_or(Error::SkewGramSingular(f64::INFINITY))?;
    let w = &j * &v * gram_inv;
    Ok((w, v, condition))
}

/// Left tangential reduction: the reduced transfer matches `μᵢᴴ Ξ(σᵢ)`.
pub fn reduce_left(sys: &QuadratureSystem, data: &InterpolationData) -> Result<ReductionResult> {
    let w_hat = left_subspace_basis(sys, data)?;
    let q = linalg::orthonormal_real_basis(&w_hat)?;
    let (w, v, cond) = symplectic_projection_left(sys, &q)?;
    quadrature_result(sys, Method::Left, w, v, Some(data.clone()), Some(cond), None)
}

/// Normalized worst realizability residual.
fn relative_pr(sys: &QuadratureSystem) -> f64 {
    check_pr_quadrature(sys, 0.0).max_residual() / pr_scale(&sys.state_space())
}

/// Right tangential reduction: the reduced transfer matches `Ξ(σᵢ) νᵢ`.
///
/// The inverse-Gram normalization is tried first and kept only when the
/// reduced model is realizable (to 1e-8 relative, or ten times the
/// residual already present in `sys`); otherwise `V` is normalized to
/// `Vᵀ J V = J_r`. The convention used is recorded in the diagnostics.
pub fn reduce_right(sys: &QuadratureSystem, data: &InterpolationData) -> Result<ReductionResult> {
    let v_hat = right_subspace_basis(sys, data)?;
    let q = linalg::orthonormal_real_basis(&v_hat)?;
    let allowed = PR_REL_TOL + 10.0 * relative_pr(sys);
    if let Ok((w, v, cond)) = symplectic_projection_right(sys, &q, RightConvention::InverseGram) {
        let red = petrov_galerkin(sys, &w, &v)?;
        if relative_pr(&red) <= allowed {
            return quadrature_result(
                sys,
                Method::Right,
                w,
                v,
                Some(data.clone()),
                Some(cond),
                Some(RightConvention::InverseGram),
            );
        }
    }
    let (w, v, cond) = symplectic_projection_right(sys, &q, RightConvention::SymplecticV)?;
    quadrature_result(
        sys,
        Method::Right,
        w,
        v,
        Some(data.clone()),
        Some(cond),
        Some(RightConvention::SymplecticV),
    )
}

/// Left or right reduction depending on the side of `data`.
pub fn reduce_quadrature(sys: &QuadratureSystem, data: &InterpolationData) -> Result<ReductionResult> {
    match data.side {
        Side::Left => reduce_left(sys, data),
        Side::Right => reduce_right(sys, data),
    }
}

/// Orthonormal basis `V_a` of `span{(μᵢᴴ H (σᵢ I - F)^{-1})ᴴ}`. Points need
/// not come in conjugate pairs.
pub fn passive_subspace_basis(sys: &AnnihilationSystem, data: &InterpolationData) -> Result<SubspaceBasis> {
    check_side(data, Side::Left, sys.ell(), "ℓ")?;
    let vs = left_vectors(&sys.state_space(), data)?;
    let m = columns_to_matrix(&vs);
    require_full_rank(&m, &data.points)?;
    Ok(linalg::svd_rank_and_bases(&m, None).range)
}

/// Galerkin projection `(V_aᴴ F V_a, V_aᴴ G, H V_a, K)` onto the span of
/// `basis`, which is orthonormalized first if needed.
pub fn project_passive(
    sys: &AnnihilationSystem,
    basis: &SubspaceBasis,
    data: Option<InterpolationData>,
) -> Result<ReductionResult> {
    if basis.ambient_dim() != sys.n() || basis.dim() == 0 {
        return Err(Error::Dimension(format!(
            "passive basis is {}x{}; need {} rows",
            basis.ambient_dim(),
            basis.dim(),
            sys.n()
        )));
    }
    let va = if basis.is_orthonormal() {
        basis.columns().clone()
    } else {
        SubspaceBasis::orthonormalize(basis.columns())?.into_columns()
    };
    let vh = va.adjoint();
    let red = AnnihilationSystem::new(&vh * sys.f() * &va, &vh * sys.g(), sys.h() * &va, sys.k().clone())?;
    let red_ss = red.state_space();
    let pr = check_pr_annihilation(&red, PR_REL_TOL * pr_scale(&red_ss));
    let r = va.ncols();
    let biorthogonality = linalg::fro(&(&vh * &va - linalg::identity(r)));
    let interpolation = data
        .as_ref()
        .map(|d| interpolation_residuals(&sys.state_space(), &red_ss, d))
        .unwrap_or_default();
    let poles = red_ss.poles()?;
    let stable = poles.iter().all(|p| p.re < 0.0);
    Ok(ReductionResult {
        method: Method::Passive,
        w: va.clone(),
        v: va,
        reduced: ReducedModel::Annihilation(red),
        data,
        diagnostics: Diagnostics {
            interpolation,
            pr,
            biorthogonality,
            symplectic_residual: None,
            skew_condition: None,
            right_convention: None,
            poles,
            stable,
        },
    })
}

/// Passive left tangential reduction of a completely passive system.
pub fn reduce_passive(sys: &AnnihilationSystem, data: &InterpolationData) -> Result<ReductionResult> {
    let basis = passive_subspace_basis(sys, data)?;
    project_passive(sys, &basis, Some(data.clone()))
}

/// Stability report for a passive reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    /// All reduced poles in the open left half plane.
    pub stable: bool,
    /// `‖Gᴴ V_a z‖` exceeds the threshold for every eigenvector `z` of `F_r`.
    pub minimal: bool,
    /// Smallest `‖Gᴴ V_a z‖` over unit `z` in each eigenspace, one entry per
    /// eigenvalue.
    pub condition_values: Vec<f64>,
    pub threshold: f64,
    /// `span V_a ⊆ (ker Gᴴ)^⊥`.
    pub sufficient_i: bool,
    /// No interpolation point lies on an imaginary-axis eigenvalue of `F_r`.
    pub sufficient_ii: bool,
}

/// Checks `Gᴴ V_a z ≠ 0` for every eigenvector `z` of `F_r` together with
/// the two sufficient conditions for it.
pub fn passive_stability_certificate(result: &ReductionResult, g: &Matrix) -> Result<StabilityCertificate> {
    let red = match &result.reduced {
        ReducedModel::Annihilation(a) => a,
        ReducedModel::Quadrature(_) => {
            return Err(Error::Invalid("stability certificate needs a passive reduction".into()))
        }
    };
    let va = &result.v;
    if g.nrows() != va.nrows() {
        return Err(Error::Dimension(format!(
            "G has {} rows but V_a has {}",
            g.nrows(),
            va.nrows()
        )));
    }
    let fr = red.f();
    let r = fr.nrows();
    let gva = g.adjoint() * va;
    let threshold = 1e-10 * linalg::norm2(g).max(f64::MIN_POSITIVE);
    let fnorm = linalg::norm2(fr).max(f64::MIN_POSITIVE);
    let pairs = linalg::eig(fr)?;
    let mut condition_values = Vec::with_capacity(r);
    for p in &pairs {
        // Whole eigenspace at a loose tolerance so repeated eigenvalues
        // test every direction, not a single computed vector.
        let dec = linalg::svd_rank_and_bases(&linalg::shifted(fr, p.value), Some(1e-8 * fnorm));
        let z = if dec.kernel.dim() > 0 {
            dec.kernel.into_columns()
        } else {
            Matrix::from_column_slice(r, 1, p.vector.as_slice())
        };
        let m = &gva * z;
        let smin = if m.ncols() > m.nrows() {
            0.0
        } else {
            m.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
        };
        condition_values.push(smin);
    }
    let stable = pairs.iter().all(|p| p.value.re < 0.0);
    let minimal = condition_values.iter().all(|&c| c > threshold);

    // (ker Gᴴ)^⊥ is the range of G.
    let range_g = linalg::svd_rank_and_bases(g, None).range;
    let p = linalg::orth_projector(&range_g)?;
    let outside = linalg::norm2(&(va - &p * va));
    let sufficient_i = outside <= 1e-8;

    let sufficient_ii = match &result.data {
        Some(d) => {
            let imag_eigs: Vec<Complex64> = pairs
                .iter()
                .map(|p| p.value)
                .filter(|l| l.re.abs() <= 1e-8 * fnorm)
                .collect();
            d.points().iter().all(|s| {
                imag_eigs
                    .iter()
                    .all(|l| (s - l).norm() > 1e-8 * fnorm.max(s.norm()))
            })
        }
        None => false,
    };
    Ok(StabilityCertificate {
        stable,
        minimal,
        condition_values,
        threshold,
        sufficient_i,
        sufficient_ii,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::linalg::{c, fro, to_complex};
    use crate::model::{annihilation_to_quadrature, random_pr_annihilation, random_pr_quadrature, realify, transfer_eval};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(k: usize, len: usize) -> Vector {
        let mut v = Vector::zeros(len);
        v[k] = c(1.0, 0.0);
        v
    }

    fn conj_data(side: Side, omegas: &[f64], dirs: &[Vector]) -> InterpolationData {
        let mut pts = Vec::new();
        let mut ds = Vec::new();
        for (w, d) in omegas.iter().zip(dirs) {
            pts.push(c(0.0, *w));
            ds.push(d.clone());
            pts.push(c(0.0, -*w));
            ds.push(d.map(|z| z.conj()));
        }
        InterpolationData::new(side, pts, ds).unwrap()
    }

    #[test]
    fn real_basis_of_conjugate_pair() {
        let v = Vector::from_vec(vec![c(1.0, 1.0), c(0.0, 0.0)]);
        let d = Vector::from_vec(vec![c(1.0, 0.0)]);
        let vs = vec![v.clone(), v.map(|z| z.conj())];
        let pts = vec![c(0.0, 1.0), c(0.0, -1.0)];
        let basis = real_basis_from_conjugate_data(&vs, &pts, &[d.clone(), d]).unwrap();
        assert_eq!(basis, RealMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn real_basis_of_real_data_is_identity_map() {
        let vs = vec![
            Vector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0)]),
            Vector::from_vec(vec![c(-3.0, 0.0), c(0.5, 0.0)]),
        ];
        let d = Vector::from_vec(vec![c(1.0, 0.0)]);
        let pts = vec![c(0.0, 0.0), c(2.0, 0.0)];
        let basis = real_basis_from_conjugate_data(&vs, &pts, &[d.clone(), d]).unwrap();
        assert_eq!(to_complex(&basis), Matrix::from_columns(&vs));
    }

    #[test]
    fn real_basis_requires_closure() {
        let vs = vec![Vector::from_vec(vec![c(1.0, 1.0)])];
        let d = Vector::from_vec(vec![c(1.0, 0.0)]);
        assert!(real_basis_from_conjugate_data(&vs, &[c(0.0, 1.0)], &[d]).is_err());
    }

    #[test]
    fn real_basis_span_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut vs = Vec::new();
        let mut pts = Vec::new();
        let mut ds = Vec::new();
        let d = Vector::from_vec(vec![c(1.0, 0.0)]);
        for k in 0..3 {
            let v = Vector::from_fn(10, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            vs.push(v.clone());
            vs.push(v.map(|z| z.conj()));
            pts.push(c(0.0, k as f64 + 1.0));
            pts.push(c(0.0, -(k as f64) - 1.0));
            ds.push(d.clone());
            ds.push(d.clone());
        }
        let vr = to_complex(&real_basis_from_conjugate_data(&vs, &pts, &ds).unwrap());
        let vc = Matrix::from_columns(&vs);
        let mut both = Matrix::zeros(10, 12);
        both.view_mut((0, 0), (10, 6)).copy_from(&vc);
        both.view_mut((0, 6), (10, 6)).copy_from(&vr);
        let r = |m: &Matrix| linalg::svd_rank_and_bases(m, None).rank;
        assert_eq!(r(&vc), 6);
        assert_eq!(r(&vr), 6);
        assert_eq!(r(&both), 6);
    }

    #[test]
    fn data_validation() {
        let d = Vector::from_vec(vec![c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(InterpolationData::new(Side::Left, vec![c(0.0, 1.0)], vec![d]).is_err());
        assert!(InterpolationData::new(Side::Left, vec![], vec![]).is_err());
        assert!(InterpolationData::new(Side::Left, vec![c(0.0, 1.0)], vec![]).is_err());
    }

    #[test]
    fn right_basis_optomechanical() {
        let sys = fixtures::ex1_system();
        let data = conj_data(Side::Right, &[1.05e4, 1.05e4], &[e(4, 6), e(5, 6)]);
        let basis = right_subspace_basis(&sys, &data).unwrap();
        assert_eq!(basis.shape(), (6, 4));
    }

    #[test]
    fn duplicate_data_is_rank_deficient() {
        let sys = fixtures::ex1_system();
        let data = conj_data(Side::Right, &[1.05e4, 1.05e4], &[e(4, 6), e(4, 6)]);
        assert!(matches!(right_subspace_basis(&sys, &data), Err(Error::Interpolation(_))));
        let sys = random_pr_quadrature(3, 2, 1, 42).unwrap();
        let data = conj_data(Side::Left, &[1.0, 1.0], &[e(0, 2), e(0, 2)]);
        assert!(matches!(left_subspace_basis(&sys, &data), Err(Error::Interpolation(_))));
    }

    #[test]
    fn singular_resolvent_is_reported() {
        let sys = fixtures::ex1_system();
        let d = e(0, 6);
        let data = InterpolationData::new(Side::Right, vec![c(-1e5, 0.0)], vec![d]).unwrap();
        assert!(matches!(right_subspace_basis(&sys, &data), Err(Error::SingularResolvent(_))));
    }

    #[test]
    fn left_basis_defining_equation() {
        let sys = random_pr_quadrature(3, 2, 1, 42).unwrap();
        let data = conj_data(Side::Left, &[1.0, 2.0], &[e(0, 2), e(0, 2)]);
        let ss = sys.state_space();
        let vs = left_vectors(&ss, &data).unwrap();
        for ((s, mu), v) in data.points().iter().zip(data.directions()).zip(&vs) {
            let lhs = linalg::shifted(&ss.a, *s).adjoint() * v;
            let rhs = ss.c.adjoint() * mu;
            assert!((lhs - &rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
        }
        let basis = left_subspace_basis(&sys, &data).unwrap();
        assert_eq!(basis.shape(), (6, 4));
    }

    #[test]
    fn right_basis_defining_equation() {
        let sys = random_pr_quadrature(3, 2, 1, 3).unwrap();
        let data = conj_data(Side::Right, &[0.5, 3.0], &[e(0, 4), e(3, 4)]);
        let ss = sys.state_space();
        for ((s, nu), v) in data.points().iter().zip(data.directions()).zip(right_vectors(&ss, &data).unwrap()) {
            let lhs = linalg::shifted(&ss.a, *s) * &v;
            let rhs = &ss.b * nu;
            assert!((lhs - &rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
        }
    }

    fn full_order_data(sys: &QuadratureSystem, side: Side) -> InterpolationData {
        let len = match side {
            Side::Left => 2 * sys.ell(),
            Side::Right => 2 * sys.m(),
        };
        let mut omegas = Vec::new();
        let mut dirs = Vec::new();
        for k in 0..sys.n() {
            omegas.push(0.7 + k as f64);
            dirs.push(e(k % len, len));
        }
        conj_data(side, &omegas, &dirs)
    }

    fn assert_transfer_match(a: &StateSpace, b: &StateSpace, tol: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let s = c(rng.random_range(0.1..2.0), rng.random_range(-4.0..4.0));
            let x = a.transfer(s).unwrap();
            let y = b.transfer(s).unwrap();
            assert!(fro(&(&x - &y)) <= tol * fro(&x).max(1.0), "mismatch at {s}");
        }
    }

    #[test]
    fn full_order_reductions_reproduce_the_transfer() {
        let sys = random_pr_quadrature(2, 2, 1, 5).unwrap();
        for side in [Side::Left, Side::Right] {
            let res = reduce_quadrature(&sys, &full_order_data(&sys, side)).unwrap();
            assert_eq!(res.order(), 4);
            assert_transfer_match(&sys.state_space(), &res.reduced_state_space(), 1e-9);
        }
    }

    #[test]
    fn left_reduction_contract() {
        let sys = random_pr_quadrature(3, 2, 1, 42).unwrap();
        let data = conj_data(Side::Left, &[1.3], &[Vector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.5)])]);
        let res = reduce_left(&sys, &data).unwrap();
        let d = &res.diagnostics;
        assert!(d.pr.max_residual() <= 1e-8, "{:?}", d.pr);
        assert!(d.biorthogonality <= 1e-9);
        assert!(d.symplectic_residual.unwrap() <= 1e-10);
        for r in &d.interpolation {
            assert!(r.passes(1e-8, 1e-10), "{r:?}");
        }
    }

    #[test]
    fn right_reduction_optomechanical() {
        let sys = fixtures::ex1_system();
        let data = conj_data(Side::Right, &[1.05e4, 1.05e4], &[e(4, 6), e(5, 6)]);
        let res = reduce_right(&sys, &data).unwrap();
        let d = &res.diagnostics;
        assert!(d.biorthogonality <= 1e-9);
        assert!(d.pr.passes, "{:?}", d.pr);
        for r in &d.interpolation {
            assert!(r.relative() <= 1e-6, "{r:?}");
        }
        let mut poles = d.poles.clone();
        poles.sort_by(|a, b| a.im.total_cmp(&b.im));
        for (p, t) in poles.iter().zip([c(-50.0, -1e4), c(-50.0, -1e4), c(-50.0, 1e4), c(-50.0, 1e4)]) {
            assert!((p - t).norm() <= 1e-2 * t.norm(), "pole {p}");
        }
    }

    #[test]
    fn right_reduction_controller() {
        let sys = fixtures::ex2_controller();
        let data = conj_data(Side::Right, &[0.29, 0.29], &[e(14, 16), e(15, 16)]);
        let res = reduce_right(&sys, &data).unwrap();
        let mut poles = res.diagnostics.poles.clone();
        for t in [c(-0.2576, 1.4795), c(-0.2576, -1.4795), c(-0.5391, 0.0), c(-1.4958, 0.0)] {
            let (i, d) = poles
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p - t).norm()))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            assert!(d <= 2e-2, "pole {t} off by {d}");
            poles.remove(i);
        }
    }

    #[test]
    fn right_convention_is_recorded() {
        let sys = fixtures::ex1_system();
        let data = conj_data(Side::Right, &[1.05e4, 1.05e4], &[e(4, 6), e(5, 6)]);
        let res = reduce_right(&sys, &data).unwrap();
        assert!(res.diagnostics.right_convention.is_some());
        // The inverse-Gram normalization does not give a realizable model
        // on this input.
        let q = linalg::orthonormal_real_basis(&right_subspace_basis(&sys, &data).unwrap()).unwrap();
        let (w, v, _) = symplectic_projection_right(&sys, &q, RightConvention::InverseGram).unwrap();
        let red = petrov_galerkin(&sys, &w, &v).unwrap();
        assert!(!check_pr_quadrature(&red, 1e-3 * pr_scale(&red.state_space())).passes);
        assert_eq!(res.diagnostics.right_convention, Some(RightConvention::SymplecticV));
    }

    #[test]
    fn basis_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for seed in 0..10 {
            let sys = random_pr_quadrature(3, 2, 2, seed).unwrap();
            let data = conj_data(Side::Left, &[0.8, 2.1], &[e(0, 4), e(2, 4)]);
            let w_hat = left_subspace_basis(&sys, &data).unwrap();
            let m = RealMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0)) + RealMatrix::identity(4, 4) * 2.0;
            let (w1, v1, _) = symplectic_projection_left(&sys, &w_hat).unwrap();
            let (w2, v2, _) = symplectic_projection_left(&sys, &(&w_hat * m)).unwrap();
            assert!((&w1 - &w2).norm() > 1e-6);
            let r1 = petrov_galerkin(&sys, &w1, &v1).unwrap().state_space();
            let r2 = petrov_galerkin(&sys, &w2, &v2).unwrap().state_space();
            assert_transfer_match(&r1, &r2, 1e-9);
        }
    }

    #[test]
    fn conjugate_data_gives_real_matrices() {
        let sys = random_pr_quadrature(3, 2, 1, 11).unwrap();
        let data = conj_data(Side::Right, &[1.1], &[Vector::from_vec(vec![c(1.0, 0.5), c(0.0, 0.0), c(0.2, -1.0), c(0.0, 0.0)])]);
        let res = reduce_right(&sys, &data).unwrap();
        assert_eq!(linalg::max_imag(&res.w), 0.0);
        assert_eq!(linalg::max_imag(&res.v), 0.0);
    }

    #[test]
    fn condition_iv_violation_is_reported() {
        // A Lagrangian subspace: span{e_q1, e_q2} has Ŵᵀ J Ŵ = 0.
        let sys = random_pr_quadrature(2, 1, 1, 1).unwrap();
        let mut basis = RealMatrix::zeros(4, 2);
        basis[(0, 0)] = 1.0;
        basis[(2, 1)] = 1.0;
        assert!(matches!(
            symplectic_projection_left(&sys, &basis),
            Err(Error::SkewGramSingular(_))
        ));
    }

    #[test]
    fn passive_basis_examples() {
        let sys = fixtures::ex3_system();
        let mu = e(0, 2);
        let data = InterpolationData::new(
            Side::Left,
            vec![c(0.0, 1.48e7), c(0.0, 0.0), c(0.0, -1.48e7)],
            vec![mu.clone(), mu.clone(), mu],
        )
        .unwrap();
        let basis = passive_subspace_basis(&sys, &data).unwrap();
        assert_eq!(basis.dim(), 3);
        assert!(fro(&(basis.columns().adjoint() * basis.columns() - linalg::identity(3))) <= 1e-12);

        // Spanning case: V_a is unitary.
        let sys = random_pr_annihilation(3, 2, 2, 5).unwrap();
        let data = InterpolationData::new(
            Side::Left,
            vec![c(0.0, 1.0), c(0.5, 0.0), c(0.0, -2.0)],
            vec![e(0, 2), e(1, 2), e(0, 2)],
        )
        .unwrap();
        let basis = passive_subspace_basis(&sys, &data).unwrap();
        let u = basis.columns();
        assert!(fro(&(u * u.adjoint() - linalg::identity(3))) <= 1e-12);
        let res = project_passive(&sys, &basis, Some(data)).unwrap();
        assert_transfer_match(&sys.state_space(), &res.reduced_state_space(), 1e-9);
    }

    #[test]
    fn passive_reduction_contract() {
        for seed in 0..10 {
            let sys = random_pr_annihilation(5, 2, 2, seed).unwrap();
            let data = InterpolationData::new(
                Side::Left,
                vec![c(0.0, 0.7), c(0.3, -1.1)],
                vec![e(0, 2), Vector::from_vec(vec![c(0.3, 0.1), c(1.0, 0.0)])],
            )
            .unwrap();
            let res = reduce_passive(&sys, &data).unwrap();
            let red = match &res.reduced {
                ReducedModel::Annihilation(a) => a,
                _ => unreachable!(),
            };
            assert!(check_pr_annihilation(red, 1e-10).passes);
            assert!(res.diagnostics.biorthogonality <= 1e-12);
            for r in &res.diagnostics.interpolation {
                assert!(r.passes(1e-8, 1e-10), "{r:?}");
            }
        }
    }

    #[test]
    fn cascade_reduction_is_stable() {
        let sys = fixtures::ex3_system();
        let mu = e(0, 2);
        let data = InterpolationData::new(
            Side::Left,
            vec![c(0.0, 1.48e7), c(0.0, 0.0), c(0.0, -1.48e7)],
            vec![mu.clone(), mu.clone(), mu],
        )
        .unwrap();
        let res = reduce_passive(&sys, &data).unwrap();
        let cert = passive_stability_certificate(&res, sys.g()).unwrap();
        assert!(cert.stable && cert.minimal);
    }

    /// Lossy mode coupled to the field plus a decoupled lossless mode at
    /// frequency `w0`: `F = diag(-1/2, i w0)`, `G = (1, 0)ᵀ`.
    fn lossless_mode_system(w0: f64) -> AnnihilationSystem {
        let f = Matrix::from_row_slice(2, 2, &[c(-0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, w0)]);
        let g = Matrix::from_row_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let h = -g.adjoint();
        AnnihilationSystem::new(f, g, h, linalg::identity(1)).unwrap()
    }

    #[test]
    fn certificate_flags_unreachable_lossless_mode() {
        let sys = lossless_mode_system(3.0);
        assert!(check_pr_annihilation(&sys, 1e-14).passes);
        let basis = SubspaceBasis::new(linalg::identity(2)).unwrap();
        let res = project_passive(&sys, &basis, None).unwrap();
        let cert = passive_stability_certificate(&res, sys.g()).unwrap();
        assert!(!cert.stable);
        assert!(!cert.minimal);
        assert!(cert.condition_values.contains(&0.0));
        assert!(!cert.sufficient_i);
    }

    #[test]
    fn certificate_sufficient_condition_i() {
        let sys = random_pr_annihilation(3, 3, 2, 1).unwrap();
        let mu = e(0, 2);
        let data = InterpolationData::new(Side::Left, vec![c(0.0, 1.0)], vec![mu]).unwrap();
        let res = reduce_passive(&sys, &data).unwrap();
        let cert = passive_stability_certificate(&res, sys.g()).unwrap();
        // G is square and nonsingular, so ker Gᴴ = {0}.
        assert!(cert.sufficient_i);
        assert!(cert.stable && cert.minimal && cert.sufficient_ii);
    }

    #[test]
    fn passive_and_quadrature_pipelines_agree() {
        for seed in 0..5 {
            let sys = random_pr_annihilation(4, 2, 2, seed).unwrap();
            let pts = vec![c(0.0, 0.9), c(0.0, -1.7)];
            let mus = vec![e(0, 2), Vector::from_vec(vec![c(0.2, 0.4), c(1.0, 0.0)])];
            let data = InterpolationData::new(Side::Left, pts.clone(), mus.clone()).unwrap();
            let passive = reduce_passive(&sys, &data).unwrap();
            let red_q = match &passive.reduced {
                ReducedModel::Annihilation(a) => annihilation_to_quadrature(a).unwrap(),
                _ => unreachable!(),
            };
            // The same matching conditions in quadrature coordinates:
            // μ_q = ½ (μ_j, -i μ_j) per mode, together with the conjugates.
            let q = annihilation_to_quadrature(&sys).unwrap();
            let mut qp = Vec::new();
            let mut qd = Vec::new();
            for (s, mu) in pts.iter().zip(&mus) {
                let mq = Vector::from_fn(4, |i, _| {
                    let z = mu[i / 2] * 0.5;
                    if i % 2 == 0 { z } else { z * c(0.0, -1.0) }
                });
                qp.push(*s);
                qd.push(mq.clone());
                qp.push(s.conj());
                qd.push(mq.map(|z| z.conj()));
            }
            let qdata = InterpolationData::new(Side::Left, qp, qd).unwrap();
            let quad = reduce_left(&q, &qdata).unwrap();
            assert_transfer_match(&red_q.state_space(), &quad.reduced_state_space(), 1e-8);
            // The realified passive basis spans the quadrature left subspace.
            let big = realify(&passive.v);
            let (w, v, _) = symplectic_projection_left(&q, &big).unwrap();
            let direct = petrov_galerkin(&q, &w, &v).unwrap();
            assert_transfer_match(&red_q.state_space(), &direct.state_space(), 1e-8);
            let _ = transfer_eval(&q, c(0.0, 1.0)).unwrap();
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn reductions_keep_structure(seed in 0u64..10_000, w1 in 0.2f64..5.0, w2 in 0.2f64..5.0, left in any::<bool>()) {
            let sys = random_pr_quadrature(4, 2, 2, seed).unwrap();
            let side = if left { Side::Left } else { Side::Right };
            let len = 4;
            let data = conj_data(side, &[w1, w2], &[e(0, len), e(1, len)]);
            if let Ok(res) = reduce_quadrature(&sys, &data) {
                let d = &res.diagnostics;
                let red = res.reduced_state_space();
                prop_assert!(d.pr.max_residual() <= 1e-8 * pr_scale(&red));
                prop_assert!(d.biorthogonality <= 1e-9);
                for r in &d.interpolation {
                    prop_assert!(r.passes(1e-8, 1e-10), "{:?}", r);
                }
            }
        }
    }
}
