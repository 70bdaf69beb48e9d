//! System types in quadrature and annihilation-operator form, transfer
//! functions, physical-realizability checks and random generators.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, RealMatrix};

/// `I_n ⊗ [[0, 1], [-1, 0]]`.
pub fn jn(n: usize) -> RealMatrix {
    let mut j = RealMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(2 * k, 2 * k + 1)] = 1.0;
        j[(2 * k + 1, 2 * k)] = -1.0;
    }
    j
}

/// Real representation of a complex matrix: entry `x` becomes the block
/// `[[Re x, -Im x], [Im x, Re x]]`.
pub fn realify(x: &Matrix) -> RealMatrix {
    let (p, q) = x.shape();
    let mut out = RealMatrix::zeros(2 * p, 2 * q);
    for i in 0..p {
        for j in 0..q {
            let z = x[(i, j)];
            out[(2 * i, 2 * j)] = z.re;
            out[(2 * i, 2 * j + 1)] = -z.im;
            out[(2 * i + 1, 2 * j)] = z.im;
            out[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    out
}

/// Dense state-space model `D + C (sI - A)^{-1} B` over the complex field.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
}

impl StateSpace {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n
            || b.nrows() != n
            || c.ncols() != n
            || d.nrows() != c.nrows()
            || d.ncols() != b.ncols()
        {
            return Err(Error::Dimension(format!(
                "state space A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        for m in [&a, &b, &c, &d] {
            linalg::check_finite(m)?;
        }
        Ok(Self { a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn transfer(&self, s: Complex64) -> Result<Matrix> {
        if self.order() == 0 {
            return Ok(self.d.clone());
        }
        let x = linalg::resolvent_solve(&self.a, s, &self.b)?;
        Ok(&self.d + &self.c * x)
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        linalg::eigenvalues(&self.a)
    }

    pub fn spectral_abscissa(&self) -> Result<f64> {
        linalg::spectral_abscissa(&self.a)
    }

    pub fn is_hurwitz(&self) -> Result<bool> {
        Ok(self.order() == 0 || self.spectral_abscissa()? < 0.0)
    }

    /// True when every matrix has zero imaginary part.
    pub fn is_real(&self) -> bool {
        [&self.a, &self.b, &self.c, &self.d]
            .iter()
            .all(|m| linalg::max_imag(m) == 0.0)
    }

    /// `self - other` as one system with block-diagonal state matrix.
    pub fn difference(&self, other: &StateSpace) -> Result<StateSpace> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(Error::Dimension(format!(
                "cannot subtract a {}x{} system from a {}x{} system",
                other.outputs(),
                other.inputs(),
                self.outputs(),
                self.inputs()
            )));
        }
        let (n1, n2) = (self.order(), other.order());
        let n = n1 + n2;
        let mut a = Matrix::zeros(n, n);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = Matrix::zeros(n, self.inputs());
        b.view_mut((0, 0), (n1, self.inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.inputs())).copy_from(&other.b);
        let mut c = Matrix::zeros(self.outputs(), n);
        c.view_mut((0, 0), (self.outputs(), n1)).copy_from(&self.c);
        c.view_mut((0, n1), (self.outputs(), n2)).copy_from(&(-&other.c));
        StateSpace::new(a, b, c, &self.d - &other.d)
    }
}

/// Anything with a state-space realization.
pub trait LinearSystem {
    fn state_space(&self) -> StateSpace;
}

impl LinearSystem for StateSpace {
    fn state_space(&self) -> StateSpace {
        self.clone()
    }
}

/// Quadrature-form model with real `A` (2n×2n), `B` (2n×2m), `C` (2ℓ×2n)
/// and `D` (2ℓ×2m).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSystem {
    n: usize,
    m: usize,
    ell: usize,
    a: RealMatrix,
    b: RealMatrix,
    c: RealMatrix,
    d: RealMatrix,
}

impl QuadratureSystem {
    pub fn new(a: RealMatrix, b: RealMatrix, c: RealMatrix, d: RealMatrix) -> Result<Self> {
        let (ra, ca) = a.shape();
        if ra != ca || ra % 2 != 0 || !b.ncols().is_multiple_of(2) || !c.nrows().is_multiple_of(2) {
            return Err(Error::Dimension(format!(
                "quadrature form needs even dimensions; got A {:?}, B {:?}, C {:?}",
                a.shape(),
                b.shape(),
                c.shape()
            )));
        }
        let (n, m, ell) = (ra / 2, b.ncols() / 2, c.nrows() / 2);
        if b.nrows() != 2 * n || c.ncols() != 2 * n || d.shape() != (2 * ell, 2 * m) {
            return Err(Error::Dimension(format!(
                "expected B {}x{}, C {}x{}, D {}x{}; got B {:?}, C {:?}, D {:?}",
                2 * n,
                2 * m,
                2 * ell,
                2 * n,
                2 * ell,
                2 * m,
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        if ell > m {
            return Err(Error::Dimension(format!(
                "output field count {ell} exceeds input field count {m}"
            )));
        }
        for x in [&a, &b, &c, &d] {
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { n, m, ell, a, b, c, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn ell(&self) -> usize {
        self.ell
    }
    pub fn a(&self) -> &RealMatrix {
        &self.a
    }
    pub fn b(&self) -> &RealMatrix {
        &self.b
    }
    pub fn c(&self) -> &RealMatrix {
        &self.c
    }
    pub fn d(&self) -> &RealMatrix {
        &self.d
    }
}

impl LinearSystem for QuadratureSystem {
    fn state_space(&self) -> StateSpace {
        StateSpace {
            a: linalg::to_complex(&self.a),
            b: linalg::to_complex(&self.b),
            c: linalg::to_complex(&self.c),
            d: linalg::to_complex(&self.d),
        }
    }
}

/// A system in either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum System {
    Quadrature(QuadratureSystem),
    Annihilation(AnnihilationSystem),
}

impl System {
    /// Realizability report in the system's own representation.
    pub fn check_pr(&self, tol: f64) -> PrReport {
        match self {
            System::Quadrature(q) => check_pr_quadrature(q, tol),
            System::Annihilation(a) => check_pr_annihilation(a, tol),
        }
    }

    pub fn form(&self) -> &'static str {
        match self {
            System::Quadrature(_) => "quadrature",
            System::Annihilation(_) => "annihilation",
        }
    }
}

impl LinearSystem for System {
    fn state_space(&self) -> StateSpace {
        match self {
            System::Quadrature(q) => q.state_space(),
            System::Annihilation(a) => a.state_space(),
        }
    }
}

impl From<QuadratureSystem> for System {
    fn from(q: QuadratureSystem) -> Self {
        System::Quadrature(q)
    }
}

impl From<AnnihilationSystem> for System {
    fn from(a: AnnihilationSystem) -> Self {
        System::Annihilation(a)
    }
}

/// Annihilation-operator model with complex `F` (n×n), `G` (n×m), `H` (ℓ×n)
/// and `K` (ℓ×m).
#[derive(Debug, Clone, PartialEq)]
pub struct AnnihilationSystem {
    n: usize,
    m: usize,
    ell: usize,
    f: Matrix,
    g: Matrix,
    h: Matrix,
    k: Matrix,
}

impl AnnihilationSystem {
    pub fn new(f: Matrix, g: Matrix, h: Matrix, k: Matrix) -> Result<Self> {
        let n = f.nrows();
        let (m, ell) = (g.ncols(), h.nrows());
        if f.ncols() != n || g.nrows() != n || h.ncols() != n || k.shape() != (ell, m) {
            return Err(Error::Dimension(format!(
                "annihilation form F {:?}, G {:?}, H {:?}, K {:?}",
                f.shape(),
                g.shape(),
                h.shape(),
                k.shape()
            )));
        }
        if ell > m {
            return Err(Error::Dimension(format!(
                "output field count {ell} exceeds input field count {m}"
            )));
        }
        for x in [&f, &g, &h, &k] {
            linalg::check_finite(x)?;
        }
        Ok(Self { n, m, ell, f, g, h, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn ell(&self) -> usize {
        self.ell
    }
    pub fn f(&self) -> &Matrix {
        &self.f
    }
    pub fn g(&self) -> &Matrix {
        &self.g
    }
    pub fn h(&self) -> &Matrix {
        &self.h
    }
    pub fn k(&self) -> &Matrix {
        &self.k
    }
}

impl LinearSystem for AnnihilationSystem {
    fn state_space(&self) -> StateSpace {
        StateSpace {
            a: self.f.clone(),
            b: self.g.clone(),
            c: self.h.clone(),
            d: self.k.clone(),
        }
    }
}

/// Frobenius norms of the three realizability residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrReport {
    pub residual_1: f64,
    pub residual_2: f64,
    pub residual_3: f64,
    pub tol: f64,
    pub passes: bool,
}

impl PrReport {
    fn new(residual_1: f64, residual_2: f64, residual_3: f64, tol: f64) -> Self {
        let worst = residual_1.max(residual_2).max(residual_3);
        Self {
            residual_1,
            residual_2,
            residual_3,
            tol,
            passes: worst <= tol,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residual_1.max(self.residual_2).max(self.residual_3)
    }
}

/// `A J + J Aᵀ + B J Bᵀ`, `J Cᵀ + B J Dᵀ` and `D J Dᵀ - J`.
pub fn check_pr_quadrature(sys: &QuadratureSystem, tol: f64) -> PrReport {
    let (jn_, jm, jl) = (jn(sys.n), jn(sys.m), jn(sys.ell));
    let (a, b, c, d) = (&sys.a, &sys.b, &sys.c, &sys.d);
    let r1 = a * &jn_ + &jn_ * a.transpose() + b * &jm * b.transpose();
    let r2 = &jn_ * c.transpose() + b * &jm * d.transpose();
    let r3 = d * &jm * d.transpose() - &jl;
    PrReport::new(r1.norm(), r2.norm(), r3.norm(), tol)
}

/// `F + Fᴴ + G Gᴴ`, `Hᴴ + G Kᴴ` and `K Kᴴ - I`.
pub fn check_pr_annihilation(sys: &AnnihilationSystem, tol: f64) -> PrReport {
    let (f, g, h, k) = (&sys.f, &sys.g, &sys.h, &sys.k);
    let r1 = f + f.adjoint() + g * g.adjoint();
    let r2 = h.adjoint() + g * k.adjoint();
    let r3 = k * k.adjoint() - linalg::identity(sys.ell);
    PrReport::new(r1.norm(), r2.norm(), r3.norm(), tol)
}

/// `D + C (sI - A)^{-1} B`.
pub fn transfer_eval<S: LinearSystem + ?Sized>(sys: &S, s: Complex64) -> Result<Matrix> {
    sys.state_space().transfer(s)
}

/// Maps `a = (q + i p) / 2` dynamics onto quadrature pairs. Every complex
/// entry becomes a `[[Re, -Im], [Im, Re]]` block; the factors of two on
/// state and field cancel, and realizability carries over.
pub fn annihilation_to_quadrature(sys: &AnnihilationSystem) -> Result<QuadratureSystem> {
    QuadratureSystem::new(realify(&sys.f), realify(&sys.g), realify(&sys.h), realify(&sys.k))
}

/// State matrix of the plant/controller loop `du = C_c z`, `dy = C x`:
/// `[[A, B_u C_c], [B_c C, A_c]]`.
pub fn closed_loop_state_matrix(
    plant: (&RealMatrix, &RealMatrix, &RealMatrix),
    controller: (&RealMatrix, &RealMatrix, &RealMatrix),
) -> Result<RealMatrix> {
    let (a, b_u, c) = plant;
    let (a_c, b_c, c_c) = controller;
    let (np, nc) = (a.nrows(), a_c.nrows());
    if a.ncols() != np
        || a_c.ncols() != nc
        || b_u.nrows() != np
        || c_c.ncols() != nc
        || b_u.ncols() != c_c.nrows()
        || c.ncols() != np
        || b_c.nrows() != nc
        || b_c.ncols() != c.nrows()
    {
        return Err(Error::Dimension(format!(
            "closed loop: A {:?}, B_u {:?}, C {:?}, A_c {:?}, B_c {:?}, C_c {:?}",
            a.shape(),
            b_u.shape(),
            c.shape(),
            a_c.shape(),
            b_c.shape(),
            c_c.shape()
        )));
    }
    let mut out = RealMatrix::zeros(np + nc, np + nc);
    out.view_mut((0, 0), (np, np)).copy_from(a);
    out.view_mut((0, np), (np, nc)).copy_from(&(b_u * c_c));
    out.view_mut((np, 0), (nc, np)).copy_from(&(b_c * c));
    out.view_mut((np, np), (nc, nc)).copy_from(a_c);
    Ok(out)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_real(rng: &mut ChaCha8Rng, r: usize, c: usize) -> RealMatrix {
    DMatrix::from_fn(r, c, |_, _| normal(rng))
}

fn gaussian_complex(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(r, c, |_, _| Complex64::new(s * normal(rng), s * normal(rng)))
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let x = gaussian_complex(rng, n, n);
    (&x + x.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Haar-distributed unitary from the QR factor of a complex Gaussian matrix.
fn random_unitary(rng: &mut ChaCha8Rng, m: usize) -> Matrix {
    if m == 0 {
        return Matrix::zeros(0, 0);
    }
    let qr = gaussian_complex(rng, m, m).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..m {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

fn top_rows(m: &Matrix, k: usize) -> Matrix {
    m.rows(0, k).into_owned()
}

/// `A = 2 J R + ½ B J Bᵀ J`, `Cᵀ = J B J Dᵀ` with symmetric `R`, Gaussian `B`
/// and `D` the top `2ℓ` rows of a realified random unitary. Realizable by
/// construction; stability is not guaranteed.
pub fn random_pr_quadrature(n: usize, m: usize, ell: usize, seed: u64) -> Result<QuadratureSystem> {
    if ell > m {
        return Err(Error::Dimension(format!("ell = {ell} exceeds m = {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian_real(&mut rng, 2 * n, 2 * n);
    let r = (&x + x.transpose()) * 0.5;
    let b = gaussian_real(&mut rng, 2 * n, 2 * m);
    let u = random_unitary(&mut rng, m);
    Ok(assemble_quadrature(&r, b, &u, n, m, ell))
}

fn assemble_quadrature(
    r: &RealMatrix,
    b: RealMatrix,
    u: &Matrix,
    n: usize,
    m: usize,
    ell: usize,
) -> QuadratureSystem {
    let (jn_, jm) = (jn(n), jn(m));
    let a = &jn_ * r * 2.0 + &b * &jm * b.transpose() * &jn_ * 0.5;
    let d = realify(&top_rows(u, ell));
    let c = (&jn_ * &b * &jm * d.transpose()).transpose();
    QuadratureSystem::new(a, b, c, d).expect("constructed dimensions are consistent")
}

/// Realizable quadrature system with Hurwitz `A`: a passive core with a
/// random Hamiltonian and coupling, plus a non-passive (squeezing)
/// perturbation of the Hamiltonian that is halved until `A` is stable.
pub fn random_stable_pr_quadrature(
    n: usize,
    m: usize,
    ell: usize,
    seed: u64,
) -> Result<QuadratureSystem> {
    if ell > m {
        return Err(Error::Dimension(format!("ell = {ell} exceeds m = {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _attempt in 0..64 {
        let omega = random_hermitian(&mut rng, n);
        let g = gaussian_complex(&mut rng, n, m);
        let u = random_unitary(&mut rng, m);
        let x = gaussian_real(&mut rng, 2 * n, 2 * n);
        let squeeze = (&x + x.transpose()) * 0.25;
        // 2 J realify(Ω/2) = realify(-iΩ).
        let r_passive = realify(&omega) * 0.5;
        let b = realify(&g);
        let scale = (g.norm_squared() / n.max(1) as f64).max(1e-3);
        let mut eps = 1.0;
        for _ in 0..30 {
            let r = &r_passive + &squeeze * eps;
            let sys = assemble_quadrature(&r, b.clone(), &u, n, m, ell);
            let abscissa = linalg::spectral_abscissa(&linalg::to_complex(sys.a()))?;
            if abscissa < -1e-2 * scale {
                return Ok(sys);
            }
            eps *= 0.5;
        }
    }
    Err(Error::Invalid(format!(
        "could not draw a stable realizable system for seed {seed}"
    )))
}

/// `F = -iΩ - ½ G Gᴴ`, `H = -K Gᴴ` with Hermitian `Ω`, Gaussian `G` and `K`
/// the top `ℓ` rows of a random unitary.
pub fn random_pr_annihilation(
    n: usize,
    m: usize,
    ell: usize,
    seed: u64,
) -> Result<AnnihilationSystem> {
    if ell > m {
        return Err(Error::Dimension(format!("ell = {ell} exceeds m = {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = random_hermitian(&mut rng, n);
    let g = gaussian_complex(&mut rng, n, m);
    let k = top_rows(&random_unitary(&mut rng, m), ell);
    Ok(passive_from_parts(&omega, g, k))
}

/// Assembles `(F, G, H, K)` from a Hamiltonian matrix, coupling and
/// scattering matrix so realizability holds exactly up to rounding.
pub fn passive_from_parts(omega: &Matrix, g: Matrix, k: Matrix) -> AnnihilationSystem {
    let f = -omega * linalg::I - &g * g.adjoint() * Complex64::new(0.5, 0.0);
    let h = -&k * g.adjoint();
    AnnihilationSystem::new(f, g, h, k).expect("constructed dimensions are consistent")
}
