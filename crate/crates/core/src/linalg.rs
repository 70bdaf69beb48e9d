//! Dense complex matrix kernel.
//!
//! Everything is stored as `DMatrix<Complex64>`; real matrices are the
//! zero-imaginary special case. Interpolation points are complex even for
//! real systems, so a single scalar type keeps every path on one kernel.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<Complex64>;
pub type Vector = DVector<Complex64>;
pub type RealMatrix = DMatrix<f64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn to_complex(m: &RealMatrix) -> Matrix {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn real_part(m: &Matrix) -> RealMatrix {
    m.map(|z| z.re)
}

/// Largest absolute imaginary part of any entry.
pub fn max_imag(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.im.abs()))
}

pub fn is_finite(m: &Matrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn check_finite(m: &Matrix) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn identity(n: usize) -> Matrix {
    Matrix::identity(n, n)
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &Matrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Frobenius norm.
pub fn fro(m: &Matrix) -> f64 {
    m.norm()
}

/// `s I - a`.
pub fn shifted(a: &Matrix, s: Complex64) -> Matrix {
    let mut out = -a.clone();
    for i in 0..a.nrows() {
        out[(i, i)] += s;
    }
    out
}

/// Columns of `m` that are linearly independent and optionally orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    columns: Matrix,
    orthonormal: bool,
}

impl SubspaceBasis {
    /// Wraps a matrix whose columns must be linearly independent.
    pub fn new(columns: Matrix) -> Result<Self> {
        check_finite(&columns)?;
        if columns.ncols() > 0 {
            let dec = svd_rank_and_bases(&columns, None);
            if dec.rank < columns.ncols() {
                return Err(Error::Degenerate(format!(
                    "{} columns span only a {}-dimensional space",
                    columns.ncols(),
                    dec.rank
                )));
            }
        }
        let orthonormal = columns.ncols() == 0
            || fro(&(columns.adjoint() * &columns - identity(columns.ncols())))
                <= 1e-12 * columns.ncols() as f64;
        Ok(Self {
            columns,
            orthonormal,
        })
    }

    /// Orthonormal basis for the column span of `m` (rank-revealing).
    pub fn orthonormalize(m: &Matrix) -> Result<Self> {
        let dec = svd_rank_and_bases(m, None);
        if dec.rank < m.ncols() {
            return Err(Error::Degenerate(format!(
                "{} vectors span only a {}-dimensional space",
                m.ncols(),
                dec.rank
            )));
        }
        Ok(dec.range)
    }

    pub(crate) fn from_orthonormal_unchecked(columns: Matrix) -> Self {
        Self {
            columns,
            orthonormal: true,
        }
    }

    pub fn columns(&self) -> &Matrix {
        &self.columns
    }

    pub fn into_columns(self) -> Matrix {
        self.columns
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct RankDecomposition {
    pub rank: usize,
    pub range: SubspaceBasis,
    pub kernel: SubspaceBasis,
    pub singular_values: Vec<f64>,
    pub tol: f64,
}

/// Numerical rank with orthonormal bases of the range and of the null space.
///
/// `tol = None` uses `max(rows, cols) * eps * sigma_max`.
pub fn svd_rank_and_bases(m: &Matrix, tol: Option<f64>) -> RankDecomposition {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return RankDecomposition {
            rank: 0,
            range: SubspaceBasis::from_orthonormal_unchecked(Matrix::zeros(rows, 0)),
            kernel: SubspaceBasis::from_orthonormal_unchecked(identity(cols)),
            singular_values: Vec::new(),
            tol: 0.0,
        };
    }
    // Zero-pad wide matrices so the thin SVD still yields a full right basis.
    let padded = if rows < cols {
        let mut p = Matrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v requested").adjoint();
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    let tol = tol.unwrap_or(rows.max(cols) as f64 * f64::EPSILON * smax);
    let rank = sv.iter().filter(|&&s| s > tol).count();

    let range = u.view((0, 0), (rows, rank)).into_owned();
    let kernel = v.columns(rank, cols - rank).into_owned();
    RankDecomposition {
        rank,
        range: SubspaceBasis::from_orthonormal_unchecked(range),
        kernel: SubspaceBasis::from_orthonormal_unchecked(kernel),
        singular_values: sv.into_iter().take(rows.min(cols)).collect(),
        tol,
    }
}

/// Orthogonal projector `B (B^H B)^{-1} B^H` onto the span of `basis`.
pub fn orth_projector(basis: &SubspaceBasis) -> Result<Matrix> {
    let b = basis.columns();
    if basis.is_orthonormal() {
        return Ok(b * b.adjoint());
    }
    let gram = b.adjoint() * b;
    let x = solve(&gram, &b.adjoint())
        .map_err(|_| Error::Degenerate("projector basis is rank deficient".into()))?;
    let p = b * x;
    Ok((&p + p.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Projector onto the orthogonal complement of the span of `basis`.
pub fn complement_projector(basis: &SubspaceBasis) -> Result<Matrix> {
    Ok(identity(basis.ambient_dim()) - orth_projector(basis)?)
}

/// Solves `m X = rhs` by partially pivoted LU.
pub fn solve(m: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    let n = m.nrows();
    if n != m.ncols() || rhs.nrows() != n {
        return Err(Error::Dimension(format!(
            "solve: {}x{} system with {}x{} right-hand side",
            m.nrows(),
            m.ncols(),
            rhs.nrows(),
            rhs.ncols()
        )));
    }
    if n == 0 {
        return Ok(rhs.clone());
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let (mut pmin, mut pmax) = (f64::INFINITY, 0.0_f64);
    for i in 0..n {
        let p = u[(i, i)].norm();
        pmin = pmin.min(p);
        pmax = pmax.max(p);
    }
    if !(pmin > n as f64 * f64::EPSILON * pmax) {
        return Err(Error::Singular(String::new()));
    }
    lu.solve(rhs).ok_or_else(|| Error::Singular(String::new()))
}

/// `(s I - a)^{-1} rhs`, with the point attached to any singularity error.
pub fn resolvent_solve(a: &Matrix, s: Complex64, rhs: &Matrix) -> Result<Matrix> {
    solve(&shifted(a, s), rhs).map_err(|e| match e {
        Error::Singular(_) => Error::SingularResolvent(s),
        other => other,
    })
}

pub fn inverse(m: &Matrix) -> Result<Matrix> {
    solve(m, &identity(m.nrows()))
}

/// Complex Schur form `m = Q T Q^H` with `T` upper triangular.
pub fn schur(m: &Matrix) -> Result<(Matrix, Matrix)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension("Schur form of a non-square matrix".into()));
    }
    check_finite(m)?;
    if n == 0 {
        return Ok((Matrix::zeros(0, 0), Matrix::zeros(0, 0)));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 1000 * n.max(10))
        .ok_or(Error::NoConvergence)?;
    let (q, mut t) = schur.unpack();
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    let (_, t) = schur(m)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: Complex64,
    pub vector: Vector,
}

/// Eigenvalues and unit eigenvectors of a general square matrix.
///
/// Eigenvectors come from back-substitution on the Schur factor; near-equal
/// diagonal entries are perturbed to `eps * |T|` so defective clusters still
/// return a vector with a small residual.
pub fn eig(m: &Matrix) -> Result<Vec<EigenPair>> {
    let (q, t) = schur(m)?;
    let n = t.nrows();
    let tnorm = t.norm().max(f64::MIN_POSITIVE);
    let smin = f64::EPSILON * tnorm;
    let mut pairs = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut x = Vector::zeros(n);
        x[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * x[j];
            }
            let mut d = t[(i, i)] - lambda;
            if d.norm() < smin {
                d = Complex64::new(smin, 0.0);
            }
            x[i] = -acc / d;
            // Rescale to avoid overflow in long defective chains.
            let xn = x.norm();
            if xn > 1e100 {
                x /= Complex64::new(xn, 0.0);
            }
        }
        let mut v = &q * x;
        let vn = v.norm();
        v /= Complex64::new(vn, 0.0);
        pairs.push(EigenPair { value: lambda, vector: v });
    }
    Ok(pairs)
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re)))
}

/// Solves `A P + P A^H + Q = 0` by Bartels–Stewart on the complex Schur form.
pub fn lyapunov_solve(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if n != a.ncols() || q.shape() != (n, n) {
        return Err(Error::Dimension("lyapunov_solve: A and Q must be square and conformal".into()));
    }
    let (u, t) = schur(a)?;
    let abscissa = (0..n).fold(f64::NEG_INFINITY, |acc, i| acc.max(t[(i, i)].re));
    if n > 0 && abscissa >= 0.0 {
        return Err(Error::NotHurwitz(abscissa));
    }
    let qt = u.adjoint() * q * &u;
    let mut y = Matrix::zeros(n, n);
    for j in (0..n).rev() {
        for i in (0..n).rev() {
            let mut rhs = -qt[(i, j)];
            for k in (i + 1)..n {
                rhs -= t[(i, k)] * y[(k, j)];
            }
            for k in (j + 1)..n {
                rhs -= y[(i, k)] * t[(j, k)].conj();
            }
            y[(i, j)] = rhs / (t[(i, i)] + t[(j, j)].conj());
        }
    }
    let p = &u * y * u.adjoint();
    Ok((&p + p.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Cosine of the largest principal angle between two subspaces, from the
/// singular values of `Q_x^H Q_y`.
pub fn largest_principal_angle_cos(x: &SubspaceBasis, y: &SubspaceBasis) -> Result<f64> {
    let qx = SubspaceBasis::orthonormalize(x.columns())?;
    let qy = SubspaceBasis::orthonormalize(y.columns())?;
    let m = qx.columns().adjoint() * qy.columns();
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(1.0);
    }
    let sv = m.singular_values();
    let smin = sv.iter().fold(f64::INFINITY, |acc, &s| acc.min(s));
    Ok(smin.min(1.0))
}

/// Real orthonormal basis of the column span of a real matrix; errors when
/// the columns are dependent.
pub fn orthonormal_real_basis(m: &RealMatrix) -> Result<RealMatrix> {
    let dec = svd_rank_and_bases(&to_complex(m), None);
    if dec.rank < m.ncols() {
        return Err(Error::Degenerate(format!(
            "{} real basis vectors span only a {}-dimensional space",
            m.ncols(),
            dec.rank
        )));
    }
    // The SVD of a real matrix in complex arithmetic can carry unit-modulus
    // phases on each column; a real QR of the real data avoids that.
    let qr = m.clone().qr();
    Ok(qr.q())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, cl: usize) -> Matrix {
        Matrix::from_fn(r, cl, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn real(rows: &[&[f64]]) -> Matrix {
        let r = rows.len();
        let cl = rows[0].len();
        Matrix::from_fn(r, cl, |i, j| c(rows[i][j], 0.0))
    }

    #[test]
    fn rank_of_identity() {
        let dec = svd_rank_and_bases(&identity(4), None);
        assert_eq!(dec.rank, 4);
        assert_eq!(dec.kernel.dim(), 0);
    }

    #[test]
    fn rank_one_kernel_direction() {
        let m = real(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let dec = svd_rank_and_bases(&m, None);
        assert_eq!(dec.rank, 1);
        let k = dec.kernel.columns().column(0).into_owned();
        let expected = Vector::from_vec(vec![c(2.0, 0.0), c(-1.0, 0.0)]) / c(5f64.sqrt(), 0.0);
        // Up to a unit-modulus phase.
        let overlap = (expected.adjoint() * &k)[(0, 0)].norm();
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let dec = svd_rank_and_bases(&Matrix::zeros(3, 2), None);
        assert_eq!(dec.rank, 0);
        assert_eq!(dec.kernel.dim(), 2);
    }

    #[test]
    fn random_tall_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_matrix(&mut rng, 6, 3);
        let dec = svd_rank_and_bases(&m, None);
        assert_eq!(dec.rank, 3);
        assert_eq!(dec.kernel.dim(), 0);
        let r = dec.range.columns();
        let recon = r * (r.adjoint() * &m);
        assert!(fro(&(&m - recon)) <= 1e-12 * fro(&m));
    }

    #[test]
    fn random_wide_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = random_matrix(&mut rng, 3, 6);
        let dec = svd_rank_and_bases(&m, None);
        assert_eq!(dec.rank + dec.kernel.dim(), 6);
        assert_eq!(dec.kernel.dim(), 3);
        assert!(fro(&(&m * dec.kernel.columns())) <= 1e-12 * fro(&m));
        let k = dec.kernel.columns();
        assert!(fro(&(k.adjoint() * k - identity(3))) < 1e-12);
    }

    #[test]
    fn rank_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 5, 2);
        let b = random_matrix(&mut rng, 2, 5);
        let m = a * b;
        for scale in [1e-6, 1.0, 1e6] {
            let dec = svd_rank_and_bases(&(&m * c(scale, 0.0)), None);
            assert_eq!(dec.rank, 2, "scale {scale}");
        }
    }

    #[test]
    fn projector_examples() {
        let e1 = SubspaceBasis::new(real(&[&[1.0], &[0.0]])).unwrap();
        let p = orth_projector(&e1).unwrap();
        assert!(fro(&(p - real(&[&[1.0, 0.0], &[0.0, 0.0]]))) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let full = SubspaceBasis::new(random_matrix(&mut rng, 4, 4)).unwrap();
        let p = orth_projector(&full).unwrap();
        assert!(fro(&(p - identity(4))) < 1e-12);
    }

    #[test]
    fn projector_is_idempotent_and_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let b = SubspaceBasis::new(random_matrix(&mut rng, 8, 4)).unwrap();
            let p = orth_projector(&b).unwrap();
            assert!(norm2(&(&p * &p - &p)) <= 1e-12);
            assert!(norm2(&(&p - p.adjoint())) <= 1e-12);
        }
    }

    #[test]
    fn projector_rejects_rank_deficient_basis() {
        let m = real(&[&[1.0, 2.0], &[2.0, 4.0], &[0.0, 0.0]]);
        assert!(SubspaceBasis::new(m).is_err());
    }

    #[test]
    fn eig_diagonal_and_companion() {
        let ev = eigenvalues(&real(&[&[-1.0, 0.0], &[0.0, -2.0]])).unwrap();
        let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((re[0] + 2.0).abs() < 1e-14 && (re[1] + 1.0).abs() < 1e-14);

        // s^2 + 4 s + 3
        let comp = real(&[&[0.0, 1.0], &[-3.0, -4.0]]);
        let mut re: Vec<f64> = eigenvalues(&comp).unwrap().iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((re[0] + 3.0).abs() < 1e-12 && (re[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_residuals_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [1, 2, 5, 10, 14] {
            let m = random_matrix(&mut rng, n, n);
            let mn = norm2(&m);
            for p in eig(&m).unwrap() {
                let r = (&m * &p.vector - &p.vector * p.value).norm();
                assert!(r <= 1e-10 * mn, "n={n} residual {r}");
                assert!((p.vector.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eig_rejects_non_square() {
        assert!(eig(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn solve_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rhs = random_matrix(&mut rng, 3, 2);
        assert_eq!(solve(&identity(3), &rhs).unwrap(), rhs);

        let d = real(&[&[2.0, 0.0], &[0.0, 4.0]]);
        let x = solve(&d, &identity(2)).unwrap();
        assert!(fro(&(x - real(&[&[0.5, 0.0], &[0.0, 0.25]]))) < 1e-15);

        let m = random_matrix(&mut rng, 10, 10) + identity(10) * c(3.0, 0.0);
        let b = random_matrix(&mut rng, 10, 3);
        let x = solve(&m, &b).unwrap();
        assert!(norm2(&(&m * &x - &b)) <= 1e-10 * norm2(&m) * norm2(&x));
    }

    #[test]
    fn solve_detects_singularity() {
        let m = real(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(solve(&m, &identity(2)), Err(Error::Singular(_))));
        assert!(matches!(
            resolvent_solve(&Matrix::zeros(2, 2), c(0.0, 0.0), &identity(2)),
            Err(Error::SingularResolvent(_))
        ));
    }

    #[test]
    fn lyapunov_examples() {
        let p = lyapunov_solve(&(-identity(3)), &(identity(3) * c(2.0, 0.0))).unwrap();
        assert!(fro(&(p - identity(3))) < 1e-14);

        let a = real(&[&[-1.0, 0.0], &[0.0, -2.0]]);
        let q = real(&[&[2.0, 0.0], &[0.0, 4.0]]);
        let p = lyapunov_solve(&a, &q).unwrap();
        assert!(fro(&(p - identity(2))) < 1e-14);
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        assert!(matches!(
            lyapunov_solve(&identity(2), &identity(2)),
            Err(Error::NotHurwitz(_))
        ));
    }

    #[test]
    fn lyapunov_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in [2, 6, 12] {
            let a = random_matrix(&mut rng, n, n) - identity(n) * c(3.0, 0.0);
            let b = random_matrix(&mut rng, n, 2);
            let q = &b * b.adjoint();
            let p = lyapunov_solve(&a, &q).unwrap();
            let res = fro(&(&a * &p + &p * a.adjoint() + &q));
            assert!(res <= 1e-9 * (fro(&a) * fro(&p) + fro(&q)));
            assert!(fro(&(&p - p.adjoint())) < 1e-12 * fro(&p));
        }
    }

    #[test]
    fn principal_angle_of_identical_and_orthogonal() {
        let x = SubspaceBasis::new(real(&[&[1.0], &[0.0]])).unwrap();
        let y = SubspaceBasis::new(real(&[&[0.0], &[1.0]])).unwrap();
        assert!((largest_principal_angle_cos(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(largest_principal_angle_cos(&x, &y).unwrap().abs() < 1e-15);
    }

    #[test]
    fn lyapunov_matches_integral_of_flow() {
        // P = ∫₀^∞ e^{At} Q e^{Aᴴt} dt, truncated at 40/|Re λ|_min.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 4;
        let a = Matrix::from_fn(n, n, |i, j| {
            let z = Complex64::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
            if i == j { z - Complex64::new(1.5, 0.0) } else { z }
        });
        let x = Matrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let q = &x * x.adjoint();
        let p = lyapunov_solve(&a, &q).unwrap();
        let decay = eigenvalues(&a).unwrap().iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
        let steps = 8000;
        let h = 40.0 / decay / steps as f64;
        let step = (&a * Complex64::new(h, 0.0)).exp();
        // Composite Simpson rule on the propagated flow.
        let mut e = identity(n);
        let mut acc = Matrix::zeros(n, n);
        for k in 0..=steps {
            let w = if k == 0 || k == steps { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += (&e * &q * e.adjoint()) * Complex64::new(w * h / 3.0, 0.0);
            e = &step * e;
        }
        assert!(fro(&(&acc - &p)) <= 1e-6 * fro(&p), "{}", fro(&(&acc - &p)) / fro(&p));
    }
}
