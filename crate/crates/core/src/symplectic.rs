//! Normal form of real skew-symmetric matrices and symplecticity checks.

use nalgebra::Schur;

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;
use crate::model::jn;

/// Condition number above which a skew Gram matrix counts as singular.
pub const SKEW_CONDITION_LIMIT: f64 = 1e12;

/// `T` with `T Θ Tᵀ = J_r` and the achieved residual.
#[derive(Debug, Clone)]
pub struct SkewNormalForm {
    pub t: RealMatrix,
    pub residual: f64,
    pub condition: f64,
}

/// Finds a nonsingular real `T` with `T Θ Tᵀ = J_r` for a nonsingular real
/// skew-symmetric `Θ` of even order.
///
/// The real Schur form `Θ = Z U Zᵀ` splits the space into invariant planes
/// on which `Θ` acts as `[[0, β], [-β, 0]]`. Scaling each plane by `1/√|β|`
/// and swapping its two rows when `β < 0` gives `T`.
pub fn skew_normal_form(theta: &RealMatrix, tol: f64) -> Result<SkewNormalForm> {
    let (n, nc) = theta.shape();
    if n != nc {
        return Err(Error::Dimension(format!("skew matrix is {n}x{nc}")));
    }
    if n % 2 != 0 {
        return Err(Error::Dimension(format!(
            "skew matrix of odd order {n} is always singular"
        )));
    }
    if !theta.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let scale = theta.norm();
    if scale == 0.0 {
        return Err(Error::SkewGramSingular(f64::INFINITY));
    }
    let asym = (theta + theta.transpose()).norm() / (2.0 * scale);
    if asym > tol {
        return Err(Error::NotSkew(asym));
    }
    let th = (theta - theta.transpose()) * 0.5;

    let sv = th.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= SKEW_CONDITION_LIMIT) {
        return Err(Error::SkewGramSingular(condition));
    }

    // Orthogonal similarity keeps Θ skew, so the real Schur factor is
    // block diagonal with 2×2 blocks [[0, β], [-β, 0]].
    let (z, u) = Schur::try_new(th.clone(), f64::EPSILON, 1000 * n.max(10))
        .ok_or(Error::NoConvergence)?
        .unpack();
    let mut t = z.transpose();
    let mut p = 0;
    while p < n {
        if u[(p + 1, p)].abs() <= f64::EPSILON * smax {
            return Err(Error::Degenerate(format!(
                "real Schur factor of the skew matrix has a 1x1 block at {p}"
            )));
        }
        let beta = u[(p, p + 1)];
        let scale = 1.0 / beta.abs().sqrt();
        if beta < 0.0 {
            t.swap_rows(p, p + 1);
        }
        for row in [p, p + 1] {
            let mut r = t.row_mut(row);
            r *= scale;
        }
        p += 2;
    }
    let residual = (&t * &th * t.transpose() - jn(n / 2)).norm();
    Ok(SkewNormalForm {
        t,
        residual,
        condition,
    })
}

/// `‖M J_{n_in} Mᵀ - J_{n_out}‖ ≤ tol` for a real `2 n_out × 2 n_in` matrix.
pub fn is_symplectic(m: &RealMatrix, n_in: usize, n_out: usize, tol: f64) -> bool {
    if m.shape() != (2 * n_out, 2 * n_in) {
        return false;
    }
    (m * jn(n_in) * m.transpose() - jn(n_out)).norm() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check(theta: &RealMatrix) -> SkewNormalForm {
        let snf = skew_normal_form(theta, 1e-12).unwrap();
        let r = (&snf.t * theta * snf.t.transpose() - jn(theta.nrows() / 2)).norm();
        assert!(r <= 1e-10 * theta.norm().max(1.0), "residual {r}");
        assert!((r - snf.residual).abs() <= 1e-12 * theta.norm().max(1.0));
        snf
    }

    #[test]
    fn canonical_input() {
        for r in 1..5 {
            let snf = check(&jn(r));
            assert!(snf.residual <= 1e-14);
        }
    }

    #[test]
    fn scaled_canonical_input() {
        let snf = check(&(jn(1) * 2.0));
        assert!(snf.residual <= 1e-14);
        // Any valid T has |det T| = 1/2 here.
        assert!((snf.t.determinant().abs() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn congruent_to_canonical() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let s = RealMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
            let theta = &s * jn(2) * s.transpose();
            check(&theta);
        }
    }

    #[test]
    fn repeated_beta_values() {
        // Θ = 3 J_3 has a single eigenvalue of ΘᵀΘ with multiplicity six.
        check(&(jn(3) * 3.0));
        // Rotated copy of the same spectrum.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = RealMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let q = x.qr().q();
        check(&(&q * (jn(3) * 3.0) * q.transpose()));
    }

    #[test]
    fn rejects_non_skew() {
        let m = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(skew_normal_form(&m, 1e-10), Err(Error::NotSkew(_))));
    }

    #[test]
    fn symmetrizes_rounding_level_asymmetry() {
        let mut m = jn(2);
        m[(0, 1)] += 1e-15;
        check(&m);
    }

    #[test]
    fn rejects_singular() {
        let mut m = RealMatrix::zeros(4, 4);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = -1.0;
        assert!(matches!(
            skew_normal_form(&m, 1e-10),
            Err(Error::SkewGramSingular(_))
        ));
        assert!(skew_normal_form(&RealMatrix::zeros(3, 3), 1e-10).is_err());
    }

    #[test]
    fn inverse_direction_target() {
        // T₂ J T₂ᵀ = target for target = (V̂ᵀ Jᵀ V̂)^{-1}.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let vh = RealMatrix::from_fn(8, 4, |_, _| rng.random_range(-1.0..1.0));
            let target = (vh.transpose() * jn(4).transpose() * &vh).try_inverse().unwrap();
            let snf = skew_normal_form(&target, 1e-10).unwrap();
            let t2 = snf.t.clone().try_inverse().unwrap();
            let r = (&t2 * jn(2) * t2.transpose() - &target).norm();
            assert!(r <= 1e-9 * target.norm());
        }
    }

    #[test]
    fn symplectic_predicate_examples() {
        assert!(is_symplectic(&RealMatrix::identity(4, 4), 2, 2, 1e-14));
        let mut d = RealMatrix::zeros(2, 6);
        d[(0, 0)] = -1.0;
        d[(1, 1)] = -1.0;
        assert!(is_symplectic(&d, 3, 1, 1e-14));
        let squeezer = RealMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        assert!(is_symplectic(&squeezer, 1, 1, 1e-14));
        let amp = RealMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        assert!(!is_symplectic(&amp, 1, 1, 1e-14));
        assert!(!is_symplectic(&amp, 2, 1, 1e-14));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn normal_form_soundness(seed in any::<u64>(), r in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = RealMatrix::from_fn(2 * r, 2 * r, |_, _| rng.random_range(-1.0..1.0));
            // Skip draws too close to singular for the condition limit.
            let sv = s.clone().singular_values();
            prop_assume!(sv.min() > 1e-3 * sv.max());
            let theta = &s * jn(r) * s.transpose();
            let snf = skew_normal_form(&theta, 1e-10).unwrap();
            prop_assert!(snf.residual <= 1e-10 * theta.norm());
        }
    }
}
