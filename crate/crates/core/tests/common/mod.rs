#![allow(dead_code)]

use num_complex::Complex64;
use qmor::linalg::{self, Matrix, Vector};
use qmor::model::{random_pr_annihilation, random_stable_pr_quadrature, AnnihilationSystem};
use qmor::reduction::{self, InterpolationData, Method, ReductionResult, Side};
use qmor::{LinearSystem, StateSpace, System};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random realizable system together with one reduction of it.
pub struct Case {
    pub seed: u64,
    pub method: Method,
    pub full: System,
    pub result: ReductionResult,
}

impl Case {
    pub fn full_state_space(&self) -> StateSpace {
        self.full.state_space()
    }
}

fn random_unit(rng: &mut ChaCha8Rng, len: usize) -> Vector {
    let v = Vector::from_fn(len, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

/// Point in the closed right half plane away from the stable poles.
fn random_point(rng: &mut ChaCha8Rng, imag_lo: f64) -> Complex64 {
    let re = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.05..1.0) };
    Complex64::new(re, rng.random_range(imag_lo..4.0))
}

/// Conjugate-closed data with `pairs` pairs and random complex directions.
pub fn conjugate_pair_data(rng: &mut ChaCha8Rng, side: Side, pairs: usize, len: usize) -> InterpolationData {
    let mut points = Vec::with_capacity(2 * pairs);
    let mut dirs = Vec::with_capacity(2 * pairs);
    for _ in 0..pairs {
        let s = random_point(rng, 0.2);
        let d = random_unit(rng, len);
        points.extend([s, s.conj()]);
        dirs.extend([d.clone(), d.conjugate()]);
    }
    InterpolationData::new(side, points, dirs).expect("generated data is consistent")
}

/// Quadrature reduction (left or right) or passive reduction for `seed`.
pub fn random_case(seed: u64, method: Method) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0000);
    match method {
        Method::Left | Method::Right => {
            let n = 3 + (seed % 3) as usize;
            let (m, ell) = (2, 1 + (seed % 2) as usize);
            let sys = random_stable_pr_quadrature(n, m, ell, seed).expect("stable draw");
            let pairs = 1 + (seed % 2) as usize;
            let (side, len) = match method {
                Method::Left => (Side::Left, 2 * ell),
                _ => (Side::Right, 2 * m),
            };
            let data = conjugate_pair_data(&mut rng, side, pairs, len);
            let result = reduction::reduce_quadrature(&sys, &data).expect("generic data reduces");
            Case { seed, method, full: sys.into(), result }
        }
        Method::Passive => {
            let n = 3 + (seed % 4) as usize;
            let (m, ell) = (2, 1 + (seed % 2) as usize);
            let sys = random_pr_annihilation(n, m, ell, seed).expect("passive draw");
            let k = 2 + (seed % 2) as usize;
            let points = (0..k).map(|_| random_point(&mut rng, -4.0)).collect();
            let dirs = (0..k).map(|_| random_unit(&mut rng, ell)).collect();
            let data = InterpolationData::new(Side::Left, points, dirs).expect("generated data is consistent");
            let result = reduction::reduce_passive(&sys, &data).expect("generic data reduces");
            Case { seed, method, full: sys.into(), result }
        }
    }
}

/// Lossy mode coupled to the field plus a decoupled lossless mode at
/// frequency `w0`: `F = diag(-1/2, i w0)`, `G = (1, 0)ᵀ`, `H = -Gᴴ`, `K = 1`.
pub fn lossless_mode_system(w0: f64) -> AnnihilationSystem {
    let c = Complex64::new;
    let f = Matrix::from_row_slice(2, 2, &[c(-0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, w0)]);
    let g = Matrix::from_row_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]);
    let h = -g.adjoint();
    AnnihilationSystem::new(f, g, h, linalg::identity(1)).expect("consistent dimensions")
}
