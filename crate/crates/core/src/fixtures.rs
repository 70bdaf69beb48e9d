//! Reference systems: a three-mode optomechanical plant, a six-mode
//! coherent controller with its plant, and a cascade of five cavities.

use num_complex::Complex64;

use crate::linalg::{Matrix, RealMatrix};
use crate::model::{AnnihilationSystem, QuadratureSystem};

/// Cavity decay rate of the optomechanical system.
pub const EX1_KAPPA: f64 = 2e5;
/// Mechanical damping rate.
pub const EX1_GAMMA: f64 = 100.0;
/// Optomechanical coupling, stored at four significant digits.
pub const EX1_COUPLING: f64 = 7.0711e4;
/// Mechanical frequency.
pub const EX1_OMEGA_B: f64 = 1e4;

/// Decay rate of each cavity in the cascade.
pub const EX3_GAMMA: f64 = 1e6;

/// Optical cavity coupled to a mechanical oscillator, with one optical and
/// two thermal-noise input fields and the optical output field.
pub fn ex1_system() -> QuadratureSystem {
    let (k, g, cpl, ob) = (EX1_KAPPA, EX1_GAMMA, EX1_COUPLING, EX1_OMEGA_B);
    let mut a = RealMatrix::zeros(6, 6);
    a[(0, 0)] = -k / 2.0;
    a[(1, 1)] = -k / 2.0;
    a[(1, 2)] = -cpl;
    a[(2, 2)] = -g / 2.0;
    a[(2, 5)] = ob;
    a[(3, 0)] = -cpl;
    a[(3, 3)] = -g / 2.0;
    a[(3, 4)] = -ob;
    a[(4, 3)] = ob;
    a[(4, 4)] = -g / 2.0;
    a[(5, 2)] = -ob;
    a[(5, 5)] = -g / 2.0;
    let mut b = RealMatrix::zeros(6, 6);
    for i in 0..6 {
        b[(i, i)] = if i < 2 { k.sqrt() } else { g.sqrt() };
    }
    let mut c = RealMatrix::zeros(2, 6);
    c[(0, 0)] = k.sqrt();
    c[(1, 1)] = k.sqrt();
    let mut d = RealMatrix::zeros(2, 6);
    d[(0, 0)] = -1.0;
    d[(1, 1)] = -1.0;
    QuadratureSystem::new(a, b, c, d).expect("fixture dimensions")
}

#[rustfmt::skip]
const EX2_AC: [f64; 36] = [
    -1.5500, -0.0001, -0.0016,  0.0000, -0.0139,  0.0000,
    -0.0052, -2.4500,  0.0000, -0.0315,  0.0000, -0.0447,
   -10.3270, -0.0022, -1.0920, -0.0002, -0.3718,  0.0004,
     0.2787, 39.3723,  0.0003,  0.2090,  0.0001, -1.1943,
    17.5312,  0.0014,  1.0494, -0.0002,  0.1927,  0.0005,
    -0.0207,  0.0007,  0.0003,  0.1741,  0.0002, -0.7083,
];

#[rustfmt::skip]
const EX2_BC: [f64; 12] = [
     1.0493,   0.0001,
     0.0052,   1.9493,
    10.3276,   0.0022,
    -0.2787, -39.3717,
   -17.5305,  -0.0014,
     0.0207,   0.0000,
];

#[rustfmt::skip]
const EX2_CC: [f64; 12] = [
    -0.0006, -0.0000, -0.9580,  0.0002, -0.7236, -0.0004,
     0.0000, -0.0007, -0.0003, -0.1590, -0.0001,  0.0989,
];

/// Additional noise-input matrix of the controller, 6×14.
#[rustfmt::skip]
const EX2_BV: [f64; 84] = [
    0.0007, -0.0000, -0.0328, -0.0000,  0.0000,  29.6921, -0.0387, -0.0000,  0.0000, -0.0056, -0.0002,  0.0000, -0.0000,  0.0096,
    0.0000,  0.0006,  0.0000, -29.6894, -0.0328,  0.0000,  0.0012, -0.1134,  0.1957,  0.0002, -0.0004,  0.0001, -0.3337, -0.0003,
    0.1590,  0.0002,  0.1957, -0.0002, -0.0000, -0.0056, -8.1505, -0.0001, -0.0000,  28.4766, -0.0006,  0.0024, -0.0005,  2.0589,
   -0.0003,  0.9580, -0.0012, -0.1134, -0.0387,  0.0000, -0.0000, -24.9918, -8.1505,  0.0001,  0.0163, -0.0027,  13.8054,  0.0001,
   -0.0989, -0.0004, -0.3337,  0.0003,  0.0000,  0.0096,  13.8054, -0.0001,  0.0005,  2.0589, -0.0112, -0.0041,  0.0000,  26.2046,
   -0.0001,  0.7236,  0.0004,  0.0001, -0.0002, -0.0000, -0.0163, -0.0027, -0.0006, -0.0024,  0.0000, -29.6921, -0.0112,  0.0041,
];

pub fn ex2_controller_bc() -> RealMatrix {
    RealMatrix::from_row_slice(6, 2, &EX2_BC)
}

/// Six-mode coherent controller `(A_c, [B_v B_c], C_c, [I₂ 0])` with seven
/// noise fields and one measurement field (m = 8, ℓ = 1). Entries carry
/// four decimals, so realizability holds to about 1e-2 only.
pub fn ex2_controller() -> QuadratureSystem {
    let a = RealMatrix::from_row_slice(6, 6, &EX2_AC);
    let bv = RealMatrix::from_row_slice(6, 14, &EX2_BV);
    let mut b = RealMatrix::zeros(6, 16);
    b.view_mut((0, 0), (6, 14)).copy_from(&bv);
    b.view_mut((0, 14), (6, 2)).copy_from(&ex2_controller_bc());
    let c = RealMatrix::from_row_slice(2, 6, &EX2_CC);
    let mut d = RealMatrix::zeros(2, 16);
    d[(0, 0)] = 1.0;
    d[(1, 1)] = 1.0;
    QuadratureSystem::new(a, b, c, d).expect("fixture dimensions")
}

/// Realizability tolerance matching the four-decimal controller entries.
pub const EX2_PR_TOL: f64 = 5e-2;

/// Plant `(A, B_u, C)` of the feedback loop around the controller.
#[derive(Debug, Clone)]
pub struct Ex2Plant {
    pub a: RealMatrix,
    pub b_u: RealMatrix,
    pub c: RealMatrix,
}

/// Three-mode plant in the coordinates used by the controller: the second
/// mode is written in the eigenbasis of its coupling block, so its diagonal
/// block is `diag(-2.05, 0.05)`.
pub fn ex2_plant() -> Ex2Plant {
    let mut a = RealMatrix::zeros(6, 6);
    for i in 0..2 {
        a[(i, i)] = -0.5007;
        a[(i, 2 + i)] = -0.0374;
        a[(i, 4 + i)] = -0.0410;
        a[(2 + i, 4 + i)] = -1.0954;
        a[(4 + i, 4 + i)] = -0.6;
    }
    a[(2, 2)] = -2.05;
    a[(3, 3)] = 0.05;
    let mut b_u = RealMatrix::zeros(6, 2);
    for i in 0..2 {
        b_u[(i, i)] = -0.0374;
        b_u[(2 + i, i)] = -1.0;
        b_u[(4 + i, i)] = -1.0954;
    }
    let mut c = RealMatrix::zeros(2, 6);
    c[(0, 0)] = 1.0;
    c[(1, 1)] = 1.0;
    Ex2Plant { a, b_u, c }
}

/// Five identical cavities in cascade driven by two fields:
/// `F = -γI - 2γ·(strict lower ones)`, `G = -√γ·ones(5, 2)`, `H = -Gᴴ`,
/// `K = I₂`.
pub fn ex3_system() -> AnnihilationSystem {
    let g = EX3_GAMMA;
    let f = Matrix::from_fn(5, 5, |i, j| {
        let v = if i == j {
            -g
        } else if i > j {
            -2.0 * g
        } else {
            0.0
        };
        Complex64::new(v, 0.0)
    });
    let gm = Matrix::from_element(5, 2, Complex64::new(-g.sqrt(), 0.0));
    let h = -gm.adjoint();
    let k = Matrix::identity(2, 2);
    AnnihilationSystem::new(f, gm, h, k).expect("fixture dimensions")
}
