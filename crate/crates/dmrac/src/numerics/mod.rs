//! Shared numerical primitives: dense matrices, linear algebra, fixed-step
//! integration, and seeded random streams.

pub mod integrate;
pub mod linalg;
pub mod matrix;
pub mod rng;

pub use integrate::rk4_step;
pub use linalg::{
    eigenvalues, is_hurwitz, max_real_part, solve_linear, solve_lyapunov, sym_eig_bounds,
    sym_eigenvalues, Eigenvalue, HURWITZ_MARGIN,
};
pub use matrix::Matrix;
pub use rng::RngState;
