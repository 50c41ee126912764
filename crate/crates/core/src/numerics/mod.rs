//! Dense symmetric eigensolvers, Lanczos iteration, complex 2×2 algebra and
//! a seeded random stream. Everything else in the crate is built on these.

mod eigen;
mod lanczos;
mod mat2;
mod matrix;
mod rng;

pub use eigen::{eig_sym, eig_tridiag, eigvals_sym, tridiag_lowest, EigenDecomposition};
pub use lanczos::{lanczos_topk, LanczosOptions};
pub use mat2::{mat2_mul, Complex2x2};
pub use matrix::{Matrix, SymMatrix};
pub use rng::SeededRng;

pub use num_complex::Complex64;
