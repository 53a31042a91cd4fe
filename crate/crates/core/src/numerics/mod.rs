//! Seeded sampling plus the dense and matrix-free linear algebra used by the
//! rest of the crate.

mod eigen;
mod fd;
mod linalg;
mod rng;

pub use eigen::{sym_eig_dense, sym_eig_topk, tridiagonal_eig, SymEig, DEFAULT_EIG_TOL};
pub use fd::{default_fd_step, fd_hessian_vector};
pub use linalg::{cholesky, orthonormalize, Cholesky, Mat, SpdMatrix};
pub use rng::RngStream;
