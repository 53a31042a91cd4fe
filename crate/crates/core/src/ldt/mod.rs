//! Large-deviation step: the most likely failure point, the subspace built
//! around it, and the second-order probability estimate.

mod artifact;
mod optimizer;
mod subspace;

pub use artifact::{read_artifact, write_artifact};
pub use optimizer::{solve_ldt, LdtOptions, LdtSolution};
pub use subspace::{
    build_h_ldt_matvec, build_subspace, second_order_prob, Subspace, DEFAULT_R_MAX,
};
