//! Dykstra-type algorithms for the best approximation problem
//! `min 1/2 ||x - d||^2` subject to `x` in `C_1 ∩ ... ∩ C_m`.
//!
//! Every solver works on the dual blocks `y_1, ..., y_m` and recovers the
//! primal point as `d - sum_i y_i`.
//!
//! ```
//! use bestapprox::{dykstra_solve, ConvexSet, DualState, Problem, SolveOptions};
//!
//! let problem = Problem::new(
//!     vec![1.0, 1.0],
//!     vec![
//!         ConvexSet::halfspace(vec![1.0, 0.0], 0.0).unwrap(),
//!         ConvexSet::halfspace(vec![0.0, 1.0], 0.0).unwrap(),
//!     ],
//! )
//! .unwrap();
//! let sol = dykstra_solve(&problem, DualState::zeros(&problem), &SolveOptions::default()).unwrap();
//! assert_eq!(sol.state.primal, vec![0.0, 0.0]);
//! ```

pub mod apg;
pub mod diagnostics;
pub mod dykstra;
pub mod geometry;
pub mod linalg;
pub mod problem;
pub mod product_space;
pub mod qp;

pub use apg::{apg_solve, ApgError, ApgOptions, ApgSolution};
pub use dykstra::{
    dual_objective, dykstra_solve, extended_dual_objective, extended_dykstra_solve, shqp_refine, DualState,
    ExtendedOptions, HalfspaceBuffer, Solution, SolveError, SolveOptions, SolveTrace, StoppingRule,
};
pub use geometry::{ConvexOperator, ConvexSet, GeometryError, Halfspace};
pub use problem::{Metric, Problem, ProblemError};
pub use product_space::{simultaneous_dykstra_solve, tree_dykstra_solve, TreeNode, TreeTopology, Weights};
pub use qp::{project_polyhedron, QpError};

// keeps the book's snippets compiling and passing
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/projections.md")]
    mod projections {}
    #[doc = include_str!("../../../book/src/dual.md")]
    mod dual {}
    #[doc = include_str!("../../../book/src/dykstra.md")]
    mod dykstra {}
    #[doc = include_str!("../../../book/src/extended.md")]
    mod extended {}
    #[doc = include_str!("../../../book/src/product-space.md")]
    mod product_space {}
    #[doc = include_str!("../../../book/src/apg.md")]
    mod apg {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
}
