//! Numerics for rough paths with jumps.
//!
//! The crate covers the step-2 free nilpotent group and its Lie algebra
//! ([`algebra`]), càdlàg paths with path-function interpolation of jumps
//! ([`cadlag`]), level-2 lifts including Marcus lifts, Young pairing and
//! translation ([`lift`]), p-variation and Skorokhod-type distances
//! ([`metrics`]), canonical RDE and Marcus SDE solvers ([`rde`]),
//! simulation of finite-activity semimartingales ([`stochastic`]) and a
//! reproducible Monte Carlo experiment runner ([`harness`]).
//!
//! ```
//! use cadlag_rough::prelude::*;
//!
//! // A unit jump at t = 1/2, lifted and solved along V(y) = y.
//! let x = CadlagPath::step(vec![0.0, 0.5], vec![vec![0.0], vec![1.0]], 1.0).unwrap();
//! let lift = marcus_lift(&x);
//! let v = LinearFields::new(1, vec![vec![1.0]]).unwrap();
//! let opts = SolverOptions { substeps: 16, ..SolverOptions::default() };
//! let sol = solve_canonical_rde(&lift, &PathFunction::log_linear(), &v, &[1.0], &opts).unwrap();
//! assert!((sol.final_state()[0] - 1f64.exp()).abs() < 1e-9);
//! ```

// Negated comparisons reject NaN parameters.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod cadlag;
pub mod harness;
pub mod io;
pub mod lift;
pub mod metrics;
pub mod rde;
pub mod stochastic;

pub mod prelude {
    pub use crate::algebra::{exp2, hom_dist, log2, G2Element, Lie2Element, Tensor2};
    pub use crate::cadlag::{
        apply_time_change, interpolate, CadlagPath, Direction, InterpOptions, Interpolation,
        PathFunction, Point, TimeChange,
    };
    pub use crate::lift::{
        lift_piecewise_linear, marcus_lift, translate, young_pair, RoughPath2,
    };
    pub use crate::metrics::{
        alpha_estimate, osc_count_bound, pvar, rho_pvar, sigma_estimate, MetricReport, Norm,
    };
    pub use crate::rde::{
        flow_exp, flow_map, solve_canonical_rde, solve_marcus_sde, stack_drivers, LinearFields,
        RdeSolution, SolverOptions, VectorFields,
    };
    pub use crate::stochastic::{simulate, SemimartingaleModel};
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/algebra.md")]
    mod algebra {}
    #[doc = include_str!("../../../book/src/paths.md")]
    mod paths {}
    #[doc = include_str!("../../../book/src/lifts.md")]
    mod lifts {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
