//! Ellipsoid-constrained convex quadratic minimization using only
//! additions and multiplications.
//!
//! The solver minimizes f(x) = 1/2 x'Qx + q'x over an ellipsoid
//! { x : (x-v)'A(x-v) <= 1 } by taking one fixed-step gradient descent
//! step per stage on a sequence of penalized costs
//!
//! ```text
//! J_k(x) = f(x) + m g(x)^k / k,    g(x) = (x-v)'A(x-v)
//! ```
//!
//! Raising the penalty exponent sharpens g^k/k toward the indicator of
//! the constraint set while staying polynomial, so every iterate is
//! produced by additions and multiplications alone: no comparisons,
//! divisions, or square roots anywhere on the solve path. That shape is
//! what makes the method run under arithmetic-only execution models such
//! as leveled homomorphic encryption, and the [`circuit`] module can
//! replay any solve on a recording tape to certify the claim and report
//! the multiplicative depth an encrypted evaluation would need.
//!
//! The crate is organized as a pipeline:
//!
//! - [`quadforms`] holds the problem data (cost, ellipsoid, bundle).
//! - [`penalty`] evaluates J_k, its gradient, smoothness, and step sizes.
//! - [`scaling`] estimates how large the penalty weight m must be for
//!   the iterates to stay inside the constraint set.
//! - [`solver`] runs the descent and records a checkable trace.
//! - [`circuit`] re-runs solves on an arithmetic tape, plans depth, and
//!   emulates fixed-point arithmetic.
//! - [`minab`] maps min(a, b) to a one-dimensional instance with closed
//!   form error bounds.
//! - [`oracle`] provides independent high-accuracy references for tests.
//!
//! ```
//! use polypen::{Ellipsoid, Matrix, Problem, QuadraticCost, SolverConfig};
//!
//! // Minimize 0.25 x^2 - x over [-1, 1]; the answer is the endpoint 1.
//! let cost = QuadraticCost::new(Matrix::diagonal(&[0.5]), vec![-1.0])?;
//! let set = Ellipsoid::new(Matrix::diagonal(&[1.0]), vec![0.0])?;
//! let problem = Problem::new(cost, set)?;
//!
//! let trace = polypen::solve(&problem, &SolverConfig::new(50, 1.0))?;
//! let x = trace.final_x()[0];
//! assert!(x > 0.9 && x <= 1.0);
//! # Ok::<(), polypen::Error>(())
//! ```

pub mod circuit;
pub mod error;
pub mod mat;
pub mod minab;
pub mod oracle;
pub mod penalty;
pub mod quadforms;
pub mod scaling;
pub mod solver;

pub use circuit::{
    fixed_point_solve, plan_depth, tape_solve, Arith, CircuitStats, DepthPlan, Plain,
    PowerStrategy, SecretMarks, Tape,
};
pub use error::{Error, Result};
pub use mat::Matrix;
pub use minab::MinProblem;
pub use penalty::{PenaltySchedule, StepPolicy};
pub use quadforms::{Ellipsoid, Problem, QuadraticCost};
pub use scaling::{estimate_m_inv, estimate_m_min, ScalingReport};
pub use solver::{check_descent, check_invariance, default_start, solve, SolveTrace, SolverConfig};
