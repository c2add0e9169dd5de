//! The polynomial penalty sequence and its smoothness schedule.
//!
//! Instead of a barrier (which needs logarithms and divisions), constraint
//! pressure comes from the polynomial family
//!
//! ```text
//! p_k(x) = m * g(x)^k / k,          k = 1, 2, 3, ...
//! ```
//!
//! Inside the constraint set g <= 1, so p_k is uniformly bounded by m/k and
//! vanishes as k grows; outside, g > 1 and the penalty blows up with k. The
//! auxiliary cost at index k is J_k(x) = f(x) + p_k(x), and its gradient
//!
//! ```text
//! grad J_k(x) = grad f(x) + m * g(x)^(k-1) * grad g(x)
//! ```
//!
//! is again a polynomial: one auxiliary gradient step costs only additions
//! and multiplications. The price is that J_k stiffens as k grows. On the
//! constraint set its Hessian is dominated by Q + m(4k - 2)A, whose largest
//! eigenvalue L_k caps the usable step size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadforms::{spectral_bounds, Problem};

/// How the per-iteration step size gamma_k is chosen.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPolicy {
    /// gamma_k = 1 / L_k. Square-summable but not summable, which is the
    /// combination the convergence argument needs.
    #[default]
    ReciprocalSmoothness,
    /// Caller-supplied sequence, validated per term against (0, 1/L_k].
    Sequence(Vec<f64>),
}

/// A problem together with a fixed penalty scaling m >= 0.
///
/// All evaluations are plain f64 arithmetic; powers of g use binary
/// exponentiation. For points outside the constraint set and large k the
/// penalty may overflow to infinity. That is deliberate: the value is
/// reported as-is rather than clamped, and consumers flag non-finite
/// results.
#[derive(Debug, Clone)]
pub struct PenaltySchedule<'a> {
    problem: &'a Problem,
    m: f64,
}

impl<'a> PenaltySchedule<'a> {
    pub fn new(problem: &'a Problem, m: f64) -> Result<Self> {
        if !m.is_finite() || m < 0.0 {
            return Err(Error::InvalidParameter {
                what: format!("penalty scaling m must be finite and nonnegative, got {m}"),
            });
        }
        Ok(PenaltySchedule { problem, m })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    /// p_k(x) = m g(x)^k / k.
    pub fn penalty(&self, k: u32, x: &[f64]) -> f64 {
        assert!(k >= 1, "penalty index k starts at 1");
        let g = self.problem.eval_g(x);
        self.m * g.powi(k as i32) / k as f64
    }

    /// grad p_k(x) = m g(x)^(k-1) grad g(x).
    ///
    /// For k = 1 the factor g^0 is taken as 1 even at the center where
    /// g = 0, so the k = 1 penalty gradient is exactly m grad g.
    pub fn penalty_grad(&self, k: u32, x: &[f64]) -> Vec<f64> {
        assert!(k >= 1, "penalty index k starts at 1");
        let factor = if k == 1 {
            self.m
        } else {
            self.m * self.problem.eval_g(x).powi(k as i32 - 1)
        };
        self.problem
            .grad_g(x)
            .into_iter()
            .map(|t| factor * t)
            .collect()
    }

    /// J_k(x) = f(x) + p_k(x).
    pub fn auxiliary_cost(&self, k: u32, x: &[f64]) -> f64 {
        self.problem.eval_f(x) + self.penalty(k, x)
    }

    /// grad J_k(x) = grad f(x) + grad p_k(x).
    pub fn auxiliary_grad(&self, k: u32, x: &[f64]) -> Vec<f64> {
        let mut g = self.problem.grad_f(x);
        for (gi, pi) in g.iter_mut().zip(self.penalty_grad(k, x)) {
            *gi += pi;
        }
        g
    }

    /// L_k, the largest eigenvalue of Q + m(4k - 2)A. On the constraint set
    /// this dominates the Hessian of J_k, so 1/L_k is a safe step size.
    pub fn smoothness(&self, k: u32) -> Result<f64> {
        assert!(k >= 1, "penalty index k starts at 1");
        let weight = self.m * (4.0 * k as f64 - 2.0);
        let combined = self
            .problem
            .cost()
            .hessian()
            .add_scaled(weight, self.problem.constraint().shape());
        Ok(spectral_bounds(&combined)?.sigma_max)
    }

    /// The step size for iteration k under `policy`.
    pub fn step_size(&self, k: u32, policy: &StepPolicy) -> Result<f64> {
        let l = self.smoothness(k)?;
        match policy {
            StepPolicy::ReciprocalSmoothness => {
                if l <= 0.0 {
                    Err(Error::InvalidParameter {
                        what: format!("smoothness bound L_{k} is zero; no default step exists"),
                    })
                } else {
                    Ok(1.0 / l)
                }
            }
            StepPolicy::Sequence(seq) => {
                let gamma = *seq.get(k as usize - 1).ok_or(Error::ScheduleTooShort {
                    needed: k as usize,
                    got: seq.len(),
                })?;
                let limit = if l > 0.0 { 1.0 / l } else { f64::INFINITY };
                if gamma > 0.0 && gamma <= limit {
                    Ok(gamma)
                } else {
                    Err(Error::StepSizeOutOfRange { k, gamma, limit })
                }
            }
        }
    }
}
