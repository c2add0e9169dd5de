//! Finding min(a, b) without comparisons.
//!
//! The minimum of two numbers is the solution of a one-dimensional
//! instance of the general program: minimize f(x) = x over the interval
//! with endpoints a and b, encoded as the ellipsoid
//!
//! ```text
//! Q = 0,   q = 1,   A = 4/(a-b)^2,   v = (a+b)/2.
//! ```
//!
//! The exact penalty scaling for this instance is m* = |a-b|/4; the
//! solver runs with m = alpha * m* for a conservatism ratio alpha. In
//! practice a and b are unknown (that is the point), so alpha expresses
//! how much the caller overestimates |a-b|: with an upper bound
//! |a-b| <= 4m, alpha = 4m/|a-b| >= 1.
//!
//! The specialized update implemented here is the general descent step
//! with the mapping substituted in:
//!
//! ```text
//! x_{k+1} = x_k - (a-b)^2/(4(4k-2)m) - (2/(4k-2)) A^{k-1} (x_k - v)^{2k-1}
//! ```
//!
//! using gamma_k = 1/(m(4k-2)A). Both occurrences of the gap are even
//! powers, so no absolute value (hence no comparison) is ever needed, and
//! A itself enters as a pre-supplied value: producing it from encrypted
//! a, b would need an encrypted division, which is out of scope here.
//!
//! Worth stating explicitly: with alpha = 1 a single step from x_1 = v
//! lands exactly on min(a, b). The same cannot be said for the "naive"
//! estimate (a+b)/2 - alpha|a-b|/2 that plugs the upper bound directly
//! into the closed form; it undershoots below the minimum for every
//! alpha > 1, while the gradient step's estimate stays inside
//! [min(a,b), (a+b)/2) for all alpha >= 1.

use crate::circuit::{power, Arith, CircuitStats, Plain, PowerStrategy, Tape};
use crate::error::{Error, Result};
use crate::mat::Matrix;
use crate::quadforms::{Ellipsoid, Problem, QuadraticCost};

/// Compatibility region of a fixed scaling m: any pair with
/// |a - b| <= 4m satisfies m >= m* and can be solved with guarantees.
/// Pairs just outside are reported as uncovered, never clamped.
pub fn covers(m: f64, a: f64, b: f64) -> bool {
    (a - b).abs() <= 4.0 * m
}

/// A min(a, b) instance with its conservatism ratio.
///
/// alpha >= 1 is the analyzed regime. Smaller positive values are
/// accepted for exploration: the iteration often still approaches the
/// minimum, but no invariance or accuracy guarantee applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinProblem {
    a: f64,
    b: f64,
    alpha: f64,
}

/// What the mapping produces: a == b needs no optimization at all.
#[derive(Debug, Clone)]
pub enum MinMapping {
    Trivial { value: f64 },
    Program(Problem),
}

impl MinProblem {
    pub fn new(a: f64, b: f64, alpha: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter {
                what: format!("min problem endpoints must be finite, got a={a}, b={b}"),
            });
        }
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidParameter {
                what: format!("alpha must be finite and positive, got {alpha}"),
            });
        }
        Ok(MinProblem { a, b, alpha })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The exact scaling m* = |a-b|/4.
    pub fn m_star(&self) -> f64 {
        (self.a - self.b).abs() / 4.0
    }

    /// The scaling the iteration runs with: alpha * m*.
    pub fn m(&self) -> f64 {
        self.alpha * self.m_star()
    }

    pub fn is_degenerate(&self) -> bool {
        self.a == self.b
    }

    /// Ellipsoid center (a+b)/2, the canonical start point.
    pub fn center(&self) -> f64 {
        (self.a + self.b) * 0.5
    }

    /// The answer, by comparison. Plaintext reference for tests and
    /// reports; nothing on the solve path calls this.
    pub fn exact_min(&self) -> f64 {
        self.a.min(self.b)
    }

    /// The general-problem form, or [`MinMapping::Trivial`] when a == b.
    pub fn mapping(&self) -> Result<MinMapping> {
        if self.is_degenerate() {
            Ok(MinMapping::Trivial { value: self.a })
        } else {
            Ok(MinMapping::Program(self.to_problem()?))
        }
    }

    /// Strict variant of [`mapping`](Self::mapping): errors when a == b,
    /// where A = 4/(a-b)^2 has no value.
    pub fn to_problem(&self) -> Result<Problem> {
        if self.is_degenerate() {
            return Err(Error::DegenerateMinProblem);
        }
        let cost = QuadraticCost::new(Matrix::diagonal(&[0.0]), vec![1.0])?;
        let cons = Ellipsoid::new(Matrix::diagonal(&[self.shape_value()]), vec![self.center()])?;
        Problem::new(cost, cons)
    }

    fn shape_value(&self) -> f64 {
        4.0 / ((self.a - self.b) * (self.a - self.b))
    }

    /// One specialized descent step from x at stage k, using the default
    /// power strategy. Returns x unchanged when a == b.
    ///
    /// Agrees with the general solver's step on [`to_problem`](Self::to_problem)
    /// to 1e-12 relative (not bitwise: the specialized form multiplies by
    /// the precomputed reciprocal of m(4k-2)A and splits the update into
    /// two subtractions, which rounds differently in the last ulp).
    pub fn iterate(&self, x: f64, k: u32) -> f64 {
        assert!(k >= 1, "stage index k starts at 1");
        if self.is_degenerate() {
            return x;
        }
        let mut plain = Plain;
        let lifted = lift_min(&mut plain, self, false);
        min_step(
            &mut plain,
            &lifted,
            &x,
            k,
            self.m(),
            PowerStrategy::default(),
        )
    }

    /// x_1 = v through x_{steps+1}, plain arithmetic, default strategy.
    pub fn iterates(&self, steps: u32) -> Vec<f64> {
        if self.is_degenerate() {
            return vec![self.a; steps as usize + 1];
        }
        let mut plain = Plain;
        let lifted = lift_min(&mut plain, self, false);
        let mut x = lifted.start;
        let mut out = Vec::with_capacity(steps as usize + 1);
        out.push(x);
        for k in 1..=steps {
            x = min_step(&mut plain, &lifted, &x, k, self.m(), PowerStrategy::default());
            out.push(x);
        }
        out
    }

    /// The same run through the recording tape, with a, b, and A as
    /// ciphertext inputs. Values are bitwise equal to [`iterates`](Self::iterates)
    /// when called with the default strategy.
    pub fn tape_iterates(
        &self,
        steps: u32,
        strategy: PowerStrategy,
    ) -> Result<(Vec<f64>, CircuitStats)> {
        if self.is_degenerate() {
            return Err(Error::DegenerateMinProblem);
        }
        let mut tape = Tape::new();
        let lifted = lift_min(&mut tape, self, true);
        let mut x = lifted.start;
        let mut out = Vec::with_capacity(steps as usize + 1);
        out.push(tape.value(&x));
        for k in 1..=steps {
            x = min_step(&mut tape, &lifted, &x, k, self.m(), strategy);
            out.push(tape.value(&x));
        }
        Ok((out, tape.stats()))
    }

    /// Closed-form distance |x* - x_k*| of the stage-k auxiliary
    /// minimizer from the true minimum:
    ///
    /// ```text
    /// (|a-b|/2) * (1 - (1/alpha)^(1/(2k-1)))
    /// ```
    ///
    /// Zero for alpha = 1 at every k; decreasing in k and vanishing as
    /// k grows for alpha > 1.
    pub fn auxiliary_error(&self, k: u32) -> f64 {
        assert!(k >= 1, "stage index k starts at 1");
        let half_gap = (self.a - self.b).abs() / 2.0;
        half_gap * (1.0 - (1.0 / self.alpha).powf(1.0 / (2.0 * f64::from(k) - 1.0)))
    }

    /// Smallest stage k whose auxiliary minimizer is within delta of the
    /// true minimum, from the bound
    ///
    /// ```text
    /// k >= 1/2 - ln(alpha) / (2 ln(1 - 2 delta/|a-b|))
    /// ```
    ///
    /// tightened against the closed form so that error(k) <= delta and,
    /// for k > 1, error(k-1) > delta. Requires 0 < delta < |a-b|/2.
    pub fn iterations_for_precision(&self, delta: f64) -> Result<u32> {
        let gap = (self.a - self.b).abs();
        if !(delta > 0.0 && delta < gap / 2.0) {
            return Err(Error::InvalidParameter {
                what: format!(
                    "precision target must lie in (0, |a-b|/2) = (0, {}), got {delta}",
                    gap / 2.0
                ),
            });
        }
        if self.alpha <= 1.0 {
            return Ok(1);
        }
        let bound = 0.5 - self.alpha.ln() / (2.0 * (1.0 - 2.0 * delta / gap).ln());
        let mut k = bound.ceil().max(1.0) as u32;
        while self.auxiliary_error(k) > delta {
            k += 1;
        }
        while k > 1 && self.auxiliary_error(k - 1) <= delta {
            k -= 1;
        }
        Ok(k)
    }

    /// The k = 1 step from x_1 = v in closed form:
    /// (a+b)/2 - |a-b|/(2 alpha), always in [min(a,b), (a+b)/2) for
    /// alpha >= 1. Equals min(a, b) exactly at alpha = 1.
    pub fn single_step_estimate(&self) -> f64 {
        (self.a + self.b) / 2.0 - (self.a - self.b).abs() / (2.0 * self.alpha)
    }

    /// What plugging the upper bound alpha|a-b| straight into the exact
    /// closed form would give: (a+b)/2 - alpha|a-b|/2. Also exact at
    /// alpha = 1, but falls below min(a, b) for every alpha > 1 and is
    /// unbounded below in alpha. The contrast with
    /// [`single_step_estimate`](Self::single_step_estimate) is the reason
    /// the gradient step is the right one-shot estimator.
    pub fn naive_bound_estimate(&self) -> f64 {
        (self.a + self.b) / 2.0 - self.alpha * (self.a - self.b).abs() / 2.0
    }
}

/// Inputs of the specialized circuit. v and (a-b)^2 are derived in-tape
/// from a and b; A arrives as its own input because an encrypted division
/// cannot be expressed here.
struct MinLifted<V> {
    center: V,
    gap_sq: V,
    shape: V,
    start: V,
}

fn lift_min<A: Arith>(ar: &mut A, mp: &MinProblem, secret: bool) -> MinLifted<A::Value> {
    let a = ar.input("a", mp.a, secret);
    let b = ar.input("b", mp.b, secret);
    let shape = ar.input("A", mp.shape_value(), secret);
    let half = ar.constant(0.5);
    let sum = ar.add(&a, &b);
    let center = ar.mul(&sum, &half);
    let gap = ar.sub(&a, &b);
    let gap_sq = ar.mul(&gap, &gap);
    let start = center.clone();
    MinLifted {
        center,
        gap_sq,
        shape,
        start,
    }
}

/// One specialized update in add/mul form. Evaluation order is fixed: the
/// constant-coefficient term (a-b)^2/(4(4k-2)m) first, then the penalty
/// term as (A (x-v)^2)^{k-1} (x - v) for k >= 2, then two subtractions.
///
/// The penalty power must be taken of the combined scalar A (x-v)^2,
/// which stays in [0, 1] on the interval, and not of (x-v) and A
/// separately: for |a-b| > 2 the lone power (x-v)^{2k-1} overflows f64
/// once (2k-1) log2|x-v| passes the exponent range, around stage 512
/// on a width-4 interval, while A^{k-1} underflows, and the product
/// NaNs out even though their mathematical product is tiny.
fn min_step<A: Arith>(
    ar: &mut A,
    lifted: &MinLifted<A::Value>,
    x: &A::Value,
    k: u32,
    m: f64,
    strategy: PowerStrategy,
) -> A::Value {
    let kf = f64::from(k);
    let c1 = ar.constant(1.0 / (4.0 * (4.0 * kf - 2.0) * m));
    let t_gap = ar.mul(&lifted.gap_sq, &c1);
    let d = ar.sub(x, &lifted.center);
    let t_pen = if k >= 2 {
        let dd = ar.mul(&d, &d);
        let g_scaled = ar.mul(&lifted.shape, &dd);
        let gp = power(ar, &g_scaled, k - 1, strategy);
        ar.mul(&gp, &d)
    } else {
        d
    };
    let c2 = ar.constant(2.0 / (4.0 * kf - 2.0));
    let pen = ar.mul(&t_pen, &c2);
    let partial = ar.sub(x, &t_gap);
    ar.sub(&partial, &pen)
}
