//! Arithmetic-circuit execution: proof by construction that the solver
//! needs only additions and multiplications.
//!
//! The descent kernel in [`crate::solver`] is generic over the [`Arith`]
//! trait, whose vocabulary is constants, inputs, addition, and
//! multiplication. Subtraction is sugar: a - b is evaluated as
//! a + (-1)*b, so negation is a multiplication by a public constant.
//! Nothing else exists. Division, comparison, and branching on values are
//! unrepresentable, which is the whole point: any program that type-checks
//! against `Arith` is a polynomial circuit and can in principle run under
//! a homomorphic encryption scheme.
//!
//! Three executors implement the trait:
//!
//! * [`Plain`] computes in f64 and is what the ordinary solver uses.
//! * [`Tape`] computes the same f64 values while recording every operation
//!   as a node, classifying operands as ciphertext or public, counting
//!   additions and both kinds of multiplication, and tracking
//!   multiplicative depth. Because the kernel is one piece of generic
//!   code, the tape's values are bitwise identical to the plain run.
//! * [`FixedPoint`] computes in scaled i128 arithmetic, modelling the
//!   fixed-point encodings HE schemes actually operate on.
//!
//! Depth accounting follows the standard leveled-HE model: a
//! ciphertext*ciphertext product sits one level above its deepest operand,
//! while additions and ciphertext*public products stay level-free. Which
//! problem inputs count as ciphertexts is declared up front via
//! [`SecretMarks`]; everything derived from a ciphertext is a ciphertext.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadforms::Problem;
use crate::solver::{self, SolverConfig, SolveTrace};

/// The polynomial-arithmetic vocabulary. Implementors supply a value
/// representation and the four primitive operations; everything the solver
/// does is expressed through this trait.
pub trait Arith {
    type Value: Clone;

    /// A public scalar known at circuit-construction time (schedule
    /// constants, plaintext problem data).
    fn constant(&mut self, c: f64) -> Self::Value;

    /// A named problem input. `secret` marks it as a ciphertext; the
    /// default implementation ignores the distinction and treats inputs
    /// like constants, which is correct for plain evaluation.
    fn input(&mut self, name: &str, value: f64, secret: bool) -> Self::Value {
        let _ = (name, secret);
        self.constant(value)
    }

    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Self::Value;

    fn mul(&mut self, a: &Self::Value, b: &Self::Value) -> Self::Value;

    /// a - b as a + (-1)*b. Implementors must not override this with a
    /// native subtraction that rounds differently; the default is bitwise
    /// equal to f64 subtraction and keeps the operation set closed.
    fn sub(&mut self, a: &Self::Value, b: &Self::Value) -> Self::Value {
        let minus_one = self.constant(-1.0);
        let nb = self.mul(b, &minus_one);
        self.add(a, &nb)
    }

    /// Reads the numeric value back out (decoding if necessary).
    fn value(&self, v: &Self::Value) -> f64;
}

/// Plain f64 evaluation; the reference semantics.
#[derive(Debug, Default)]
pub struct Plain;

impl Arith for Plain {
    type Value = f64;

    fn constant(&mut self, c: f64) -> f64 {
        c
    }

    fn add(&mut self, a: &f64, b: &f64) -> f64 {
        a + b
    }

    fn mul(&mut self, a: &f64, b: &f64) -> f64 {
        a * b
    }

    fn value(&self, v: &f64) -> f64 {
        *v
    }
}

/// How a tape node came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    /// Plaintext data baked into the circuit.
    PublicConstant,
    /// An input supplied as a ciphertext.
    CiphertextInput,
    /// Result of an add or mul.
    Derived,
}

/// Operation recorded at a node; operands are indices of earlier nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Constant(f64),
    Input { name: String },
    Add(usize, usize),
    Mul(usize, usize),
}

/// One recorded operation with its classification.
#[derive(Debug, Clone, PartialEq)]
pub struct TapeNode {
    pub kind: NodeKind,
    pub provenance: Provenance,
    /// True when the value is ciphertext-derived (depends on some secret
    /// input). Public nodes never gain levels.
    pub secret: bool,
    /// Multiplicative depth from the inputs.
    pub level: u32,
    /// Plaintext shadow of the node's value.
    pub value: f64,
}

/// Operation counts and depth for one recorded circuit.
///
/// `adds` and `ct_pt_muls` count operations with at least one ciphertext
/// operand; purely public arithmetic is free (it can be folded before
/// encryption) and is not counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CircuitStats {
    pub adds: u64,
    /// ciphertext * ciphertext products; each costs one level.
    pub ct_ct_muls: u64,
    /// ciphertext * public products; level-free.
    pub ct_pt_muls: u64,
    pub max_level: u32,
}

/// Handle to a tape node. Only meaningful for the tape that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TapeValue(usize);

impl TapeValue {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Recording executor. Evaluates in f64 while building the operation DAG
/// and the running [`CircuitStats`].
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<TapeNode>,
    stats: CircuitStats,
    level_budget: Option<u32>,
    budget_breach: Option<usize>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets a level budget. Exceeding it is reported, never fatal: the
    /// first offending node is remembered and a warning is logged.
    pub fn with_level_budget(budget: u32) -> Self {
        Tape {
            level_budget: Some(budget),
            ..Self::default()
        }
    }

    pub fn stats(&self) -> CircuitStats {
        self.stats
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, v: TapeValue) -> &TapeNode {
        &self.nodes[v.0]
    }

    pub fn nodes(&self) -> &[TapeNode] {
        &self.nodes
    }

    pub fn level(&self, v: TapeValue) -> u32 {
        self.nodes[v.0].level
    }

    pub fn is_secret(&self, v: TapeValue) -> bool {
        self.nodes[v.0].secret
    }

    /// First node whose level exceeded the configured budget, if any.
    pub fn budget_breach(&self) -> Option<usize> {
        self.budget_breach
    }

    fn push(&mut self, node: TapeNode) -> TapeValue {
        if node.level > self.stats.max_level {
            self.stats.max_level = node.level;
        }
        if let Some(budget) = self.level_budget {
            if node.level > budget && self.budget_breach.is_none() {
                self.budget_breach = Some(self.nodes.len());
                log::warn!(
                    "circuit level {} exceeds budget {} at node {}",
                    node.level,
                    budget,
                    self.nodes.len()
                );
            }
        }
        self.nodes.push(node);
        TapeValue(self.nodes.len() - 1)
    }
}

impl Arith for Tape {
    type Value = TapeValue;

    fn constant(&mut self, c: f64) -> TapeValue {
        self.push(TapeNode {
            kind: NodeKind::Constant(c),
            provenance: Provenance::PublicConstant,
            secret: false,
            level: 0,
            value: c,
        })
    }

    fn input(&mut self, name: &str, value: f64, secret: bool) -> TapeValue {
        self.push(TapeNode {
            kind: NodeKind::Input {
                name: name.to_string(),
            },
            provenance: if secret {
                Provenance::CiphertextInput
            } else {
                Provenance::PublicConstant
            },
            secret,
            level: 0,
            value,
        })
    }

    fn add(&mut self, a: &TapeValue, b: &TapeValue) -> TapeValue {
        let (na, nb) = (&self.nodes[a.0], &self.nodes[b.0]);
        let secret = na.secret || nb.secret;
        let level = na.level.max(nb.level);
        let value = na.value + nb.value;
        if secret {
            self.stats.adds += 1;
        }
        self.push(TapeNode {
            kind: NodeKind::Add(a.0, b.0),
            provenance: Provenance::Derived,
            secret,
            level,
            value,
        })
    }

    fn mul(&mut self, a: &TapeValue, b: &TapeValue) -> TapeValue {
        let (na, nb) = (&self.nodes[a.0], &self.nodes[b.0]);
        let secret = na.secret || nb.secret;
        let both = na.secret && nb.secret;
        let level = na.level.max(nb.level) + u32::from(both);
        let value = na.value * nb.value;
        if both {
            self.stats.ct_ct_muls += 1;
        } else if secret {
            self.stats.ct_pt_muls += 1;
        }
        self.push(TapeNode {
            kind: NodeKind::Mul(a.0, b.0),
            provenance: Provenance::Derived,
            secret,
            level,
            value,
        })
    }

    fn value(&self, v: &TapeValue) -> f64 {
        self.nodes[v.0].value
    }
}

/// Which problem inputs are ciphertexts. Everything not marked is baked
/// into the circuit as public data; schedule constants (m, the step sizes,
/// iteration coefficients) are always public.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SecretMarks {
    pub hessian: bool,
    pub linear: bool,
    pub shape: bool,
    pub center: bool,
    pub start: bool,
}

impl SecretMarks {
    /// Nothing encrypted; the tape then counts no operations at all.
    pub fn all_public() -> Self {
        Self::default()
    }

    /// The iterate and the constraint center are ciphertexts; the cost and
    /// shape data are public. This is the model the depth planner uses.
    pub fn encrypted_state() -> Self {
        SecretMarks {
            center: true,
            start: true,
            ..Self::default()
        }
    }

    /// The min-of-two setting: a and b are secret, so the shape scalar, the
    /// center, and the start (which is the center) are all ciphertexts.
    pub fn minab() -> Self {
        SecretMarks {
            shape: true,
            center: true,
            start: true,
            ..Self::default()
        }
    }
}

/// How x^e is evaluated inside the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerStrategy {
    /// Chain of e-1 multiplications; depth e-1.
    Sequential,
    /// Square chain plus one combining product per extra set bit of e;
    /// depth exactly ceil(log2 e). The default, since levels are the
    /// scarce resource.
    #[default]
    RepeatedSquaring,
}

/// x^e for e >= 1 under the chosen strategy.
///
/// Repeated squaring builds s_j = x^(2^j) up to the top set bit of e, then
/// multiplies the squares matching e's set bits together in ascending
/// order. The ascending order is what achieves depth ceil(log2 e): the
/// partial product after absorbing bit j sits at level j+1, one above the
/// deepest square used so far.
pub fn power<A: Arith>(ar: &mut A, base: &A::Value, exp: u32, strategy: PowerStrategy) -> A::Value {
    assert!(exp >= 1, "power requires a positive exponent");
    if exp == 1 {
        return base.clone();
    }
    match strategy {
        PowerStrategy::Sequential => {
            let mut acc = base.clone();
            for _ in 1..exp {
                acc = ar.mul(&acc, base);
            }
            acc
        }
        PowerStrategy::RepeatedSquaring => {
            let top = 31 - exp.leading_zeros();
            let mut squares = Vec::with_capacity(top as usize + 1);
            squares.push(base.clone());
            for j in 1..=top as usize {
                let sq = ar.mul(&squares[j - 1], &squares[j - 1]);
                squares.push(sq);
            }
            let mut acc: Option<A::Value> = None;
            for (j, sq) in squares.iter().enumerate() {
                if exp & (1 << j) != 0 {
                    acc = Some(match acc {
                        None => sq.clone(),
                        Some(a) => ar.mul(&a, sq),
                    });
                }
            }
            acc.expect("exp >= 1 has a set bit")
        }
    }
}

/// Depth cost of [`power`] with exponent `exp`.
pub fn power_depth(exp: u32, strategy: PowerStrategy) -> u32 {
    assert!(exp >= 1, "power requires a positive exponent");
    match strategy {
        PowerStrategy::Sequential => exp - 1,
        PowerStrategy::RepeatedSquaring => {
            if exp == 1 {
                0
            } else {
                // ceil(log2 exp)
                32 - (exp - 1).leading_zeros()
            }
        }
    }
}

/// One row of a depth plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DepthPlanRow {
    pub k: u32,
    pub per_step_level: u32,
    pub cumulative_level: u32,
}

/// Closed-form level accounting for the descent update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthPlan {
    pub dim: usize,
    pub iterations: u32,
    pub strategy: PowerStrategy,
    pub rows: Vec<DepthPlanRow>,
    pub total: u32,
}

/// Predicts the multiplicative depth of an N-step solve without running
/// it, for the [`SecretMarks::encrypted_state`] input model (iterate and
/// center encrypted, cost and shape public).
///
/// Step k = 1 has a linear penalty gradient and consumes no levels. Step
/// k >= 2 forms g(x) (one ciphertext product), raises it to the k-1 power,
/// and multiplies the result into the constraint gradient (one more), so
/// it costs 2 + power_depth(k-1). The count is independent of the
/// dimension: coordinates are processed in parallel and additions are
/// level-free. `dim` is validated and reported for the record.
///
/// The table is exact, not a bound: [`tape_solve`] on a matching
/// configuration measures the same max_level.
pub fn plan_depth(dim: usize, iterations: u32, strategy: PowerStrategy) -> Result<DepthPlan> {
    if dim == 0 {
        return Err(Error::InvalidParameter {
            what: "depth planning needs a positive dimension".to_string(),
        });
    }
    if iterations == 0 {
        return Err(Error::InvalidParameter {
            what: "depth planning needs at least one iteration".to_string(),
        });
    }
    let mut rows = Vec::with_capacity(iterations as usize);
    let mut cumulative = 0;
    for k in 1..=iterations {
        let per_step = if k == 1 {
            0
        } else {
            2 + power_depth(k - 1, strategy)
        };
        cumulative += per_step;
        rows.push(DepthPlanRow {
            k,
            per_step_level: per_step,
            cumulative_level: cumulative,
        });
    }
    Ok(DepthPlan {
        dim,
        iterations,
        strategy,
        rows,
        total: cumulative,
    })
}

/// Runs the solver through a recording tape. The returned trace is
/// numerically identical to [`crate::solver::solve`] on the same inputs
/// (same generic kernel, same operation order, bitwise-equal f64 values)
/// and carries the circuit statistics.
pub fn tape_solve(
    p: &Problem,
    cfg: &SolverConfig,
    marks: SecretMarks,
) -> Result<(SolveTrace, CircuitStats)> {
    let (trace, tape) = tape_solve_recorded(p, cfg, marks)?;
    Ok((trace, tape.stats()))
}

/// Like [`tape_solve`] but hands back the full tape for DAG inspection.
pub fn tape_solve_recorded(
    p: &Problem,
    cfg: &SolverConfig,
    marks: SecretMarks,
) -> Result<(SolveTrace, Tape)> {
    let mut tape = Tape::new();
    let run = solver::run_kernel(&mut tape, p, cfg, marks)?;
    let mut trace = solver::build_trace(p, cfg, run)?;
    trace.circuit = Some(tape.stats());
    Ok((trace, tape))
}

/// Deviation summary attached to fixed-point traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub fraction_bits: u32,
    /// max over all recorded iterates and coordinates of
    /// |fixed-point value - float value|.
    pub max_deviation: f64,
}

/// Scaled-integer executor: values are round(x * 2^frac_bits) in i128.
///
/// Rounding is half away from zero on encode and after every product.
/// Overflow never panics; it sets a sticky flag (and saturates the value)
/// that [`fixed_point_solve`] checks after every step so it can name the
/// offending iteration.
#[derive(Debug)]
pub struct FixedPoint {
    frac_bits: u32,
    overflow: bool,
}

impl FixedPoint {
    pub fn new(frac_bits: u32) -> Result<Self> {
        if !(8..=52).contains(&frac_bits) {
            return Err(Error::InvalidParameter {
                what: format!("fraction bits must lie in [8, 52], got {frac_bits}"),
            });
        }
        Ok(FixedPoint {
            frac_bits,
            overflow: false,
        })
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn overflowed(&self) -> bool {
        self.overflow
    }

    fn saturate(&mut self, negative: bool) -> i128 {
        self.overflow = true;
        if negative {
            i128::MIN
        } else {
            i128::MAX
        }
    }

    fn encode(&mut self, x: f64) -> i128 {
        let scaled = x * (self.frac_bits as f64).exp2();
        if !scaled.is_finite() {
            return self.saturate(scaled.is_sign_negative());
        }
        let rounded = scaled.round();
        if rounded >= 2f64.powi(127) || rounded < -(2f64.powi(127)) {
            return self.saturate(rounded < 0.0);
        }
        rounded as i128
    }

    /// (p + half) >> frac_bits with rounding half away from zero.
    fn rescale(&mut self, p: i128) -> i128 {
        let half = 1i128 << (self.frac_bits - 1);
        if p >= 0 {
            match p.checked_add(half) {
                Some(s) => s >> self.frac_bits,
                None => self.saturate(false),
            }
        } else {
            match p.checked_neg().and_then(|n| n.checked_add(half)) {
                Some(s) => -(s >> self.frac_bits),
                None => self.saturate(true),
            }
        }
    }
}

impl Arith for FixedPoint {
    type Value = i128;

    fn constant(&mut self, c: f64) -> i128 {
        self.encode(c)
    }

    fn add(&mut self, a: &i128, b: &i128) -> i128 {
        match a.checked_add(*b) {
            Some(s) => s,
            None => self.saturate(*a < 0),
        }
    }

    fn mul(&mut self, a: &i128, b: &i128) -> i128 {
        match a.checked_mul(*b) {
            Some(p) => self.rescale(p),
            None => self.saturate((*a < 0) != (*b < 0)),
        }
    }

    fn value(&self, v: &i128) -> f64 {
        (*v as f64) / (self.frac_bits as f64).exp2()
    }
}

/// Runs the descent in software fixed-point arithmetic and reports the
/// worst deviation from the float run over all recorded iterates. The
/// trace's records are computed from the decoded fixed-point iterates.
pub fn fixed_point_solve(p: &Problem, cfg: &SolverConfig, frac_bits: u32) -> Result<SolveTrace> {
    let float_run = solver::run_kernel(&mut Plain, p, cfg, SecretMarks::all_public())?;
    let mut fx = FixedPoint::new(frac_bits)?;
    let fixed_run = solver::run_kernel_checked(&mut fx, p, cfg, SecretMarks::all_public(), |ar, k| {
        if ar.overflowed() {
            Err(Error::FixedPointOverflow { step: k })
        } else {
            Ok(())
        }
    })?;

    let mut max_deviation: f64 = 0.0;
    for (xf, xq) in float_run.iterates.iter().zip(&fixed_run.iterates) {
        for (a, b) in xf.iter().zip(xq) {
            max_deviation = max_deviation.max((a - b).abs());
        }
    }

    let mut trace = solver::build_trace(p, cfg, fixed_run)?;
    trace.fixed_point = Some(FixedPointReport {
        fraction_bits: frac_bits,
        max_deviation,
    });
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::Matrix;
    use crate::quadforms::{Ellipsoid, QuadraticCost};

    #[test]
    fn plain_matches_native_arithmetic() {
        let mut ar = Plain;
        let a = ar.constant(3.5);
        let b = ar.constant(-1.25);
        assert_eq!(ar.add(&a, &b), 2.25);
        assert_eq!(ar.mul(&a, &b), -4.375);
        assert_eq!(ar.sub(&a, &b), 4.75);
    }

    #[test]
    fn sub_desugars_to_add_and_negate() {
        let mut tape = Tape::new();
        let a = tape.input("a", 5.0, true);
        let b = tape.input("b", 2.0, true);
        let d = tape.sub(&a, &b);
        assert_eq!(tape.value(&d), 3.0);
        // One ct*pt product (the negation) and one add; no level spent.
        let stats = tape.stats();
        assert_eq!(stats.ct_pt_muls, 1);
        assert_eq!(stats.adds, 1);
        assert_eq!(stats.ct_ct_muls, 0);
        assert_eq!(stats.max_level, 0);
        assert_eq!(tape.level(d), 0);
    }

    #[test]
    fn level_law() {
        let mut tape = Tape::new();
        let x = tape.input("x", 2.0, true);
        let y = tape.input("y", 3.0, true);
        let c = tape.constant(4.0);

        let xc = tape.mul(&x, &c);
        assert_eq!(tape.level(xc), 0);
        assert!(tape.is_secret(xc));

        let xy = tape.mul(&x, &y);
        assert_eq!(tape.level(xy), 1);

        let s = tape.add(&xy, &xc);
        assert_eq!(tape.level(s), 1);

        let deep = tape.mul(&s, &xy);
        assert_eq!(tape.level(deep), 2);

        let cc = tape.mul(&c, &c);
        assert_eq!(tape.level(cc), 0);
        assert!(!tape.is_secret(cc));

        let stats = tape.stats();
        assert_eq!(stats.ct_ct_muls, 2);
        assert_eq!(stats.ct_pt_muls, 1);
        assert_eq!(stats.adds, 1);
        assert_eq!(stats.max_level, 2);
    }

    #[test]
    fn public_arithmetic_is_free() {
        let mut tape = Tape::new();
        let a = tape.constant(2.0);
        let b = tape.input("b", 7.0, false);
        let s = tape.add(&a, &b);
        let p = tape.mul(&s, &a);
        assert_eq!(tape.value(&p), 18.0);
        assert_eq!(tape.stats(), CircuitStats::default());
    }

    #[test]
    fn power_values_and_depths() {
        for exp in 1..=12u32 {
            for strategy in [PowerStrategy::Sequential, PowerStrategy::RepeatedSquaring] {
                let mut plain = Plain;
                let base = plain.constant(1.37);
                let got = power(&mut plain, &base, exp, strategy);
                let want = 1.37f64.powi(exp as i32);
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs(),
                    "value mismatch at exp {exp}"
                );

                let mut tape = Tape::new();
                let b = tape.input("x", 1.37, true);
                let r = power(&mut tape, &b, exp, strategy);
                assert_eq!(
                    tape.level(r),
                    power_depth(exp, strategy),
                    "depth mismatch at exp {exp} under {strategy:?}"
                );
            }
        }
        // Spot-check the formulas themselves.
        assert_eq!(power_depth(1, PowerStrategy::RepeatedSquaring), 0);
        assert_eq!(power_depth(2, PowerStrategy::RepeatedSquaring), 1);
        assert_eq!(power_depth(3, PowerStrategy::RepeatedSquaring), 2);
        assert_eq!(power_depth(4, PowerStrategy::RepeatedSquaring), 2);
        assert_eq!(power_depth(7, PowerStrategy::RepeatedSquaring), 3);
        assert_eq!(power_depth(8, PowerStrategy::RepeatedSquaring), 3);
        assert_eq!(power_depth(9, PowerStrategy::RepeatedSquaring), 4);
        assert_eq!(power_depth(7, PowerStrategy::Sequential), 6);
    }

    #[test]
    fn repeated_squaring_spends_fewer_products_than_the_chain() {
        let mut seq = Tape::new();
        let b = seq.input("x", 1.1, true);
        power(&mut seq, &b, 14, PowerStrategy::Sequential);
        let mut rs = Tape::new();
        let b = rs.input("x", 1.1, true);
        power(&mut rs, &b, 14, PowerStrategy::RepeatedSquaring);
        assert_eq!(seq.stats().ct_ct_muls, 13);
        // squares s1..s3 plus two combining products for bits {1,2,3}.
        assert_eq!(rs.stats().ct_ct_muls, 5);
        assert!(rs.stats().max_level < seq.stats().max_level);
    }

    #[test]
    fn depth_plan_closed_form() {
        let plan = plan_depth(1, 4, PowerStrategy::RepeatedSquaring).unwrap();
        let per_step: Vec<u32> = plan.rows.iter().map(|r| r.per_step_level).collect();
        assert_eq!(per_step, vec![0, 2, 3, 4]);
        assert_eq!(plan.total, 9);
        assert_eq!(plan.rows.last().unwrap().cumulative_level, 9);

        // Strategies agree up to N = 4 (exponent <= 3) on totals.
        let seq = plan_depth(1, 4, PowerStrategy::Sequential).unwrap();
        assert_eq!(seq.total, 9);

        assert_eq!(plan_depth(2, 1, PowerStrategy::Sequential).unwrap().total, 0);
        assert_eq!(
            plan_depth(2, 2, PowerStrategy::RepeatedSquaring).unwrap().total,
            plan_depth(2, 2, PowerStrategy::Sequential).unwrap().total,
        );
        assert_eq!(
            plan_depth(3, 8, PowerStrategy::RepeatedSquaring).unwrap().total,
            28
        );
        assert_eq!(plan_depth(3, 8, PowerStrategy::Sequential).unwrap().total, 35);

        assert!(plan_depth(0, 4, PowerStrategy::Sequential).is_err());
        assert!(plan_depth(1, 0, PowerStrategy::Sequential).is_err());
    }

    #[test]
    fn level_budget_reports_without_failing() {
        let mut tape = Tape::with_level_budget(1);
        let x = tape.input("x", 2.0, true);
        let x2 = tape.mul(&x, &x);
        assert!(tape.budget_breach().is_none());
        let x4 = tape.mul(&x2, &x2);
        assert_eq!(tape.budget_breach(), Some(x4.index()));
        // Still records and still computes.
        let x8 = tape.mul(&x4, &x4);
        assert_eq!(tape.value(&x8), 256.0);
        assert_eq!(tape.budget_breach(), Some(x4.index()));
    }

    #[test]
    fn fixed_point_rounding_and_overflow() {
        let mut fx = FixedPoint::new(8).unwrap();
        // 1/256 steps; 0.5/256 rounds away from zero.
        let v = fx.constant(2.0 + 0.5 / 256.0);
        assert_eq!(v, 2 * 256 + 1);
        let w = fx.constant(-(2.0 + 0.5 / 256.0));
        assert_eq!(w, -(2 * 256 + 1));

        let a = fx.constant(1.5);
        let b = fx.constant(2.25);
        let s = fx.add(&a, &b);
        assert_eq!(fx.value(&s), 3.75);
        let p = fx.mul(&a, &b);
        assert_eq!(fx.value(&p), 3.375);
        assert!(!fx.overflowed());

        let huge = fx.constant(1e36);
        let _ = fx.mul(&huge, &huge);
        assert!(fx.overflowed());

        assert!(FixedPoint::new(7).is_err());
        assert!(FixedPoint::new(53).is_err());
    }

    #[test]
    fn tape_matches_plain_bitwise_on_a_small_solve() {
        let cost = QuadraticCost::new(Matrix::diagonal(&[0.5]), vec![-1.0]).unwrap();
        let cons = Ellipsoid::new(Matrix::diagonal(&[1.0]), vec![0.0]).unwrap();
        let p = Problem::new(cost, cons).unwrap();
        let cfg = SolverConfig::new(6, 1.0);
        let plain = solver::solve(&p, &cfg).unwrap();
        let (taped, stats) = tape_solve(&p, &cfg, SecretMarks::encrypted_state()).unwrap();
        for (a, b) in plain.records.iter().zip(&taped.records) {
            assert_eq!(a.x, b.x, "iterate mismatch at k = {}", a.k);
        }
        assert_eq!(plain.final_record.x, taped.final_record.x);
        assert!(stats.ct_ct_muls > 0);
        assert_eq!(taped.circuit, Some(stats));
    }

    #[test]
    fn all_public_run_consumes_nothing() {
        let cost = QuadraticCost::new(Matrix::diagonal(&[0.5]), vec![-1.0]).unwrap();
        let cons = Ellipsoid::new(Matrix::diagonal(&[1.0]), vec![0.0]).unwrap();
        let p = Problem::new(cost, cons).unwrap();
        let cfg = SolverConfig::new(5, 1.0);
        let (_, stats) = tape_solve(&p, &cfg, SecretMarks::all_public()).unwrap();
        assert_eq!(stats, CircuitStats::default());
    }

    #[test]
    fn zero_iteration_tape_is_empty_work() {
        let cost = QuadraticCost::new(Matrix::diagonal(&[0.5]), vec![-1.0]).unwrap();
        let cons = Ellipsoid::new(Matrix::diagonal(&[1.0]), vec![0.0]).unwrap();
        let p = Problem::new(cost, cons).unwrap();
        let cfg = SolverConfig::new(0, 1.0);
        let (trace, stats) = tape_solve(&p, &cfg, SecretMarks::encrypted_state()).unwrap();
        assert_eq!(stats, CircuitStats::default());
        assert_eq!(trace.final_record.x, vec![0.0]);
        assert!(trace.records.is_empty());
    }
}
