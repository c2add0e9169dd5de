//! Sequential gradient descent on the auxiliary cost sequence.
//!
//! The iteration is
//!
//! ```text
//! x_{k+1} = x_k - gamma_k * grad J_k(x_k),      k = 1, ..., N
//! ```
//!
//! with the cost index advancing every step: one gradient step per k, no
//! inner loop, no line search, no stopping test. N is fixed up front
//! because a data-dependent stop would require comparisons on values that
//! may be ciphertexts; the same reasoning rules out any projection step.
//!
//! The update itself is implemented once, in [`descent_step`], generic
//! over the [`Arith`] executors. The plain solver instantiates it with
//! f64; the circuit module instantiates the identical code with a
//! recording tape or fixed-point arithmetic. Equal instruction sequences,
//! bitwise-equal results: the add/mul-only claim is checked by
//! construction rather than by review.
//!
//! Step sizes, m, and the per-step constants are public schedule data,
//! precomputed in plaintext before the kernel runs. Everything recorded in
//! the trace (f, g, J_k, gradient norms) is likewise computed outside the
//! kernel from plaintext shadows; diagnostics never feed back into the
//! iteration.

use crate::circuit::{
    power, Arith, CircuitStats, FixedPointReport, Plain, PowerStrategy, SecretMarks,
};
use crate::error::{Error, Result};
use crate::mat::norm;
use crate::penalty::{PenaltySchedule, StepPolicy};
use crate::quadforms::Problem;
use crate::scaling::{self, ScalingReport};

/// Default slack for the invariance check g(x_k) <= 1 + tol.
pub const INVARIANCE_TOL: f64 = 1e-9;
/// Default slack for the descent chain check.
pub const DESCENT_TOL: f64 = 1e-10;

/// Feasibility slack accepted for a user-supplied start point.
const START_SLACK: f64 = 1e-12;

/// Samples and seed used when a diagnostic solve certifies m internally.
const DIAGNOSTIC_SAMPLES: usize = 256;
const DIAGNOSTIC_SEED: u64 = 0x706f6c79;

/// Where the iteration starts.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum StartPoint {
    /// The ellipsoid center v, feasible for every problem.
    #[default]
    Center,
    /// An explicit point; must satisfy g(x1) <= 1.
    Point(Vec<f64>),
}

/// Everything a solve needs besides the problem itself.
///
/// `iterations` may be 0: the run then records only the start point, which
/// the circuit tooling uses as a baseline. The convergence analysis
/// assumes at least one step.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub iterations: u32,
    /// Penalty scaling; the invariance guarantee needs m >= m_inv but the
    /// solver deliberately accepts smaller values (see `certified`).
    pub m: f64,
    pub step_policy: StepPolicy,
    pub start: StartPoint,
    /// When set, the trace carries invariance/descent check results and a
    /// certification verdict from an internal scaling estimate.
    pub diagnostics: bool,
    pub power_strategy: PowerStrategy,
}

impl SolverConfig {
    pub fn new(iterations: u32, m: f64) -> Self {
        SolverConfig {
            iterations,
            m,
            step_policy: StepPolicy::default(),
            start: StartPoint::default(),
            diagnostics: false,
            power_strategy: PowerStrategy::default(),
        }
    }
}

/// State recorded at the beginning of step k, before the update.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: u32,
    pub x: Vec<f64>,
    pub f: f64,
    pub g: f64,
    /// J_k(x_k).
    pub j: f64,
    /// Euclidean norm of grad J_k(x_k).
    pub grad_norm: f64,
    pub gamma: f64,
    /// J_{k-1}(x_k), the previous stage's cost at this iterate; None at
    /// k = 1. Stored so the descent chain is checkable from the trace
    /// alone.
    pub j_prev: Option<f64>,
}

/// The iterate after the last step.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalRecord {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: f64,
    /// J_{N+1}(x_{N+1}).
    pub j: f64,
    /// Euclidean norm of grad J_{N+1}(x_{N+1}); plaintext-only
    /// convenience, never used to stop the iteration.
    pub grad_norm: f64,
    /// J_N(x_{N+1}); None when no step ran.
    pub j_prev: Option<f64>,
}

/// Result of an invariance or descent scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckOutcome {
    Ok,
    /// First record (by its k) that breaks the property.
    ViolationAt { k: u32 },
}

impl CheckOutcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, CheckOutcome::Ok)
    }
}

/// Check results attached when diagnostics are requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiagnosticsReport {
    pub invariance: CheckOutcome,
    pub descent: CheckOutcome,
}

/// Complete record of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub m: f64,
    /// One record per step, k = 1..N.
    pub records: Vec<IterationRecord>,
    pub final_record: FinalRecord,
    /// Operation counts when run through the tape executor.
    pub circuit: Option<CircuitStats>,
    /// Some(true) when m was checked against an invariance-scaling
    /// estimate and passed; Some(false) when it ran below that estimate
    /// (the iterates are then not covered by the invariance guarantee).
    /// None when certification was not evaluated.
    pub certified: Option<bool>,
    pub diagnostics: Option<DiagnosticsReport>,
    /// The estimate backing `certified`, when one was computed.
    pub scaling: Option<ScalingReport>,
    /// Deviation report for fixed-point runs.
    pub fixed_point: Option<FixedPointReport>,
}

impl SolveTrace {
    pub fn final_x(&self) -> &[f64] {
        &self.final_record.x
    }

    /// CSV with header `k,x[0],..,x[n-1],f,g,J,grad_norm,gamma`; one row
    /// per step plus a final row (k = N+1) with an empty gamma column.
    /// Floats carry 17 significant digits and round-trip exactly.
    pub fn to_csv(&self) -> String {
        let n = self.final_record.x.len();
        let mut out = String::from("k");
        for i in 0..n {
            out.push_str(&format!(",x[{i}]"));
        }
        out.push_str(",f,g,J,grad_norm,gamma\n");
        for r in &self.records {
            out.push_str(&r.k.to_string());
            for xi in &r.x {
                out.push(',');
                out.push_str(&csv_f64(*xi));
            }
            for v in [r.f, r.g, r.j, r.grad_norm, r.gamma] {
                out.push(',');
                out.push_str(&csv_f64(v));
            }
            out.push('\n');
        }
        let f = &self.final_record;
        out.push_str(&(self.records.len() as u32 + 1).to_string());
        for xi in &f.x {
            out.push(',');
            out.push_str(&csv_f64(*xi));
        }
        for v in [f.f, f.g, f.j, f.grad_norm] {
            out.push(',');
            out.push_str(&csv_f64(v));
        }
        out.push_str(",\n");
        out
    }

    /// JSON document with a `schema_version` field. Floats carry 17
    /// significant digits; non-finite values become null.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\"schema_version\":1");
        out.push_str(&format!(",\"m\":{}", json_f64(self.m)));
        out.push_str(&format!(",\"iterations\":{}", self.records.len()));
        out.push_str(",\"records\":[");
        for (i, r) in self.records.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!(
                "{{\"k\":{},\"x\":{},\"f\":{},\"g\":{},\"j\":{},\"grad_norm\":{},\"gamma\":{},\"j_prev\":{}}}",
                r.k,
                json_vec(&r.x),
                json_f64(r.f),
                json_f64(r.g),
                json_f64(r.j),
                json_f64(r.grad_norm),
                json_f64(r.gamma),
                json_opt(r.j_prev),
            ));
        }
        out.push(']');
        let f = &self.final_record;
        out.push_str(&format!(
            ",\"final\":{{\"k\":{},\"x\":{},\"f\":{},\"g\":{},\"j\":{},\"grad_norm\":{},\"j_prev\":{}}}",
            self.records.len() as u32 + 1,
            json_vec(&f.x),
            json_f64(f.f),
            json_f64(f.g),
            json_f64(f.j),
            json_f64(f.grad_norm),
            json_opt(f.j_prev),
        ));
        match self.circuit {
            Some(c) => out.push_str(&format!(
                ",\"circuit\":{{\"adds\":{},\"ct_ct_muls\":{},\"ct_pt_muls\":{},\"max_level\":{}}}",
                c.adds, c.ct_ct_muls, c.ct_pt_muls, c.max_level
            )),
            None => out.push_str(",\"circuit\":null"),
        }
        match self.certified {
            Some(c) => out.push_str(&format!(",\"certified\":{c}")),
            None => out.push_str(",\"certified\":null"),
        }
        match &self.diagnostics {
            Some(d) => out.push_str(&format!(
                ",\"diagnostics\":{{\"invariance\":{},\"descent\":{}}}",
                json_check(d.invariance),
                json_check(d.descent)
            )),
            None => out.push_str(",\"diagnostics\":null"),
        }
        match &self.scaling {
            Some(s) => out.push_str(&format!(
                ",\"scaling\":{{\"m_min_hat\":{},\"m_min\":{},\"m_inv\":{},\"samples\":{},\"certified\":{}}}",
                json_f64(s.m_min_hat),
                json_f64(s.m_min),
                json_f64(s.m_inv),
                s.samples,
                s.certified
            )),
            None => out.push_str(",\"scaling\":null"),
        }
        match &self.fixed_point {
            Some(fp) => out.push_str(&format!(
                ",\"fixed_point\":{{\"fraction_bits\":{},\"max_deviation\":{}}}",
                fp.fraction_bits,
                json_f64(fp.max_deviation)
            )),
            None => out.push_str(",\"fixed_point\":null"),
        }
        out.push('}');
        out
    }
}

fn csv_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn json_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

fn json_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => json_f64(v),
        None => "null".to_string(),
    }
}

fn json_vec(xs: &[f64]) -> String {
    let mut out = String::from("[");
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&json_f64(*x));
    }
    out.push(']');
    out
}

fn json_check(c: CheckOutcome) -> String {
    match c {
        CheckOutcome::Ok => "\"ok\"".to_string(),
        CheckOutcome::ViolationAt { k } => format!("{{\"violation_at\":{k}}}"),
    }
}

/// The feasible start every problem admits: the ellipsoid center.
pub fn default_start(p: &Problem) -> Vec<f64> {
    p.constraint().center().to_vec()
}

/// Scans the trace for g(x_k) > 1 + tol, final iterate included. Returns
/// the first offending k, or Ok for empty traces.
pub fn check_invariance(trace: &SolveTrace, tol: f64) -> CheckOutcome {
    for r in &trace.records {
        if r.g > 1.0 + tol {
            return CheckOutcome::ViolationAt { k: r.k };
        }
    }
    if trace.final_record.g > 1.0 + tol {
        return CheckOutcome::ViolationAt {
            k: trace.records.len() as u32 + 1,
        };
    }
    CheckOutcome::Ok
}

/// Verifies the per-step descent chain
///
/// ```text
/// J_{k+1}(x_{k+1}) <= J_k(x_{k+1}) <= J_k(x_k)
/// ```
///
/// within tol, using the stored intermediate J_k(x_{k+1}) values. A record
/// without `j_prev` (hand-built) is checked directly against its
/// predecessor's j. Returns the k of the first record that breaks the
/// chain; single-entry and empty traces pass.
pub fn check_descent(trace: &SolveTrace, tol: f64) -> CheckOutcome {
    let entries: Vec<(u32, f64, Option<f64>)> = trace
        .records
        .iter()
        .map(|r| (r.k, r.j, r.j_prev))
        .chain(std::iter::once((
            trace.records.len() as u32 + 1,
            trace.final_record.j,
            trace.final_record.j_prev,
        )))
        .collect();
    for pair in entries.windows(2) {
        let (_, j_before, _) = pair[0];
        let (k, j_here, j_prev) = pair[1];
        match j_prev {
            Some(jp) => {
                if jp > j_before + tol || j_here > jp + tol {
                    return CheckOutcome::ViolationAt { k };
                }
            }
            None => {
                if j_here > j_before + tol {
                    return CheckOutcome::ViolationAt { k };
                }
            }
        }
    }
    CheckOutcome::Ok
}

/// Problem data lifted into an executor's value domain. Entries marked
/// secret become ciphertext inputs; the rest are public.
pub(crate) struct Lifted<V> {
    pub n: usize,
    pub hessian: Vec<V>,
    pub linear: Vec<V>,
    pub shape: Vec<V>,
    pub center: Vec<V>,
}

pub(crate) fn lift<A: Arith>(ar: &mut A, p: &Problem, marks: SecretMarks) -> Lifted<A::Value> {
    let n = p.dim();
    let q = p.cost().hessian();
    let a = p.constraint().shape();
    let mut hessian = Vec::with_capacity(n * n);
    let mut shape = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            hessian.push(ar.input(&format!("Q[{i}][{j}]"), q.get(i, j), marks.hessian));
        }
    }
    let linear = p
        .cost()
        .linear()
        .iter()
        .enumerate()
        .map(|(i, &v)| ar.input(&format!("q[{i}]"), v, marks.linear))
        .collect();
    for i in 0..n {
        for j in 0..n {
            shape.push(ar.input(&format!("A[{i}][{j}]"), a.get(i, j), marks.shape));
        }
    }
    let center = p
        .constraint()
        .center()
        .iter()
        .enumerate()
        .map(|(i, &v)| ar.input(&format!("v[{i}]"), v, marks.center))
        .collect();
    Lifted {
        n,
        hessian,
        linear,
        shape,
        center,
    }
}

/// One update x' = x - gamma * grad J_k(x), expressed purely in adds and
/// muls. The evaluation order is fixed and documented because operation
/// counts and depth are pinned against it:
///
/// 1. d = x - v, then w = A d row by row (product, then product-add
///    accumulation). grad g = 2w.
/// 2. grad f = Q x + q with the same accumulation pattern.
/// 3. Penalty gradient 2m g^{k-1} w: for k = 1 just 2m * w; otherwise
///    g = <d, w>, raised to the k-1 power by the configured strategy,
///    scaled by the public constant 2m, then multiplied into each w_i.
/// 4. x' = x - gamma * (grad f + penalty), gamma public.
pub(crate) fn descent_step<A: Arith>(
    ar: &mut A,
    lp: &Lifted<A::Value>,
    x: &[A::Value],
    k: u32,
    m: f64,
    gamma: f64,
    strategy: PowerStrategy,
) -> Vec<A::Value> {
    let n = lp.n;
    let d: Vec<A::Value> = (0..n).map(|i| ar.sub(&x[i], &lp.center[i])).collect();
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let row = &lp.shape[i * n..(i + 1) * n];
        let mut acc = ar.mul(&row[0], &d[0]);
        for (aij, dj) in row.iter().zip(&d).skip(1) {
            let t = ar.mul(aij, dj);
            acc = ar.add(&acc, &t);
        }
        w.push(acc);
    }
    let mut gf = Vec::with_capacity(n);
    for i in 0..n {
        let row = &lp.hessian[i * n..(i + 1) * n];
        let mut acc = ar.mul(&row[0], &x[0]);
        for (qij, xj) in row.iter().zip(x).skip(1) {
            let t = ar.mul(qij, xj);
            acc = ar.add(&acc, &t);
        }
        gf.push(ar.add(&acc, &lp.linear[i]));
    }
    let two_m = ar.constant(2.0 * m);
    let pen: Vec<A::Value> = if k == 1 {
        w.iter().map(|wi| ar.mul(wi, &two_m)).collect()
    } else {
        let mut g = ar.mul(&d[0], &w[0]);
        for i in 1..n {
            let t = ar.mul(&d[i], &w[i]);
            g = ar.add(&g, &t);
        }
        let pw = power(ar, &g, k - 1, strategy);
        let pm = ar.mul(&pw, &two_m);
        w.iter().map(|wi| ar.mul(&pm, wi)).collect()
    };
    let gamma_c = ar.constant(gamma);
    let mut next = Vec::with_capacity(n);
    for i in 0..n {
        let gj = ar.add(&gf[i], &pen[i]);
        let scaled = ar.mul(&gj, &gamma_c);
        next.push(ar.sub(&x[i], &scaled));
    }
    next
}

/// Raw output of a kernel run: the iterates x_1..x_{N+1} (plaintext
/// shadows) and the step sizes used.
pub(crate) struct KernelRun {
    pub iterates: Vec<Vec<f64>>,
    pub gammas: Vec<f64>,
}

pub(crate) fn run_kernel<A: Arith>(
    ar: &mut A,
    p: &Problem,
    cfg: &SolverConfig,
    marks: SecretMarks,
) -> Result<KernelRun> {
    run_kernel_checked(ar, p, cfg, marks, |_, _| Ok(()))
}

/// Runs the kernel, calling `check` after every step (the fixed-point
/// executor uses this to surface overflow with the offending k).
pub(crate) fn run_kernel_checked<A: Arith>(
    ar: &mut A,
    p: &Problem,
    cfg: &SolverConfig,
    marks: SecretMarks,
    mut check: impl FnMut(&A, u32) -> Result<()>,
) -> Result<KernelRun> {
    validate_start(p, cfg)?;
    let schedule = PenaltySchedule::new(p, cfg.m)?;
    let mut gammas = Vec::with_capacity(cfg.iterations as usize);
    for k in 1..=cfg.iterations {
        gammas.push(schedule.step_size(k, &cfg.step_policy)?);
    }

    let lifted = lift(ar, p, marks);
    let mut x: Vec<A::Value> = match &cfg.start {
        StartPoint::Center => lifted.center.clone(),
        StartPoint::Point(x1) => x1
            .iter()
            .enumerate()
            .map(|(i, &xi)| ar.input(&format!("x1[{i}]"), xi, marks.start))
            .collect(),
    };

    let mut iterates = Vec::with_capacity(cfg.iterations as usize + 1);
    iterates.push(x.iter().map(|v| ar.value(v)).collect::<Vec<f64>>());
    for k in 1..=cfg.iterations {
        x = descent_step(
            ar,
            &lifted,
            &x,
            k,
            cfg.m,
            gammas[(k - 1) as usize],
            cfg.power_strategy,
        );
        check(ar, k)?;
        let snapshot: Vec<f64> = x.iter().map(|v| ar.value(v)).collect();
        if snapshot.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFiniteIterate { step: k });
        }
        iterates.push(snapshot);
    }
    Ok(KernelRun { iterates, gammas })
}

fn validate_start(p: &Problem, cfg: &SolverConfig) -> Result<()> {
    if let StartPoint::Point(x1) = &cfg.start {
        if x1.len() != p.dim() {
            return Err(Error::DimensionMismatch {
                name: "x1",
                expected: p.dim(),
                got: x1.len(),
            });
        }
        if x1.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite { name: "x1" });
        }
        let g = p.eval_g(x1);
        if g > 1.0 + START_SLACK {
            return Err(Error::InfeasibleStart { g });
        }
    }
    Ok(())
}

/// Turns raw iterates into the full trace: per-step f, g, J_k, gradient
/// norms, and the J_{k-1} values the descent check needs.
pub(crate) fn build_trace(p: &Problem, cfg: &SolverConfig, run: KernelRun) -> Result<SolveTrace> {
    let schedule = PenaltySchedule::new(p, cfg.m)?;
    let steps = run.gammas.len();
    let mut records = Vec::with_capacity(steps);
    for (idx, &gamma) in run.gammas.iter().enumerate() {
        let k = idx as u32 + 1;
        let x = &run.iterates[idx];
        let j_prev = (k >= 2).then(|| schedule.auxiliary_cost(k - 1, x));
        records.push(IterationRecord {
            k,
            x: x.clone(),
            f: p.eval_f(x),
            g: p.eval_g(x),
            j: schedule.auxiliary_cost(k, x),
            grad_norm: norm(&schedule.auxiliary_grad(k, x)),
            gamma,
            j_prev,
        });
    }
    let x_final = run.iterates.last().expect("kernel always records x1");
    let k_final = steps as u32 + 1;
    let final_record = FinalRecord {
        x: x_final.clone(),
        f: p.eval_f(x_final),
        g: p.eval_g(x_final),
        j: schedule.auxiliary_cost(k_final, x_final),
        grad_norm: norm(&schedule.auxiliary_grad(k_final, x_final)),
        j_prev: (steps >= 1).then(|| schedule.auxiliary_cost(k_final - 1, x_final)),
    };
    let mut trace = SolveTrace {
        m: cfg.m,
        records,
        final_record,
        circuit: None,
        certified: None,
        diagnostics: None,
        scaling: None,
        fixed_point: None,
    };
    if cfg.diagnostics {
        trace.diagnostics = Some(DiagnosticsReport {
            invariance: check_invariance(&trace, INVARIANCE_TOL),
            descent: check_descent(&trace, DESCENT_TOL),
        });
        match scaling::estimate(p, DIAGNOSTIC_SAMPLES, DIAGNOSTIC_SEED, 1.0) {
            Ok(report) => {
                trace.certified = Some(cfg.m + 1e-12 * (1.0 + cfg.m) >= report.m_inv);
                trace.scaling = Some(report);
            }
            Err(err) => log::warn!("certification estimate failed: {err}"),
        }
    }
    Ok(trace)
}

/// Runs the descent in plain f64 and returns the trace.
///
/// m below the invariance scaling is allowed (exploration is useful and
/// often still converges); guarantees are then void and a diagnostic run
/// marks the trace uncertified.
pub fn solve(p: &Problem, cfg: &SolverConfig) -> Result<SolveTrace> {
    let run = run_kernel(&mut Plain, p, cfg, SecretMarks::all_public())?;
    build_trace(p, cfg, run)
}
