//! Estimation of the penalty scaling m from boundary geometry.
//!
//! Two thresholds matter. The feasibility scaling m_min is the smallest m
//! for which the auxiliary gradient makes an acute angle with the outward
//! constraint normal everywhere on the boundary:
//!
//! ```text
//! m_min = max(0, max over g(x)=1 of  -<grad g, grad f> / <grad g, grad g>)
//! ```
//!
//! The invariance scaling m_inv additionally keeps every boundary step
//! inside the constraint set. Writing h = grad f + m grad g and
//! r = sqrt(sigma_min(A)) / sigma_max(A), the condition at a boundary point
//! is
//!
//! ```text
//! |h|^2 <= 2 r L_1(m) <h, grad g> / |grad g|
//! ```
//!
//! which is the squared form of requiring |h| <= 2 r L_1 cos(phi) with phi
//! the angle between h and the normal. A sample where <h, grad g> < 0 makes
//! the right side negative and the sample infeasible, which is exactly the
//! intended reading: no step length can be certified there.
//!
//! Both quantities are estimated on deterministic boundary samples (exact
//! for n = 1, where the boundary is two points) and inflated by a safety
//! factor. Doubling the sample count only refines the same nested sequence,
//! so estimates never decrease as the budget grows.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mat::{dot, norm};
use crate::quadforms::{boundary_samples, spectral_bounds, Problem};

/// Default multiplicative headroom applied to sampled estimates.
pub const DEFAULT_SAFETY: f64 = 1.1;
/// Largest m the invariance scan will consider before giving up.
pub const DEFAULT_SCAN_CAP: f64 = 1e12;

/// Result of a scaling estimation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    /// Raw boundary maximum of -<grad g, grad f>/<grad g, grad g>, before
    /// flooring at zero and before the safety factor. Negative values mean
    /// the cost gradient points inward everywhere.
    pub m_min_hat: f64,
    /// Feasibility scaling: safety * max(0, m_min_hat).
    pub m_min: f64,
    /// Invariance scaling: safety * (smallest sampled-feasible m >= m_min).
    pub m_inv: f64,
    /// Number of boundary samples requested.
    pub samples: usize,
    /// True when the boundary was enumerated exactly (n = 1) rather than
    /// sampled.
    pub certified: bool,
}

/// Which of the two boundary requirements a sample violated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequirementViolation {
    /// 1 for the acute-angle requirement, 2 for the step-containment one.
    pub requirement: u8,
    pub sample_index: usize,
    pub point: Vec<f64>,
    /// Signed slack; negative means violated.
    pub margin: f64,
}

/// Outcome of [`verify_requirements`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RequirementCheck {
    Ok,
    Violations(Vec<RequirementViolation>),
}

/// Estimates both scalings in one pass. `samples` must be at least 2 and
/// `safety` at least 1.
pub fn estimate(p: &Problem, samples: usize, seed: u64, safety: f64) -> Result<ScalingReport> {
    if samples < 2 {
        return Err(Error::InvalidParameter {
            what: format!("scaling estimation needs at least 2 samples, got {samples}"),
        });
    }
    if !safety.is_finite() || safety < 1.0 {
        return Err(Error::InvalidParameter {
            what: format!("safety factor must be at least 1, got {safety}"),
        });
    }

    let pts = boundary_samples(p.constraint(), samples, seed)?;
    let grads: Vec<(Vec<f64>, Vec<f64>)> = pts
        .iter()
        .map(|x| (p.grad_f(x), p.grad_g(x)))
        .collect();

    let mut m_min_hat = f64::NEG_INFINITY;
    for (gf, gg) in &grads {
        let denom = dot(gg, gg);
        // grad g never vanishes on the boundary of a positive definite
        // ellipsoid, so denom > 0 here.
        m_min_hat = m_min_hat.max(-dot(gg, gf) / denom);
    }
    let m_min_pre = m_min_hat.max(0.0);

    let m_inv_pre = if p.dim() == 1 {
        // In one dimension the step-containment requirement reduces to the
        // acute-angle one, so the two scalings coincide.
        m_min_pre
    } else {
        search_invariance_scaling(p, &grads, m_min_pre)?
    };

    Ok(ScalingReport {
        m_min_hat,
        m_min: safety * m_min_pre,
        m_inv: safety * m_inv_pre,
        samples,
        certified: p.dim() == 1,
    })
}

/// Feasibility scaling only. See [`estimate`].
pub fn estimate_m_min(p: &Problem, samples: usize, seed: u64, safety: f64) -> Result<f64> {
    Ok(estimate(p, samples, seed, safety)?.m_min)
}

/// Invariance scaling only. See [`estimate`].
pub fn estimate_m_inv(p: &Problem, samples: usize, seed: u64, safety: f64) -> Result<f64> {
    Ok(estimate(p, samples, seed, safety)?.m_inv)
}

/// Checks both boundary requirements for a given m on a fresh sample set,
/// reporting every violated sample with its signed margin.
pub fn verify_requirements(
    p: &Problem,
    m: f64,
    samples: usize,
    seed: u64,
) -> Result<RequirementCheck> {
    if samples < 2 {
        return Err(Error::InvalidParameter {
            what: format!("verification needs at least 2 samples, got {samples}"),
        });
    }
    let pts = boundary_samples(p.constraint(), samples, seed)?;
    let r = spectral_bounds(p.constraint().shape())?.curvature_radius;
    let l1 = smoothness_l1(p, m)?;

    let mut violations = Vec::new();
    for (idx, x) in pts.iter().enumerate() {
        let gf = p.grad_f(x);
        let gg = p.grad_g(x);
        let margin1 = m - (-dot(&gg, &gf) / dot(&gg, &gg));
        if margin1 < -1e-12 * (1.0 + m.abs()) {
            violations.push(RequirementViolation {
                requirement: 1,
                sample_index: idx,
                point: x.clone(),
                margin: margin1,
            });
        }
        let margin2 = containment_margin(&gf, &gg, m, r, l1);
        if margin2 < -1e-12 * (1.0 + margin2.abs()) {
            violations.push(RequirementViolation {
                requirement: 2,
                sample_index: idx,
                point: x.clone(),
                margin: margin2,
            });
        }
    }
    if violations.is_empty() {
        Ok(RequirementCheck::Ok)
    } else {
        Ok(RequirementCheck::Violations(violations))
    }
}

/// L_1(m) = sigma_max(Q + 2mA).
fn smoothness_l1(p: &Problem, m: f64) -> Result<f64> {
    let combined = p
        .cost()
        .hessian()
        .add_scaled(2.0 * m, p.constraint().shape());
    Ok(spectral_bounds(&combined)?.sigma_max)
}

/// Signed slack of the step-containment condition at one boundary sample:
/// 2 r L_1 <h, grad g>/|grad g| - |h|^2 with h = grad f + m grad g.
fn containment_margin(gf: &[f64], gg: &[f64], m: f64, r: f64, l1: f64) -> f64 {
    let h: Vec<f64> = gf.iter().zip(gg).map(|(a, b)| a + m * b).collect();
    2.0 * r * l1 * dot(&h, gg) / norm(gg) - dot(&h, &h)
}

/// Smallest sampled-feasible m at or above the floor, found by geometric
/// scan and bisection. The bisection keeps its upper end feasible, so the
/// returned value always satisfies the sampled condition.
fn search_invariance_scaling(
    p: &Problem,
    grads: &[(Vec<f64>, Vec<f64>)],
    floor: f64,
) -> Result<f64> {
    let r = spectral_bounds(p.constraint().shape())?.curvature_radius;
    let feasible = |m: f64| -> Result<bool> {
        let l1 = smoothness_l1(p, m)?;
        for (gf, gg) in grads {
            if containment_margin(gf, gg, m, r, l1) < 0.0 {
                return Ok(false);
            }
        }
        Ok(true)
    };

    if feasible(floor)? {
        return Ok(floor);
    }
    let mut lo = floor;
    let mut hi = if floor > 0.0 { floor } else { 1e-6 };
    loop {
        hi *= 2.0;
        if hi > DEFAULT_SCAN_CAP {
            return Err(Error::NoFeasibleScaling {
                cap: DEFAULT_SCAN_CAP,
            });
        }
        if feasible(hi)? {
            break;
        }
        lo = hi;
    }
    // Invariant: lo infeasible, hi feasible.
    for _ in 0..80 {
        if hi - lo <= 1e-6 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.max(floor))
}
